//! CONV4-2F: four convex quadratics whose front splits into two pieces.
//!
//! For `x` with every component negative the objectives are the same
//! quadratics centred one unit lower and shifted by `−3.5σ`; elsewhere they are
//! plain squared distances to the unit vectors. Derivatives use the branch that
//! is active at the query point.

use nalgebra::DMatrix;

use crate::mop::{Bounds, Mop};

pub const SIGMA: [f64; 4] = [2.0, 0.0, 0.0, -2.0];
pub const SHIFT: f64 = 3.5;

pub struct Conv42f {
    bounds: Bounds,
}

impl Default for Conv42f {
    fn default() -> Self {
        Self::new()
    }
}

impl Conv42f {
    pub fn new() -> Self {
        Self {
            bounds: Bounds::uniform(4, -3.0, 3.0),
        }
    }

    pub fn lower_branch(x: &[f64]) -> bool {
        x.iter().all(|v| *v < 0.0)
    }

    /// Objectives of a point `y` on the upper branch.
    pub fn upper_objectives(y: &[f64]) -> Vec<f64> {
        (0..4)
            .map(|i| {
                y.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let d = v - if i == j { 1.0 } else { 0.0 };
                        d * d
                    })
                    .sum()
            })
            .collect()
    }
}

impl Mop for Conv42f {
    fn name(&self) -> &str {
        "conv4_2f"
    }
    fn n(&self) -> usize {
        4
    }
    fn k(&self) -> usize {
        4
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        if Self::lower_branch(x) {
            let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
            Self::upper_objectives(&y)
                .into_iter()
                .zip(SIGMA)
                .map(|(f, s)| f - SHIFT * s)
                .collect()
        } else {
            Self::upper_objectives(x)
        }
    }

    fn jac_f(&self, x: &[f64]) -> DMatrix<f64> {
        let off = if Self::lower_branch(x) { 1.0 } else { 0.0 };
        DMatrix::from_fn(4, 4, |i, j| {
            2.0 * (x[j] + off - if i == j { 1.0 } else { 0.0 })
        })
    }

    fn hess_f(&self, _x: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::identity(4, 4) * 2.0; 4]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::second_order_check;

    #[test]
    fn branches() {
        let p = Conv42f::new();
        assert_eq!(p.eval_f(&[1.0, 0.0, 0.0, 0.0]), vec![0.0, 2.0, 2.0, 2.0]);
        // x + 1 = e_1 on the lower branch
        let f = p.eval_f(&[-1e-12, -1.0, -1.0, -1.0]);
        assert!((f[0] - (0.0 - 7.0)).abs() < 1e-9);
        assert!((f[3] - (2.0 + 7.0)).abs() < 1e-9);
    }

    #[test]
    fn smooth_away_from_the_switch() {
        let p = Conv42f::new();
        let r = second_order_check(&p, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(r.passes(1e-5), "{r:?}");
        let r = second_order_check(&p, &[-1.2, -0.4, -2.0, -0.7]).unwrap();
        assert!(r.passes(1e-5), "{r:?}");
    }
}
