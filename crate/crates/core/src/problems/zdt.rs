//! ZDT1–4 and ZDT6 with closed-form derivatives.
//!
//! Every member has the shape `f1 = φ(x1)`, `f2 = G(f1, g(x2..xn))`, so the
//! derivatives follow from the chain rule once `φ`, `g` and the two-variable
//! `G` are differentiated by hand.

use nalgebra::DMatrix;

use crate::mop::{Bounds, Mop};

/// Floor applied to arguments of square roots and negative powers so that
/// derivatives stay finite on the boundary `x1 = 0` (or `Σx = 0` for ZDT6).
const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZdtVariant {
    Zdt1,
    Zdt2,
    Zdt3,
    Zdt4,
    Zdt6,
}

impl ZdtVariant {
    pub fn default_n(self) -> usize {
        match self {
            Self::Zdt1 | Self::Zdt2 | Self::Zdt3 => 30,
            Self::Zdt4 | Self::Zdt6 => 10,
        }
    }
}

pub struct Zdt {
    variant: ZdtVariant,
    n: usize,
    name: String,
    bounds: Bounds,
}

/// Value, first and second derivative of a scalar function.
type D2 = (f64, f64, f64);

/// `G(a, b)` with its gradient and Hessian `(G, G_a, G_b, G_aa, G_ab, G_bb)`.
type G2 = (f64, f64, f64, f64, f64, f64);

impl Zdt {
    pub fn new(variant: ZdtVariant, n: usize) -> Self {
        assert!(n >= 2, "ZDT problems need at least two variables");
        let bounds = match variant {
            ZdtVariant::Zdt4 => {
                let mut lower = vec![-5.0; n];
                let mut upper = vec![5.0; n];
                lower[0] = 0.0;
                upper[0] = 1.0;
                Bounds { lower, upper }
            }
            _ => Bounds::uniform(n, 0.0, 1.0),
        };
        let name = format!("{variant:?}").to_lowercase();
        Self {
            variant,
            n,
            name,
            bounds,
        }
    }

    pub fn variant(&self) -> ZdtVariant {
        self.variant
    }

    fn phi(&self, x1: f64) -> D2 {
        match self.variant {
            ZdtVariant::Zdt6 => {
                let w = 6.0 * std::f64::consts::PI;
                let e = (-4.0 * x1).exp();
                let (s, c) = (w * x1).sin_cos();
                // q = e s⁶, f1 = 1 − q
                let q = e * s.powi(6);
                let dq = e * s.powi(5) * (-4.0 * s + 6.0 * w * c);
                let d2q = (-4.0 * e * s.powi(5) + 5.0 * e * s.powi(4) * c * w) * (-4.0 * s + 6.0 * w * c)
                    + e * s.powi(5) * (-4.0 * w * c - 6.0 * w * w * s);
                (1.0 - q, -dq, -d2q)
            }
            _ => (x1, 1.0, 0.0),
        }
    }

    /// `g`, its gradient over `x2..xn`, and its Hessian over the same block.
    fn g(&self, x: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let tail = &x[1..];
        let m = tail.len();
        let mf = m as f64;
        match self.variant {
            ZdtVariant::Zdt4 => {
                let four_pi = 4.0 * std::f64::consts::PI;
                let val = 1.0
                    + 10.0 * mf
                    + tail
                        .iter()
                        .map(|v| v * v - 10.0 * (four_pi * v).cos())
                        .sum::<f64>();
                let grad = tail
                    .iter()
                    .map(|v| 2.0 * v + 10.0 * four_pi * (four_pi * v).sin())
                    .collect();
                let hess = DMatrix::from_fn(m, m, |i, j| {
                    if i == j {
                        2.0 + 10.0 * four_pi * four_pi * (four_pi * tail[i]).cos()
                    } else {
                        0.0
                    }
                });
                (val, grad, hess)
            }
            ZdtVariant::Zdt6 => {
                let u = (tail.iter().sum::<f64>() / mf).max(FLOOR);
                let val = 1.0 + 9.0 * u.powf(0.25);
                let d = 9.0 * 0.25 * u.powf(-0.75) / mf;
                let dd = 9.0 * 0.25 * -0.75 * u.powf(-1.75) / (mf * mf);
                (val, vec![d; m], DMatrix::from_element(m, m, dd))
            }
            _ => {
                let c = 9.0 / mf;
                let val = 1.0 + c * tail.iter().sum::<f64>();
                (val, vec![c; m], DMatrix::zeros(m, m))
            }
        }
    }

    fn outer(&self, a: f64, b: f64) -> G2 {
        let sqrt_family = |a: f64, b: f64| -> G2 {
            // G = b − √(ab)
            let af = a.max(FLOOR);
            let s = (a * b).max(0.0).sqrt();
            (
                b - s,
                -0.5 * (b / af).sqrt(),
                1.0 - 0.5 * (a / b).sqrt(),
                0.25 * b.sqrt() / af.powf(1.5),
                -0.25 / (af * b).sqrt(),
                0.25 * a.sqrt() / b.powf(1.5),
            )
        };
        match self.variant {
            ZdtVariant::Zdt1 | ZdtVariant::Zdt4 => sqrt_family(a, b),
            ZdtVariant::Zdt2 | ZdtVariant::Zdt6 => (
                // G = b − a²/b
                b - a * a / b,
                -2.0 * a / b,
                1.0 + a * a / (b * b),
                -2.0 / b,
                2.0 * a / (b * b),
                -2.0 * a * a / (b * b * b),
            ),
            ZdtVariant::Zdt3 => {
                let (g, ga, gb, gaa, gab, gbb) = sqrt_family(a, b);
                let w = 10.0 * std::f64::consts::PI;
                let (s, c) = (w * a).sin_cos();
                (
                    g - a * s,
                    ga - s - w * a * c,
                    gb,
                    gaa - 2.0 * w * c + w * w * a * s,
                    gab,
                    gbb,
                )
            }
        }
    }
}

impl Mop for Zdt {
    fn name(&self) -> &str {
        &self.name
    }
    fn n(&self) -> usize {
        self.n
    }
    fn k(&self) -> usize {
        2
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        let (f1, _, _) = self.phi(x[0]);
        let (g, _, _) = self.g(x);
        vec![f1, self.outer(f1, g).0]
    }

    fn jac_f(&self, x: &[f64]) -> DMatrix<f64> {
        self.f_derivatives(x).1
    }

    fn hess_f(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.f_derivatives(x).2
    }

    fn f_derivatives(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = self.n;
        let (f1, d1, dd1) = self.phi(x[0]);
        let (g, dg, ddg) = self.g(x);
        let (val, ga, gb, gaa, gab, gbb) = self.outer(f1, g);

        let mut jac = DMatrix::zeros(2, n);
        jac[(0, 0)] = d1;
        jac[(1, 0)] = ga * d1;
        for i in 1..n {
            jac[(1, i)] = gb * dg[i - 1];
        }

        let mut h1 = DMatrix::zeros(n, n);
        h1[(0, 0)] = dd1;
        let mut h2 = DMatrix::zeros(n, n);
        h2[(0, 0)] = gaa * d1 * d1 + ga * dd1;
        for i in 1..n {
            let cross = gab * d1 * dg[i - 1];
            h2[(0, i)] = cross;
            h2[(i, 0)] = cross;
            for j in 1..n {
                h2[(i, j)] = gbb * dg[i - 1] * dg[j - 1] + gb * ddg[(i - 1, j - 1)];
            }
        }
        (vec![f1, val], jac, vec![h1, h2])
    }
}

/// `f1` intervals of the five ZDT3 front pieces. Each left end after the first
/// ties in `f2` with the previous right end, so it is weakly dominated.
pub const ZDT3_ARCS: [(f64, f64); 5] = [
    (0.0, 0.083001534926911633),
    (0.18222872802939978, 0.25776236338783022),
    (0.40931367480865684, 0.45388210408883017),
    (0.61839679443926579, 0.65251170380466252),
    (0.82333179832663274, 0.8518328654364139),
];

/// Smallest attainable `f1` of ZDT6, i.e. `1 − max e^{−4x} sin⁶(6πx)` on the
/// first lobe.
pub fn zdt6_min_f1() -> f64 {
    let q = |x: f64| (-4.0 * x).exp() * (6.0 * std::f64::consts::PI * x).sin().powi(6);
    let (mut a, mut b) = (0.0, 1.0 / 6.0);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if q(c) > q(d) {
            b = d;
        } else {
            a = c;
        }
    }
    1.0 - q(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::second_order_check;

    #[test]
    fn zdt1_hand_values() {
        let p = Zdt::new(ZdtVariant::Zdt1, 3);
        assert_eq!(p.eval_f(&[0.0, 0.0, 0.0]), vec![0.0, 1.0]);
        assert_eq!(p.eval_f(&[1.0, 0.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn derivatives_match_differences() {
        for v in [ZdtVariant::Zdt1, ZdtVariant::Zdt2, ZdtVariant::Zdt3, ZdtVariant::Zdt4, ZdtVariant::Zdt6] {
            let p = Zdt::new(v, 6);
            let x = [0.37, 0.21, 0.44, 0.05, 0.63, 0.3];
            let r = second_order_check(&p, &x).unwrap();
            assert!(r.passes(1e-5), "{v:?}: {r:?}");
        }
    }

    #[test]
    fn boundary_derivatives_are_finite() {
        let p = Zdt::new(ZdtVariant::Zdt1, 4);
        let (_, j, h) = p.f_derivatives(&[0.0, 0.0, 0.0, 0.0]);
        assert!(j.iter().chain(h.iter().flat_map(|m| m.iter())).all(|v| v.is_finite()));
    }

    #[test]
    fn zdt6_front_start() {
        assert!((zdt6_min_f1() - 0.2807753191).abs() < 1e-9);
    }
}
