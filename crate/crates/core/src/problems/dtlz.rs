//! DTLZ1–7 and the inverted IDTLZ1–4.
//!
//! DTLZ1–4 and their inverted forms are products of one-variable factors of
//! the position variables times `1 + g(distance variables)`; their derivatives
//! are assembled from the factor derivatives. DTLZ5–7 couple position and
//! distance variables and go through hyper-dual differentiation.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::autodiff::Scalar;
use crate::mop::{AutoDiffMop, Bounds, Mop, ScalarProblem, SharedMop};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtlzVariant {
    Dtlz1,
    Dtlz2,
    Dtlz3,
    Dtlz4,
    Dtlz5,
    Dtlz6,
    Dtlz7,
}

impl DtlzVariant {
    pub fn default_n(self) -> usize {
        match self {
            Self::Dtlz1 => 7,
            _ => 10,
        }
    }
}

const DTLZ4_ALPHA: f64 = 100.0;

#[derive(Debug, Clone, Copy)]
enum Factor {
    Lin,
    OneMinus,
    Cos(f64),
    Sin(f64),
}

impl Factor {
    fn eval(self, x: f64) -> (f64, f64, f64) {
        let angle = |alpha: f64| -> (f64, f64, f64) {
            let h = 0.5 * PI;
            if alpha == 1.0 {
                (h * x, h, 0.0)
            } else {
                (
                    h * x.powf(alpha),
                    h * alpha * x.powf(alpha - 1.0),
                    h * alpha * (alpha - 1.0) * x.powf(alpha - 2.0),
                )
            }
        };
        match self {
            Self::Lin => (x, 1.0, 0.0),
            Self::OneMinus => (1.0 - x, -1.0, 0.0),
            Self::Cos(alpha) => {
                let (t, dt, ddt) = angle(alpha);
                let (s, c) = t.sin_cos();
                (c, -s * dt, -c * dt * dt - s * ddt)
            }
            Self::Sin(alpha) => {
                let (t, dt, ddt) = angle(alpha);
                let (s, c) = t.sin_cos();
                (s, c * dt, -s * dt * dt + c * ddt)
            }
        }
    }
}

/// DTLZ1–4 and IDTLZ1–4 with closed-form derivatives.
pub struct ProductDtlz {
    variant: DtlzVariant,
    inverted: bool,
    n: usize,
    k: usize,
    name: String,
    bounds: Bounds,
    /// Per objective: `(variable, factor)` pairs.
    factors: Vec<Vec<(usize, Factor)>>,
    scale: f64,
}

impl ProductDtlz {
    pub fn new(variant: DtlzVariant, n: usize, k: usize, inverted: bool) -> Self {
        assert!(
            matches!(
                variant,
                DtlzVariant::Dtlz1 | DtlzVariant::Dtlz2 | DtlzVariant::Dtlz3 | DtlzVariant::Dtlz4
            ),
            "product form covers DTLZ1-4"
        );
        assert!(k >= 2 && n >= k, "DTLZ needs k >= 2 and n >= k");
        let alpha = if variant == DtlzVariant::Dtlz4 { DTLZ4_ALPHA } else { 1.0 };
        let factors = (0..k)
            .map(|i| {
                let mut f: Vec<(usize, Factor)> = Vec::new();
                for j in 0..k - 1 - i {
                    f.push((
                        j,
                        if variant == DtlzVariant::Dtlz1 {
                            Factor::Lin
                        } else {
                            Factor::Cos(alpha)
                        },
                    ));
                }
                if i > 0 {
                    f.push((
                        k - 1 - i,
                        if variant == DtlzVariant::Dtlz1 {
                            Factor::OneMinus
                        } else {
                            Factor::Sin(alpha)
                        },
                    ));
                }
                f
            })
            .collect();
        let base = format!("{variant:?}").to_lowercase();
        let name = if inverted { format!("i{base}") } else { base };
        Self {
            variant,
            inverted,
            n,
            k,
            name,
            bounds: Bounds::uniform(n, 0.0, 1.0),
            factors,
            scale: if variant == DtlzVariant::Dtlz1 { 0.5 } else { 1.0 },
        }
    }

    fn multimodal_g(&self) -> bool {
        matches!(self.variant, DtlzVariant::Dtlz1 | DtlzVariant::Dtlz3)
    }

    /// `g` and its (diagonal) first and second derivatives over the distance variables.
    fn g(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let tail = &x[self.k - 1..];
        if self.multimodal_g() {
            let w = 20.0 * PI;
            let mut val = tail.len() as f64;
            let mut d = Vec::with_capacity(tail.len());
            let mut dd = Vec::with_capacity(tail.len());
            for v in tail {
                let y = v - 0.5;
                val += y * y - (w * y).cos();
                d.push(100.0 * (2.0 * y + w * (w * y).sin()));
                dd.push(100.0 * (2.0 + w * w * (w * y).cos()));
            }
            (100.0 * val, d, dd)
        } else {
            let val = tail.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
            let d = tail.iter().map(|v| 2.0 * (v - 0.5)).collect();
            (val, d, vec![2.0; tail.len()])
        }
    }
}

impl Mop for ProductDtlz {
    fn name(&self) -> &str {
        &self.name
    }
    fn n(&self) -> usize {
        self.n
    }
    fn k(&self) -> usize {
        self.k
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        let (g, _, _) = self.g(x);
        self.factors
            .iter()
            .map(|fs| {
                let p: f64 = fs.iter().map(|(j, f)| f.eval(x[*j]).0).product();
                let q = if self.inverted { 1.0 - p } else { p };
                self.scale * (1.0 + g) * q
            })
            .collect()
    }

    fn jac_f(&self, x: &[f64]) -> DMatrix<f64> {
        self.f_derivatives(x).1
    }

    fn hess_f(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.f_derivatives(x).2
    }

    fn f_derivatives(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        let (n, k) = (self.n, self.k);
        let (g, dg, ddg) = self.g(x);
        let sign = if self.inverted { -1.0 } else { 1.0 };
        let mut values = Vec::with_capacity(k);
        let mut jac = DMatrix::zeros(k, n);
        let mut hess = Vec::with_capacity(k);

        for (i, fs) in self.factors.iter().enumerate() {
            let evals: Vec<(f64, f64, f64)> = fs.iter().map(|(j, f)| f.eval(x[*j])).collect();
            // product with factor a replaced by its derivative of order oa, and
            // factor b by order ob
            let prod = |a: Option<(usize, usize)>, b: Option<(usize, usize)>| -> f64 {
                evals
                    .iter()
                    .enumerate()
                    .map(|(m, e)| {
                        let order = [a, b]
                            .iter()
                            .flatten()
                            .filter(|(idx, _)| *idx == m)
                            .map(|(_, o)| *o)
                            .sum::<usize>();
                        match order {
                            0 => e.0,
                            1 => e.1,
                            _ => e.2,
                        }
                    })
                    .product()
            };
            let p = prod(None, None);
            let q = if self.inverted { 1.0 - p } else { p };
            let c = self.scale;
            values.push(c * (1.0 + g) * q);

            let mut h = DMatrix::zeros(n, n);
            let dp: Vec<f64> = (0..fs.len()).map(|a| sign * prod(Some((a, 1)), None)).collect();
            for (a, (ja, _)) in fs.iter().enumerate() {
                jac[(i, *ja)] = c * (1.0 + g) * dp[a];
                for (b, (jb, _)) in fs.iter().enumerate() {
                    let v = if a == b {
                        sign * prod(Some((a, 2)), None)
                    } else {
                        sign * prod(Some((a, 1)), Some((b, 1)))
                    };
                    h[(*ja, *jb)] = c * (1.0 + g) * v;
                }
                for (d, dgd) in dg.iter().enumerate() {
                    let jd = k - 1 + d;
                    let v = c * dp[a] * dgd;
                    h[(*ja, jd)] = v;
                    h[(jd, *ja)] = v;
                }
            }
            for (d, dgd) in dg.iter().enumerate() {
                let jd = k - 1 + d;
                jac[(i, jd)] = c * q * dgd;
                h[(jd, jd)] = c * q * ddg[d];
            }
            hess.push(h);
        }
        (values, jac, hess)
    }
}

/// DTLZ5–7, differentiated through [`AutoDiffMop`].
pub struct CoupledDtlz {
    variant: DtlzVariant,
    n: usize,
    k: usize,
    name: String,
}

impl CoupledDtlz {
    pub fn new(variant: DtlzVariant, n: usize, k: usize) -> Self {
        assert!(
            matches!(variant, DtlzVariant::Dtlz5 | DtlzVariant::Dtlz6 | DtlzVariant::Dtlz7),
            "coupled form covers DTLZ5-7"
        );
        assert!(k >= 2 && n >= k, "DTLZ needs k >= 2 and n >= k");
        Self {
            variant,
            n,
            k,
            name: format!("{variant:?}").to_lowercase(),
        }
    }
}

impl ScalarProblem for CoupledDtlz {
    fn name(&self) -> &str {
        &self.name
    }
    fn n(&self) -> usize {
        self.n
    }
    fn k(&self) -> usize {
        self.k
    }
    fn bounds(&self) -> Bounds {
        Bounds::uniform(self.n, 0.0, 1.0)
    }

    fn objectives<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let k = self.k;
        let tail = &x[k - 1..];
        match self.variant {
            DtlzVariant::Dtlz7 => {
                let mut g = S::cst(0.0);
                for v in tail {
                    g += *v;
                }
                let g = g * (9.0 / tail.len() as f64) + 1.0;
                let mut h = S::cst(k as f64);
                let mut out: Vec<S> = x[..k - 1].to_vec();
                for f in &out {
                    h -= *f / (g + 1.0) * ((*f * (3.0 * PI)).sin() + 1.0);
                }
                out.push((g + 1.0) * h);
                out
            }
            _ => {
                let mut g = S::cst(0.0);
                for v in tail {
                    g += if self.variant == DtlzVariant::Dtlz5 {
                        (*v - 0.5) * (*v - 0.5)
                    } else {
                        v.powf(0.1)
                    };
                }
                let mut theta = Vec::with_capacity(k - 1);
                theta.push(x[0] * (0.5 * PI));
                for xi in &x[1..k - 1] {
                    theta.push((*xi * g * 2.0 + 1.0) / (g + 1.0) * (0.25 * PI));
                }
                let one_g = g + 1.0;
                (0..k)
                    .map(|i| {
                        let mut f = one_g;
                        for t in &theta[..k - 1 - i] {
                            f *= t.cos();
                        }
                        if i > 0 {
                            f *= theta[k - 1 - i].sin();
                        }
                        f
                    })
                    .collect()
            }
        }
    }
}

pub fn make_dtlz(variant: DtlzVariant, n: usize, k: usize, inverted: bool) -> SharedMop {
    match variant {
        DtlzVariant::Dtlz1 | DtlzVariant::Dtlz2 | DtlzVariant::Dtlz3 | DtlzVariant::Dtlz4 => {
            Arc::new(ProductDtlz::new(variant, n, k, inverted))
        }
        _ => {
            assert!(!inverted, "only IDTLZ1-4 exist");
            Arc::new(AutoDiffMop::new(CoupledDtlz::new(variant, n, k)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::second_order_check;

    #[test]
    fn optimal_points_land_on_fronts() {
        let d1 = make_dtlz(DtlzVariant::Dtlz1, 7, 3, false);
        let mut x = vec![0.5; 7];
        x[0] = 0.3;
        x[1] = 0.8;
        let f = d1.eval_f(&x);
        assert!((f.iter().sum::<f64>() - 0.5).abs() < 1e-12);

        let d2 = make_dtlz(DtlzVariant::Dtlz2, 10, 3, false);
        let f = d2.eval_f(&x.iter().chain([0.5; 3].iter()).copied().collect::<Vec<_>>());
        assert!((f.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_differences() {
        let x: Vec<f64> = (0..11).map(|i| 0.1 + 0.07 * i as f64).collect();
        for (v, inv) in [
            (DtlzVariant::Dtlz1, false),
            (DtlzVariant::Dtlz2, false),
            (DtlzVariant::Dtlz3, false),
            (DtlzVariant::Dtlz4, false),
            (DtlzVariant::Dtlz1, true),
            (DtlzVariant::Dtlz2, true),
            (DtlzVariant::Dtlz5, false),
            (DtlzVariant::Dtlz6, false),
            (DtlzVariant::Dtlz7, false),
        ] {
            let mop = make_dtlz(v, 11, 3, inv);
            let r = second_order_check(mop.as_ref(), &x).unwrap();
            assert!(r.passes(1e-5), "{v:?} inverted={inv}: {r:?}");
        }
    }

    #[test]
    fn four_objective_dtlz2() {
        let mop = make_dtlz(DtlzVariant::Dtlz2, 8, 4, false);
        let x: Vec<f64> = (0..8).map(|i| 0.2 + 0.05 * i as f64).collect();
        assert!(second_order_check(mop.as_ref(), &x).unwrap().passes(1e-5));
    }
}
