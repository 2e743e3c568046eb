//! CF1–CF10: box plus one or two nonlinear inequality constraints.
//!
//! Constraints are stated in the usual `c(x) ≥ 0` form and exposed as
//! `g(x) = −c(x) ≤ 0`.

use std::f64::consts::PI;

use crate::autodiff::Scalar;
use crate::mop::{Bounds, ScalarProblem};

pub struct Cf {
    id: usize,
    n: usize,
    name: String,
}

impl Cf {
    pub fn new(id: usize, n: usize) -> Self {
        assert!((1..=10).contains(&id), "CF ids run from 1 to 10");
        let min_n = if id >= 8 { 5 } else { 4 };
        assert!(n >= min_n, "CF{id} needs at least {min_n} variables");
        Self {
            id,
            n,
            name: format!("cf{id}"),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }
}

fn sq<S: Scalar>(v: S) -> S {
    v * v
}

/// `sign(v)·√|v|`, branching on the real part.
fn signed_sqrt<S: Scalar>(v: S) -> S {
    if v.re() >= 0.0 {
        v.sqrt()
    } else {
        -((-v).sqrt())
    }
}

/// Piecewise term used on `x2` by CF4 and CF5.
fn h2<S: Scalar>(t: S) -> S {
    if t.re() < 1.5 * (1.0 - std::f64::consts::FRAC_1_SQRT_2) {
        t.abs()
    } else {
        sq(t - 1.0) + 0.125
    }
}

impl ScalarProblem for Cf {
    fn name(&self) -> &str {
        &self.name
    }
    fn n(&self) -> usize {
        self.n
    }
    fn k(&self) -> usize {
        if self.id >= 8 {
            3
        } else {
            2
        }
    }
    fn m(&self) -> usize {
        if matches!(self.id, 6 | 7) {
            2
        } else {
            1
        }
    }

    fn bounds(&self) -> Bounds {
        let n = self.n;
        match self.id {
            1 => Bounds::uniform(n, 0.0, 1.0),
            2 => {
                let mut b = Bounds::uniform(n, -1.0, 1.0);
                b.lower[0] = 0.0;
                b
            }
            8 => {
                let mut b = Bounds::uniform(n, -4.0, 4.0);
                b.lower[..2].fill(0.0);
                b.upper[..2].fill(1.0);
                b
            }
            9 | 10 => {
                let mut b = Bounds::uniform(n, -2.0, 2.0);
                b.lower[..2].fill(0.0);
                b.upper[..2].fill(1.0);
                b
            }
            _ => {
                let mut b = Bounds::uniform(n, -2.0, 2.0);
                b.lower[0] = 0.0;
                b.upper[0] = 1.0;
                b
            }
        }
    }

    fn objectives<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n;
        let nf = n as f64;
        let x1 = x[0];
        // j is the 1-based variable index throughout.
        let phase = |j: usize| x1 * (6.0 * PI) + (j as f64) * PI / nf;
        match self.id {
            1..=7 => {
                let odd = |j: usize| j % 2 == 1;
                let mut s1 = S::cst(0.0);
                let mut s2 = S::cst(0.0);
                let (mut c1, mut c2) = (0usize, 0usize);
                let mut prod1 = S::cst(1.0);
                let mut prod2 = S::cst(1.0);
                for j in 2..=n {
                    let xj = x[j - 1];
                    let (y, term) = match self.id {
                        1 => {
                            let e = 0.5 * (1.0 + 3.0 * (j as f64 - 2.0) / (nf - 2.0));
                            let y = xj - x1.powf(e);
                            (y, sq(y))
                        }
                        2 => {
                            let y = if odd(j) { xj - phase(j).sin() } else { xj - phase(j).cos() };
                            (y, sq(y))
                        }
                        3 | 4 => {
                            let y = xj - phase(j).sin();
                            let term = if self.id == 4 {
                                if j == 2 {
                                    h2(y)
                                } else {
                                    sq(y)
                                }
                            } else {
                                sq(y)
                            };
                            (y, term)
                        }
                        5 | 6 => {
                            let y = if odd(j) {
                                xj - x1 * 0.8 * phase(j).cos()
                            } else {
                                xj - x1 * 0.8 * phase(j).sin()
                            };
                            let term = if self.id == 6 {
                                sq(y)
                            } else if j == 2 {
                                h2(y)
                            } else {
                                sq(y) * 2.0 - (y * (4.0 * PI)).cos() + 1.0
                            };
                            (y, term)
                        }
                        _ => {
                            let y = if odd(j) { xj - phase(j).cos() } else { xj - phase(j).sin() };
                            let term = if j == 2 || j == 4 {
                                sq(y)
                            } else {
                                sq(y) * 2.0 - (y * (4.0 * PI)).cos() + 1.0
                            };
                            (y, term)
                        }
                    };
                    if odd(j) {
                        s1 += term;
                        c1 += 1;
                        if self.id == 3 {
                            prod1 *= (y * (20.0 * PI) / (j as f64).sqrt()).cos();
                        }
                    } else {
                        s2 += term;
                        c2 += 1;
                        if self.id == 3 {
                            prod2 *= (y * (20.0 * PI) / (j as f64).sqrt()).cos();
                        }
                    }
                }
                let (a1, a2) = match self.id {
                    1 | 2 => (s1 * (2.0 / c1 as f64), s2 * (2.0 / c2 as f64)),
                    3 => (
                        (s1 * 4.0 - prod1 * 2.0 + 2.0) * (2.0 / c1 as f64),
                        (s2 * 4.0 - prod2 * 2.0 + 2.0) * (2.0 / c2 as f64),
                    ),
                    _ => (s1, s2),
                };
                let base2 = match self.id {
                    2 => -x1.sqrt() + 1.0,
                    3 => -sq(x1) + 1.0,
                    6 | 7 => sq(-x1 + 1.0),
                    _ => -x1 + 1.0,
                };
                vec![x1 + a1, base2 + a2]
            }
            _ => {
                let x2 = x[1];
                let mut sums = [S::cst(0.0); 3];
                let mut counts = [0usize; 3];
                for j in 3..=n {
                    let y = x[j - 1] - x2 * 2.0 * (x1 * (2.0 * PI) + (j as f64) * PI / nf).sin();
                    let term = if self.id == 10 {
                        sq(y) * 4.0 - (y * (8.0 * PI)).cos() + 1.0
                    } else {
                        sq(y)
                    };
                    // J1: j − 1 ≡ 0, J2: j − 2 ≡ 0, J3: j ≡ 0 (mod 3)
                    let slot = (j + 2) % 3;
                    sums[slot] += term;
                    counts[slot] += 1;
                }
                let avg = |s: usize| sums[s] * (2.0 / counts[s] as f64);
                let (a, b) = (x1 * (0.5 * PI), x2 * (0.5 * PI));
                vec![
                    a.cos() * b.cos() + avg(0),
                    a.cos() * b.sin() + avg(1),
                    a.sin() + avg(2),
                ]
            }
        }
    }

    fn inequalities<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n as f64;
        let x1 = x[0];
        let f = self.objectives(x);
        let c: Vec<S> = match self.id {
            1 => {
                let (a, big_n) = (1.0, 10.0);
                vec![f[0] + f[1] - ((f[0] - f[1] + 1.0) * (big_n * PI)).sin().abs() * a - 1.0]
            }
            2 => {
                let (a, big_n) = (1.0, 2.0);
                let r = f[0].sqrt();
                let t = f[1] + r - ((r - f[1] + 1.0) * (big_n * PI)).sin() * a - 1.0;
                vec![t / ((t.abs() * 4.0).exp() + 1.0)]
            }
            3 => {
                let (a, big_n) = (1.0, 2.0);
                let s = sq(f[0]);
                vec![f[1] + s - ((s - f[1] + 1.0) * (big_n * PI)).sin() * a - 1.0]
            }
            4 => {
                let t = x[1] - (x1 * (6.0 * PI) + 2.0 * PI / n).sin() - x1 * 0.5 + 0.25;
                vec![t / ((t.abs() * 4.0).exp() + 1.0)]
            }
            5 => vec![x[1] - x1 * 0.8 * (x1 * (6.0 * PI) + 2.0 * PI / n).sin() - x1 * 0.5 + 0.25],
            6 | 7 => {
                let damp = if self.id == 6 { x1 * 0.8 } else { S::cst(1.0) };
                let one_m = -x1 + 1.0;
                let v1 = one_m * 0.5 - sq(one_m);
                let v2 = one_m.sqrt() * 0.25 - one_m * 0.5;
                vec![
                    x[1] - damp * (x1 * (6.0 * PI) + 2.0 * PI / n).sin() - signed_sqrt(v1),
                    x[3] - damp * (x1 * (6.0 * PI) + 4.0 * PI / n).sin() - signed_sqrt(v2),
                ]
            }
            _ => {
                let (a, big_n) = match self.id {
                    8 => (4.0, 2.0),
                    9 => (3.0, 2.0),
                    _ => (1.0, 2.0),
                };
                let denom = -sq(f[2]) + 1.0;
                let q = (sq(f[0]) - sq(f[1])) / denom;
                let wave = ((q + 1.0) * (big_n * PI)).sin();
                let wave = if self.id == 8 { wave.abs() } else { wave };
                vec![(sq(f[0]) + sq(f[1])) / denom - wave * a - 1.0]
            }
        };
        c.into_iter().map(|v| -v).collect()
    }
}

/// Closed-form Pareto front pieces of CF1–CF7 as `(f1 range, f2(f1))`.
pub(crate) fn cf2d_front(id: usize) -> (Vec<(f64, f64)>, fn(f64) -> f64) {
    fn lin(f1: f64) -> f64 {
        1.0 - f1
    }
    fn root(f1: f64) -> f64 {
        1.0 - f1.sqrt()
    }
    fn quad(f1: f64) -> f64 {
        1.0 - f1 * f1
    }
    fn kinked(f1: f64) -> f64 {
        if f1 <= 0.5 {
            1.0 - f1
        } else if f1 <= 0.75 {
            -0.5 * f1 + 0.75
        } else {
            1.0 - f1 + 0.125
        }
    }
    fn bent(f1: f64) -> f64 {
        if f1 <= 0.5 {
            (1.0 - f1) * (1.0 - f1)
        } else if f1 <= 0.75 {
            0.5 * (1.0 - f1)
        } else {
            0.25 * (1.0 - f1).sqrt()
        }
    }
    match id {
        1 => ((0..=20).map(|i| (i as f64 / 20.0, i as f64 / 20.0)).collect(), lin),
        2 => (vec![(0.0, 0.0), (1.0 / 16.0, 0.25), (9.0 / 16.0, 1.0)], root),
        3 => (
            vec![(0.0, 0.0), (0.5, 0.5f64.sqrt()), (0.75f64.sqrt(), 1.0)],
            quad,
        ),
        4 | 5 => (vec![(0.0, 1.0)], kinked),
        _ => (vec![(0.0, 1.0)], bent),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::{AutoDiffMop, Mop};

    fn optimal_x(cf: &Cf, x1: f64) -> Vec<f64> {
        let n = cf.n as f64;
        let mut x = vec![0.0; cf.n];
        x[0] = x1;
        for j in 2..=cf.n {
            let ph = 6.0 * PI * x1 + j as f64 * PI / n;
            x[j - 1] = match cf.id {
                1 => x1.powf(0.5 * (1.0 + 3.0 * (j as f64 - 2.0) / (n - 2.0))),
                2 => {
                    if j % 2 == 1 {
                        ph.sin()
                    } else {
                        ph.cos()
                    }
                }
                _ => ph.sin(),
            };
        }
        x
    }

    #[test]
    fn front_points_are_feasible() {
        for id in 1..=3 {
            let cf = Cf::new(id, 10);
            let (pieces, curve) = cf2d_front(id);
            for (lo, hi) in pieces {
                for t in [lo, 0.5 * (lo + hi), hi] {
                    // on the optimal manifold f1 = x1
                    let x = optimal_x(&cf, t);
                    let f = cf.objectives(&x);
                    assert!((f[0] - t).abs() < 1e-12);
                    assert!((f[1] - curve(t)).abs() < 1e-12, "cf{id} at {t}");
                    let g = cf.inequalities(&x);
                    assert!(g[0] <= 1e-9, "cf{id} infeasible at f1={t}: {g:?}");
                }
            }
        }
    }

    #[test]
    fn dimensions() {
        for id in 1..=10 {
            let mop = AutoDiffMop::new(Cf::new(id, 10));
            let x: Vec<f64> = (0..10).map(|i| 0.1 + 0.05 * i as f64).collect();
            assert_eq!(mop.eval_f(&x).len(), if id >= 8 { 3 } else { 2 });
            assert_eq!(mop.eval_g(&x).len(), mop.m());
            assert_eq!(mop.jac_g(&x).shape(), (mop.m(), 10));
        }
    }
}
