//! Multi-objective problem definitions and derivative evaluation.
//!
//! A problem is anything implementing [`Mop`]: objectives `F: R^n → R^k`,
//! equalities `h: R^n → R^p`, inequalities `g(x) ≤ 0` with `g: R^n → R^m`, box
//! bounds, and exact first/second-order derivatives. Problems written once
//! against [`Scalar`] via [`ScalarProblem`] get their derivatives from
//! forward-mode hyper-dual arithmetic through [`AutoDiffMop`].

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::autodiff::{HyperDual, Scalar};
use crate::error::{DpnError, Result};

/// Box bounds `lower_i ≤ x_i ≤ upper_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(DpnError::InvalidArgument(format!(
                "bounds length mismatch: {} vs {}",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(DpnError::InvalidArgument(format!(
                "lower bound not below upper bound at variable {i}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; n],
            upper: vec![hi; n],
        }
    }

    pub fn unbounded(n: usize) -> Self {
        Self::uniform(n, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Largest amount by which `x` leaves the box (0 when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// A multi-objective optimization problem with exact derivatives.
///
/// Jacobians are `rows × n` with one row per function component. Hessian lists
/// hold one `n × n` matrix per component.
pub trait Mop: Send + Sync {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn p(&self) -> usize {
        0
    }
    fn m(&self) -> usize {
        0
    }
    fn bounds(&self) -> &Bounds;

    fn eval_f(&self, x: &[f64]) -> Vec<f64>;
    fn eval_h(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn eval_g(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn jac_f(&self, x: &[f64]) -> DMatrix<f64>;
    fn hess_f(&self, x: &[f64]) -> Vec<DMatrix<f64>>;
    fn jac_h(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(0, self.n())
    }
    fn jac_g(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(0, self.n())
    }

    /// Constraint Hessians, only needed by the validation-only full Newton
    /// system that keeps the curvature term of the constraints.
    fn hess_h(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        fd_hessians(x, self.p(), |y| self.jac_h(y))
    }
    fn hess_g(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        fd_hessians(x, self.m(), |y| self.jac_g(y))
    }

    /// Value, Jacobian and Hessians of `F` in one call.
    fn f_derivatives(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        (self.eval_f(x), self.jac_f(x), self.hess_f(x))
    }
}

pub type SharedMop = Arc<dyn Mop>;

/// Central differences of a Jacobian map, one Hessian per row.
fn fd_hessians(
    x: &[f64],
    rows: usize,
    jac: impl Fn(&[f64]) -> DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    let n = x.len();
    let mut out = vec![DMatrix::zeros(n, n); rows];
    if rows == 0 {
        return out;
    }
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let jp = jac(&xp);
        xp[j] = x[j] - h;
        let jm = jac(&xp);
        xp[j] = x[j];
        for (r, hess) in out.iter_mut().enumerate() {
            for i in 0..n {
                hess[(i, j)] = (jp[(r, i)] - jm[(r, i)]) / (2.0 * h);
            }
        }
    }
    for hess in &mut out {
        let sym = (&*hess + hess.transpose()) * 0.5;
        *hess = sym;
    }
    out
}

/// A decision vector with cached objective and constraint values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    pub x: Vec<f64>,
    pub fx: Vec<f64>,
    pub hx: Vec<f64>,
    pub gx: Vec<f64>,
}

impl EvaluatedPoint {
    pub fn evaluate(mop: &dyn Mop, x: Vec<f64>) -> Self {
        let fx = mop.eval_f(&x);
        let hx = mop.eval_h(&x);
        let gx = mop.eval_g(&x);
        Self { x, fx, hx, gx }
    }

    /// Largest equality residual or inequality excess; 0 for feasible points.
    pub fn max_violation(&self) -> f64 {
        let h = self.hx.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let g = self.gx.iter().map(|v| v.max(0.0)).fold(0.0, f64::max);
        h.max(g)
    }

    /// Summed violation used by ε-constraint handling.
    pub fn total_violation(&self) -> f64 {
        self.hx.iter().map(|v| v.abs()).sum::<f64>()
            + self.gx.iter().map(|v| v.max(0.0)).sum::<f64>()
    }
}

/// A population viewed as a point of `R^{μn}` together with its multipliers.
///
/// Multipliers are kept for every constraint in the Newton layout (`p + m + 2n`
/// per individual, see `newton::ConstraintLayout`); entries of constraints that
/// are not active stay at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetIterate {
    pub points: Vec<Vec<f64>>,
    pub multipliers: Vec<Vec<f64>>,
}

impl SetIterate {
    pub fn new(points: Vec<Vec<f64>>, n_multipliers: usize) -> Self {
        let multipliers = vec![vec![0.0; n_multipliers]; points.len()];
        Self { points, multipliers }
    }

    pub fn mu(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The stacked vector `X = (x^(1), …, x^(μ))`.
    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[f64], n: usize, n_multipliers: usize) -> Result<Self> {
        if n == 0 || !flat.len().is_multiple_of(n) {
            return Err(DpnError::InvalidArgument(format!(
                "flat length {} is not a multiple of n = {n}",
                flat.len()
            )));
        }
        let points = flat.chunks(n).map(<[f64]>::to_vec).collect();
        Ok(Self::new(points, n_multipliers))
    }
}

/// Evaluates `F`, `h`, `g` at every member of the iterate.
pub fn evaluate_set(mop: &dyn Mop, iterate: &SetIterate) -> Result<Vec<EvaluatedPoint>> {
    let n = mop.n();
    iterate
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != n {
                return Err(DpnError::Dimension {
                    index: i,
                    expected: n,
                    actual: x.len(),
                });
            }
            Ok(EvaluatedPoint::evaluate(mop, x.clone()))
        })
        .collect()
}

/// Wraps a problem so that its box bounds also appear as inequalities:
/// `lower_i − x_i ≤ 0` for all `i`, then `x_i − upper_i ≤ 0` for all `i`, appended
/// after the native inequalities.
pub struct BoxInequalities {
    inner: SharedMop,
    name: String,
}

impl BoxInequalities {
    /// Index of the first box-derived inequality.
    pub fn box_offset(&self) -> usize {
        self.inner.m()
    }

    pub fn inner(&self) -> &SharedMop {
        &self.inner
    }
}

pub fn box_to_inequalities(mop: SharedMop) -> SharedMop {
    let name = format!("{}+box", mop.name());
    Arc::new(BoxInequalities { inner: mop, name })
}

impl Mop for BoxInequalities {
    fn name(&self) -> &str {
        &self.name
    }
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn k(&self) -> usize {
        self.inner.k()
    }
    fn p(&self) -> usize {
        self.inner.p()
    }
    fn m(&self) -> usize {
        self.inner.m() + 2 * self.inner.n()
    }
    fn bounds(&self) -> &Bounds {
        self.inner.bounds()
    }
    fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        self.inner.eval_f(x)
    }
    fn eval_h(&self, x: &[f64]) -> Vec<f64> {
        self.inner.eval_h(x)
    }
    fn eval_g(&self, x: &[f64]) -> Vec<f64> {
        let b = self.inner.bounds();
        let mut g = self.inner.eval_g(x);
        g.extend(x.iter().zip(&b.lower).map(|(v, lo)| lo - v));
        g.extend(x.iter().zip(&b.upper).map(|(v, hi)| v - hi));
        g
    }
    fn jac_f(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.jac_f(x)
    }
    fn hess_f(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.inner.hess_f(x)
    }
    fn f_derivatives(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        self.inner.f_derivatives(x)
    }
    fn jac_h(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.jac_h(x)
    }
    fn jac_g(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let native = self.inner.jac_g(x);
        let m0 = native.nrows();
        let mut jac = DMatrix::zeros(m0 + 2 * n, n);
        jac.rows_mut(0, m0).copy_from(&native);
        for i in 0..n {
            jac[(m0 + i, i)] = -1.0;
            jac[(m0 + n + i, i)] = 1.0;
        }
        jac
    }
    fn hess_h(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.inner.hess_h(x)
    }
    fn hess_g(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.n();
        let mut out = self.inner.hess_g(x);
        out.extend(std::iter::repeat_n(DMatrix::zeros(n, n), 2 * n));
        out
    }
}

/// Maximum relative deviation per derivative block, as produced by
/// [`second_order_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub jac_f: f64,
    pub hess_f: f64,
    pub jac_h: f64,
    pub jac_g: f64,
}

impl DerivativeReport {
    pub fn max_error(&self) -> f64 {
        self.jac_f.max(self.hess_f).max(self.jac_h).max(self.jac_g)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_error() <= tol
    }
}

/// Largest `|a − b|` in a block, relative to `max(1, max |b|)`.
pub fn block_relative_error(analytic: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let scale = reference.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    analytic
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Richardson-extrapolated central difference of a vector function along
/// coordinate `j`: `(4·D(h/2) − D(h))/3`, accurate to `O(h⁴)`.
fn richardson_column(x: &[f64], j: usize, base: f64, eval: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut central = |h: f64| -> Result<Vec<f64>> {
        xp[j] = x[j] + h;
        let fp = eval(&xp);
        xp[j] = x[j] - h;
        let fm = eval(&xp);
        xp[j] = x[j];
        if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
            return Err(DpnError::NonFinite("function near probe point".into()));
        }
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let h = base * (1.0 + x[j].abs());
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Compares the analytic derivatives of `mop` against extrapolated central
/// differences with base steps `1e-4·(1 + |x_i|)` and `1e-6·(1 + |x_i|)`,
/// keeping the smaller error per block. Rapidly oscillating problems (CF3
/// away from its Pareto set) need the small step; smooth ones the large.
///
/// Hessians are checked against differences of the analytic Jacobian.
pub fn second_order_check(mop: &dyn Mop, x: &[f64]) -> Result<DerivativeReport> {
    let a = check_at_step(mop, x, 1e-4)?;
    let b = check_at_step(mop, x, 1e-6)?;
    Ok(DerivativeReport {
        jac_f: a.jac_f.min(b.jac_f),
        hess_f: a.hess_f.min(b.hess_f),
        jac_h: a.jac_h.min(b.jac_h),
        jac_g: a.jac_g.min(b.jac_g),
    })
}

fn check_at_step(mop: &dyn Mop, x: &[f64], base: f64) -> Result<DerivativeReport> {
    let n = mop.n();
    if x.len() != n {
        return Err(DpnError::Dimension {
            index: 0,
            expected: n,
            actual: x.len(),
        });
    }
    if mop.eval_f(x).iter().any(|e| !e.is_finite()) {
        return Err(DpnError::NonFinite("objective at probe point".into()));
    }

    let fd_jac = |eval: &dyn Fn(&[f64]) -> Vec<f64>, rows: usize| -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(rows, n);
        for j in 0..n {
            for (r, v) in richardson_column(x, j, base, eval)?.into_iter().enumerate() {
                jac[(r, j)] = v;
            }
        }
        Ok(jac)
    };

    let jac_f = block_relative_error(&mop.jac_f(x), &fd_jac(&|y| mop.eval_f(y), mop.k())?);
    let jac_h = if mop.p() > 0 {
        block_relative_error(&mop.jac_h(x), &fd_jac(&|y| mop.eval_h(y), mop.p())?)
    } else {
        0.0
    };
    let jac_g = if mop.m() > 0 {
        block_relative_error(&mop.jac_g(x), &fd_jac(&|y| mop.eval_g(y), mop.m())?)
    } else {
        0.0
    };

    // column j of every objective Hessian, from the flattened Jacobian
    let (k, hess) = (mop.k(), mop.hess_f(x));
    let mut fd = vec![DMatrix::zeros(n, n); k];
    for j in 0..n {
        let col = richardson_column(x, j, base, &|y| mop.jac_f(y).transpose().as_slice().to_vec())?;
        for (l, block) in fd.iter_mut().enumerate() {
            for i in 0..n {
                block[(i, j)] = col[l * n + i];
            }
        }
    }
    let hess_f = hess
        .iter()
        .zip(&fd)
        .map(|(a, b)| block_relative_error(a, b))
        .fold(0.0, f64::max);
    Ok(DerivativeReport {
        jac_f,
        hess_f,
        jac_h,
        jac_g,
    })
}

/// A problem written once against [`Scalar`]; see [`AutoDiffMop`].
pub trait ScalarProblem: Send + Sync {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn p(&self) -> usize {
        0
    }
    fn m(&self) -> usize {
        0
    }
    fn bounds(&self) -> Bounds;
    fn objectives<S: Scalar>(&self, x: &[S]) -> Vec<S>;
    fn equalities<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        Vec::new()
    }
    fn inequalities<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        Vec::new()
    }
}

/// Derivatives of a [`ScalarProblem`] by hyper-dual forward mode.
pub struct AutoDiffMop<P> {
    problem: P,
    bounds: Bounds,
}

impl<P: ScalarProblem> AutoDiffMop<P> {
    pub fn new(problem: P) -> Self {
        let bounds = problem.bounds();
        Self { problem, bounds }
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    fn jacobian(&self, x: &[f64], rows: usize, eval: impl Fn(&[HyperDual]) -> Vec<HyperDual>) -> DMatrix<f64> {
        let n = x.len();
        let mut jac = DMatrix::zeros(rows, n);
        let mut xs: Vec<HyperDual> = x.iter().map(|&v| HyperDual::cst(v)).collect();
        for j in 0..n {
            xs[j].e1 = 1.0;
            let out = eval(&xs);
            xs[j].e1 = 0.0;
            for r in 0..rows {
                jac[(r, j)] = out[r].e1;
            }
        }
        jac
    }

    fn hessians(
        &self,
        x: &[f64],
        rows: usize,
        eval: impl Fn(&[HyperDual]) -> Vec<HyperDual>,
    ) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = x.len();
        let mut values = vec![0.0; rows];
        let mut jac = DMatrix::zeros(rows, n);
        let mut hess = vec![DMatrix::zeros(n, n); rows];
        let mut xs: Vec<HyperDual> = x.iter().map(|&v| HyperDual::cst(v)).collect();
        for i in 0..n {
            xs[i].e1 = 1.0;
            for j in i..n {
                xs[j].e2 = 1.0;
                let out = eval(&xs);
                xs[j].e2 = 0.0;
                for r in 0..rows {
                    if i == j {
                        jac[(r, i)] = out[r].e1;
                        values[r] = out[r].re;
                    }
                    hess[r][(i, j)] = out[r].e12;
                    hess[r][(j, i)] = out[r].e12;
                }
            }
            xs[i].e1 = 0.0;
        }
        if n == 0 {
            values = eval(&xs).iter().map(|v| v.re).collect();
        }
        (values, jac, hess)
    }
}

impl<P: ScalarProblem> Mop for AutoDiffMop<P> {
    fn name(&self) -> &str {
        self.problem.name()
    }
    fn n(&self) -> usize {
        self.problem.n()
    }
    fn k(&self) -> usize {
        self.problem.k()
    }
    fn p(&self) -> usize {
        self.problem.p()
    }
    fn m(&self) -> usize {
        self.problem.m()
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn eval_f(&self, x: &[f64]) -> Vec<f64> {
        self.problem.objectives(x)
    }
    fn eval_h(&self, x: &[f64]) -> Vec<f64> {
        self.problem.equalities(x)
    }
    fn eval_g(&self, x: &[f64]) -> Vec<f64> {
        self.problem.inequalities(x)
    }
    fn jac_f(&self, x: &[f64]) -> DMatrix<f64> {
        self.jacobian(x, self.k(), |y| self.problem.objectives(y))
    }
    fn hess_f(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.hessians(x, self.k(), |y| self.problem.objectives(y)).2
    }
    fn f_derivatives(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        self.hessians(x, self.k(), |y| self.problem.objectives(y))
    }
    fn jac_h(&self, x: &[f64]) -> DMatrix<f64> {
        self.jacobian(x, self.p(), |y| self.problem.equalities(y))
    }
    fn jac_g(&self, x: &[f64]) -> DMatrix<f64> {
        self.jacobian(x, self.m(), |y| self.problem.inequalities(y))
    }
    fn hess_h(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.hessians(x, self.p(), |y| self.problem.equalities(y)).2
    }
    fn hess_g(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.hessians(x, self.m(), |y| self.problem.inequalities(y)).2
    }
}
