//! Set-based Newton steps on GD, IGD and matched formulations, with
//! active-set inequality handling, Armijo backtracking and the target-shifting
//! outer loop.
//!
//! Box bounds are handled as inequalities: the constraint vector of an
//! individual is `h` (length `p`), then `g` (length `m`), then `lower − x`
//! (length `n`), then `x − upper` (length `n`). Multipliers and active indices
//! refer to this layout.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpnError, Result};
use crate::indicators::{delta_p, nearest_assignment};
use crate::mop::{Mop, SetIterate};
use crate::numerics::linalg::{least_squares_min_norm, solve_linear};
use crate::numerics::{dist, dist2};

/// Index layout of the stacked constraint vector of one individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintLayout {
    pub p: usize,
    pub m: usize,
    pub n: usize,
}

impl ConstraintLayout {
    pub fn of(mop: &dyn Mop) -> Self {
        Self {
            p: mop.p(),
            m: mop.m(),
            n: mop.n(),
        }
    }

    pub fn len(&self) -> usize {
        self.p + self.m + 2 * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self, j: usize) -> usize {
        self.p + self.m + j
    }

    pub fn upper(&self, j: usize) -> usize {
        self.p + self.m + self.n + j
    }

    pub fn is_equality(&self, c: usize) -> bool {
        c < self.p
    }
}

/// Constraint values and Jacobian at one point, in [`ConstraintLayout`] order.
struct Constraints {
    values: Vec<f64>,
    jac: DMatrix<f64>,
}

fn constraint_values(mop: &dyn Mop, x: &[f64]) -> Vec<f64> {
    let b = mop.bounds();
    let mut v = mop.eval_h(x);
    v.extend(mop.eval_g(x));
    v.extend(x.iter().zip(&b.lower).map(|(xi, lo)| lo - xi));
    v.extend(x.iter().zip(&b.upper).map(|(xi, hi)| xi - hi));
    v
}

fn constraints(mop: &dyn Mop, x: &[f64]) -> Constraints {
    let lay = ConstraintLayout::of(mop);
    let n = lay.n;
    let mut jac = DMatrix::zeros(lay.len(), n);
    if lay.p > 0 {
        jac.rows_mut(0, lay.p).copy_from(&mop.jac_h(x));
    }
    if lay.m > 0 {
        jac.rows_mut(lay.p, lay.m).copy_from(&mop.jac_g(x));
    }
    for j in 0..n {
        jac[(lay.lower(j), j)] = -1.0;
        jac[(lay.upper(j), j)] = 1.0;
    }
    Constraints {
        values: constraint_values(mop, x),
        jac,
    }
}

/// Constraint indices treated as equalities, per individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub layout: ConstraintLayout,
    pub per_individual: Vec<Vec<usize>>,
}

impl ActiveSet {
    /// Equalities only.
    pub fn equalities(layout: ConstraintLayout, mu: usize) -> Self {
        Self {
            layout,
            per_individual: vec![(0..layout.p).collect(); mu],
        }
    }

    pub fn contains(&self, individual: usize, constraint: usize) -> bool {
        self.per_individual[individual].binary_search(&constraint).is_ok()
    }

    /// Number of active inequalities (including bounds) of one individual.
    pub fn inequality_count(&self, individual: usize) -> usize {
        self.per_individual[individual]
            .iter()
            .filter(|&&c| !self.layout.is_equality(c))
            .count()
    }
}

/// Stationarity and feasibility parts of the KKT residual `R(X, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub stationarity: Vec<f64>,
    pub feasibility: Vec<f64>,
    pub norm: f64,
}

impl KktResidual {
    fn from_parts(stationarity: Vec<f64>, feasibility: Vec<f64>) -> Self {
        let norm = stationarity
            .iter()
            .chain(&feasibility)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        Self {
            stationarity,
            feasibility,
            norm,
        }
    }
}

/// Which GD/IGD comparison selects the GD step in [`delta_p_step`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchRule {
    /// GD step when `GD₂² < IGD₂²`, IGD step otherwise.
    #[default]
    GdWhenSmaller,
    /// GD step when `GD₂² > IGD₂²`, IGD step otherwise.
    GdWhenLarger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Matched,
    Gd,
    Igd,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Matched => "matched",
            Branch::Gd => "gd",
            Branch::Igd => "igd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonParams {
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Lower bound of the penalty weight in the merit function.
    pub rho: f64,
    /// Relative near-activity tolerance; scaled by `1 + max |g|`.
    pub active_tol: f64,
    pub activation_rounds: usize,
    pub line_search: bool,
    pub branch_rule: BranchRule,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_halvings: 25,
            rho: 10.0,
            active_tol: 1e-6,
            activation_rounds: 4,
            line_search: true,
            branch_rule: BranchRule::default(),
        }
    }
}

/// Result of one block solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStep {
    pub dx: Vec<f64>,
    /// Change of the full multiplier vector (zero outside the active set).
    pub dlambda: Vec<f64>,
    pub fallback: bool,
}

/// Objective data at one point.
struct Linearization {
    f: Vec<f64>,
    jac: DMatrix<f64>,
    hess: Vec<DMatrix<f64>>,
    cons: Constraints,
}

fn linearize(mop: &dyn Mop, x: &[f64], index: usize) -> Result<Linearization> {
    if x.len() != mop.n() {
        return Err(DpnError::Dimension {
            index,
            expected: mop.n(),
            actual: x.len(),
        });
    }
    let (f, jac, hess) = mop.f_derivatives(x);
    let finite = f.iter().chain(jac.iter()).chain(hess.iter().flat_map(|h| h.iter())).all(|v| v.is_finite());
    if !finite {
        return Err(DpnError::NonFinite(format!("objective derivatives of individual {index}")));
    }
    Ok(Linearization {
        f,
        jac,
        hess,
        cons: constraints(mop, x),
    })
}

/// `m F − Σ z` over the given targets.
fn target_residual(f: &[f64], targets: &[&[f64]]) -> Vec<f64> {
    let m = targets.len() as f64;
    let mut r: Vec<f64> = f.iter().map(|v| m * v).collect();
    for z in targets {
        for (ri, zi) in r.iter_mut().zip(z.iter()) {
            *ri -= zi;
        }
    }
    r
}

fn active_rows(lin: &Linearization, active: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = lin.jac.ncols();
    let h = DMatrix::from_fn(active.len(), n, |r, c| lin.cons.jac[(active[r], c)]);
    let v = DVector::from_iterator(active.len(), active.iter().map(|&a| lin.cons.values[a]));
    if h.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(DpnError::NonFinite("active constraints".into()));
    }
    Ok((h, v))
}

/// Solves `[D Hᵀ; H 0][Δx; λ⁺] = −[s Jᵀr; h]` with `D = s(m JᵀJ + Σ r_l ∇²f_l)`.
/// Without targets the step is the feasibility correction `Δx = −H⁺h`.
fn solve_block(
    lin: &Linearization,
    targets: &[&[f64]],
    scale: f64,
    active: &[usize],
    gauss_newton: bool,
) -> Result<(DVector<f64>, DVector<f64>, bool)> {
    let n = lin.jac.ncols();
    let na = active.len();
    let (h, hv) = active_rows(lin, active)?;
    if targets.is_empty() {
        let dx = if na == 0 {
            DVector::zeros(n)
        } else {
            least_squares_min_norm(&h, &(-&hv))?
        };
        return Ok((dx, DVector::zeros(na), false));
    }
    let r = DVector::from_vec(target_residual(&lin.f, targets));
    let mut d = lin.jac.transpose() * &lin.jac * (targets.len() as f64);
    if !gauss_newton {
        for (hl, rl) in lin.hess.iter().zip(r.iter()) {
            if *rl != 0.0 {
                d += hl * *rl;
            }
        }
    }
    d *= scale;
    let grad = lin.jac.transpose() * &r * scale;
    let mut k = DMatrix::zeros(n + na, n + na);
    k.view_mut((0, 0), (n, n)).copy_from(&d);
    if na > 0 {
        k.view_mut((n, 0), (na, n)).copy_from(&h);
        k.view_mut((0, n), (n, na)).copy_from(&h.transpose());
    }
    let mut rhs = DVector::zeros(n + na);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    if na > 0 {
        rhs.rows_mut(n, na).copy_from(&(-hv));
    }
    let sol = solve_linear(&k, &rhs)?;
    Ok((sol.x.rows(0, n).into_owned(), sol.x.rows(n, na).into_owned(), sol.fallback))
}

fn block_step(
    mop: &dyn Mop,
    x: &[f64],
    lambda: &[f64],
    targets: &[&[f64]],
    scale: f64,
    active: &[usize],
) -> Result<BlockStep> {
    let lin = linearize(mop, x, 0)?;
    let len = ConstraintLayout::of(mop).len();
    let (dx, lam, fallback) = solve_block(&lin, targets, scale, active, false)?;
    let mut dlambda: Vec<f64> = (0..len).map(|c| -lambda.get(c).copied().unwrap_or(0.0)).collect();
    for (a, l) in active.iter().zip(lam.iter()) {
        dlambda[*a] += l;
    }
    Ok(BlockStep {
        dx: dx.iter().copied().collect(),
        dlambda,
        fallback,
    })
}

/// Newton step of one individual on `GD₂²` towards `z_target`.
pub fn gd_newton_block(
    mop: &dyn Mop,
    x: &[f64],
    lambda: &[f64],
    z_target: &[f64],
    active: &[usize],
    mu: usize,
) -> Result<BlockStep> {
    block_step(mop, x, lambda, &[z_target], 2.0 / mu as f64, active)
}

/// Newton step of one individual on `IGD₂²` towards the targets it attracts.
/// With nothing attracted only the feasibility correction is applied.
pub fn igd_newton_block(
    mop: &dyn Mop,
    x: &[f64],
    lambda: &[f64],
    attracted: &[&[f64]],
    active: &[usize],
    big_m: usize,
) -> Result<BlockStep> {
    block_step(mop, x, lambda, attracted, 2.0 / big_m as f64, active)
}

/// `1e-6·(1 + max |g|)` over the finite inequality values of the population.
pub fn active_tolerance(mop: &dyn Mop, iterate: &SetIterate, rel: f64) -> f64 {
    let p = mop.p();
    let scale = iterate
        .points
        .iter()
        .flat_map(|x| constraint_values(mop, x).into_iter().skip(p))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    rel * (1.0 + scale)
}

fn activated(cons: &Constraints, layout: &ConstraintLayout, dx: &[f64], tol: f64, current: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = current.to_vec();
    for c in layout.p..layout.len() {
        if current.contains(&c) || !(cons.values[c] > -tol) {
            continue;
        }
        let slope: f64 = cons.jac.row(c).iter().zip(dx).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            out.push(c);
        }
    }
    out.sort_unstable();
    out
}

/// Equalities plus the inequalities that are nearly active and that
/// `direction` would not move away from.
pub fn activate_inequalities(mop: &dyn Mop, iterate: &SetIterate, direction: &[Vec<f64>], tol: f64) -> ActiveSet {
    let layout = ConstraintLayout::of(mop);
    let per_individual = iterate
        .points
        .iter()
        .zip(direction)
        .map(|(x, d)| {
            let cons = constraints(mop, x);
            activated(&cons, &layout, d, tol, &(0..layout.p).collect::<Vec<_>>())
        })
        .collect();
    ActiveSet { layout, per_individual }
}

/// Per-individual targets of one step formulation.
struct Plan<'a> {
    branch: Branch,
    targets: Vec<Vec<&'a [f64]>>,
    scale: f64,
}

fn matched_plan<'a>(z: &'a [Vec<f64>], mu: usize) -> Plan<'a> {
    Plan {
        branch: Branch::Matched,
        targets: z.iter().map(|t| vec![t.as_slice()]).collect(),
        scale: 2.0 / mu as f64,
    }
}

fn images(mop: &dyn Mop, iterate: &SetIterate) -> Result<Vec<Vec<f64>>> {
    iterate
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != mop.n() {
                return Err(DpnError::Dimension {
                    index: i,
                    expected: mop.n(),
                    actual: x.len(),
                });
            }
            let f = mop.eval_f(x);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(DpnError::NonFinite(format!("objectives of individual {i}")));
            }
            Ok(f)
        })
        .collect()
}

fn branch_plan<'a>(
    fx: &[Vec<f64>],
    z: &'a [Vec<f64>],
    rule: BranchRule,
) -> Result<Plan<'a>> {
    let report = delta_p(fx, z, 2)?;
    let gd_first = match rule {
        BranchRule::GdWhenSmaller => report.gd2sq < report.igd2sq,
        BranchRule::GdWhenLarger => report.gd2sq > report.igd2sq,
    };
    let asg = nearest_assignment(fx, z);
    if !asg.unique() {
        log::debug!("nearest assignment has ties; using the lowest index");
    }
    Ok(if gd_first {
        Plan {
            branch: Branch::Gd,
            targets: asg.j.iter().map(|&j| vec![z[j].as_slice()]).collect(),
            scale: 2.0 / fx.len() as f64,
        }
    } else {
        Plan {
            branch: Branch::Igd,
            targets: asg
                .attracted
                .iter()
                .map(|a| a.iter().map(|&l| z[l].as_slice()).collect())
                .collect(),
            scale: 2.0 / z.len() as f64,
        }
    })
}

/// Outcome of one individual's step.
struct IndividualStep {
    x: Vec<f64>,
    lambda: Vec<f64>,
    active: Vec<usize>,
    step: f64,
    fallback: bool,
    stationarity: Vec<f64>,
    feasibility: Vec<f64>,
}

fn merit(mop: &dyn Mop, x: &[f64], targets: &[&[f64]], active: &[usize], rho: f64) -> f64 {
    let f = mop.eval_f(x);
    let obj: f64 = targets.iter().map(|z| dist2(&f, z)).sum();
    if active.is_empty() {
        return obj;
    }
    let c = constraint_values(mop, x);
    obj + rho * active.iter().map(|&a| c[a] * c[a]).sum::<f64>()
}

/// Least-squares multipliers and the KKT residual blocks at a linearization.
fn residual_parts(lin: &Linearization, targets: &[&[f64]], scale: f64, active: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = lin.jac.ncols();
    let (h, hv) = active_rows(lin, active)?;
    let grad = if targets.is_empty() {
        DVector::zeros(n)
    } else {
        lin.jac.transpose() * DVector::from_vec(target_residual(&lin.f, targets)) * scale
    };
    let stat = if active.is_empty() {
        grad
    } else {
        let ht = h.transpose();
        let lam = least_squares_min_norm(&ht, &(-&grad))?;
        grad + ht * lam
    };
    Ok((stat.iter().copied().collect(), hv.iter().copied().collect()))
}

#[allow(clippy::too_many_arguments)]
fn step_individual(
    mop: &dyn Mop,
    index: usize,
    x: &[f64],
    targets: &[&[f64]],
    scale: f64,
    fixed_active: Option<&[usize]>,
    tol: f64,
    params: &NewtonParams,
) -> Result<IndividualStep> {
    let layout = ConstraintLayout::of(mop);
    let lin = linearize(mop, x, index)?;

    let mut active: Vec<usize> = match fixed_active {
        Some(a) => a.to_vec(),
        None => (0..layout.p).collect(),
    };
    let (mut dx, mut lam, mut fallback) = solve_block(&lin, targets, scale, &active, false)?;
    if fixed_active.is_none() {
        for _ in 0..params.activation_rounds {
            let next = activated(&lin.cons, &layout, dx.as_slice(), tol, &active);
            if next == active {
                break;
            }
            active = next;
            (dx, lam, fallback) = solve_block(&lin, targets, scale, &active, false)?;
        }
    }
    let (stationarity, feasibility) = residual_parts(&lin, targets, scale, &active)?;

    let (h, hv) = active_rows(&lin, &active)?;
    let r = DVector::from_vec(target_residual(&lin.f, targets));
    let slope = |dx: &DVector<f64>, rho: f64| -> f64 {
        let obj = if targets.is_empty() {
            0.0
        } else {
            2.0 * (lin.jac.transpose() * &r).dot(dx)
        };
        obj + 2.0 * rho * hv.dot(&(&h * dx))
    };
    let hsq = hv.norm_squared();
    let mut rho = params.rho;
    if hsq > 0.0 {
        rho = rho.max(2.0 * (hv.dot(&lam) / scale).abs() / hsq);
    }
    let mut dphi = slope(&dx, rho);
    if dphi > 0.0 && !targets.is_empty() {
        // curvature of the objectives made the step uphill: fall back to Gauss-Newton
        let (gdx, glam, gfb) = solve_block(&lin, targets, scale, &active, true)?;
        dx = gdx;
        lam = glam;
        fallback |= gfb;
        dphi = slope(&dx, rho);
    }

    let bounds = mop.bounds();
    let trial = |t: f64| -> Vec<f64> {
        let mut xt: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + t * d).collect();
        bounds.project(&mut xt);
        xt
    };
    let mut t = 1.0;
    let mut x_new = trial(1.0);
    if params.line_search {
        let phi0 = merit(mop, x, targets, &active, rho);
        let descent = dphi.min(0.0);
        let mut accepted = false;
        for _ in 0..=params.max_halvings {
            let xt = trial(t);
            let phi = merit(mop, &xt, targets, &active, rho);
            if phi.is_finite() && phi <= phi0 + params.armijo_c * t * descent {
                x_new = xt;
                accepted = true;
                break;
            }
            t *= params.backtrack;
        }
        if !accepted {
            t = 0.0;
            x_new = x.to_vec();
        }
    }

    let mut lambda = vec![0.0; layout.len()];
    for (a, l) in active.iter().zip(lam.iter()) {
        lambda[*a] = *l;
    }
    Ok(IndividualStep {
        x: x_new,
        lambda,
        active,
        step: t,
        fallback,
        stationarity,
        feasibility,
    })
}

/// Result of one population step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub iterate: SetIterate,
    pub branch: Branch,
    pub active: ActiveSet,
    /// Accepted step length per individual; 0 when no trial was accepted.
    pub step_sizes: Vec<f64>,
    pub fallbacks: Vec<bool>,
    /// Residual at the input iterate under the active set used for the step.
    pub residual: KktResidual,
}

fn run_plan(
    mop: &dyn Mop,
    iterate: &SetIterate,
    plan: &Plan,
    fixed: Option<&ActiveSet>,
    params: &NewtonParams,
) -> Result<StepReport> {
    let mu = iterate.mu();
    if mu == 0 {
        return Err(DpnError::Empty("population".into()));
    }
    let layout = ConstraintLayout::of(mop);
    let tol = active_tolerance(mop, iterate, params.active_tol);
    let results: Vec<Result<IndividualStep>> = (0..mu)
        .into_par_iter()
        .map(|i| {
            let fixed_i = fixed.map(|a| a.per_individual[i].as_slice());
            step_individual(mop, i, &iterate.points[i], &plan.targets[i], plan.scale, fixed_i, tol, params)
        })
        .collect();

    if results.iter().all(Result::is_err) {
        let first = results.into_iter().find_map(Result::err).expect("non-empty");
        return Err(DpnError::Solver(format!("all {mu} block solves failed; first: {first}")));
    }
    let mut points = Vec::with_capacity(mu);
    let mut multipliers = Vec::with_capacity(mu);
    let mut per_individual = Vec::with_capacity(mu);
    let mut step_sizes = Vec::with_capacity(mu);
    let mut fallbacks = Vec::with_capacity(mu);
    let mut stat = Vec::new();
    let mut feas = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                points.push(s.x);
                multipliers.push(s.lambda);
                per_individual.push(s.active);
                step_sizes.push(s.step);
                fallbacks.push(s.fallback);
                stat.extend(s.stationarity);
                feas.extend(s.feasibility);
            }
            Err(e) => {
                log::warn!("individual {i} kept unchanged: {e}");
                points.push(iterate.points[i].clone());
                multipliers.push(vec![0.0; layout.len()]);
                per_individual.push((0..layout.p).collect());
                step_sizes.push(0.0);
                fallbacks.push(true);
            }
        }
    }
    Ok(StepReport {
        iterate: SetIterate { points, multipliers },
        branch: plan.branch,
        active: ActiveSet { layout, per_individual },
        step_sizes,
        fallbacks,
        residual: KktResidual::from_parts(stat, feas),
    })
}

fn check_matched(iterate: &SetIterate, z: &[Vec<f64>], k: usize) -> Result<()> {
    if z.len() != iterate.mu() {
        return Err(DpnError::InvalidArgument(format!(
            "matched step needs |Z| = μ, got {} targets for {} individuals",
            z.len(),
            iterate.mu()
        )));
    }
    if let Some(i) = z.iter().position(|t| t.len() != k) {
        return Err(DpnError::Dimension {
            index: i,
            expected: k,
            actual: z[i].len(),
        });
    }
    Ok(())
}

/// Step in which individual `i` is steered towards `z[i]`.
///
/// The active set is recomputed unless `active` is given.
pub fn matched_newton_step(
    mop: &dyn Mop,
    iterate: &SetIterate,
    z: &[Vec<f64>],
    active: Option<&ActiveSet>,
    params: &NewtonParams,
) -> Result<StepReport> {
    check_matched(iterate, z, mop.k())?;
    run_plan(mop, iterate, &matched_plan(z, iterate.mu()), active, params)
}

/// Step on `Δ₂` for an arbitrary reference set: each individual takes either its
/// GD block or its IGD block, chosen population-wide by `params.branch_rule`.
pub fn delta_p_step(
    mop: &dyn Mop,
    iterate: &SetIterate,
    z: &[Vec<f64>],
    active: Option<&ActiveSet>,
    params: &NewtonParams,
) -> Result<StepReport> {
    if z.is_empty() {
        return Err(DpnError::Empty("reference set".into()));
    }
    let fx = images(mop, iterate)?;
    let plan = branch_plan(&fx, z, params.branch_rule)?;
    run_plan(mop, iterate, &plan, active, params)
}

/// Matched step from the complete saddle-point system including the
/// constraint curvature term `S = Σ λ_j ∇²c_j`, using the multipliers stored
/// in `iterate`. Returns the direction per individual.
pub fn full_system_direction(
    mop: &dyn Mop,
    iterate: &SetIterate,
    z: &[Vec<f64>],
    active: &ActiveSet,
) -> Result<Vec<Vec<f64>>> {
    check_matched(iterate, z, mop.k())?;
    let mu = iterate.mu();
    let n = mop.n();
    let scale = 2.0 / mu as f64;
    let layout = ConstraintLayout::of(mop);
    let sizes: Vec<usize> = active.per_individual.iter().map(Vec::len).collect();
    let total_a: usize = sizes.iter().sum();
    let dim = mu * n + total_a;
    let mut k = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    let mut row_a = mu * n;
    for i in 0..mu {
        let x = &iterate.points[i];
        let lin = linearize(mop, x, i)?;
        let act = &active.per_individual[i];
        let r = target_residual(&lin.f, &[&z[i]]);
        let mut d = lin.jac.transpose() * &lin.jac;
        for (hl, rl) in lin.hess.iter().zip(&r) {
            d += hl * *rl;
        }
        d *= scale;
        let lam = &iterate.multipliers[i];
        let hh = mop.hess_h(x);
        let hg = mop.hess_g(x);
        for &c in act {
            let l = lam.get(c).copied().unwrap_or(0.0);
            if l == 0.0 {
                continue;
            }
            if c < layout.p {
                d += &hh[c] * l;
            } else if c < layout.p + layout.m {
                d += &hg[c - layout.p] * l;
            }
        }
        let (h, hv) = active_rows(&lin, act)?;
        let lam_a = DVector::from_iterator(act.len(), act.iter().map(|&c| lam.get(c).copied().unwrap_or(0.0)));
        let grad = lin.jac.transpose() * DVector::from_vec(r) * scale + h.transpose() * &lam_a;
        k.view_mut((i * n, i * n), (n, n)).copy_from(&d);
        if !act.is_empty() {
            k.view_mut((row_a, i * n), (act.len(), n)).copy_from(&h);
            k.view_mut((i * n, row_a), (n, act.len())).copy_from(&h.transpose());
            rhs.rows_mut(row_a, act.len()).copy_from(&(-hv));
        }
        rhs.rows_mut(i * n, n).copy_from(&(-grad));
        row_a += act.len();
    }
    let sol = solve_linear(&k, &rhs)?;
    Ok((0..mu).map(|i| sol.x.rows(i * n, n).iter().copied().collect()).collect())
}

/// How [`newton_loop`] forms each step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// Individual `i` follows target `i`; requires `|Z| = μ`.
    #[default]
    Matched,
    /// GD/IGD branch step on the unmatched reference set.
    DeltaP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub iterations: usize,
    /// Shift length `t` applied to reached targets.
    pub shift: f64,
    /// Reach tolerance; `None` means `0.5·shift`.
    pub tol_y: Option<f64>,
    pub mode: StepMode,
    pub params: NewtonParams,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            iterations: 6,
            shift: 0.05,
            tol_y: None,
            mode: StepMode::Matched,
            params: NewtonParams::default(),
        }
    }
}

impl NewtonConfig {
    pub fn tol_y(&self) -> f64 {
        self.tol_y.unwrap_or(0.5 * self.shift)
    }
}

/// Metrics of one iterate `X_l` against the targets `Z_l` it was stepped towards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub gd2sq: f64,
    pub igd2sq: f64,
    pub delta2: f64,
    pub residual_norm: f64,
    pub branch: Branch,
    /// Step sizes taken from this iterate; empty for the final row.
    pub step_sizes: Vec<f64>,
    pub fallbacks: Vec<bool>,
    pub images: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonTrace {
    pub rows: Vec<TraceRow>,
}

impl NewtonTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header() -> Vec<String> {
        ["iteration", "gd2sq", "igd2sq", "delta2", "residual_norm"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    pub fn table(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.iteration as f64, r.gd2sq, r.igd2sq, r.delta2, r.residual_norm])
            .collect()
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        crate::io::write_table(path, &Self::header(), &self.table())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRun {
    pub iterate: SetIterate,
    pub trace: NewtonTrace,
    pub z: Vec<Vec<f64>>,
    /// Set when the loop stopped early; the trace holds the iterations done.
    pub aborted: Option<String>,
}

fn step_with_mode(
    mop: &dyn Mop,
    iterate: &SetIterate,
    z: &[Vec<f64>],
    fixed: Option<&ActiveSet>,
    cfg: &NewtonConfig,
) -> Result<StepReport> {
    match cfg.mode {
        StepMode::Matched => matched_newton_step(mop, iterate, z, fixed, &cfg.params),
        StepMode::DeltaP => delta_p_step(mop, iterate, z, fixed, &cfg.params),
    }
}

/// Targets shifted by `shift·η` once their individual comes within `tol_y`.
fn shift_reached(fx: &[Vec<f64>], z: &mut [Vec<f64>], eta: &[Vec<f64>], cfg: &NewtonConfig) {
    let tol = cfg.tol_y();
    let reached: Vec<bool> = match cfg.mode {
        StepMode::Matched => fx.iter().zip(z.iter()).map(|(f, t)| dist(f, t) < tol).collect(),
        StepMode::DeltaP => z
            .iter()
            .map(|t| fx.iter().map(|f| dist(f, t)).fold(f64::INFINITY, f64::min) < tol)
            .collect(),
    };
    for ((t, hit), e) in z.iter_mut().zip(reached).zip(eta) {
        if hit {
            for (ti, e) in t.iter_mut().zip(e) {
                *ti += cfg.shift * e;
            }
        }
    }
}

/// Runs `cfg.iterations` Newton steps, shifting every reached target `z[j]`
/// by `shift·eta[j]` after each one. The trace has one row per iterate including the
/// starting one.
pub fn newton_loop(
    mop: &dyn Mop,
    iterate0: &SetIterate,
    z0: &[Vec<f64>],
    eta: &[Vec<f64>],
    cfg: &NewtonConfig,
) -> Result<NewtonRun> {
    if eta.len() != z0.len() {
        return Err(DpnError::InvalidArgument(format!(
            "{} shift directions for {} targets",
            eta.len(),
            z0.len()
        )));
    }
    if let Some(i) = eta.iter().position(|e| e.len() != mop.k()) {
        return Err(DpnError::Dimension {
            index: i,
            expected: mop.k(),
            actual: eta[i].len(),
        });
    }
    if cfg.mode == StepMode::Matched {
        check_matched(iterate0, z0, mop.k())?;
    }
    let mut x = iterate0.clone();
    let mut z = z0.to_vec();
    let mut trace = NewtonTrace::default();
    if cfg.iterations == 0 {
        return Ok(NewtonRun {
            iterate: x,
            trace,
            z,
            aborted: None,
        });
    }
    let mut aborted = None;
    for l in 0..=cfg.iterations {
        let fx = images(mop, &x)?;
        let ind = delta_p(&fx, &z, 2)?;
        let last = l == cfg.iterations;
        // the final row only uses the residual of this evaluation
        let report = match step_with_mode(mop, &x, &z, None, cfg) {
            Ok(r) => r,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        trace.rows.push(TraceRow {
            iteration: l,
            gd2sq: ind.gd2sq,
            igd2sq: ind.igd2sq,
            delta2: ind.delta_p,
            residual_norm: report.residual.norm,
            branch: report.branch,
            step_sizes: if last { Vec::new() } else { report.step_sizes.clone() },
            fallbacks: if last { Vec::new() } else { report.fallbacks.clone() },
            images: fx,
        });
        if last {
            break;
        }
        x = report.iterate;
        let fx_new = images(mop, &x)?;
        shift_reached(&fx_new, &mut z, eta, cfg);
    }
    Ok(NewtonRun {
        iterate: x,
        trace,
        z,
        aborted,
    })
}

/// Final active set of a run: recomputed at the last iterate.
pub fn final_active_set(mop: &dyn Mop, run: &NewtonRun, cfg: &NewtonConfig) -> Result<ActiveSet> {
    Ok(step_with_mode(mop, &run.iterate, &run.z, None, cfg)?.active)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::Bounds;
    use crate::problems::affine::AffineMop;

    fn identity2() -> AffineMop {
        AffineMop::identity(2)
    }

    fn line_constrained() -> AffineMop {
        AffineMop::identity(2)
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::from_vec(vec![1.0]))
            .unwrap()
    }

    #[test]
    fn gd_block_identity_one_step() {
        let p = identity2();
        let s = gd_newton_block(&p, &[2.0, 3.0], &[], &[0.0, 0.0], &[], 1).unwrap();
        assert!((s.dx[0] + 2.0).abs() < 1e-14 && (s.dx[1] + 3.0).abs() < 1e-14);
        assert!(!s.fallback);
    }

    #[test]
    fn at_target_zero_step() {
        let p = identity2();
        let s = gd_newton_block(&p, &[0.5, 0.5], &[0.0; 8], &[0.5, 0.5], &[], 1).unwrap();
        assert_eq!(s.dx, vec![0.0, 0.0]);
        assert!(s.dlambda.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn equality_constrained_minimizer() {
        let p = line_constrained();
        let s = gd_newton_block(&p, &[1.0, 4.0], &[], &[0.0, 0.0], &[0], 1).unwrap();
        assert!((1.0 + s.dx[0] - 1.0).abs() < 1e-14);
        assert!((4.0 + s.dx[1]).abs() < 1e-14);
        // infeasible start lands on the constraint too
        let s = gd_newton_block(&p, &[-3.0, 2.0], &[], &[0.0, 0.0], &[0], 1).unwrap();
        assert!((-3.0 + s.dx[0] - 1.0).abs() < 1e-14 && (2.0 + s.dx[1]).abs() < 1e-14);
    }

    #[test]
    fn igd_block_cases() {
        let p = identity2();
        let m1 = igd_newton_block(&p, &[2.0, 3.0], &[], &[&[0.0, 0.0]], &[], 1).unwrap();
        let g1 = gd_newton_block(&p, &[2.0, 3.0], &[], &[0.0, 0.0], &[], 1).unwrap();
        assert_eq!(m1, g1);
        let free = igd_newton_block(&p, &[2.0, 3.0], &[], &[], &[], 4).unwrap();
        assert_eq!(free.dx, vec![0.0, 0.0]);
        let c = line_constrained();
        let s = igd_newton_block(&c, &[0.0, 0.0], &[], &[], &[0], 4).unwrap();
        assert_eq!(s.dx, vec![1.0, 0.0]);
    }

    #[test]
    fn matched_identity_reaches_targets() {
        let p = identity2();
        let x = SetIterate::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        let z = vec![vec![0.0, 0.0], vec![0.0, 0.5]];
        let r = matched_newton_step(&p, &x, &z, None, &NewtonParams::default()).unwrap();
        assert_eq!(r.iterate.points, z);
        assert_eq!(r.step_sizes, vec![1.0, 1.0]);
        let again = matched_newton_step(&p, &r.iterate, &z, None, &NewtonParams::default()).unwrap();
        assert_eq!(again.iterate.points, z);
        assert_eq!(again.residual.norm, 0.0);
    }

    #[test]
    fn bound_activation_sign() {
        let p = AffineMop::identity(2).with_bounds(Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let lay = ConstraintLayout::of(&p);
        let x = SetIterate::new(vec![vec![0.0, 0.5]], 0);
        let down = activate_inequalities(&p, &x, &[vec![-1.0, 0.0]], 1e-6);
        assert_eq!(down.per_individual[0], vec![lay.lower(0)]);
        let up = activate_inequalities(&p, &x, &[vec![1.0, 0.0]], 1e-6);
        assert!(up.per_individual[0].is_empty());
        let interior = SetIterate::new(vec![vec![0.4, 0.5]], 0);
        let any = activate_inequalities(&p, &interior, &[vec![-1.0, 3.0]], 1e-6);
        assert!(any.per_individual[0].is_empty());
    }

    #[test]
    fn bound_stops_the_step() {
        let p = AffineMop::identity(2).with_bounds(Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let x = SetIterate::new(vec![vec![0.0, 0.5]], 0);
        let z = vec![vec![-0.5, 0.2]];
        let r = matched_newton_step(&p, &x, &z, None, &NewtonParams::default()).unwrap();
        assert!(r.active.contains(0, ConstraintLayout::of(&p).lower(0)));
        assert!((r.iterate.points[0][0]).abs() < 1e-15);
        assert!((r.iterate.points[0][1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn branch_rule_selects() {
        let p = identity2();
        // one individual, many targets: IGD dominates
        let x = SetIterate::new(vec![vec![0.0, 0.0]], 0);
        let z: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0]).collect();
        let default = delta_p_step(&p, &x, &z, None, &NewtonParams::default()).unwrap();
        assert_eq!(default.branch, Branch::Gd);
        let flipped = NewtonParams {
            branch_rule: BranchRule::GdWhenLarger,
            ..Default::default()
        };
        assert_eq!(delta_p_step(&p, &x, &z, None, &flipped).unwrap().branch, Branch::Igd);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let p = identity2();
        let x = SetIterate::new(vec![vec![1.0, 2.0]], 0);
        let run = newton_loop(
            &p,
            &x,
            &[vec![0.0, 0.0]],
            &[vec![-1.0, 0.0]],
            &NewtonConfig {
                iterations: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.iterate, x);
        assert!(run.trace.is_empty());
    }

    #[test]
    fn reached_targets_shift_once_per_iteration() {
        let p = identity2();
        let x = SetIterate::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        let z0 = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        let eta = [-(0.5_f64.sqrt()), -(0.5_f64.sqrt())];
        let cfg = NewtonConfig {
            iterations: 1,
            ..Default::default()
        };
        let run = newton_loop(&p, &x, &z0, &[eta.to_vec(), eta.to_vec()], &cfg).unwrap();
        assert_eq!(run.iterate.points, z0);
        for (z, z0) in run.z.iter().zip(&z0) {
            for d in 0..2 {
                assert!((z[d] - (z0[d] + 0.05 * eta[d])).abs() < 1e-15);
            }
        }
        assert_eq!(run.trace.len(), 2);
        assert_eq!(run.trace.rows[0].step_sizes, vec![1.0, 1.0]);
        assert!(run.trace.rows[1].step_sizes.is_empty());
    }
}
