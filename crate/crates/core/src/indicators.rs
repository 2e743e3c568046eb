//! GD, IGD and averaged Hausdorff distance, plus the derivatives of the squared
//! `p = 2` variants with respect to a population in decision space.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{DpnError, Result};
use crate::mop::{Mop, SetIterate};
use crate::numerics::dist;

/// Distances within this of the minimum count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Nearest-neighbour structure between images `F(x_i)` and targets `z_l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearestAssignment {
    /// `j[i]`: target closest to image `i`.
    pub j: Vec<usize>,
    /// `nearest_member[l]`: image closest to target `l`.
    pub nearest_member: Vec<usize>,
    /// `attracted[i]`: targets whose closest image is `i` (the sets `I_i`).
    pub attracted: Vec<Vec<usize>>,
    /// Images with more than one closest target, with the tied candidates.
    pub gd_ties: Vec<(usize, Vec<usize>)>,
    /// Targets with more than one closest image.
    pub igd_ties: Vec<(usize, Vec<usize>)>,
}

impl NearestAssignment {
    pub fn unique(&self) -> bool {
        self.gd_ties.is_empty() && self.igd_ties.is_empty()
    }

    /// `m_i = |I_i|`.
    pub fn counts(&self) -> Vec<usize> {
        self.attracted.iter().map(Vec::len).collect()
    }
}

fn argmin_with_ties(p: &[f64], set: &[Vec<f64>]) -> (usize, f64, Vec<usize>) {
    let d: Vec<f64> = set.iter().map(|q| dist(p, q)).collect();
    let (best, dmin) = d
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let tied: Vec<usize> = (0..d.len()).filter(|&i| d[i] <= dmin + TIE_TOL).collect();
    (best, dmin, tied)
}

/// Brute-force nearest neighbours in both directions.
pub fn nearest_assignment(images: &[Vec<f64>], targets: &[Vec<f64>]) -> NearestAssignment {
    let mut j = Vec::with_capacity(images.len());
    let mut gd_ties = Vec::new();
    for (i, a) in images.iter().enumerate() {
        let (best, _, tied) = argmin_with_ties(a, targets);
        if tied.len() > 1 {
            gd_ties.push((i, tied));
        }
        j.push(best);
    }
    let mut nearest_member = Vec::with_capacity(targets.len());
    let mut attracted = vec![Vec::new(); images.len()];
    let mut igd_ties = Vec::new();
    for (l, z) in targets.iter().enumerate() {
        let (best, _, tied) = argmin_with_ties(z, images);
        if tied.len() > 1 {
            igd_ties.push((l, tied));
        }
        nearest_member.push(best);
        attracted[best].push(l);
    }
    NearestAssignment {
        j,
        nearest_member,
        attracted,
        gd_ties,
        igd_ties,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorReport {
    pub p: u32,
    pub gd_p: f64,
    pub igd_p: f64,
    pub delta_p: f64,
    /// `GD_2²`, i.e. the mean squared distance from `A` to `B`.
    pub gd2sq: f64,
    /// `IGD_2²`.
    pub igd2sq: f64,
    pub assignment: NearestAssignment,
}

impl IndicatorReport {
    pub fn delta2(&self) -> f64 {
        self.gd2sq.sqrt().max(self.igd2sq.sqrt())
    }
}

fn power_mean(d: &[f64], p: f64) -> f64 {
    (d.iter().map(|v| v.powf(p)).sum::<f64>() / d.len() as f64).powf(1.0 / p)
}

/// `GD_p(A, B)`, `IGD_p(A, B)` and `Δ_p = max(GD_p, IGD_p)` with Euclidean
/// distances.
pub fn delta_p(a: &[Vec<f64>], b: &[Vec<f64>], p: u32) -> Result<IndicatorReport> {
    if a.is_empty() || b.is_empty() {
        return Err(DpnError::Empty("indicator point set".into()));
    }
    if p == 0 {
        return Err(DpnError::InvalidArgument("p must be at least 1".into()));
    }
    let assignment = nearest_assignment(a, b);
    let da: Vec<f64> = a
        .iter()
        .zip(&assignment.j)
        .map(|(x, &j)| dist(x, &b[j]))
        .collect();
    let db: Vec<f64> = b
        .iter()
        .zip(&assignment.nearest_member)
        .map(|(z, &i)| dist(z, &a[i]))
        .collect();
    if da.iter().chain(&db).any(|v| !v.is_finite()) {
        return Err(DpnError::NonFinite("indicator distances".into()));
    }
    let gd2sq = da.iter().map(|d| d * d).sum::<f64>() / da.len() as f64;
    let igd2sq = db.iter().map(|d| d * d).sum::<f64>() / db.len() as f64;
    let (gd_p, igd_p) = if p == 2 {
        (gd2sq.sqrt(), igd2sq.sqrt())
    } else {
        (power_mean(&da, p as f64), power_mean(&db, p as f64))
    };
    Ok(IndicatorReport {
        p,
        gd_p,
        igd_p,
        delta_p: gd_p.max(igd_p),
        gd2sq,
        igd2sq,
        assignment,
    })
}

/// `Δ_2(A, B)`.
pub fn delta2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    Ok(delta_p(a, b, 2)?.delta_p)
}

/// `IGD_2(A, B)`.
pub fn igd2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    Ok(delta_p(a, b, 2)?.igd_p)
}

/// Block-diagonal matrix stored as its diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockDiagonal {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let total: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut out = DMatrix::zeros(total, total);
        let mut off = 0;
        for b in &self.blocks {
            let s = b.nrows();
            out.view_mut((off, off), (s, s)).copy_from(b);
            off += s;
        }
        out
    }
}

fn images(mop: &dyn Mop, iterate: &SetIterate) -> Result<Vec<Vec<f64>>> {
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
            let f = mop.eval_f(x);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(DpnError::NonFinite(format!("objectives of individual {i}")));
            }
            Ok(f)
        })
        .collect()
}

fn check_targets(z: &[Vec<f64>], k: usize) -> Result<()> {
    if z.is_empty() {
        return Err(DpnError::Empty("reference set".into()));
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

fn gd_assignment(mop: &dyn Mop, iterate: &SetIterate, z: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, NearestAssignment)> {
    check_targets(z, mop.k())?;
    if iterate.is_empty() {
        return Err(DpnError::Empty("population".into()));
    }
    let fx = images(mop, iterate)?;
    let asg = nearest_assignment(&fx, z);
    if let Some((element, candidates)) = asg.gd_ties.first() {
        return Err(DpnError::NonDifferentiable {
            element: *element,
            candidates: candidates.clone(),
        });
    }
    Ok((fx, asg))
}

fn igd_assignment(mop: &dyn Mop, iterate: &SetIterate, z: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, NearestAssignment)> {
    check_targets(z, mop.k())?;
    if iterate.is_empty() {
        return Err(DpnError::Empty("population".into()));
    }
    let fx = images(mop, iterate)?;
    let asg = nearest_assignment(&fx, z);
    if let Some((element, candidates)) = asg.igd_ties.first() {
        return Err(DpnError::NonDifferentiable {
            element: *element,
            candidates: candidates.clone(),
        });
    }
    Ok((fx, asg))
}

/// Gradient of `GD_2²(F(X), Z)` in `R^{μn}`; block `i` is
/// `(2/μ) J(x_i)ᵀ (F(x_i) − z_{j_i})`.
pub fn gd2sq_gradient(mop: &dyn Mop, iterate: &SetIterate, z: &[Vec<f64>]) -> Result<(Vec<f64>, NearestAssignment)> {
    let (fx, asg) = gd_assignment(mop, iterate, z)?;
    let mu = iterate.mu() as f64;
    let mut grad = Vec::with_capacity(iterate.mu() * mop.n());
    for (i, x) in iterate.points.iter().enumerate() {
        let r = DVector::from_iterator(mop.k(), fx[i].iter().zip(&z[asg.j[i]]).map(|(f, t)| f - t));
        let g = mop.jac_f(x).transpose() * r * (2.0 / mu);
        grad.extend(g.iter());
    }
    Ok((grad, asg))
}

/// `JᵀJ·c + Σ_l α_l ∇²f_l`.
fn gauss_newton_block(jac: &DMatrix<f64>, hess: &[DMatrix<f64>], c: f64, alpha: &[f64]) -> DMatrix<f64> {
    let mut b = jac.transpose() * jac * c;
    for (h, a) in hess.iter().zip(alpha) {
        if *a != 0.0 {
            b += h * *a;
        }
    }
    b
}

/// Block-diagonal Hessian of `GD_2²`; block `i` is
/// `(2/μ)(JᵀJ + Σ_l (f_l − z_{j_i,l}) ∇²f_l)`.
pub fn gd2sq_hessian(mop: &dyn Mop, iterate: &SetIterate, z: &[Vec<f64>]) -> Result<BlockDiagonal> {
    let (fx, asg) = gd_assignment(mop, iterate, z)?;
    let mu = iterate.mu() as f64;
    let blocks = iterate
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (_, jac, hess) = mop.f_derivatives(x);
            let alpha: Vec<f64> = fx[i].iter().zip(&z[asg.j[i]]).map(|(f, t)| f - t).collect();
            gauss_newton_block(&jac, &hess, 1.0, &alpha) * (2.0 / mu)
        })
        .collect();
    Ok(BlockDiagonal { blocks })
}

/// `m_l F(x_l) − Σ_{i ∈ I_l} z_i` for one population member.
pub(crate) fn igd_residual(f: &[f64], attracted: &[usize], z: &[Vec<f64>]) -> Vec<f64> {
    let m = attracted.len() as f64;
    let mut r: Vec<f64> = f.iter().map(|v| m * v).collect();
    for &i in attracted {
        for (ri, zi) in r.iter_mut().zip(&z[i]) {
            *ri -= zi;
        }
    }
    r
}

/// Gradient of `IGD_2²(F(X), Z)`; block `l` is
/// `(2/M) J(x_l)ᵀ (m_l F(x_l) − Σ_{i∈I_l} z_i)`, zero when nothing is attracted.
pub fn igd2sq_gradient(mop: &dyn Mop, iterate: &SetIterate, z: &[Vec<f64>]) -> Result<(Vec<f64>, NearestAssignment)> {
    let (fx, asg) = igd_assignment(mop, iterate, z)?;
    let big_m = z.len() as f64;
    let n = mop.n();
    let mut grad = Vec::with_capacity(iterate.mu() * n);
    for (l, x) in iterate.points.iter().enumerate() {
        if asg.attracted[l].is_empty() {
            grad.extend(std::iter::repeat_n(0.0, n));
            continue;
        }
        let r = DVector::from_vec(igd_residual(&fx[l], &asg.attracted[l], z));
        let g = mop.jac_f(x).transpose() * r * (2.0 / big_m);
        grad.extend(g.iter());
    }
    Ok((grad, asg))
}

/// Block-diagonal Hessian of `IGD_2²`; block `l` is
/// `(2/M)(m_l JᵀJ + Σ_i (m_l f_i − y_i) ∇²f_i)` with `y = Σ_{I_l} z`.
pub fn igd2sq_hessian(mop: &dyn Mop, iterate: &SetIterate, z: &[Vec<f64>]) -> Result<BlockDiagonal> {
    let (fx, asg) = igd_assignment(mop, iterate, z)?;
    let big_m = z.len() as f64;
    let n = mop.n();
    let blocks = iterate
        .points
        .iter()
        .enumerate()
        .map(|(l, x)| {
            let m_l = asg.attracted[l].len();
            if m_l == 0 {
                return DMatrix::zeros(n, n);
            }
            let (_, jac, hess) = mop.f_derivatives(x);
            let alpha = igd_residual(&fx[l], &asg.attracted[l], z);
            gauss_newton_block(&jac, &hess, m_l as f64, &alpha) * (2.0 / big_m)
        })
        .collect();
    Ok(BlockDiagonal { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use crate::mop::{AutoDiffMop, Bounds, ScalarProblem};

    struct Id2;
    impl ScalarProblem for Id2 {
        fn name(&self) -> &str {
            "id2"
        }
        fn n(&self) -> usize {
            2
        }
        fn k(&self) -> usize {
            2
        }
        fn bounds(&self) -> Bounds {
            Bounds::uniform(2, -10.0, 10.0)
        }
        fn objectives<S: Scalar>(&self, x: &[S]) -> Vec<S> {
            x.to_vec()
        }
    }

    #[test]
    fn delta_hand_values() {
        let r = delta_p(&[vec![0.0, 0.0]], &[vec![0.0, 0.0]], 2).unwrap();
        assert_eq!(r.delta_p, 0.0);
        let r = delta_p(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]], 2).unwrap();
        assert_eq!((r.gd_p, r.igd_p, r.delta_p), (1.0, 1.0, 1.0));
        let r = delta_p(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[vec![0.0, 0.0]], 2).unwrap();
        assert!((r.gd_p - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.igd_p, 0.0);
        assert!((r.delta_p - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r.delta2() - r.delta_p).abs() < 1e-15);
    }

    #[test]
    fn delta_p_other_exponents() {
        let a = vec![vec![0.0], vec![2.0]];
        let b = vec![vec![0.0]];
        let r = delta_p(&a, &b, 1).unwrap();
        assert_eq!(r.gd_p, 1.0);
        assert!(delta_p(&[], &b, 2).is_err());
    }

    #[test]
    fn identity_gradients_and_hessians() {
        let mop = AutoDiffMop::new(Id2);
        let it = SetIterate::new(vec![vec![3.0, 4.0]], 0);
        let z = vec![vec![0.0, 0.0]];
        let (g, _) = gd2sq_gradient(&mop, &it, &z).unwrap();
        assert_eq!(g, vec![6.0, 8.0]);
        let h = gd2sq_hessian(&mop, &it, &z).unwrap();
        assert_eq!(h.to_dense(), DMatrix::identity(2, 2) * 2.0);

        let it = SetIterate::new(vec![vec![1.0, 1.0]], 0);
        let (g, _) = igd2sq_gradient(&mop, &it, &z).unwrap();
        assert_eq!(g, vec![2.0, 2.0]);
        assert_eq!(igd2sq_hessian(&mop, &it, &z).unwrap().to_dense(), DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn two_member_hessian_has_zero_cross_blocks() {
        let mop = AutoDiffMop::new(Id2);
        let it = SetIterate::new(vec![vec![1.0, 0.0], vec![0.0, 5.0]], 0);
        let z = vec![vec![0.0, 0.0], vec![0.0, 4.0]];
        let h = gd2sq_hessian(&mop, &it, &z).unwrap().to_dense();
        assert_eq!(h, DMatrix::identity(4, 4));
    }

    #[test]
    fn unattracted_member_has_zero_block() {
        let mop = AutoDiffMop::new(Id2);
        let it = SetIterate::new(vec![vec![0.0, 0.0], vec![9.0, 9.0]], 0);
        let z = vec![vec![0.1, 0.0]];
        let (g, asg) = igd2sq_gradient(&mop, &it, &z).unwrap();
        assert_eq!(asg.counts(), vec![1, 0]);
        assert_eq!(&g[2..], &[0.0, 0.0]);
        let h = igd2sq_hessian(&mop, &it, &z).unwrap();
        assert_eq!(h.blocks[1], DMatrix::zeros(2, 2));
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let mop = AutoDiffMop::new(Id2);
        let it = SetIterate::new(vec![vec![1.0, 2.0], vec![3.0, 0.0]], 0);
        let z = vec![vec![1.0, 2.0], vec![3.0, 0.0]];
        let (g, _) = gd2sq_gradient(&mop, &it, &z).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ties_are_reported() {
        let mop = AutoDiffMop::new(Id2);
        let it = SetIterate::new(vec![vec![0.0, 0.0]], 0);
        let z = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        match gd2sq_gradient(&mop, &it, &z) {
            Err(DpnError::NonDifferentiable { element, candidates }) => {
                assert_eq!(element, 0);
                assert_eq!(candidates, vec![0, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
