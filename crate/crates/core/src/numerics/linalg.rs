//! Dense solves and factorizations on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{DpnError, Result};

/// Result of [`solve_linear`]. `fallback` is set when the system was treated as
/// singular and `x` is the minimum-norm least-squares solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub x: DVector<f64>,
    pub fallback: bool,
}

fn check_finite(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    if a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DpnError::NonFinite("linear system".into()))
    }
}

/// Solves `Ax = b` for square `A`.
///
/// Uses full-pivot LU when the pivots are well separated from zero and the
/// residual meets `1e-10·(1 + ‖b‖)`; otherwise returns the minimum-norm
/// least-squares solution from an SVD.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LinearSolution> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(DpnError::InvalidArgument(format!(
            "expected square system, got {}x{} with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    check_finite(a, b)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(LinearSolution {
            x: DVector::zeros(0),
            fallback: false,
        });
    }

    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if dmax > 0.0 && dmin / dmax > 1e-12 {
        if let Some(x) = lu.solve(b) {
            let res = (a * &x - b).norm();
            if x.iter().all(|v| v.is_finite()) && res <= 1e-10 * (1.0 + b.norm()) {
                return Ok(LinearSolution { x, fallback: false });
            }
        }
    }
    Ok(LinearSolution {
        x: least_squares_min_norm(a, b)?,
        fallback: true,
    })
}

/// Minimum-norm least-squares solution of `Ax ≈ b` for any shape of `A`.
pub fn least_squares_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    check_finite(a, b)?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (a.nrows().max(a.ncols()) as f64) * 1e-13;
    if smax == 0.0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    svd.solve(b, eps)
        .map_err(|e| DpnError::Solver(format!("svd solve failed: {e}")))
}

/// Moore-Penrose pseudo-inverse.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(DpnError::NonFinite("pseudo-inverse input".into()));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(DMatrix::zeros(a.ncols(), a.nrows()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(DMatrix::zeros(a.ncols(), a.nrows()));
    }
    let eps = smax * (a.nrows().max(a.ncols()) as f64) * 1e-13;
    svd.pseudo_inverse(eps)
        .map_err(|e| DpnError::Solver(format!("pseudo-inverse failed: {e}")))
}

/// Full QR factorization `M = QR` with `Q` square.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub rank_deficient: bool,
}

/// Householder QR of an `r × c` matrix returning the full `r × r` factor `Q`.
///
/// Zero columns are skipped rather than reflected, so `M = 0` yields `Q = I`.
pub fn qr_factor(m: &DMatrix<f64>) -> QrFactors {
    let (rows, cols) = m.shape();
    let mut r = m.clone();
    let mut q = DMatrix::<f64>::identity(rows, rows);
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    let mut rank_deficient = cols > rows;

    for j in 0..cols.min(rows) {
        let mut v: DVector<f64> = r.view((j, j), (rows - j, 1)).column(0).into_owned();
        let alpha = v.norm();
        if alpha <= 1e-14 * scale {
            rank_deficient = true;
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        // R ← (I − 2vvᵀ/vᵀv) R on the trailing block, Q ← Q (I − 2vvᵀ/vᵀv)
        for c in j..cols {
            let dot: f64 = (0..rows - j).map(|i| v[i] * r[(j + i, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in 0..rows - j {
                r[(j + i, c)] -= f * v[i];
            }
        }
        for row in 0..rows {
            let dot: f64 = (0..rows - j).map(|i| q[(row, j + i)] * v[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in 0..rows - j {
                q[(row, j + i)] -= f * v[i];
            }
        }
        for i in j + 1..rows {
            r[(i, j)] = 0.0;
        }
        if r[(j, j)].abs() <= 1e-12 * scale {
            rank_deficient = true;
        }
    }
    QrFactors {
        q,
        r,
        rank_deficient,
    }
}
