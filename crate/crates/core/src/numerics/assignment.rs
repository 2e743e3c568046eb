use nalgebra::DMatrix;

use crate::error::{DpnError, Result};

/// A perfect matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the column assigned to row `i`.
    pub perm: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, `O(n³)`).
pub fn hungarian(costs: &DMatrix<f64>) -> Result<Assignment> {
    let (n, m) = costs.shape();
    if n != m {
        return Err(DpnError::InvalidArgument(format!(
            "assignment needs a square cost matrix, got {n}x{m}"
        )));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(DpnError::NonFinite("assignment costs".into()));
    }
    if n == 0 {
        return Ok(Assignment {
            perm: vec![],
            cost: 0.0,
        });
    }

    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let cost = perm.iter().enumerate().map(|(i, &j)| costs[(i, j)]).sum();
    Ok(Assignment { perm, cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let a = hungarian(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!(a.perm, vec![0, 1]);
        assert_eq!(a.cost, 2.0);
        let b = hungarian(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_eq!(b.perm, vec![1, 0]);
        assert_eq!(b.cost, 2.0);
    }

    #[test]
    fn identical_point_sets() {
        let pts = [0.0_f64, 1.0, 3.0, 7.0];
        let c = DMatrix::from_fn(4, 4, |i, j| (pts[i] - pts[j]).abs());
        let a = hungarian(&c).unwrap();
        assert_eq!(a.perm, vec![0, 1, 2, 3]);
        assert_eq!(a.cost, 0.0);
    }

    #[test]
    fn non_square_rejected() {
        assert!(hungarian(&DMatrix::zeros(2, 3)).is_err());
    }
}
