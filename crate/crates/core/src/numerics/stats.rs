//! Two-sided Mann-Whitney U test and Holm-Šidák adjustment.

use statrs::function::erf::erfc;

use crate::error::{DpnError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample: number of pairs with `a > b`, ties
    /// counting one half.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        i = j;
    }
    ranks
}

/// Exact test for combined size up to 20, normal approximation with tie and
/// continuity correction beyond.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(DpnError::Empty("Mann-Whitney sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(DpnError::NonFinite("Mann-Whitney sample".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean_u = (n1 * n2) as f64 / 2.0;

    if n <= 20 {
        // Distribution of the doubled rank sum of the first sample over all
        // C(n, n1) label assignments.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut dp = vec![vec![0.0_f64; max_sum + 1]; n1 + 1];
        dp[0][0] = 1.0;
        for &w in &doubled {
            for j in (1..=n1).rev() {
                for s in (w..=max_sum).rev() {
                    let add = dp[j - 1][s - w];
                    if add != 0.0 {
                        dp[j][s] += add;
                    }
                }
            }
        }
        let total: f64 = dp[n1].iter().sum();
        let expected2 = (n1 * (n + 1)) as f64;
        let observed = (2.0 * r1 - expected2).abs();
        let hits: f64 = dp[n1]
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as f64 - expected2).abs() >= observed - 1e-9)
            .map(|(_, c)| c)
            .sum();
        return Ok(MannWhitney {
            u,
            p: (hits / total).min(1.0),
            exact: true,
        });
    }

    let mut tie_term = 0.0;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let nf = n as f64;
    let var = (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0, exact: false });
    }
    let z = ((u - mean_u).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(MannWhitney {
        u,
        p: erfc(z / std::f64::consts::SQRT_2).min(1.0),
        exact: false,
    })
}

/// Step-down Holm-Šidák adjusted p-values, returned in input order.
pub fn holm_sidak(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0_f64;
    for (j, &i) in order.iter().enumerate() {
        let adj = 1.0 - (1.0 - p[i]).powi((m - j) as i32);
        running = running.max(adj).min(1.0);
        adjusted[i] = running;
    }
    adjusted
}
