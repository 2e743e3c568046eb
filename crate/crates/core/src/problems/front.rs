//! True Pareto front samples for indicator evaluation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DpnError, Result};
use crate::io::{numbered, read_table, write_table};
use crate::mop::ScalarProblem;
use crate::numerics::{dominates, sample_simplex};
use crate::problems::cf::cf2d_front;
use crate::problems::conv::{Conv42f, SIGMA, SHIFT};
use crate::problems::dtlz::{CoupledDtlz, DtlzVariant};
use crate::problems::zdt::{zdt6_min_f1, ZDT3_ARCS};
use crate::problems::{canonical_id, ProblemOverrides};

/// Points spread uniformly in arc length over a union of parametrized curve
/// pieces. Degenerate pieces (`lo == hi`) are isolated points and are emitted
/// first.
pub fn arc_sample(pieces: &[(f64, f64)], curve: &dyn Fn(f64) -> Vec<f64>, count: usize) -> Vec<Vec<f64>> {
    const RES: usize = 4000;
    let mut out: Vec<Vec<f64>> = pieces
        .iter()
        .filter(|(lo, hi)| lo == hi)
        .take(count)
        .map(|(t, _)| curve(*t))
        .collect();
    let arcs: Vec<(f64, f64)> = pieces.iter().copied().filter(|(lo, hi)| hi > lo).collect();
    let remaining = count - out.len();
    if arcs.is_empty() || remaining == 0 {
        return out;
    }

    // cumulative arc length tables per piece
    let tables: Vec<(Vec<f64>, Vec<f64>)> = arcs
        .iter()
        .map(|&(lo, hi)| {
            let ts: Vec<f64> = (0..=RES).map(|i| lo + (hi - lo) * i as f64 / RES as f64).collect();
            let mut s = vec![0.0];
            let mut prev = curve(ts[0]);
            for t in &ts[1..] {
                let cur = curve(*t);
                let d = crate::numerics::dist(&prev, &cur);
                s.push(s.last().unwrap() + d);
                prev = cur;
            }
            (ts, s)
        })
        .collect();
    let lengths: Vec<f64> = tables.iter().map(|(_, s)| *s.last().unwrap()).collect();
    let alloc = largest_remainder(&lengths, remaining);

    for ((ts, s), m) in tables.iter().zip(alloc) {
        let total = *s.last().unwrap();
        for q in 0..m {
            let target = if m == 1 {
                0.5 * total
            } else {
                total * q as f64 / (m - 1) as f64
            };
            let idx = s.partition_point(|v| *v < target).clamp(1, s.len() - 1);
            let (s0, s1) = (s[idx - 1], s[idx]);
            let w = if s1 > s0 { (target - s0) / (s1 - s0) } else { 0.0 };
            out.push(curve(ts[idx - 1] + w * (ts[idx] - ts[idx - 1])));
        }
    }
    out
}

/// Splits `total` in proportion to `weights`, fixing rounding by largest remainder.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if sum <= 0.0 {
        let mut v = vec![total / weights.len(); weights.len()];
        for slot in v.iter_mut().take(total % weights.len()) {
            *slot += 1;
        }
        return v;
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = total - alloc.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        alloc[i] += 1;
    }
    alloc
}

/// Non-dominated subset (minimization), keeping the first of exact duplicates.
/// Uses a sort-and-sweep for two objectives, a staircase for three, and
/// pairwise checks otherwise.
pub fn nondominated_filter(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let Some(k) = points.first().map(Vec::len) else {
        return points;
    };
    let mut pts = points;
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pts.dedup();
    match k {
        2 => {
            let mut best = f64::INFINITY;
            pts.into_iter()
                .filter(|p| {
                    if p[1] < best {
                        best = p[1];
                        true
                    } else {
                        false
                    }
                })
                .collect()
        }
        3 => {
            // staircase over (f2, f3): f3 strictly decreasing in f2
            let mut stair: BTreeMap<OrdF64, f64> = BTreeMap::new();
            let mut out = Vec::new();
            for p in pts {
                let dominated = stair
                    .range(..=OrdF64(p[1]))
                    .next_back()
                    .is_some_and(|(_, f3)| *f3 <= p[2]);
                if dominated {
                    continue;
                }
                let stale: Vec<OrdF64> = stair
                    .range(OrdF64(p[1])..)
                    .take_while(|(_, f3)| **f3 >= p[2])
                    .map(|(key, _)| *key)
                    .collect();
                for key in stale {
                    stair.remove(&key);
                }
                stair.insert(OrdF64(p[1]), p[2]);
                out.push(p);
            }
            out
        }
        _ => {
            let keep: Vec<bool> = (0..pts.len())
                .map(|i| !pts.iter().any(|q| dominates(q, &pts[i])))
                .collect();
            pts.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Evenly strided subset of at most `count` elements.
pub fn stride_subsample(points: Vec<Vec<f64>>, count: usize) -> Vec<Vec<f64>> {
    if points.len() <= count {
        return points;
    }
    let len = points.len();
    (0..count)
        .map(|i| points[(i as f64 * len as f64 / count as f64) as usize].clone())
        .collect()
}

fn zdt3_open_arcs() -> [(f64, f64); 5] {
    let mut arcs = ZDT3_ARCS;
    for a in arcs.iter_mut().skip(1) {
        a.0 += 1e-9;
    }
    arcs
}

fn octant_sphere(k: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..k)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    g.abs()
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

fn scaled_simplex(k: usize, scale: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let vertices: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { scale } else { 0.0 }).collect())
        .collect();
    sample_simplex(&vertices, count, rng)
}

/// Sphere point from the two CF8–CF10 angles.
fn cf_sphere(x1: f64, x2: f64) -> Vec<f64> {
    let (a, b) = (0.5 * PI * x1, 0.5 * PI * x2);
    vec![a.cos() * b.cos(), a.cos() * b.sin(), a.sin()]
}

/// `count` points on the Pareto front of a benchmark problem.
pub fn sample_front(id: &str, overrides: &ProblemOverrides, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(DpnError::InvalidArgument("front sample count must be at least 1".into()));
    }
    let id = canonical_id(id)?;
    let k = crate::problems::make_problem(&id, overrides)?.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = match id.as_str() {
        "zdt1" | "zdt4" => arc_sample(&[(0.0, 1.0)], &|t| vec![t, 1.0 - t.sqrt()], count),
        "zdt2" => arc_sample(&[(0.0, 1.0)], &|t| vec![t, 1.0 - t * t], count),
        "zdt3" => arc_sample(
            &zdt3_open_arcs(),
            &|t| vec![t, 1.0 - t.sqrt() - t * (10.0 * PI * t).sin()],
            count,
        ),
        "zdt6" => arc_sample(&[(zdt6_min_f1(), 1.0)], &|t| vec![t, 1.0 - t * t], count),
        "dtlz1" => scaled_simplex(k, 0.5, count, &mut rng),
        "dtlz2" | "dtlz3" | "dtlz4" => octant_sphere(k, count, &mut rng),
        "idtlz1" => scaled_simplex(k, 0.5, count, &mut rng)
            .into_iter()
            .map(|s| s.into_iter().map(|v| 0.5 - v).collect())
            .collect(),
        "idtlz2" | "idtlz3" | "idtlz4" => octant_sphere(k, count, &mut rng)
            .into_iter()
            .map(|s| s.into_iter().map(|v| 1.0 - v).collect())
            .collect(),
        "dtlz5" | "dtlz6" => {
            let variant = if id == "dtlz5" { DtlzVariant::Dtlz5 } else { DtlzVariant::Dtlz6 };
            let n = k + 1;
            let p = CoupledDtlz::new(variant, n, k);
            let dist_value = if id == "dtlz5" { 0.5 } else { 0.0 };
            arc_sample(
                &[(0.0, 1.0)],
                &|t| {
                    let mut x = vec![dist_value; n];
                    x[0] = t;
                    for xi in x.iter_mut().take(k - 1).skip(1) {
                        *xi = 0.5;
                    }
                    p.objectives(&x)
                },
                count,
            )
        }
        "dtlz7" => {
            let dims = k - 1;
            let res = (1e6f64.powf(1.0 / dims as f64)).round() as usize;
            let total = res.pow(dims as u32);
            let mut grid = Vec::with_capacity(total);
            for flat in 0..total {
                let mut rem = flat;
                let mut f: Vec<f64> = (0..dims)
                    .map(|_| {
                        let c = rem % res;
                        rem /= res;
                        c as f64 / (res - 1) as f64
                    })
                    .collect();
                let h = k as f64 - f.iter().map(|v| v / 2.0 * (1.0 + (3.0 * PI * v).sin())).sum::<f64>();
                f.push(2.0 * h);
                grid.push(f);
            }
            stride_subsample(nondominated_filter(grid), count)
        }
        "cf1" | "cf2" | "cf3" | "cf4" | "cf5" | "cf6" | "cf7" => {
            let num: usize = id[2..].parse().expect("cf id");
            let (pieces, curve) = cf2d_front(num);
            arc_sample(&pieces, &|t| vec![t, curve(t)], count)
        }
        "cf8" => {
            let xs2 = [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
            let per = largest_remainder(&[1.0; 5], count);
            xs2.iter()
                .zip(per)
                .flat_map(|(&x2, m)| arc_sample(&[(0.0, 1.0)], &move |t| cf_sphere(t, x2), m))
                .collect()
        }
        "cf9" | "cf10" => {
            // feasible where sin(2πq) ≤ 0 with q = (f1² − f2²)/(1 − f3²), plus the f1 = 0 curve
            let curve_pts = (count / 20).max(usize::from(count > 1));
            let area_pts = count - curve_pts;
            let mut out = Vec::with_capacity(count);
            while out.len() < area_pts {
                for p in octant_sphere(3, 4 * area_pts.max(1), &mut rng) {
                    let den = 1.0 - p[2] * p[2];
                    if den <= 1e-12 {
                        continue;
                    }
                    let q = (p[0] * p[0] - p[1] * p[1]) / den;
                    if (2.0 * PI * q).sin() <= 1e-12 && out.len() < area_pts {
                        out.push(p);
                    }
                }
            }
            out.extend(arc_sample(&[(0.0, 1.0)], &|t| cf_sphere(t, 1.0), curve_pts));
            out
        }
        "conv4_2f" => {
            let unit: Vec<Vec<f64>> = (0..4)
                .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let ys = sample_simplex(&unit, count, &mut rng);
            let mut all: Vec<Vec<f64>> = ys.iter().map(|y| Conv42f::upper_objectives(y)).collect();
            all.extend(ys.iter().map(|y| {
                Conv42f::upper_objectives(y)
                    .into_iter()
                    .zip(SIGMA)
                    .map(|(f, s)| f - SHIFT * s)
                    .collect()
            }));
            stride_subsample(nondominated_filter(all), count)
        }
        other => {
            return Err(DpnError::UnknownProblem {
                id: other.to_string(),
                known: crate::problems::known_ids().join(", "),
            })
        }
    };
    // cos(π/2) residues would let copies of a shared endpoint dominate each other
    for v in pts.iter_mut().flatten() {
        if v.abs() < 1e-12 {
            *v = 0.0;
        }
    }
    Ok(pts)
}

/// [`sample_front`] backed by CSV files `<dir>/<id>_k<k>_<count>_<seed>.csv`.
pub fn sample_front_cached(
    dir: &Path,
    id: &str,
    overrides: &ProblemOverrides,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let canon = canonical_id(id)?;
    let k_tag = overrides.k.map_or("d".to_string(), |k| k.to_string());
    let path = dir.join(format!("{canon}_k{k_tag}_{count}_{seed}.csv"));
    if path.exists() {
        return Ok(read_table(&path)?.rows);
    }
    let pts = sample_front(&canon, overrides, count, seed)?;
    std::fs::create_dir_all(dir)?;
    let k = pts.first().map_or(0, Vec::len);
    // write to a temporary name first so concurrent readers never see a partial file
    let tmp = dir.join(format!(".{canon}_{count}_{seed}.{}.tmp", std::process::id()));
    write_table(&tmp, &numbered("f", k), &pts)?;
    std::fs::rename(&tmp, &path)?;
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mutually_nondominated(p: &[Vec<f64>]) -> bool {
        p.iter().all(|a| !p.iter().any(|b| dominates(b, a)))
    }

    #[test]
    fn zdt1_on_curve_and_even() {
        let f = sample_front("zdt1", &ProblemOverrides::default(), 200, 0).unwrap();
        assert_eq!(f.len(), 200);
        assert!(f.iter().all(|p| (p[1] - (1.0 - p[0].sqrt())).abs() < 1e-12));
        assert!(mutually_nondominated(&f));
        assert_eq!(sample_front("zdt1", &ProblemOverrides::default(), 1, 0).unwrap().len(), 1);
    }

    #[test]
    fn sphere_fronts() {
        let f = sample_front("dtlz2", &ProblemOverrides::default(), 300, 4).unwrap();
        assert!(f.iter().all(|p| (p.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12));
        let f = sample_front("dtlz1", &ProblemOverrides::default(), 300, 4).unwrap();
        assert!(f.iter().all(|p| (p.iter().sum::<f64>() - 0.5).abs() < 1e-12));
    }

    #[test]
    fn all_fronts_are_nondominated() {
        for id in crate::problems::known_ids() {
            let f = sample_front(id, &ProblemOverrides::default(), 150, 1).unwrap();
            assert!(!f.is_empty(), "{id}");
            assert!(f.len() <= 150, "{id}");
            assert!(mutually_nondominated(&f), "{id}");
        }
    }

    #[test]
    fn zdt3_has_five_pieces() {
        let f = sample_front("zdt3", &ProblemOverrides::default(), 500, 0).unwrap();
        for (lo, hi) in ZDT3_ARCS {
            assert!(f.iter().any(|p| p[0] >= lo && p[0] <= hi));
        }
    }

    #[test]
    fn staircase_agrees_with_pairwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..3).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect())
            .collect();
        let mut fast = nondominated_filter(pts.clone());
        let mut slow: Vec<Vec<f64>> = pts
            .iter()
            .filter(|a| !pts.iter().any(|b| dominates(b, a)))
            .cloned()
            .collect();
        fast.sort_by(|a, b| a[0].total_cmp(&b[0]));
        slow.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(fast, slow);
    }

    #[test]
    fn largest_remainder_sums() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 10).iter().sum::<usize>(), 10);
        assert_eq!(largest_remainder(&[3.0, 1.0], 4), vec![3, 1]);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let o = ProblemOverrides::default();
        let a = sample_front_cached(dir.path(), "zdt2", &o, 50, 0).unwrap();
        let b = sample_front_cached(dir.path(), "zdt2", &o, 50, 0).unwrap();
        assert_eq!(a, b);
    }
}
