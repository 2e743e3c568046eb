//! Turning population snapshots into a matched starting population and
//! reference set: cleaning, component detection, filling, subset selection,
//! shifting and matching.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpnError, Result};
use crate::io::{numbered, read_table, write_table};
use crate::mop::{EvaluatedPoint, Mop, SetIterate};
use crate::newton::ConstraintLayout;
use crate::numerics::cluster::{dbscan, kmeans, kmedoids, weakest_link, Clustering};
use crate::numerics::geometry::{delaunay, sample_simplex, simplex_volume};
use crate::numerics::linalg::qr_factor;
use crate::numerics::{assignment::hungarian, dist, non_dominated};
use crate::problems::front::largest_remainder;

/// Points closer than this in decision space are duplicates.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub generation: usize,
    pub points: Vec<EvaluatedPoint>,
}

/// The last `κ` populations of a run, newest first, `gap` generations apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationArchive {
    pub snapshots: Vec<Snapshot>,
    pub gap: usize,
}

impl PopulationArchive {
    pub fn new(snapshots: Vec<Snapshot>, gap: usize) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(DpnError::Empty("population archive".into()));
        }
        for w in snapshots.windows(2) {
            if w[0].generation != w[1].generation + gap {
                return Err(DpnError::Archive(format!(
                    "snapshot generations must decrease by {gap}: found {} then {}",
                    w[0].generation, w[1].generation
                )));
            }
        }
        Ok(Self { snapshots, gap })
    }

    pub fn kappa(&self) -> usize {
        self.snapshots.len()
    }

    pub fn generations(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.generation).collect()
    }

    pub fn len(&self) -> usize {
        self.snapshots.iter().map(|s| s.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `generation,x_1..x_n,f_1..f_k` rows, newest snapshot first.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let first = self
            .snapshots
            .iter()
            .find_map(|s| s.points.first())
            .ok_or_else(|| DpnError::Empty("population archive".into()))?;
        let (n, k) = (first.x.len(), first.fx.len());
        let mut header = vec!["generation".to_string()];
        header.extend(numbered("x", n));
        header.extend(numbered("f", k));
        let rows: Vec<Vec<f64>> = self
            .snapshots
            .iter()
            .flat_map(|s| {
                s.points.iter().map(move |p| {
                    std::iter::once(s.generation as f64)
                        .chain(p.x.iter().copied())
                        .chain(p.fx.iter().copied())
                        .collect()
                })
            })
            .collect();
        write_table(path, &header, &rows)
    }

    /// Reads a file written by [`PopulationArchive::write_csv`], re-evaluating
    /// every row on `mop`. Stored objectives must agree within `obj_tol`.
    pub fn read_csv<P: AsRef<Path>>(path: P, mop: &dyn Mop, obj_tol: f64) -> Result<Self> {
        let path = path.as_ref();
        let table = read_table(path)?;
        let (n, k) = (mop.n(), mop.k());
        let gen_col = table
            .column("generation")
            .ok_or_else(|| DpnError::Archive(format!("{}: missing 'generation' column", path.display())))?;
        let x_cols = table.header.iter().filter(|h| h.starts_with("x_")).count();
        if x_cols != n {
            return Err(DpnError::Archive(format!(
                "{}: file has {x_cols} decision columns but the problem has n = {n}",
                path.display()
            )));
        }
        let f_cols = table.header.iter().filter(|h| h.starts_with("f_")).count();
        if f_cols != k {
            return Err(DpnError::Archive(format!(
                "{}: file has {f_cols} objective columns but the problem has k = {k}",
                path.display()
            )));
        }

        let xs: Vec<usize> = (1..=n)
            .map(|i| table.column(&format!("x_{i}")))
            .collect::<Option<_>>()
            .ok_or_else(|| DpnError::Archive(format!("{}: expected columns x_1..x_{n}", path.display())))?;
        let fs: Vec<usize> = (1..=k)
            .map(|i| table.column(&format!("f_{i}")))
            .collect::<Option<_>>()
            .ok_or_else(|| DpnError::Archive(format!("{}: expected columns f_1..f_{k}", path.display())))?;

        let mut snapshots: Vec<Snapshot> = Vec::new();
        for (r, row) in table.rows.iter().enumerate() {
            let line = r + 2;
            let g = row[gen_col];
            if g < 0.0 || g.fract() != 0.0 {
                return Err(DpnError::Archive(format!("{} line {line}: bad generation {g}", path.display())));
            }
            let x: Vec<f64> = xs.iter().map(|&c| row[c]).collect();
            let stored: Vec<f64> = fs.iter().map(|&c| row[c]).collect();
            let p = EvaluatedPoint::evaluate(mop, x);
            let dev = p
                .fx
                .iter()
                .zip(&stored)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if !(dev <= obj_tol) {
                return Err(DpnError::Archive(format!(
                    "{} line {line}: stored objectives deviate from recomputed values by {dev:e}",
                    path.display()
                )));
            }
            let g = g as usize;
            match snapshots.last_mut() {
                Some(s) if s.generation == g => s.points.push(p),
                _ => snapshots.push(Snapshot {
                    generation: g,
                    points: vec![p],
                }),
            }
        }
        let gap = if snapshots.len() > 1 {
            snapshots[0].generation.saturating_sub(snapshots[1].generation)
        } else {
            0
        };
        Self::new(snapshots, gap)
    }
}

/// How thin the cleaned set is relative to the population size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    None,
    /// Too few points: no refinement.
    Skip,
    /// Coarser component detection and repeated starting points.
    Relaxed,
    /// Repeated starting points.
    Repeat,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::None => "none",
            Tier::Skip => "skip",
            Tier::Relaxed => "relaxed",
            Tier::Repeat => "repeat",
        }
    }
}

/// `kept ≤ 0.1μ` or `kept ≤ 0.1·unique` skips, `< 0.3μ` relaxes, `< μ` repeats.
pub fn classify_tier(kept: usize, unique: usize, mu: usize) -> Tier {
    let (kept_f, mu_f) = (kept as f64, mu as f64);
    if kept == 0 || kept_f <= 0.1 * mu_f || kept_f <= 0.1 * unique as f64 {
        Tier::Skip
    } else if kept_f < 0.3 * mu_f {
        Tier::Relaxed
    } else if kept < mu {
        Tier::Repeat
    } else {
        Tier::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub omega: f64,
    /// Points whose largest constraint violation exceeds this are dropped.
    pub feas_tol: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            omega: 0.02,
            feas_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub merged: usize,
    pub duplicates: usize,
    pub removed_infeasible: usize,
    pub removed_outliers: usize,
    pub kept: usize,
    pub tier: Tier,
    /// Objective vectors of the points removed by the auxiliary dominance test.
    pub outliers: Vec<Vec<f64>>,
}

/// `f̄_i = (1 − ω) f_i + (ω/k) Σ_j f_j`.
pub fn aux_objectives(f: &[f64], omega: f64) -> Vec<f64> {
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    f.iter().map(|v| (1.0 - omega) * v + omega * mean).collect()
}

/// Unions the snapshots, removes duplicates and points that are not nearly
/// feasible, then keeps the points non-dominated under the auxiliary objectives.
pub fn merge_and_clean(
    archive: &PopulationArchive,
    cfg: &CleanConfig,
    mu: usize,
) -> Result<(Vec<EvaluatedPoint>, CleanReport)> {
    if !(cfg.omega > 0.0 && cfg.omega < 1.0) {
        return Err(DpnError::Config(format!("omega must lie in (0, 1), got {}", cfg.omega)));
    }
    let merged: Vec<&EvaluatedPoint> = archive.snapshots.iter().flat_map(|s| &s.points).collect();
    if merged.is_empty() {
        return Err(DpnError::Empty("population archive".into()));
    }
    let mut unique: Vec<&EvaluatedPoint> = Vec::with_capacity(merged.len());
    for p in &merged {
        if !unique.iter().any(|q| dist(&q.x, &p.x) < DEDUP_TOL) {
            unique.push(p);
        }
    }
    let feasible: Vec<&EvaluatedPoint> = unique
        .iter()
        .copied()
        .filter(|p| p.max_violation() <= cfg.feas_tol && p.fx.iter().all(|v| v.is_finite()))
        .collect();
    let aux: Vec<Vec<f64>> = feasible.iter().map(|p| aux_objectives(&p.fx, cfg.omega)).collect();
    let keep = non_dominated(&aux);
    let mut is_kept = vec![false; feasible.len()];
    for &i in &keep {
        is_kept[i] = true;
    }
    let outliers: Vec<Vec<f64>> = (0..feasible.len())
        .filter(|&i| !is_kept[i])
        .map(|i| feasible[i].fx.clone())
        .collect();
    let kept: Vec<EvaluatedPoint> = keep.iter().map(|&i| feasible[i].clone()).collect();
    let report = CleanReport {
        merged: merged.len(),
        duplicates: merged.len() - unique.len(),
        removed_infeasible: unique.len() - feasible.len(),
        removed_outliers: outliers.len(),
        kept: kept.len(),
        tier: classify_tier(kept.len(), unique.len(), mu),
        outliers,
    };
    Ok((kept, report))
}

/// `μ` starting points: k-medoids in objective space when `|P| ≥ μ`, otherwise
/// all of `P` topped up with random repeats. Multipliers start at zero.
///
/// Returns the iterate and, per individual, its index in `P`.
pub fn initial_iterate(
    p: &[EvaluatedPoint],
    mu: usize,
    seed: u64,
    n_multipliers: usize,
) -> Result<(SetIterate, Vec<usize>)> {
    if p.is_empty() {
        return Err(DpnError::Empty("cleaned population".into()));
    }
    if mu == 0 {
        return Err(DpnError::InvalidArgument("population size must be positive".into()));
    }
    let idx = if p.len() >= mu {
        let objs: Vec<Vec<f64>> = p.iter().map(|e| e.fx.clone()).collect();
        kmedoids(&objs, mu, seed)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..p.len()).collect();
        while idx.len() < mu {
            idx.push(rng.gen_range(0..p.len()));
        }
        idx
    };
    let points = idx.iter().map(|&i| p[i].x.clone()).collect();
    Ok((SetIterate::new(points, n_multipliers), idx))
}

/// Outcome of the DBSCAN grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDetection {
    pub clustering: Clustering,
    pub radius: f64,
    pub minpts: usize,
    pub score: f64,
}

/// Mean pairwise distance.
pub fn mean_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += dist(&points[i], &points[j]);
        }
    }
    2.0 * s / (n * (n - 1)) as f64
}

/// `(minpts values, radius factors of d̄)` for the component grid search.
pub fn detection_grid(k: usize, relaxed: bool) -> (Vec<usize>, Vec<f64>) {
    match (k, relaxed) {
        (2, false) => (vec![2, 3], (10..=15).map(|i| i as f64 / 100.0).collect()),
        (2, true) => (vec![2], vec![0.5, 0.6]),
        (_, false) => (vec![3, 4], (19..=23).map(|i| i as f64 / 100.0).collect()),
        (_, true) => (vec![2], vec![0.75, 0.77, 0.79]),
    }
}

/// Grid search over DBSCAN parameters keeping the clustering with the lowest
/// weakest-link score; later candidates win ties.
pub fn detect_components(points: &[Vec<f64>], relaxed: bool) -> Result<ComponentDetection> {
    if points.is_empty() {
        return Err(DpnError::Empty("component detection input".into()));
    }
    let single = |score| ComponentDetection {
        clustering: Clustering::single(points.len()),
        radius: 0.0,
        minpts: 1,
        score,
    };
    let dbar = mean_pairwise_distance(points);
    if points.len() < 2 || dbar == 0.0 {
        return Ok(single(0.0));
    }
    let (minpts_grid, factors) = detection_grid(points[0].len(), relaxed);
    let mut best: Option<ComponentDetection> = None;
    for &minpts in &minpts_grid {
        for &f in &factors {
            let r = f * dbar;
            let c = dbscan(points, r, minpts)?;
            if c.n_clusters == 0 {
                continue;
            }
            let wl = weakest_link(points, &c);
            if best.as_ref().is_none_or(|b| wl <= b.score) {
                best = Some(ComponentDetection {
                    clustering: c,
                    radius: r,
                    minpts,
                    score: wl,
                });
            }
        }
    }
    Ok(best.unwrap_or_else(|| {
        log::warn!("every grid point labelled all {} points as noise; using one component", points.len());
        single(f64::INFINITY)
    }))
}

/// `count` points equally spaced in arc length along the polyline through
/// `points` sorted by the first objective, starting at the first point.
pub fn fill_component_2d(points: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    if points.is_empty() || count == 0 {
        return Vec::new();
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let seg: Vec<f64> = sorted.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let total: f64 = seg.iter().sum();
    if total == 0.0 {
        return vec![sorted[0].clone()];
    }
    if count == 1 {
        return vec![sorted[0].clone()];
    }
    let delta = total / (count - 1) as f64;
    let mut out = Vec::with_capacity(count);
    out.push(sorted[0].clone());
    // carry: arc length already covered since the last emitted point
    let mut carry = 0.0;
    for (i, &len) in seg.iter().enumerate() {
        if len == 0.0 {
            continue;
        }
        let dir: Vec<f64> = sorted[i + 1].iter().zip(&sorted[i]).map(|(b, a)| (b - a) / len).collect();
        let mut pos = delta - carry;
        while pos <= len * (1.0 + 1e-12) && out.len() < count {
            out.push(sorted[i].iter().zip(&dir).map(|(a, d)| a + pos * d).collect());
            pos += delta;
        }
        carry = len - (pos - delta);
    }
    while out.len() < count {
        out.push(sorted.last().expect("non-empty").clone());
    }
    out
}

/// Shift direction of a set of targets and an orthonormal basis of its
/// orthogonal complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDirection {
    pub eta: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub fallback: bool,
}

fn complement_basis(eta: &[f64]) -> Vec<Vec<f64>> {
    let k = eta.len();
    let q = qr_factor(&DMatrix::from_column_slice(k, 1, eta)).q;
    (1..k).map(|c| q.column(c).iter().copied().collect()).collect()
}

/// Unit normal of the hull of the coordinate-wise minimal targets, oriented
/// towards smaller objective values. Falls back to `−(1,…,1)/√k` when the
/// minima do not span a hyperplane.
pub fn compute_shift_direction(targets: &[Vec<f64>]) -> Result<ShiftDirection> {
    let k = targets.first().map(Vec::len).ok_or_else(|| DpnError::Empty("targets".into()))?;
    let fallback = || {
        let eta = vec![-1.0 / (k as f64).sqrt(); k];
        ShiftDirection {
            basis: complement_basis(&eta),
            eta,
            fallback: true,
        }
    };
    if k < 2 {
        return Err(DpnError::InvalidArgument("shift direction needs k >= 2".into()));
    }
    let minima: Vec<&Vec<f64>> = (0..k)
        .map(|i| {
            let mut best = 0;
            for (j, t) in targets.iter().enumerate() {
                if t[i] < targets[best][i] {
                    best = j;
                }
            }
            &targets[best]
        })
        .collect();
    let m = DMatrix::from_fn(k, k - 1, |r, c| minima[c + 1][r] - minima[0][r]);
    let qr = qr_factor(&m);
    if qr.rank_deficient {
        return Ok(fallback());
    }
    let qk: Vec<f64> = qr.q.column(k - 1).iter().copied().collect();
    let norm = qk.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lead = qk[0];
    let sign = if lead.abs() > 1e-12 {
        lead.signum()
    } else {
        // normal orthogonal to the first axis: orient so the entries sum negative
        let s: f64 = qk.iter().sum();
        if s.abs() <= 1e-12 {
            return Ok(fallback());
        }
        s.signum()
    };
    let eta: Vec<f64> = qk.iter().map(|v| -sign * v / norm).collect();
    let basis = (0..k - 1).map(|c| qr.q.column(c).iter().copied().collect()).collect();
    Ok(ShiftDirection {
        eta,
        basis,
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilledComponent {
    pub y: Vec<Vec<f64>>,
    pub direction: ShiftDirection,
    /// Set when triangulation failed and `y` is the input.
    pub fallback: bool,
}

/// Projects the points onto the hyperplane orthogonal to their shift
/// direction, triangulates there, and samples every simplex (in objective
/// space) with `⌈a_i·count/A⌉` uniform points.
pub fn fill_component_nd(points: &[Vec<f64>], count: usize, seed: u64) -> Result<FilledComponent> {
    let direction = compute_shift_direction(points)?;
    let passthrough = |direction: ShiftDirection| FilledComponent {
        y: points.to_vec(),
        direction,
        fallback: true,
    };
    let k = points[0].len();
    if points.len() < k || !(3..=4).contains(&k) {
        return Ok(passthrough(direction));
    }
    let projected: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            direction
                .basis
                .iter()
                .map(|v| v.iter().zip(p).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let simplices = match delaunay(&projected) {
        Ok(s) => s,
        Err(e) => {
            log::debug!("filling fell back to the input points: {e}");
            return Ok(passthrough(direction));
        }
    };
    let vertices: Vec<Vec<Vec<f64>>> = simplices
        .iter()
        .map(|s| s.iter().map(|&i| points[i].clone()).collect())
        .collect();
    let volumes: Vec<f64> = vertices
        .iter()
        .map(|v| simplex_volume(&v.iter().map(Vec::as_slice).collect::<Vec<_>>()))
        .collect();
    let total: f64 = volumes.iter().sum();
    if !(total > 0.0) {
        return Ok(passthrough(direction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::new();
    for (v, a) in vertices.iter().zip(&volumes) {
        let c = (a * count as f64 / total - 1e-9).ceil().max(0.0) as usize;
        y.extend(sample_simplex(v, c, &mut rng));
    }
    Ok(FilledComponent {
        y,
        direction,
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefsetConfig {
    /// Shift length `t`.
    pub shift: f64,
    /// Filled-set size; `None` means `max(10μ, 200)`.
    pub n_fill: Option<usize>,
    pub seed: u64,
}

impl Default for RefsetConfig {
    fn default() -> Self {
        Self {
            shift: 0.05,
            n_fill: None,
            seed: 0,
        }
    }
}

/// Targets `T`, shifted targets `Z` and their provenance, ordered so that
/// `z[i]` is matched with individual `i` of the starting population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub t: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub component_of: Vec<usize>,
    pub directions: Vec<ShiftDirection>,
    /// `matching[i]`: index of `z[i]` before reordering.
    pub matching: Vec<usize>,
    pub matching_cost: f64,
    pub shift: f64,
    pub filled: Vec<Vec<f64>>,
    pub filled_component: Vec<usize>,
    /// Cleaned points labelled noise by the component detection.
    pub noise: Vec<Vec<f64>>,
    pub radius: f64,
    pub minpts: usize,
}

impl ReferenceSet {
    pub fn size(&self) -> usize {
        self.z.len()
    }

    pub fn n_components(&self) -> usize {
        self.directions.len()
    }

    /// Shift direction of every target.
    pub fn target_directions(&self) -> Vec<Vec<f64>> {
        self.component_of.iter().map(|&c| self.directions[c].eta.clone()).collect()
    }

    /// Writes `targets.csv` (component, t_*, z_*, eta_*) and `filled.csv`.
    pub fn write_csv<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        let k = self.z.first().map_or(0, Vec::len);
        let mut header = vec!["component".to_string(), "matched_from".to_string()];
        header.extend(numbered("t", k));
        header.extend(numbered("z", k));
        header.extend(numbered("eta", k));
        let rows: Vec<Vec<f64>> = (0..self.size())
            .map(|i| {
                let c = self.component_of[i];
                [c as f64, self.matching[i] as f64]
                    .into_iter()
                    .chain(self.t[i].iter().copied())
                    .chain(self.z[i].iter().copied())
                    .chain(self.directions[c].eta.iter().copied())
                    .collect()
            })
            .collect();
        write_table(dir.join("targets.csv"), &header, &rows)?;
        let mut header = vec!["component".to_string()];
        header.extend(numbered("f", k));
        let rows: Vec<Vec<f64>> = self
            .filled
            .iter()
            .zip(&self.filled_component)
            .map(|(y, &c)| std::iter::once(c as f64).chain(y.iter().copied()).collect())
            .collect();
        write_table(dir.join("filled.csv"), &header, &rows)
    }
}

/// Selects `count` targets from a filled set with k-means, or cycles through the
/// set when it is too small.
fn select_targets(y: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if y.len() <= count {
        return Ok((0..count).map(|i| y[i % y.len()].clone()).collect());
    }
    Ok(kmeans(y, count, seed)?.centroids)
}

/// Builds the starting population and the matched reference set from the
/// cleaned points `p`.
pub fn build_reference_set(
    mop: &dyn Mop,
    p: &[EvaluatedPoint],
    mu: usize,
    tier: Tier,
    cfg: &RefsetConfig,
) -> Result<(ReferenceSet, SetIterate)> {
    if tier == Tier::Skip {
        return Err(DpnError::InvalidArgument("reference set requested for a skipped instance".into()));
    }
    if p.is_empty() {
        return Err(DpnError::Empty("cleaned population".into()));
    }
    let k = mop.k();
    let objs: Vec<Vec<f64>> = p.iter().map(|e| e.fx.clone()).collect();
    let detection = detect_components(&objs, tier == Tier::Relaxed)?;
    let cl = &detection.clustering;
    let comps: Vec<Vec<Vec<f64>>> = (0..cl.n_clusters)
        .map(|c| cl.members(c).into_iter().map(|i| objs[i].clone()).collect())
        .collect();
    let noise: Vec<Vec<f64>> = (0..objs.len())
        .filter(|&i| cl.labels[i].is_none())
        .map(|i| objs[i].clone())
        .collect();
    let sizes: Vec<f64> = comps.iter().map(|c| c.len() as f64).collect();
    let n_fill = cfg.n_fill.unwrap_or((10 * mu).max(200));
    let fill_counts = largest_remainder(&sizes, n_fill);

    let filled: Vec<Vec<Vec<f64>>> = comps
        .par_iter()
        .zip(fill_counts.par_iter())
        .enumerate()
        .map(|(c, (pts, &nf))| -> Result<Vec<Vec<f64>>> {
            let nf = nf.max(2);
            if k == 2 {
                Ok(fill_component_2d(pts, nf))
            } else {
                Ok(fill_component_nd(pts, nf, cfg.seed.wrapping_add(c as u64))?.y)
            }
        })
        .collect::<Result<_>>()?;

    let target_counts = largest_remainder(&sizes, mu);
    let mut t_all = Vec::with_capacity(mu);
    let mut comp_all = Vec::with_capacity(mu);
    let mut directions = Vec::with_capacity(comps.len());
    for (c, (y, &cnt)) in filled.iter().zip(&target_counts).enumerate() {
        let tc = select_targets(y, cnt, cfg.seed.wrapping_add(1000 + c as u64))?;
        let dir_source = if tc.is_empty() { y } else { &tc };
        directions.push(compute_shift_direction(dir_source)?);
        comp_all.extend(std::iter::repeat_n(c, tc.len()));
        t_all.extend(tc);
    }
    let z_all: Vec<Vec<f64>> = t_all
        .iter()
        .zip(&comp_all)
        .map(|(t, &c)| t.iter().zip(&directions[c].eta).map(|(a, e)| a + cfg.shift * e).collect())
        .collect();

    let (x0, _) = initial_iterate(p, mu, cfg.seed, ConstraintLayout::of(mop).len())?;
    let fx0: Vec<Vec<f64>> = x0.points.iter().map(|x| mop.eval_f(x)).collect();
    let costs = DMatrix::from_fn(mu, mu, |i, j| dist(&fx0[i], &z_all[j]));
    let asg = hungarian(&costs)?;
    let reorder = |v: &[Vec<f64>]| asg.perm.iter().map(|&j| v[j].clone()).collect::<Vec<_>>();

    let mut filled_all = Vec::new();
    let mut filled_component = Vec::new();
    for (c, y) in filled.into_iter().enumerate() {
        filled_component.extend(std::iter::repeat_n(c, y.len()));
        filled_all.extend(y);
    }
    let refset = ReferenceSet {
        t: reorder(&t_all),
        z: reorder(&z_all),
        component_of: asg.perm.iter().map(|&j| comp_all[j]).collect(),
        directions,
        matching: asg.perm.clone(),
        matching_cost: asg.cost,
        shift: cfg.shift,
        filled: filled_all,
        filled_component,
        noise,
        radius: detection.radius,
        minpts: detection.minpts,
    };
    Ok((refset, x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn aux_objective_outlier() {
        let a = aux_objectives(&[0.0, 10.0], 0.02);
        assert!(close(&a, &[0.1, 9.9], 1e-12));
        let b = aux_objectives(&[0.001, 1.0], 0.02);
        assert!(close(&b, &[0.01099, 0.99001], 1e-12));
        let pa = EvaluatedPoint {
            x: vec![0.0],
            fx: vec![0.0, 10.0],
            hx: vec![],
            gx: vec![],
        };
        let pb = EvaluatedPoint {
            x: vec![1.0],
            fx: vec![0.001, 1.0],
            hx: vec![],
            gx: vec![],
        };
        let arch = PopulationArchive::new(
            vec![Snapshot {
                generation: 0,
                points: vec![pa, pb.clone()],
            }],
            5,
        )
        .unwrap();
        let (kept, rep) = merge_and_clean(&arch, &CleanConfig::default(), 2).unwrap();
        assert_eq!(kept, vec![pb]);
        assert_eq!(rep.removed_outliers, 1);
        assert_eq!(rep.outliers, vec![vec![0.0, 10.0]]);
    }

    #[test]
    fn tiers() {
        assert_eq!(classify_tier(0, 10, 10), Tier::Skip);
        assert_eq!(classify_tier(1, 10, 10), Tier::Skip);
        assert_eq!(classify_tier(2, 10, 10), Tier::Relaxed);
        assert_eq!(classify_tier(5, 10, 10), Tier::Repeat);
        assert_eq!(classify_tier(10, 10, 10), Tier::None);
        assert_eq!(classify_tier(30, 400, 30), Tier::Skip);
    }

    #[test]
    fn fill_2d_examples() {
        let seg = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(fill_component_2d(&seg, 3), vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]]);
        assert_eq!(fill_component_2d(&seg, 2), seg);
        let same = vec![vec![0.3, 0.3]; 4];
        assert_eq!(fill_component_2d(&same, 10), vec![vec![0.3, 0.3]]);
        let three = vec![vec![0.0, 1.0], vec![0.7, 0.3], vec![0.2, 0.8]];
        let y = fill_component_2d(&three, 5);
        assert_eq!(y.len(), 5);
        let len = 2.0_f64.sqrt() * 0.7;
        for w in y.windows(2) {
            assert!((dist(&w[0], &w[1]) - len / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_direction_examples() {
        let s = 1.0 / 3.0_f64.sqrt();
        // unique coordinate minima on the plane f1 + f2 + f3 = 1
        let t = vec![
            vec![0.4, 0.3, 0.3],
            vec![0.0, 0.6, 0.4],
            vec![0.3, 0.0, 0.7],
            vec![0.5, 0.5, 0.0],
        ];
        let d = compute_shift_direction(&t).unwrap();
        assert!(!d.fallback);
        assert!(close(&d.eta, &[-s, -s, -s], 1e-12));
        // the simplex corners tie in every coordinate; the lowest-index minima
        // coincide and the fallback gives the same normal
        let corners = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let d = compute_shift_direction(&corners).unwrap();
        assert!(close(&d.eta, &[-s, -s, -s], 1e-12));
        let d2 = compute_shift_direction(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let h = 0.5_f64.sqrt();
        assert!(close(&d2.eta, &[-h, -h], 1e-12));
        let deg = compute_shift_direction(&vec![vec![0.2, 0.3, 0.4]; 5]).unwrap();
        assert!(deg.fallback);
        assert!(close(&deg.eta, &[-s, -s, -s], 1e-15));
        for v in &deg.basis {
            assert!(v.iter().zip(&deg.eta).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn fill_nd_plane_and_counts() {
        let tri = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let f = fill_component_nd(&tri, 100, 3).unwrap();
        assert!(!f.fallback);
        assert_eq!(f.y.len(), 100);
        assert!(f.y.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-9));

        // unit square lifted onto f3 = 0.5
        let sq = vec![
            vec![0.0, 0.0, 0.5],
            vec![1.0, 0.0, 0.5],
            vec![0.0, 1.0, 0.5],
            vec![1.0, 1.0, 0.5],
        ];
        let f = fill_component_nd(&sq, 100, 1).unwrap();
        assert!(!f.fallback);
        assert_eq!(f.y.len(), 100);
    }

    #[test]
    fn initial_iterate_repeats() {
        let pts: Vec<EvaluatedPoint> = (0..5)
            .map(|i| EvaluatedPoint {
                x: vec![i as f64],
                fx: vec![i as f64, 5.0 - i as f64],
                hx: vec![],
                gx: vec![],
            })
            .collect();
        let (x, idx) = initial_iterate(&pts, 10, 7, 2).unwrap();
        assert_eq!(x.mu(), 10);
        for i in 0..5 {
            assert!(idx.contains(&i));
        }
        assert!(x.multipliers.iter().all(|m| m == &vec![0.0, 0.0]));
        let (x, _) = initial_iterate(&pts, 5, 7, 0).unwrap();
        let mut got: Vec<f64> = x.points.iter().map(|p| p[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }
}
