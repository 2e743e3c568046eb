//! Seeded NSGA-II with an adaptive ε-constraint rule, recording the last
//! populations of the run as an archive.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpnError, Result};
use crate::mop::{EvaluatedPoint, Mop};
use crate::numerics::dominates;
use crate::refset::{aux_objectives, PopulationArchive, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeaConfig {
    pub mu: usize,
    pub generations: usize,
    pub sbx_eta: f64,
    pub pm_eta: f64,
    pub crossover_rate: f64,
    /// Per-variable mutation probability; `None` means `1/n`.
    pub mutation_rate: Option<f64>,
    /// Fraction of the run after which ε reaches zero.
    pub eps_fraction: f64,
    pub snapshot_gap: usize,
    /// Number of snapshots; `None` means 2 for `k = 2` and 4 otherwise.
    pub kappa: Option<usize>,
    /// Select on the auxiliary objectives instead of `F`.
    pub aux_selection: bool,
    pub omega: f64,
    pub seed: u64,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        Self {
            mu: 100,
            generations: 300,
            sbx_eta: 15.0,
            pm_eta: 20.0,
            crossover_rate: 0.9,
            mutation_rate: None,
            eps_fraction: 0.5,
            snapshot_gap: 5,
            kappa: None,
            aux_selection: false,
            omega: 0.02,
            seed: 0,
        }
    }
}

impl MoeaConfig {
    pub fn kappa_for(&self, k: usize) -> usize {
        self.kappa.unwrap_or(if k == 2 { 2 } else { 4 })
    }

    pub fn validate(&self, mop: &dyn Mop) -> Result<()> {
        if self.mu < 4 || !self.mu.is_multiple_of(2) {
            return Err(DpnError::Config(format!("population size must be even and >= 4, got {}", self.mu)));
        }
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.crossover_rate) || !self.mutation_rate.is_none_or(rate_ok) {
            return Err(DpnError::Config("crossover and mutation rates must lie in [0, 1]".into()));
        }
        if !(self.sbx_eta >= 0.0 && self.pm_eta >= 0.0) {
            return Err(DpnError::Config("distribution indices must be non-negative".into()));
        }
        if !(self.eps_fraction > 0.0 && self.eps_fraction <= 1.0) {
            return Err(DpnError::Config("eps_fraction must lie in (0, 1]".into()));
        }
        let kappa = self.kappa_for(mop.k());
        if kappa == 0 {
            return Err(DpnError::Config("kappa must be positive".into()));
        }
        if self.generations < (kappa - 1) * self.snapshot_gap {
            return Err(DpnError::Config(format!(
                "{} generations are too few for {kappa} snapshots {} apart; need at least {}",
                self.generations,
                self.snapshot_gap,
                (kappa - 1) * self.snapshot_gap
            )));
        }
        if kappa > 1 && self.snapshot_gap == 0 {
            return Err(DpnError::Config("snapshot gap must be positive".into()));
        }
        if !mop.bounds().is_finite() {
            return Err(DpnError::Config(format!("{} has unbounded variables", mop.name())));
        }
        Ok(())
    }

    /// Generations at which snapshots are taken, newest first.
    pub fn snapshot_generations(&self, k: usize) -> Vec<usize> {
        (0..self.kappa_for(k))
            .map(|j| self.generations - j * self.snapshot_gap)
            .collect()
    }
}

/// Member of the working population with its selection data.
#[derive(Debug, Clone)]
struct Member {
    point: EvaluatedPoint,
    sel: Vec<f64>,
    violation: f64,
    rank: usize,
    crowding: f64,
}

/// Constrained dominance at level `eps`: ε-feasible beats infeasible, smaller
/// violation beats larger, and between ε-feasible points Pareto dominance decides.
fn eps_dominates(a: &Member, b: &Member, eps: f64) -> bool {
    let fa = a.violation <= eps;
    let fb = b.violation <= eps;
    match (fa, fb) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates(&a.sel, &b.sel),
    }
}

/// Fast non-dominated sorting under [`eps_dominates`]; returns the fronts.
fn sort_fronts(pop: &mut [Member], eps: f64) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if eps_dominates(&pop[i], &pop[j], eps) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            } else if eps_dominates(&pop[j], &pop[i], eps) {
                dominating[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = fronts.len();
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn assign_crowding(pop: &mut [Member], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let k = pop[front[0]].sel.len();
    let mut order = front.to_vec();
    for m in 0..k {
        order.sort_by(|&a, &b| pop[a].sel[m].total_cmp(&pop[b].sel[m]).then(a.cmp(&b)));
        let lo = pop[order[0]].sel[m];
        let hi = pop[*order.last().expect("non-empty")].sel[m];
        pop[order[0]].crowding = f64::INFINITY;
        pop[*order.last().expect("non-empty")].crowding = f64::INFINITY;
        if hi - lo <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap = pop[order[w + 1]].sel[m] - pop[order[w - 1]].sel[m];
            pop[order[w]].crowding += gap / (hi - lo);
        }
    }
}

/// NSGA-II state, advanced one generation at a time.
pub struct Nsga2<'a> {
    mop: &'a dyn Mop,
    cfg: MoeaConfig,
    rng: ChaCha8Rng,
    pop: Vec<Member>,
    generation: usize,
    eps0: f64,
}

impl<'a> Nsga2<'a> {
    pub fn new(mop: &'a dyn Mop, cfg: &MoeaConfig) -> Result<Self> {
        cfg.validate(mop)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let b = mop.bounds();
        let points: Vec<EvaluatedPoint> = (0..cfg.mu)
            .map(|_| {
                let x = (0..mop.n()).map(|j| rng.gen_range(b.lower[j]..=b.upper[j])).collect();
                EvaluatedPoint::evaluate(mop, x)
            })
            .collect();
        let eps0 = points.iter().map(EvaluatedPoint::total_violation).sum::<f64>() / cfg.mu as f64;
        let mut s = Self {
            mop,
            cfg: cfg.clone(),
            rng,
            pop: Vec::new(),
            generation: 0,
            eps0,
        };
        s.pop = points.into_iter().map(|p| s.member(p)).collect();
        let eps = s.epsilon();
        let fronts = sort_fronts(&mut s.pop, eps);
        for f in &fronts {
            assign_crowding(&mut s.pop, f);
        }
        Ok(s)
    }

    fn member(&self, point: EvaluatedPoint) -> Member {
        let sel = if self.cfg.aux_selection {
            aux_objectives(&point.fx, self.cfg.omega)
        } else {
            point.fx.clone()
        };
        let violation = point.total_violation();
        // non-finite objectives are treated as maximally violated
        let violation = if sel.iter().all(|v| v.is_finite()) { violation } else { f64::INFINITY };
        Member {
            point,
            sel,
            violation,
            rank: 0,
            crowding: 0.0,
        }
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Current ε level: `ε₀` decreasing linearly to 0 at `eps_fraction` of the run.
    pub fn epsilon(&self) -> f64 {
        let end = self.cfg.eps_fraction * self.cfg.generations as f64;
        if end <= 0.0 {
            return 0.0;
        }
        self.eps0 * (1.0 - self.generation as f64 / end).max(0.0)
    }

    pub fn population(&self) -> Vec<EvaluatedPoint> {
        self.pop.iter().map(|m| m.point.clone()).collect()
    }

    fn better(&self, a: usize, b: usize, eps: f64) -> usize {
        let (ma, mb) = (&self.pop[a], &self.pop[b]);
        let va = if ma.violation <= eps { 0.0 } else { ma.violation };
        let vb = if mb.violation <= eps { 0.0 } else { mb.violation };
        if va != vb {
            return if va < vb { a } else { b };
        }
        if ma.rank != mb.rank {
            return if ma.rank < mb.rank { a } else { b };
        }
        if ma.crowding != mb.crowding {
            return if ma.crowding > mb.crowding { a } else { b };
        }
        a
    }

    fn tournament(&mut self, eps: f64) -> usize {
        let a = self.rng.gen_range(0..self.pop.len());
        let b = self.rng.gen_range(0..self.pop.len());
        self.better(a, b, eps)
    }

    fn sbx(&mut self, p1: &[f64], p2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let b = self.mop.bounds();
        let eta = self.cfg.sbx_eta;
        let mut c1 = p1.to_vec();
        let mut c2 = p2.to_vec();
        if self.rng.gen::<f64>() > self.cfg.crossover_rate {
            return (c1, c2);
        }
        for j in 0..p1.len() {
            if self.rng.gen::<f64>() > 0.5 || (p1[j] - p2[j]).abs() < 1e-14 {
                continue;
            }
            let (y1, y2) = if p1[j] < p2[j] { (p1[j], p2[j]) } else { (p2[j], p1[j]) };
            let (lo, hi) = (b.lower[j], b.upper[j]);
            let u: f64 = self.rng.gen();
            let spread = |beta: f64| -> f64 {
                let alpha = 2.0 - beta.powf(-(eta + 1.0));
                if u <= 1.0 / alpha {
                    (u * alpha).powf(1.0 / (eta + 1.0))
                } else {
                    (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
                }
            };
            let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
            let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
            let mut v1 = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
            let mut v2 = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
            if self.rng.gen::<f64>() < 0.5 {
                std::mem::swap(&mut v1, &mut v2);
            }
            c1[j] = v1;
            c2[j] = v2;
        }
        (c1, c2)
    }

    fn mutate(&mut self, x: &mut [f64]) {
        let b = self.mop.bounds();
        let rate = self.cfg.mutation_rate.unwrap_or(1.0 / x.len() as f64);
        let eta = self.cfg.pm_eta;
        for j in 0..x.len() {
            if self.rng.gen::<f64>() >= rate {
                continue;
            }
            let (lo, hi) = (b.lower[j], b.upper[j]);
            let span = hi - lo;
            let d1 = (x[j] - lo) / span;
            let d2 = (hi - x[j]) / span;
            let u: f64 = self.rng.gen();
            let pow = 1.0 / (eta + 1.0);
            let dq = if u < 0.5 {
                let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
                v.powf(pow) - 1.0
            } else {
                let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
                1.0 - v.powf(pow)
            };
            x[j] = (x[j] + dq * span).clamp(lo, hi);
        }
    }

    /// Advances one generation.
    pub fn step(&mut self) {
        let eps_parent = self.epsilon();
        let mu = self.cfg.mu;
        let mut children = Vec::with_capacity(mu);
        while children.len() < mu {
            let a = self.tournament(eps_parent);
            let b = self.tournament(eps_parent);
            let (pa, pb) = (self.pop[a].point.x.clone(), self.pop[b].point.x.clone());
            let (mut c1, mut c2) = self.sbx(&pa, &pb);
            self.mutate(&mut c1);
            self.mutate(&mut c2);
            children.push(c1);
            if children.len() < mu {
                children.push(c2);
            }
        }
        self.generation += 1;
        let eps = self.epsilon();
        let mut all = std::mem::take(&mut self.pop);
        for x in children {
            let p = EvaluatedPoint::evaluate(self.mop, x);
            all.push(self.member(p));
        }
        let fronts = sort_fronts(&mut all, eps);
        let mut survivors: Vec<usize> = Vec::with_capacity(mu);
        for f in &fronts {
            assign_crowding(&mut all, f);
            if survivors.len() + f.len() <= mu {
                survivors.extend(f);
                continue;
            }
            let mut last = f.clone();
            last.sort_by(|&a, &b| all[b].crowding.total_cmp(&all[a].crowding).then(a.cmp(&b)));
            survivors.extend(last.into_iter().take(mu - survivors.len()));
            break;
        }
        survivors.sort_unstable();
        let mut keep = vec![false; all.len()];
        for &i in &survivors {
            keep[i] = true;
        }
        self.pop = all
            .into_iter()
            .zip(keep)
            .filter_map(|(m, k)| k.then_some(m))
            .collect();
        // ranks and crowding relative to the survivors drive the next tournament
        let fronts = sort_fronts(&mut self.pop, eps);
        for f in &fronts {
            assign_crowding(&mut self.pop, f);
        }
    }
}

/// Runs NSGA-II for `cfg.generations` generations and returns the snapshots at
/// generations `f, f − s, …, f − (κ−1)s`.
pub fn run_nsga2(mop: &dyn Mop, cfg: &MoeaConfig) -> Result<PopulationArchive> {
    let mut alg = Nsga2::new(mop, cfg)?;
    let wanted = cfg.snapshot_generations(mop.k());
    let mut snaps = Vec::with_capacity(wanted.len());
    loop {
        if wanted.contains(&alg.generation()) {
            snaps.push(Snapshot {
                generation: alg.generation(),
                points: alg.population(),
            });
        }
        if alg.generation() == cfg.generations {
            break;
        }
        alg.step();
    }
    snaps.reverse();
    PopulationArchive::new(snaps, cfg.snapshot_gap)
}

/// Reads snapshot files, re-evaluating every row; stored objectives must match
/// within `1e-6`. Snapshots from all files are merged newest first.
pub fn ingest_archive<P: AsRef<Path>>(paths: &[P], mop: &dyn Mop) -> Result<PopulationArchive> {
    if paths.is_empty() {
        return Err(DpnError::Empty("archive file list".into()));
    }
    let mut snaps: Vec<Snapshot> = Vec::new();
    for p in paths {
        let a = PopulationArchive::read_csv(p, mop, 1e-6)?;
        for s in a.snapshots {
            match snaps.iter_mut().find(|t| t.generation == s.generation) {
                Some(t) => t.points.extend(s.points),
                None => snaps.push(s),
            }
        }
    }
    snaps.sort_by_key(|s| std::cmp::Reverse(s.generation));
    let gap = if snaps.len() > 1 {
        snaps[0].generation - snaps[1].generation
    } else {
        0
    };
    PopulationArchive::new(snaps, gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, ProblemOverrides};

    #[test]
    fn snapshot_generations_and_validation() {
        let p = make_problem("zdt1", &ProblemOverrides::with_n(5)).unwrap();
        let cfg = MoeaConfig {
            mu: 20,
            generations: 20,
            ..Default::default()
        };
        assert_eq!(cfg.snapshot_generations(2), vec![20, 15]);
        assert_eq!(cfg.snapshot_generations(3), vec![20, 15, 10, 5]);
        let short = MoeaConfig {
            generations: 4,
            ..cfg.clone()
        };
        assert!(matches!(short.validate(p.as_ref()), Err(DpnError::Config(_))));
        let odd = MoeaConfig { mu: 21, ..cfg };
        assert!(odd.validate(p.as_ref()).is_err());
    }

    #[test]
    fn deterministic_and_shaped() {
        let p = make_problem("zdt2", &ProblemOverrides::with_n(6)).unwrap();
        let cfg = MoeaConfig {
            mu: 12,
            generations: 10,
            seed: 3,
            ..Default::default()
        };
        let a = run_nsga2(p.as_ref(), &cfg).unwrap();
        let b = run_nsga2(p.as_ref(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.generations(), vec![10, 5]);
        assert!(a.snapshots.iter().all(|s| s.points.len() == 12));
        let c = run_nsga2(p.as_ref(), &MoeaConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn epsilon_schedule() {
        let p = make_problem("cf1", &ProblemOverrides::default()).unwrap();
        let cfg = MoeaConfig {
            mu: 10,
            generations: 10,
            ..Default::default()
        };
        let mut alg = Nsga2::new(p.as_ref(), &cfg).unwrap();
        assert!(alg.epsilon() >= 0.0);
        for _ in 0..5 {
            alg.step();
        }
        assert_eq!(alg.epsilon(), 0.0);
    }
}
