//! Experiment orchestration: MOEA (or ingested/synthetic populations), reference
//! set generation, Newton refinement, evaluation against sampled true fronts,
//! multi-seed comparison and plot data.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpnError, Result};
use crate::indicators::delta2;
use crate::io::{numbered, read_table, split_population, write_population, write_table, write_text};
use crate::moea::{ingest_archive, run_nsga2, MoeaConfig};
use crate::mop::{evaluate_set, EvaluatedPoint, Mop};
use crate::newton::{newton_loop, BranchRule, NewtonConfig, StepMode};
use crate::numerics::stats::{holm_sidak, mann_whitney};
use crate::problems::{canonical_id, make_problem, sample_front, sample_front_cached, ProblemOverrides};
use crate::refset::{build_reference_set, merge_and_clean, CleanConfig, PopulationArchive, RefsetConfig, Snapshot, Tier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Nsga2,
    /// Two gapped ZDT1 populations with outliers.
    Synthetic,
    Ingest(Vec<PathBuf>),
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Nsga2 => "nsga2",
            Source::Synthetic => "synthetic",
            Source::Ingest(_) => "ingest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub overrides: ProblemOverrides,
    pub source: Source,
    /// The seed field is replaced by each entry of `seeds`.
    pub moea: MoeaConfig,
    pub newton: NewtonConfig,
    pub clean: CleanConfig,
    pub n_fill: Option<usize>,
    pub seeds: Vec<u64>,
    /// Run NSGA-II alone with extra generations as the comparison arm.
    pub baseline: bool,
    pub baseline_extra: f64,
    /// Size of the sampled true front used for Δ₂.
    pub front_size: usize,
    pub front_cache: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "zdt1".into(),
            overrides: ProblemOverrides::default(),
            source: Source::Nsga2,
            moea: MoeaConfig::default(),
            newton: NewtonConfig::default(),
            clean: CleanConfig::default(),
            n_fill: None,
            seeds: (0..10).collect(),
            baseline: true,
            baseline_extra: 0.1,
            front_size: 1000,
            front_cache: None,
            output: PathBuf::from("results"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| DpnError::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(DpnError::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.eq_ignore_ascii_case("auto") || value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

/// `a,b,c` or the half-open range `a..b`.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = parse_num("seeds", a.trim())?;
        let b: u64 = parse_num("seeds", b.trim())?;
        return Ok((a..b).collect());
    }
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num("seeds", s.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(DpnError::Config(format!("line {}: expected 'key = value'", i + 1)));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| DpnError::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DpnError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = canonical_id(value)?,
            "n" => self.overrides.n = parse_opt(key, value)?,
            "k" => self.overrides.k = parse_opt(key, value)?,
            "source" => {
                self.source = match value {
                    "nsga2" => Source::Nsga2,
                    "synthetic" => Source::Synthetic,
                    "ingest" => Source::Ingest(Vec::new()),
                    _ => return Err(DpnError::Config(format!("unknown source '{value}'"))),
                }
            }
            "ingest" => {
                self.source = Source::Ingest(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(PathBuf::from)
                        .collect(),
                )
            }
            "mu" => self.moea.mu = parse_num(key, value)?,
            "generations" => self.moea.generations = parse_num(key, value)?,
            "sbx_eta" => self.moea.sbx_eta = parse_num(key, value)?,
            "pm_eta" => self.moea.pm_eta = parse_num(key, value)?,
            "crossover_rate" => self.moea.crossover_rate = parse_num(key, value)?,
            "mutation_rate" => self.moea.mutation_rate = parse_opt(key, value)?,
            "eps_fraction" => self.moea.eps_fraction = parse_num(key, value)?,
            "snapshot_gap" => self.moea.snapshot_gap = parse_num(key, value)?,
            "kappa" => self.moea.kappa = parse_opt(key, value)?,
            "aux_selection" => self.moea.aux_selection = parse_bool(key, value)?,
            "iterations" => self.newton.iterations = parse_num(key, value)?,
            "shift" => self.newton.shift = parse_num(key, value)?,
            "tol_y" => self.newton.tol_y = parse_opt(key, value)?,
            "step_mode" => {
                self.newton.mode = match value {
                    "matched" => StepMode::Matched,
                    "delta_p" => StepMode::DeltaP,
                    _ => return Err(DpnError::Config(format!("unknown step mode '{value}'"))),
                }
            }
            "branch_rule" => {
                self.newton.params.branch_rule = match value {
                    "gd_when_smaller" => BranchRule::GdWhenSmaller,
                    "gd_when_larger" => BranchRule::GdWhenLarger,
                    _ => return Err(DpnError::Config(format!("unknown branch rule '{value}'"))),
                }
            }
            "line_search" => self.newton.params.line_search = parse_bool(key, value)?,
            "omega" => {
                self.clean.omega = parse_num(key, value)?;
                self.moea.omega = self.clean.omega;
            }
            "feas_tol" => self.clean.feas_tol = parse_num(key, value)?,
            "n_fill" => self.n_fill = parse_opt(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "baseline" => self.baseline = parse_bool(key, value)?,
            "baseline_extra" => self.baseline_extra = parse_num(key, value)?,
            "front_size" => self.front_size = parse_num(key, value)?,
            "front_cache" => self.front_cache = Some(PathBuf::from(value)),
            "output" => self.output = PathBuf::from(value),
            _ => return Err(DpnError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(DpnError::Config("seed list is empty".into()));
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(DpnError::Config("seeds must be distinct".into()));
        }
        if !(self.newton.shift > 0.0) {
            return Err(DpnError::Config("shift must be positive".into()));
        }
        if !(self.baseline_extra >= 0.0) {
            return Err(DpnError::Config("baseline_extra must be non-negative".into()));
        }
        if self.front_size < 2 {
            return Err(DpnError::Config("front_size must be at least 2".into()));
        }
        if matches!(&self.source, Source::Ingest(p) if p.is_empty()) {
            return Err(DpnError::Config("ingest source needs at least one file".into()));
        }
        if self.source == Source::Synthetic && self.problem != "zdt1" {
            return Err(DpnError::Config("synthetic populations are defined for zdt1 only".into()));
        }
        let mop = make_problem(&self.problem, &self.overrides)?;
        if self.source == Source::Nsga2 {
            self.moea.validate(mop.as_ref())?;
        } else if self.moea.mu == 0 {
            return Err(DpnError::Config("population size must be positive".into()));
        }
        Ok(())
    }

    fn baseline_generations(&self) -> usize {
        (self.moea.generations as f64 * (1.0 + self.baseline_extra)).round() as usize
    }
}

/// Two gapped populations `P_f`, `P_{f−s}` on ZDT1 of size `mu`, each with
/// three weakly optimal outliers (`x₁ = 0`) and three dominated ones.
pub fn synthetic_zdt1_archive(mop: &dyn Mop, mu: usize, generation: usize, gap: usize, seed: u64) -> Result<PopulationArchive> {
    if mop.k() != 2 || mop.n() < 2 {
        return Err(DpnError::InvalidArgument("synthetic populations need a bi-objective problem".into()));
    }
    if mu < 8 || generation < gap || gap == 0 {
        return Err(DpnError::InvalidArgument("synthetic populations need mu >= 8 and 0 < gap <= generation".into()));
    }
    let n = mop.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // pieces in u = √x₁, which spaces the images roughly evenly along the front
    let pieces = [(0.0, 0.4), (0.55, 0.75), (0.85, 1.0)];
    let mut snaps = Vec::with_capacity(2);
    for (j, tail) in [(0usize, 0.005), (1, 0.01)] {
        let mut pts = Vec::with_capacity(mu);
        let n_out = 6;
        for _ in 0..mu - n_out {
            let (lo, hi) = pieces[rng.gen_range(0..pieces.len())];
            let u: f64 = rng.gen_range(lo..hi);
            let mut x = vec![u * u];
            x.extend((1..n).map(|_| rng.gen_range(0.0..tail)));
            pts.push(EvaluatedPoint::evaluate(mop, x));
        }
        for o in 0..n_out {
            let mut x = vec![if o < 3 { 0.0 } else { rng.gen_range(0.1..0.9) }];
            x.extend((1..n).map(|_| rng.gen_range(0.15..0.4)));
            pts.push(EvaluatedPoint::evaluate(mop, x));
        }
        snaps.push(Snapshot {
            generation: generation - j * gap,
            points: pts,
        });
    }
    PopulationArchive::new(snaps, gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub tier: Option<Tier>,
    pub skipped: bool,
    /// Δ₂ of the newest snapshot.
    pub delta2_before: Option<f64>,
    /// Δ₂ after refinement. Skipped instances copy the baseline arm when there
    /// is one and `delta2_before` otherwise.
    pub delta2_hybrid: Option<f64>,
    pub delta2_baseline: Option<f64>,
    pub n_components: Option<usize>,
    pub newton_aborted: Option<String>,
    pub error: Option<String>,
}

impl SeedResult {
    fn failed(seed: u64, e: DpnError) -> Self {
        Self {
            seed,
            tier: None,
            skipped: false,
            delta2_before: None,
            delta2_hybrid: None,
            delta2_baseline: None,
            n_components: None,
            newton_aborted: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub n: usize,
    pub k: usize,
    pub config: ExperimentConfig,
    pub results: Vec<SeedResult>,
}

impl Summary {
    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DpnError::Archive(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn hybrid_samples(&self) -> Vec<f64> {
        self.results.iter().filter_map(|r| r.delta2_hybrid).collect()
    }

    pub fn baseline_samples(&self) -> Vec<f64> {
        self.results.iter().filter_map(|r| r.delta2_baseline).collect()
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.error.is_some()).count()
    }
}

fn seed_dir(output: &Path, seed: u64) -> PathBuf {
    output.join(format!("seed_{seed}"))
}

fn images(points: &[EvaluatedPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.fx.clone()).collect()
}

/// Merge, clean, build the reference set and refine for one archive, writing
/// artifacts into `dir`.
fn refine_archive(
    cfg: &ExperimentConfig,
    mop: &dyn Mop,
    archive: &PopulationArchive,
    front: &[Vec<f64>],
    seed: u64,
    dir: &Path,
) -> Result<SeedResult> {
    let (n, k) = (mop.n(), mop.k());
    archive.write_csv(dir.join("snapshots.csv"))?;
    let newest = &archive.snapshots[0].points;
    let before = delta2(&images(newest), front)?;
    let mu = cfg.moea.mu;
    let (cleaned, report) = merge_and_clean(archive, &cfg.clean, mu)?;
    write_text(dir.join("clean.json"), &serde_json::to_string_pretty(&report)?)?;
    write_population(dir.join("cleaned.csv"), &cleaned, n, k)?;
    write_table(dir.join("outliers.csv"), &numbered("f", k), &report.outliers)?;
    let mut res = SeedResult {
        seed,
        tier: Some(report.tier),
        skipped: report.tier == Tier::Skip,
        delta2_before: Some(before),
        delta2_hybrid: Some(before),
        delta2_baseline: None,
        n_components: None,
        newton_aborted: None,
        error: None,
    };
    if report.tier == Tier::Skip {
        write_population(dir.join("final.csv"), newest, n, k)?;
        log::warn!(
            "{} seed {seed}: only {} points survive cleaning, keeping the MOEA result",
            cfg.problem,
            report.kept
        );
        return Ok(res);
    }
    let rcfg = RefsetConfig {
        shift: cfg.newton.shift,
        n_fill: cfg.n_fill,
        seed,
    };
    let (refset, x0) = build_reference_set(mop, &cleaned, mu, report.tier, &rcfg)?;
    let refset_dir = dir.join("refset");
    std::fs::create_dir_all(&refset_dir)?;
    refset.write_csv(&refset_dir)?;
    write_population(dir.join("x0.csv"), &evaluate_set(mop, &x0)?, n, k)?;
    res.n_components = Some(refset.n_components());
    let run = newton_loop(mop, &x0, &refset.z, &refset.target_directions(), &cfg.newton)?;
    run.trace.write_csv(dir.join("trace.csv"))?;
    let finals = evaluate_set(mop, &run.iterate)?;
    write_population(dir.join("final.csv"), &finals, n, k)?;
    res.delta2_hybrid = Some(delta2(&images(&finals), front)?);
    if let Some(reason) = &run.aborted {
        log::warn!("{} seed {seed}: Newton loop stopped early: {reason}", cfg.problem);
    }
    res.newton_aborted = run.aborted;
    Ok(res)
}

fn run_seed(cfg: &ExperimentConfig, front: &[Vec<f64>], seed: u64) -> Result<SeedResult> {
    let mop = make_problem(&cfg.problem, &cfg.overrides)?;
    let dir = seed_dir(&cfg.output, seed);
    std::fs::create_dir_all(&dir)?;
    let moea = MoeaConfig {
        seed,
        ..cfg.moea.clone()
    };
    let archive = match &cfg.source {
        Source::Nsga2 => run_nsga2(mop.as_ref(), &moea)?,
        Source::Synthetic => synthetic_zdt1_archive(
            mop.as_ref(),
            moea.mu,
            moea.generations.max(moea.snapshot_gap.max(1)),
            moea.snapshot_gap.max(1),
            seed,
        )?,
        Source::Ingest(paths) => ingest_archive(paths, mop.as_ref())?,
    };
    let mut res = refine_archive(cfg, mop.as_ref(), &archive, front, seed, &dir)?;
    if cfg.baseline && cfg.source == Source::Nsga2 {
        let base_cfg = MoeaConfig {
            generations: cfg.baseline_generations(),
            ..moea
        };
        let base = run_nsga2(mop.as_ref(), &base_cfg)?;
        let last = &base.snapshots[0].points;
        write_population(dir.join("baseline.csv"), last, mop.n(), mop.k())?;
        res.delta2_baseline = Some(delta2(&images(last), front)?);
        if res.skipped {
            // a skipped instance spends the remaining budget on the MOEA
            write_population(dir.join("final.csv"), last, mop.n(), mop.k())?;
            res.delta2_hybrid = res.delta2_baseline;
        }
    }
    write_text(dir.join("result.json"), &serde_json::to_string_pretty(&res)?)?;
    Ok(res)
}

/// Runs every seed in parallel. A failing seed is recorded in the summary and
/// does not stop the others; `summary.json` is written to the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let mop = make_problem(&cfg.problem, &cfg.overrides)?;
    std::fs::create_dir_all(&cfg.output)?;
    let front = match &cfg.front_cache {
        Some(dir) => sample_front_cached(dir, &cfg.problem, &cfg.overrides, cfg.front_size, 0)?,
        None => sample_front(&cfg.problem, &cfg.overrides, cfg.front_size, 0)?,
    };
    let results: Vec<SeedResult> = cfg
        .seeds
        .par_iter()
        .map(|&s| {
            run_seed(cfg, &front, s).unwrap_or_else(|e| {
                log::error!("{} seed {s}: {e}", cfg.problem);
                SeedResult::failed(s, e)
            })
        })
        .collect();
    let summary = Summary {
        problem: cfg.problem.clone(),
        n: mop.n(),
        k: mop.k(),
        config: cfg.clone(),
        results,
    };
    write_text(cfg.output.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Better,
    Tie,
    Worse,
}

impl Verdict {
    pub fn arrow(&self) -> &'static str {
        match self {
            Verdict::Better => "↑",
            Verdict::Tie => "↔",
            Verdict::Worse => "↓",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Spread {
    pub fn of(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(DpnError::Empty("sample".into()));
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Self {
            median: quantile(&s, 0.5),
            q10: quantile(&s, 0.1),
            q90: quantile(&s, 0.9),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub problem: String,
    pub hybrid: Spread,
    pub baseline: Spread,
    /// `(median_baseline − median_hybrid) / median_baseline`.
    pub relative_improvement: f64,
    pub u: f64,
    pub p: f64,
    pub p_adjusted: f64,
    pub verdict: Verdict,
}

pub const MIN_SEEDS: usize = 5;
pub const ALPHA: f64 = 0.05;

fn verdict(p_adjusted: f64, hybrid: f64, baseline: f64) -> Verdict {
    if p_adjusted >= ALPHA || hybrid == baseline {
        Verdict::Tie
    } else if hybrid < baseline {
        Verdict::Better
    } else {
        Verdict::Worse
    }
}

/// One row per problem; p-values are Holm-Šidák adjusted across the rows.
pub fn compare_samples(rows: &[(String, Vec<f64>, Vec<f64>)]) -> Result<Vec<ComparisonRow>> {
    let mut out = Vec::with_capacity(rows.len());
    for (problem, h, b) in rows {
        if h.len() < MIN_SEEDS || b.len() < MIN_SEEDS {
            return Err(DpnError::Config(format!(
                "{problem}: need at least {MIN_SEEDS} runs per side, got {} and {}",
                h.len(),
                b.len()
            )));
        }
        let hs = Spread::of(h)?;
        let bs = Spread::of(b)?;
        let mw = mann_whitney(h, b)?;
        let rel = if bs.median != 0.0 {
            (bs.median - hs.median) / bs.median
        } else {
            0.0
        };
        out.push(ComparisonRow {
            problem: problem.clone(),
            hybrid: hs,
            baseline: bs,
            relative_improvement: rel,
            u: mw.u,
            p: mw.p,
            p_adjusted: mw.p,
            verdict: Verdict::Tie,
        });
    }
    let adj = holm_sidak(&out.iter().map(|r| r.p).collect::<Vec<_>>());
    for (r, pa) in out.iter_mut().zip(adj) {
        r.p_adjusted = pa;
        r.verdict = verdict(pa, r.hybrid.median, r.baseline.median);
    }
    Ok(out)
}

/// Compares the hybrid arm of each summary with either its own baseline arm or,
/// when `baselines` is given, the hybrid arm of the summary at the same position.
pub fn compare_summaries(hybrid: &[Summary], baselines: Option<&[Summary]>) -> Result<Vec<ComparisonRow>> {
    if let Some(b) = baselines {
        if b.len() != hybrid.len() {
            return Err(DpnError::Config(format!(
                "{} hybrid summaries but {} baseline summaries",
                hybrid.len(),
                b.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(hybrid.len());
    for (i, h) in hybrid.iter().enumerate() {
        let base = match baselines {
            Some(b) => {
                let other = &b[i];
                if other.problem != h.problem || other.n != h.n || other.k != h.k {
                    return Err(DpnError::Config(format!(
                        "mismatched problems: {} (n={}, k={}) vs {} (n={}, k={})",
                        h.problem, h.n, h.k, other.problem, other.n, other.k
                    )));
                }
                other.hybrid_samples()
            }
            None => h.baseline_samples(),
        };
        rows.push((h.problem.clone(), h.hybrid_samples(), base));
    }
    compare_samples(&rows)
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("problem | hybrid median [q10, q90] | baseline median [q10, q90] | rel. impr. | p (adj.) | verdict\n");
    s.push_str("--- | --- | --- | --- | --- | ---\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{} | {:.4e} [{:.4e}, {:.4e}] | {:.4e} [{:.4e}, {:.4e}] | {:+.3} | {:.3e} | {}",
            r.problem,
            r.hybrid.median,
            r.hybrid.q10,
            r.hybrid.q90,
            r.baseline.median,
            r.baseline.q10,
            r.baseline.q90,
            r.relative_improvement,
            r.p_adjusted,
            r.verdict.arrow()
        );
    }
    s
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(DpnError::Archive(format!("missing artifact {}", p.display())))
    }
}

fn columns(table: &crate::io::Table, prefix: &str) -> Vec<usize> {
    (0..table.header.len())
        .filter(|&i| table.header[i].starts_with(prefix))
        .collect()
}

fn pick(row: &[f64], cols: &[usize]) -> Vec<f64> {
    cols.iter().map(|&c| row[c]).collect()
}

/// Writes `panel_a.csv` … `panel_e.csv` for one seed directory: snapshot
/// images, filled set with targets and outliers, X₀–Z matching segments, final
/// images, and per-iteration IGD₂ with the KKT residual norm.
pub fn plotdata<P: AsRef<Path>, Q: AsRef<Path>>(seed_dir: P, out: Q) -> Result<Vec<PathBuf>> {
    let dir = seed_dir.as_ref();
    let out = out.as_ref();
    let snapshots = read_table(require(dir, "snapshots.csv")?)?;
    let targets = read_table(require(dir, "refset/targets.csv")?)?;
    let filled = read_table(require(dir, "refset/filled.csv")?)?;
    let outliers = read_table(require(dir, "outliers.csv")?)?;
    let x0 = read_table(require(dir, "x0.csv")?)?;
    let finals = read_table(require(dir, "final.csv")?)?;
    let trace = read_table(require(dir, "trace.csv")?)?;
    std::fs::create_dir_all(out)?;

    let fcols = columns(&snapshots, "f_");
    let k = fcols.len();
    let gen = snapshots
        .column("generation")
        .ok_or_else(|| DpnError::Archive("snapshots.csv has no generation column".into()))?;
    let mut header = vec!["generation".to_string()];
    header.extend(numbered("f", k));
    let rows: Vec<Vec<f64>> = snapshots
        .rows
        .iter()
        .map(|r| std::iter::once(r[gen]).chain(pick(r, &fcols)).collect())
        .collect();
    let a = out.join("panel_a.csv");
    write_table(&a, &header, &rows)?;

    let b = out.join("panel_b.csv");
    let mut w = csv::Writer::from_path(&b)?;
    let mut header = vec!["kind".to_string()];
    header.extend(numbered("f", k));
    w.write_record(&header)?;
    let tcols = columns(&targets, "t_");
    let ffill = columns(&filled, "f_");
    let fout = columns(&outliers, "f_");
    let mut emit = |kind: &str, v: Vec<f64>| -> Result<()> {
        let rec: Vec<String> = std::iter::once(kind.to_string())
            .chain(v.iter().map(|x| crate::io::format_f64(*x)))
            .collect();
        w.write_record(&rec)?;
        Ok(())
    };
    for r in &filled.rows {
        emit("filled", pick(r, &ffill))?;
    }
    for r in &targets.rows {
        emit("target", pick(r, &tcols))?;
    }
    for r in &outliers.rows {
        emit("outlier", pick(r, &fout))?;
    }
    w.flush()?;

    let (_, fx0) = split_population(&x0)?;
    let zcols = columns(&targets, "z_");
    if fx0.len() != targets.rows.len() {
        return Err(DpnError::Archive(format!(
            "x0.csv has {} rows but targets.csv has {}",
            fx0.len(),
            targets.rows.len()
        )));
    }
    let mut header = numbered("x0f", k);
    header.extend(numbered("z", k));
    let rows: Vec<Vec<f64>> = fx0
        .iter()
        .zip(&targets.rows)
        .map(|(f, t)| f.iter().copied().chain(pick(t, &zcols)).collect())
        .collect();
    let c = out.join("panel_c.csv");
    write_table(&c, &header, &rows)?;

    let (_, ff) = split_population(&finals)?;
    let d = out.join("panel_d.csv");
    write_table(&d, &numbered("f", k), &ff)?;

    let it = trace.column("iteration");
    let igd = trace.column("igd2sq");
    let res = trace.column("residual_norm");
    let (Some(it), Some(igd), Some(res)) = (it, igd, res) else {
        return Err(DpnError::Archive("trace.csv lacks iteration, igd2sq or residual_norm".into()));
    };
    let rows: Vec<Vec<f64>> = trace
        .rows
        .iter()
        .map(|r| vec![r[it], r[igd].sqrt(), r[res]])
        .collect();
    let e = out.join("panel_e.csv");
    write_table(&e, &["iteration".into(), "igd2".into(), "residual_norm".into()], &rows)?;
    Ok(vec![a, b, c, d, e])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config_and_errors() {
        let cfg = ExperimentConfig::parse(
            "problem = ZDT2\n# comment\nmu = 20\ngenerations = 30\nseeds = 0..3\nshift = 0.1 # inline\nn = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, "zdt2");
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.overrides.n, Some(5));
        assert_eq!(cfg.newton.shift, 0.1);
        let e = ExperimentConfig::parse("mu = 20\nbogus = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("bogus"), "{e}");
        assert!(ExperimentConfig::parse("seeds = 1,1\n").is_err());
        assert!(ExperimentConfig::parse("seeds = \n").is_err());
        assert!(ExperimentConfig::parse("problem = nope\n").is_err());
    }

    #[test]
    fn quantiles() {
        let s = Spread::of(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.median, 3.0);
        assert!((s.q10 - 1.4).abs() < 1e-12);
        assert!((s.q90 - 4.6).abs() < 1e-12);
    }

    #[test]
    fn verdicts() {
        let base: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
        let same = compare_samples(&[("a".into(), base.clone(), base.clone())]).unwrap();
        assert_eq!(same[0].verdict, Verdict::Tie);
        assert_eq!(same[0].relative_improvement, 0.0);
        let small: Vec<f64> = base.iter().map(|v| v / 10.0).collect();
        let better = compare_samples(&[("a".into(), small.clone(), base.clone())]).unwrap();
        assert_eq!(better[0].verdict, Verdict::Better);
        assert!(better[0].p < 0.01);
        let worse = compare_samples(&[("a".into(), base.clone(), small)]).unwrap();
        assert_eq!(worse[0].verdict, Verdict::Worse);
        assert!(compare_samples(&[("a".into(), base[..4].to_vec(), base.clone())]).is_err());
    }

    #[test]
    fn synthetic_archive_shape() {
        let mop = make_problem("zdt1", &ProblemOverrides::with_n(3)).unwrap();
        let a = synthetic_zdt1_archive(mop.as_ref(), 30, 300, 5, 1).unwrap();
        assert_eq!(a.generations(), vec![300, 295]);
        assert!(a.snapshots.iter().all(|s| s.points.len() == 30));
        let front = sample_front("zdt1", &ProblemOverrides::with_n(3), 1000, 0).unwrap();
        let d = delta2(&images(&a.snapshots[0].points), &front).unwrap();
        assert!(d > 0.6 && d < 1.6, "{d}");
    }
}
