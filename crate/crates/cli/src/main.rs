use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dpn_core::experiment::{compare_summaries, format_comparison, plotdata, run_experiment, ExperimentConfig, Summary};
use dpn_core::mop::second_order_check;
use dpn_core::problems::{catalog, make_problem, ProblemOverrides};
use dpn_core::DpnError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "dpn", version, about = "Set-based Newton refinement of Pareto front approximations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run MOEA, reference-set generation and Newton refinement for every seed.
    Run(RunArgs),
    /// Compare hybrid and baseline Δ₂ across seeds.
    Compare(CompareArgs),
    /// Write the per-panel CSV files for one seed directory.
    Plotdata(PlotArgs),
    /// List the benchmark problems.
    ListProblems,
    /// Compare analytic derivatives with finite differences at random points.
    CheckDerivatives(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// nsga2, synthetic or ingest.
    #[arg(long)]
    source: Option<String>,
    /// Snapshot CSV files for the ingest source (comma separated).
    #[arg(long)]
    ingest: Option<String>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    shift: Option<f64>,
    /// Seeds as `a,b,c` or `a..b`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Any other config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// summary.json files of the hybrid runs.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    /// summary.json files whose hybrid arm serves as the baseline, one per
    /// positional summary; without it each summary's own baseline arm is used.
    #[arg(long, num_args = 1..)]
    against: Vec<PathBuf>,
    /// Also write the rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    seed_dir: PathBuf,
    /// Defaults to `<seed_dir>/plot`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value = "zdt1")]
    problem: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

/// Errors from user input map to exit code 2, everything else to 3.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<DpnError>() {
        Some(DpnError::Config(_) | DpnError::UnknownProblem { .. }) => 2,
        _ => 3,
    }
}

fn build_config(a: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("problem", a.problem.clone());
    push("n", a.n.map(|v| v.to_string()));
    push("k", a.k.map(|v| v.to_string()));
    push("source", a.source.clone());
    push("ingest", a.ingest.clone());
    push("mu", a.mu.map(|v| v.to_string()));
    push("generations", a.generations.map(|v| v.to_string()));
    push("iterations", a.iterations.map(|v| v.to_string()));
    push("shift", a.shift.map(|v| v.to_string()));
    push("seeds", a.seed.clone());
    push("output", a.output.as_ref().map(|p| p.display().to_string()));
    for kv in &a.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(DpnError::Config(format!("--set expects KEY=VALUE, got '{kv}'")).into());
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in pairs {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<()> {
    let cfg = build_config(a)?;
    let summary = run_experiment(&cfg)?;
    println!("problem {} (n={}, k={})", summary.problem, summary.n, summary.k);
    for r in &summary.results {
        match &r.error {
            Some(e) => println!("seed {:>4}  error: {e}", r.seed),
            None => println!(
                "seed {:>4}  tier {:<8} before {:.6}  after {:.6}{}",
                r.seed,
                r.tier.map_or("-", |t| t.as_str()),
                r.delta2_before.unwrap_or(f64::NAN),
                r.delta2_hybrid.unwrap_or(f64::NAN),
                r.delta2_baseline
                    .map_or(String::new(), |b| format!("  baseline {b:.6}"))
            ),
        }
    }
    println!("results in {}", cfg.output.display());
    if summary.failures() == summary.results.len() {
        anyhow::bail!("every seed failed");
    }
    Ok(())
}

fn read_summaries(paths: &[PathBuf]) -> anyhow::Result<Vec<Summary>> {
    paths
        .iter()
        .map(|p| Summary::read(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    let hybrid = read_summaries(&a.summaries)?;
    let against = read_summaries(&a.against)?;
    let base = (!against.is_empty()).then_some(against.as_slice());
    let rows = compare_summaries(&hybrid, base)?;
    print!("{}", format_comparison(&rows));
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&rows)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_plotdata(a: &PlotArgs) -> anyhow::Result<()> {
    let out = a.out.clone().unwrap_or_else(|| a.seed_dir.join("plot"));
    for p in plotdata(&a.seed_dir, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_list() -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<10} {:>4} {:>3}  constrained", "id", "n", "k")?;
    for p in catalog() {
        writeln!(out, "{:<10} {:>4} {:>3}  {}", p.id, p.n, p.k, if p.constrained { "yes" } else { "no" })?;
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> anyhow::Result<()> {
    let mop = make_problem(&a.problem, &ProblemOverrides { n: a.n, k: a.k })?;
    let b = mop.bounds();
    if !b.is_finite() {
        return Err(DpnError::Config(format!("{} has unbounded variables", mop.name())).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst = 0.0_f64;
    for i in 0..a.samples {
        // stay off the bounds where some problems are not differentiable
        let x: Vec<f64> = (0..mop.n())
            .map(|j| {
                let span = b.upper[j] - b.lower[j];
                b.lower[j] + span * rng.gen_range(0.05..0.95)
            })
            .collect();
        let r = second_order_check(mop.as_ref(), &x)?;
        println!(
            "sample {i:>3}  jac_f {:.2e}  hess_f {:.2e}  jac_h {:.2e}  jac_g {:.2e}",
            r.jac_f, r.hess_f, r.jac_h, r.jac_g
        );
        worst = worst.max(r.max_error());
    }
    println!("max relative error {worst:.3e} (tolerance {:.1e})", a.tol);
    if worst > a.tol {
        anyhow::bail!("derivative check failed for {}", mop.name());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Plotdata(a) => cmd_plotdata(a),
        Cmd::ListProblems => match cmd_list() {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(Into::into),
        },
        Cmd::CheckDerivatives(a) => cmd_check(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
