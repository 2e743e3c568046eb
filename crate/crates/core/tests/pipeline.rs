use dpn_core::experiment::{compare_summaries, run_experiment, synthetic_zdt1_archive, ExperimentConfig, Verdict};
use dpn_core::moea::{ingest_archive, run_nsga2, MoeaConfig, Nsga2};
use dpn_core::mop::EvaluatedPoint;
use dpn_core::numerics::{dist, dominates, holm_sidak, mann_whitney, non_dominated};
use dpn_core::problems::{make_problem, ProblemOverrides};
use dpn_core::refset::{build_reference_set, fill_component_2d, merge_and_clean, RefsetConfig};
use dpn_core::{CleanConfig, DpnError, PopulationArchive, Source};
use proptest::prelude::*;

fn zdt1(n: usize) -> dpn_core::SharedMop {
    make_problem("zdt1", &ProblemOverrides { n: Some(n), k: None }).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

// arc-length position of a point lying on the polyline through `sorted`
fn arc_position(sorted: &[Vec<f64>], p: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut cum = 0.0;
    for w in sorted.windows(2) {
        let len = dist(&w[0], &w[1]);
        let t = if len > 0.0 {
            let dot: f64 = (0..p.len()).map(|d| (p[d] - w[0][d]) * (w[1][d] - w[0][d])).sum();
            (dot / (len * len)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let proj: Vec<f64> = (0..p.len()).map(|d| w[0][d] + t * (w[1][d] - w[0][d])).collect();
        let off = dist(&proj, p);
        if off < best.0 {
            best = (off, cum + t * len);
        }
        cum += len;
    }
    best.1
}

fn nd_feasible(points: &[EvaluatedPoint]) -> Vec<Vec<f64>> {
    let feas: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.total_violation() == 0.0)
        .map(|p| p.fx.clone())
        .collect();
    non_dominated(&feas).into_iter().map(|i| feas[i].clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reference_set_matching_is_optimal_and_shifts_exactly(seed in 0u64..1000, mu in 2usize..=7) {
        let mop = zdt1(3);
        let archive = synthetic_zdt1_archive(mop.as_ref(), 30, 20, 5, seed).unwrap();
        let (cleaned, report) = merge_and_clean(&archive, &CleanConfig::default(), mu).unwrap();
        let cfg = RefsetConfig { shift: 0.05, n_fill: Some(200), seed };
        let (rs, x0) = build_reference_set(mop.as_ref(), &cleaned, mu, report.tier, &cfg).unwrap();
        let fx: Vec<Vec<f64>> = x0.points.iter().map(|x| mop.eval_f(x)).collect();
        let cost: f64 = (0..mu).map(|i| dist(&fx[i], &rs.z[i])).sum();
        prop_assert!((cost - rs.matching_cost).abs() <= 1e-12 * (1.0 + cost));
        let best = permutations(mu)
            .iter()
            .map(|p| (0..mu).map(|i| dist(&fx[i], &rs.z[p[i]])).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(rs.matching_cost <= best + 1e-12);

        let eta = rs.target_directions();
        for ((z, t), e) in rs.z.iter().zip(&rs.t).zip(&eta) {
            for d in 0..2 {
                prop_assert!((z[d] - t[d] - 0.05 * e[d]).abs() <= 1e-15);
            }
        }
        let again = build_reference_set(mop.as_ref(), &cleaned, mu, report.tier, &cfg).unwrap();
        prop_assert_eq!(&again.0, &rs);
        prop_assert_eq!(&again.1, &x0);
    }

    #[test]
    fn arc_length_fill_is_uniform(
        xs in prop::collection::vec(0.0..1.0f64, 2..30),
        count in 2usize..200,
    ) {
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, (1.0 - x).powi(2)]).collect();
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let total: f64 = sorted.windows(2).map(|w| dist(&w[0], &w[1])).sum();
        prop_assume!(total > 1e-6);
        let y = fill_component_2d(&pts, count);
        prop_assert_eq!(y.len(), count);
        let pos: Vec<f64> = y.iter().map(|p| arc_position(&sorted, p)).collect();
        let delta = total / (count - 1) as f64;
        for w in pos.windows(2) {
            prop_assert!((w[1] - w[0] - delta).abs() <= 1e-9 * total, "gap {} vs {}", w[1] - w[0], delta);
        }
    }
}

#[test]
fn snapshots_are_taken_at_the_requested_generations() {
    let mop = zdt1(5);
    let cfg = MoeaConfig {
        mu: 12,
        generations: 30,
        ..Default::default()
    };
    let a = run_nsga2(mop.as_ref(), &cfg).unwrap();
    assert_eq!(a.generations(), vec![30, 25]);
    let d = make_problem("dtlz2", &ProblemOverrides::default()).unwrap();
    let a = run_nsga2(d.as_ref(), &cfg).unwrap();
    assert_eq!(a.generations(), vec![30, 25, 20, 15]);
    assert!(a.snapshots.iter().all(|s| s.points.len() == 12));
}

#[test]
fn survival_is_elitist_once_epsilon_vanishes() {
    for id in ["zdt1", "cf1"] {
        let mop = make_problem(id, &ProblemOverrides::default()).unwrap();
        let cfg = MoeaConfig {
            mu: 20,
            generations: 30,
            seed: 4,
            ..Default::default()
        };
        let mut alg = Nsga2::new(mop.as_ref(), &cfg).unwrap();
        let mut prev: Option<Vec<Vec<f64>>> = None;
        while alg.generation() < cfg.generations {
            alg.step();
            if alg.generation() < cfg.generations - 10 {
                continue;
            }
            assert_eq!(alg.epsilon(), 0.0, "{id}");
            let nd = nd_feasible(&alg.population());
            if let Some(old) = &prev {
                for p in &nd {
                    assert!(!old.iter().any(|q| dominates(q, p)), "{id} gen {}", alg.generation());
                }
            }
            prev = Some(nd);
        }
    }
}

#[test]
fn ingest_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mop = zdt1(4);
    let cfg = MoeaConfig {
        mu: 8,
        generations: 10,
        ..Default::default()
    };
    let a = run_nsga2(mop.as_ref(), &cfg).unwrap();
    let path = dir.path().join("snap.csv");
    a.write_csv(&path).unwrap();
    let b = ingest_archive(&[&path], mop.as_ref()).unwrap();
    assert_eq!(a, b);

    // split across two files, merged back newest first
    let older = PopulationArchive::new(vec![a.snapshots[1].clone()], 0).unwrap();
    let newer = PopulationArchive::new(vec![a.snapshots[0].clone()], 0).unwrap();
    let (p1, p2) = (dir.path().join("old.csv"), dir.path().join("new.csv"));
    older.write_csv(&p1).unwrap();
    newer.write_csv(&p2).unwrap();
    assert_eq!(ingest_archive(&[&p1, &p2], mop.as_ref()).unwrap(), a);

    let err = ingest_archive(&[&path], zdt1(5).as_ref()).unwrap_err();
    assert!(matches!(err, DpnError::Archive(_)) && err.to_string().contains("n = 5"), "{err}");

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(str::to_string).collect();
    let last = cells.len() - 1;
    let v: f64 = cells[last].parse().unwrap();
    cells[last] = format!("{}", v + 1e-3);
    lines[3] = cells.join(",");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let err = ingest_archive(&[&path], mop.as_ref()).unwrap_err().to_string();
    assert!(err.contains("line 4") && err.contains("deviate"), "{err}");
}

#[test]
fn experiment_is_reproducible_and_verdicts_match_raw_tests() {
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for (id, out) in [("zdt1", "a"), ("zdt1", "b"), ("zdt2", "c")] {
        let mut cfg = ExperimentConfig {
            problem: id.into(),
            overrides: ProblemOverrides { n: Some(6), k: None },
            source: Source::Nsga2,
            seeds: (0..5).collect(),
            output: dir.path().join(out),
            front_size: 300,
            ..Default::default()
        };
        cfg.moea.mu = 16;
        cfg.moea.generations = 20;
        summaries.push(run_experiment(&cfg).unwrap());
    }
    for s in 0..5 {
        for f in ["snapshots.csv", "final.csv", "baseline.csv", "result.json"] {
            let a = std::fs::read(dir.path().join(format!("a/seed_{s}/{f}"))).unwrap();
            let b = std::fs::read(dir.path().join(format!("b/seed_{s}/{f}"))).unwrap();
            assert_eq!(a, b, "seed {s} {f}");
        }
    }

    let pair = [summaries[0].clone(), summaries[2].clone()];
    let rows = compare_summaries(&pair, None).unwrap();
    let raw: Vec<f64> = pair
        .iter()
        .map(|s| mann_whitney(&s.hybrid_samples(), &s.baseline_samples()).unwrap().p)
        .collect();
    let adjusted = holm_sidak(&raw);
    for (row, (p, adj)) in rows.iter().zip(raw.iter().zip(&adjusted)) {
        assert_eq!(row.p, *p);
        assert_eq!(row.p_adjusted, *adj);
        let expected = if *adj >= 0.05 {
            Verdict::Tie
        } else if row.hybrid.median < row.baseline.median {
            Verdict::Better
        } else {
            Verdict::Worse
        };
        assert_eq!(row.verdict, expected, "{}", row.problem);
    }
}
