//! Seeded fixtures shared by the benchmarks.

use dpn_core::experiment::synthetic_zdt1_archive;
use dpn_core::newton::ConstraintLayout;
use dpn_core::problems::{make_problem, ProblemOverrides};
use dpn_core::{run_nsga2, MoeaConfig, PopulationArchive, SetIterate, SharedMop};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ZDT1 population near the front with targets shifted below it, one per
/// individual.
pub fn zdt1_matched(mu: usize, n: usize, seed: u64) -> (SharedMop, SetIterate, Vec<Vec<f64>>) {
    let mop = make_problem("zdt1", &ProblemOverrides::with_n(n)).expect("zdt1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..mu)
        .map(|i| {
            let mut x = vec![(i as f64 + 0.5) / mu as f64];
            x.extend((1..n).map(|_| rng.gen_range(0.0..0.05)));
            x
        })
        .collect();
    let z = points
        .iter()
        .map(|x| {
            let f1 = x[0];
            vec![f1 - 0.035, 1.0 - f1.sqrt() - 0.035]
        })
        .collect();
    let iterate = SetIterate::new(points, ConstraintLayout::of(mop.as_ref()).len());
    (mop, iterate, z)
}

/// Snapshots of a short NSGA-II run.
pub fn nsga2_archive(id: &str, mu: usize, generations: usize, seed: u64) -> (SharedMop, PopulationArchive) {
    let mop = make_problem(id, &ProblemOverrides::default()).expect("known id");
    let cfg = MoeaConfig {
        mu,
        generations,
        seed,
        ..Default::default()
    };
    let archive = run_nsga2(mop.as_ref(), &cfg).expect("nsga2");
    (mop, archive)
}

/// The gapped two-population ZDT1 archive with `n = 3`.
pub fn synthetic_archive(seed: u64) -> (SharedMop, PopulationArchive) {
    let mop = make_problem("zdt1", &ProblemOverrides::with_n(3)).expect("zdt1");
    let archive = synthetic_zdt1_archive(mop.as_ref(), 30, 300, 5, seed).expect("synthetic");
    (mop, archive)
}
