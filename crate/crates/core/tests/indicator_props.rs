use dpn_core::indicators::{delta_p, gd2sq_gradient};
use dpn_core::mop::{evaluate_set, second_order_check, SetIterate};
use dpn_core::problems::front::sample_front;
use dpn_core::problems::{catalog, make_problem, ProblemOverrides};
use dpn_core::numerics::dominates;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(k: usize, min: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, k), min..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn delta_is_symmetric_and_zero_on_itself(a in points(3, 1, 12), b in points(3, 1, 12)) {
        prop_assert_eq!(delta_p(&a, &a, 2).unwrap().delta_p, 0.0);
        let ab = delta_p(&a, &b, 2).unwrap();
        let ba = delta_p(&b, &a, 2).unwrap();
        prop_assert_eq!(ab.delta_p, ba.delta_p);
        prop_assert_eq!(ab.gd2sq, ba.igd2sq);
        prop_assert!(ab.gd2sq >= 0.0 && ab.igd2sq >= 0.0);
    }

    // a small jitter keeps every point nearest to its own partner
    #[test]
    fn matched_sets_share_the_residual_sum(a in points(2, 1, 10), jitter in prop::collection::vec(-1e-3..1e-3f64, 20)) {
        let mut a = a;
        a.iter_mut().enumerate().for_each(|(i, p)| p[0] += 10.0 * i as f64);
        let b: Vec<Vec<f64>> = a.iter().enumerate().map(|(i, p)| vec![p[0] + jitter[2 * i], p[1] + jitter[2 * i + 1]]).collect();
        let r = delta_p(&a, &b, 2).unwrap();
        let mu = a.len() as f64;
        prop_assert!((r.gd2sq * mu - r.igd2sq * mu).abs() <= 1e-15 * (1.0 + r.gd2sq * mu));
    }

    #[test]
    fn gradient_blocks_are_local(seed in any::<u64>(), who in 0usize..4) {
        let mop = make_problem("zdt1", &ProblemOverrides { n: Some(5), k: None }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.gen_range(0.05..0.95)).collect()).collect();
        let z: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let (g0, a0) = gd2sq_gradient(mop.as_ref(), &SetIterate::new(xs.clone(), 0), &z).unwrap();
        let mut moved = xs.clone();
        let other = (who + 1) % 4;
        moved[other][2] = (moved[other][2] + 0.3).min(0.99);
        let (g1, a1) = gd2sq_gradient(mop.as_ref(), &SetIterate::new(moved, 0), &z).unwrap();
        prop_assert_eq!(a0.j[who], a1.j[who]);
        prop_assert_eq!(&g0[who * 5..who * 5 + 5], &g1[who * 5..who * 5 + 5]);
    }
}

#[test]
fn problem_derivatives_match_differences() {
    for info in catalog() {
        let mop = make_problem(info.id, &ProblemOverrides::default()).unwrap();
        let b = mop.bounds().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // interior points, and on CONV4-2F away from its branch switch
            let x: Vec<f64> = (0..mop.n())
                .map(|j| {
                    let u = if info.id == "conv4_2f" { rng.gen_range(0.55..0.95) } else { rng.gen_range(0.05..0.95) };
                    b.lower[j] + (b.upper[j] - b.lower[j]) * u
                })
                .collect();
            let r = second_order_check(mop.as_ref(), &x).unwrap();
            assert!(r.passes(1e-5), "{}: {r:?} at {x:?}", info.id);
        }
    }
}

#[test]
fn evaluation_is_pure() {
    let mop = make_problem("cf3", &ProblemOverrides::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..mop.n()).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let it = SetIterate::new(pts, 0);
    assert_eq!(evaluate_set(mop.as_ref(), &it).unwrap(), evaluate_set(mop.as_ref(), &it).unwrap());
}

#[test]
fn fronts_are_mutually_nondominated() {
    for info in catalog() {
        let front = sample_front(info.id, &ProblemOverrides::default(), 300, 0).unwrap();
        for (i, a) in front.iter().enumerate() {
            for (j, b) in front.iter().enumerate() {
                assert!(i == j || !dominates(a, b), "{}: {a:?} dominates {b:?}", info.id);
            }
        }
    }
}

#[test]
fn zdt_optima_land_on_the_front() {
    let mop = make_problem("zdt1", &ProblemOverrides::default()).unwrap();
    for t in [0.0, 0.1, 0.37, 0.8, 1.0] {
        let mut x = vec![0.0; mop.n()];
        x[0] = t;
        let f = mop.eval_f(&x);
        assert!((f[1] - (1.0 - f[0].sqrt())).abs() < 1e-9);
    }
}
