use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttcone::oracle::{exact_project_grid, exact_project_multistart};
use ttcone::projection::{approx_project, omega_ratio};
use ttcone::tangent::{project_tangent_space, random_frames, y_parallel};
use ttcone::ttd::{canonicalize, random_tensor, random_tt_with_rng};
use ttcone::{AlternatingOptions, CanonicalTtPair, Tensor3};

type Case = ([usize; 3], (usize, usize), (usize, usize));

const CASES: [Case; 5] = [
    ([5, 5, 5], (2, 2), (3, 3)),
    ([4, 3, 6], (2, 2), (3, 4)),
    ([6, 4, 4], (1, 2), (3, 3)),
    ([3, 3, 3], (1, 1), (2, 2)),
    ([5, 2, 7], (2, 3), (2, 5)),
];

fn draw(case: Case, seed: u64) -> (CanonicalTtPair, Tensor3, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, d) = random_tt_with_rng(case.0, case.1, &mut rng).unwrap();
    let x = canonicalize(&d).unwrap();
    let y = random_tensor(case.0, &mut rng);
    (x, y, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn approximation_is_feasible_monotone_and_bounded(
        which in 0usize..CASES.len(),
        seed in any::<u64>(),
        i_max in 1usize..12,
    ) {
        let case = CASES[which];
        let (x, y, _) = draw(case, seed);
        let res = approx_project(&y, &x, case.2, AlternatingOptions { eps: 1e-16, i_max }).unwrap();
        let t = &res.y_tilde;
        prop_assert!((&y - t).inner(t).unwrap().abs() <= 1e-10 * y.norm() * t.norm());
        for w in res.eta_trace.windows(2) {
            prop_assert!(w[1] - w[0] >= -1e-10);
        }
        prop_assert!(t.norm() >= res.tangent_space_norm - 1e-10);

        let oracle = exact_project_multistart(&y, &x, case.2, 8, seed).unwrap();
        prop_assert!(oracle.value >= t.norm() - 1e-8);
        let ratio = omega_ratio(case.0, case.1, case.2).unwrap();
        prop_assert!(t.norm_squared() >= ratio * oracle.value.powi(2) - 1e-8);
    }

    #[test]
    fn y_parallel_is_feasible_for_any_frames(
        which in 0usize..CASES.len(),
        seed in any::<u64>(),
    ) {
        let case = CASES[which];
        let (x, y, mut rng) = draw(case, seed);
        let gaps = (case.2.0 - case.1.0, case.2.1 - case.1.1);
        let (u1, v3) = random_frames(&x, gaps, &mut rng).unwrap();
        let t = y_parallel(&y, &x, &u1, &v3).unwrap();
        prop_assert!((&y - &t).inner(&t).unwrap().abs() <= 1e-10 * y.norm() * t.norm());
        prop_assert!(t.norm() >= project_tangent_space(&y, &x).unwrap().norm() - 1e-10);
    }

    #[test]
    fn approximation_is_positively_homogeneous(
        seed in any::<u64>(),
        c in 0.01f64..100.0,
        i_max in 1usize..=3,
    ) {
        let case = CASES[0];
        let (x, y, _) = draw(case, seed);
        // the stopping tolerance is absolute; a few iterations never stagnate,
        // so both runs perform the same number of sweeps
        let opts = AlternatingOptions { eps: f64::MIN_POSITIVE, i_max };
        let a = approx_project(&y, &x, case.2, opts).unwrap().y_tilde;
        let b = approx_project(&(c * &y), &x, case.2, opts).unwrap().y_tilde;
        prop_assert!((&b - &(c * &a)).norm() <= 1e-10 * b.norm());
    }
}

#[test]
fn single_start_oracle_contains_the_approximation() {
    for seed in 0..10 {
        let case = CASES[0];
        let (x, y, _) = draw(case, seed);
        let res = approx_project(&y, &x, case.2, AlternatingOptions::default()).unwrap();
        let o = exact_project_multistart(&y, &x, case.2, 1, seed).unwrap();
        assert!(o.value >= res.y_tilde.norm() - 1e-12);
    }
}

#[test]
fn tangent_vectors_are_their_own_projection() {
    for (i, case) in CASES.iter().enumerate() {
        let (x, y, _) = draw(*case, 100 + i as u64);
        let t = project_tangent_space(&y, &x).unwrap();
        let o = exact_project_multistart(&t, &x, case.2, 4, 1).unwrap();
        assert!((o.value - t.norm()).abs() <= 1e-10 * t.norm());
        assert!((&o.y_hat - &t).norm() <= 1e-9 * t.norm());
    }
}

#[test]
fn grid_landscape_is_flat_at_the_base_point() {
    let (x, _, _) = draw(CASES[3], 7);
    let xt = x.tensor();
    let g = exact_project_grid(&xt, &x, (2, 2), 64).unwrap();
    assert!((g.value - xt.norm()).abs() <= 1e-12 * xt.norm());
}

#[test]
fn finer_grid_does_not_lose_value() {
    for seed in 0..5 {
        let (x, y, _) = draw(CASES[3], seed);
        let coarse = exact_project_grid(&y, &x, (2, 2), 90).unwrap();
        let fine = exact_project_grid(&y, &x, (2, 2), 180).unwrap();
        assert!(fine.value >= coarse.value - 1e-12);
    }
}
