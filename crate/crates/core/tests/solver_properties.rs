use mmwave_assoc::association::{
    exhaustive_solve, is_feasible, max_sinr_assign, random_feasible, switch_target, wcs_solve, wcs_solve_from,
    ActivationVector, DropPolicy, Problem, WcsOptions, DEFAULT_BUDGET,
};
use mmwave_assoc::channel::generate_channel_set;
use mmwave_assoc::mimo::{check_capacity, SlotModel, UtilityKind};
use mmwave_assoc::topology::{initial_positions, InterferenceMode, Scenario};
use proptest::prelude::*;

fn model(s: &Scenario, seed: u64) -> SlotModel {
    let positions = initial_positions(seed, s);
    let set = generate_channel_set(s, &positions, 0, seed ^ 0x5eed).unwrap();
    SlotModel::new(s, &set.channels).unwrap()
}

fn utility_kind(min: bool) -> UtilityKind {
    if min {
        UtilityKind::MinRate
    } else {
        UtilityKind::SumRate
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn wcs_is_monotone_feasible_and_dominated(
        j in 2usize..4,
        k in 3usize..7,
        seed in any::<u64>(),
        min in any::<bool>(),
        full in any::<bool>(),
    ) {
        let s = Scenario::homogeneous(j, k);
        let m = model(&s, seed);
        let p = Problem {
            scenario: &s,
            model: &m,
            utility: utility_kind(min),
            interference: if full { InterferenceMode::Full } else { InterferenceMode::AssociationDependent },
        };
        let wcs = wcs_solve(&p, seed, WcsOptions::default()).unwrap();
        prop_assert!(wcs.utility_trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(is_feasible(&wcs.best, &s).is_ok());
        prop_assert!(wcs.iterations >= k && wcs.iterations <= 50 * k);
        prop_assert_eq!(wcs.best_utility, *wcs.utility_trace.last().unwrap());
        let opt = exhaustive_solve(&p, DEFAULT_BUDGET).unwrap();
        prop_assert!(opt.best_utility >= wcs.best_utility);
        prop_assert!(wcs.best_utility >= wcs.utility_trace[0]);
    }

    #[test]
    fn heterogeneous_demands_stay_feasible(seed in any::<u64>()) {
        let mut s = Scenario::homogeneous(3, 6);
        for (k, ue) in s.ue.iter_mut().enumerate() {
            ue.n_streams = 1 + k % 2;
        }
        for bs in &mut s.bs {
            bs.max_streams = 4;
            bs.max_users = 3;
        }
        let m = model(&s, seed);
        let p = Problem {
            scenario: &s,
            model: &m,
            utility: UtilityKind::SumRate,
            interference: InterferenceMode::AssociationDependent,
        };
        let wcs = wcs_solve(&p, seed, WcsOptions::default()).unwrap();
        prop_assert!(is_feasible(&wcs.best, &s).is_ok());
        prop_assert!(wcs.utility_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn baselines_respect_caps(j in 1usize..4, k in 2usize..14, seed in any::<u64>(), q in 1usize..4, share in any::<bool>()) {
        let mut s = Scenario::homogeneous(j, k);
        for bs in &mut s.bs {
            bs.max_users = q;
            bs.max_streams = 2 * q - (seed % 2) as usize;
        }
        let m = model(&s, seed);
        let policy = if share { DropPolicy::ShareDrop } else { DropPolicy::Drop };
        let out = max_sinr_assign(&m, &s, policy);
        prop_assert!(check_capacity(&out.activation, &out.streams, &s).is_ok());
        for (k, j) in out.activation.iter().enumerate() {
            prop_assert_eq!(j.is_some(), out.streams[k] > 0);
        }
    }

    #[test]
    fn activation_json_round_trips(raw in proptest::collection::vec(proptest::option::of(0usize..8), 0..20)) {
        let beta = ActivationVector::new(raw);
        let back: ActivationVector = serde_json::from_str(&serde_json::to_string(&beta).unwrap()).unwrap();
        prop_assert_eq!(back, beta);
    }
}

#[test]
fn random_starts_are_feasible_over_many_seeds() {
    let s = Scenario::homogeneous(3, 12);
    for seed in 0..10_000 {
        assert!(is_feasible(&random_feasible(&s, seed).unwrap(), &s).is_ok());
    }
}

#[test]
fn switch_sequence_is_k_periodic() {
    let k = 7;
    let seq: Vec<usize> = (1..=3 * k).map(|m| switch_target(m, k)).collect();
    assert_eq!(&seq[..k], &[0, 1, 2, 3, 4, 5, 6]);
    assert_eq!(&seq[..k], &seq[k..2 * k]);
}

#[test]
fn optimum_start_is_kept() {
    let s = Scenario::homogeneous(3, 6);
    let m = model(&s, 42);
    let p = Problem {
        scenario: &s,
        model: &m,
        utility: UtilityKind::SumRate,
        interference: InterferenceMode::AssociationDependent,
    };
    let opt = exhaustive_solve(&p, DEFAULT_BUDGET).unwrap();
    let wcs = wcs_solve_from(&p, opt.best.clone(), WcsOptions::default()).unwrap();
    assert_eq!(wcs.best, opt.best);
    assert_eq!(wcs.iterations, 6);
    assert!(wcs.utility_trace.iter().all(|&u| u == opt.best_utility));
}
