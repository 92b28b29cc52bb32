use mmwave_assoc::association::{random_feasible, ActivationVector};
use mmwave_assoc::channel::generate_channel_set;
use mmwave_assoc::mimo::{scale_precoders, svd_beamformers, BeamformerSet, SlotModel};
use mmwave_assoc::topology::{initial_positions, InterferenceMode, Panel, Scenario};
use mmwave_assoc::{CMatrix, C64};

struct Fixture {
    scenario: Scenario,
    channels: Vec<CMatrix>,
    model: SlotModel,
}

fn fixture(j: usize, k: usize, seed: u64) -> Fixture {
    let scenario = Scenario::homogeneous(j, k);
    let positions = initial_positions(seed, &scenario);
    let set = generate_channel_set(&scenario, &positions, 0, seed + 17).unwrap();
    let model = SlotModel::new(&scenario, &set.channels).unwrap();
    Fixture {
        scenario,
        channels: set.channels,
        model,
    }
}

/// Covariance assembled straight from the channel matrices and the power
/// scaled precoders, without the precomputed gain table.
fn brute_force_covariance(f: &Fixture, k: usize, beta: &ActivationVector, mode: InterferenceMode) -> CMatrix {
    let j_count = f.scenario.num_bs();
    let bf = BeamformerSet::build(&f.channels, j_count, &f.scenario.streams()).unwrap();
    let scaled = scale_precoders(beta, &bf, &f.scenario, &f.scenario.streams()).unwrap();
    let j = beta.serving(k).unwrap();
    let w = &bf.get(k, j).combiner;
    let mut v = w.adjoint() * w * C64::new(f.scenario.noise_power_w(), 0.0);
    for (l, entry) in scaled.per_ue.iter().enumerate() {
        if l == k {
            continue;
        }
        if let Some((i, p)) = entry {
            let x = w.adjoint() * &f.channels[k * j_count + i] * p;
            v += &x * x.adjoint();
        }
    }
    if mode == InterferenceMode::Full {
        for i in 0..j_count {
            let bs = &f.scenario.bs[i];
            for l in 0..f.scenario.num_ue() {
                if l == k || beta.serving(l) == Some(i) {
                    continue;
                }
                let n = f.scenario.ue[l].n_streams;
                let power = bs.power_w() / bs.max_users as f64 / n as f64;
                let p = bf.get(l, i).precoder.clone() * C64::new(power.sqrt(), 0.0);
                let x = w.adjoint() * &f.channels[k * j_count + i] * p;
                v += &x * x.adjoint();
            }
        }
    }
    v
}

#[test]
fn covariance_matches_brute_force() {
    for seed in 0..5 {
        let f = fixture(3, 9, seed);
        let beta = random_feasible(&f.scenario, seed).unwrap();
        for mode in [InterferenceMode::AssociationDependent, InterferenceMode::Full] {
            for k in 0..9 {
                let fast = f.model.interference_covariance(k, &beta, mode).unwrap();
                let slow = brute_force_covariance(&f, k, &beta, mode);
                assert!((&fast - &slow).norm() <= 1e-9 * slow.norm(), "seed {seed} k {k} {mode:?}");
            }
        }
    }
}

#[test]
fn served_power_equals_budget() {
    for seed in 0..10 {
        let f = fixture(4, 13, seed);
        let beta = random_feasible(&f.scenario, seed).unwrap();
        let scaled = scale_precoders(&beta, f.model.beamformers(), &f.scenario, &f.scenario.streams()).unwrap();
        let counts = beta.user_counts(4);
        for (j, bs) in f.scenario.bs.iter().enumerate() {
            let p = scaled.bs_power(j);
            if counts[j] == 0 {
                assert_eq!(p, 0.0);
            } else {
                assert!((p - bs.power_w()).abs() <= 1e-9 * bs.power_w());
            }
        }
    }
}

#[test]
fn always_on_interference_never_helps() {
    for seed in 0..10 {
        let f = fixture(3, 12, 100 + seed);
        let beta = random_feasible(&f.scenario, seed).unwrap();
        let ad = f.model.network_rates(0, &beta, InterferenceMode::AssociationDependent).unwrap();
        let full = f.model.network_rates(0, &beta, InterferenceMode::Full).unwrap();
        for (a, b) in ad.per_user_rate.iter().zip(&full.per_user_rate) {
            assert!(a + 1e-12 >= *b);
        }
    }
}

#[test]
fn single_link_rate_is_closed_form() {
    let mut s = Scenario::homogeneous(1, 1).with_ue_panel(Panel::new(2, 2));
    for n in [1usize, 2, 4] {
        s.ue[0].n_streams = n;
        s.bs[0].max_streams = n;
        let positions = initial_positions(3, &s);
        let set = generate_channel_set(&s, &positions, 0, 3).unwrap();
        let model = SlotModel::new(&s, &set.channels).unwrap();
        let rate = model
            .instantaneous_rate(0, &ActivationVector::from_bs(&[0]), InterferenceMode::AssociationDependent)
            .unwrap();
        let sv = svd_beamformers(&set.channels[0], n).unwrap().singular_values;
        let p = s.bs[0].power_w() / n as f64;
        let closed: f64 = sv.iter().map(|x| (1.0 + p * x * x / s.noise_power_w()).log2()).sum();
        assert!((rate - closed).abs() <= 1e-9 * closed, "n={n}: {rate} vs {closed}");
    }
}

#[test]
fn infeasible_vectors_are_refused() {
    let f = fixture(2, 4, 1);
    let mut s = f.scenario.clone();
    s.bs[0].max_users = 1;
    let model = SlotModel::new(&s, &f.channels).unwrap();
    let err = model
        .network_rates(0, &ActivationVector::from_bs(&[0, 0, 1, 1]), InterferenceMode::Full)
        .unwrap_err()
        .to_string();
    assert!(err.contains("BS 1"), "{err}");
}

#[test]
fn dropped_ues_get_zero_rate() {
    let f = fixture(2, 4, 2);
    let beta = ActivationVector::new(vec![Some(0), None, Some(1), None]);
    let r = f.model.network_rates(0, &beta, InterferenceMode::AssociationDependent).unwrap();
    assert_eq!(r.per_user_rate[1], 0.0);
    assert_eq!(r.per_user_rate[3], 0.0);
    assert!(r.per_user_rate[0] > 0.0);
    assert_eq!(r.utility_min, 0.0);
}
