//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::Instant;

use mmwave_assoc::association::{
    exhaustive_solve, is_feasible, wcs_solve, ActivationVector, Problem, WcsOptions, DEFAULT_BUDGET,
};
use mmwave_assoc::channel::{generate_channel_set, los_probability, reference_loss_db};
use mmwave_assoc::harness::{
    compare, run_experiment, scaling_study, ExperimentResult, ExperimentSpec, ScaleAxis, ScalingSpec, Scheme,
    SlotModels,
};
use mmwave_assoc::mimo::{check_capacity, svd_beamformers, SlotModel, UtilityKind};
use mmwave_assoc::rng::{self, tag};
use mmwave_assoc::topology::{initial_positions, CsiMode, InterferenceMode, Panel, Scenario};
use mmwave_assoc::{CMatrix, C64};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Capacity audit over every activation produced during the suite.
#[derive(Default)]
struct Audit {
    checked: usize,
    violations: Vec<String>,
}

impl Audit {
    fn optimizer(&mut self, beta: &ActivationVector, s: &Scenario) {
        self.checked += 1;
        let f = is_feasible(beta, s);
        if !f.is_ok() {
            self.violations.push(format!("{beta}: {}", f.diagnostics.join("; ")));
        }
    }

    fn result(&mut self, r: &ExperimentResult, s: &Scenario) {
        for slot in &r.slots {
            match r.spec.scheme {
                Scheme::Wcs | Scheme::Exhaustive => self.optimizer(&slot.activation, s),
                _ => {
                    self.checked += 1;
                    if let Err(e) = check_capacity(&slot.activation, &slot.streams, s) {
                        self.violations.push(e.to_string());
                    }
                }
            }
        }
    }
}

fn instance_model(s: &Scenario, seed: u64) -> SlotModel {
    let instance = rng::derive(seed, &[tag::INSTANCE]);
    let positions = initial_positions(instance, s);
    SlotModels::build(s, &positions, 0, rng::derive(instance, &[tag::SLOT, 0]), false)
        .expect("instance")
        .truth
}

fn problem<'a>(s: &'a Scenario, m: &'a SlotModel, utility: UtilityKind) -> Problem<'a> {
    Problem {
        scenario: s,
        model: m,
        utility,
        interference: InterferenceMode::AssociationDependent,
    }
}

fn small_optimality(audit: &mut Audit) -> Verdict {
    let mut s = Scenario::homogeneous(3, 6);
    for bs in &mut s.bs {
        bs.max_streams = 4;
        bs.max_users = 2;
    }
    let (mut exact, mut worst_ratio) = (0, f64::INFINITY);
    for seed in 0..100 {
        let m = instance_model(&s, 1000 + seed);
        let p = problem(&s, &m, UtilityKind::SumRate);
        let opt = exhaustive_solve(&p, DEFAULT_BUDGET).unwrap();
        let wcs = wcs_solve(&p, seed, WcsOptions::default()).unwrap();
        audit.optimizer(&opt.best, &s);
        audit.optimizer(&wcs.best, &s);
        if (opt.best_utility - wcs.best_utility).abs() <= 1e-9 * opt.best_utility {
            exact += 1;
        }
        worst_ratio = worst_ratio.min(wcs.best_utility / opt.best_utility);
    }
    verdict(
        exact >= 80 && worst_ratio >= 0.95,
        format!("{exact}/100 instances optimal, worst ratio {worst_ratio:.4}"),
    )
}

fn monotonicity(audit: &mut Audit) -> Verdict {
    let mut solves = 0;
    let mut broken = 0;
    for (i, k) in [6usize, 12, 18, 24].into_iter().enumerate() {
        let s = Scenario::homogeneous(3, k);
        for rep in 0..250u64 {
            let utility = if rep % 2 == 0 { UtilityKind::SumRate } else { UtilityKind::MinRate };
            let m = instance_model(&s, 50_000 * (i as u64 + 1) + rep);
            let out = wcs_solve(&problem(&s, &m, utility), rep, WcsOptions::default()).unwrap();
            audit.optimizer(&out.best, &s);
            solves += 1;
            if out.utility_trace.windows(2).any(|w| w[1] < w[0]) {
                broken += 1;
            }
        }
    }
    verdict(broken == 0, format!("{solves} solves, {broken} non-monotone traces"))
}

fn scaling(audit: &mut Audit) -> (Verdict, Verdict) {
    let base = Scenario::homogeneous(3, 12);
    let study = scaling_study(&base, &ScalingSpec::new(ScaleAxis::UeCount(vec![6, 12, 18, 24]), 60, 77)).unwrap();
    audit.checked += study.points.len();
    let in_range = study.points.iter().all(|p| p.iterations >= p.size && p.iterations <= 50 * p.size);
    let it_fit = study.iteration_fit.as_ref().unwrap();
    let means: Vec<String> = study.rows.iter().map(|r| format!("{:.1}", r.mean_iterations)).collect();
    let iter = verdict(
        in_range && it_fit.r_squared >= 0.9,
        format!(
            "mean iterations [{}], linear R^2 {:.4}, all counts in [K, 50K]: {in_range}",
            means.join(", "),
            it_fit.r_squared
        ),
    );
    let rt = study.runtime_fit.as_ref().unwrap();
    let raw = study.runtime_fit_raw.as_ref().unwrap();
    let times: Vec<String> = study.rows.iter().map(|r| format!("{:.2e}", r.mean_wall_time)).collect();
    let runtime = verdict(
        rt.r_squared >= 0.9,
        format!(
            "mean wall times [{}] s, R^2 on means {:.4}, on raw points {:.4}",
            times.join(", "),
            rt.r_squared,
            raw.r_squared
        ),
    );
    (iter, runtime)
}

/// Mean spectral efficiency per spec over `seeds` independent drops, with
/// every spec sharing the channels of each drop.
fn shared_runs(s: &Scenario, specs: &[ExperimentSpec], seeds: u64, audit: &mut Audit) -> Vec<f64> {
    let mut totals = vec![0.0; specs.len()];
    for seed in 0..seeds {
        let specs: Vec<ExperimentSpec> = specs
            .iter()
            .map(|x| ExperimentSpec { seed: 9000 + seed, ..x.clone() })
            .collect();
        for (t, r) in totals.iter_mut().zip(compare(s, &specs).unwrap()) {
            audit.result(&r, s);
            *t += r.mean_spectral_efficiency / seeds as f64;
        }
    }
    totals
}

fn scheme_and_csi_ordering(audit: &mut Audit) -> (Verdict, Verdict) {
    let s = Scenario::homogeneous(3, 12);
    let mut specs = Vec::new();
    for csi in [CsiMode::Instantaneous, CsiMode::LargeScaleOnly] {
        specs.push(
            ExperimentSpec::new(&s, Scheme::Wcs, 0)
                .with_csi(csi)
                .with_interference(InterferenceMode::AssociationDependent)
                .with_slots(10),
        );
        for scheme in [Scheme::MaxSinrShareDrop, Scheme::MaxSinrDrop] {
            specs.push(
                ExperimentSpec::new(&s, scheme, 0)
                    .with_csi(csi)
                    .with_interference(InterferenceMode::Full)
                    .with_slots(10),
            );
        }
    }
    let se = shared_runs(&s, &specs, 20, audit);
    let order_ok = se[0] > se[1] && se[0] > se[2] && se[3] > se[4] && se[3] > se[5];
    let schemes = verdict(
        order_ok,
        format!(
            "200 slots; instantaneous WCS {:.2} / share-drop {:.2} / drop {:.2}; large-scale WCS {:.2} / share-drop {:.2} / drop {:.2}",
            se[0], se[1], se[2], se[3], se[4], se[5]
        ),
    );
    let csi = verdict(
        se[0] > se[3],
        format!("WCS instantaneous {:.3} vs large-scale {:.3} bits/s/Hz", se[0], se[3]),
    );
    (schemes, csi)
}

fn antenna_scaling(audit: &mut Audit) -> Verdict {
    let base = Scenario::homogeneous(3, 12);
    let mut spec = ScalingSpec::new(
        ScaleAxis::BsPanel(vec![Panel::new(3, 3), Panel::new(5, 5), Panel::new(8, 8)]),
        100,
        31,
    );
    spec.interference_mode = Some(InterferenceMode::AssociationDependent);
    let bs = scaling_study(&base, &spec).unwrap();
    spec.axis = ScaleAxis::UePanel(vec![Panel::new(1, 2), Panel::new(2, 2), Panel::new(4, 4)]);
    let ue = scaling_study(&base, &spec).unwrap();
    audit.checked += bs.points.len() + ue.points.len();
    let inc = |rows: &[mmwave_assoc::harness::ScalingRow]| rows.windows(2).all(|w| w[1].mean_spectral_efficiency > w[0].mean_spectral_efficiency);
    let fmt = |rows: &[mmwave_assoc::harness::ScalingRow]| {
        rows.iter()
            .map(|r| format!("{} {:.2}", r.label, r.mean_spectral_efficiency))
            .collect::<Vec<_>>()
            .join(", ")
    };
    verdict(inc(&bs.rows) && inc(&ue.rows), format!("{}; {}", fmt(&bs.rows), fmt(&ue.rows)))
}

fn fairness(audit: &mut Audit) -> Verdict {
    let s = Scenario::homogeneous(3, 15);
    let base = ExperimentSpec::new(&s, Scheme::Wcs, 0).with_slots(10);
    let specs = [base.clone().with_utility(UtilityKind::SumRate), base.with_utility(UtilityKind::MinRate)];
    let (mut below, mut total) = ([0usize; 2], 0usize);
    for seed in 0..20 {
        let specs: Vec<ExperimentSpec> = specs.iter().map(|x| ExperimentSpec { seed: 4000 + seed, ..x.clone() }).collect();
        let results = compare(&s, &specs).unwrap();
        for (b, r) in below.iter_mut().zip(&results) {
            audit.result(r, &s);
            *b += r.rate_samples().iter().filter(|&&x| x < 1.0).count();
        }
        total += results[0].rate_samples().len();
    }
    let (sum, min) = (below[0] as f64 / total as f64, below[1] as f64 / total as f64);
    verdict(
        min < sum,
        format!("rates below 1 bit/s/Hz: sum-rate {:.2}%, min-rate {:.2}%", 100.0 * sum, 100.0 * min),
    )
}

fn mobility(audit: &mut Audit) -> Verdict {
    let mut s = Scenario::homogeneous(3, 12);
    s.slots = 1000;
    let bs0 = s.bs[0].position;
    s.ue[0].position = Some([bs0[0], bs0[1] - 5.0, 1.5]);
    s.ue[0].pinned = true;
    let r = run_experiment(&s, &ExperimentSpec::new(&s, Scheme::Wcs, 5)).unwrap();
    audit.result(&r, &s);
    let worst_row = r
        .association
        .row_sums()
        .iter()
        .map(|x| (x - 1.0).abs())
        .fold(0.0, f64::max);
    let pinned = r.association.rows[0][0];
    verdict(
        worst_row <= 1e-9 && pinned >= 0.8,
        format!("T=1000, max |row sum - 1| {worst_row:.1e}, pinned UE on its BS {:.1}% of slots", 100.0 * pinned),
    )
}

fn formulas() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    let at_10 = los_probability(10.0).unwrap();
    ok &= at_10 == 1.0;
    let e = (-1.0f64).exp();
    let independent = ((27.0 / 71.0) * (1.0 - e) + e).powi(2);
    let at_71 = los_probability(71.0).unwrap();
    ok &= (at_71 - 0.3700).abs() <= 5e-4 && (at_71 - independent).abs() <= 1e-12;
    notes.push(format!("p_los(10)={at_10}, p_los(71)={at_71:.4}"));

    let fspl = 20.0 * (4.0 * std::f64::consts::PI * 73e9 / 299_792_458.0).log10();
    let pl = reference_loss_db(73e9);
    ok &= (pl - 69.71).abs() <= 0.05 && (pl - fspl).abs() < 1e-9;
    notes.push(format!("1 m loss {pl:.2} dB"));

    let s = Scenario::homogeneous(3, 12);
    let mut worst = 0.0f64;
    let mut count = 0;
    'outer: for t in 0..3u64 {
        let positions = initial_positions(t, &s);
        let set = generate_channel_set(&s, &positions, t as usize, 500 + t).unwrap();
        for h in &set.channels {
            let bf = svd_beamformers(h, 2).unwrap();
            let d = bf.combiner.adjoint() * h * &bf.precoder;
            let target = CMatrix::from_fn(2, 2, |r, c| {
                C64::new(if r == c { bf.singular_values[r] } else { 0.0 }, 0.0)
            });
            worst = worst.max((d - target).norm() / bf.singular_values[0]);
            count += 1;
            if count == 100 {
                break 'outer;
            }
        }
    }
    ok &= worst <= 1e-9;
    notes.push(format!("SVD residual/sigma1 max {worst:.1e} over {count} channels"));

    let single = Scenario::homogeneous(1, 1);
    let mut rel = 0.0f64;
    for seed in 0..20 {
        let positions = initial_positions(seed, &single);
        let set = generate_channel_set(&single, &positions, 0, seed).unwrap();
        let m = SlotModel::new(&single, &set.channels).unwrap();
        let rate = m
            .network_rates(0, &ActivationVector::from_bs(&[0]), InterferenceMode::AssociationDependent)
            .unwrap()
            .utility_sum;
        let h = &set.channels[0];
        let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(h * h.adjoint()).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let p = single.bs[0].power_w() / 2.0;
        let closed: f64 = eig[..2].iter().map(|l| (1.0 + p * l / single.noise_power_w()).log2()).sum();
        rel = rel.max((rate - closed).abs() / closed);
    }
    ok &= rel <= 1e-9;
    notes.push(format!("single-link rate rel. error {rel:.1e}"));
    verdict(ok, notes.join(", "))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let mut audit = Audit::default();
    let (c1, s1) = timed(|| small_optimality(&mut audit));
    let (c2, s2) = timed(|| monotonicity(&mut audit));
    let ((c3, c4), s34) = timed(|| scaling(&mut audit));
    let ((c6, c7), s67) = timed(|| scheme_and_csi_ordering(&mut audit));
    let (c8, s8) = timed(|| antenna_scaling(&mut audit));
    let (c9, s9) = timed(|| fairness(&mut audit));
    let (c10, s10) = timed(|| mobility(&mut audit));
    let (c11, s11) = timed(formulas);
    let c5 = verdict(
        audit.violations.is_empty(),
        format!(
            "{} activations audited, {} violations{}",
            audit.checked,
            audit.violations.len(),
            audit.violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    );

    let lines = [
        (1, "small-instance optimality", c1, s1),
        (2, "monotone utility traces", c2, s2),
        (3, "iteration scaling", c3, s34),
        (4, "runtime scaling", c4, s34),
        (5, "capacity constraints", c5, 0.0),
        (6, "scheme ordering", c6, s67),
        (7, "CSI-mode ordering", c7, s67),
        (8, "antenna scaling", c8, s8),
        (9, "fairness direction", c9, s9),
        (10, "mobility and fractional association", c10, s10),
        (11, "formula unit checks", c11, s11),
    ];
    let mut failed = Vec::new();
    for (n, name, v, secs) in &lines {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} [{status}] {name}: {} ({secs:.1} s)", v.detail);
        if !v.pass {
            failed.push(*n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
