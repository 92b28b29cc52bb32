use std::time::Instant;

use super::{fits, is_feasible, random_feasible, worst_of, ActivationVector, Problem, SolveReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WcsOptions {
    /// Hard cap on swapping iterations, as a multiple of K.
    pub max_iterations_per_ue: usize,
}

impl Default for WcsOptions {
    fn default() -> Self {
        WcsOptions { max_iterations_per_ue: 50 }
    }
}

/// 0-based UE index of the `m`-th switch (`m` starts at 1).
pub fn switch_target(m: usize, num_ue: usize) -> usize {
    (m - 1) % num_ue
}

/// Worst-connection swapping from a random feasible start.
pub fn wcs_solve(problem: &Problem<'_>, seed: u64, options: WcsOptions) -> Result<SolveReport> {
    let init = random_feasible(problem.scenario, seed)?;
    wcs_solve_from(problem, init, options)
}

/// Worst-connection swapping from a given feasible start.
pub fn wcs_solve_from(problem: &Problem<'_>, init: ActivationVector, options: WcsOptions) -> Result<SolveReport> {
    let started = Instant::now();
    let feasibility = is_feasible(&init, problem.scenario);
    if !feasibility.is_ok() {
        return Err(Error::Infeasible(feasibility.diagnostics.join("; ")));
    }
    if problem.model.num_ue() != init.len() {
        return Err(Error::Domain("slot model and scenario disagree on K".into()));
    }
    let k_count = init.len();
    let streams = problem.model.streams().to_vec();
    let uniform = streams.windows(2).all(|w| w[0] == w[1]);
    let cap = options.max_iterations_per_ue.max(1) * k_count.max(1);

    let (u0, rates0) = problem.evaluate(&init);
    let mut evaluations = 1;
    let mut trace = vec![u0];
    let mut best = (init.clone(), u0, rates0.clone());
    let mut incumbent = (init, u0, rates0);
    let Some((mut worst, _)) = worst_of(&best.0, &best.2) else {
        return Ok(report(best, trace, 0, 0, evaluations, started));
    };

    let mut m = 1;
    let mut stall = 0;
    let mut iterations = 0;
    let mut switches = 0;
    while stall < k_count && iterations < cap {
        iterations += 1;
        let mut selected: Option<(ActivationVector, f64, Vec<f64>)> = None;
        for n in 0..k_count {
            if n == worst || incumbent.0.serving(n) == incumbent.0.serving(worst) {
                continue;
            }
            let candidate = incumbent.0.exchange(worst, n);
            if !uniform && !fits(&candidate, problem.scenario, &streams) {
                continue;
            }
            let (u, rates) = problem.evaluate(&candidate);
            evaluations += 1;
            let current = selected.as_ref().map_or(incumbent.1, |s| s.1);
            if u > current {
                selected = Some((candidate, u, rates));
            }
        }
        let selected = selected.unwrap_or_else(|| incumbent.clone());
        trace.push(selected.1);

        if selected.1 > best.1 {
            worst = worst_of(&selected.0, &selected.2).map_or(worst, |w| w.0);
            best = selected.clone();
            incumbent = selected;
            stall = 0;
        } else {
            stall += 1;
            worst = worst_of(&best.0, &best.2).map_or(worst, |w| w.0);
            let l = switch_target(m, k_count);
            m += 1;
            switches += 1;
            let switched = best.0.exchange(worst, l);
            incumbent = if switched == best.0 || (!uniform && !fits(&switched, problem.scenario, &streams)) {
                best.clone()
            } else {
                let (u, rates) = problem.evaluate(&switched);
                evaluations += 1;
                (switched, u, rates)
            };
        }
    }
    Ok(report(best, trace, iterations, switches, evaluations, started))
}

fn report(
    best: (ActivationVector, f64, Vec<f64>),
    utility_trace: Vec<f64>,
    iterations: usize,
    switches: usize,
    evaluations: usize,
    started: Instant,
) -> SolveReport {
    SolveReport {
        best: best.0,
        best_utility: best.1,
        utility_trace,
        iterations,
        switches,
        wall_time: started.elapsed().as_secs_f64(),
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::exhaustive_solve;
    use crate::channel::generate_channel_set;
    use crate::mimo::{SlotModel, UtilityKind};
    use crate::rng;
    use crate::topology::{initial_positions, InterferenceMode, Scenario};
    use crate::{CMatrix, C64};

    fn diag(a: f64, b: f64) -> CMatrix {
        CMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => C64::new(a, 0.0),
            (1, 1) => C64::new(b, 0.0),
            _ => C64::new(0.0, 0.0),
        })
    }

    fn crossed() -> (Scenario, SlotModel) {
        let mut s = Scenario::homogeneous(2, 2);
        for ue in &mut s.ue {
            ue.panel = crate::topology::Panel::new(1, 2);
            ue.n_streams = 1;
        }
        for bs in &mut s.bs {
            bs.panel = crate::topology::Panel::new(1, 2);
            bs.max_users = 1;
            bs.max_streams = 1;
        }
        let strong = 1e-5;
        let weak = 1e-8;
        // UE1 strong to BS2, UE2 strong to BS1.
        let channels = vec![diag(weak, weak), diag(strong, strong), diag(strong, strong), diag(weak, weak)];
        let model = SlotModel::new(&s, &channels).unwrap();
        (s, model)
    }

    #[test]
    fn crossed_links_are_uncrossed() {
        let (s, model) = crossed();
        let problem = Problem {
            scenario: &s,
            model: &model,
            utility: UtilityKind::SumRate,
            interference: InterferenceMode::AssociationDependent,
        };
        let out = wcs_solve_from(&problem, ActivationVector::from_one_based(&[1, 2]), WcsOptions::default()).unwrap();
        assert_eq!(out.best, ActivationVector::from_one_based(&[2, 1]));
        let oracle = exhaustive_solve(&problem, 100).unwrap();
        assert_eq!(oracle.best, out.best);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let (s, model) = crossed();
        let problem = Problem {
            scenario: &s,
            model: &model,
            utility: UtilityKind::SumRate,
            interference: InterferenceMode::AssociationDependent,
        };
        let err = wcs_solve_from(&problem, ActivationVector::from_one_based(&[1, 1]), WcsOptions::default());
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn switch_targets_cycle_through_every_ue() {
        for k in 1..20 {
            let seen: std::collections::BTreeSet<usize> = (1..=k).map(|m| switch_target(m, k)).collect();
            assert_eq!(seen.len(), k);
            assert_eq!(switch_target(k + 1, k), switch_target(1, k));
        }
    }

    #[test]
    fn paper_sized_instance_is_monotone_and_converges() {
        let s = Scenario::homogeneous(4, 12);
        let positions = initial_positions(7, &s);
        let set = generate_channel_set(&s, &positions, 0, rng::derive(7, &[rng::tag::SLOT, 0])).unwrap();
        let model = SlotModel::new(&s, &set.channels).unwrap();
        let problem = Problem {
            scenario: &s,
            model: &model,
            utility: UtilityKind::SumRate,
            interference: InterferenceMode::AssociationDependent,
        };
        let out = wcs_solve(&problem, 11, WcsOptions::default()).unwrap();
        assert!(out.utility_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.iterations <= 10 * 12, "{} iterations", out.iterations);
        assert!(out.iterations >= 12);
        assert_eq!(out.utility_trace.len(), out.iterations + 1);
        assert!(is_feasible(&out.best, &s).is_ok());
        assert_eq!(out.best_utility, *out.utility_trace.last().unwrap());
    }
}
