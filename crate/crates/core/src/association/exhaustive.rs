use std::time::Instant;

use super::{fits, ActivationVector, Problem, SolveReport};
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Exact argmax over every feasible activation vector, visited in
/// lexicographic order so the first maximizer wins ties.
pub fn exhaustive_solve(problem: &Problem<'_>, budget: u64) -> Result<SolveReport> {
    let started = Instant::now();
    let k_count = problem.scenario.num_ue();
    let j_count = problem.scenario.num_bs();
    let candidates = (j_count as f64).powi(k_count as i32);
    if candidates > budget as f64 {
        return Err(Error::Budget { candidates, budget });
    }
    let streams = problem.model.streams().to_vec();
    let mut digits = vec![0usize; k_count];
    let mut best: Option<(ActivationVector, f64)> = None;
    let mut evaluations = 0;
    let mut visited = 0;
    loop {
        visited += 1;
        let beta = ActivationVector::from_bs(&digits);
        if fits(&beta, problem.scenario, &streams) {
            let (u, _) = problem.evaluate(&beta);
            evaluations += 1;
            if best.as_ref().is_none_or(|b| u > b.1) {
                best = Some((beta, u));
            }
        }
        // Odometer with the last UE as the fastest digit.
        let mut pos = k_count;
        loop {
            if pos == 0 {
                let (best, best_utility) =
                    best.ok_or_else(|| Error::Capacity("no feasible activation vector exists".into()))?;
                return Ok(SolveReport {
                    best,
                    best_utility,
                    utility_trace: vec![best_utility],
                    iterations: visited,
                    switches: 0,
                    wall_time: started.elapsed().as_secs_f64(),
                    evaluations,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < j_count {
                break;
            }
            digits[pos] = 0;
        }
    }
}
