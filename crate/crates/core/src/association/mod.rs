//! Decision variables and association solvers.
//!
//! Indices are 0-based in the API. Displayed vectors and diagnostics use
//! 1-based UE/BS numbers, and `-` marks a dropped UE.

mod baseline;
mod exhaustive;
mod wcs;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use baseline::{max_sinr_assign, BaselineAssignment, DropPolicy};
pub use exhaustive::{exhaustive_solve, DEFAULT_BUDGET};
pub use wcs::{switch_target, wcs_solve, wcs_solve_from, WcsOptions};

use crate::error::{Error, Result};
use crate::mimo::{RateReport, SlotModel, UtilityKind};
use crate::rng;
use crate::topology::{InterferenceMode, Scenario};

/// Serving BS per UE for one slot; `None` marks a dropped UE.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ActivationVector(Vec<Option<usize>>);

impl ActivationVector {
    pub fn new(assignments: Vec<Option<usize>>) -> Self {
        ActivationVector(assignments)
    }

    /// Every UE served; `bs[k]` is UE k's BS.
    pub fn from_bs(bs: &[usize]) -> Self {
        ActivationVector(bs.iter().map(|&j| Some(j)).collect())
    }

    /// 1-based BS numbers, 0 for dropped.
    pub fn from_one_based(bs: &[usize]) -> Self {
        ActivationVector(bs.iter().map(|&j| j.checked_sub(1)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn serving(&self, k: usize) -> Option<usize> {
        self.0[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.0
    }

    pub fn has_drops(&self) -> bool {
        self.0.iter().any(Option::is_none)
    }

    /// Number of UEs served by each BS.
    pub fn user_counts(&self, num_bs: usize) -> Vec<usize> {
        let mut counts = vec![0; num_bs];
        for j in self.0.iter().flatten() {
            counts[*j] += 1;
        }
        counts
    }

    pub fn stream_loads(&self, streams: &[usize], num_bs: usize) -> Vec<usize> {
        let mut load = vec![0; num_bs];
        for (k, j) in self.0.iter().enumerate() {
            if let Some(j) = j {
                load[*j] += streams[k];
            }
        }
        load
    }

    /// Copy with the entries of UEs `a` and `b` exchanged.
    pub fn exchange(&self, a: usize, b: usize) -> Self {
        let mut v = self.0.clone();
        v.swap(a, b);
        ActivationVector(v)
    }
}

impl fmt::Display for ActivationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            match j {
                Some(j) => write!(f, "{}", j + 1)?,
                None => f.write_str("-")?,
            }
        }
        f.write_str(")")
    }
}

impl Serialize for ActivationVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let one_based: Vec<Option<usize>> = self.0.iter().map(|j| j.map(|j| j + 1)).collect();
        one_based.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ActivationVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let one_based = Vec::<Option<usize>>::deserialize(d)?;
        one_based
            .into_iter()
            .map(|j| match j {
                Some(0) => Err(serde::de::Error::custom("BS numbers are 1-based")),
                other => Ok(other.map(|j| j - 1)),
            })
            .collect::<std::result::Result<_, _>>()
            .map(ActivationVector)
    }
}

/// Activation vectors of `T` slots (the `K x T` matrix stored by column).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivationMatrix {
    pub columns: Vec<ActivationVector>,
}

impl ActivationMatrix {
    pub fn slots(&self) -> usize {
        self.columns.len()
    }
}

/// Fraction of slots each UE spent on each BS (`K x J`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl AssociationMatrix {
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }
}

pub fn fractional_from_activation(b: &ActivationMatrix, num_bs: usize) -> Result<AssociationMatrix> {
    let t = b.slots();
    if t == 0 {
        return Err(Error::Domain("association needs at least one slot".into()));
    }
    let k = b.columns[0].len();
    let mut rows = vec![vec![0.0; num_bs]; k];
    for col in &b.columns {
        if col.len() != k {
            return Err(Error::Domain("activation columns differ in length".into()));
        }
        for (row, j) in rows.iter_mut().zip(col.iter()) {
            if let Some(j) = j {
                row[j] += 1.0;
            }
        }
    }
    for row in &mut rows {
        for a in row.iter_mut() {
            *a /= t as f64;
        }
    }
    Ok(AssociationMatrix { rows })
}

/// Outcome of a feasibility check; empty diagnostics means feasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub diagnostics: Vec<String>,
}

impl Feasibility {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Unique association of every UE within each BS's stream budget and user cap.
pub fn is_feasible(beta: &ActivationVector, scenario: &Scenario) -> Feasibility {
    let mut diagnostics = Vec::new();
    if beta.len() != scenario.num_ue() {
        diagnostics.push(format!("vector covers {} UEs, scenario has {}", beta.len(), scenario.num_ue()));
        return Feasibility { diagnostics };
    }
    let j_count = scenario.num_bs();
    for (k, j) in beta.iter().enumerate() {
        match j {
            None => diagnostics.push(format!("UE {} is dropped", k + 1)),
            Some(j) if j >= j_count => diagnostics.push(format!("UE {} assigned to unknown BS {}", k + 1, j + 1)),
            _ => {}
        }
    }
    if !diagnostics.is_empty() {
        return Feasibility { diagnostics };
    }
    let load = beta.stream_loads(&scenario.streams(), j_count);
    let users = beta.user_counts(j_count);
    for (j, bs) in scenario.bs.iter().enumerate() {
        if load[j] > bs.max_streams {
            diagnostics.push(format!("BS {} stream load {} > {}", j + 1, load[j], bs.max_streams));
        }
        if users[j] > bs.max_users {
            diagnostics.push(format!("BS {} serves {} UEs > cap {}", j + 1, users[j], bs.max_users));
        }
    }
    Feasibility { diagnostics }
}

/// Cheap feasibility test used inside the solvers.
pub(crate) fn fits(beta: &ActivationVector, scenario: &Scenario, streams: &[usize]) -> bool {
    let j_count = scenario.num_bs();
    let mut load = vec![0usize; j_count];
    let mut users = vec![0usize; j_count];
    for (k, j) in beta.iter().enumerate() {
        let Some(j) = j else { return false };
        load[j] += streams[k];
        users[j] += 1;
    }
    scenario
        .bs
        .iter()
        .enumerate()
        .all(|(j, b)| load[j] <= b.max_streams && users[j] <= b.max_users)
}

/// Random greedy feasible vector: UEs in shuffled order each pick a uniform
/// BS among those with room left.
pub fn random_feasible(scenario: &Scenario, seed: u64) -> Result<ActivationVector> {
    let k_count = scenario.num_ue();
    let streams = scenario.streams();
    let mean_streams = if k_count == 0 {
        1
    } else {
        streams.iter().sum::<usize>().div_ceil(k_count)
    };
    let room: usize = scenario
        .bs
        .iter()
        .map(|b| b.max_users.min(b.max_streams / mean_streams.max(1)))
        .sum();
    if room < k_count {
        return Err(Error::Capacity(format!(
            "BSs can host {room} UEs but {k_count} need service (deficit {})",
            k_count - room
        )));
    }

    let mut rng = rng::stream(seed);
    let mut order: Vec<usize> = (0..k_count).collect();
    // Unequal stream demands can trap the greedy pass; retry a few shuffles.
    'attempt: for _ in 0..64 {
        order.shuffle(&mut rng);
        let mut users = vec![0usize; scenario.num_bs()];
        let mut load = vec![0usize; scenario.num_bs()];
        let mut beta = vec![None; k_count];
        for &k in &order {
            let open: Vec<usize> = scenario
                .bs
                .iter()
                .enumerate()
                .filter(|(j, b)| users[*j] < b.max_users && load[*j] + streams[k] <= b.max_streams)
                .map(|(j, _)| j)
                .collect();
            if open.is_empty() {
                continue 'attempt;
            }
            let j = open[rng.random_range(0..open.len())];
            users[j] += 1;
            load[j] += streams[k];
            beta[k] = Some(j);
        }
        return Ok(ActivationVector(beta));
    }
    Err(Error::Capacity("no feasible assignment found for the stream demands".into()))
}

/// Served UE with the lowest rate and its BS; ties go to the smaller UE index.
pub fn worst_connection(beta: &ActivationVector, report: &RateReport) -> Option<(usize, usize)> {
    worst_of(beta, &report.per_user_rate)
}

pub(crate) fn worst_of(beta: &ActivationVector, rates: &[f64]) -> Option<(usize, usize)> {
    let mut worst: Option<(usize, usize, f64)> = None;
    for (k, j) in beta.iter().enumerate() {
        let Some(j) = j else { continue };
        if worst.is_none_or(|(_, _, r)| rates[k] < r) {
            worst = Some((k, j, rates[k]));
        }
    }
    worst.map(|(k, j, _)| (k, j))
}

/// What one solver call optimizes.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub scenario: &'a Scenario,
    /// Beamformers and gains the decision is based on (true channel or
    /// large-scale surrogate).
    pub model: &'a SlotModel,
    pub utility: UtilityKind,
    pub interference: InterferenceMode,
}

impl Problem<'_> {
    pub(crate) fn evaluate(&self, beta: &ActivationVector) -> (f64, Vec<f64>) {
        self.model.utility_unchecked(beta, self.utility, self.interference)
    }
}

/// Result of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best: ActivationVector,
    pub best_utility: f64,
    /// Initial utility followed by the selected utility of every swapping
    /// iteration.
    pub utility_trace: Vec<f64>,
    pub iterations: usize,
    pub switches: usize,
    /// Solver wall time in seconds.
    pub wall_time: f64,
    pub evaluations: usize,
}
