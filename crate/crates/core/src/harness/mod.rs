//! Seeded multi-slot experiments, scheme comparisons, scaling studies and
//! result files.

mod export;
mod scaling;
mod stats;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{export_comparison, export_results, export_scaling};
pub use scaling::{scaling_study, ScaleAxis, ScalingPoint, ScalingRow, ScalingSpec, ScalingStudy};
pub use stats::{complexity_fit, least_squares, linear_fit, rate_cdf, rate_pdf, Fit, Histogram, DEFAULT_BIN_WIDTH};

use crate::association::{
    exhaustive_solve, fractional_from_activation, is_feasible, max_sinr_assign, wcs_solve, ActivationMatrix,
    ActivationVector, AssociationMatrix, DropPolicy, Problem, WcsOptions, DEFAULT_BUDGET,
};
use crate::channel::generate_channel_set;
use crate::error::{Error, Result};
use crate::mimo::{check_capacity, SlotModel, UtilityKind};
use crate::rng::{self, tag};
use crate::topology::{CsiMode, InterferenceMode, Position, Scenario, UeTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Wcs,
    Exhaustive,
    MaxSinrDrop,
    MaxSinrShareDrop,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Wcs, Scheme::Exhaustive, Scheme::MaxSinrDrop, Scheme::MaxSinrShareDrop];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Wcs => "wcs",
            Scheme::Exhaustive => "exhaustive",
            Scheme::MaxSinrDrop => "max-sinr-drop",
            Scheme::MaxSinrShareDrop => "max-sinr-share-drop",
        }
    }

    /// Baselines are scored under always-on interference; the optimizers
    /// under the scenario's mode.
    pub fn default_interference(self, scenario: &Scenario) -> InterferenceMode {
        match self {
            Scheme::Wcs | Scheme::Exhaustive => scenario.interference_mode,
            Scheme::MaxSinrDrop | Scheme::MaxSinrShareDrop => InterferenceMode::Full,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown scheme '{s}'")))
    }
}

/// One experiment: a scheme run over `slots` seeded slots of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    pub scheme: Scheme,
    pub utility: UtilityKind,
    pub csi_mode: CsiMode,
    pub interference_mode: InterferenceMode,
    pub slots: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub exhaustive_budget: u64,
}

impl ExperimentSpec {
    /// Defaults taken from the scenario.
    pub fn new(scenario: &Scenario, scheme: Scheme, seed: u64) -> Self {
        ExperimentSpec {
            scenario: None,
            scheme,
            utility: UtilityKind::SumRate,
            csi_mode: scenario.csi_mode,
            interference_mode: scheme.default_interference(scenario),
            slots: scenario.slots,
            seed,
            out: None,
            exhaustive_budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_utility(mut self, utility: UtilityKind) -> Self {
        self.utility = utility;
        self
    }

    pub fn with_csi(mut self, csi: CsiMode) -> Self {
        self.csi_mode = csi;
        self
    }

    pub fn with_interference(mut self, mode: InterferenceMode) -> Self {
        self.interference_mode = mode;
        self
    }

    pub fn with_slots(mut self, slots: usize) -> Self {
        self.slots = slots;
        self
    }

    /// Short label such as `wcs/instantaneous/association_dependent`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}",
            self.scheme,
            serde_plain(&self.csi_mode),
            serde_plain(&self.interference_mode)
        )
    }
}

pub(crate) fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Solver counters of one slot. Wall time is kept in memory only so that
/// result files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub switches: usize,
    pub evaluations: usize,
    #[serde(skip)]
    pub wall_time: f64,
    pub utility_trace: Vec<f64>,
}

/// What one scheme did in one slot, scored on the true channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: usize,
    pub activation: ActivationVector,
    /// Granted streams per UE, 0 when dropped.
    pub streams: Vec<usize>,
    pub per_user_rate: Vec<f64>,
    pub utility_sum: f64,
    pub utility_min: f64,
    pub ill_conditioned: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub num_ue: usize,
    pub num_bs: usize,
    pub slots: Vec<SlotOutcome>,
    /// Mean over slots of the sum rate, bits/s/Hz.
    pub mean_spectral_efficiency: f64,
    pub mean_min_rate: f64,
    /// Average rate of each UE over the slots.
    pub per_user_throughput: Vec<f64>,
    pub association: AssociationMatrix,
    /// Number of (slot, UE) pairs left unserved.
    pub dropped: usize,
    pub ill_conditioned: usize,
}

impl ExperimentResult {
    fn aggregate(spec: ExperimentSpec, scenario: &Scenario, slots: Vec<SlotOutcome>) -> Result<Self> {
        let t = slots.len() as f64;
        let k_count = scenario.num_ue();
        let mut per_user_throughput = vec![0.0; k_count];
        for s in &slots {
            for (acc, r) in per_user_throughput.iter_mut().zip(&s.per_user_rate) {
                *acc += r;
            }
        }
        for r in &mut per_user_throughput {
            *r /= t;
        }
        let activations = ActivationMatrix {
            columns: slots.iter().map(|s| s.activation.clone()).collect(),
        };
        Ok(ExperimentResult {
            num_ue: k_count,
            num_bs: scenario.num_bs(),
            mean_spectral_efficiency: slots.iter().map(|s| s.utility_sum).sum::<f64>() / t,
            mean_min_rate: slots.iter().map(|s| s.utility_min).sum::<f64>() / t,
            per_user_throughput,
            association: fractional_from_activation(&activations, scenario.num_bs())?,
            dropped: slots.iter().map(|s| s.activation.iter().filter(Option::is_none).count()).sum(),
            ill_conditioned: slots.iter().map(|s| s.ill_conditioned).sum(),
            spec,
            slots,
        })
    }

    /// Every per-user rate of every slot.
    pub fn rate_samples(&self) -> Vec<f64> {
        self.slots.iter().flat_map(|s| s.per_user_rate.iter().copied()).collect()
    }

    pub fn mean_iterations(&self) -> Option<f64> {
        let counts: Vec<usize> = self.slots.iter().filter_map(|s| s.solve.as_ref().map(|x| x.iterations)).collect();
        (!counts.is_empty()).then(|| counts.iter().sum::<usize>() as f64 / counts.len() as f64)
    }

    /// Fraction of per-user rates strictly below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        let samples = self.rate_samples();
        samples.iter().filter(|&&r| r < threshold).count() as f64 / samples.len().max(1) as f64
    }
}

/// True-channel model and, when needed, the large-scale surrogate model of
/// one slot.
pub struct SlotModels {
    pub truth: SlotModel,
    pub estimate: Option<SlotModel>,
}

impl SlotModels {
    pub fn build(scenario: &Scenario, positions: &[Position], slot: usize, slot_seed: u64, estimates: bool) -> Result<Self> {
        let mut set = generate_channel_set(scenario, positions, slot, slot_seed)?;
        let truth = SlotModel::new(scenario, &set.channels)?;
        let estimate = if estimates {
            set.ensure_estimates(scenario, positions);
            Some(SlotModel::new(scenario, set.estimate_matrices())?)
        } else {
            None
        };
        Ok(SlotModels { truth, estimate })
    }

    fn decision(&self, csi: CsiMode) -> &SlotModel {
        match csi {
            CsiMode::Instantaneous => &self.truth,
            CsiMode::LargeScaleOnly => self.estimate.as_ref().expect("estimates built for large-scale CSI"),
        }
    }
}

/// Solves one slot with the spec's scheme and scores it on the true channel.
pub fn solve_slot(
    scenario: &Scenario,
    models: &SlotModels,
    spec: &ExperimentSpec,
    slot: usize,
    solver_seed: u64,
) -> Result<SlotOutcome> {
    let decision = models.decision(spec.csi_mode);
    let problem = Problem {
        scenario,
        model: decision,
        utility: spec.utility,
        interference: spec.interference_mode,
    };
    let (activation, streams, solve) = match spec.scheme {
        Scheme::Wcs | Scheme::Exhaustive => {
            let report = if spec.scheme == Scheme::Wcs {
                wcs_solve(&problem, solver_seed, WcsOptions::default())?
            } else {
                exhaustive_solve(&problem, spec.exhaustive_budget)?
            };
            let feasibility = is_feasible(&report.best, scenario);
            if !feasibility.is_ok() {
                return Err(Error::Infeasible(feasibility.diagnostics.join("; ")));
            }
            let stats = SolveStats {
                iterations: report.iterations,
                switches: report.switches,
                evaluations: report.evaluations,
                wall_time: report.wall_time,
                utility_trace: report.utility_trace,
            };
            (report.best, scenario.streams(), Some(stats))
        }
        Scheme::MaxSinrDrop | Scheme::MaxSinrShareDrop => {
            let policy = if spec.scheme == Scheme::MaxSinrDrop {
                DropPolicy::Drop
            } else {
                DropPolicy::ShareDrop
            };
            let a = max_sinr_assign(decision, scenario, policy);
            (a.activation, a.streams, None)
        }
    };
    check_capacity(&activation, &streams, scenario)?;
    let report = models
        .truth
        .network_rates_with_streams(slot, &activation, Some(&streams), spec.interference_mode)?;
    Ok(SlotOutcome {
        slot,
        activation,
        streams,
        per_user_rate: report.per_user_rate,
        utility_sum: report.utility_sum,
        utility_min: report.utility_min,
        ill_conditioned: report.ill_conditioned,
        solve,
    })
}

/// Runs one experiment.
pub fn run_experiment(scenario: &Scenario, spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let mut out = compare(scenario, std::slice::from_ref(spec))?;
    Ok(out.remove(0))
}

/// Runs several specs on shared channel realizations. All specs must agree on
/// slot count and seed.
pub fn compare(scenario: &Scenario, specs: &[ExperimentSpec]) -> Result<Vec<ExperimentResult>> {
    scenario.ensure_valid()?;
    let Some(first) = specs.first() else {
        return Ok(Vec::new());
    };
    if specs.iter().any(|s| s.slots != first.slots || s.seed != first.seed) {
        return Err(Error::Domain("compared specs must share slot count and seed".into()));
    }
    if first.slots == 0 {
        return Err(Error::Domain("an experiment needs at least one slot".into()));
    }
    let seed = first.seed;
    let need_estimates = specs.iter().any(|s| s.csi_mode == CsiMode::LargeScaleOnly);
    let trajectory = UeTrajectory::generate(scenario, seed, first.slots);

    let per_slot: Vec<Vec<SlotOutcome>> = trajectory
        .positions
        .par_iter()
        .enumerate()
        .map(|(t, positions)| {
            let run = || -> Result<Vec<SlotOutcome>> {
                let models = SlotModels::build(
                    scenario,
                    positions,
                    t,
                    rng::derive(seed, &[tag::SLOT, t as u64]),
                    need_estimates,
                )?;
                let solver_seed = rng::derive(seed, &[tag::SOLVER, t as u64]);
                specs
                    .iter()
                    .map(|spec| solve_slot(scenario, &models, spec, t, solver_seed))
                    .collect()
            };
            run().map_err(|e| e.in_slot(t))
        })
        .collect::<Result<_>>()?;

    let mut columns: Vec<Vec<SlotOutcome>> = vec![Vec::with_capacity(first.slots); specs.len()];
    for slot in per_slot {
        for (col, outcome) in columns.iter_mut().zip(slot) {
            col.push(outcome);
        }
    }
    specs
        .iter()
        .zip(columns)
        .map(|(spec, slots)| ExperimentResult::aggregate(spec.clone(), scenario, slots))
        .collect()
}
