use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{complexity_fit, linear_fit, Fit};
use super::{solve_slot, ExperimentSpec, Scheme, SlotModels};
use crate::error::{Error, Result};
use crate::mimo::UtilityKind;
use crate::rng::{self, tag};
use crate::topology::{initial_positions, CsiMode, InterferenceMode, Panel, Scenario};

/// What the study varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleAxis {
    UeCount(Vec<usize>),
    BsPanel(Vec<Panel>),
    UePanel(Vec<Panel>),
}

impl ScaleAxis {
    fn len(&self) -> usize {
        match self {
            ScaleAxis::UeCount(v) => v.len(),
            ScaleAxis::BsPanel(v) | ScaleAxis::UePanel(v) => v.len(),
        }
    }

    /// Scenario, numeric size and label of point `i`.
    fn point(&self, base: &Scenario, i: usize) -> (Scenario, usize, String) {
        match self {
            ScaleAxis::UeCount(v) => (base.with_ue_count(v[i]), v[i], format!("K={}", v[i])),
            ScaleAxis::BsPanel(v) => (
                base.clone().with_bs_panel(v[i]),
                v[i].elements(),
                format!("BS {}x{}", v[i].u, v[i].v),
            ),
            ScaleAxis::UePanel(v) => (
                base.clone().with_ue_panel(v[i]),
                v[i].elements(),
                format!("UE {}x{}", v[i].u, v[i].v),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub axis: ScaleAxis,
    pub repetitions: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub utility: UtilityKind,
    pub csi_mode: CsiMode,
    /// Scheme default when absent.
    pub interference_mode: Option<InterferenceMode>,
}

impl ScalingSpec {
    pub fn new(axis: ScaleAxis, repetitions: usize, seed: u64) -> Self {
        ScalingSpec {
            axis,
            repetitions,
            seed,
            scheme: Scheme::Wcs,
            utility: UtilityKind::SumRate,
            csi_mode: CsiMode::Instantaneous,
            interference_mode: None,
        }
    }
}

/// One solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub size: usize,
    pub repetition: usize,
    pub iterations: usize,
    /// Seconds.
    pub wall_time: f64,
    pub spectral_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub size: usize,
    pub label: String,
    pub mean_iterations: f64,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub mean_wall_time: f64,
    pub mean_spectral_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub spec: ScalingSpec,
    pub rows: Vec<ScalingRow>,
    pub points: Vec<ScalingPoint>,
    /// `a * size + b` on the mean iteration counts.
    pub iteration_fit: Option<Fit>,
    /// `a K^2 log K + b K^2 + c K + d` on the mean wall times.
    pub runtime_fit: Option<Fit>,
    /// Same family fitted to every raw point.
    pub runtime_fit_raw: Option<Fit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Solves `repetitions` independent single-slot instances per axis point.
///
/// Channels are drawn in parallel; the solves themselves run one at a time so
/// wall times are not distorted by contention.
pub fn scaling_study(base: &Scenario, spec: &ScalingSpec) -> Result<ScalingStudy> {
    if spec.axis.len() == 0 || spec.repetitions == 0 {
        return Err(Error::Domain("scaling study needs at least one size and one repetition".into()));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for i in 0..spec.axis.len() {
        let (scenario, size, label) = spec.axis.point(base, i);
        scenario.ensure_valid()?;
        let mut run = ExperimentSpec::new(&scenario, spec.scheme, spec.seed).with_utility(spec.utility).with_csi(spec.csi_mode);
        if let Some(mode) = spec.interference_mode {
            run.interference_mode = mode;
        }
        let estimates = spec.csi_mode == CsiMode::LargeScaleOnly;
        let models: Vec<SlotModels> = (0..spec.repetitions)
            .into_par_iter()
            .map(|rep| {
                let instance = rng::derive(spec.seed, &[tag::INSTANCE, rep as u64]);
                let positions = initial_positions(instance, &scenario);
                SlotModels::build(&scenario, &positions, 0, rng::derive(instance, &[tag::SLOT, 0]), estimates)
            })
            .collect::<Result<_>>()?;

        let mut row_points = Vec::with_capacity(spec.repetitions);
        for (rep, m) in models.iter().enumerate() {
            let instance = rng::derive(spec.seed, &[tag::INSTANCE, rep as u64]);
            let outcome = solve_slot(&scenario, m, &run, 0, rng::derive(instance, &[tag::SOLVER]))?;
            let (iterations, wall_time) = outcome.solve.as_ref().map_or((0, 0.0), |s| (s.iterations, s.wall_time));
            row_points.push(ScalingPoint {
                size,
                repetition: rep,
                iterations,
                wall_time,
                spectral_efficiency: outcome.utility_sum,
            });
        }
        let n = row_points.len() as f64;
        rows.push(ScalingRow {
            size,
            label,
            mean_iterations: row_points.iter().map(|p| p.iterations as f64).sum::<f64>() / n,
            min_iterations: row_points.iter().map(|p| p.iterations).min().unwrap_or(0),
            max_iterations: row_points.iter().map(|p| p.iterations).max().unwrap_or(0),
            mean_wall_time: row_points.iter().map(|p| p.wall_time).sum::<f64>() / n,
            mean_spectral_efficiency: row_points.iter().map(|p| p.spectral_efficiency).sum::<f64>() / n,
        });
        points.extend(row_points);
    }

    let x: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let mut note = None;
    let iteration_fit = if rows.len() >= 2 {
        Some(linear_fit(&x, &rows.iter().map(|r| r.mean_iterations).collect::<Vec<_>>())?)
    } else {
        note = Some("single size: fits skipped".to_string());
        None
    };
    let (runtime_fit, runtime_fit_raw) = if rows.len() >= 4 {
        let raw_x: Vec<f64> = points.iter().map(|p| p.size as f64).collect();
        let raw_y: Vec<f64> = points.iter().map(|p| p.wall_time).collect();
        (
            Some(complexity_fit(&x, &rows.iter().map(|r| r.mean_wall_time).collect::<Vec<_>>())?),
            Some(complexity_fit(&raw_x, &raw_y)?),
        )
    } else {
        if rows.len() >= 2 {
            note = Some("fewer than 4 sizes: runtime fit skipped".to_string());
        }
        (None, None)
    };
    Ok(ScalingStudy {
        spec: spec.clone(),
        rows,
        points,
        iteration_fit,
        runtime_fit,
        runtime_fit_raw,
        note,
    })
}
