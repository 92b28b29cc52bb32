use std::collections::BTreeMap;

use nalgebra::{DMatrixView, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beamform::{check_capacity, BeamformerSet};
use crate::association::ActivationVector;
use crate::error::{Error, Result};
use crate::topology::{InterferenceMode, Scenario};
use crate::{CMatrix, C64};

/// Covariances whose condition number exceeds this are inverted through a
/// floored eigendecomposition.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    #[default]
    SumRate,
    MinRate,
}

impl UtilityKind {
    pub fn apply(self, rates: &[f64]) -> f64 {
        match self {
            UtilityKind::SumRate => rates.iter().sum(),
            UtilityKind::MinRate => {
                if rates.is_empty() {
                    0.0
                } else {
                    rates.iter().copied().fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

/// Per-user rates of one slot under one activation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub slot: usize,
    pub activation: ActivationVector,
    /// bits/s/Hz; zero for dropped UEs.
    pub per_user_rate: Vec<f64>,
    /// `(k, serving BS)` -> rate, served UEs only.
    pub per_pair_rate: BTreeMap<(usize, usize), f64>,
    pub utility_sum: f64,
    pub utility_min: f64,
    /// Number of users whose covariance needed the eigenvalue floor.
    pub ill_conditioned: usize,
}

pub fn utility(report: &RateReport, kind: UtilityKind) -> f64 {
    kind.apply(&report.per_user_rate)
}

/// Beamformers and every cross-link gain of one slot.
///
/// `gain(k, j, i, l) = W_{k,j}^H H_{k,i} F_{l,i}` with unscaled beamformers,
/// where `W_{k,j}` is UE k's combiner when served by BS j and `F_{l,i}` is
/// BS i's precoder toward UE l. Only power scaling depends on the activation
/// vector, so every candidate of a solve reuses this table.
#[derive(Debug, Clone)]
pub struct SlotModel {
    num_ue: usize,
    num_bs: usize,
    beamformers: BeamformerSet,
    gains: Vec<CMatrix>,
    combiner_gram: Vec<CMatrix>,
    noise_w: f64,
    power_w: Vec<f64>,
    max_users: Vec<usize>,
    max_streams: Vec<usize>,
    streams: Vec<usize>,
}

impl SlotModel {
    /// `channels[k * J + j]` for the scenario's UEs and BSs.
    pub fn new(scenario: &Scenario, channels: &[CMatrix]) -> Result<Self> {
        let beamformers = BeamformerSet::build(channels, scenario.num_bs(), &scenario.streams())?;
        Self::with_beamformers(scenario, channels, beamformers)
    }

    pub fn with_beamformers(scenario: &Scenario, channels: &[CMatrix], beamformers: BeamformerSet) -> Result<Self> {
        let (num_ue, num_bs) = (scenario.num_ue(), scenario.num_bs());
        if channels.len() != num_ue * num_bs || beamformers.pairs.len() != channels.len() {
            return Err(Error::Domain(format!(
                "expected {} links, got {} channels and {} beamformers",
                num_ue * num_bs,
                channels.len(),
                beamformers.pairs.len()
            )));
        }
        let blocks: Vec<(CMatrix, Vec<CMatrix>)> = (0..num_ue * num_bs)
            .into_par_iter()
            .map(|kj| {
                let k = kj / num_bs;
                let w = &beamformers.pairs[kj].combiner;
                let w_h = w.adjoint();
                let mut row = Vec::with_capacity(num_bs * num_ue);
                for i in 0..num_bs {
                    let projected = &w_h * &channels[k * num_bs + i];
                    for l in 0..num_ue {
                        row.push(&projected * &beamformers.get(l, i).precoder);
                    }
                }
                (&w_h * w, row)
            })
            .collect();
        let mut gains = Vec::with_capacity(num_ue * num_bs * num_bs * num_ue);
        let mut combiner_gram = Vec::with_capacity(num_ue * num_bs);
        for (gram, row) in blocks {
            combiner_gram.push(gram);
            gains.extend(row);
        }
        Ok(SlotModel {
            num_ue,
            num_bs,
            beamformers,
            gains,
            combiner_gram,
            noise_w: scenario.noise_power_w(),
            power_w: scenario.bs.iter().map(|b| b.power_w()).collect(),
            max_users: scenario.bs.iter().map(|b| b.max_users).collect(),
            max_streams: scenario.bs.iter().map(|b| b.max_streams).collect(),
            streams: scenario.streams(),
        })
    }

    pub fn beamformers(&self) -> &BeamformerSet {
        &self.beamformers
    }

    pub fn noise_w(&self) -> f64 {
        self.noise_w
    }

    pub fn num_ue(&self) -> usize {
        self.num_ue
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    /// Scenario stream demand per UE.
    pub fn streams(&self) -> &[usize] {
        &self.streams
    }

    fn gain(&self, k: usize, j: usize, i: usize, l: usize) -> &CMatrix {
        &self.gains[((k * self.num_bs + j) * self.num_bs + i) * self.num_ue + l]
    }

    /// Top singular value of link `(k, j)`.
    pub fn top_singular_value(&self, k: usize, j: usize) -> f64 {
        self.beamformers.get(k, j).singular_values[0]
    }

    /// `(k, j)`-block of the interference-plus-noise covariance and the
    /// desired-signal factor `g` with per-stream power `p` (signal `p g g^H`).
    fn covariance_parts(
        &self,
        k: usize,
        beta: &ActivationVector,
        streams: &[usize],
        counts: &[usize],
        mode: InterferenceMode,
    ) -> Option<(CMatrix, DMatrixView<'_, C64>, f64)> {
        let j = beta.serving(k)?;
        let n = streams[k];
        let mut v = self.combiner_gram[k * self.num_bs + j].view((0, 0), (n, n)) * C64::new(self.noise_w, 0.0);
        for l in 0..self.num_ue {
            if l == k {
                continue;
            }
            if let Some(i) = beta.serving(l) {
                let p = self.power_w[i] / counts[i] as f64 / streams[l] as f64;
                add_gram(&mut v, self.gain(k, j, i, l).view((0, 0), (n, streams[l])), p);
            }
        }
        if mode == InterferenceMode::Full {
            // Directions toward UEs a BS does not serve radiate at that BS's
            // full-load per-user power.
            for i in 0..self.num_bs {
                for l in 0..self.num_ue {
                    if l == k || beta.serving(l) == Some(i) {
                        continue;
                    }
                    let p = self.power_w[i] / self.max_users[i] as f64 / self.streams[l] as f64;
                    add_gram(&mut v, self.gain(k, j, i, l).view((0, 0), (n, self.streams[l])), p);
                }
            }
        }
        let p = self.power_w[j] / counts[j] as f64 / n as f64;
        Some((v, self.gain(k, j, j, k).view((0, 0), (n, n)), p))
    }

    /// Rates for an already-validated activation vector; second value counts
    /// ill-conditioned covariances.
    pub(crate) fn rates_unchecked(
        &self,
        beta: &ActivationVector,
        streams: &[usize],
        mode: InterferenceMode,
    ) -> (Vec<f64>, usize) {
        let counts = beta.user_counts(self.num_bs);
        let mut ill = 0;
        let rates = (0..self.num_ue)
            .map(|k| match self.covariance_parts(k, beta, streams, &counts, mode) {
                None => 0.0,
                Some((v, g, p)) => {
                    let (r, flagged) = log2_det_rate(v, g, p, self.noise_w);
                    ill += flagged as usize;
                    r
                }
            })
            .collect();
        (rates, ill)
    }

    pub(crate) fn utility_unchecked(&self, beta: &ActivationVector, kind: UtilityKind, mode: InterferenceMode) -> (f64, Vec<f64>) {
        let (rates, _) = self.rates_unchecked(beta, &self.streams, mode);
        (kind.apply(&rates), rates)
    }

    fn validated(&self, beta: &ActivationVector, streams: Option<&[usize]>) -> Result<Vec<usize>> {
        let streams = streams.map_or_else(|| self.streams.clone(), <[usize]>::to_vec);
        if beta.len() != self.num_ue || streams.len() != self.num_ue {
            return Err(Error::Infeasible(format!(
                "activation vector covers {} UEs, slot has {}",
                beta.len(),
                self.num_ue
            )));
        }
        let mut users = vec![0usize; self.num_bs];
        let mut load = vec![0usize; self.num_bs];
        for (k, serving) in beta.iter().enumerate() {
            if let Some(j) = serving {
                if j >= self.num_bs {
                    return Err(Error::Infeasible(format!("UE {} assigned to unknown BS {}", k + 1, j + 1)));
                }
                users[j] += 1;
                load[j] += streams[k];
                if streams[k] == 0 || streams[k] > self.beamformers.get(k, j).streams() {
                    return Err(Error::Infeasible(format!("UE {}: {} streams unsupported", k + 1, streams[k])));
                }
            }
        }
        for (j, &u) in users.iter().enumerate() {
            if load[j] > self.max_streams[j] {
                return Err(Error::Infeasible(format!(
                    "BS {} stream load {} > {}",
                    j + 1,
                    load[j],
                    self.max_streams[j]
                )));
            }
            if u > self.max_users[j] {
                return Err(Error::Infeasible(format!("BS {} serves {u} UEs > cap {}", j + 1, self.max_users[j])));
            }
        }
        Ok(streams)
    }

    /// Interference-plus-noise covariance seen by UE `k` after combining.
    pub fn interference_covariance(&self, k: usize, beta: &ActivationVector, mode: InterferenceMode) -> Result<CMatrix> {
        let streams = self.validated(beta, None)?;
        let counts = beta.user_counts(self.num_bs);
        self.covariance_parts(k, beta, &streams, &counts, mode)
            .map(|(v, _, _)| v)
            .ok_or_else(|| Error::Infeasible(format!("UE {} is not served", k + 1)))
    }

    pub fn instantaneous_rate(&self, k: usize, beta: &ActivationVector, mode: InterferenceMode) -> Result<f64> {
        let streams = self.validated(beta, None)?;
        let counts = beta.user_counts(self.num_bs);
        Ok(self
            .covariance_parts(k, beta, &streams, &counts, mode)
            .map_or(0.0, |(v, g, p)| log2_det_rate(v, g, p, self.noise_w).0))
    }

    pub fn network_rates(&self, slot: usize, beta: &ActivationVector, mode: InterferenceMode) -> Result<RateReport> {
        self.network_rates_with_streams(slot, beta, None, mode)
    }

    /// As [`network_rates`](Self::network_rates) with per-UE stream overrides
    /// (stream-sharing baselines).
    pub fn network_rates_with_streams(
        &self,
        slot: usize,
        beta: &ActivationVector,
        streams: Option<&[usize]>,
        mode: InterferenceMode,
    ) -> Result<RateReport> {
        let streams = self.validated(beta, streams)?;
        let (rates, ill) = self.rates_unchecked(beta, &streams, mode);
        Ok(build_report(slot, beta.clone(), rates, ill))
    }
}

pub(crate) fn build_report(slot: usize, activation: ActivationVector, rates: Vec<f64>, ill: usize) -> RateReport {
    let per_pair_rate = activation
        .iter()
        .enumerate()
        .filter_map(|(k, s)| s.map(|j| ((k, j), rates[k])))
        .collect();
    RateReport {
        slot,
        utility_sum: UtilityKind::SumRate.apply(&rates),
        utility_min: UtilityKind::MinRate.apply(&rates),
        activation,
        per_user_rate: rates,
        per_pair_rate,
        ill_conditioned: ill,
    }
}

/// Checks capacity for explicit per-UE stream counts (see [`check_capacity`]).
pub fn validate_streams(beta: &ActivationVector, streams: &[usize], scenario: &Scenario) -> Result<()> {
    check_capacity(beta, streams, scenario)
}

/// `v += p x x^H` without temporaries.
fn add_gram(v: &mut CMatrix, x: DMatrixView<'_, C64>, p: f64) {
    let n = v.nrows();
    for c in 0..n {
        for r in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..x.ncols() {
                acc += x[(r, t)] * x[(c, t)].conj();
            }
            v[(r, c)] += acc * p;
        }
    }
}

/// `log2 det(I + V^{-1} p g g^H)`, flagged when `cond(V)` exceeds
/// [`CONDITION_LIMIT`].
pub fn log2_det_rate(v: CMatrix, g: DMatrixView<'_, C64>, p: f64, noise_w: f64) -> (f64, bool) {
    let n = v.nrows();
    if n == 0 {
        return (0.0, false);
    }
    let v = (&v + v.adjoint()) * C64::new(0.5, 0.0);
    // With orthonormal combiners V >= noise * I, so trace / noise bounds cond(V).
    let trace: f64 = v.diagonal().iter().map(|z| z.re).sum();
    if trace / noise_w <= CONDITION_LIMIT {
        if let Some(chol) = v.clone().cholesky() {
            let x = chol.l().solve_lower_triangular(&g.into_owned()).expect("nonsingular factor");
            return (log2_det_identity_plus(&x, p), false);
        }
    }
    let eig = SymmetricEigen::new(v);
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let ill = !(lo > 0.0) || hi / lo > CONDITION_LIMIT;
    let floor = noise_w * 1e-12;
    let inv_sqrt = CMatrix::from_fn(n, n, |r, c| {
        eig.eigenvectors[(r, c)] * (1.0 / eig.eigenvalues[c].max(floor).sqrt())
    });
    let x = inv_sqrt.adjoint() * g;
    (log2_det_identity_plus(&x, p), ill)
}

/// `log2 det(I + p x x^H)` through a Cholesky factor.
fn log2_det_identity_plus(x: &CMatrix, p: f64) -> f64 {
    let n = x.nrows();
    let mut m = CMatrix::identity(n, n);
    add_gram(&mut m, x.as_view(), p);
    match m.clone().cholesky() {
        Some(chol) => {
            let l = chol.l();
            (0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum::<f64>().max(0.0) / std::f64::consts::LN_2
        }
        None => {
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            SymmetricEigen::new(m).eigenvalues.iter().map(|e| e.max(1.0).log2()).sum()
        }
    }
}
