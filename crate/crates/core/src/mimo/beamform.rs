use rayon::prelude::*;

use crate::association::ActivationVector;
use crate::error::{Error, Result};
use crate::topology::Scenario;
use crate::CMatrix;

/// SVD precoder/combiner for one (UE, BS) link, before power scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerPair {
    /// `M x n` dominant right singular vectors.
    pub precoder: CMatrix,
    /// `N x n` dominant left singular vectors.
    pub combiner: CMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Fewer than `n` singular values are numerically nonzero.
    pub rank_deficient: bool,
}

impl BeamformerPair {
    pub fn streams(&self) -> usize {
        self.singular_values.len()
    }
}

/// Splits `h = U S V^H` and keeps the `n` strongest directions.
///
/// Directions beyond the rank are the orthonormal completion returned by the
/// decomposition and carry zero singular values.
pub fn svd_beamformers(h: &CMatrix, n: usize) -> Result<BeamformerPair> {
    let full = h.nrows().min(h.ncols());
    if n == 0 || n > full {
        return Err(Error::Domain(format!(
            "cannot form {n} streams on a {}x{} channel",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("channel matrix has non-finite entries".into()));
    }
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let order = &order[..n];

    let combiner = CMatrix::from_fn(h.nrows(), n, |r, c| u[(r, order[c])]);
    let precoder = CMatrix::from_fn(h.ncols(), n, |r, c| v_t[(order[c], r)].conj());
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = singular_values[0];
    let rank_deficient = top == 0.0 || singular_values.iter().any(|&s| s <= 1e-12 * top);
    Ok(BeamformerPair {
        precoder,
        combiner,
        singular_values,
        rank_deficient,
    })
}

/// Beamformers for every (UE, BS) pair of a slot, indexed `k * J + j`.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub num_bs: usize,
    pub pairs: Vec<BeamformerPair>,
}

impl BeamformerSet {
    /// `channels[k * num_bs + j]` with `streams[k]` directions per UE.
    pub fn build(channels: &[CMatrix], num_bs: usize, streams: &[usize]) -> Result<Self> {
        let pairs = channels
            .par_iter()
            .enumerate()
            .map(|(idx, h)| svd_beamformers(h, streams[idx / num_bs]))
            .collect::<Result<Vec<_>>>()?;
        Ok(BeamformerSet { num_bs, pairs })
    }

    pub fn num_ue(&self) -> usize {
        self.pairs.len() / self.num_bs.max(1)
    }

    pub fn get(&self, ue: usize, bs: usize) -> &BeamformerPair {
        &self.pairs[ue * self.num_bs + bs]
    }
}

/// Checks per-BS user caps and stream budgets for the given per-UE stream
/// counts. Dropped UEs are ignored.
pub fn check_capacity(beta: &ActivationVector, streams: &[usize], scenario: &Scenario) -> Result<()> {
    if beta.len() != scenario.num_ue() || streams.len() != scenario.num_ue() {
        return Err(Error::Infeasible(format!(
            "activation vector covers {} UEs, scenario has {}",
            beta.len(),
            scenario.num_ue()
        )));
    }
    let mut users = vec![0usize; scenario.num_bs()];
    let mut load = vec![0usize; scenario.num_bs()];
    for (k, serving) in beta.iter().enumerate() {
        if let Some(j) = serving {
            if j >= scenario.num_bs() {
                return Err(Error::Infeasible(format!("UE {} assigned to unknown BS {}", k + 1, j + 1)));
            }
            users[j] += 1;
            load[j] += streams[k];
        }
    }
    for (j, bs) in scenario.bs.iter().enumerate() {
        if load[j] > bs.max_streams {
            return Err(Error::Infeasible(format!(
                "BS {} stream load {} > {}",
                j + 1,
                load[j],
                bs.max_streams
            )));
        }
        if users[j] > bs.max_users {
            return Err(Error::Infeasible(format!(
                "BS {} serves {} UEs > cap {}",
                j + 1,
                users[j],
                bs.max_users
            )));
        }
    }
    Ok(())
}

/// Power-scaled precoders for one activation vector.
#[derive(Debug, Clone)]
pub struct ScaledPrecoders {
    /// `(serving BS, M x n' precoder)` per UE; `None` for dropped UEs.
    pub per_ue: Vec<Option<(usize, CMatrix)>>,
}

impl ScaledPrecoders {
    /// Sum of `tr(F F^H)` over the UEs served by `bs`.
    pub fn bs_power(&self, bs: usize) -> f64 {
        self.per_ue
            .iter()
            .flatten()
            .filter(|(j, _)| *j == bs)
            .map(|(_, f)| f.norm_squared())
            .sum()
    }
}

/// Equal split of `P_j` over the UEs served by BS `j`, then equally over each
/// UE's streams. `streams[k]` may be smaller than the beamformer width, in
/// which case the strongest `streams[k]` directions are used.
pub fn scale_precoders(
    beta: &ActivationVector,
    beamformers: &BeamformerSet,
    scenario: &Scenario,
    streams: &[usize],
) -> Result<ScaledPrecoders> {
    check_capacity(beta, streams, scenario)?;
    let counts = beta.user_counts(scenario.num_bs());
    let per_ue = beta
        .iter()
        .enumerate()
        .map(|(k, serving)| {
            serving.map(|j| {
                let pair = beamformers.get(k, j);
                let n = streams[k].min(pair.streams());
                let per_stream = scenario.bs[j].power_w() / counts[j] as f64 / n as f64;
                (j, pair.precoder.columns(0, n).into_owned() * crate::C64::new(per_stream.sqrt(), 0.0))
            })
        })
        .collect();
    Ok(ScaledPrecoders { per_ue })
}
