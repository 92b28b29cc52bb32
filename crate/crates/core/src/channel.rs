//! Per-slot mmWave channel generation.
//!
//! Each (UE, BS) link gets a LoS/NLoS state drawn from a distance-dependent
//! probability, a path loss with log-normal shadowing, and a clustered
//! multi-ray matrix over the two uniform planar arrays. The large-scale
//! amplitude gain `10^(-PL/20)` is folded into the matrix.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag, SimRng};
use crate::topology::{Panel, Position, Scenario, SPEED_OF_LIGHT};
use crate::{CMatrix, C64};

pub const BREAKPOINT_M: f64 = 27.0;
pub const LOS_DECAY_M: f64 = 71.0;
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Los,
    Nlos,
}

impl LinkState {
    pub fn path_loss_exponent(self) -> f64 {
        match self {
            LinkState::Los => 2.0,
            LinkState::Nlos => 3.4,
        }
    }

    /// Shadow-fading standard deviation in dB.
    pub fn shadow_sigma_db(self) -> f64 {
        match self {
            LinkState::Los => 4.8,
            LinkState::Nlos => 7.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleRecord {
    /// 3-D distance in meters.
    pub distance: f64,
    pub state: LinkState,
    /// Path loss including the shadowing draw, dB.
    pub path_loss_db: f64,
    pub shadow_db: f64,
}

impl LargeScaleRecord {
    pub fn amplitude_gain(&self) -> f64 {
        10f64.powf(-self.path_loss_db / 20.0)
    }
}

pub fn distance(a: &Position, b: &Position) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn los_probability(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("LoS probability needs a positive distance, got {d}")));
    }
    let decay = (-d / LOS_DECAY_M).exp();
    let inner = (BREAKPOINT_M / d).min(1.0) * (1.0 - decay) + decay;
    Ok(inner * inner)
}

pub fn draw_link_state(d: f64, seed: u64) -> Result<LinkState> {
    let p = los_probability(d)?;
    let mut rng = rng::stream(seed);
    Ok(if rng.random::<f64>() < p {
        LinkState::Los
    } else {
        LinkState::Nlos
    })
}

/// Free-space loss at the 1 m reference distance, dB.
pub fn reference_loss_db(carrier_hz: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    20.0 * (4.0 * PI * REFERENCE_DISTANCE_M / wavelength).log10()
}

/// Path loss for a given shadowing value (dB).
pub fn path_loss_with_shadow(d: f64, state: LinkState, carrier_hz: f64, shadow_db: f64) -> Result<f64> {
    if !(d >= REFERENCE_DISTANCE_M) {
        return Err(Error::Domain(format!(
            "path loss model needs d >= {REFERENCE_DISTANCE_M} m, got {d}"
        )));
    }
    Ok(reference_loss_db(carrier_hz)
        + 10.0 * state.path_loss_exponent() * (d / REFERENCE_DISTANCE_M).log10()
        + shadow_db)
}

/// Returns `(path_loss_db, shadow_db)` with the shadow drawn from `seed`.
pub fn path_loss_db(d: f64, state: LinkState, carrier_hz: f64, seed: u64) -> Result<(f64, f64)> {
    let normal = Normal::new(0.0, state.shadow_sigma_db()).expect("positive sigma");
    let shadow = normal.sample(&mut rng::stream(seed));
    Ok((path_loss_with_shadow(d, state, carrier_hz, shadow)?, shadow))
}

/// UPA response; element `(u, v)` sits at index `u * V + v`.
pub fn array_response(phi: f64, theta: f64, panel: Panel, spacing: f64, wavelength: f64) -> DVector<C64> {
    let kd = 2.0 * PI / wavelength * spacing;
    let du = kd * phi.sin() * theta.sin();
    let dv = kd * theta.cos();
    DVector::from_iterator(
        panel.elements(),
        (0..panel.u).flat_map(|u| (0..panel.v).map(move |v| C64::from_polar(1.0, u as f64 * du + v as f64 * dv))),
    )
}

/// One propagation ray of the clustered model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    /// Power gain of the ray's cluster.
    pub cluster_gain: f64,
    /// Random ray phase, radians.
    pub phase: f64,
    pub aoa_azimuth: f64,
    pub aoa_elevation: f64,
    pub aod_azimuth: f64,
    pub aod_elevation: f64,
}

fn laplace(rng: &mut SimRng, std_dev: f64) -> f64 {
    let scale = std_dev / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Draws `C * L` rays. Cluster gains are Exp(1) normalized to sum to `C`.
pub fn draw_rays(scenario: &Scenario, seed: u64) -> Vec<Ray> {
    let mut rng = rng::stream(seed);
    let c = scenario.clusters;
    let mut gains: Vec<f64> = (0..c).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = gains.iter().sum();
    for g in &mut gains {
        *g *= c as f64 / total;
    }
    let half = scenario.angles.elevation_half_width_deg.to_radians();
    let spread = scenario.angles.ray_spread_deg.to_radians();
    let mut rays = Vec::with_capacity(c * scenario.rays);
    for &gain in &gains {
        let aoa_az = rng.random_range(-PI..PI);
        let aod_az = rng.random_range(-PI..PI);
        let aoa_el = PI / 2.0 + rng.random_range(-half..=half);
        let aod_el = PI / 2.0 + rng.random_range(-half..=half);
        for _ in 0..scenario.rays {
            rays.push(Ray {
                cluster_gain: gain,
                phase: rng.random_range(0.0..2.0 * PI),
                aoa_azimuth: aoa_az + laplace(&mut rng, spread),
                aoa_elevation: aoa_el + laplace(&mut rng, spread),
                aod_azimuth: aod_az + laplace(&mut rng, spread),
                aod_elevation: aod_el + laplace(&mut rng, spread),
            });
        }
    }
    rays
}

/// `g / sqrt(#rays) * sum sqrt(gain) e^{j phase} a_ue a_bs^H`.
pub fn clustered_channel(
    rays: &[Ray],
    ue_panel: Panel,
    bs_panel: Panel,
    amplitude_gain: f64,
    spacing: f64,
    wavelength: f64,
) -> CMatrix {
    let mut h = CMatrix::zeros(ue_panel.elements(), bs_panel.elements());
    if rays.is_empty() {
        return h;
    }
    let norm = amplitude_gain / (rays.len() as f64).sqrt();
    for ray in rays {
        let a_ue = array_response(ray.aoa_azimuth, ray.aoa_elevation, ue_panel, spacing, wavelength);
        let a_bs = array_response(ray.aod_azimuth, ray.aod_elevation, bs_panel, spacing, wavelength);
        let coef = C64::from_polar(norm * ray.cluster_gain.sqrt(), ray.phase);
        h.gerc(coef, &a_ue, &a_bs, C64::new(1.0, 0.0));
    }
    h
}

pub fn generate_channel(
    scenario: &Scenario,
    ue: usize,
    bs: usize,
    ls: &LargeScaleRecord,
    seed: u64,
) -> CMatrix {
    let rays = draw_rays(scenario, seed);
    clustered_channel(
        &rays,
        scenario.ue[ue].panel,
        scenario.bs[bs].panel,
        ls.amplitude_gain(),
        scenario.element_spacing(),
        scenario.wavelength(),
    )
}

/// Azimuth and zenith-measured elevation of the direction `from -> to`.
fn direction_angles(from: &Position, to: &Position) -> (f64, f64) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let dz = to[2] - from[2];
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    if r == 0.0 {
        return (0.0, PI / 2.0);
    }
    (dy.atan2(dx), (dz / r).clamp(-1.0, 1.0).acos())
}

/// Single-ray boresight channel along the geometric line between the nodes,
/// scaled by the large-scale gain only.
pub fn large_scale_estimate(
    scenario: &Scenario,
    ue: usize,
    bs: usize,
    ue_pos: &Position,
    ls: &LargeScaleRecord,
) -> CMatrix {
    let bs_node = &scenario.bs[bs];
    let (phi_ue, theta_ue) = direction_angles(ue_pos, &bs_node.position);
    let (phi_bs, theta_bs) = direction_angles(&bs_node.position, ue_pos);
    let (spacing, wavelength) = (scenario.element_spacing(), scenario.wavelength());
    let a_ue = array_response(phi_ue, theta_ue, scenario.ue[ue].panel, spacing, wavelength);
    let a_bs = array_response(phi_bs, theta_bs, bs_node.panel, spacing, wavelength);
    let mut h = CMatrix::zeros(a_ue.len(), a_bs.len());
    h.gerc(C64::new(ls.amplitude_gain(), 0.0), &a_ue, &a_bs, C64::new(0.0, 0.0));
    h
}

/// All links of one slot, indexed `k * J + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub slot: usize,
    pub num_bs: usize,
    pub channels: Vec<CMatrix>,
    pub large_scale: Vec<LargeScaleRecord>,
    pub estimates: Option<Vec<CMatrix>>,
}

impl ChannelSet {
    pub fn num_ue(&self) -> usize {
        self.channels.len() / self.num_bs.max(1)
    }

    pub fn h(&self, ue: usize, bs: usize) -> &CMatrix {
        &self.channels[ue * self.num_bs + bs]
    }

    pub fn record(&self, ue: usize, bs: usize) -> &LargeScaleRecord {
        &self.large_scale[ue * self.num_bs + bs]
    }

    /// Fills the large-scale surrogates if they are not present yet.
    pub fn ensure_estimates(&mut self, scenario: &Scenario, positions: &[Position]) {
        if self.estimates.is_some() {
            return;
        }
        let j_count = self.num_bs;
        let est = (0..self.channels.len())
            .map(|idx| {
                let (k, j) = (idx / j_count, idx % j_count);
                large_scale_estimate(scenario, k, j, &positions[k], &self.large_scale[idx])
            })
            .collect();
        self.estimates = Some(est);
    }

    /// Surrogate matrices; panics if [`ensure_estimates`](Self::ensure_estimates) was never run.
    pub fn estimate_matrices(&self) -> &[CMatrix] {
        self.estimates.as_deref().expect("large-scale estimates not generated")
    }
}

/// Seeds of the three independent draws for link `(k, j)` in a slot.
fn link_seeds(slot_seed: u64, k: usize, j: usize) -> [u64; 3] {
    let (k, j) = (k as u64, j as u64);
    [
        rng::derive(slot_seed, &[tag::LINK_STATE, k, j]),
        rng::derive(slot_seed, &[tag::SHADOW, k, j]),
        rng::derive(slot_seed, &[tag::SMALL_SCALE, k, j]),
    ]
}

pub fn generate_link(
    scenario: &Scenario,
    positions: &[Position],
    k: usize,
    j: usize,
    slot_seed: u64,
) -> Result<(LargeScaleRecord, CMatrix)> {
    let [state_seed, shadow_seed, small_seed] = link_seeds(slot_seed, k, j);
    let d = distance(&positions[k], &scenario.bs[j].position).max(REFERENCE_DISTANCE_M);
    let state = draw_link_state(d, state_seed)?;
    let (path_loss_db, shadow_db) = path_loss_db(d, state, scenario.carrier_hz, shadow_seed)?;
    let ls = LargeScaleRecord {
        distance: d,
        state,
        path_loss_db,
        shadow_db,
    };
    let h = generate_channel(scenario, k, j, &ls, small_seed);
    Ok((ls, h))
}

/// Draws every link of a slot. Estimates are attached in large-scale-only
/// CSI mode.
pub fn generate_channel_set(
    scenario: &Scenario,
    positions: &[Position],
    slot: usize,
    slot_seed: u64,
) -> Result<ChannelSet> {
    let j_count = scenario.num_bs();
    let links: Vec<(LargeScaleRecord, CMatrix)> = (0..positions.len() * j_count)
        .into_par_iter()
        .map(|idx| generate_link(scenario, positions, idx / j_count, idx % j_count, slot_seed))
        .collect::<Result<_>>()?;
    let (large_scale, channels) = links.into_iter().unzip();
    let mut set = ChannelSet {
        slot,
        num_bs: j_count,
        channels,
        large_scale,
        estimates: None,
    };
    if scenario.csi_mode == crate::topology::CsiMode::LargeScaleOnly {
        set.ensure_estimates(scenario, positions);
    }
    Ok(set)
}

/// One line of a channel dump file (JSON lines, 1-based ids, row-major
/// interleaved real/imaginary entries).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub slot: usize,
    pub ue: usize,
    pub bs: usize,
    pub state: LinkState,
    pub distance_m: f64,
    pub pl_db: f64,
    pub shadow_db: f64,
    pub rows: usize,
    pub cols: usize,
    pub re_im: Vec<f64>,
}

pub fn write_channel_dump(sets: &[ChannelSet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for set in sets {
        for (idx, (h, ls)) in set.channels.iter().zip(&set.large_scale).enumerate() {
            let mut re_im = Vec::with_capacity(2 * h.len());
            for r in 0..h.nrows() {
                for c in 0..h.ncols() {
                    re_im.push(h[(r, c)].re);
                    re_im.push(h[(r, c)].im);
                }
            }
            let rec = ChannelRecord {
                slot: set.slot,
                ue: idx / set.num_bs + 1,
                bs: idx % set.num_bs + 1,
                state: ls.state,
                distance_m: ls.distance,
                pl_db: ls.path_loss_db,
                shadow_db: ls.shadow_db,
                rows: h.nrows(),
                cols: h.ncols(),
                re_im,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dump back into per-slot channel sets (slots in file order).
pub fn read_channel_dump(path: impl AsRef<Path>) -> Result<Vec<ChannelSet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChannelRecord = serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
        if rec.re_im.len() != 2 * rec.rows * rec.cols {
            return Err(bad(format!("line {}: matrix payload has the wrong length", n + 1)));
        }
        records.push(rec);
    }

    let mut sets: Vec<ChannelSet> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let slot = records[start].slot;
        let end = records[start..]
            .iter()
            .position(|r| r.slot != slot)
            .map_or(records.len(), |p| start + p);
        let group = &records[start..end];
        let num_bs = group.iter().map(|r| r.bs).max().unwrap_or(0);
        let num_ue = group.iter().map(|r| r.ue).max().unwrap_or(0);
        if num_bs * num_ue != group.len() {
            return Err(bad(format!("slot {slot}: expected {num_ue}x{num_bs} links, found {}", group.len())));
        }
        let mut channels = vec![CMatrix::zeros(0, 0); group.len()];
        let mut large_scale = vec![None; group.len()];
        for r in group {
            if r.ue == 0 || r.bs == 0 {
                return Err(bad(format!("slot {slot}: ids are 1-based")));
            }
            let idx = (r.ue - 1) * num_bs + (r.bs - 1);
            channels[idx] = CMatrix::from_fn(r.rows, r.cols, |i, c| {
                let o = 2 * (i * r.cols + c);
                C64::new(r.re_im[o], r.re_im[o + 1])
            });
            large_scale[idx] = Some(LargeScaleRecord {
                distance: r.distance_m,
                state: r.state,
                path_loss_db: r.pl_db,
                shadow_db: r.shadow_db,
            });
        }
        let large_scale = large_scale
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(format!("slot {slot}: duplicate link records")))?;
        sets.push(ChannelSet {
            slot,
            num_bs,
            channels,
            large_scale,
            estimates: None,
        });
        start = end;
    }
    Ok(sets)
}
