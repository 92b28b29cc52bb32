//! Network scenario: base stations, UEs, radio constants and mobility.
//!
//! A [`Scenario`] is read from a JSON document whose field names are part of
//! the file contract (see the crate README). Node identifiers are their
//! positions in the `bs` / `ue` arrays; diagnostics print them 1-based.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const UE_HEIGHT_M: f64 = 1.5;
pub const BS_HEIGHT_M: f64 = 10.0;

/// Cartesian position in meters.
pub type Position = [f64; 3];

/// Uniform planar array size, `[U, V]` in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Panel {
    pub u: usize,
    pub v: usize,
}

impl Panel {
    pub const fn new(u: usize, v: usize) -> Self {
        Panel { u, v }
    }

    pub fn elements(&self) -> usize {
        self.u * self.v
    }
}

impl From<[usize; 2]> for Panel {
    fn from([u, v]: [usize; 2]) -> Self {
        Panel { u, v }
    }
}

impl From<Panel> for [usize; 2] {
    fn from(p: Panel) -> Self {
        [p.u, p.v]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsNode {
    #[serde(rename = "pos")]
    pub position: Position,
    pub power_dbm: f64,
    pub panel: Panel,
    /// Stream budget `D_j`.
    pub max_streams: usize,
    /// User cap `Q_j`.
    pub max_users: usize,
}

impl BsNode {
    pub fn antennas(&self) -> usize {
        self.panel.elements()
    }

    pub fn power_w(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeNode {
    pub panel: Panel,
    pub n_streams: usize,
    /// Fixed initial position; drawn uniformly when absent.
    #[serde(default, rename = "pos", skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    /// A pinned UE never moves.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pinned: bool,
}

impl UeNode {
    pub fn new(panel: Panel, n_streams: usize) -> Self {
        UeNode {
            panel,
            n_streams,
            position: None,
            pinned: false,
        }
    }

    pub fn antennas(&self) -> usize {
        self.panel.elements()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    /// Association decided on the full clustered channel.
    #[default]
    Instantaneous,
    /// Association decided on a path-loss-only surrogate channel.
    LargeScaleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Only precoders of actually served UEs interfere.
    #[default]
    AssociationDependent,
    /// Every BS radiates toward every UE regardless of association.
    Full,
}

/// Small-scale angle generation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngleConfig {
    /// Half-width of the uniform cluster elevation window around the horizon.
    pub elevation_half_width_deg: f64,
    /// Standard deviation of the Laplacian per-ray offset.
    pub ray_spread_deg: f64,
}

impl Default for AngleConfig {
    fn default() -> Self {
        AngleConfig {
            elevation_half_width_deg: 15.0,
            ray_spread_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// `[width, depth]` in meters; the area spans `[0, width] x [0, depth]`.
    pub area: [f64; 2],
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub clusters: usize,
    pub rays: usize,
    pub slots: usize,
    pub mobility_box_m: f64,
    #[serde(default)]
    pub csi_mode: CsiMode,
    #[serde(default)]
    pub interference_mode: InterferenceMode,
    /// Antenna element spacing; half a wavelength when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_spacing_m: Option<f64>,
    #[serde(default)]
    pub angles: AngleConfig,
    pub bs: Vec<BsNode>,
    pub ue: Vec<UeNode>,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl Scenario {
    pub fn num_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn num_ue(&self) -> usize {
        self.ue.len()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing_m.unwrap_or(self.wavelength() / 2.0)
    }

    /// Thermal noise power over the configured bandwidth, in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10())
    }

    pub fn streams(&self) -> Vec<usize> {
        self.ue.iter().map(|u| u.n_streams).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    fn inside(&self, p: &Position) -> bool {
        (0.0..=self.area[0]).contains(&p[0]) && (0.0..=self.area[1]).contains(&p[1])
    }

    /// Returns every violated invariant; empty means the scenario is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            diags.push(format!("area {:?} must be positive", self.area));
        }
        if !(self.bandwidth_hz > 0.0) {
            diags.push(format!("bandwidth {} Hz must be positive", self.bandwidth_hz));
        }
        if !(self.carrier_hz > 0.0) {
            diags.push(format!("carrier {} Hz must be positive", self.carrier_hz));
        }
        if self.clusters == 0 {
            diags.push("cluster count must be at least 1".into());
        }
        if self.rays == 0 {
            diags.push("rays per cluster must be at least 1".into());
        }
        if self.slots == 0 {
            diags.push("slot count must be at least 1".into());
        }
        if !(self.mobility_box_m >= 0.0) {
            diags.push(format!("mobility box {} m must be non-negative", self.mobility_box_m));
        }
        if matches!(self.element_spacing_m, Some(d) if !(d > 0.0)) {
            diags.push("element spacing must be positive".into());
        }
        if self.bs.is_empty() {
            diags.push("at least one BS is required".into());
        }

        for (j, bs) in self.bs.iter().enumerate() {
            let id = j + 1;
            if bs.panel.u == 0 || bs.panel.v == 0 {
                diags.push(format!("BS {id}: panel {}x{} has an empty dimension", bs.panel.u, bs.panel.v));
            }
            if bs.max_streams == 0 {
                diags.push(format!("BS {id}: stream budget must be at least 1"));
            }
            if bs.max_users == 0 {
                diags.push(format!("BS {id}: user cap must be at least 1"));
            }
            if bs.max_streams > bs.antennas() {
                diags.push(format!(
                    "BS {id}: stream budget {} exceeds {} antennas",
                    bs.max_streams,
                    bs.antennas()
                ));
            }
            if !self.inside(&bs.position) {
                diags.push(format!("BS {id}: position {:?} outside the area", bs.position));
            }
        }

        let min_bs_antennas = self.bs.iter().map(BsNode::antennas).min().unwrap_or(0);
        for (k, ue) in self.ue.iter().enumerate() {
            let id = k + 1;
            if ue.panel.u == 0 || ue.panel.v == 0 {
                diags.push(format!("UE {id}: panel {}x{} has an empty dimension", ue.panel.u, ue.panel.v));
            }
            if ue.n_streams == 0 || ue.n_streams > ue.antennas() {
                diags.push(format!(
                    "UE {id}: {} streams outside 1..={} antennas",
                    ue.n_streams,
                    ue.antennas()
                ));
            }
            if !self.bs.is_empty() && ue.antennas() > min_bs_antennas {
                diags.push(format!(
                    "UE {id}: {} antennas exceed the smallest BS array ({min_bs_antennas})",
                    ue.antennas()
                ));
            }
            if let Some(p) = &ue.position {
                if !self.inside(p) {
                    diags.push(format!("UE {id}: position {p:?} outside the area"));
                }
            }
        }

        let user_cap: usize = self.bs.iter().map(|b| b.max_users).sum();
        if user_cap < self.num_ue() {
            diags.push(format!("total capacity {user_cap} < {} UEs", self.num_ue()));
        }
        let stream_cap: usize = self.bs.iter().map(|b| b.max_streams).sum();
        let demand: usize = self.ue.iter().map(|u| u.n_streams).sum();
        if stream_cap < demand {
            diags.push(format!("total stream budget {stream_cap} < demand {demand}"));
        }
        diags
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(diags))
        }
    }

    /// Three BSs on a ring, twelve UEs, 8x8 BS and 2x2 UE panels, two
    /// streams per UE.
    pub fn paper_default() -> Self {
        Self::homogeneous(3, 12)
    }

    /// `j` equal-power BSs on a ring around the area center and `k` UEs with
    /// the default panels. User caps default to `ceil(k / j) + 1`.
    pub fn homogeneous(j: usize, k: usize) -> Self {
        let area = [300.0, 300.0];
        let bs_panel = Panel::new(8, 8);
        let n_streams = 2;
        let bs = ring_layout(j, area)
            .into_iter()
            .map(|position| BsNode {
                position,
                power_dbm: 30.0,
                panel: bs_panel,
                max_streams: 0,
                max_users: 0,
            })
            .collect();
        let mut s = Scenario {
            area,
            carrier_hz: 73e9,
            bandwidth_hz: 1e9,
            noise_psd_dbm_hz: -174.0,
            clusters: 5,
            rays: 10,
            slots: 1,
            mobility_box_m: 5.0,
            csi_mode: CsiMode::Instantaneous,
            interference_mode: InterferenceMode::AssociationDependent,
            element_spacing_m: None,
            angles: AngleConfig::default(),
            bs,
            ue: vec![UeNode::new(Panel::new(2, 2), n_streams); k],
        };
        s.reset_homogeneous_caps();
        s
    }

    /// One 30 dBm macro BS in the center (8 users) and four 20 dBm pico BSs
    /// (3 users each) serving 20 UEs.
    pub fn hetnet() -> Self {
        let mut s = Self::homogeneous(1, 20);
        let n = 2;
        s.bs = vec![BsNode {
            position: [150.0, 150.0, BS_HEIGHT_M],
            power_dbm: 30.0,
            panel: Panel::new(8, 8),
            max_streams: 8 * n,
            max_users: 8,
        }];
        for (x, y) in [(75.0, 75.0), (225.0, 75.0), (75.0, 225.0), (225.0, 225.0)] {
            s.bs.push(BsNode {
                position: [x, y, BS_HEIGHT_M],
                power_dbm: 20.0,
                panel: Panel::new(8, 8),
                max_streams: 3 * n,
                max_users: 3,
            });
        }
        s
    }

    /// Sets every BS to `Q_j = ceil(K/J) + 1` users and `D_j = n * Q_j`
    /// streams (capped by the array size), with `n` the largest UE demand.
    pub fn reset_homogeneous_caps(&mut self) {
        let j = self.num_bs().max(1);
        let q = self.num_ue().div_ceil(j) + 1;
        let n = self.ue.iter().map(|u| u.n_streams).max().unwrap_or(1);
        for bs in &mut self.bs {
            bs.max_users = q;
            bs.max_streams = (n * q).min(bs.antennas());
        }
    }

    /// Replaces the UE list with `k` copies of the first UE (position-free)
    /// and resets caps to the homogeneous default.
    pub fn with_ue_count(&self, k: usize) -> Self {
        let template = self
            .ue
            .first()
            .cloned()
            .map(|mut u| {
                u.position = None;
                u.pinned = false;
                u
            })
            .unwrap_or_else(|| UeNode::new(Panel::new(2, 2), 2));
        let mut s = self.clone();
        s.ue = vec![template; k];
        s.reset_homogeneous_caps();
        s
    }

    pub fn with_bs_panel(mut self, panel: Panel) -> Self {
        for bs in &mut self.bs {
            bs.panel = panel;
        }
        self.reset_homogeneous_caps();
        self
    }

    pub fn with_ue_panel(mut self, panel: Panel) -> Self {
        for ue in &mut self.ue {
            ue.panel = panel;
            ue.n_streams = ue.n_streams.min(panel.elements());
        }
        self.reset_homogeneous_caps();
        self
    }
}

/// BS positions for `j` sites: the center for one site, otherwise equally
/// spaced on a circle of radius 0.3 * min(width, depth).
pub fn ring_layout(j: usize, area: [f64; 2]) -> Vec<Position> {
    let (cx, cy) = (area[0] / 2.0, area[1] / 2.0);
    if j == 1 {
        return vec![[cx, cy, BS_HEIGHT_M]];
    }
    let r = 0.3 * area[0].min(area[1]);
    (0..j)
        .map(|i| {
            let a = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * i as f64 / j as f64;
            [cx + r * a.cos(), cy + r * a.sin(), BS_HEIGHT_M]
        })
        .collect()
}

/// Draws `K` positions i.i.d. uniform over the area at UE height.
pub fn place_uniform(seed: u64, scenario: &Scenario) -> Vec<Position> {
    let mut rng = rng::stream(rng::derive(seed, &[tag::PLACE]));
    (0..scenario.num_ue())
        .map(|_| {
            [
                rng.random::<f64>() * scenario.area[0],
                rng.random::<f64>() * scenario.area[1],
                UE_HEIGHT_M,
            ]
        })
        .collect()
}

/// Uniform placement with fixed UE positions from the scenario applied on top.
pub fn initial_positions(seed: u64, scenario: &Scenario) -> Vec<Position> {
    let mut positions = place_uniform(seed, scenario);
    for (p, ue) in positions.iter_mut().zip(&scenario.ue) {
        if let Some(fixed) = ue.position {
            *p = fixed;
        }
    }
    positions
}

/// Moves every unpinned UE to a uniform point of the square box of side
/// `mobility_box_m` centered on its previous location, clamped to the area.
pub fn mobility_step(positions: &[Position], scenario: &Scenario, seed: u64) -> Vec<Position> {
    let mut rng = rng::stream(rng::derive(seed, &[tag::MOBILITY]));
    let half = scenario.mobility_box_m / 2.0;
    positions
        .iter()
        .enumerate()
        .map(|(k, p)| {
            // Draw even for pinned UEs so other UEs' paths do not depend on pinning.
            let dx = (rng.random::<f64>() * 2.0 - 1.0) * half;
            let dy = (rng.random::<f64>() * 2.0 - 1.0) * half;
            if scenario.ue.get(k).is_some_and(|u| u.pinned) {
                return *p;
            }
            [
                (p[0] + dx).clamp(0.0, scenario.area[0]),
                (p[1] + dy).clamp(0.0, scenario.area[1]),
                p[2],
            ]
        })
        .collect()
}

/// Per-slot UE positions over `slots` slots (`T x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct UeTrajectory {
    pub positions: Vec<Vec<Position>>,
}

impl UeTrajectory {
    /// Slot 0 uses the initial placement; each later slot applies one
    /// mobility step.
    pub fn generate(scenario: &Scenario, seed: u64, slots: usize) -> Self {
        let mut positions = Vec::with_capacity(slots);
        let mut current = initial_positions(seed, scenario);
        for t in 0..slots {
            if t > 0 {
                current = mobility_step(&current, scenario, rng::derive(seed, &[tag::MOBILITY, t as u64]));
            }
            positions.push(current.clone());
        }
        UeTrajectory { positions }
    }
}
