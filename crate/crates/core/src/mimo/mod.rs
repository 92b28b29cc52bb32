//! SVD beamforming, power scaling and association-dependent rates.

mod beamform;
mod rate;

pub use beamform::{check_capacity, scale_precoders, svd_beamformers, BeamformerPair, BeamformerSet, ScaledPrecoders};
pub use rate::{log2_det_rate, utility, validate_streams, RateReport, SlotModel, UtilityKind, CONDITION_LIMIT};
#[cfg(test)]
pub(crate) use rate::build_report;
