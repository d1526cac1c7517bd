//! Cache-aided Gaussian interference networks in the low-SNR regime.
//!
//! The crate is organised along the layers of the separation-based strategy:
//!
//! - [`system`]: problem instance, corner points, demands, channel state.
//! - [`network`]: the multicasting and beamforming placement/delivery
//!   constructions over symbolic file chunks, with a decodability checker.
//! - [`rate`]: closed-form bits per unit energy, gain decompositions and
//!   inverse-rate memory sharing.
//! - [`phy`]: Monte Carlo phase-binning beamforming physical layer.
//! - [`converse`]: cut-set (multiple-access) and broadcast upper bounds.
//! - [`gap`]: parameter sweeps comparing achievable rates with the bounds.
//!
//! File size is normalised to one throughout, so cache sizes are measured in
//! files and message loads in fractions of a file. Rates are bits per channel
//! use per unit power in the `P -> 0` limit.

pub mod combinatorics;
pub mod converse;
pub mod gap;
pub mod network;
pub mod phy;
pub mod rate;
pub mod system;

pub use system::{
    validate_config, ChannelState, ConfigViolation, CornerParams, CornerValue, Demand,
    MessageSpec, SystemConfig,
};
