//! Monte Carlo simulator for the uplink of distributed MIMO networks under
//! Rician fading.
//!
//! A fixed budget of `M` antennas is split over `Q` access points with
//! `S = M/Q` elements each. For every network realization the crate drops
//! devices uniformly over a square cell, synthesizes Rician channels with a
//! statistical CSI-error model, applies MRC / ZF / MMSE receive combining and
//! averages the per-user achievable spectral efficiency. Channel diagnostics
//! (inter-user correlation coefficient, condition number) are provided
//! alongside.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod channel;
pub mod cli;
pub mod combining;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod montecarlo;
pub mod scalar;
pub mod stats;
pub mod streams;

pub use channel::{ChannelParams, ChannelRealization, CsiMode, RicianFactor};
pub use combining::{CombinerKind, SinrReport};
pub use error::{Error, Result};
pub use geometry::{Deployment, NetworkGeometry, Point3};
pub use linalg::{CMatrix, CVector};
pub use metrics::{ConditionAveraging, CovariancePair};
pub use montecarlo::{KappaDb, SimulationConfig, Split, SweepResult};
pub use scalar::Real;
pub use stats::Estimate;
pub use streams::Streams;

pub type ChannelParams64 = ChannelParams<f64>;
pub type ChannelRealization64 = ChannelRealization<f64>;
pub type NetworkGeometry64 = NetworkGeometry<f64>;
pub type Deployment64 = Deployment<f64>;
pub type ChannelMatrix64 = CMatrix<f64>;
pub type SimulationConfig64 = SimulationConfig<f64>;
pub type SweepResult64 = SweepResult<f64>;
pub type KappaDb64 = KappaDb<f64>;

pub type ChannelParams32 = ChannelParams<f32>;
pub type NetworkGeometry32 = NetworkGeometry<f32>;
pub type ChannelMatrix32 = CMatrix<f32>;
