//! Reservoir history matching toolkit.
//!
//! * [`grid`]: structured grids, rock and fluid properties, transmissibilities.
//! * [`sim`]: two-phase IMPES finite-volume simulator with Peaceman wells.
//! * [`ccr`]: cluster-classify-regress mixture of experts.
//! * [`surrogate`]: CCR emulation of producer well rates.
//! * [`prior`]: Karhunen-Loève log-normal and channelized priors.
//! * [`inversion`]: adaptive regularized ensemble Kalman inversion with
//!   Gaspari-Cohn localization.
//! * [`metrics`]: normalized RMSE, SSIM and percentile envelopes.
//! * [`pipeline`]: config-driven twin-experiment workflow.

pub mod ccr;
pub mod error;
pub mod grid;
pub mod inversion;
pub mod metrics;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod sim;
pub mod surrogate;

pub use error::{Error, Result};
