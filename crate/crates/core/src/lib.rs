//! Energy-efficiency optimized power allocation (EEOPA) for MIMO-OFDM links
//! under statistical QoS constraints.
//!
//! The pipeline runs from sampled channel matrices through ordered-eigenvalue
//! marginals to per-group power thresholds, effective capacity and energy
//! efficiency, with average power allocation (APA) as the baseline.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod capacity;
pub mod channel;
pub mod csvout;
pub mod error;
pub mod experiments;
pub mod marginals;
pub mod par;
pub mod quad;
pub mod rng;
pub mod root;

pub use channel::{AntennaConfig, ChannelMatrix, OrderedGains};
pub use error::{Error, Result};
pub use marginals::{EmpiricalDensity, MarginalDensity, MarginalSource};
pub use par::Execution;
pub use rng::RandomStream;
