//! Hyperdimensional ensemble classification and batch active learning.
//!
//! * [`hdc`]: complex hypervector algebra and the fractional power encoder.
//! * [`ensemble`]: the ensemble classifier with prior hypervectors.
//! * [`acquisition`]: pool bookkeeping and batch acquisition strategies.
//! * [`learner`]: the round-by-round active learning driver.
//! * [`harness`]: datasets, experiment runs, and reported metrics.

pub mod acquisition;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod hdc;
pub mod io;
pub mod learner;
pub mod rng;

pub use acquisition::{AcquisitionBatch, AcquisitionConfig, Oracle, PoolState, SimulatedOracle, Strategy};
pub use ensemble::{Ensemble, EnsembleConfig, PriorMode, TrainConfig, VoteDistribution};
pub use error::{Error, Result};
pub use hdc::{Encoder, Hypervector};
