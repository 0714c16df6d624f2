//! HDC ensemble with prior hypervectors: training, voting, uncertainty,
//! similarity caching, and dimension regeneration.

mod cache;
mod config;
mod model;
mod regen;
mod votes;

pub use cache::{EncodedPool, PriorSimilarityCache, Query};
pub use config::{EnsembleConfig, PriorMode, RegenConfig, TrainConfig};
pub use model::{average, margin, Ensemble, SubModel, TrainingReport};
pub use regen::{dimension_scores, lowest_dimensions, neuralhd_regenerate, RegenEvent};
pub use votes::{argmax, predictive_entropy, top_two, VoteDistribution};
