//! Complex hypervector algebra and the fractional power encoder.

mod encoder;
mod hypervector;

pub use encoder::{Encoder, NormalizationStats, PhaseMatrix, STD_FLOOR};
pub use hypervector::{bind, bundle, similarity, similarity_from_parts, Hypervector};
