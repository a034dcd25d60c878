pub mod config;
pub mod correlation;
pub mod export;
pub mod fitting;
pub mod optics;
pub mod pipeline;
pub mod propagation;
pub mod rng;
pub mod sensor;
pub mod source;
pub mod stack;
pub mod stats;
mod czt;
pub use optics::{DetectorSpec, FiberSpec};
pub use source::SeedSpec;
