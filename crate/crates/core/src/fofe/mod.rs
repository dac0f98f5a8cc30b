//! FOFE encoding, the base / mixture / application-dependent feed-forward
//! language models built on it, the NCE output head and model files.

mod config;
mod encoder;
mod examples;
mod io;
mod model;
mod nce;

pub use config::{hidden_for_budget, parameter_count, Architecture, FofeConfig, FofeMode};
pub use encoder::{fofe_context, fofe_encode};
pub use examples::ExampleSet;
pub use io::{from_bytes, load, save, to_bytes};
pub use model::{FofeModel, Objective};
pub use nce::{nce_loss, NceHead, DESK_NOISE_SAMPLES, FULL_NOISE_SAMPLES};
