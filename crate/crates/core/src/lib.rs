//! Cross-domain continual transfer for a sparse target-domain conversion
//! model.
//!
//! The pipeline has two halves. Sample transfer picks source-domain records
//! near the target domain on the user-item interaction graph ([`graph`]) and
//! reweights them with a domain discriminator. Representation transfer
//! distills the sequence representation of a continually refreshed source
//! model into the target model through an adapter and a learned fusion gate
//! ([`models`], [`losses`]). [`trainer`] drives both over time windows and
//! [`harness`] runs the comparison suites.

pub mod datagen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod losses;
pub mod models;
pub mod numerics;
pub mod trainer;

pub use error::{EcatError, Result};
