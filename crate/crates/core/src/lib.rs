//! Evaluation engine for text-guided image editing.
//!
//! Detection archives produced by an external open-vocabulary detector are
//! combined with input and edited images to score each edit for edit
//! quality, subject preservation and background preservation. A separate
//! analysis measures how attributes are disentangled in an editor's latent
//! space.

pub mod detection;
pub mod disentangle;
pub mod evaluators;
pub mod model;
pub mod pipeline;
pub mod preservation;
pub mod vision;
