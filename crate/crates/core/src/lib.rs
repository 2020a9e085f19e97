//! Core pipeline for turning radiologist fixation scanpaths into multimodal
//! prompts and scoring model outputs against a baseline model.
//!
//! * [`gaze`] – fixation data model, CSV ingestion, manifests, synthetic data.
//! * [`render`] – gaze video frames, duration-shaded heatmaps, fixation text.
//! * [`assembly`] – task prompts and the chat-completions request body.
//! * [`scoring`] – baseline-relative scaled scores and summary tables.

pub mod assembly;
pub mod error;
pub mod gaze;
pub mod numeric;
pub mod render;
pub mod scoring;

pub use error::{Error, Result};
