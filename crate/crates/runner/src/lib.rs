//! Dispatches prompt bundles to a chat-completions endpoint with bounded
//! concurrency, retries and a temperature fallback, persisting one JSONL
//! record per request. Completed requests are skipped on resume.

mod batch;
mod client;
mod config;
mod error;
pub mod mock;
mod record;

pub use batch::{run_batch, run_items, BatchItem, BatchSummary};
pub use client::{classify_response, ResponseClass};
pub use config::EndpointConfig;
pub use error::{Error, Result};
pub use record::{request_digest, AttemptTrace, InferenceRecord, RecordStatus, RecordStore};
