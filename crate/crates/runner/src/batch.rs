use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;
use gazeprompt_core::assembly::{serialize_bundle, ChatRequest, PromptBundle};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Semaphore};
use tokio::task::JoinSet;
use uuid::Uuid;

use crate::client::{classify_response, ResponseClass};
use crate::record::{request_digest, AttemptTrace, InferenceRecord, RecordStatus, RecordStore};
use crate::{EndpointConfig, Error, Result};

/// A serialized request plus the provenance recorded with its result.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub image_id: String,
    pub reader_id: Option<String>,
    pub task: String,
    pub gaze_mode: String,
    pub request: ChatRequest,
}

impl BatchItem {
    /// Serializes `bundle` for `endpoint`: the endpoint's model name and
    /// initial temperature replace the bundle defaults.
    pub fn from_bundle(bundle: &PromptBundle, endpoint: &EndpointConfig) -> Result<Self> {
        let mut request = serialize_bundle(bundle, &endpoint.model_name)?;
        request.temperature = endpoint.temperature;
        Ok(Self {
            image_id: bundle.image_id.clone(),
            reader_id: bundle.reader_id.clone(),
            task: bundle.task.to_string(),
            gaze_mode: bundle.gaze_mode.to_string(),
            request,
        })
    }

    pub fn digest(&self) -> Result<String> {
        Ok(request_digest(&self.request.to_bytes()?))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub ok: usize,
    pub failed: usize,
    pub skipped: usize,
}

struct Dispatcher {
    client: reqwest::Client,
    url: String,
    credential: Option<String>,
    endpoint: EndpointConfig,
}

impl Dispatcher {
    async fn send(&self, request: &ChatRequest) -> std::result::Result<(u16, String), String> {
        let body = request.to_bytes().map_err(|e| e.to_string())?;
        let mut req = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(token) = &self.credential {
            req = req.bearer_auth(token);
        }
        let resp = req.send().await.map_err(|e| format!("transport: {e}"))?;
        let status = resp.status().as_u16();
        let text = resp.text().await.map_err(|e| format!("transport: {e}"))?;
        Ok((status, text))
    }

    async fn dispatch(&self, item: BatchItem, digest: String) -> InferenceRecord {
        let started = Instant::now();
        let max_attempts = self.endpoint.max_retries + 1;
        let mut request = item.request;
        let mut fallback_used = false;
        let mut retries = 0u32;
        let mut attempts: Vec<AttemptTrace> = Vec::new();

        let (status, response_text, error) = loop {
            let n = attempts.len() as u32 + 1;
            let (class, http_status) = match self.send(&request).await {
                Ok((code, body)) => (classify_response(code, &body), Some(code)),
                Err(e) => (ResponseClass::Retryable(e), None),
            };
            let outcome = match &class {
                ResponseClass::Ok(_) => "ok".to_string(),
                ResponseClass::TemperatureRejected(_) => "temperature_rejected".to_string(),
                ResponseClass::Retryable(m) | ResponseClass::Fatal(m) | ResponseClass::Malformed(m) => m.clone(),
            };
            attempts.push(AttemptTrace {
                attempt: n,
                temperature: request.temperature,
                outcome,
                http_status,
            });
            match class {
                ResponseClass::Ok(text) => break (RecordStatus::Ok, text, None),
                ResponseClass::TemperatureRejected(msg) => {
                    let fallback = self.endpoint.temperature_fallback;
                    if !fallback_used && n < max_attempts && request.temperature != fallback {
                        log::warn!(
                            "{}: temperature {} rejected, retrying at {}",
                            item.image_id, request.temperature, fallback
                        );
                        fallback_used = true;
                        request.temperature = fallback;
                        continue;
                    }
                    break (RecordStatus::RejectedTemperature, String::new(), Some(msg));
                }
                ResponseClass::Retryable(msg) => {
                    if n < max_attempts {
                        let delay = self.endpoint.backoff_ms.saturating_mul(1u64 << retries.min(16));
                        retries += 1;
                        log::debug!("{}: attempt {n} failed ({msg}), retrying in {delay} ms", item.image_id);
                        tokio::time::sleep(Duration::from_millis(delay)).await;
                        continue;
                    }
                    break (RecordStatus::Error, String::new(), Some(msg));
                }
                ResponseClass::Fatal(msg) | ResponseClass::Malformed(msg) => {
                    break (RecordStatus::Error, String::new(), Some(msg))
                }
            }
        };

        InferenceRecord {
            request_id: Uuid::new_v4(),
            image_id: item.image_id,
            reader_id: item.reader_id,
            task: item.task,
            gaze_mode: item.gaze_mode,
            request_digest: digest,
            response_text,
            status,
            temperature_fallback: fallback_used && status == RecordStatus::Ok,
            latency_ms: started.elapsed().as_millis() as u64,
            attempt_count: attempts.len() as u32,
            attempts,
            error,
            timestamp: Utc::now(),
        }
    }
}

fn tally(status: Option<RecordStatus>, summary: &mut BatchSummary) {
    match status {
        Some(RecordStatus::Ok) => summary.ok += 1,
        _ => summary.failed += 1,
    }
}

/// Sends every bundle once, skipping requests whose digest already has an
/// `ok` record in `store` (or appeared earlier in this batch). At most
/// `endpoint.max_parallel` requests are in flight; records are appended by a
/// single writer.
pub async fn run_batch<I>(bundles: I, endpoint: &EndpointConfig, store: &RecordStore) -> Result<BatchSummary>
where
    I: IntoIterator<Item = PromptBundle>,
{
    let items = bundles
        .into_iter()
        .map(|b| BatchItem::from_bundle(&b, endpoint));
    run_items(items, endpoint, store).await
}

pub async fn run_items<I>(items: I, endpoint: &EndpointConfig, store: &RecordStore) -> Result<BatchSummary>
where
    I: IntoIterator<Item = Result<BatchItem>>,
{
    endpoint.validate()?;
    let dispatcher = Arc::new(Dispatcher {
        client: reqwest::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_s))
            .build()?,
        url: endpoint.completions_url(),
        credential: endpoint.credential()?,
        endpoint: endpoint.clone(),
    });

    let mut seen = store.completed_digests()?;
    let mut writer = store.open_append()?;
    let (tx, mut rx) = mpsc::channel::<InferenceRecord>(endpoint.max_parallel * 2);
    let writer_task = tokio::task::spawn_blocking(move || -> Result<()> {
        while let Some(record) = rx.blocking_recv() {
            writer.append(&record)?;
        }
        Ok(())
    });

    let permits = Arc::new(Semaphore::new(endpoint.max_parallel));
    let mut tasks: JoinSet<Option<RecordStatus>> = JoinSet::new();
    let mut summary = BatchSummary::default();

    for item in items {
        let item = item?;
        let digest = item.digest()?;
        if !seen.insert(digest.clone()) {
            summary.skipped += 1;
            continue;
        }
        let permit = permits.clone().acquire_owned().await.expect("semaphore never closed");
        while let Some(done) = tasks.try_join_next() {
            tally(done.ok().flatten(), &mut summary);
        }
        let dispatcher = dispatcher.clone();
        let tx = tx.clone();
        tasks.spawn(async move {
            let record = dispatcher.dispatch(item, digest).await;
            drop(permit);
            let status = record.status;
            tx.send(record).await.ok().map(|_| status)
        });
    }
    while let Some(done) = tasks.join_next().await {
        tally(done.ok().flatten(), &mut summary);
    }
    drop(tx);
    writer_task
        .await
        .map_err(|e| Error::Writer(e.to_string()))??;
    Ok(summary)
}
