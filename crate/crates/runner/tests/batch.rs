use std::path::PathBuf;

use gazeprompt_core::assembly::{
    build_prompt, AssemblyOptions, ChatMessage, ChatRequest, ContentPart, GazeMode, PromptInput, TaskKind, Templates,
};
use gazeprompt_core::gaze::{Fixation, ImageRecord, ScanPath, Split};
use gazeprompt_core::render::{phantom_image, BaseImage, RenderConfig};
use gazeprompt_runner::mock::{MockConfig, MockServer};
use gazeprompt_runner::{run_batch, run_items, BatchItem, EndpointConfig, RecordStatus, RecordStore};

fn endpoint(server: &MockServer) -> EndpointConfig {
    EndpointConfig {
        base_url: server.base_url(),
        model_name: "mock-vlm".into(),
        backoff_ms: 1,
        ..EndpointConfig::default()
    }
}

fn text_item(i: usize) -> gazeprompt_runner::Result<BatchItem> {
    Ok(BatchItem {
        image_id: format!("img-{i}"),
        reader_id: Some("r1".into()),
        task: "diagnosis".into(),
        gaze_mode: "none".into(),
        request: ChatRequest {
            model: "mock-vlm".into(),
            temperature: 0.0,
            max_tokens: 64,
            messages: vec![ChatMessage {
                role: "user".into(),
                content: vec![ContentPart::Text { text: format!("question {i}") }],
            }],
        },
    })
}

fn store(dir: &tempfile::TempDir) -> RecordStore {
    RecordStore::new(dir.path().join("records.jsonl"))
}

#[tokio::test]
async fn rerun_skips_completed_requests() {
    let server = MockServer::start(MockConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let ep = endpoint(&server);

    let first = run_items((0..10).map(text_item), &ep, &store).await.unwrap();
    assert_eq!((first.ok, first.failed, first.skipped), (10, 0, 0));
    assert_eq!(server.handle().request_count(), 10);

    let second = run_items((0..10).map(text_item), &ep, &store).await.unwrap();
    assert_eq!((second.ok, second.failed, second.skipped), (0, 0, 10));
    assert_eq!(server.handle().request_count(), 10);

    let records = store.load().unwrap();
    assert_eq!(records.len(), 10);
    assert!(records.iter().all(|r| r.status == RecordStatus::Ok && r.response_text == "OK"));
}

#[tokio::test]
async fn duplicate_requests_within_a_batch_are_sent_once() {
    let server = MockServer::start(MockConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let items = [0, 1, 1, 2, 0].into_iter().map(text_item);
    let summary = run_items(items, &endpoint(&server), &store(&dir)).await.unwrap();
    assert_eq!((summary.ok, summary.skipped), (3, 2));
    assert_eq!(server.handle().request_count(), 3);
}

#[tokio::test]
async fn temperature_rejection_falls_back_once() {
    let server = MockServer::start(
        MockConfig {
            min_temperature: Some(0.05),
            ..MockConfig::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let summary = run_items([text_item(0)], &endpoint(&server), &store).await.unwrap();
    assert_eq!(summary.ok, 1);

    let rec = &store.load().unwrap()[0];
    assert_eq!(rec.status, RecordStatus::Ok);
    assert!(rec.temperature_fallback);
    assert_eq!(rec.attempt_count, 2);
    assert_eq!(rec.attempts[0].temperature, 0.0);
    assert_eq!(rec.attempts[0].outcome, "temperature_rejected");
    assert_eq!(rec.attempts[0].http_status, Some(400));
    assert_eq!(rec.attempts[1].temperature, 0.1);
    assert_eq!(rec.attempts[1].outcome, "ok");

    let temps: Vec<f64> = server
        .handle()
        .requests()
        .iter()
        .map(|r| r["temperature"].as_f64().unwrap())
        .collect();
    assert_eq!(temps, vec![0.0, 0.1]);
}

#[tokio::test]
async fn rejected_fallback_is_recorded() {
    let server = MockServer::start(
        MockConfig {
            min_temperature: Some(0.5),
            ..MockConfig::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let summary = run_items([text_item(0)], &endpoint(&server), &store).await.unwrap();
    assert_eq!((summary.ok, summary.failed), (0, 1));
    let rec = &store.load().unwrap()[0];
    assert_eq!(rec.status, RecordStatus::RejectedTemperature);
    assert!(!rec.temperature_fallback);
    assert_eq!(rec.attempt_count, 2);
    assert!(rec.error.as_deref().unwrap().contains("temperature"));
    // not completed, so a resume retries it
    assert!(store.completed_digests().unwrap().is_empty());
}

#[tokio::test]
async fn server_errors_are_retried_then_give_up() {
    let server = MockServer::start(
        MockConfig {
            fail_first: 100,
            ..MockConfig::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let ep = EndpointConfig {
        max_retries: 2,
        ..endpoint(&server)
    };
    let summary = run_items([text_item(0)], &ep, &store).await.unwrap();
    assert_eq!(summary.failed, 1);
    let rec = &store.load().unwrap()[0];
    assert_eq!(rec.status, RecordStatus::Error);
    assert_eq!(rec.attempt_count, 3);
    assert!(rec.attempts.iter().all(|a| a.http_status == Some(503)));
    assert_eq!(server.handle().request_count(), 3);
}

#[tokio::test]
async fn transient_failure_recovers() {
    let server = MockServer::start(
        MockConfig {
            fail_first: 1,
            ..MockConfig::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let summary = run_items([text_item(0)], &endpoint(&server), &store).await.unwrap();
    assert_eq!(summary.ok, 1);
    let rec = &store.load().unwrap()[0];
    assert_eq!(rec.attempt_count, 2);
    assert!(!rec.temperature_fallback);
}

#[tokio::test]
async fn malformed_success_body_is_an_error_with_excerpt() {
    let server = MockServer::start(
        MockConfig {
            malformed: true,
            ..MockConfig::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let summary = run_items([text_item(0)], &endpoint(&server), &store).await.unwrap();
    assert_eq!(summary.failed, 1);
    let rec = &store.load().unwrap()[0];
    assert_eq!(rec.status, RecordStatus::Error);
    assert_eq!(rec.attempt_count, 1);
    assert!(rec.error.as_deref().unwrap().contains("not a completion"));
}

#[tokio::test]
async fn unreachable_endpoint_fails_every_item() {
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let ep = EndpointConfig {
        base_url: format!("http://{addr}/v1"),
        max_retries: 1,
        backoff_ms: 1,
        ..EndpointConfig::default()
    };
    let summary = run_items((0..3).map(text_item), &ep, &store).await.unwrap();
    assert_eq!((summary.ok, summary.failed), (0, 3));
    let records = store.load().unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.attempt_count == 2 && r.attempts[0].http_status.is_none()));
}

#[tokio::test]
async fn concurrency_never_exceeds_the_cap() {
    let server = MockServer::start(
        MockConfig {
            delay_ms: 30,
            ..MockConfig::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let ep = EndpointConfig {
        max_parallel: 3,
        ..endpoint(&server)
    };
    let summary = run_items((0..24).map(text_item), &ep, &store).await.unwrap();
    assert_eq!(summary.ok, 24);
    let peak = server.handle().max_in_flight();
    assert!(peak <= 3, "peak {peak}");
    assert!(peak >= 2, "requests were not overlapped (peak {peak})");
    assert_eq!(store.load().unwrap().len(), 24);
}

#[tokio::test]
async fn torn_trailing_record_is_ignored_and_resent() {
    let server = MockServer::start(MockConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);
    let ep = endpoint(&server);
    run_items((0..2).map(text_item), &ep, &store).await.unwrap();

    let mut text = std::fs::read_to_string(store.path()).unwrap();
    let cut = text.trim_end().rfind('\n').unwrap() + 1;
    text.truncate(cut + 20);
    std::fs::write(store.path(), &text).unwrap();
    assert_eq!(store.load().unwrap().len(), 1);

    let summary = run_items((0..2).map(text_item), &ep, &store).await.unwrap();
    assert_eq!((summary.ok, summary.skipped), (1, 1));
    assert_eq!(store.load().unwrap().len(), 2);
}

#[tokio::test]
async fn bundles_are_sent_with_images_and_task_budget() {
    let server = MockServer::start(MockConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = store(&dir);

    let record = ImageRecord {
        image_id: "cxr".into(),
        path: PathBuf::from("unused.png"),
        width: 64,
        height: 48,
    };
    let base = BaseImage::from_pixels(record, phantom_image(64, 48)).unwrap();
    let sp = ScanPath::new(
        "cxr",
        "r1",
        Split::Alpha,
        vec![
            Fixation { x: 10.0, y: 10.0, duration: 0.8, seq: 0 },
            Fixation { x: 40.0, y: 30.0, duration: 0.5, seq: 0 },
        ],
    )
    .unwrap();
    let exemplars = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let bundle = build_prompt(
        PromptInput {
            task: TaskKind::Diagnosis,
            gaze_mode: GazeMode::Video,
            scanpath: Some(&sp),
            image: &base,
            exemplars: &exemplars,
            findings: None,
        },
        &Templates::default(),
        &RenderConfig::default(),
        &AssemblyOptions::default(),
    )
    .unwrap();

    let summary = run_batch(vec![bundle], &endpoint(&server), &store).await.unwrap();
    assert_eq!(summary.ok, 1);
    let sent = &server.handle().requests()[0];
    assert_eq!(sent["model"], "mock-vlm");
    assert_eq!(sent["max_tokens"], 64);
    assert_eq!(sent["temperature"], 0.0);
    let parts = sent["messages"][0]["content"].as_array().unwrap();
    let images = parts.iter().filter(|p| p["type"] == "image_url").count();
    assert_eq!(images, 16);
    assert!(parts
        .iter()
        .filter(|p| p["type"] == "image_url")
        .all(|p| p["image_url"]["url"].as_str().unwrap().starts_with("data:image/png;base64,")));

    let rec = &store.load().unwrap()[0];
    assert_eq!(rec.task, "diagnosis");
    assert_eq!(rec.gaze_mode, "video");
    assert_eq!(rec.reader_id.as_deref(), Some("r1"));
}
