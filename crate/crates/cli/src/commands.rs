use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use gazeprompt_core::assembly::{
    build_prompt, load_exemplars, AssemblyOptions, GazeMode, PromptInput, TaskKind, Templates,
};
use gazeprompt_core::gaze::{
    generate_synthetic_manifest, ingest_fixation_csv, summarize_by_split, summarize_manifest, write_fixation_csv,
    DatasetManifest, ImageRecord, ScanPath, SynthManifestSpec,
};
use gazeprompt_core::render::{
    encode_png, phantom_image, plan_frames, render_fixation_text, render_heatmap, render_parallel, render_video,
    BaseImage,
};
use gazeprompt_core::scoring::{
    aggregate_table, emit_report, read_scores_csv, scale_scores_with, validate_raw, ReportFormat, ReportOptions,
    ScaledCell,
};
use gazeprompt_runner::mock::{MockConfig, MockServer};
use gazeprompt_runner::{run_items, BatchItem, RecordStore};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{
    Cli, Command, IngestArgs, MockServeArgs, RenderArgs, RenderMode, RunArgs, ScoreArgs, StatsArgs, SynthArgs,
};
use crate::config::{load_endpoint, overlay, PipelineConfig};

/// An error plus the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_USAGE, error: error.into() }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_RUNTIME, error: error.into() }
    }
}

impl From<gazeprompt_core::Error> for Failure {
    fn from(e: gazeprompt_core::Error) -> Self {
        use gazeprompt_core::Error as E;
        match e {
            E::Io { .. } | E::Image { .. } | E::Encode(_) => Self::runtime(e),
            _ => Self::usage(e),
        }
    }
}

impl From<gazeprompt_runner::Error> for Failure {
    fn from(e: gazeprompt_runner::Error) -> Self {
        use gazeprompt_runner::Error as E;
        match e {
            E::Core(inner) => inner.into(),
            E::Config(_) | E::MissingCredential(_) => Self::usage(e),
            _ => Self::runtime(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

pub fn dispatch(cli: Cli) -> CmdResult {
    let mut cfg = match &cli.config {
        Some(path) => {
            require_file(path)?;
            PipelineConfig::load(path).map_err(Failure::usage)?
        }
        None => PipelineConfig::default(),
    };
    overlay(&mut cfg.paths.out, cli.out.map(Some));

    match cli.command {
        Command::Ingest(a) => ingest(cfg, a),
        Command::Synth(a) => synth(cfg, a),
        Command::Render(a) => render(cfg, a),
        Command::Run(a) => run(cfg, a),
        Command::Score(a) => score(cfg, a),
        Command::Stats(a) => stats(cfg, a),
        Command::MockServe(a) => mock_serve(a),
    }
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(anyhow!("{}: no such file", path.display())))
    }
}

fn create_out(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::runtime)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::runtime)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    s.push('\n');
    Ok(s)
}

/// Records the merged configuration next to the outputs.
fn echo_config(cfg: &PipelineConfig, command: &str) -> CmdResult {
    let out = cfg.out_dir();
    create_out(&out)?;
    let body = to_json(&json!({ "command": command, "config": cfg }))?;
    write_text(&out.join(format!("resolved_config.{command}.json")), &body)
}

fn required_path(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    let path = flag
        .or_else(|| configured.clone())
        .ok_or_else(|| Failure::usage(anyhow!("no {name} given; pass --{name} or set paths.{name}")))?;
    require_file(&path)?;
    Ok(path)
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

/// Keeps ids usable as single path components.
fn path_component(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    match s.as_str() {
        "" | "." | ".." => format!("_{s}"),
        _ => s,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageRow {
    image_id: String,
    path: PathBuf,
    width: u32,
    height: u32,
}

fn load_image_table(path: &Path) -> Result<BTreeMap<String, ImageRecord>, Failure> {
    let mut records = Vec::new();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        records = DatasetManifest::load(path)?.images;
    } else {
        let base = path.parent().unwrap_or(Path::new(""));
        let file = File::open(path).map_err(|e| Failure::runtime(anyhow!("{}: {e}", path.display())))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers().map_err(gazeprompt_core::Error::from)?.clone();
        for col in ["image_id", "path", "width", "height"] {
            if !headers.iter().any(|h| h == col) {
                return Err(gazeprompt_core::Error::MissingColumn(col.into()).into());
            }
        }
        for row in reader.deserialize::<ImageRow>() {
            let row = row.map_err(gazeprompt_core::Error::from)?;
            records.push(ImageRecord {
                image_id: row.image_id,
                path: base.join(row.path),
                width: row.width,
                height: row.height,
            });
        }
    }
    let mut index = BTreeMap::new();
    for mut rec in records {
        rec.path = absolute(&rec.path);
        if rec.width == 0 || rec.height == 0 {
            return Err(Failure::usage(anyhow!("image {} has zero size", rec.image_id)));
        }
        if index.insert(rec.image_id.clone(), rec).is_some() {
            return Err(Failure::usage(anyhow!("{}: duplicate image id", path.display())));
        }
    }
    Ok(index)
}

fn ingest(mut cfg: PipelineConfig, a: IngestArgs) -> CmdResult {
    if a.normalized {
        cfg.ingest.normalized_coords = true;
    }
    overlay(&mut cfg.ingest.default_split, a.default_split);
    require_file(&a.fixations)?;
    require_file(&a.images)?;
    echo_config(&cfg, "ingest")?;

    let index = load_image_table(&a.images)?;
    let file = File::open(&a.fixations).map_err(|e| Failure::runtime(anyhow!("{}: {e}", a.fixations.display())))?;
    let (scanpaths, report) = ingest_fixation_csv(BufReader::new(file), &index, &cfg.ingest)?;
    for issue in &report.issues {
        log::warn!("{} line {}: {}", a.fixations.display(), issue.line, issue.reason);
    }

    // only images that carry gaze data
    let used: std::collections::BTreeSet<&str> = scanpaths.iter().map(|s| s.image_id.as_str()).collect();
    let images = index.values().filter(|r| used.contains(r.image_id.as_str())).cloned().collect();
    let manifest = DatasetManifest::new(images, scanpaths);
    manifest.validate()?;

    let out = cfg.out_dir();
    let manifest_path = a.manifest_out.unwrap_or_else(|| out.join("manifest.json"));
    if let Some(dir) = manifest_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_out(dir)?;
    }
    manifest.save(&manifest_path)?;
    let report_json = to_json(&report)?;
    write_text(&out.join("ingest_report.json"), &report_json)?;
    print!("{report_json}");
    Ok(())
}

fn synth(cfg: PipelineConfig, a: SynthArgs) -> CmdResult {
    let out = cfg.out_dir();
    echo_config(&cfg, "synth")?;
    let spec = SynthManifestSpec {
        seed: a.seed,
        n_images: a.n_images,
        n_scanpaths: a.n_scanpaths,
        split: a.split,
        width: a.width,
        height: a.height,
        image_path: PathBuf::from("phantom.png"),
        fixation_count: (a.min_fixations, a.max_fixations),
        duration_s: (a.min_duration, a.max_duration),
    };
    let manifest = generate_synthetic_manifest(&spec)?;

    write_bytes(&out.join("phantom.png"), &encode_png(&phantom_image(a.width, a.height))?)?;
    manifest.save(&out.join("manifest.json"))?;

    let csv_path = out.join("fixations.csv");
    let file = File::create(&csv_path).map_err(|e| Failure::runtime(anyhow!("{}: {e}", csv_path.display())))?;
    let mut sink = BufWriter::new(file);
    write_fixation_csv(&manifest.scanpaths, &mut sink)?;
    sink.flush().map_err(Failure::runtime)?;

    let table_path = out.join("images.csv");
    let mut table = csv::Writer::from_path(&table_path).map_err(gazeprompt_core::Error::from)?;
    for img in &manifest.images {
        table
            .serialize(ImageRow {
                image_id: img.image_id.clone(),
                path: img.path.clone(),
                width: img.width,
                height: img.height,
            })
            .map_err(gazeprompt_core::Error::from)?;
    }
    table.flush().map_err(Failure::runtime)?;

    print!("{}", to_json(&summarize_manifest(&manifest))?);
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::runtime)
}

fn group_by_image(manifest: &DatasetManifest) -> Vec<(&ImageRecord, Vec<&ScanPath>)> {
    let mut groups: BTreeMap<&str, Vec<&ScanPath>> = BTreeMap::new();
    for sp in &manifest.scanpaths {
        groups.entry(sp.image_id.as_str()).or_default().push(sp);
    }
    manifest
        .images
        .iter()
        .filter_map(|img| groups.remove(img.image_id.as_str()).map(|sps| (img, sps)))
        .collect()
}

fn render(mut cfg: PipelineConfig, a: RenderArgs) -> CmdResult {
    overlay(&mut cfg.render.fps, a.fps);
    overlay(&mut cfg.render.k, a.k);
    overlay(&mut cfg.render.dot_radius_px, a.radius);
    overlay(&mut cfg.render.workers, a.workers);
    cfg.render.validate()?;
    let manifest_path = required_path(a.manifest, &cfg.paths.manifest, "manifest")?;
    cfg.paths.manifest = Some(manifest_path.clone());
    echo_config(&cfg, "render")?;

    let manifest = DatasetManifest::load(&manifest_path)?;
    let mode_dir = match a.mode {
        RenderMode::Video => "video",
        RenderMode::Heatmap => "heatmap",
        RenderMode::Text => "text",
    };
    let root = cfg.out_dir().join("render").join(mode_dir);
    let groups = group_by_image(&manifest);
    let render_cfg = &cfg.render;
    let ordering = cfg.run.fixation_ordering;

    let results = render_parallel(&groups, render_cfg.workers, |(record, scanpaths)| {
        let base = match a.mode {
            RenderMode::Text => None,
            _ => Some(BaseImage::load(record)?),
        };
        for sp in scanpaths {
            let dir = root.join(path_component(&sp.image_id)).join(path_component(&sp.reader_id));
            match (a.mode, &base) {
                (RenderMode::Video, Some(base)) => {
                    let plan = plan_frames(sp, render_cfg)?;
                    render_video(base, sp, &plan, render_cfg)?.write(&dir)?;
                }
                (RenderMode::Heatmap, Some(base)) => render_heatmap(base, sp, render_cfg)?.write(&dir)?,
                _ => {
                    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
                    let mut text = render_fixation_text(sp, record, ordering);
                    text.push('\n');
                    let path = dir.join("fixations.txt");
                    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
                }
            }
        }
        Ok::<usize, gazeprompt_core::Error>(scanpaths.len())
    })?;

    let mut rendered = 0;
    for r in results {
        rendered += r?;
    }
    log::info!("rendered {rendered} scanpath(s) to {}", root.display());
    print!(
        "{}",
        to_json(&json!({ "mode": mode_dir, "scanpaths": rendered, "dir": root }))?
    );
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> gazeprompt_core::Error {
    gazeprompt_core::Error::Io { path: path.to_path_buf(), source }
}

/// One request to build: a task over a scanpath, or over a bare image when
/// no gaze is attached.
struct Job<'a> {
    task: TaskKind,
    image: &'a ImageRecord,
    scanpath: Option<&'a ScanPath>,
    findings: Option<&'a str>,
}

fn plan_jobs<'a>(
    manifest: &'a DatasetManifest,
    tasks: &[TaskKind],
    gaze_mode: GazeMode,
) -> Result<Vec<Job<'a>>, Failure> {
    let mut jobs = Vec::new();
    let mut missing = Vec::new();
    for (image, scanpaths) in group_by_image(manifest) {
        let targets: Vec<Option<&ScanPath>> = match gaze_mode {
            GazeMode::None => vec![None],
            _ => scanpaths.iter().map(|s| Some(*s)).collect(),
        };
        for sp in targets {
            for &task in tasks {
                let findings = if task == TaskKind::ImpressionGeneration {
                    let reader = sp.map(|s| s.reader_id.as_str()).or_else(|| scanpaths.first().map(|s| s.reader_id.as_str()));
                    let found = reader
                        .and_then(|r| manifest.report(&image.image_id, r))
                        .map(|r| r.findings.as_str());
                    if found.is_none() {
                        missing.push(format!("{}/{}", image.image_id, reader.unwrap_or("?")));
                    }
                    found
                } else {
                    None
                };
                jobs.push(Job { task, image, scanpath: sp, findings });
            }
        }
    }
    if !missing.is_empty() {
        let shown: Vec<_> = missing.iter().take(5).cloned().collect();
        return Err(Failure::usage(anyhow!(
            "impression generation needs findings; {} scanpath(s) have no report (e.g. {})",
            missing.len(),
            shown.join(", ")
        )));
    }
    Ok(jobs)
}

fn run(mut cfg: PipelineConfig, a: RunArgs) -> CmdResult {
    if let Some(path) = &a.endpoint_config {
        require_file(path)?;
        cfg.endpoint = load_endpoint(path).map_err(Failure::usage)?;
    }
    overlay(&mut cfg.endpoint.base_url, a.base_url);
    overlay(&mut cfg.endpoint.model_name, a.model);
    overlay(&mut cfg.endpoint.max_parallel, a.max_parallel);
    overlay(&mut cfg.endpoint.max_retries, a.max_retries);
    if !a.tasks.is_empty() {
        cfg.run.tasks = a.tasks;
    }
    overlay(&mut cfg.run.gaze_mode, a.gaze_mode);
    if a.strict {
        cfg.run.strict = true;
    }
    let manifest_path = required_path(a.manifest, &cfg.paths.manifest, "manifest")?;
    cfg.paths.manifest = Some(manifest_path.clone());
    overlay(&mut cfg.paths.templates, a.templates.map(Some));
    overlay(&mut cfg.paths.exemplars, a.exemplars.map(Some));
    overlay(&mut cfg.paths.records, a.records.map(Some));

    if cfg.run.tasks.is_empty() {
        return Err(Failure::usage(anyhow!("no task given; pass --task or set run.tasks")));
    }
    cfg.endpoint.validate()?;
    cfg.endpoint.credential()?;
    cfg.render.validate()?;
    for p in [&cfg.paths.templates, &cfg.paths.exemplars].into_iter().flatten() {
        require_file(p)?;
    }
    echo_config(&cfg, "run")?;

    let manifest = DatasetManifest::load(&manifest_path)?;
    let templates = match &cfg.paths.templates {
        Some(p) => Templates::load(p)?,
        None => Templates::default(),
    };
    let exemplars = match &cfg.paths.exemplars {
        Some(p) => load_exemplars(p)?,
        None => Vec::new(),
    };
    let options = AssemblyOptions {
        expected_exemplars: cfg.run.expected_exemplars,
        strict: cfg.run.strict,
        fixation_ordering: cfg.run.fixation_ordering,
    };
    let gaze_mode = cfg.run.gaze_mode;
    let jobs = plan_jobs(&manifest, &cfg.run.tasks, gaze_mode)?;

    let records = cfg.paths.records.clone().unwrap_or_else(|| cfg.out_dir().join("records.jsonl"));
    if let Some(dir) = records.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_out(dir)?;
    }
    let store = RecordStore::new(&records);
    if !a.resume {
        store.truncate()?;
    }

    // jobs are grouped by image, so one cached image suffices
    let mut cached: Option<BaseImage> = None;
    let mut warned = false;
    let endpoint = cfg.endpoint.clone();
    let render_cfg = cfg.render.clone();
    let items = jobs.into_iter().map(move |job| {
        if cached.as_ref().map(|b| &b.record) != Some(job.image) {
            cached = Some(BaseImage::load(job.image)?);
        }
        let base = cached.as_ref().expect("just loaded");
        let bundle = build_prompt(
            PromptInput {
                task: job.task,
                gaze_mode,
                scanpath: job.scanpath,
                image: base,
                exemplars: &exemplars,
                findings: job.findings,
            },
            &templates,
            &render_cfg,
            &options,
        )?;
        if !warned {
            for w in &bundle.warnings {
                log::warn!("{w}");
            }
            warned = true;
        }
        BatchItem::from_bundle(&bundle, &endpoint)
    });

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::runtime)?;
    let summary = runtime.block_on(run_items(items, &cfg.endpoint, &store))?;
    print!("{}", to_json(&json!({ "records": records, "summary": summary }))?);
    if summary.failed > 0 {
        return Err(Failure::runtime(anyhow!(
            "{} request(s) failed; see {}",
            summary.failed,
            records.display()
        )));
    }
    Ok(())
}

fn score(mut cfg: PipelineConfig, a: ScoreArgs) -> CmdResult {
    overlay(&mut cfg.score.baseline, a.baseline.map(Some));
    overlay(&mut cfg.score.baseline_method, a.baseline_method.map(Some));
    overlay(&mut cfg.score.base_method, a.base_method);
    if !a.exclude_best.is_empty() {
        cfg.score.exclude_best = a.exclude_best;
    }
    require_file(&a.scores_csv)?;
    echo_config(&cfg, "score")?;

    let file = File::open(&a.scores_csv).map_err(|e| Failure::runtime(anyhow!("{}: {e}", a.scores_csv.display())))?;
    let raw = read_scores_csv(BufReader::new(file))?;
    let cells: Vec<ScaledCell> = if a.prescaled {
        validate_raw(&raw)?;
        raw.into_iter()
            .map(|r| ScaledCell {
                model_id: r.model_id,
                method_id: r.method_id,
                metric_id: r.metric_id,
                task: r.task,
                split: r.split,
                scaled: r.value,
            })
            .collect()
    } else {
        let baseline = cfg
            .score
            .baseline
            .as_deref()
            .ok_or_else(|| Failure::usage(anyhow!("no baseline model; pass --baseline or --prescaled")))?;
        scale_scores_with(&raw, baseline, cfg.score.baseline_method.as_deref())?
    };
    let table = aggregate_table(&cells, &cfg.score.base_method)?;
    let options = ReportOptions {
        excluded_from_best: cfg.score.exclude_best.clone(),
    };
    let markdown = emit_report(&table, ReportFormat::Markdown, &options)?;
    let csv = emit_report(&table, ReportFormat::Csv, &options)?;
    let out = cfg.out_dir();
    write_text(&out.join("score_table.md"), &markdown)?;
    write_text(&out.join("score_table.csv"), &csv)?;
    print!("{markdown}");
    Ok(())
}

fn stats(mut cfg: PipelineConfig, a: StatsArgs) -> CmdResult {
    let manifest_path = required_path(a.manifest, &cfg.paths.manifest, "manifest")?;
    cfg.paths.manifest = Some(manifest_path.clone());
    echo_config(&cfg, "stats")?;
    let manifest = DatasetManifest::load(&manifest_path)?;
    let body = to_json(&json!({
        "overall": summarize_manifest(&manifest),
        "by_split": summarize_by_split(&manifest),
    }))?;
    write_text(&cfg.out_dir().join("stats.json"), &body)?;
    print!("{body}");
    Ok(())
}

fn mock_serve(a: MockServeArgs) -> CmdResult {
    let server = MockServer::start(
        MockConfig {
            reply: a.reply,
            min_temperature: a.min_temperature,
            fail_first: a.fail_first,
            ..MockConfig::default()
        },
        a.port,
    )
    .map_err(Failure::runtime)?;
    println!("{}", server.base_url());
    std::io::stdout().flush().ok();
    server.wait();
    Ok(())
}
