//! Layered configuration: built-in defaults, then the TOML file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gazeprompt_core::assembly::{GazeMode, TaskKind};
use gazeprompt_core::gaze::IngestConfig;
use gazeprompt_core::render::{FixationOrdering, RenderConfig};
use gazeprompt_runner::EndpointConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tasks: Vec<TaskKind>,
    pub gaze_mode: GazeMode,
    pub fixation_ordering: FixationOrdering,
    pub expected_exemplars: usize,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tasks: Vec::new(),
            gaze_mode: GazeMode::None,
            fixation_ordering: FixationOrdering::DurationDesc,
            expected_exemplars: 3,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub baseline: Option<String>,
    pub baseline_method: Option<String>,
    pub base_method: String,
    pub exclude_best: Vec<String>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            baseline: None,
            baseline_method: None,
            base_method: "base".into(),
            exclude_best: Vec::new(),
        }
    }
}

/// Everything a subcommand may read, after merging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ingest: IngestConfig,
    pub render: RenderConfig,
    pub endpoint: EndpointConfig,
    pub paths: PathsConfig,
    pub run: RunConfig,
    pub score: ScoreConfig,
}

impl PipelineConfig {
    /// Reads a config file. Relative paths in `[paths]` are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.manifest, &mut p.templates, &mut p.exemplars, &mut p.records, &mut p.out] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Reads a standalone endpoint file (the `[endpoint]` table's fields at top
/// level).
pub fn load_endpoint(path: &Path) -> anyhow::Result<EndpointConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `flag` wins over whatever is already in `slot`.
pub fn overlay<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
