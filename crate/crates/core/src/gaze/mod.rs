//! Fixation-level gaze data: domain types, dataset manifests and summary
//! statistics.

mod ingest;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numeric::round_half_up;
use crate::{Error, Result};

pub use ingest::{ingest_fixation_csv, write_fixation_csv, ColumnMap, IngestConfig, IngestReport, RowIssue};
pub use synth::{generate_synthetic_manifest, generate_synthetic_scanpaths, SynthManifestSpec, SynthParams};

pub const MANIFEST_VERSION: u32 = 1;

/// One gaze fixation in source-image pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
    /// Seconds, strictly positive.
    pub duration: f64,
    /// 1-based position in the scanpath.
    pub seq: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Alpha,
    Beta,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Alpha => "alpha",
            Split::Beta => "beta",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(Split::Alpha),
            "beta" => Ok(Split::Beta),
            other => Err(Error::Argument(format!("unknown split `{other}`"))),
        }
    }
}

/// The temporally ordered fixations one reader produced over one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPath {
    pub image_id: String,
    pub reader_id: String,
    pub split: Split,
    fixations: Vec<Fixation>,
}

impl ScanPath {
    /// Builds a scanpath from fixations in recording order. Sequence numbers
    /// are reassigned 1..=n.
    pub fn new(
        image_id: impl Into<String>,
        reader_id: impl Into<String>,
        split: Split,
        fixations: Vec<Fixation>,
    ) -> Result<Self> {
        if fixations.is_empty() {
            return Err(Error::Argument("scanpath has no fixations".into()));
        }
        let mut fixations = fixations;
        for (i, f) in fixations.iter_mut().enumerate() {
            if !f.duration.is_finite() || f.duration <= 0.0 {
                return Err(Error::Argument(format!(
                    "fixation {} has non-positive duration {}",
                    i + 1,
                    f.duration
                )));
            }
            if !f.x.is_finite() || !f.y.is_finite() || f.x < 0.0 || f.y < 0.0 {
                return Err(Error::Argument(format!(
                    "fixation {} has invalid coordinates ({}, {})",
                    i + 1,
                    f.x,
                    f.y
                )));
            }
            f.seq = i as u32 + 1;
        }
        Ok(Self {
            image_id: image_id.into(),
            reader_id: reader_id.into(),
            split,
            fixations,
        })
    }

    pub fn fixations(&self) -> &[Fixation] {
        &self.fixations
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }

    pub fn max_duration(&self) -> f64 {
        self.fixations.iter().map(|f| f.duration).fold(0.0, f64::max)
    }

    /// `image_id/reader_id`, used for output directory names and report keys.
    pub fn key(&self) -> String {
        format!("{}/{}", self.image_id, self.reader_id)
    }

    fn check(&self) -> Result<()> {
        if self.fixations.is_empty() {
            return Err(Error::Manifest(format!("scanpath {} has no fixations", self.key())));
        }
        for (i, f) in self.fixations.iter().enumerate() {
            if f.seq != i as u32 + 1 {
                return Err(Error::Manifest(format!(
                    "scanpath {}: fixation seq {} at position {}",
                    self.key(),
                    f.seq,
                    i + 1
                )));
            }
            if f.duration.is_nan() || f.duration <= 0.0 {
                return Err(Error::Manifest(format!(
                    "scanpath {}: fixation {} has duration {}",
                    self.key(),
                    f.seq,
                    f.duration
                )));
            }
        }
        Ok(())
    }
}

/// A still image that scanpaths refer to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

impl ImageRecord {
    /// Largest valid x coordinate (pixel-index space).
    pub fn max_x(&self) -> f64 {
        f64::from(self.width.saturating_sub(1))
    }

    pub fn max_y(&self) -> f64 {
        f64::from(self.height.saturating_sub(1))
    }

    /// Pixel → relative coordinates.
    pub fn to_relative(&self, x: f64, y: f64) -> (f64, f64) {
        (x / f64::from(self.width), y / f64::from(self.height))
    }

    /// Relative → pixel coordinates (unclamped).
    pub fn to_pixel(&self, rx: f64, ry: f64) -> (f64, f64) {
        (rx * f64::from(self.width), ry * f64::from(self.height))
    }

    /// Clamps a point into the image rectangle; returns whether it moved.
    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64, bool) {
        let cx = x.clamp(0.0, self.max_x());
        let cy = y.clamp(0.0, self.max_y());
        (cx, cy, cx != x || cy != y)
    }
}

/// Gold report texts dictated by one reader for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub image_id: String,
    pub reader_id: String,
    #[serde(default)]
    pub findings: String,
    #[serde(default)]
    pub impression: String,
    #[serde(default)]
    pub diagnosis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub manifest_version: u32,
    pub images: Vec<ImageRecord>,
    pub scanpaths: Vec<ScanPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reports: Option<Vec<ReportEntry>>,
}

impl DatasetManifest {
    pub fn new(images: Vec<ImageRecord>, scanpaths: Vec<ScanPath>) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            images,
            scanpaths,
            reports: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifest_version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest_version {}",
                self.manifest_version
            )));
        }
        let mut ids = HashSet::new();
        for img in &self.images {
            if img.width == 0 || img.height == 0 {
                return Err(Error::Manifest(format!("image {} has zero size", img.image_id)));
            }
            if !ids.insert(img.image_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate image_id {}", img.image_id)));
            }
        }
        let mut keys = HashSet::new();
        for sp in &self.scanpaths {
            if !ids.contains(sp.image_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "scanpath {} references unknown image",
                    sp.key()
                )));
            }
            sp.check()?;
            keys.insert((sp.image_id.as_str(), sp.reader_id.as_str()));
        }
        for r in self.reports.iter().flatten() {
            if !keys.contains(&(r.image_id.as_str(), r.reader_id.as_str())) {
                return Err(Error::Manifest(format!(
                    "report {}/{} has no matching scanpath",
                    r.image_id, r.reader_id
                )));
            }
        }
        Ok(())
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.image_id == image_id)
    }

    pub fn image_index(&self) -> BTreeMap<String, ImageRecord> {
        self.images
            .iter()
            .map(|i| (i.image_id.clone(), i.clone()))
            .collect()
    }

    pub fn report(&self, image_id: &str, reader_id: &str) -> Option<&ReportEntry> {
        self.reports
            .iter()
            .flatten()
            .find(|r| r.image_id == image_id && r.reader_id == reader_id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_json(&text)?;
        // relative image paths resolve against the manifest's directory
        if let Some(dir) = path.parent() {
            for img in &mut m.images {
                if img.path.is_relative() {
                    img.path = dir.join(&img.path);
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub images: usize,
    pub scanpaths: usize,
    pub reports: usize,
    /// Scanpaths per distinct image, rounded to 2 decimals.
    pub readers_per_image: f64,
}

pub fn summarize_manifest(manifest: &DatasetManifest) -> DatasetStats {
    summarize(&manifest.scanpaths, manifest.reports.as_deref().unwrap_or(&[]), None)
}

/// Per-split statistics; images are counted when at least one scanpath of
/// that split refers to them.
pub fn summarize_by_split(manifest: &DatasetManifest) -> BTreeMap<Split, DatasetStats> {
    let splits: BTreeSet<Split> = manifest.scanpaths.iter().map(|s| s.split).collect();
    splits
        .into_iter()
        .map(|split| {
            let stats = summarize(
                &manifest.scanpaths,
                manifest.reports.as_deref().unwrap_or(&[]),
                Some(split),
            );
            (split, stats)
        })
        .collect()
}

fn summarize(scanpaths: &[ScanPath], reports: &[ReportEntry], split: Option<Split>) -> DatasetStats {
    let selected: Vec<&ScanPath> = scanpaths
        .iter()
        .filter(|s| split.is_none_or(|sp| s.split == sp))
        .collect();
    let images: HashSet<&str> = selected.iter().map(|s| s.image_id.as_str()).collect();
    let keys: HashSet<(&str, &str)> = selected
        .iter()
        .map(|s| (s.image_id.as_str(), s.reader_id.as_str()))
        .collect();
    let reports = reports
        .iter()
        .filter(|r| keys.contains(&(r.image_id.as_str(), r.reader_id.as_str())))
        .count();
    let readers_per_image = if images.is_empty() {
        0.0
    } else {
        round_half_up(selected.len() as f64 / images.len() as f64, 2)
    };
    DatasetStats {
        images: images.len(),
        scanpaths: selected.len(),
        reports,
        readers_per_image,
    }
}
