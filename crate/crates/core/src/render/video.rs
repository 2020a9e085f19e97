use std::fs;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::raster::{draw_disc, encode_png, BaseImage};
use super::{FramePlan, RenderConfig};
use crate::gaze::{Fixation, ScanPath};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub file: String,
    /// Index into the virtual full video (1-based).
    pub index: u64,
    pub fixation_ordinal: u32,
    pub x: f64,
    pub y: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub image_id: String,
    pub reader_id: String,
    pub fps: u32,
    pub k: usize,
    pub total_frames: u64,
    pub frames: Vec<FrameEntry>,
}

/// The k sampled frames of a gaze video plus their provenance.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub frames: Vec<RgbImage>,
    pub manifest: FrameManifest,
}

impl FrameSet {
    /// Writes `frame_0001.png …` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (frame, entry) in self.frames.iter().zip(&self.manifest.frames) {
            let path = dir.join(&entry.file);
            fs::write(&path, encode_png(frame)?).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&self.manifest)?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

pub fn frame_file_name(position: usize) -> String {
    format!("frame_{position:04}.png")
}

fn check_inside(base: &BaseImage, f: &Fixation) -> Result<()> {
    let r = &base.record;
    if f.x < 0.0 || f.y < 0.0 || f.x > r.max_x() || f.y > r.max_y() {
        return Err(Error::Argument(format!(
            "fixation {} at ({}, {}) lies outside {}x{} image {}",
            f.seq, f.x, f.y, r.width, r.height, r.image_id
        )));
    }
    Ok(())
}

/// The base image with a single opaque dot at the fixation.
pub fn render_frame(base: &BaseImage, fixation: &Fixation, config: &RenderConfig) -> Result<RgbImage> {
    check_inside(base, fixation)?;
    let mut frame = base.pixels.clone();
    draw_disc(
        &mut frame,
        fixation.x,
        fixation.y,
        config.dot_radius_px,
        config.dot_color,
        1.0,
    );
    Ok(frame)
}

pub fn render_video(
    base: &BaseImage,
    scanpath: &ScanPath,
    plan: &FramePlan,
    config: &RenderConfig,
) -> Result<FrameSet> {
    if plan.per_fixation_frames.len() != scanpath.len() {
        return Err(Error::Consistency(format!(
            "plan covers {} fixations but scanpath {} has {}",
            plan.per_fixation_frames.len(),
            scanpath.key(),
            scanpath.len()
        )));
    }
    if plan.k != config.k || plan.fps != config.fps || plan.sampled_indices.len() != plan.k {
        return Err(Error::Consistency(format!(
            "plan (fps {}, k {}) does not match config (fps {}, k {})",
            plan.fps, plan.k, config.fps, config.k
        )));
    }
    if base.record.image_id != scanpath.image_id {
        return Err(Error::Consistency(format!(
            "scanpath {} rendered over image {}",
            scanpath.key(),
            base.record.image_id
        )));
    }

    let fixations = scanpath.fixations();
    let mut frames: Vec<RgbImage> = Vec::with_capacity(plan.k);
    let mut entries = Vec::with_capacity(plan.k);
    let mut previous: Option<u32> = None;
    for (pos, (&index, &ordinal)) in plan
        .sampled_indices
        .iter()
        .zip(&plan.sampled_fixations)
        .enumerate()
    {
        let fixation = &fixations[ordinal as usize - 1];
        // sampled ordinals are non-decreasing, so repeats are adjacent
        let frame = match (previous, frames.last()) {
            (Some(p), Some(last)) if p == ordinal => last.clone(),
            _ => render_frame(base, fixation, config)?,
        };
        previous = Some(ordinal);
        frames.push(frame);
        entries.push(FrameEntry {
            file: frame_file_name(pos + 1),
            index,
            fixation_ordinal: ordinal,
            x: fixation.x,
            y: fixation.y,
            duration: fixation.duration,
        });
    }

    Ok(FrameSet {
        frames,
        manifest: FrameManifest {
            image_id: scanpath.image_id.clone(),
            reader_id: scanpath.reader_id.clone(),
            fps: plan.fps,
            k: plan.k,
            total_frames: plan.total_frames,
            frames: entries,
        },
    })
}
