use std::fs;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::raster::{draw_disc, encode_png, BaseImage};
use super::RenderConfig;
use crate::gaze::ScanPath;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapDot {
    pub fixation_ordinal: u32,
    pub x: f64,
    pub y: f64,
    pub duration: f64,
    pub opacity: f64,
}

#[derive(Debug, Clone)]
pub struct Heatmap {
    pub image_id: String,
    pub reader_id: String,
    pub alpha_min: f64,
    pub image: RgbImage,
    pub dots: Vec<HeatmapDot>,
}

#[derive(Serialize)]
struct HeatmapSidecar<'a> {
    image_id: &'a str,
    reader_id: &'a str,
    alpha_min: f64,
    dots: &'a [HeatmapDot],
}

impl Heatmap {
    /// Writes `heatmap.png` and `heatmap.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let png = dir.join("heatmap.png");
        fs::write(&png, encode_png(&self.image)?).map_err(|e| Error::io(&png, e))?;
        let sidecar = HeatmapSidecar {
            image_id: &self.image_id,
            reader_id: &self.reader_id,
            alpha_min: self.alpha_min,
            dots: &self.dots,
        };
        let json = dir.join("heatmap.json");
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }
}

/// Linear in `duration / max_duration`, floored at `alpha_min`; the longest
/// fixation is exactly opaque.
pub fn heatmap_opacity(duration: f64, max_duration: f64, alpha_min: f64) -> f64 {
    let ratio = duration / max_duration;
    if ratio >= 1.0 {
        1.0
    } else {
        alpha_min + (1.0 - alpha_min) * ratio
    }
}

/// One dot per fixation, composited in scan order so later fixations sit on
/// top of earlier ones.
pub fn render_heatmap(base: &BaseImage, scanpath: &ScanPath, config: &RenderConfig) -> Result<Heatmap> {
    config.validate()?;
    if scanpath.is_empty() {
        return Err(Error::Argument("scanpath has no fixations".into()));
    }
    let rec = &base.record;
    let max = scanpath.max_duration();
    let mut image = base.pixels.clone();
    let mut dots = Vec::with_capacity(scanpath.len());
    for f in scanpath.fixations() {
        if f.x > rec.max_x() || f.y > rec.max_y() {
            return Err(Error::Argument(format!(
                "fixation {} at ({}, {}) lies outside image {}",
                f.seq, f.x, f.y, rec.image_id
            )));
        }
        let opacity = heatmap_opacity(f.duration, max, config.heatmap_alpha_min);
        draw_disc(&mut image, f.x, f.y, config.dot_radius_px, config.dot_color, opacity);
        dots.push(HeatmapDot {
            fixation_ordinal: f.seq,
            x: f.x,
            y: f.y,
            duration: f.duration,
            opacity,
        });
    }
    Ok(Heatmap {
        image_id: scanpath.image_id.clone(),
        reader_id: scanpath.reader_id.clone(),
        alpha_min: config.heatmap_alpha_min,
        image,
        dots,
    })
}
