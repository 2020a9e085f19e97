//! Gaze representations derived from a scanpath: sampled gaze-video frames,
//! a duration-shaded dot heatmap, and a fixation text listing.

mod heatmap;
mod plan;
mod raster;
mod text;
mod video;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use heatmap::{heatmap_opacity, render_heatmap, Heatmap, HeatmapDot};
pub use plan::{frames_for_duration, plan_frames, sampled_index, FramePlan};
pub use raster::{draw_disc, encode_png, phantom_image, BaseImage};
pub use text::{render_fixation_text, FixationOrdering};
pub use video::{render_frame, render_video, FrameEntry, FrameManifest, FrameSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub fps: u32,
    /// Number of frames sampled from the full gaze video.
    pub k: usize,
    pub dot_radius_px: u32,
    pub dot_color: [u8; 3],
    /// Opacity of the shortest possible fixation's heatmap dot.
    pub heatmap_alpha_min: f64,
    /// Worker threads for batch rendering; 0 uses one per core.
    pub workers: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            fps: 10,
            k: 16,
            dot_radius_px: 5,
            dot_color: [255, 0, 0],
            heatmap_alpha_min: 0.25,
            workers: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fps < 1 {
            return Err(Error::Argument("fps must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if self.dot_radius_px < 1 {
            return Err(Error::Argument("dot_radius_px must be at least 1".into()));
        }
        if !(self.heatmap_alpha_min > 0.0 && self.heatmap_alpha_min <= 1.0) {
            return Err(Error::Argument(format!(
                "heatmap_alpha_min must be in (0, 1], got {}",
                self.heatmap_alpha_min
            )));
        }
        Ok(())
    }
}

/// Maps `job` over `items` on a pool of `workers` threads (0 = one per core),
/// preserving input order in the output.
pub fn render_parallel<T, R, F>(items: &[T], workers: usize, job: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&job).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RenderConfig::default();
        c.validate().unwrap();
        assert_eq!((c.fps, c.k, c.dot_radius_px), (10, 16, 5));
        assert_eq!(c.dot_color, [255, 0, 0]);
    }

    #[test]
    fn invalid_configs_rejected() {
        for c in [
            RenderConfig { fps: 0, ..Default::default() },
            RenderConfig { k: 0, ..Default::default() },
            RenderConfig { dot_radius_px: 0, ..Default::default() },
            RenderConfig { heatmap_alpha_min: 0.0, ..Default::default() },
            RenderConfig { heatmap_alpha_min: 1.5, ..Default::default() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn parallel_map_keeps_order() {
        let out = render_parallel(&[1, 2, 3, 4, 5], 2, |x| x * 10).unwrap();
        assert_eq!(out, vec![10, 20, 30, 40, 50]);
    }
}
