use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RenderConfig;
use crate::gaze::ScanPath;
use crate::numeric::to_micros;
use crate::Result;

/// Frame budget of a full gaze video and the frames sampled from it.
/// Frame indices are 1-based into the virtual full video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePlan {
    pub fps: u32,
    pub k: usize,
    pub per_fixation_frames: Vec<u64>,
    pub total_frames: u64,
    pub sampled_indices: Vec<u64>,
    /// Fixation ordinal (1-based) shown by each sampled frame.
    pub sampled_fixations: Vec<u32>,
}

impl FramePlan {
    /// Fixation ordinal owning virtual frame `index` (1-based).
    pub fn fixation_of_frame(&self, index: u64) -> Option<u32> {
        if index == 0 || index > self.total_frames {
            return None;
        }
        let mut end = 0u64;
        for (i, &f) in self.per_fixation_frames.iter().enumerate() {
            end += f;
            if index <= end {
                return Some(i as u32 + 1);
            }
        }
        None
    }

    pub fn source_fixation_of_frame(&self) -> BTreeMap<u64, u32> {
        self.sampled_indices
            .iter()
            .copied()
            .zip(self.sampled_fixations.iter().copied())
            .collect()
    }
}

/// `max(1, round_half_up(duration × fps))`, evaluated on the duration in
/// whole microseconds so decimal ties round up exactly.
pub fn frames_for_duration(duration_s: f64, fps: u32) -> u64 {
    let micros = to_micros(duration_s).max(0) as u128;
    let frames = (micros * u128::from(fps) + 500_000) / 1_000_000;
    frames.max(1) as u64
}

/// `clamp(floor(j × total / k), 1, total)` for 1-based `j`.
pub fn sampled_index(j: usize, total: u64, k: usize) -> u64 {
    let raw = (j as u128 * u128::from(total)) / k as u128;
    (raw as u64).clamp(1, total)
}

pub fn plan_frames(scanpath: &ScanPath, config: &RenderConfig) -> Result<FramePlan> {
    config.validate()?;
    if scanpath.is_empty() {
        return Err(crate::Error::Argument("scanpath has no fixations".into()));
    }
    let per_fixation_frames: Vec<u64> = scanpath
        .fixations()
        .iter()
        .map(|f| frames_for_duration(f.duration, config.fps))
        .collect();
    let total_frames = per_fixation_frames.iter().sum();

    let sampled_indices: Vec<u64> = (1..=config.k)
        .map(|j| sampled_index(j, total_frames, config.k))
        .collect();

    // indices are non-decreasing, so one forward walk over the cumulative
    // ranges attributes every sample
    let mut sampled_fixations = Vec::with_capacity(config.k);
    let mut fixation = 0usize;
    let mut range_end = per_fixation_frames[0];
    for &idx in &sampled_indices {
        while idx > range_end {
            fixation += 1;
            range_end += per_fixation_frames[fixation];
        }
        sampled_fixations.push(fixation as u32 + 1);
    }

    Ok(FramePlan {
        fps: config.fps,
        k: config.k,
        per_fixation_frames,
        total_frames,
        sampled_indices,
        sampled_fixations,
    })
}
