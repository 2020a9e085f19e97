use serde::{Deserialize, Serialize};

use crate::gaze::{ImageRecord, ScanPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FixationOrdering {
    /// Longest first; equal durations keep scan order.
    #[default]
    DurationDesc,
    Temporal,
}

/// One line per fixation with coordinates relative to the image size:
/// `fixation <seq>: x=<x/w>, y=<y/h>, duration=<t>s`.
pub fn render_fixation_text(scanpath: &ScanPath, image: &ImageRecord, ordering: FixationOrdering) -> String {
    let mut fixations: Vec<_> = scanpath.fixations().iter().collect();
    if ordering == FixationOrdering::DurationDesc {
        // stable sort keeps temporal order among ties
        fixations.sort_by(|a, b| b.duration.total_cmp(&a.duration));
    }
    fixations
        .iter()
        .map(|f| {
            let (rx, ry) = image.to_relative(f.x, f.y);
            format!("fixation {}: x={rx:.3}, y={ry:.3}, duration={:.2}s", f.seq, f.duration)
        })
        .collect::<Vec<_>>()
        .join("\n")
}
