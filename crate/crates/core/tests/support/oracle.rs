//! Brute-force reference implementations used as test oracles. Nothing here
//! calls into the frame planner or the disc rasterizer under test.

#![allow(dead_code)]

use gazeprompt_core::gaze::ScanPath;
use image::{Rgb, RgbImage};
use num_rational::Ratio;

/// Exact decimal value of a float's shortest round-trip representation.
pub fn decimal(value: f64) -> Ratio<i128> {
    let text = format!("{value}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: i128 = format!("{int}{frac}").parse().unwrap();
    Ratio::new(digits, 10i128.pow(frac.len() as u32))
}

/// `max(1, round_half_up(t × fps))` evaluated in exact rational arithmetic.
pub fn frames_for(duration: f64, fps: u32) -> u64 {
    let product = decimal(duration) * Ratio::from_integer(i128::from(fps));
    let rounded = (product + Ratio::new(1, 2)).floor().to_integer();
    rounded.max(1) as u64
}

pub fn total_frames(scanpath: &ScanPath, fps: u32) -> u64 {
    scanpath.fixations().iter().map(|f| frames_for(f.duration, fps)).sum()
}

/// Sampled 1-based indices by direct evaluation of clamp(floor(j·T/k), 1, T).
pub fn sampled_indices(total: u64, k: usize) -> Vec<u64> {
    (1..=k as u64)
        .map(|j| {
            let v = Ratio::new(j as i128 * total as i128, k as i128).floor().to_integer() as u64;
            v.clamp(1, total)
        })
        .collect()
}

/// Paints a hard-edged disc by scanning every pixel of the image.
pub fn paint_dot(img: &mut RgbImage, x: f64, y: f64, radius: u32, color: [u8; 3]) {
    let r2 = f64::from(radius) * f64::from(radius);
    for py in 0..img.height() {
        for px in 0..img.width() {
            let dx = f64::from(px) - x;
            let dy = f64::from(py) - y;
            if dx * dx + dy * dy <= r2 {
                img.put_pixel(px, py, Rgb(color));
            }
        }
    }
}

/// Materializes every frame of the full gaze video.
pub fn full_video(base: &RgbImage, scanpath: &ScanPath, fps: u32, radius: u32, color: [u8; 3]) -> Vec<RgbImage> {
    let mut frames = Vec::new();
    for f in scanpath.fixations() {
        for _ in 0..frames_for(f.duration, fps) {
            let mut frame = base.clone();
            paint_dot(&mut frame, f.x, f.y, radius, color);
            frames.push(frame);
        }
    }
    frames
}

/// The oracle's sampled video: the full video indexed at the sampled indices.
pub fn sampled_video(base: &RgbImage, scanpath: &ScanPath, fps: u32, k: usize, radius: u32, color: [u8; 3]) -> Vec<RgbImage> {
    let full = full_video(base, scanpath, fps, radius, color);
    sampled_indices(full.len() as u64, k)
        .into_iter()
        .map(|i| full[i as usize - 1].clone())
        .collect()
}

/// Fixation ordinal (1-based) of each virtual frame.
pub fn frame_owners(scanpath: &ScanPath, fps: u32) -> Vec<u32> {
    scanpath
        .fixations()
        .iter()
        .enumerate()
        .flat_map(|(i, f)| std::iter::repeat_n(i as u32 + 1, frames_for(f.duration, fps) as usize))
        .collect()
}
