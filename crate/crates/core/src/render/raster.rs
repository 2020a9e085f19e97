use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use crate::gaze::ImageRecord;
use crate::{Error, Result};

/// A decoded base image together with the record it was loaded from.
#[derive(Debug, Clone)]
pub struct BaseImage {
    pub record: ImageRecord,
    pub pixels: RgbImage,
}

impl BaseImage {
    /// Decodes the image at `record.path` as 8-bit RGB. Grayscale sources
    /// are expanded.
    pub fn load(record: &ImageRecord) -> Result<Self> {
        let decoded = image::open(&record.path).map_err(|source| Error::Image {
            path: record.path.clone(),
            source,
        })?;
        Self::from_pixels(record.clone(), decoded.to_rgb8())
    }

    pub fn from_pixels(record: ImageRecord, pixels: RgbImage) -> Result<Self> {
        if pixels.dimensions() != (record.width, record.height) {
            return Err(Error::Consistency(format!(
                "image {} is {}x{} but its record says {}x{}",
                record.image_id,
                pixels.width(),
                pixels.height(),
                record.width,
                record.height
            )));
        }
        Ok(Self { record, pixels })
    }
}

/// Paints every pixel whose index lies within euclidean distance `radius`
/// of `(cx, cy)`. `opacity` 1.0 overwrites; smaller values blend with the
/// existing pixel and round to nearest. Parts of the disc outside the image
/// are dropped.
pub fn draw_disc(img: &mut RgbImage, cx: f64, cy: f64, radius: u32, color: [u8; 3], opacity: f64) {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return;
    }
    let r = f64::from(radius);
    let r2 = r * r;
    let x0 = (cx - r).floor().max(0.0) as u32;
    let y0 = (cy - r).floor().max(0.0) as u32;
    let x1 = ((cx + r).ceil().max(0.0) as u32).min(w - 1);
    let y1 = ((cy + r).ceil().max(0.0) as u32).min(h - 1);
    let opaque = opacity >= 1.0;
    for py in y0..=y1 {
        let dy = f64::from(py) - cy;
        for px in x0..=x1 {
            let dx = f64::from(px) - cx;
            if dx * dx + dy * dy > r2 {
                continue;
            }
            let pixel = img.get_pixel_mut(px, py);
            if opaque {
                *pixel = Rgb(color);
            } else {
                for c in 0..3 {
                    let blended = opacity * f64::from(color[c]) + (1.0 - opacity) * f64::from(pixel[c]);
                    pixel[c] = blended.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(Error::Encode)?;
    Ok(buf.into_inner())
}

/// A deterministic grayscale test image: a vertical gradient with two darker
/// elliptical lung-field regions.
pub fn phantom_image(width: u32, height: u32) -> RgbImage {
    let (w, h) = (f64::from(width.max(1)), f64::from(height.max(1)));
    RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (f64::from(x) / w, f64::from(y) / h);
        let mut v = 40.0 + 150.0 * fy;
        for cx in [0.32, 0.68] {
            let d = ((fx - cx) / 0.16).powi(2) + ((fy - 0.5) / 0.3).powi(2);
            if d < 1.0 {
                v *= 0.45 + 0.35 * d;
            }
        }
        let g = v.round().clamp(0.0, 255.0) as u8;
        Rgb([g, g, g])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([10, 20, 30]))
    }

    #[test]
    fn center_painted_and_far_pixel_untouched() {
        let mut img = blank(64, 64);
        draw_disc(&mut img, 32.0, 32.0, 5, [255, 0, 0], 1.0);
        assert_eq!(img.get_pixel(32, 32).0, [255, 0, 0]);
        assert_eq!(img.get_pixel(37, 32).0, [255, 0, 0]);
        assert_eq!(img.get_pixel(40, 32).0, [10, 20, 30]);
        assert_eq!(img.get_pixel(36, 36).0, [10, 20, 30]);
    }

    #[test]
    fn corner_disc_is_a_quarter() {
        let mut img = blank(20, 20);
        draw_disc(&mut img, 0.0, 0.0, 5, [255, 0, 0], 1.0);
        assert_eq!(img.dimensions(), (20, 20));
        let painted = img.pixels().filter(|p| p.0 == [255, 0, 0]).count();
        let expected = (0..=5i32)
            .flat_map(|y| (0..=5i32).map(move |x| (x, y)))
            .filter(|(x, y)| x * x + y * y <= 25)
            .count();
        assert_eq!(painted, expected);
    }

    #[test]
    fn translucent_blend_rounds() {
        let mut img = blank(3, 3);
        draw_disc(&mut img, 1.0, 1.0, 1, [255, 0, 0], 0.5);
        // 0.5*255 + 0.5*10 = 132.5 -> 133
        assert_eq!(img.get_pixel(1, 1).0, [133, 10, 15]);
    }

    #[test]
    fn mismatched_record_rejected() {
        let rec = ImageRecord {
            image_id: "a".into(),
            path: "a.png".into(),
            width: 4,
            height: 4,
        };
        assert!(BaseImage::from_pixels(rec, blank(3, 4)).is_err());
    }

    #[test]
    fn load_reports_path() {
        let rec = ImageRecord {
            image_id: "a".into(),
            path: "/nonexistent/a.png".into(),
            width: 4,
            height: 4,
        };
        let err = BaseImage::load(&rec).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/a.png"));
    }

    #[test]
    fn png_round_trip() {
        let img = phantom_image(40, 30);
        let bytes = encode_png(&img).unwrap();
        let back = image::load_from_memory(&bytes).unwrap().to_rgb8();
        assert_eq!(back, img);
        assert_eq!(encode_png(&img).unwrap(), bytes);
    }
}
