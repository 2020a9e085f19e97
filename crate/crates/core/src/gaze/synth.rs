use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, Fixation, ImageRecord, ScanPath, Split};
use crate::numeric::quantize_seconds;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub n_paths: usize,
    /// Inclusive fixation count range per path.
    pub fixation_count: (usize, usize),
    /// Inclusive duration range in seconds.
    pub duration_s: (f64, f64),
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.fixation_count;
        if lo == 0 || lo > hi {
            return Err(Error::Argument(format!("invalid fixation count range [{lo}, {hi}]")));
        }
        let (dlo, dhi) = self.duration_s;
        if dlo.is_nan() || dlo <= 0.0 || !dhi.is_finite() || dlo > dhi {
            return Err(Error::Argument(format!("invalid duration range [{dlo}, {dhi}]")));
        }
        if quantize_seconds(dlo) <= 0.0 {
            return Err(Error::Argument(format!("duration {dlo}s is below 1 µs")));
        }
        Ok(())
    }
}

fn sample_path(
    rng: &mut ChaCha8Rng,
    params: &SynthParams,
    image: &ImageRecord,
    reader_id: String,
    split: Split,
) -> Result<ScanPath> {
    let (lo, hi) = params.fixation_count;
    let (dlo, dhi) = params.duration_s;
    let n = rng.random_range(lo..=hi);
    let fixations = (0..n)
        .map(|_| {
            let x = rng.random_range(0.0..=image.max_x());
            let y = rng.random_range(0.0..=image.max_y());
            let d = if dlo == dhi { dlo } else { rng.random_range(dlo..=dhi) };
            Fixation {
                x,
                y,
                duration: quantize_seconds(d).max(1e-6),
                seq: 0,
            }
        })
        .collect();
    ScanPath::new(image.image_id.clone(), reader_id, split, fixations)
}

/// Deterministic random scanpaths over one image: coordinates uniform over
/// the image rectangle, fixation counts and durations uniform over their
/// ranges. Durations are resolved to whole microseconds.
pub fn generate_synthetic_scanpaths(params: &SynthParams, image: &ImageRecord) -> Result<Vec<ScanPath>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.n_paths)
        .map(|i| sample_path(&mut rng, params, image, format!("synth-{}", i + 1), Split::Alpha))
        .collect()
}

/// Shape of a synthetic dataset: `n_scanpaths` distributed round-robin over
/// `n_images` images that all share one image file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifestSpec {
    pub seed: u64,
    pub n_images: usize,
    pub n_scanpaths: usize,
    pub split: Split,
    pub width: u32,
    pub height: u32,
    pub image_path: PathBuf,
    pub fixation_count: (usize, usize),
    pub duration_s: (f64, f64),
}

pub fn generate_synthetic_manifest(spec: &SynthManifestSpec) -> Result<DatasetManifest> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Argument("image size must be positive".into()));
    }
    if spec.n_images == 0 && spec.n_scanpaths > 0 {
        return Err(Error::Argument("scanpaths need at least one image".into()));
    }
    let params = SynthParams {
        seed: spec.seed,
        n_paths: spec.n_scanpaths,
        fixation_count: spec.fixation_count,
        duration_s: spec.duration_s,
    };
    params.validate()?;

    let images: Vec<ImageRecord> = (0..spec.n_images)
        .map(|i| ImageRecord {
            image_id: format!("img-{:05}", i + 1),
            path: spec.image_path.clone(),
            width: spec.width,
            height: spec.height,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scanpaths = (0..spec.n_scanpaths)
        .map(|i| {
            let image = &images[i % spec.n_images];
            let reader = format!("reader-{}", i / spec.n_images + 1);
            sample_path(&mut rng, &params, image, reader, spec.split)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetManifest::new(images, scanpaths))
}
