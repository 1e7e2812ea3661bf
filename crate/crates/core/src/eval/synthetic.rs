use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::overlap::{overlap, OverlapScore, SUCCESS_OVERLAP};
use super::photometric::{photometric_perturb, PerturbationRanges, PhotometricParams};
use crate::align::{track_sequence, AlignConfig, AlignResult};
use crate::error::{Error, Result};
use crate::image::{Image, PixelRegion};
use crate::warp::{random_warp, WarpModel, WarpParams};

/// Generator for trial `index` of an experiment seeded with `seed`: every
/// trial owns an independent ChaCha stream, so results do not depend on
/// scheduling.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `f(0..n)` on the current rayon pool, results in index order.
pub fn run_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// `width x height` region centred in a `img_w x img_h` image.
pub fn centered_region(img_w: usize, img_h: usize, width: usize, height: usize) -> Result<PixelRegion> {
    if width > img_w || height > img_h {
        return Err(Error::TooSmall(format!(
            "{width}x{height} region in a {img_w}x{img_h} image"
        )));
    }
    Ok(PixelRegion::new(
        (img_w - width) / 2,
        (img_h - height) / 2,
        width,
        height,
    ))
}

/// Root-mean-square distance between the region corners mapped by `a` and `b`.
pub fn point_rms(a: &WarpParams, b: &WarpParams, region: PixelRegion) -> Result<f64> {
    let mut sum = 0.0;
    for (x, y) in region.corners() {
        let (ax, ay) = a.warp_point(x, y)?;
        let (bx, by) = b.warp_point(x, y)?;
        sum += (ax - bx).powi(2) + (ay - by).powi(2);
    }
    Ok((sum / 4.0).sqrt())
}

/// Smooth value noise plus random rectangles and ellipses and a fine
/// triangular grain of a few grey levels, quantized to 8 bits. Intensities
/// span roughly `[10, 245]`.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; width * height];
    let mut cell = 48.0;
    let mut amplitude = 1.0;
    for _ in 0..6 {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        for y in 0..height {
            let fy = y as f64 / cell;
            let (iy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (ix, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                let v00 = lattice[iy * gw + ix];
                let v10 = lattice[iy * gw + ix + 1];
                let v01 = lattice[(iy + 1) * gw + ix];
                let v11 = lattice[(iy + 1) * gw + ix + 1];
                let top = v00 + tx * (v10 - v00);
                let bottom = v01 + tx * (v11 - v01);
                acc[y * width + x] += amplitude * (top + ty * (bottom - top));
            }
        }
        cell /= 2.0;
        amplitude *= 0.6;
    }
    let (lo, hi) = acc.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    for v in &mut acc {
        *v = (*v - lo) / (hi - lo).max(1e-12);
    }

    let shapes = 12 + (width * height) / 4000;
    for _ in 0..shapes {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let rx = rng.random_range(4.0..width as f64 / 8.0);
        let ry = rng.random_range(4.0..height as f64 / 8.0);
        let value: f64 = rng.random();
        let opacity = rng.random_range(0.4..0.9);
        let ellipse = rng.random::<bool>();
        let (x0, x1) = ((cx - rx).max(0.0) as usize, ((cx + rx).ceil() as usize).min(width));
        let (y0, y1) = ((cy - ry).max(0.0) as usize, ((cy + ry).ceil() as usize).min(height));
        for y in y0..y1 {
            for x in x0..x1 {
                let (u, v) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                if !ellipse || u * u + v * v <= 1.0 {
                    let a = &mut acc[y * width + x];
                    *a += opacity * (value - *a);
                }
            }
        }
    }
    let grain = |rng: &mut ChaCha8Rng| GRAIN * (rng.random::<f64>() - rng.random::<f64>());
    let data = acc.into_iter().map(|v| 10.0 + 235.0 * v + grain(&mut rng)).collect();
    Image::new(width, height, data).map(|img| img.quantized())
}

/// Half-width of the per-pixel grain in grey levels.
const GRAIN: f64 = 6.0;

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Template image, its perturbed counterpart and the ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub region: PixelRegion,
    /// Maps template coordinates into the moving image.
    pub truth: WarpParams,
    pub photometric: PhotometricParams,
    /// Geometric and radiometric change, quantized.
    pub moving: Image,
    /// Geometric change only (not quantized).
    pub geometric_only: Image,
}

/// Draws a warp of `model` by corner jitter and a radiometric change from
/// `ranges`, and renders the moving image so that `moving(truth(x))` is the
/// perturbed `source(x)`.
pub fn synthetic_pair<R: Rng + ?Sized>(
    source: &Image,
    region: PixelRegion,
    model: WarpModel,
    ranges: &PerturbationRanges,
    rng: &mut R,
) -> Result<SyntheticPair> {
    let truth = random_warp(model, region, ranges.jitter, rng)?;
    let inverse = truth.invert()?;
    let photometric = PhotometricParams {
        geometric: inverse,
        ..ranges.sample_radiometric(rng)
    };
    let geometric_only = photometric_perturb(
        source,
        &PhotometricParams {
            geometric: inverse,
            ..PhotometricParams::identity()
        },
    )?;
    let moving = photometric_perturb(source, &photometric)?.quantized();
    Ok(SyntheticPair {
        region,
        truth,
        photometric,
        moving,
        geometric_only,
    })
}

/// Parameters of a synthetic tracking sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceSettings {
    pub frames: usize,
    /// Maximum per-frame corner step per axis.
    pub step: f64,
    /// Maximum accumulated corner offset per axis.
    pub max_offset: f64,
    /// Per-frame radiometric change (the jitter field is unused).
    pub ranges: PerturbationRanges,
}

impl Default for SequenceSettings {
    fn default() -> Self {
        Self {
            frames: 50,
            step: 1.0,
            max_offset: 20.0,
            ranges: PerturbationRanges::default(),
        }
    }
}

/// Frames and per-frame ground truth (frame 0 is the untouched source with
/// identity truth).
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub region: PixelRegion,
    pub frames: Vec<Image>,
    pub truth: Vec<WarpParams>,
}

/// Homography sequence from a bounded random walk of the region corners,
/// with an independent radiometric change drawn for every frame after the
/// first.
pub fn synthetic_sequence<R: Rng + ?Sized>(
    source: &Image,
    region: PixelRegion,
    settings: &SequenceSettings,
    rng: &mut R,
) -> Result<SyntheticSequence> {
    if settings.frames < 2 {
        return Err(Error::Config("a sequence needs at least two frames".into()));
    }
    let corners = region.corners();
    let mut offsets = [(0.0f64, 0.0f64); 4];
    let mut frames = vec![source.clone()];
    let mut truth = vec![WarpParams::identity(WarpModel::Homography)];
    while frames.len() < settings.frames {
        let mut trial = offsets;
        for o in &mut trial {
            o.0 = (o.0 + rng.random_range(-settings.step..=settings.step))
                .clamp(-settings.max_offset, settings.max_offset);
            o.1 = (o.1 + rng.random_range(-settings.step..=settings.step))
                .clamp(-settings.max_offset, settings.max_offset);
        }
        let dst = std::array::from_fn(|k| (corners[k].0 + trial[k].0, corners[k].1 + trial[k].1));
        let Ok(warp) = WarpParams::fit(WarpModel::Homography, &corners, &dst) else {
            continue;
        };
        let Ok(inverse) = warp.invert() else {
            continue;
        };
        offsets = trial;
        let photometric = PhotometricParams {
            geometric: inverse,
            ..settings.ranges.sample_radiometric(rng)
        };
        frames.push(photometric_perturb(source, &photometric)?.quantized());
        truth.push(warp);
    }
    Ok(SyntheticSequence { region, frames, truth })
}

/// Per-frame record of tracking, scored against ground truth when given.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScore {
    pub frame: usize,
    pub overlap: Option<f64>,
    pub success: Option<bool>,
    pub result: Option<AlignResult>,
    pub error: Option<String>,
    /// Wall-clock alignment time.
    pub millis: f64,
}

impl FrameScore {
    /// Gauss-Newton steps at the finest level (0 for a failed frame).
    pub fn iterations(&self) -> usize {
        self.result.as_ref().map_or(0, |r| r.finest_iterations())
    }

    pub fn cost(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.final_cost)
    }
}

/// Tracks `frames` and scores every frame after the first against `truth`
/// when given. Failed frames score an overlap of 0.
pub fn score_tracking(
    frames: &[Image],
    region: PixelRegion,
    truth: Option<&[WarpParams]>,
    cfg: &AlignConfig,
) -> Result<(Vec<FrameScore>, Option<OverlapScore>)> {
    if let Some(t) = truth {
        if t.len() != frames.len() {
            return Err(Error::Config(format!(
                "{} ground-truth entries for {} frames",
                t.len(),
                frames.len()
            )));
        }
    }
    let tracked = track_sequence(frames, region, cfg)?;
    let scores: Vec<FrameScore> = tracked
        .into_iter()
        .map(|f| {
            let millis = f.elapsed.as_secs_f64() * 1e3;
            let (result, error) = match f.outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let overlap = truth.map(|t| match &result {
                Some(r) => overlap(&r.params, &t[f.index], region).unwrap_or(0.0),
                None => 0.0,
            });
            FrameScore {
                frame: f.index,
                overlap,
                success: overlap.map(|o| o > SUCCESS_OVERLAP),
                result,
                error,
                millis,
            }
        })
        .collect();
    let summary = truth.map(|_| OverlapScore::from_values(scores.iter().filter_map(|s| s.overlap).collect()));
    Ok((scores, summary))
}
