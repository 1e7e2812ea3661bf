use serde::{Deserialize, Serialize};

use super::overlap::{overlap, SUCCESS_OVERLAP};
use super::photometric::PerturbationRanges;
use super::surface::{cost_surface, linearization_terms, snr_db, CostSurface};
use super::synthetic::{centered_region, point_rms, run_trials, synthetic_pair, trial_rng, SyntheticPair};
use crate::align::{align, precompute_template, AlignConfig, AlignResult, Variant};
use crate::descriptor::{ComparisonOp, Representation};
use crate::error::{Error, Result};
use crate::image::{Image, PixelRegion};
use crate::warp::{WarpModel, WarpParams};

fn require_images(images: &[Image]) -> Result<()> {
    if images.is_empty() {
        return Err(Error::Config("no input images".into()));
    }
    Ok(())
}

/// Shared trial layout: trial `t` uses image `t % n` and a centred region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub trials: usize,
    pub seed: u64,
    pub model: WarpModel,
    pub ranges: PerturbationRanges,
    pub region_width: usize,
    pub region_height: usize,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            model: WarpModel::Homography,
            ranges: PerturbationRanges::default(),
            region_width: 100,
            region_height: 100,
        }
    }
}

impl TrialSettings {
    fn pair(&self, images: &[Image], trial: usize) -> Result<(usize, SyntheticPair)> {
        let k = trial % images.len();
        let img = &images[k];
        let region = centered_region(img.width(), img.height(), self.region_width, self.region_height)?;
        let mut rng = trial_rng(self.seed, trial);
        Ok((k, synthetic_pair(img, region, self.model, &self.ranges, &mut rng)?))
    }
}

fn run_alignment(source: &Image, pair: &SyntheticPair, cfg: &AlignConfig) -> Result<AlignResult> {
    let template = precompute_template(source, pair.region, cfg)?;
    align(&template, &pair.moving, &WarpParams::identity(cfg.model), cfg)
}

/// A named solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub config: AlignConfig,
}

/// Outcome of one method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub image: usize,
    pub method: String,
    pub overlap: f64,
    pub success: bool,
    pub point_rms: f64,
    pub iterations: usize,
    pub error: Option<String>,
}

/// Aligns every method on identical synthetic pairs. Failed alignments
/// score overlap 0 and the point error of the starting estimate.
pub fn robustness_experiment(
    images: &[Image],
    settings: &TrialSettings,
    methods: &[Method],
) -> Result<Vec<TrialRecord>> {
    require_images(images)?;
    let per_trial = run_trials(settings.trials, |t| -> Result<Vec<TrialRecord>> {
        let (k, pair) = settings.pair(images, t)?;
        methods
            .iter()
            .map(|m| {
                let outcome = run_alignment(&images[k], &pair, &m.config);
                let (estimate, iterations, error) = match &outcome {
                    Ok(r) => (r.params, r.finest_iterations(), None),
                    Err(e) => (WarpParams::identity(m.config.model), 0, Some(e.to_string())),
                };
                let o = if error.is_some() {
                    0.0
                } else {
                    overlap(&estimate, &pair.truth, pair.region).unwrap_or(0.0)
                };
                Ok(TrialRecord {
                    trial: t,
                    image: k,
                    method: m.name.clone(),
                    overlap: o,
                    success: o > SUCCESS_OVERLAP,
                    point_rms: point_rms(&estimate, &pair.truth, pair.region).unwrap_or(f64::INFINITY),
                    iterations,
                    error,
                })
            })
            .collect()
    });
    Ok(per_trial
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect())
}

/// Fraction of successful records for `method`.
pub fn success_rate(records: &[TrialRecord], method: &str) -> f64 {
    let mine: Vec<_> = records.iter().filter(|r| r.method == method).collect();
    if mine.is_empty() {
        return 0.0;
    }
    mine.iter().filter(|r| r.success).count() as f64 / mine.len() as f64
}

/// Fixed-width histogram; values outside the range land in the end bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bin_width: f64) -> Self {
        let bins = ((hi - lo) / bin_width).ceil() as usize;
        Self {
            lo,
            bin_width,
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, v: f64) {
        let i = ((v - self.lo) / self.bin_width).floor();
        let i = i.clamp(0.0, (self.counts.len() - 1) as f64) as usize;
        self.counts[i] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Final intensity errors of one method over all trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodBias {
    pub method: String,
    pub rms: f64,
    pub failures: usize,
    pub histogram: Histogram,
}

/// Bit-planes followed by the packed LBP code as a single intensity channel
/// for every comparison operator, all with the solver settings of `base`.
pub fn bias_methods(base: &AlignConfig) -> Vec<Method> {
    let base = *base;
    let mut methods = vec![Method {
        name: "bitplanes".into(),
        config: AlignConfig {
            representation: Representation::bitplanes(ComparisonOp::Gt),
            ..base
        },
    }];
    for op in ComparisonOp::ALL {
        methods.push(Method {
            name: format!("lbp-{}", op.name()),
            config: AlignConfig {
                representation: Representation::Lbp { op },
                ..base
            },
        });
    }
    methods
}

/// Default trial layout of the ordering-bias experiment (affine warps).
pub fn bias_settings(trials: usize, seed: u64) -> TrialSettings {
    TrialSettings {
        trials,
        seed,
        model: WarpModel::Affine,
        ..TrialSettings::default()
    }
}

/// Per-pixel intensity error `source(x) - geometric(estimate(x))` over the
/// region after alignment, where `geometric` is the moving image before the
/// radiometric change. A failed alignment contributes the errors of its
/// starting estimate and counts as a failure.
pub fn lbp_bias_experiment(images: &[Image], settings: &TrialSettings, methods: &[Method]) -> Result<Vec<MethodBias>> {
    require_images(images)?;
    let per_trial = run_trials(settings.trials, |t| -> Result<Vec<(Histogram, f64, u64, bool)>> {
        let (k, pair) = settings.pair(images, t)?;
        let source = &images[k];
        methods
            .iter()
            .map(|m| {
                let outcome = run_alignment(source, &pair, &m.config);
                let estimate = outcome
                    .as_ref()
                    .map(|r| r.params)
                    .unwrap_or_else(|_| WarpParams::identity(m.config.model));
                let mut hist = Histogram::new(-256.0, 256.0, 2.0);
                let (mut sq, mut n) = (0.0, 0u64);
                for (x, y) in pair.region.pixels() {
                    let (u, v) = estimate.warp_point(x as f64, y as f64)?;
                    let e = source.get(x, y) - pair.geometric_only.sample_clamped(u, v);
                    hist.add(e);
                    sq += e * e;
                    n += 1;
                }
                Ok((hist, sq, n, outcome.is_err()))
            })
            .collect()
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let mut hist = Histogram::new(-256.0, 256.0, 2.0);
            let (mut sq, mut n, mut failures) = (0.0, 0u64, 0usize);
            for trial in &per_trial {
                let (h, s, c, failed) = &trial[mi];
                hist.merge(h);
                sq += s;
                n += c;
                failures += *failed as usize;
            }
            MethodBias {
                method: m.name.clone(),
                rms: if n == 0 { 0.0 } else { (sq / n as f64).sqrt() },
                failures,
                histogram: hist,
            }
        })
        .collect())
}

/// Descriptor handling mode of the moving image.
pub fn mode_name(recompute: bool) -> &'static str {
    if recompute {
        "recompute"
    } else {
        "warp-channels"
    }
}

/// One alignment of the precompute comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecomputeRecord {
    pub trial: usize,
    pub model: WarpModel,
    pub variant: Variant,
    pub mode: &'static str,
    pub point_rms: f64,
    pub converged: bool,
    pub error: Option<String>,
}

/// FA/FC/IC with the moving descriptor recomputed after warping versus
/// computed once and its channels warped, on identical pairs per model.
/// Variant, model and descriptor mode of `base` are overridden.
pub fn precompute_experiment(
    images: &[Image],
    settings: &TrialSettings,
    models: &[WarpModel],
    base: &AlignConfig,
) -> Result<Vec<PrecomputeRecord>> {
    require_images(images)?;
    let mut records = Vec::new();
    for &model in models {
        let model_settings = TrialSettings { model, ..*settings };
        let per_trial = run_trials(settings.trials, |t| -> Result<Vec<PrecomputeRecord>> {
            let (k, pair) = model_settings.pair(images, t)?;
            let mut out = Vec::with_capacity(6);
            for variant in Variant::ALL {
                for recompute in [false, true] {
                    let cfg = AlignConfig {
                        variant,
                        model,
                        recompute_descriptors: recompute,
                        ..*base
                    };
                    let outcome = run_alignment(&images[k], &pair, &cfg);
                    let estimate = outcome
                        .as_ref()
                        .map(|r| r.params)
                        .unwrap_or_else(|_| WarpParams::identity(model));
                    out.push(PrecomputeRecord {
                        trial: t,
                        model,
                        variant,
                        mode: mode_name(recompute),
                        point_rms: point_rms(&estimate, &pair.truth, pair.region)?,
                        converged: outcome.as_ref().is_ok_and(|r| r.converged),
                        error: outcome.err().map(|e| e.to_string()),
                    });
                }
            }
            Ok(out)
        });
        for r in per_trial {
            records.extend(r?);
        }
    }
    Ok(records)
}

/// Square patches laid out on a 2x2 grid around the image centre.
pub fn patch_regions(img_w: usize, img_h: usize, size: usize) -> Vec<PixelRegion> {
    let (cx, cy) = (img_w / 2, img_h / 2);
    let gap = 4;
    let mut out = Vec::new();
    for &(left, top) in &[(true, true), (false, true), (true, false), (false, false)] {
        let x = if left {
            cx.checked_sub(size + gap / 2)
        } else {
            Some(cx + gap / 2)
        };
        let y = if top {
            cy.checked_sub(size + gap / 2)
        } else {
            Some(cy + gap / 2)
        };
        if let (Some(x), Some(y)) = (x, y) {
            if x + size <= img_w && y + size <= img_h {
                out.push(PixelRegion::new(x, y, size, size));
            }
        }
    }
    out
}

/// Cost surface of one patch under one representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRecord {
    pub image: usize,
    pub patch: usize,
    pub representation: String,
    pub surface: CostSurface,
}

pub fn cost_surface_experiment(
    images: &[Image],
    representations: &[Representation],
    patch_size: usize,
    half_range: f64,
    step: f64,
) -> Result<Vec<SurfaceRecord>> {
    require_images(images)?;
    let jobs: Vec<(usize, usize, PixelRegion)> = images
        .iter()
        .enumerate()
        .flat_map(|(k, img)| {
            patch_regions(img.width(), img.height(), patch_size)
                .into_iter()
                .enumerate()
                .map(move |(p, r)| (k, p, r))
        })
        .collect();
    let per_job = run_trials(jobs.len(), |j| -> Result<Vec<SurfaceRecord>> {
        let (k, p, region) = jobs[j];
        representations
            .iter()
            .map(|rep| {
                Ok(SurfaceRecord {
                    image: k,
                    patch: p,
                    representation: rep.name(),
                    surface: cost_surface(&images[k], region, rep, half_range, step)?,
                })
            })
            .collect()
    });
    Ok(per_job
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect())
}

/// Pooled linearization quality at one displacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrRecord {
    pub representation: String,
    pub dx: f64,
    pub dy: f64,
    pub signal: f64,
    pub error: f64,
    /// `10 * log10(sum signal / sum error)` over all patches.
    pub snr_db: f64,
}

/// Shifts along x and along y: `k * step` for `0 < |k * step| <= max`.
pub fn axis_shifts(max: f64, step: f64) -> Vec<(f64, f64)> {
    let n = (max / step + 1e-9).floor() as i64;
    let mags: Vec<f64> = (-n..=n).filter(|&k| k != 0).map(|k| k as f64 * step).collect();
    mags.iter()
        .map(|&s| (s, 0.0))
        .chain(mags.iter().map(|&s| (0.0, s)))
        .collect()
}

pub fn snr_experiment(
    images: &[Image],
    representations: &[Representation],
    patch_size: usize,
    shifts: &[(f64, f64)],
) -> Result<Vec<SnrRecord>> {
    require_images(images)?;
    let regions: Vec<(usize, PixelRegion)> = images
        .iter()
        .enumerate()
        .flat_map(|(k, img)| {
            patch_regions(img.width(), img.height(), patch_size)
                .into_iter()
                .map(move |r| (k, r))
        })
        .collect();
    let mut out = Vec::new();
    for rep in representations {
        let per_patch = run_trials(regions.len(), |j| {
            let (k, region) = regions[j];
            linearization_terms(&images[k], region, rep, shifts)
        });
        let per_patch = per_patch.into_iter().collect::<Result<Vec<_>>>()?;
        for (s, &(dx, dy)) in shifts.iter().enumerate() {
            let signal: f64 = per_patch.iter().map(|p| p[s].signal).sum();
            let error: f64 = per_patch.iter().map(|p| p[s].error).sum();
            out.push(SnrRecord {
                representation: rep.name(),
                dx,
                dy,
                signal,
                error,
                snr_db: snr_db(signal, error),
            });
        }
    }
    Ok(out)
}
