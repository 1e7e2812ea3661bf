use std::time::{Duration, Instant};

use nalgebra::DVector;

use super::template::{accumulate_upper, symmetric_from_upper, TemplateLevel};
use super::{precompute_template, solve_spd, AlignConfig, AlignResult, TemplateModel, Variant, MIN_VALID_FRACTION};
use crate::error::{Error, Result};
use crate::image::{build_pyramid, gradient_raster, Image, PixelRegion};
use crate::warp::WarpParams;

/// Moving-image data for one pyramid level.
struct MovingLevel<'a> {
    image: &'a Image,
    /// Interleaved representation of the whole level (warp-channels mode).
    channels: Option<ChannelField>,
    /// Interleaved `(gx, gy)` of `channels` in moving-image coordinates
    /// (forward additive in warp-channels mode).
    gradients: Option<ChannelField>,
}

/// Pixel-interleaved multi-channel raster with a validity mask.
struct ChannelField {
    width: usize,
    height: usize,
    depth: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl ChannelField {
    /// Bilinear sample of every channel into `out`; `false` when any of the
    /// four supporting pixels is invalid or outside the raster.
    #[inline]
    fn sample(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        let (w, h) = (self.width, self.height);
        if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
            return false;
        }
        let x0 = (x.floor() as usize).min(w.saturating_sub(2));
        let y0 = (y.floor() as usize).min(h.saturating_sub(2));
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let idx = [y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1];
        if idx.iter().any(|&i| !self.valid[i]) {
            return false;
        }
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let d = self.depth;
        for (c, o) in out.iter_mut().enumerate().take(d) {
            let v00 = self.data[idx[0] * d + c];
            let v10 = self.data[idx[1] * d + c];
            let v01 = self.data[idx[2] * d + c];
            let v11 = self.data[idx[3] * d + c];
            let top = v00 + fx * (v10 - v00);
            let bottom = v01 + fx * (v11 - v01);
            *o = top + fy * (bottom - top);
        }
        true
    }
}

impl<'a> MovingLevel<'a> {
    fn new(image: &'a Image, cfg: &AlignConfig) -> Self {
        if cfg.recompute_descriptors {
            return Self {
                image,
                channels: None,
                gradients: None,
            };
        }
        let (w, h) = (image.width(), image.height());
        let present = vec![true; w * h];
        let (data, valid) = cfg.representation.compute_interleaved(image.data(), &present, w, h);
        let d = cfg.representation.channels();
        let gradients = (cfg.variant == Variant::Fa).then(|| {
            let mut gdata = vec![0.0; w * h * d * 2];
            let mut plane = vec![0.0; w * h];
            for c in 0..d {
                for i in 0..w * h {
                    plane[i] = data[i * d + c];
                }
                let (gx, gy) = gradient_raster(&plane, w, h);
                for i in 0..w * h {
                    gdata[(i * d + c) * 2] = gx[i];
                    gdata[(i * d + c) * 2 + 1] = gy[i];
                }
            }
            let mut gvalid = vec![false; w * h];
            for y in 1..h.saturating_sub(1) {
                for x in 1..w - 1 {
                    let i = y * w + x;
                    gvalid[i] = valid[i] && valid[i - 1] && valid[i + 1] && valid[i - w] && valid[i + w];
                }
            }
            ChannelField {
                width: w,
                height: h,
                depth: 2 * d,
                data: gdata,
                valid: gvalid,
            }
        });
        Self {
            image,
            channels: Some(ChannelField {
                width: w,
                height: h,
                depth: d,
                data,
                valid,
            }),
            gradients,
        }
    }
}

/// Residual statistics and (optionally) the linear system at one estimate.
struct Evaluation {
    cost: f64,
    valid_fraction: f64,
    hessian: Vec<f64>,
    rhs: Vec<f64>,
}

/// Samples the moving representation through `params` over the template
/// window. Returns interleaved values and validity on the window grid.
fn warped_patch(
    moving: &MovingLevel,
    window: PixelRegion,
    params: &WarpParams,
    cfg: &AlignConfig,
) -> (Vec<f64>, Vec<bool>) {
    let n = window.area();
    match &moving.channels {
        None => {
            let mut values = vec![0.0; n];
            let mut present = vec![false; n];
            for gy in 0..window.height {
                for gx in 0..window.width {
                    let (x, y) = ((window.x + gx) as f64, (window.y + gy) as f64);
                    if let Ok((u, v)) = params.warp_point(x, y) {
                        if let Some(s) = moving.image.sample(u, v) {
                            values[gy * window.width + gx] = s;
                            present[gy * window.width + gx] = true;
                        }
                    }
                }
            }
            cfg.representation
                .compute_interleaved(&values, &present, window.width, window.height)
        }
        Some(field) => {
            let d = field.depth;
            let mut values = vec![0.0; n * d];
            let mut valid = vec![false; n];
            for gy in 0..window.height {
                for gx in 0..window.width {
                    let g = gy * window.width + gx;
                    let (x, y) = ((window.x + gx) as f64, (window.y + gy) as f64);
                    if let Ok((u, v)) = params.warp_point(x, y) {
                        valid[g] = field.sample(u, v, &mut values[g * d..(g + 1) * d]);
                    }
                }
            }
            (values, valid)
        }
    }
}

fn evaluate(
    level: &TemplateLevel,
    moving: &MovingLevel,
    params: &WarpParams,
    cfg: &AlignConfig,
    with_system: bool,
) -> Result<Evaluation> {
    let window = level.window();
    let (patch, patch_valid) = warped_patch(moving, window, params, cfg);
    let d = cfg.representation.channels();
    let p = cfg.model.dof();
    let region = level.region;
    let m = level.margin;
    let ww = window.width;
    let identity = WarpParams::identity(cfg.model);

    let mut hessian = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut ssd = 0.0;
    let mut used = 0usize;
    let mut residual = vec![0.0; d];
    let mut grads = vec![(0.0, 0.0); d];
    let mut rows = vec![0.0; d * p];
    let mut sampled = vec![0.0; 2 * d];

    for ry in 0..region.height {
        for rx in 0..region.width {
            let i = ry * region.width + rx;
            let g = (ry + m) * ww + rx + m;
            let ok = match cfg.variant {
                Variant::Ic => level.grad_valid[i] && patch_valid[g],
                Variant::Fa | Variant::Fc => {
                    level.valid[i]
                        && patch_valid[g]
                        && (moving.gradients.is_some()
                            || (patch_valid[g - 1] && patch_valid[g + 1] && patch_valid[g - ww] && patch_valid[g + ww]))
                }
            };
            if !ok {
                continue;
            }
            let (x, y) = ((region.x + rx) as f64, (region.y + ry) as f64);
            // Forward additive in warp-channels mode samples the moving-frame
            // gradient; that sample must exist too.
            if with_system && cfg.variant == Variant::Fa {
                if let Some(field) = &moving.gradients {
                    let (u, v) = params.warp_point(x, y)?;
                    if !field.sample(u, v, &mut sampled) {
                        continue;
                    }
                }
            }
            used += 1;
            let mut any_residual = false;
            for c in 0..d {
                let e = level.phi[i * d + c] - patch[g * d + c];
                residual[c] = e;
                ssd += e * e;
                any_residual |= e != 0.0;
            }
            if !with_system {
                continue;
            }
            match cfg.variant {
                Variant::Ic => {
                    if !any_residual {
                        continue;
                    }
                    let sd = &level.steepest_descent[i * d * p..(i + 1) * d * p];
                    for (c, &e) in residual.iter().enumerate() {
                        if e != 0.0 {
                            for (k, r) in rhs.iter_mut().enumerate() {
                                *r += sd[c * p + k] * e;
                            }
                        }
                    }
                }
                Variant::Fc | Variant::Fa => {
                    let jw = if cfg.variant == Variant::Fc {
                        identity.jacobian(x, y)?
                    } else {
                        params.jacobian(x, y)?
                    };
                    match (&moving.gradients, cfg.variant) {
                        (Some(_), Variant::Fa) => {
                            for c in 0..d {
                                grads[c] = (sampled[2 * c], sampled[2 * c + 1]);
                            }
                        }
                        (_, Variant::Fa) => {
                            // Template-frame gradient of the warped patch, mapped
                            // to moving-frame coordinates through the inverse
                            // spatial Jacobian of the warp.
                            let a = params.spatial_jacobian(x, y)?;
                            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                            if det.abs() < 1e-12 {
                                return Err(Error::DegenerateWarp("warp folds the template".into()));
                            }
                            for c in 0..d {
                                let tx = 0.5 * (patch[(g + 1) * d + c] - patch[(g - 1) * d + c]);
                                let ty = 0.5 * (patch[(g + ww) * d + c] - patch[(g - ww) * d + c]);
                                grads[c] = ((tx * a[1][1] - ty * a[1][0]) / det, (ty * a[0][0] - tx * a[0][1]) / det);
                            }
                        }
                        _ => {
                            for c in 0..d {
                                grads[c] = (
                                    0.5 * (patch[(g + 1) * d + c] - patch[(g - 1) * d + c]),
                                    0.5 * (patch[(g + ww) * d + c] - patch[(g - ww) * d + c]),
                                );
                            }
                        }
                    }
                    super::stacked_jacobian_into(&grads, &jw, p, &mut rows);
                    accumulate_upper(&mut hessian, &rows, p);
                    for (c, &e) in residual.iter().enumerate() {
                        if e != 0.0 {
                            for (k, r) in rhs.iter_mut().enumerate() {
                                *r += rows[c * p + k] * e;
                            }
                        }
                    }
                }
            }
        }
    }
    let valid_fraction = used as f64 / region.area() as f64;
    if valid_fraction < MIN_VALID_FRACTION {
        return Err(Error::InsufficientOverlap { valid: valid_fraction });
    }
    Ok(Evaluation {
        cost: ssd / (used * d) as f64,
        valid_fraction,
        hessian,
        rhs,
    })
}

fn check_compatible(template: &TemplateModel, init: &WarpParams, cfg: &AlignConfig) -> Result<()> {
    cfg.validate()?;
    let t = template.config();
    if init.model() != cfg.model {
        return Err(Error::ModelMismatch {
            expected: cfg.model.name(),
            actual: init.model().name(),
        });
    }
    if t.model != cfg.model || t.representation != cfg.representation || t.pyramid_levels != cfg.pyramid_levels {
        return Err(Error::Config(
            "template was precomputed with a different model, representation or pyramid depth".into(),
        ));
    }
    if cfg.variant == Variant::Ic && !template.has_steepest_descent() {
        return Err(Error::Config(
            "inverse compositional needs a template precomputed for it".into(),
        ));
    }
    Ok(())
}

/// Coarse-to-fine Gauss-Newton alignment of `moving` against `template`,
/// starting from `init` (full-resolution parameters).
///
/// Per level the loop stops when `|delta|_inf < param_tol`, when the relative
/// cost reduction falls below `cost_tol` (an increase reverts the last step),
/// or after `max_iterations` steps.
pub fn align(template: &TemplateModel, moving: &Image, init: &WarpParams, cfg: &AlignConfig) -> Result<AlignResult> {
    check_compatible(template, init, cfg)?;
    let levels = cfg.pyramid_levels;
    let pyramid = build_pyramid(moving, levels)?;
    let p = cfg.model.dof();

    let mut params = init.rescaled(1.0 / (1u64 << (levels - 1)) as f64);
    let mut iterations = vec![0usize; levels];
    let mut cost_trace = Vec::new();
    let mut converged = false;

    for level in (0..levels).rev() {
        let tl = &template.levels[level];
        let ml = MovingLevel::new(&pyramid[level], cfg);
        let hessian_ic = (cfg.variant == Variant::Ic).then(|| tl.hessian.clone());
        let mut previous: Option<(f64, WarpParams)> = None;
        converged = false;
        while iterations[level] < cfg.max_iterations {
            let eval = evaluate(tl, &ml, &params, cfg, true)?;
            cost_trace.push(eval.cost);
            if let Some((prev_cost, prev_params)) = previous {
                if eval.cost > prev_cost {
                    params = prev_params;
                    converged = true;
                    break;
                }
                if prev_cost == 0.0 || (prev_cost - eval.cost) / prev_cost < cfg.cost_tol {
                    converged = true;
                    break;
                }
            }
            let h = match &hessian_ic {
                Some(h) => h.clone(),
                None => symmetric_from_upper(&eval.hessian, p),
            };
            let step = solve_spd(&h, &DVector::from_vec(eval.rhs))?;
            let step_norm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            previous = Some((eval.cost, params));
            params = match cfg.variant {
                Variant::Fa => {
                    let theta: Vec<f64> = params.theta().iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                    WarpParams::new(cfg.model, &theta)?
                }
                Variant::Fc => params.compose(&WarpParams::new(cfg.model, step.as_slice())?)?,
                Variant::Ic => {
                    let delta = WarpParams::new(cfg.model, &step.iter().map(|v| -v).collect::<Vec<_>>())?;
                    params.compose(&delta.invert()?)?
                }
            };
            iterations[level] += 1;
            if step_norm < cfg.param_tol {
                converged = true;
                break;
            }
        }
        log::debug!(
            "level {level}: {} iterations, cost {:?}, converged {converged}",
            iterations[level],
            cost_trace.last()
        );
        if level > 0 {
            params = params.rescaled(2.0);
        }
    }

    let finest = &template.levels[0];
    let ml = MovingLevel::new(&pyramid[0], cfg);
    let last = evaluate(finest, &ml, &params, cfg, false)?;
    Ok(AlignResult {
        params,
        converged,
        final_cost: last.cost,
        iterations_per_level: iterations,
        valid_pixel_fraction: last.valid_fraction,
        cost_trace,
    })
}

/// Per-frame tracking outcome.
#[derive(Debug)]
pub struct TrackedFrame {
    /// Index in the input sequence (the template frame is 0).
    pub index: usize,
    pub outcome: Result<AlignResult>,
    /// Wall-clock time spent aligning this frame.
    pub elapsed: Duration,
}

/// Template tracker: the template is taken from the first frame and never
/// re-extracted; each frame starts from the most recent successful estimate.
pub struct Tracker {
    template: TemplateModel,
    config: AlignConfig,
    current: WarpParams,
    frames_seen: usize,
}

impl Tracker {
    pub fn new(first_frame: &Image, region: PixelRegion, config: AlignConfig) -> Result<Self> {
        let template = precompute_template(first_frame, region, &config)?;
        Ok(Self {
            template,
            current: WarpParams::identity(config.model),
            config,
            frames_seen: 1,
        })
    }

    pub fn template(&self) -> &TemplateModel {
        &self.template
    }

    /// Latest successful estimate.
    pub fn current(&self) -> &WarpParams {
        &self.current
    }

    pub fn track(&mut self, frame: &Image) -> TrackedFrame {
        let start = Instant::now();
        let outcome = align(&self.template, frame, &self.current, &self.config);
        let elapsed = start.elapsed();
        if let Ok(result) = &outcome {
            self.current = result.params;
        }
        let index = self.frames_seen;
        self.frames_seen += 1;
        TrackedFrame {
            index,
            outcome,
            elapsed,
        }
    }
}

/// Tracks `region` of the first frame through the remaining frames.
///
/// Alignment failures are recorded per frame; only an unusable template
/// (first frame) is an error. A single frame yields an empty list.
pub fn track_sequence<I>(frames: I, region: PixelRegion, cfg: &AlignConfig) -> Result<Vec<TrackedFrame>>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<Image>,
{
    use std::borrow::Borrow;
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::Config("tracking needs at least one frame".into()))?;
    let mut tracker = Tracker::new(first.borrow(), region, *cfg)?;
    Ok(frames.map(|f| tracker.track(f.borrow())).collect())
}
