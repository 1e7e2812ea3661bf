use nalgebra::{DMatrix, SymmetricEigen};

use super::{AlignConfig, Variant};
use crate::error::{Error, Result};
use crate::image::{build_pyramid, Image, MultiChannelImage, PixelRegion};
use crate::warp::WarpParams;

/// Smallest template side allowed at the coarsest pyramid level.
pub const MIN_COARSE_SIDE: usize = 8;

/// Template representation per pyramid level plus, for the inverse
/// compositional variant, its steepest-descent rows and Gauss-Newton Hessian.
#[derive(Debug, Clone)]
pub struct TemplateModel {
    region: PixelRegion,
    config: AlignConfig,
    pub(crate) levels: Vec<TemplateLevel>,
}

#[derive(Debug, Clone)]
pub(crate) struct TemplateLevel {
    pub region: PixelRegion,
    /// Pixels sampled around the region on every side.
    pub margin: usize,
    /// Pixel-interleaved representation over the region (`d` per pixel).
    pub phi: Vec<f64>,
    /// Representation defined at the pixel.
    pub valid: Vec<bool>,
    /// Representation and its central-difference gradient defined.
    pub grad_valid: Vec<bool>,
    /// Steepest-descent rows, `d * p` per pixel (inverse compositional only).
    pub steepest_descent: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

impl TemplateLevel {
    /// Sampling window: the region grown by `margin`.
    pub fn window(&self) -> PixelRegion {
        PixelRegion::new(
            self.region.x - self.margin,
            self.region.y - self.margin,
            self.region.width + 2 * self.margin,
            self.region.height + 2 * self.margin,
        )
    }
}

impl TemplateModel {
    /// Template region in full-resolution pixels.
    pub fn region(&self) -> PixelRegion {
        self.region
    }

    pub fn config(&self) -> &AlignConfig {
        &self.config
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Gauss-Newton Hessian `sum J^T J` of the template-side Jacobian at `level`.
    pub fn hessian(&self, level: usize) -> &DMatrix<f64> {
        &self.levels[level].hessian
    }

    /// Template representation over the region at `level`.
    pub fn representation(&self, level: usize) -> MultiChannelImage {
        let lvl = &self.levels[level];
        let d = self.config.representation.channels();
        let n = lvl.region.area();
        let mut planar = vec![0.0; n * d];
        for i in 0..n {
            for c in 0..d {
                planar[c * n + i] = lvl.phi[i * d + c];
            }
        }
        MultiChannelImage::new(lvl.region.width, lvl.region.height, d, planar).expect("region is non-empty")
    }

    pub(crate) fn has_steepest_descent(&self) -> bool {
        self.levels.iter().all(|l| !l.steepest_descent.is_empty())
    }
}

/// Builds the template pyramid for `region` of `img`.
pub fn precompute_template(img: &Image, region: PixelRegion, cfg: &AlignConfig) -> Result<TemplateModel> {
    cfg.validate()?;
    let coarse = region.at_level(cfg.pyramid_levels - 1);
    if coarse.width < MIN_COARSE_SIDE || coarse.height < MIN_COARSE_SIDE {
        return Err(Error::TooSmall(format!(
            "template {}x{} is {}x{} at the coarsest of {} levels (minimum {MIN_COARSE_SIDE})",
            region.width, region.height, coarse.width, coarse.height, cfg.pyramid_levels
        )));
    }
    let margin = cfg.representation.radius() + 1;
    let pyramid = build_pyramid(img, cfg.pyramid_levels)?;
    let levels = pyramid
        .iter()
        .enumerate()
        .map(|(l, level_img)| {
            let r = region.at_level(l);
            if !r.fits(level_img.width(), level_img.height(), margin) {
                return Err(Error::TooSmall(format!(
                    "template region {region:?} needs a {margin}-pixel border inside the image at level {l}"
                )));
            }
            build_level(level_img, r, margin, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TemplateModel {
        region,
        config: *cfg,
        levels,
    })
}

fn build_level(img: &Image, region: PixelRegion, margin: usize, cfg: &AlignConfig) -> Result<TemplateLevel> {
    let window = PixelRegion::new(
        region.x - margin,
        region.y - margin,
        region.width + 2 * margin,
        region.height + 2 * margin,
    );
    let patch = img.crop(window)?;
    let present = vec![true; window.area()];
    let (rep, rep_valid) = cfg
        .representation
        .compute_interleaved(patch.data(), &present, window.width, window.height);

    let d = cfg.representation.channels();
    let p = cfg.model.dof();
    let n = region.area();
    let ww = window.width;
    let mut phi = vec![0.0; n * d];
    let mut valid = vec![false; n];
    let mut grad_valid = vec![false; n];
    let mut grads = vec![(0.0, 0.0); n * d];
    for ry in 0..region.height {
        for rx in 0..region.width {
            let i = ry * region.width + rx;
            let g = (ry + margin) * ww + rx + margin;
            valid[i] = rep_valid[g];
            phi[i * d..(i + 1) * d].copy_from_slice(&rep[g * d..(g + 1) * d]);
            grad_valid[i] =
                rep_valid[g] && rep_valid[g - 1] && rep_valid[g + 1] && rep_valid[g - ww] && rep_valid[g + ww];
            if grad_valid[i] {
                for c in 0..d {
                    grads[i * d + c] = (
                        0.5 * (rep[(g + 1) * d + c] - rep[(g - 1) * d + c]),
                        0.5 * (rep[(g + ww) * d + c] - rep[(g - ww) * d + c]),
                    );
                }
            }
        }
    }

    let identity = WarpParams::identity(cfg.model);
    let keep_sd = cfg.variant == Variant::Ic;
    let mut steepest_descent = if keep_sd { vec![0.0; n * d * p] } else { Vec::new() };
    let mut h = vec![0.0; p * p];
    let mut rows = vec![0.0; d * p];
    for ry in 0..region.height {
        for rx in 0..region.width {
            let i = ry * region.width + rx;
            if !grad_valid[i] {
                continue;
            }
            let (x, y) = ((region.x + rx) as f64, (region.y + ry) as f64);
            let jw = identity.jacobian(x, y)?;
            super::stacked_jacobian_into(&grads[i * d..(i + 1) * d], &jw, p, &mut rows);
            accumulate_upper(&mut h, &rows, p);
            if keep_sd {
                steepest_descent[i * d * p..(i + 1) * d * p].copy_from_slice(&rows);
            }
        }
    }
    let hessian = symmetric_from_upper(&h, p);
    check_hessian(&hessian)?;
    Ok(TemplateLevel {
        region,
        margin,
        phi,
        valid,
        grad_valid,
        steepest_descent,
        hessian,
    })
}

/// Adds `sum_rows r r^T` to the upper triangle of the row-major `h`.
#[inline]
pub(crate) fn accumulate_upper(h: &mut [f64], rows: &[f64], p: usize) {
    for row in rows.chunks_exact(p) {
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        for a in 0..p {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..p {
                h[a * p + b] += ra * row[b];
            }
        }
    }
}

pub(crate) fn symmetric_from_upper(h: &[f64], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i <= j { h[i * p + j] } else { h[j * p + i] })
}

fn check_hessian(h: &DMatrix<f64>) -> Result<()> {
    let trace = h.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateTemplate);
    }
    let min_eig = SymmetricEigen::new(h.clone()).eigenvalues.min();
    if min_eig < -1e-8 * trace {
        return Err(Error::DegenerateTemplate);
    }
    Ok(())
}
