use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::warp::{WarpModel, WarpParams};

/// Appearance change `I1(x) = 255 * ((alpha * I0(g(x)) + beta) / 255)^(1 + gamma)`
/// where `g` is the geometric warp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotometricParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Maps output pixel coordinates into the source image.
    pub geometric: WarpParams,
}

impl PhotometricParams {
    pub fn identity() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            geometric: WarpParams::identity(WarpModel::Affine),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("gain must be positive, got {}", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Config("bias must be finite".into()));
        }
        if !(self.gamma.abs() < 1.0) {
            return Err(Error::Config(format!("|gamma| must be < 1, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Radiometric part only, applied to one intensity.
    #[inline]
    pub fn apply(&self, intensity: f64) -> f64 {
        let base = ((self.alpha * intensity + self.beta) / 255.0).clamp(0.0, 1.0);
        (255.0 * base.powf(1.0 + self.gamma)).clamp(0.0, 255.0)
    }
}

/// Sampling ranges for random perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRanges {
    /// Maximum corner displacement in pixels per axis.
    pub jitter: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        Self {
            jitter: 5.0,
            alpha: (0.9, 1.1),
            beta: (-20.0, 20.0),
            gamma: (-0.2, 0.2),
        }
    }
}

impl PerturbationRanges {
    /// Geometric jitter only.
    pub fn geometric(jitter: f64) -> Self {
        Self {
            jitter,
            alpha: (1.0, 1.0),
            beta: (0.0, 0.0),
            gamma: (0.0, 0.0),
        }
    }

    /// No change at all.
    pub fn none() -> Self {
        Self::geometric(0.0)
    }

    /// Draws `(alpha, beta, gamma)`; the geometric part is left at identity.
    pub fn sample_radiometric<R: Rng + ?Sized>(&self, rng: &mut R) -> PhotometricParams {
        PhotometricParams {
            alpha: uniform(rng, self.alpha),
            beta: uniform(rng, self.beta),
            gamma: uniform(rng, self.gamma),
            ..PhotometricParams::identity()
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Resamples `img` through `p.geometric` (bilinear, coordinates clamped to
/// the image) and applies the radiometric model. The base is clamped to
/// `[0, 1]` before exponentiation so that strong negative bias cannot produce
/// NaN.
pub fn photometric_perturb(img: &Image, p: &PhotometricParams) -> Result<Image> {
    p.validate()?;
    let identity = p.geometric.is_identity();
    let mut out = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = if identity {
                img.get(x, y)
            } else {
                let (u, w) = p.geometric.warp_point(x as f64, y as f64)?;
                img.sample_clamped(u, w)
            };
            out.push(p.apply(v));
        }
    }
    Image::new(img.width(), img.height(), out)
}
