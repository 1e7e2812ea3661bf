//! Multi-channel Lucas-Kanade alignment.
//!
//! The objective is the SSD between the template representation and the
//! representation of the moving image sampled through the warp, summed over
//! every channel. Each channel contributes one row per pixel to the stacked
//! Jacobian, `grad(phi_j) * d warp / d theta`.
//!
//! Sign conventions (residual `e = phi_0 - phi_1(warp(x))`):
//!
//! * forward additive: `theta <- theta + delta`
//! * forward compositional: `theta <- theta o delta`
//! * inverse compositional: `delta` solves the system linearized at the
//!   template, `theta <- theta o delta^-1`

mod solve;
mod solver;
mod template;

use serde::{Deserialize, Serialize};

pub use solve::{solve_normal_equations, solve_spd, TIKHONOV_SCALE};
pub use solver::{align, track_sequence, TrackedFrame, Tracker};
pub use template::{precompute_template, TemplateModel, MIN_COARSE_SIDE};

use crate::descriptor::Representation;
use crate::error::{Error, Result};
use crate::warp::{WarpJacobian, WarpModel, WarpParams};

/// Lucas-Kanade update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Fa,
    Fc,
    #[default]
    Ic,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Self::Fa, Self::Fc, Self::Ic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fa => "fa",
            Self::Fc => "fc",
            Self::Ic => "ic",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fa" => Ok(Self::Fa),
            "fc" => Ok(Self::Fc),
            "ic" => Ok(Self::Ic),
            _ => Err(Error::Config(format!("unknown LK variant '{s}'"))),
        }
    }
}

/// Fraction of template pixels that must stay valid for an iteration.
pub const MIN_VALID_FRACTION: f64 = 0.25;

/// Solver settings. Defaults follow the planar tracker: inverse
/// compositional homography on bit-planes, 3 pyramid levels, at most 100
/// Gauss-Newton iterations per level, stopping when `|delta|_inf < 1e-6` or
/// the relative cost reduction drops below `1e-5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub variant: Variant,
    pub model: WarpModel,
    pub representation: Representation,
    pub pyramid_levels: usize,
    pub max_iterations: usize,
    pub param_tol: f64,
    pub cost_tol: f64,
    /// Recompute the descriptor on the warped image every iteration; when
    /// false the moving image's channels are computed once and warped.
    pub recompute_descriptors: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ic,
            model: WarpModel::Homography,
            representation: Representation::default(),
            pyramid_levels: 3,
            max_iterations: 100,
            param_tol: 1e-6,
            cost_tol: 1e-5,
            recompute_descriptors: true,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.param_tol > 0.0) || !(self.cost_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::Config("need at least one pyramid level".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        Ok(())
    }
}

/// Outcome of one alignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignResult {
    #[serde(flatten)]
    pub params: WarpParams,
    pub converged: bool,
    /// SSD per valid pixel-channel at the returned parameters.
    pub final_cost: f64,
    /// Gauss-Newton steps taken per level, finest level first.
    #[serde(rename = "iterations")]
    pub iterations_per_level: Vec<usize>,
    #[serde(rename = "valid_fraction")]
    pub valid_pixel_fraction: f64,
    /// Cost at the start of every iteration, coarsest level first.
    #[serde(skip)]
    pub cost_trace: Vec<f64>,
}

impl AlignResult {
    pub fn finest_iterations(&self) -> usize {
        self.iterations_per_level.first().copied().unwrap_or(0)
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations_per_level.iter().sum()
    }
}

/// One pixel's block of the stacked Jacobian: row `j` is
/// `[gx_j, gy_j] * warp_jacobian`, written to `out[j * dof..(j + 1) * dof]`.
#[inline]
pub fn stacked_jacobian_into(
    channel_gradients: &[(f64, f64)],
    warp_jacobian: &WarpJacobian,
    dof: usize,
    out: &mut [f64],
) {
    for (j, &(gx, gy)) in channel_gradients.iter().enumerate() {
        let row = &mut out[j * dof..(j + 1) * dof];
        for k in 0..dof {
            row[k] = gx * warp_jacobian[0][k] + gy * warp_jacobian[1][k];
        }
    }
}

/// The `d x p` Jacobian of one pixel, row-major.
pub fn stacked_jacobian(channel_gradients: &[(f64, f64)], warp_jacobian: &WarpJacobian, dof: usize) -> Vec<f64> {
    let mut out = vec![0.0; channel_gradients.len() * dof];
    stacked_jacobian_into(channel_gradients, warp_jacobian, dof, &mut out);
    out
}

/// Convenience: identity start for the configured model.
pub fn identity_for(cfg: &AlignConfig) -> WarpParams {
    WarpParams::identity(cfg.model)
}
