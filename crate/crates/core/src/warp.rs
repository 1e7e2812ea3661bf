//! Parametric planar warps: translation (2 dof), affine (6) and homography (8).
//!
//! All three are stored as offsets from the identity matrix, row-major:
//!
//! ```text
//! translation  [[1, 0, t0], [0, 1, t1], [0, 0, 1]]
//! affine       [[1+t0, t1, t2], [t3, 1+t4, t5], [0, 0, 1]]
//! homography   [[1+t0, t1, t2], [t3, 1+t4, t5], [t6, t7, 1]]
//! ```

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PixelRegion;

const DENOMINATOR_EPS: f64 = 1e-12;
const MAX_DOF: usize = 8;
const RANDOM_WARP_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpModel {
    Translation,
    Affine,
    Homography,
}

impl WarpModel {
    pub const fn dof(self) -> usize {
        match self {
            Self::Translation => 2,
            Self::Affine => 6,
            Self::Homography => 8,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Self::Translation => "translation",
            Self::Affine => "affine",
            Self::Homography => "homography",
        }
    }
}

impl std::str::FromStr for WarpModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "translation" => Ok(Self::Translation),
            "affine" => Ok(Self::Affine),
            "homography" => Ok(Self::Homography),
            _ => Err(Error::Config(format!("unknown warp model '{s}'"))),
        }
    }
}

/// `2 x p` Jacobian of the warped point with respect to the parameters.
/// Columns at and beyond the model's dof are zero.
pub type WarpJacobian = [[f64; MAX_DOF]; 2];

/// Warp parameters; serialized as `{"model": "...", "theta": [...]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WarpParamsRepr", into = "WarpParamsRepr")]
pub struct WarpParams {
    model: WarpModel,
    theta: [f64; MAX_DOF],
}

#[derive(Serialize, Deserialize)]
struct WarpParamsRepr {
    model: WarpModel,
    theta: Vec<f64>,
}

impl TryFrom<WarpParamsRepr> for WarpParams {
    type Error = Error;

    fn try_from(r: WarpParamsRepr) -> Result<Self> {
        WarpParams::new(r.model, &r.theta)
    }
}

impl From<WarpParams> for WarpParamsRepr {
    fn from(p: WarpParams) -> Self {
        Self {
            model: p.model,
            theta: p.theta().to_vec(),
        }
    }
}

impl WarpParams {
    pub fn identity(model: WarpModel) -> Self {
        Self {
            model,
            theta: [0.0; MAX_DOF],
        }
    }

    pub fn new(model: WarpModel, theta: &[f64]) -> Result<Self> {
        if theta.len() != model.dof() {
            return Err(Error::ParamCount {
                model: model.name(),
                expected: model.dof(),
                actual: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateWarp("non-finite parameter".into()));
        }
        let mut t = [0.0; MAX_DOF];
        t[..theta.len()].copy_from_slice(theta);
        let params = Self { model, theta: t };
        if model == WarpModel::Homography {
            params.check_invertible()?;
        }
        Ok(params)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        let mut theta = [0.0; MAX_DOF];
        theta[0] = tx;
        theta[1] = ty;
        Self {
            model: WarpModel::Translation,
            theta,
        }
    }

    pub fn model(&self) -> WarpModel {
        self.model
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta[..self.model.dof()]
    }

    pub fn is_identity(&self) -> bool {
        self.theta.iter().all(|&v| v == 0.0)
    }

    /// Largest absolute parameter.
    pub fn max_abs(&self) -> f64 {
        self.theta().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let t = &self.theta;
        match self.model {
            WarpModel::Translation => Matrix3::new(1.0, 0.0, t[0], 0.0, 1.0, t[1], 0.0, 0.0, 1.0),
            WarpModel::Affine => Matrix3::new(1.0 + t[0], t[1], t[2], t[3], 1.0 + t[4], t[5], 0.0, 0.0, 1.0),
            WarpModel::Homography => Matrix3::new(1.0 + t[0], t[1], t[2], t[3], 1.0 + t[4], t[5], t[6], t[7], 1.0),
        }
    }

    /// Parameters of `model` from a 3x3 matrix. Homographies are rescaled to a
    /// unit bottom-right entry; entries a model cannot represent are dropped.
    pub fn from_matrix(model: WarpModel, m: &Matrix3<f64>) -> Result<Self> {
        let m = match model {
            WarpModel::Homography => {
                let s = m[(2, 2)];
                if s.abs() < DENOMINATOR_EPS * m.norm().max(1.0) {
                    return Err(Error::DegenerateWarp("bottom-right entry vanishes".into()));
                }
                m / s
            }
            _ => *m,
        };
        let theta: Vec<f64> = match model {
            WarpModel::Translation => vec![m[(0, 2)], m[(1, 2)]],
            WarpModel::Affine => vec![
                m[(0, 0)] - 1.0,
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)] - 1.0,
                m[(1, 2)],
            ],
            WarpModel::Homography => vec![
                m[(0, 0)] - 1.0,
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)] - 1.0,
                m[(1, 2)],
                m[(2, 0)],
                m[(2, 1)],
            ],
        };
        Self::new(model, &theta)
    }

    fn check_invertible(&self) -> Result<()> {
        let m = self.matrix();
        let scale = m.norm();
        if m.determinant().abs() <= DENOMINATOR_EPS * scale * scale * scale {
            return Err(Error::DegenerateWarp("singular matrix".into()));
        }
        Ok(())
    }

    /// Projective denominator `t6 x + t7 y + 1` (1 for affine models).
    #[inline]
    fn denominator(&self, x: f64, y: f64) -> Result<f64> {
        if self.model != WarpModel::Homography {
            return Ok(1.0);
        }
        let w = self.theta[6] * x + self.theta[7] * y + 1.0;
        if w.abs() <= DENOMINATOR_EPS {
            return Err(Error::DegenerateWarp(format!("denominator vanishes at ({x}, {y})")));
        }
        Ok(w)
    }

    /// Maps a template coordinate into the moving image.
    #[inline]
    pub fn warp_point(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let t = &self.theta;
        match self.model {
            WarpModel::Translation => Ok((x + t[0], y + t[1])),
            WarpModel::Affine => Ok(((1.0 + t[0]) * x + t[1] * y + t[2], t[3] * x + (1.0 + t[4]) * y + t[5])),
            WarpModel::Homography => {
                let w = self.denominator(x, y)?;
                let u = (1.0 + t[0]) * x + t[1] * y + t[2];
                let v = t[3] * x + (1.0 + t[4]) * y + t[5];
                Ok((u / w, v / w))
            }
        }
    }

    /// Analytic `d warp_point / d theta` at `(x, y)`.
    pub fn jacobian(&self, x: f64, y: f64) -> Result<WarpJacobian> {
        let mut j = [[0.0; MAX_DOF]; 2];
        match self.model {
            WarpModel::Translation => {
                j[0][0] = 1.0;
                j[1][1] = 1.0;
            }
            WarpModel::Affine => {
                j[0][..3].copy_from_slice(&[x, y, 1.0]);
                j[1][3..6].copy_from_slice(&[x, y, 1.0]);
            }
            WarpModel::Homography => {
                let w = self.denominator(x, y)?;
                let (u, v) = self.warp_point(x, y)?;
                let iw = 1.0 / w;
                j[0][..3].copy_from_slice(&[x * iw, y * iw, iw]);
                j[1][3..6].copy_from_slice(&[x * iw, y * iw, iw]);
                // u and v here are already divided by w.
                j[0][6] = -x * u * iw;
                j[0][7] = -y * u * iw;
                j[1][6] = -x * v * iw;
                j[1][7] = -y * v * iw;
            }
        }
        Ok(j)
    }

    /// `d warp_point / d (x, y)` as `[[dx'/dx, dx'/dy], [dy'/dx, dy'/dy]]`.
    pub fn spatial_jacobian(&self, x: f64, y: f64) -> Result<[[f64; 2]; 2]> {
        let t = &self.theta;
        match self.model {
            WarpModel::Translation => Ok([[1.0, 0.0], [0.0, 1.0]]),
            WarpModel::Affine => Ok([[1.0 + t[0], t[1]], [t[3], 1.0 + t[4]]]),
            WarpModel::Homography => {
                let w = self.denominator(x, y)?;
                let (u, v) = self.warp_point(x, y)?;
                let iw = 1.0 / w;
                Ok([
                    [(1.0 + t[0] - t[6] * u) * iw, (t[1] - t[7] * u) * iw],
                    [(t[3] - t[6] * v) * iw, (1.0 + t[4] - t[7] * v) * iw],
                ])
            }
        }
    }

    fn require_same_model(&self, other: &Self) -> Result<()> {
        if self.model != other.model {
            return Err(Error::ModelMismatch {
                expected: self.model.name(),
                actual: other.model.name(),
            });
        }
        Ok(())
    }

    /// The warp `x -> self(other(x))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.require_same_model(other)?;
        if self.model == WarpModel::Translation {
            return Ok(Self::translation(
                self.theta[0] + other.theta[0],
                self.theta[1] + other.theta[1],
            ));
        }
        Self::from_matrix(self.model, &(self.matrix() * other.matrix()))
    }

    pub fn invert(&self) -> Result<Self> {
        if self.model == WarpModel::Translation {
            return Ok(Self::translation(-self.theta[0], -self.theta[1]));
        }
        let inv = self
            .matrix()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateWarp("singular warp".into()))?;
        Self::from_matrix(self.model, &inv)
    }

    /// Expresses the warp in coordinates scaled by `factor` (`x_new = factor * x`),
    /// i.e. conjugation by `diag(factor, factor, 1)`. Translation terms scale by
    /// `factor`, projective terms by `1 / factor`, the linear block is unchanged.
    pub fn rescaled(&self, factor: f64) -> Self {
        let mut out = *self;
        match self.model {
            WarpModel::Translation => {
                out.theta[0] *= factor;
                out.theta[1] *= factor;
            }
            WarpModel::Affine | WarpModel::Homography => {
                out.theta[2] *= factor;
                out.theta[5] *= factor;
                if self.model == WarpModel::Homography {
                    out.theta[6] /= factor;
                    out.theta[7] /= factor;
                }
            }
        }
        out
    }

    /// Warp of `model` mapping four `src` points onto `dst`: exact for a
    /// homography, least squares for affine and translation.
    pub fn fit(model: WarpModel, src: &[(f64, f64); 4], dst: &[(f64, f64); 4]) -> Result<Self> {
        match model {
            WarpModel::Translation => {
                let (mut tx, mut ty) = (0.0, 0.0);
                for (s, d) in src.iter().zip(dst) {
                    tx += d.0 - s.0;
                    ty += d.1 - s.1;
                }
                Ok(Self::translation(tx / 4.0, ty / 4.0))
            }
            WarpModel::Affine => fit_affine(src, dst),
            WarpModel::Homography => fit_homography(src, dst),
        }
    }
}

fn fit_affine(src: &[(f64, f64); 4], dst: &[(f64, f64); 4]) -> Result<WarpParams> {
    // Two independent 3-parameter least-squares problems sharing A^T A.
    let mut ata = Matrix3::zeros();
    let mut atb_x = nalgebra::Vector3::zeros();
    let mut atb_y = nalgebra::Vector3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let row = nalgebra::Vector3::new(s.0, s.1, 1.0);
        ata += row * row.transpose();
        atb_x += row * d.0;
        atb_y += row * d.1;
    }
    let chol = ata
        .cholesky()
        .ok_or_else(|| Error::DegenerateWarp("collinear points".into()))?;
    let a = chol.solve(&atb_x);
    let b = chol.solve(&atb_y);
    WarpParams::new(WarpModel::Affine, &[a[0] - 1.0, a[1], a[2], b[0], b[1] - 1.0, b[2]])
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn normalizing_transform(pts: &[(f64, f64); 4]) -> Matrix3<f64> {
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let mean_dist = pts
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / 4.0;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn apply(m: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    let v = m * nalgebra::Vector3::new(p.0, p.1, 1.0);
    (v[0] / v[2], v[1] / v[2])
}

fn fit_homography(src: &[(f64, f64); 4], dst: &[(f64, f64); 4]) -> Result<WarpParams> {
    let ts = normalizing_transform(src);
    let td = normalizing_transform(dst);
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for (k, (s, d)) in src.iter().zip(dst).enumerate() {
        let (x, y) = apply(&ts, *s);
        let (u, v) = apply(&td, *d);
        let r = 2 * k;
        a.row_mut(r)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::DegenerateWarp("degenerate corner configuration".into()))?;
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateWarp("degenerate corner configuration".into()))?;
    WarpParams::from_matrix(WarpModel::Homography, &(td_inv * hn * ts))
}

/// Random warp obtained by displacing the four corners of `region` by i.i.d.
/// uniform offsets in `[-jitter, jitter]^2` and fitting `model` to them.
pub fn random_warp<R: Rng + ?Sized>(
    model: WarpModel,
    region: PixelRegion,
    jitter: f64,
    rng: &mut R,
) -> Result<WarpParams> {
    if !(jitter >= 0.0) {
        return Err(Error::Config(format!("corner jitter must be >= 0, got {jitter}")));
    }
    if jitter == 0.0 {
        return Ok(WarpParams::identity(model));
    }
    let src = region.corners();
    let mut last_err = None;
    for _ in 0..RANDOM_WARP_ATTEMPTS {
        let dst = src.map(|(x, y)| {
            (
                x + rng.random_range(-jitter..=jitter),
                y + rng.random_range(-jitter..=jitter),
            )
        });
        match WarpParams::fit(model, &src, &dst).and_then(|w| w.invert().map(|_| w)) {
            Ok(w) => return Ok(w),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::DegenerateWarp("random warp".into())))
}
