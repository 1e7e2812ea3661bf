use serde::Serialize;

use crate::descriptor::Representation;
use crate::error::{Error, Result};
use crate::image::{gradient_raster, Image, PixelRegion};

/// Representation of `img` sampled on `window` shifted by `(dx, dy)`.
/// Returns interleaved channels and validity on the window grid.
fn shifted_representation(
    img: &Image,
    window: PixelRegion,
    representation: &Representation,
    dx: f64,
    dy: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut values = Vec::with_capacity(window.area());
    for y in window.y..window.y + window.height {
        for x in window.x..window.x + window.width {
            let (u, v) = (x as f64 + dx, y as f64 + dy);
            values.push(img.sample(u, v).ok_or(Error::OutOfDomain { x: u, y: v })?);
        }
    }
    let present = vec![true; values.len()];
    Ok(representation.compute_interleaved(&values, &present, window.width, window.height))
}

fn analysis_window(img: &Image, region: PixelRegion, margin: usize) -> Result<PixelRegion> {
    if !region.fits(img.width(), img.height(), margin) {
        return Err(Error::TooSmall(format!(
            "region {region:?} needs {margin} pixels of border inside a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(PixelRegion::new(
        region.x - margin,
        region.y - margin,
        region.width + 2 * margin,
        region.height + 2 * margin,
    ))
}

/// SSD cost of a patch against shifted copies of itself on a square grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSurface {
    /// Shift values along each axis (same for x and y).
    pub shifts: Vec<f64>,
    /// Row-major costs, `values[iy * n + ix]` for shift `(shifts[ix], shifts[iy])`.
    pub values: Vec<f64>,
}

impl CostSurface {
    pub fn size(&self) -> usize {
        self.shifts.len()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.shifts.len() + ix]
    }

    /// Index of the zero shift along each axis.
    pub fn center(&self) -> usize {
        self.shifts.len() / 2
    }

    /// Zero shift has a strictly smaller cost than every other grid cell.
    pub fn is_strict_minimum_at_zero(&self) -> bool {
        let c = self.center();
        let zero = self.at(c, c);
        self.values
            .iter()
            .enumerate()
            .all(|(i, &v)| i == c * self.size() + c || v > zero)
    }
}

/// Symmetric shift grid `k * step` for `|k * step| <= half_range`.
pub fn shift_grid(half_range: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(half_range >= 0.0) {
        return Err(Error::Config(format!(
            "invalid shift grid: range {half_range}, step {step}"
        )));
    }
    let n = (half_range / step + 1e-9).floor() as i64;
    Ok((-n..=n).map(|k| k as f64 * step).collect())
}

/// Cost surface of `region` under `representation` for shifts in
/// `[-half_range, half_range]^2` with spacing `step`. The descriptor is
/// recomputed on every bilinearly shifted image and the SSD is normalized per
/// valid pixel-channel.
pub fn cost_surface(
    img: &Image,
    region: PixelRegion,
    representation: &Representation,
    half_range: f64,
    step: f64,
) -> Result<CostSurface> {
    let shifts = shift_grid(half_range, step)?;
    let reach = half_range.ceil() as usize;
    let window = analysis_window(img, region, representation.radius() + reach)?;
    let (base, base_valid) = shifted_representation(img, window, representation, 0.0, 0.0)?;
    let d = representation.channels();
    let mut values = Vec::with_capacity(shifts.len() * shifts.len());
    for &dy in &shifts {
        for &dx in &shifts {
            let (rep, valid) = shifted_representation(img, window, representation, dx, dy)?;
            let (mut ssd, mut n) = (0.0, 0usize);
            for i in region_indices(window, region) {
                if base_valid[i] && valid[i] {
                    n += 1;
                    for c in 0..d {
                        let e = base[i * d + c] - rep[i * d + c];
                        ssd += e * e;
                    }
                }
            }
            values.push(if n == 0 { f64::INFINITY } else { ssd / (n * d) as f64 });
        }
    }
    Ok(CostSurface { shifts, values })
}

/// Window indices of the pixels of `region`.
fn region_indices(window: PixelRegion, region: PixelRegion) -> impl Iterator<Item = usize> {
    let (ox, oy) = (region.x - window.x, region.y - window.y);
    (0..region.height).flat_map(move |ry| (0..region.width).map(move |rx| (ry + oy) * window.width + rx + ox))
}

/// Signal energy and first-order prediction error for one translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearizationTerms {
    pub dx: f64,
    pub dy: f64,
    /// `sum |R(x)|^2` over the region.
    pub signal: f64,
    /// `sum |R(x) + dR/dx * d - R(x + d)|^2` over the region.
    pub error: f64,
}

impl LinearizationTerms {
    pub fn snr_db(&self) -> f64 {
        snr_db(self.signal, self.error)
    }
}

/// `10 * (log10(signal) - log10(error))`; a zero error maps to `+inf`.
pub fn snr_db(signal: f64, error: f64) -> f64 {
    if error == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal.log10() - error.log10())
    }
}

/// Signal and linearization error of `region` for each translation in
/// `shifts`. Derivatives are central differences of the representation.
pub fn linearization_terms(
    img: &Image,
    region: PixelRegion,
    representation: &Representation,
    shifts: &[(f64, f64)],
) -> Result<Vec<LinearizationTerms>> {
    let reach = shifts
        .iter()
        .fold(0.0f64, |m, &(dx, dy)| m.max(dx.abs()).max(dy.abs()))
        .ceil() as usize;
    let window = analysis_window(img, region, representation.radius() + 1 + reach)?;
    let (base, base_valid) = shifted_representation(img, window, representation, 0.0, 0.0)?;
    let d = representation.channels();
    let n = window.area();
    let mut gx = vec![0.0; n * d];
    let mut gy = vec![0.0; n * d];
    let mut plane = vec![0.0; n];
    for c in 0..d {
        for i in 0..n {
            plane[i] = base[i * d + c];
        }
        let (px, py) = gradient_raster(&plane, window.width, window.height);
        for i in 0..n {
            gx[i * d + c] = px[i];
            gy[i * d + c] = py[i];
        }
    }
    let w = window.width;
    let usable: Vec<usize> = region_indices(window, region)
        .filter(|&i| base_valid[i] && base_valid[i - 1] && base_valid[i + 1] && base_valid[i - w] && base_valid[i + w])
        .collect();
    let signal: f64 = usable
        .iter()
        .map(|&i| (0..d).map(|c| base[i * d + c].powi(2)).sum::<f64>())
        .sum();

    shifts
        .iter()
        .map(|&(dx, dy)| {
            let (rep, valid) = shifted_representation(img, window, representation, dx, dy)?;
            let mut error = 0.0;
            for &i in &usable {
                if !valid[i] {
                    continue;
                }
                for c in 0..d {
                    let k = i * d + c;
                    let e = base[k] + gx[k] * dx + gy[k] * dy - rep[k];
                    error += e * e;
                }
            }
            Ok(LinearizationTerms { dx, dy, signal, error })
        })
        .collect()
}

/// SNR in dB of the first-order approximation for each shift.
pub fn linearization_snr(
    img: &Image,
    region: PixelRegion,
    representation: &Representation,
    shifts: &[(f64, f64)],
) -> Result<Vec<f64>> {
    Ok(linearization_terms(img, region, representation, shifts)?
        .iter()
        .map(LinearizationTerms::snr_db)
        .collect())
}
