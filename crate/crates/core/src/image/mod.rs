//! Raster storage, bilinear sampling and finite-difference gradients.

mod io;
mod pyramid;

pub use io::{load_image, save_channels, save_image};
pub use pyramid::{build_pyramid, BINOMIAL_KERNEL};

use crate::error::{Error, Result};

/// Single-channel raster of real intensities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite intensity".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.data[y * self.width + x] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Rounds and clamps every value to the 8-bit range.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| quantize(v) as f64).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copies out a sub-rectangle.
    pub fn crop(&self, region: PixelRegion) -> Result<Self> {
        if !region.fits(self.width, self.height, 0) {
            return Err(Error::ShapeMismatch(format!(
                "crop {region:?} outside {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(region.width, region.height, |x, y| self.get(region.x + x, region.y + y))
    }

    /// Bilinear interpolation at a real coordinate.
    ///
    /// Coordinates outside `[0, width-1] x [0, height-1]` are reported as
    /// [`Error::OutOfDomain`]; callers decide how to mask them.
    pub fn bilinear_sample(&self, x: f64, y: f64) -> Result<f64> {
        self.sample(x, y).ok_or(Error::OutOfDomain { x, y })
    }

    /// Non-failing variant of [`Image::bilinear_sample`] used in hot loops.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        bilinear(&self.data, self.width, self.height, x, y)
    }

    /// Bilinear sample with coordinates clamped into the domain.
    #[inline]
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        bilinear(&self.data, self.width, self.height, x, y).unwrap_or(0.0)
    }

    /// Central-difference gradients; one-sided differences on the border.
    pub fn gradient(&self) -> Result<(Image, Image)> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::TooSmall(format!(
                "gradient needs at least 3x3, got {}x{}",
                self.width, self.height
            )));
        }
        let (gx, gy) = gradient_raster(&self.data, self.width, self.height);
        Ok((
            Image {
                width: self.width,
                height: self.height,
                data: gx,
            },
            Image {
                width: self.width,
                height: self.height,
                data: gy,
            },
        ))
    }
}

/// Rounds and clamps a real intensity to a byte.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
pub(crate) fn bilinear(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> Option<f64> {
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    // Also rejects NaN.
    if !(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y) {
        return None;
    }
    let mut x0 = x.floor() as usize;
    let mut y0 = y.floor() as usize;
    if x0 + 1 >= width && width > 1 {
        x0 = width - 2;
    }
    if y0 + 1 >= height && height > 1 {
        y0 = height - 2;
    }
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let i00 = data[y0 * width + x0];
    let i10 = data[y0 * width + x1];
    let i01 = data[y1 * width + x0];
    let i11 = data[y1 * width + x1];
    let top = i00 + fx * (i10 - i00);
    let bottom = i01 + fx * (i11 - i01);
    Some(top + fy * (bottom - top))
}

pub(crate) fn gradient_raster(data: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; data.len()];
    let mut gy = vec![0.0; data.len()];
    for y in 0..height {
        let row = y * width;
        for x in 0..width {
            let i = row + x;
            gx[i] = if x == 0 {
                data[i + 1] - data[i]
            } else if x == width - 1 {
                data[i] - data[i - 1]
            } else {
                0.5 * (data[i + 1] - data[i - 1])
            };
            gy[i] = if y == 0 {
                data[i + width] - data[i]
            } else if y == height - 1 {
                data[i] - data[i - width]
            } else {
                0.5 * (data[i + width] - data[i - width])
            };
        }
    }
    (gx, gy)
}

/// A `d`-channel raster stored as planar row-major channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl MultiChannelImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions { width, height });
        }
        if channels == 0 {
            return Err(Error::Config("channel count must be at least 1".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {channels} channels of {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_channels(channels: Vec<Image>) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::Config("no channels".into()))?;
        let (width, height) = (first.width, first.height);
        if channels.iter().any(|c| c.width != width || c.height != height) {
            return Err(Error::ShapeMismatch("channels differ in size".into()));
        }
        let d = channels.len();
        let data = channels.into_iter().flat_map(|c| c.data).collect();
        Self::new(width, height, d, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, channel: usize, x: usize, y: usize) -> f64 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    /// Row-major raster of one channel.
    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn channel_image(&self, channel: usize) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.channel(channel).to_vec(),
        }
    }

    /// Values of all channels at one pixel.
    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, x, y)).collect()
    }
}

/// Axis-aligned pixel rectangle, e.g. the template support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PixelRegion {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl PixelRegion {
    pub const fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    /// Whole-image region.
    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// True when the region plus `margin` pixels on every side lies inside a
    /// `width x height` image.
    pub fn fits(&self, width: usize, height: usize, margin: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x >= margin
            && self.y >= margin
            && self.x + self.width + margin <= width
            && self.y + self.height + margin <= height
    }

    /// Continuous corner points, clockwise from the top-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (x0, y0) = (self.x as f64, self.y as f64);
        let (x1, y1) = (x0 + self.width as f64, y0 + self.height as f64);
        [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    }

    /// The region as seen at pyramid `level` (coordinates halved per level).
    pub fn at_level(&self, level: usize) -> Self {
        Self::new(
            self.x >> level,
            self.y >> level,
            self.width >> level,
            self.height >> level,
        )
    }

    /// Pixel coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y..self.y + self.height).flat_map(move |y| (self.x..self.x + self.width).map(move |x| (x, y)))
    }
}

impl std::str::FromStr for PixelRegion {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad rectangle '{s}': {e}")))?;
        match parts.as_slice() {
            [x, y, w, h] if *w > 0 && *h > 0 => Ok(Self::new(*x, *y, *w, *h)),
            _ => Err(Error::Config(format!("rectangle must be x,y,w,h: '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn sample_on_lattice_is_exact() {
        let img = Image::from_fn(7, 9, |x, y| (x * 13 + y * 7) as f64 % 17.0).unwrap();
        assert_eq!(img.bilinear_sample(3.0, 5.0).unwrap(), img.get(3, 5));
        assert_eq!(img.bilinear_sample(6.0, 8.0).unwrap(), img.get(6, 8));
    }

    #[test]
    fn sample_midpoints() {
        let img = Image::new(2, 1, vec![0.0, 100.0]).unwrap();
        assert_eq!(img.bilinear_sample(0.5, 0.0).unwrap(), 50.0);
        let img = Image::new(2, 2, vec![0.0, 100.0, 100.0, 200.0]).unwrap();
        assert_eq!(img.bilinear_sample(0.5, 0.5).unwrap(), 100.0);
    }

    #[test]
    fn sample_out_of_domain() {
        let img = Image::filled(4, 4, 1.0).unwrap();
        assert!(matches!(
            img.bilinear_sample(-0.01, 1.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(img.bilinear_sample(3.0001, 1.0).is_err());
        assert!(img.bilinear_sample(f64::NAN, 1.0).is_err());
        assert_eq!(img.bilinear_sample(3.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn single_pixel_image_samples() {
        let img = Image::new(1, 1, vec![42.0]).unwrap();
        assert_eq!(img.sample(0.0, 0.0), Some(42.0));
    }

    #[test]
    fn gradient_constant_and_ramps() {
        let c = Image::filled(5, 4, 7.0).unwrap();
        let (gx, gy) = c.gradient().unwrap();
        assert!(gx.data().iter().chain(gy.data()).all(|&v| v == 0.0));

        let ramp = Image::from_fn(6, 5, |x, _| x as f64).unwrap();
        let (gx, gy) = ramp.gradient().unwrap();
        for y in 1..4 {
            for x in 1..5 {
                assert_eq!(gx.get(x, y), 1.0);
                assert_eq!(gy.get(x, y), 0.0);
            }
        }

        let plane = Image::from_fn(8, 8, |x, y| 3.0 * x as f64 + 4.0 * y as f64).unwrap();
        let (gx, gy) = plane.gradient().unwrap();
        for y in 1..7 {
            for x in 1..7 {
                assert_eq!((gx.get(x, y), gy.get(x, y)), (3.0, 4.0));
            }
        }
        // One-sided on the border of an affine raster is exact too.
        assert_eq!(gx.get(0, 0), 3.0);
        assert_eq!(gy.get(7, 7), 4.0);
    }

    #[test]
    fn gradient_needs_3x3() {
        assert!(Image::filled(2, 5, 0.0).unwrap().gradient().is_err());
    }

    #[test]
    fn region_parsing_and_levels() {
        let r: PixelRegion = "10, 20,150,115".parse().unwrap();
        assert_eq!(r, PixelRegion::new(10, 20, 150, 115));
        assert!("1,2,3".parse::<PixelRegion>().is_err());
        assert!("1,2,0,3".parse::<PixelRegion>().is_err());
        assert_eq!(r.at_level(2), PixelRegion::new(2, 5, 37, 28));
        assert!(r.fits(200, 200, 1));
        assert!(!PixelRegion::new(0, 5, 10, 10).fits(100, 100, 1));
    }

    #[test]
    fn multichannel_layout() {
        let a = Image::from_fn(3, 2, |x, y| (x + 10 * y) as f64).unwrap();
        let b = a.map(|v| -v).unwrap();
        let m = MultiChannelImage::from_channels(vec![a.clone(), b]).unwrap();
        assert_eq!(m.channels(), 2);
        assert_eq!(m.get(1, 2, 1), -12.0);
        assert_eq!(m.channel_image(0), a);
        assert_eq!(m.pixel(1, 1), vec![11.0, -11.0]);
    }
}
