//! Census/LBP codes and the 8-channel bit-planes representation.
//!
//! Each bit compares the centre pixel against one neighbour in the 3x3 ring,
//! `[I(x) op I(x + d_i)]`. The single-channel code packs the bits with the
//! first offset in the least significant position; bit-planes keep each bit
//! as its own `{0, 1}` channel so that channel-wise SSD is the Hamming
//! distance between codes, independent of the neighbour order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, MultiChannelImage, PixelRegion};

/// Pixel comparison `center op neighbour`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparisonOp {
    #[default]
    Gt,
    Ge,
    Lt,
    Le,
}

impl ComparisonOp {
    pub const ALL: [ComparisonOp; 4] = [Self::Gt, Self::Ge, Self::Lt, Self::Le];

    #[inline]
    pub fn test(self, center: f64, neighbor: f64) -> bool {
        match self {
            Self::Gt => center > neighbor,
            Self::Ge => center >= neighbor,
            Self::Lt => center < neighbor,
            Self::Le => center <= neighbor,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gt => "gt",
            Self::Ge => "ge",
            Self::Lt => "lt",
            Self::Le => "le",
        }
    }
}

impl std::str::FromStr for ComparisonOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gt" | ">" => Ok(Self::Gt),
            "ge" | ">=" => Ok(Self::Ge),
            "lt" | "<" => Ok(Self::Lt),
            "le" | "<=" => Ok(Self::Le),
            _ => Err(Error::Config(format!("unknown comparison operator '{s}'"))),
        }
    }
}

/// Ordered displacements of the 8 neighbours in the 3x3 ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborOffsets([(i32, i32); 8]);

impl NeighborOffsets {
    /// Row-major order over the ring; bit/channel `j` is offset `j`.
    pub const CANONICAL: NeighborOffsets =
        NeighborOffsets([(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]);

    pub fn new(offsets: [(i32, i32); 8]) -> Result<Self> {
        for (i, &(dx, dy)) in offsets.iter().enumerate() {
            if !(-1..=1).contains(&dx) || !(-1..=1).contains(&dy) || (dx, dy) == (0, 0) {
                return Err(Error::Config(format!("offset ({dx}, {dy}) not in the 3x3 ring")));
            }
            if offsets[..i].contains(&(dx, dy)) {
                return Err(Error::Config(format!("duplicate offset ({dx}, {dy})")));
            }
        }
        Ok(Self(offsets))
    }

    /// Reorders the offsets: entry `j` of the result is entry `perm[j]`.
    pub fn permuted(&self, perm: &[usize; 8]) -> Result<Self> {
        Self::new(perm.map(|i| self.0[i % 8]))
    }

    pub fn as_slice(&self) -> &[(i32, i32); 8] {
        &self.0
    }
}

impl Default for NeighborOffsets {
    fn default() -> Self {
        Self::CANONICAL
    }
}

/// Dense single-channel LBP codes with a validity mask (1-pixel border invalid).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbpImage {
    width: usize,
    height: usize,
    codes: Vec<u8>,
    valid: Vec<bool>,
}

impl LbpImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn code(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    /// Builds an image directly from codes; the 1-pixel border is marked invalid.
    pub fn from_codes(width: usize, height: usize, codes: Vec<u8>) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::TooSmall(format!("LBP image {width}x{height}")));
        }
        if codes.len() != width * height {
            return Err(Error::ShapeMismatch("code count".into()));
        }
        Ok(Self {
            width,
            height,
            codes,
            valid: border_mask(width, height, 1),
        })
    }

    /// Codes as real intensities, for single-channel alignment.
    pub fn to_image(&self) -> Image {
        Image::new(self.width, self.height, self.codes.iter().map(|&c| c as f64).collect())
            .expect("shape already validated")
    }
}

/// `true` for pixels at least `margin` away from every border.
pub fn border_mask(width: usize, height: usize, margin: usize) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    if width > 2 * margin && height > 2 * margin {
        for y in margin..height - margin {
            mask[y * width + margin..y * width + width - margin].fill(true);
        }
    }
    mask
}

fn check_descriptor_size(img: &Image) -> Result<()> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::TooSmall(format!(
            "descriptor needs at least 3x3, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

#[inline]
fn code_at(data: &[f64], width: usize, x: usize, y: usize, op: ComparisonOp, offsets: &NeighborOffsets) -> u8 {
    let center = data[y * width + x];
    let mut code = 0u8;
    for (bit, &(dx, dy)) in offsets.0.iter().enumerate() {
        let nx = (x as isize + dx as isize) as usize;
        let ny = (y as isize + dy as isize) as usize;
        if op.test(center, data[ny * width + nx]) {
            code |= 1 << bit;
        }
    }
    code
}

/// LBP code at one interior pixel.
pub fn lbp_code(img: &Image, x: usize, y: usize, op: ComparisonOp, offsets: &NeighborOffsets) -> Result<u8> {
    if x == 0 || y == 0 || x + 1 >= img.width() || y + 1 >= img.height() {
        return Err(Error::Border { x, y });
    }
    Ok(code_at(img.data(), img.width(), x, y, op, offsets))
}

/// LBP codes at every interior pixel; the border is zero and invalid.
pub fn compute_lbp(img: &Image, op: ComparisonOp, offsets: &NeighborOffsets) -> Result<LbpImage> {
    check_descriptor_size(img)?;
    let (w, h) = (img.width(), img.height());
    let mut codes = vec![0u8; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            codes[y * w + x] = code_at(img.data(), w, x, y, op, offsets);
        }
    }
    LbpImage::from_codes(w, h, codes)
}

/// The 8 bit-planes; channel `j` holds `[I(x) op I(x + d_j)]`, zero on the border.
pub fn compute_bitplanes(img: &Image, op: ComparisonOp, offsets: &NeighborOffsets) -> Result<MultiChannelImage> {
    check_descriptor_size(img)?;
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let src = img.data();
    let mut data = vec![0.0; 8 * n];
    for (j, &(dx, dy)) in offsets.0.iter().enumerate() {
        let plane = &mut data[j * n..(j + 1) * n];
        let shift = dy as isize * w as isize + dx as isize;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                let neighbor = src[(i as isize + shift) as usize];
                plane[i] = op.test(src[i], neighbor) as u8 as f64;
            }
        }
    }
    MultiChannelImage::new(w, h, 8, data)
}

fn check_region(width: usize, height: usize, region: PixelRegion) -> Result<()> {
    if !region.fits(width, height, 1) {
        return Err(Error::ShapeMismatch(format!(
            "region {region:?} not inside the valid interior of {width}x{height}"
        )));
    }
    Ok(())
}

/// Sum of per-pixel Hamming distances between codes over `region`.
pub fn hamming(a: &LbpImage, b: &LbpImage, region: PixelRegion) -> Result<u64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::ShapeMismatch("LBP images differ in size".into()));
    }
    check_region(a.width, a.height, region)?;
    Ok(region
        .pixels()
        .map(|(x, y)| (a.code(x, y) ^ b.code(x, y)).count_ones() as u64)
        .sum())
}

/// Sum of squared channel differences over `region`.
pub fn ssd_multichannel(a: &MultiChannelImage, b: &MultiChannelImage, region: PixelRegion) -> Result<f64> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(Error::ShapeMismatch("multi-channel images differ in shape".into()));
    }
    if !region.fits(a.width(), a.height(), 0) {
        return Err(Error::ShapeMismatch(format!("region {region:?} outside image")));
    }
    let mut total = 0.0;
    for c in 0..a.channels() {
        let (ca, cb) = (a.channel(c), b.channel(c));
        for (x, y) in region.pixels() {
            let i = y * a.width() + x;
            let d = ca[i] - cb[i];
            total += d * d;
        }
    }
    Ok(total)
}

/// Mean over a `k x k` window with edge replication. `k <= 1` is a copy.
pub fn box_filter(data: &[f64], width: usize, height: usize, k: usize) -> Vec<f64> {
    if k <= 1 {
        return data.to_vec();
    }
    let r = (k / 2) as isize;
    let taps = (2 * r + 1) as f64;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut horiz = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for d in -r..=r {
                acc += data[y * width + clamp(x as isize + d, width)];
            }
            horiz[y * width + x] = acc / taps;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for d in -r..=r {
                acc += horiz[clamp(y as isize + d, height) * width + x];
            }
            out[y * width + x] = acc / taps;
        }
    }
    out
}

/// The per-pixel representation the aligner works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Representation {
    /// Raw intensities, one channel.
    Raw,
    /// Eight bit-plane channels, optionally box-smoothed (`smoothing` is the
    /// window side; 0 or 1 disables it).
    BitPlanes { op: ComparisonOp, smoothing: usize },
    /// Packed LBP codes used as a single intensity channel.
    Lbp { op: ComparisonOp },
}

impl Default for Representation {
    fn default() -> Self {
        Self::BitPlanes {
            op: ComparisonOp::Gt,
            smoothing: 0,
        }
    }
}

impl Representation {
    pub fn bitplanes(op: ComparisonOp) -> Self {
        Self::BitPlanes { op, smoothing: 0 }
    }

    pub fn channels(&self) -> usize {
        match self {
            Self::BitPlanes { .. } => 8,
            Self::Raw | Self::Lbp { .. } => 1,
        }
    }

    fn descriptor_radius(&self) -> usize {
        match self {
            Self::Raw => 0,
            Self::BitPlanes { .. } | Self::Lbp { .. } => 1,
        }
    }

    fn smoothing_radius(&self) -> usize {
        match self {
            Self::BitPlanes { smoothing, .. } if *smoothing > 1 => smoothing / 2,
            _ => 0,
        }
    }

    /// Pixels lost at each border before the representation is exact.
    pub fn radius(&self) -> usize {
        self.descriptor_radius() + self.smoothing_radius()
    }

    pub fn name(&self) -> String {
        match self {
            Self::Raw => "raw".into(),
            Self::BitPlanes { op, smoothing } if *smoothing > 1 => format!("bitplanes-{}-s{smoothing}", op.name()),
            Self::BitPlanes { op, .. } => format!("bitplanes-{}", op.name()),
            Self::Lbp { op } => format!("lbp-{}", op.name()),
        }
    }

    /// Dense representation of a whole image.
    pub fn compute(&self, img: &Image) -> Result<MultiChannelImage> {
        let mask = vec![true; img.width() * img.height()];
        let (data, _) = self.compute_interleaved(img.data(), &mask, img.width(), img.height());
        let d = self.channels();
        let n = img.width() * img.height();
        let mut planar = vec![0.0; d * n];
        for i in 0..n {
            for c in 0..d {
                planar[c * n + i] = data[i * d + c];
            }
        }
        MultiChannelImage::new(img.width(), img.height(), d, planar)
    }

    /// Computes the representation on a raster whose samples may be missing.
    ///
    /// Output is pixel-interleaved (`d` values per pixel). A pixel is valid
    /// when every sample its descriptor (and smoothing window) touches is
    /// present and inside the raster.
    pub(crate) fn compute_interleaved(
        &self,
        data: &[f64],
        present: &[bool],
        width: usize,
        height: usize,
    ) -> (Vec<f64>, Vec<bool>) {
        let n = width * height;
        let d = self.channels();
        let mut out = vec![0.0; n * d];
        let mut valid = vec![false; n];
        match *self {
            Self::Raw => {
                out.copy_from_slice(data);
                valid.copy_from_slice(present);
            }
            Self::BitPlanes { op, .. } | Self::Lbp { op } => {
                let offsets = NeighborOffsets::CANONICAL;
                let packed = matches!(self, Self::Lbp { .. });
                for y in 1..height.saturating_sub(1) {
                    for x in 1..width - 1 {
                        let i = y * width + x;
                        let window_ok = (y - 1..=y + 1)
                            .all(|yy| present[yy * width + x - 1..=yy * width + x + 1].iter().all(|&p| p));
                        if !window_ok {
                            continue;
                        }
                        valid[i] = true;
                        let center = data[i];
                        let mut code = 0u32;
                        for (j, &(dx, dy)) in offsets.0.iter().enumerate() {
                            let ni =
                                ((y as isize + dy as isize) as usize) * width + (x as isize + dx as isize) as usize;
                            let bit = op.test(center, data[ni]);
                            if packed {
                                code |= (bit as u32) << j;
                            } else {
                                out[i * d + j] = bit as u8 as f64;
                            }
                        }
                        if packed {
                            out[i] = code as f64;
                        }
                    }
                }
            }
        }
        let r = self.smoothing_radius();
        if r > 0 {
            let k = 2 * r + 1;
            let mut plane = vec![0.0; n];
            for c in 0..d {
                for i in 0..n {
                    plane[i] = out[i * d + c];
                }
                let smoothed = box_filter(&plane, width, height, k);
                for i in 0..n {
                    out[i * d + c] = smoothed[i];
                }
            }
            valid = erode(&valid, width, height, r);
        }
        (out, valid)
    }
}

/// A pixel survives when its `(2r+1)^2` neighbourhood is entirely valid.
pub(crate) fn erode(mask: &[bool], width: usize, height: usize, r: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    if width <= 2 * r || height <= 2 * r {
        return out;
    }
    for y in r..height - r {
        for x in r..width - r {
            out[y * width + x] =
                (y - r..=y + r).all(|yy| mask[yy * width + x - r..=yy * width + x + r].iter().all(|&v| v));
        }
    }
    out
}
