use super::Image;
use crate::error::{Error, Result};

/// Separable 5-tap binomial smoothing kernel applied before decimation.
pub const BINOMIAL_KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Smallest side length allowed at the coarsest level.
const MIN_LEVEL_SIDE: usize = 3;

/// Gaussian pyramid: level 0 is `img`, each next level is the previous one
/// smoothed with [`BINOMIAL_KERNEL`] and decimated by two (floor sizes).
///
/// Pixel `i` of level `l + 1` sits exactly on pixel `2i` of level `l`.
pub fn build_pyramid(img: &Image, levels: usize) -> Result<Vec<Image>> {
    if levels == 0 {
        return Err(Error::Config("pyramid needs at least one level".into()));
    }
    let (w, h) = (img.width() >> (levels - 1), img.height() >> (levels - 1));
    if w < MIN_LEVEL_SIDE || h < MIN_LEVEL_SIDE {
        return Err(Error::TooSmall(format!(
            "{}x{} image cannot hold {levels} pyramid levels",
            img.width(),
            img.height()
        )));
    }
    let mut pyramid = Vec::with_capacity(levels);
    pyramid.push(img.clone());
    for _ in 1..levels {
        let next = downsample(pyramid.last().expect("non-empty"));
        pyramid.push(next);
    }
    Ok(pyramid)
}

/// Smooth then keep even rows/columns. Borders replicate the edge pixel.
fn downsample(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let (nw, nh) = (w / 2, h / 2);
    let src = img.data();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    // Horizontal pass only at the even columns we keep.
    let mut horiz = vec![0.0; nw * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for nx in 0..nw {
            let cx = (2 * nx) as isize;
            let mut acc = 0.0;
            for (k, &wk) in BINOMIAL_KERNEL.iter().enumerate() {
                acc += wk * row[clamp(cx + k as isize - 2, w)];
            }
            horiz[y * nw + nx] = acc;
        }
    }
    let mut out = vec![0.0; nw * nh];
    for ny in 0..nh {
        let cy = (2 * ny) as isize;
        for nx in 0..nw {
            let mut acc = 0.0;
            for (k, &wk) in BINOMIAL_KERNEL.iter().enumerate() {
                acc += wk * horiz[clamp(cy + k as isize - 2, h) * nw + nx];
            }
            out[ny * nw + nx] = acc;
        }
    }
    Image::new(nw, nh, out).expect("downsampled image has valid shape")
}
