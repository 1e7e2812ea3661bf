use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::PixelRegion;
use crate::warp::WarpParams;

/// Tracking counts as successful when the overlap exceeds this.
pub const SUCCESS_OVERLAP: f64 = 0.9;

/// Samples per pixel along each axis when rasterizing quads.
pub const SUPERSAMPLING: usize = 4;

/// Overlap of two warped quads with a flag for degenerate input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapMeasure {
    pub value: f64,
    /// A quad was self-intersecting or collapsed; `value` is then 0.
    pub degenerate: bool,
}

/// Intersection over union of `region` mapped by `estimated` and by `truth`.
/// Degenerate quads give 0 (see [`overlap_measure`] for the flag).
pub fn overlap(estimated: &WarpParams, truth: &WarpParams, region: PixelRegion) -> Result<f64> {
    Ok(overlap_measure(estimated, truth, region)?.value)
}

pub fn overlap_measure(estimated: &WarpParams, truth: &WarpParams, region: PixelRegion) -> Result<OverlapMeasure> {
    let a = warp_quad(estimated, region)?;
    let b = warp_quad(truth, region)?;
    if is_degenerate(&a) || is_degenerate(&b) {
        log::debug!("degenerate quad in overlap computation");
        return Ok(OverlapMeasure {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(OverlapMeasure {
        value: quad_iou(&a, &b),
        degenerate: false,
    })
}

/// Region corners mapped through `warp`.
pub fn warp_quad(warp: &WarpParams, region: PixelRegion) -> Result<[(f64, f64); 4]> {
    let c = region.corners();
    let mut out = [(0.0, 0.0); 4];
    for (o, &(x, y)) in out.iter_mut().zip(&c) {
        *o = warp.warp_point(x, y)?;
    }
    Ok(out)
}

/// Supersampled IoU of two simple quads on the integer grid.
pub fn quad_iou(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> f64 {
    let bounds = |q: &[(f64, f64); 4]| {
        q.iter()
            .fold((f64::MAX, f64::MAX, f64::MIN, f64::MIN), |(x0, y0, x1, y1), &(x, y)| {
                (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
            })
    };
    let (ax0, ay0, ax1, ay1) = bounds(a);
    let (bx0, by0, bx1, by1) = bounds(b);
    let (x0, y0) = (ax0.min(bx0).floor(), ay0.min(by0).floor());
    let (x1, y1) = (ax1.max(bx1).ceil(), ay1.max(by1).ceil());
    let s = SUPERSAMPLING as f64;
    let nx = ((x1 - x0) * s) as usize;
    let ny = ((y1 - y0) * s) as usize;
    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..ny {
        let y = y0 + (j as f64 + 0.5) / s;
        let (ra, rb) = (row_span(a, y), row_span(b, y));
        if ra.is_none() && rb.is_none() {
            continue;
        }
        for i in 0..nx {
            let x = x0 + (i as f64 + 0.5) / s;
            let ia = ra.is_some_and(|r| inside_spans(&r, x));
            let ib = rb.is_some_and(|r| inside_spans(&r, x));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Sorted x-crossings of the horizontal line at `y` with the quad's edges
/// (even-odd rule), or `None` when the line misses the quad.
fn row_span(q: &[(f64, f64); 4], y: f64) -> Option<[f64; 4]> {
    let mut xs = [f64::INFINITY; 4];
    let mut n = 0;
    for k in 0..4 {
        let (p, r) = (q[k], q[(k + 1) % 4]);
        if (p.1 <= y) != (r.1 <= y) {
            xs[n] = p.0 + (y - p.1) * (r.0 - p.0) / (r.1 - p.1);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs)
}

fn inside_spans(xs: &[f64; 4], x: f64) -> bool {
    (xs[0] <= x && x < xs[1]) || (xs[2] <= x && x < xs[3])
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segments_cross(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Self-intersecting or zero-area quad.
pub fn is_degenerate(q: &[(f64, f64); 4]) -> bool {
    let twice_area: f64 = (0..4)
        .map(|k| q[k].0 * q[(k + 1) % 4].1 - q[(k + 1) % 4].0 * q[k].1)
        .sum();
    !twice_area.is_finite()
        || twice_area.abs() < 1e-9
        || segments_cross(q[0], q[1], q[2], q[3])
        || segments_cross(q[1], q[2], q[3], q[0])
}

/// Per-frame overlaps of a sequence with success flags and the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapScore {
    pub per_frame: Vec<f64>,
    pub success: Vec<bool>,
    pub mean: f64,
}

impl OverlapScore {
    pub fn from_values(per_frame: Vec<f64>) -> Self {
        let success = per_frame.iter().map(|&o| o > SUCCESS_OVERLAP).collect();
        let mean = if per_frame.is_empty() {
            0.0
        } else {
            per_frame.iter().sum::<f64>() / per_frame.len() as f64
        };
        Self {
            per_frame,
            success,
            mean,
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.success.is_empty() {
            return 0.0;
        }
        self.success.iter().filter(|&&s| s).count() as f64 / self.success.len() as f64
    }
}
