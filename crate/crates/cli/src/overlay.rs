use bitplanes::eval::warp_quad;
use bitplanes::{Image, PixelRegion, WarpParams};

/// Draws a one-pixel polyline through `quad` (closed) with `value`.
pub fn draw_quad(img: &mut Image, quad: &[(f64, f64); 4], value: f64) {
    for k in 0..4 {
        let (a, b) = (quad[k], quad[(k + 1) % 4]);
        let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()) * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (x, y) = ((a.0 + t * (b.0 - a.0)).round(), (a.1 + t * (b.1 - a.1)).round());
            if x >= 0.0 && y >= 0.0 && (x as usize) < img.width() && (y as usize) < img.height() {
                img.set(x as usize, y as usize, value);
            }
        }
    }
}

/// Frame with the estimated quad in white and the ground-truth quad, when
/// known, in black.
pub fn render(frame: &Image, region: PixelRegion, estimate: Option<&WarpParams>, truth: Option<&WarpParams>) -> Image {
    let mut out = frame.clone();
    if let Some(q) = truth.and_then(|t| warp_quad(t, region).ok()) {
        draw_quad(&mut out, &q, 0.0);
    }
    if let Some(q) = estimate.and_then(|e| warp_quad(e, region).ok()) {
        draw_quad(&mut out, &q, 255.0);
    }
    out
}
