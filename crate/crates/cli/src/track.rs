use std::path::Path;

use anyhow::{bail, Context, Result};
use bitplanes::eval::{score_tracking, FrameScore, OverlapScore};
use bitplanes::{save_image, AlignConfig, Image, PixelRegion, WarpParams};
use serde_json::{json, Value};

use crate::args::TrackArgs;
use crate::frames::{load_all, read_warps, resolve_frames};
use crate::output::{create_dir, json_num, mean, median, num, write_csv, write_json, SCHEMA_VERSION};
use crate::overlay;

/// Template rectangle stored by the synthetic benchmark next to its frames.
fn region_from_meta(input: &str) -> Option<PixelRegion> {
    let meta = Path::new(input).join("meta.json");
    let text = std::fs::read_to_string(meta).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    serde_json::from_value(v.get("region")?.clone()).ok()
}

pub fn run(args: &TrackArgs) -> Result<()> {
    let cfg = args.solver.config()?;
    let paths = resolve_frames(&args.input)?;
    if paths.len() < 2 {
        bail!("need at least two frames, found {} for {}", paths.len(), args.input);
    }
    let region = match args.rect.or_else(|| region_from_meta(&args.input)) {
        Some(r) => r,
        None => bail!("--rect is required (no meta.json next to the frames)"),
    };
    let frames = load_all(&paths)?;
    if !region.fits(frames[0].width(), frames[0].height(), 0) {
        bail!(
            "rectangle {},{},{},{} lies outside the {}x{} first frame",
            region.x,
            region.y,
            region.width,
            region.height,
            frames[0].width(),
            frames[0].height()
        );
    }
    let truth = match &args.gt {
        Some(p) => {
            let t = read_warps(p)?;
            if t.len() != frames.len() {
                bail!("{} has {} warps for {} frames", p.display(), t.len(), frames.len());
            }
            Some(t)
        }
        None => None,
    };

    let (scores, summary) = score_tracking(&frames, region, truth.as_deref(), &cfg)
        .context("cannot build the template from the first frame")?;

    create_dir(&args.out)?;
    write_results(&args.out.join("results.json"), &cfg, region, &scores, summary.as_ref())?;
    write_track_csv(&args.out.join("track.csv"), &scores, truth.is_some(), args.timing)?;
    if args.overlay {
        write_overlays(&args.out.join("overlay"), &frames, region, &scores, truth.as_deref())?;
    }

    println!("tracked {} frames", scores.len());
    if let Some(s) = &summary {
        let ok = s.success.iter().filter(|&&b| b).count();
        println!("success rate: {} ({ok}/{})", s.success_rate(), s.success.len());
        println!("mean overlap: {}", s.mean);
    }
    let ms: Vec<f64> = scores.iter().map(|s| s.millis).collect();
    let avg = mean(&ms);
    eprintln!(
        "timing: median {:.3} ms, mean {:.3} ms, {:.1} fps",
        median(&ms),
        avg,
        1000.0 / avg
    );
    Ok(())
}

fn frame_json(s: &FrameScore) -> Value {
    let mut v = match (&s.result, &s.error) {
        (Some(r), _) => serde_json::to_value(r).expect("result serializes"),
        (None, e) => json!({ "error": e }),
    };
    let obj = v.as_object_mut().expect("object");
    obj.insert("frame".into(), json!(s.frame));
    if let Some(o) = s.overlap {
        obj.insert("overlap".into(), json_num(o));
        obj.insert("success".into(), json!(s.success));
    }
    v
}

fn write_results(
    path: &Path,
    cfg: &AlignConfig,
    region: PixelRegion,
    scores: &[FrameScore],
    summary: Option<&OverlapScore>,
) -> Result<()> {
    let summary = summary.map(|s| {
        json!({
            "frames": s.per_frame.len(),
            "success_rate": s.success_rate(),
            "mean_overlap": s.mean,
        })
    });
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "region": region,
        "frames": scores.iter().map(frame_json).collect::<Vec<_>>(),
        "summary": summary,
    });
    write_json(path, &doc)
}

fn write_track_csv(path: &Path, scores: &[FrameScore], with_truth: bool, timing: bool) -> Result<()> {
    let mut header = vec!["frame"];
    if with_truth {
        header.extend(["o", "success"]);
    }
    header.extend(["iterations", "cost"]);
    if timing {
        header.push("ms");
    }
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| {
            let mut row = vec![s.frame.to_string()];
            if with_truth {
                row.push(num(s.overlap.unwrap_or(0.0)));
                row.push(s.success.unwrap_or(false).to_string());
            }
            row.push(s.iterations().to_string());
            row.push(s.cost().map(num).unwrap_or_default());
            if timing {
                row.push(format!("{:.3}", s.millis));
            }
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn write_overlays(
    dir: &Path,
    frames: &[Image],
    region: PixelRegion,
    scores: &[FrameScore],
    truth: Option<&[WarpParams]>,
) -> Result<()> {
    create_dir(dir)?;
    let first = overlay::render(
        &frames[0],
        region,
        Some(&WarpParams::identity(bitplanes::WarpModel::Translation)),
        None,
    );
    save_image(&first, dir.join("frame_0000.pgm"))?;
    for s in scores {
        let est = s.result.as_ref().map(|r| r.params);
        let img = overlay::render(&frames[s.frame], region, est.as_ref(), truth.map(|t| &t[s.frame]));
        save_image(&img, dir.join(format!("frame_{:04}.pgm", s.frame)))?;
    }
    Ok(())
}
