use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bitplanes::eval::{
    axis_shifts, bias_methods, bias_settings, centered_region, cost_surface_experiment, lbp_bias_experiment, mode_name,
    precompute_experiment, run_trials, score_tracking, snr_experiment, synthetic_sequence, trial_rng, SequenceSettings,
    TrialSettings,
};
use bitplanes::{save_image, AlignConfig, ComparisonOp, Image, Representation, Variant, WarpModel};
use serde_json::json;

use crate::args::{ExperimentArgs, ExperimentKind};
use crate::frames::{list_images, load_all};
use crate::output::{create_dir, json_num, mean, median, num, write_csv, write_json, SCHEMA_VERSION};

struct Inputs {
    names: Vec<String>,
    images: Vec<Image>,
}

fn load_inputs(dir: &Path) -> Result<Inputs> {
    let paths = list_images(dir)?;
    if paths.is_empty() {
        bail!("no images in {}", dir.display());
    }
    let names = paths
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    Ok(Inputs {
        names,
        images: load_all(&paths)?,
    })
}

pub fn run(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.solver.config()?;
    if args.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let inputs = load_inputs(&args.images)?;
    create_dir(&args.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("cannot start worker threads")?;
    pool.install(|| match args.kind {
        ExperimentKind::CostSurface => cost_surface(args, &cfg, &inputs),
        ExperimentKind::Snr => snr(args, &cfg, &inputs),
        ExperimentKind::LbpBias => lbp_bias(args, &cfg, &inputs),
        ExperimentKind::Precompute => precompute(args, &cfg, &inputs),
        ExperimentKind::SyntheticBench => synthetic_bench(args, &cfg, &inputs),
    })
}

/// Raw intensity and the configured bit-planes.
fn compared_representations(cfg: &AlignConfig) -> Vec<Representation> {
    let bits = match cfg.representation {
        r @ Representation::BitPlanes { .. } => r,
        _ => Representation::bitplanes(ComparisonOp::Gt),
    };
    vec![Representation::Raw, bits]
}

fn cost_surface(args: &ExperimentArgs, cfg: &AlignConfig, inputs: &Inputs) -> Result<()> {
    let reps = compared_representations(cfg);
    let records = cost_surface_experiment(&inputs.images, &reps, args.patch, args.range, args.step)?;
    let mut rows = Vec::new();
    for r in &records {
        let s = &r.surface;
        for iy in 0..s.size() {
            for ix in 0..s.size() {
                rows.push(vec![
                    inputs.names[r.image].clone(),
                    r.patch.to_string(),
                    r.representation.clone(),
                    num(s.shifts[ix]),
                    num(s.shifts[iy]),
                    num(s.at(ix, iy)),
                ]);
            }
        }
    }
    write_csv(
        &args.out.join("cost_surface.csv"),
        &["image", "patch", "representation", "dx", "dy", "cost"],
        &rows,
    )?;
    let per_rep: Vec<_> = reps
        .iter()
        .map(|rep| {
            let mine: Vec<_> = records.iter().filter(|r| r.representation == rep.name()).collect();
            let strict = mine.iter().filter(|r| r.surface.is_strict_minimum_at_zero()).count();
            json!({
                "representation": rep.name(),
                "patches": mine.len(),
                "strict_minimum_at_zero": strict,
                "strict_minimum_fraction": strict as f64 / mine.len().max(1) as f64,
            })
        })
        .collect();
    for p in &per_rep {
        println!(
            "{}: zero shift is the strict minimum in {}/{} patches",
            p["representation"], p["strict_minimum_at_zero"], p["patches"]
        );
    }
    write_json(
        &args.out.join("summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": "cost-surface",
            "patch": args.patch,
            "range": args.range,
            "step": args.step,
            "representations": per_rep,
        }),
    )
}

fn snr(args: &ExperimentArgs, cfg: &AlignConfig, inputs: &Inputs) -> Result<()> {
    let reps = compared_representations(cfg);
    let shifts = axis_shifts(args.range, args.step);
    let records = snr_experiment(&inputs.images, &reps, args.patch, &shifts)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.representation.clone(),
                num(r.dx),
                num(r.dy),
                num(r.signal),
                num(r.error),
                num(r.snr_db),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("snr.csv"),
        &["representation", "dx", "dy", "signal", "error", "snr_db"],
        &rows,
    )?;
    let entries: Vec<_> = records
        .iter()
        .map(|r| json!({"representation": r.representation, "dx": r.dx, "dy": r.dy, "snr_db": json_num(r.snr_db)}))
        .collect();
    println!("wrote {} pooled SNR values", records.len());
    write_json(
        &args.out.join("summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": "snr",
            "patch": args.patch,
            "records": entries,
        }),
    )
}

fn lbp_bias(args: &ExperimentArgs, cfg: &AlignConfig, inputs: &Inputs) -> Result<()> {
    let settings = bias_settings(args.trials.unwrap_or(200), args.seed);
    let base = AlignConfig {
        model: settings.model,
        ..*cfg
    };
    let report = lbp_bias_experiment(&inputs.images, &settings, &bias_methods(&base))?;
    let mut rows = Vec::new();
    for m in &report {
        for (i, &c) in m.histogram.counts.iter().enumerate() {
            rows.push(vec![m.method.clone(), num(m.histogram.bin_center(i)), c.to_string()]);
        }
        println!("{}: rms {:.4}, {} failed alignments", m.method, m.rms, m.failures);
    }
    write_csv(
        &args.out.join("lbp_bias_hist.csv"),
        &["method", "bin_center", "count"],
        &rows,
    )?;
    write_json(
        &args.out.join("summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": "lbp-bias",
            "settings": settings,
            "methods": report.iter().map(|m| json!({"method": m.method, "rms": m.rms, "failures": m.failures})).collect::<Vec<_>>(),
        }),
    )
}

fn precompute(args: &ExperimentArgs, cfg: &AlignConfig, inputs: &Inputs) -> Result<()> {
    let settings = TrialSettings {
        trials: args.trials.unwrap_or(100),
        seed: args.seed,
        ..TrialSettings::default()
    };
    let models = [WarpModel::Translation, WarpModel::Affine];
    let records = precompute_experiment(&inputs.images, &settings, &models, cfg)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.model.name().into(),
                r.variant.name().into(),
                r.mode.into(),
                num(r.point_rms),
                r.converged.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("precompute.csv"),
        &["trial", "model", "variant", "mode", "point_rms", "converged", "error"],
        &rows,
    )?;
    let mut groups = Vec::new();
    let mut per_model = Vec::new();
    for model in models {
        for variant in Variant::ALL {
            for recompute in [false, true] {
                let v: Vec<f64> = records
                    .iter()
                    .filter(|r| r.model == model && r.variant == variant && r.mode == mode_name(recompute))
                    .map(|r| r.point_rms)
                    .collect();
                groups.push(json!({
                    "model": model, "variant": variant, "mode": mode_name(recompute),
                    "median": json_num(median(&v)), "mean": json_num(mean(&v)),
                }));
            }
        }
        let pick = |recompute: bool| -> Vec<f64> {
            records
                .iter()
                .filter(|r| r.model == model && r.mode == mode_name(recompute))
                .map(|r| r.point_rms)
                .collect()
        };
        let (wc, rc) = (pick(false), pick(true));
        let diff: Vec<f64> = wc.iter().zip(&rc).map(|(a, b)| a - b).collect();
        println!(
            "{}: median point RMS warp-channels {:.5}, recompute {:.5}; paired mean difference {:.5}",
            model.name(),
            median(&wc),
            median(&rc),
            mean(&diff)
        );
        per_model.push(json!({
            "model": model,
            "median_warp_channels": json_num(median(&wc)),
            "median_recompute": json_num(median(&rc)),
            "paired_mean_difference": json_num(mean(&diff)),
        }));
    }
    write_json(
        &args.out.join("summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": "precompute",
            "settings": settings,
            "representation": cfg.representation,
            "groups": groups,
            "models": per_model,
        }),
    )
}

/// Method label used by the synthetic benchmark.
pub fn method_name(cfg: &AlignConfig) -> String {
    format!("{}/{}", cfg.representation.name(), cfg.variant.name())
}

fn synthetic_bench(args: &ExperimentArgs, cfg: &AlignConfig, inputs: &Inputs) -> Result<()> {
    let sequences = args.trials.unwrap_or(inputs.images.len());
    let settings = SequenceSettings {
        frames: args.frames,
        ..SequenceSettings::default()
    };
    let generated = run_trials(sequences, |s| {
        let k = s % inputs.images.len();
        let src = &inputs.images[k];
        let region = match args.rect {
            Some(r) => r,
            None => centered_region(src.width(), src.height(), 100, 100)?,
        };
        synthetic_sequence(src, region, &settings, &mut trial_rng(args.seed, s)).map(|seq| (k, seq))
    });
    let generated = generated.into_iter().collect::<bitplanes::Result<Vec<_>>>()?;

    let mut dirs: Vec<PathBuf> = Vec::new();
    for (s, (k, seq)) in generated.iter().enumerate() {
        let dir = args.out.join(format!("seq_{s:02}"));
        create_dir(&dir)?;
        for (f, frame) in seq.frames.iter().enumerate() {
            save_image(frame, dir.join(format!("frame_{f:04}.pgm")))?;
        }
        let gt: String = seq
            .truth
            .iter()
            .map(|w| serde_json::to_string(w).map(|l| l + "\n"))
            .collect::<serde_json::Result<_>>()?;
        std::fs::write(dir.join("gt.jsonl"), gt).with_context(|| format!("cannot write {}", dir.display()))?;
        write_json(
            &dir.join("meta.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "source": inputs.names[*k],
                "seed": args.seed,
                "sequence": s,
                "region": seq.region,
                "settings": settings,
            }),
        )?;
        dirs.push(dir);
    }

    let mut methods = Vec::new();
    for rep in compared_representations(cfg) {
        for variant in Variant::ALL {
            methods.push(AlignConfig {
                variant,
                representation: rep,
                ..*cfg
            });
        }
    }
    let jobs: Vec<(usize, usize)> = (0..generated.len())
        .flat_map(|s| (0..methods.len()).map(move |m| (s, m)))
        .collect();
    let scored = run_trials(jobs.len(), |j| {
        let (s, m) = jobs[j];
        let seq = &generated[s].1;
        score_tracking(&seq.frames, seq.region, Some(&seq.truth), &methods[m])
            .map(|(_, summary)| summary.expect("ground truth given"))
    });
    let scored = scored.into_iter().collect::<bitplanes::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut per_sequence = Vec::new();
    for s in 0..generated.len() {
        let mut entries = Vec::new();
        for (m, method) in methods.iter().enumerate() {
            let score = &scored[s * methods.len() + m];
            rows.push(vec![
                format!("seq_{s:02}"),
                method_name(method),
                score.per_frame.len().to_string(),
                num(score.success_rate()),
                num(score.mean),
            ]);
            entries.push(json!({"method": method_name(method), "success_rate": score.success_rate(), "mean_overlap": score.mean}));
        }
        per_sequence.push(
            json!({"sequence": format!("seq_{s:02}"), "source": inputs.names[generated[s].0], "methods": entries}),
        );
    }
    let mut overall = Vec::new();
    for (m, method) in methods.iter().enumerate() {
        let all: Vec<&bitplanes::eval::OverlapScore> =
            (0..generated.len()).map(|s| &scored[s * methods.len() + m]).collect();
        let frames: usize = all.iter().map(|s| s.per_frame.len()).sum();
        let ok: usize = all.iter().map(|s| s.success.iter().filter(|&&b| b).count()).sum();
        let total: f64 = all.iter().map(|s| s.per_frame.iter().sum::<f64>()).sum();
        let rate = ok as f64 / frames.max(1) as f64;
        println!("{}: success rate {:.4} over {frames} frames", method_name(method), rate);
        overall.push(
            json!({"method": method_name(method), "success_rate": rate, "mean_overlap": total / frames.max(1) as f64}),
        );
    }
    write_csv(
        &args.out.join("bench.csv"),
        &["sequence", "method", "frames", "success_rate", "mean_overlap"],
        &rows,
    )?;
    write_json(
        &args.out.join("summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": "synthetic-bench",
            "config": cfg,
            "sequences": per_sequence,
            "methods": overall,
        }),
    )
}
