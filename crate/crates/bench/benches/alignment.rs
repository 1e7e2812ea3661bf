use bitplanes::eval::{
    centered_region, procedural_texture, synthetic_pair, synthetic_sequence, trial_rng, PerturbationRanges,
    SequenceSettings,
};
use bitplanes::*;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn descriptors(c: &mut Criterion) {
    let img = procedural_texture(320, 240, 1).unwrap();
    let off = NeighborOffsets::CANONICAL;
    let mut g = c.benchmark_group("descriptor");
    g.bench_function("lbp_320x240", |b| {
        b.iter(|| compute_lbp(&img, ComparisonOp::Gt, &off).unwrap())
    });
    g.bench_function("bitplanes_320x240", |b| {
        b.iter(|| compute_bitplanes(&img, ComparisonOp::Gt, &off).unwrap())
    });
    g.finish();
}

fn alignment(c: &mut Criterion) {
    let img = procedural_texture(320, 240, 2).unwrap();
    let region = centered_region(320, 240, 150, 115).unwrap();
    let pair = synthetic_pair(
        &img,
        region,
        WarpModel::Homography,
        &PerturbationRanges::default(),
        &mut trial_rng(0, 0),
    )
    .unwrap();
    let mut g = c.benchmark_group("align_150x115");
    for rep in [Representation::Raw, Representation::bitplanes(ComparisonOp::Gt)] {
        for variant in Variant::ALL {
            let cfg = AlignConfig {
                variant,
                representation: rep,
                ..AlignConfig::default()
            };
            let template = precompute_template(&img, region, &cfg).unwrap();
            let init = WarpParams::identity(cfg.model);
            g.bench_function(BenchmarkId::new(rep.name(), variant.name()), |b| {
                b.iter(|| align(&template, &pair.moving, &init, &cfg).unwrap())
            });
        }
    }
    let cfg = AlignConfig::default();
    g.bench_function("precompute_template", |b| {
        b.iter(|| precompute_template(&img, region, &cfg).unwrap())
    });
    g.finish();
}

fn tracking(c: &mut Criterion) {
    let img = procedural_texture(320, 240, 3).unwrap();
    let region = centered_region(320, 240, 150, 115).unwrap();
    let settings = SequenceSettings {
        frames: 20,
        ..SequenceSettings::default()
    };
    let seq = synthetic_sequence(&img, region, &settings, &mut trial_rng(0, 1)).unwrap();
    c.bench_function("track_20_frames_150x115", |b| {
        b.iter(|| track_sequence(&seq.frames, region, &AlignConfig::default()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = descriptors, alignment, tracking
}
criterion_main!(benches);
