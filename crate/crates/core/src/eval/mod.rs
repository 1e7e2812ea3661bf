//! Synthetic experiments: appearance perturbation, overlap scoring, cost
//! surfaces, linearization quality and the alignment comparisons.

mod experiments;
mod overlap;
mod photometric;
mod surface;
mod synthetic;

pub use experiments::{
    axis_shifts, bias_methods, bias_settings, cost_surface_experiment, lbp_bias_experiment, mode_name, patch_regions,
    precompute_experiment, robustness_experiment, snr_experiment, success_rate, Histogram, Method, MethodBias,
    PrecomputeRecord, SnrRecord, SurfaceRecord, TrialRecord, TrialSettings,
};
pub use overlap::{
    is_degenerate, overlap, overlap_measure, quad_iou, warp_quad, OverlapMeasure, OverlapScore, SUCCESS_OVERLAP,
    SUPERSAMPLING,
};
pub use photometric::{photometric_perturb, PerturbationRanges, PhotometricParams};
pub use surface::{
    cost_surface, linearization_snr, linearization_terms, shift_grid, snr_db, CostSurface, LinearizationTerms,
};
pub use synthetic::{
    centered_region, point_rms, procedural_texture, run_trials, score_tracking, synthetic_pair, synthetic_sequence,
    trial_rng, FrameScore, SequenceSettings, SyntheticPair, SyntheticSequence,
};
