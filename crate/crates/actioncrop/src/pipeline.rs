//! End-to-end orchestration: flow -> segmentation -> localization run per
//! frame on a worker pool, then the globally coupled temporal stage, then
//! per-frame cropping.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::Result;
use crate::evalharness;
use crate::localize::{self, LocalizeParams};
use crate::motionseg;
use crate::opticalflow::{self, FlowParams};
use crate::retarget::{self, Resample, RetargetParams};
use crate::temporal::{self, PatchTrack, TrackKind};
use crate::videoio::{self, VideoSequence};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub flow: FlowParams,
    pub clusters: usize,
    pub open_radius: u32,
    pub close_radius: u32,
    pub min_component_frac: f64,
    pub a_min_fraction: f64,
    /// Explicit pivot budget; `None` derives round(pivot_fraction * F).
    pub pivot_budget: Option<usize>,
    pub pivot_fraction: f64,
    pub out_size: u32,
    pub resample: Resample,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            flow: FlowParams::default(),
            clusters: 4,
            open_radius: 2,
            close_radius: 3,
            min_component_frac: 0.0005,
            a_min_fraction: 0.25,
            pivot_budget: None,
            pivot_fraction: 0.15,
            out_size: 56,
            resample: Resample::Bilinear,
            seed: 0,
            workers: None,
        }
    }
}

impl PipelineConfig {
    pub fn pivot_budget_for(&self, frame_count: usize) -> usize {
        self.pivot_budget
            .unwrap_or_else(|| ((self.pivot_fraction * frame_count as f64).round() as usize).max(1))
    }
}

/// Config-file counterpart of [`PipelineConfig`]; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub pyramid_levels: Option<u32>,
    pub window_size: Option<usize>,
    pub iterations: Option<u32>,
    pub poly_sigma: Option<f64>,
    pub clusters: Option<usize>,
    pub open_radius: Option<u32>,
    pub close_radius: Option<u32>,
    pub min_component_frac: Option<f64>,
    pub a_min_fraction: Option<f64>,
    pub pivot_budget: Option<usize>,
    pub pivot_fraction: Option<f64>,
    pub out_size: Option<u32>,
    pub resample: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn apply(self, cfg: &mut PipelineConfig) -> std::result::Result<(), String> {
        if let Some(v) = self.pyramid_levels {
            cfg.flow.pyramid_levels = v;
        }
        if let Some(v) = self.window_size {
            cfg.flow.window_size = v;
        }
        if let Some(v) = self.iterations {
            cfg.flow.iterations = v;
        }
        if let Some(v) = self.poly_sigma {
            cfg.flow.poly_sigma = v;
        }
        if let Some(v) = self.clusters {
            cfg.clusters = v;
        }
        if let Some(v) = self.open_radius {
            cfg.open_radius = v;
        }
        if let Some(v) = self.close_radius {
            cfg.close_radius = v;
        }
        if let Some(v) = self.min_component_frac {
            cfg.min_component_frac = v;
        }
        if let Some(v) = self.a_min_fraction {
            cfg.a_min_fraction = v;
        }
        if let Some(v) = self.pivot_budget {
            cfg.pivot_budget = Some(v);
        }
        if let Some(v) = self.pivot_fraction {
            cfg.pivot_fraction = v;
        }
        if let Some(v) = self.out_size {
            cfg.out_size = v;
        }
        if let Some(v) = self.resample {
            cfg.resample = v.parse()?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub flow_ms: u128,
    pub segment_localize_ms: u128,
    pub temporal_ms: u128,
    pub retarget_ms: u128,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub frame_count: usize,
    pub low_confidence_frames: Vec<usize>,
    pub pivots: Vec<usize>,
    pub timings: StageTimings,
}

pub struct PipelineOutput {
    pub raw_track: PatchTrack,
    pub smoothed_track: PatchTrack,
    pub output: VideoSequence,
    pub report: PipelineReport,
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Raw per-frame localization track (flow, segmentation, localization).
pub fn localize_video(seq: &VideoSequence, config: &PipelineConfig) -> (PatchTrack, Vec<usize>, StageTimings) {
    let f_count = seq.frame_count();
    let (w, h) = (seq.width(), seq.height());
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let flows: Vec<_> = in_pool(config.workers, || {
        (0..f_count)
            .into_par_iter()
            .map(|t| {
                // the last frame reuses the flow of the preceding pair
                let (a, b) = if t + 1 < f_count { (t, t + 1) } else { (t - 1, t) };
                let flow = opticalflow::dense_flow(&seq.frames[a], &seq.frames[b], &config.flow)
                    .expect("frames share dimensions");
                opticalflow::flow_to_hsv(&flow)
            })
            .collect()
    });
    timings.flow_ms = t0.elapsed().as_millis();

    let t0 = Instant::now();
    let localize_params = LocalizeParams { a_min_fraction: config.a_min_fraction };
    let localized: Vec<_> = in_pool(config.workers, || {
        flows
            .par_iter()
            .enumerate()
            .map(|(t, hsv)| {
                let c3s = motionseg::segment_frame(
                    hsv,
                    config.clusters,
                    config.seed.wrapping_add(t as u64),
                    config.open_radius,
                    config.close_radius,
                    config.min_component_frac,
                );
                localize::localize_frame(&c3s, &localize_params, w, h, t)
            })
            .collect()
    });
    timings.segment_localize_ms = t0.elapsed().as_millis();

    let low_confidence: Vec<usize> = localized
        .iter()
        .filter(|l| l.low_confidence)
        .map(|l| l.patch.t)
        .collect();
    let track = PatchTrack {
        patches: localized.iter().map(|l| l.patch).collect(),
        kind: TrackKind::Raw,
    };
    (track, low_confidence, timings)
}

/// Cohesion scoring, pivot selection, endpoint correction, polyBezier
/// smoothing, and clamping of a raw track.
pub fn smooth_raw_track(
    raw: &PatchTrack,
    config: &PipelineConfig,
    frame_w: u32,
    frame_h: u32,
) -> Result<(PatchTrack, Vec<usize>)> {
    let scores = temporal::cohesion_scores(raw);
    let budget = config.pivot_budget_for(raw.frame_count());
    let pivots = temporal::select_pivots(&scores, budget)?;
    let corrected = temporal::correct_endpoints(raw, &pivots);
    let smoothed = temporal::smooth_track(&corrected, &pivots, frame_w, frame_h);
    Ok((smoothed, pivots.pt_fin))
}

/// Full pipeline over an in-memory sequence.
pub fn run_pipeline(seq: &VideoSequence, config: &PipelineConfig) -> Result<PipelineOutput> {
    let (raw_track, low_confidence_frames, mut timings) = localize_video(seq, config);

    let t0 = Instant::now();
    let (smoothed_track, pivots) = smooth_raw_track(&raw_track, config, seq.width(), seq.height())?;
    timings.temporal_ms = t0.elapsed().as_millis();

    let t0 = Instant::now();
    let params = RetargetParams { out_size: config.out_size, resample: config.resample };
    let frames: Result<Vec<_>> = in_pool(config.workers, || {
        seq.frames
            .par_iter()
            .zip(&smoothed_track.patches)
            .map(|(f, p)| retarget::crop_patch(f, p, &params))
            .collect()
    });
    let output = VideoSequence::new(frames?)?;
    timings.retarget_ms = t0.elapsed().as_millis();

    Ok(PipelineOutput {
        report: PipelineReport {
            frame_count: seq.frame_count(),
            low_confidence_frames,
            pivots,
            timings,
        },
        raw_track,
        smoothed_track,
        output,
    })
}

/// Run the pipeline on a synthetic spec and score it against ground truth.
pub fn run_synthetic_eval(
    spec: &evalharness::SyntheticSpec,
    config: &PipelineConfig,
) -> Result<evalharness::TrackMetrics> {
    let (seq, gt) = evalharness::generate_synthetic(spec)?;
    let out = run_pipeline(&seq, config)?;
    evalharness::evaluate(&out.smoothed_track, &gt, &out.raw_track)
}

/// Debug artifact dump: HSV motion images and stacked label maps as PNGs.
pub fn dump_debug_artifacts(seq: &VideoSequence, config: &PipelineConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::Io { path: dir.to_path_buf(), source: e })?;
    let f_count = seq.frame_count();
    for t in 0..f_count {
        let (a, b) = if t + 1 < f_count { (t, t + 1) } else { (t - 1, t) };
        let flow = opticalflow::dense_flow(&seq.frames[a], &seq.frames[b], &config.flow)?;
        let hsv = opticalflow::flow_to_hsv(&flow);
        let frame = opticalflow::hsv_to_rgb_frame(&hsv, t);
        let single = VideoSequence { frames: vec![frame.clone(), frame] };
        let sub = dir.join(format!("motion_{t:06}"));
        videoio::write_sequence(&single, &sub, videoio::SequenceFormat::Png)?;
    }
    Ok(())
}
