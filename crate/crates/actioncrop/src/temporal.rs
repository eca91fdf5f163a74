//! Temporal consistency for per-frame patch tracks.
//!
//! A raw track of square patches is scored for temporal cohesion, a set of
//! pivot timestamps is selected greedily, endpoints are corrected to their
//! nearest pivot, and a piecewise Bezier curve through the pivots produces
//! the smoothed track.

use crate::error::{Error, Result};

/// A square crop region: center `(x, y)`, side `d`, at frame `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquarePatch {
    pub x: f64,
    pub y: f64,
    pub d: f64,
    pub t: usize,
}

impl SquarePatch {
    pub fn left(&self) -> f64 {
        self.x - self.d / 2.0
    }
    pub fn right(&self) -> f64 {
        self.x + self.d / 2.0
    }
    pub fn top(&self) -> f64 {
        self.y - self.d / 2.0
    }
    pub fn bottom(&self) -> f64 {
        self.y + self.d / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    Raw,
    Smoothed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchTrack {
    pub patches: Vec<SquarePatch>,
    pub kind: TrackKind,
}

impl PatchTrack {
    pub fn frame_count(&self) -> usize {
        self.patches.len()
    }
}

/// Pivot timestamps: `pt` as iteratively chosen, `pt_fin = pt ∪ {0, F-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotSet {
    pub pt: Vec<usize>,
    pub pt_fin: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohesionScores {
    pub scores: Vec<f64>,
}

/// Intersection-over-union of two axis-aligned squares, ignoring `t`.
pub fn iou(a: &SquarePatch, b: &SquarePatch) -> f64 {
    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = iw * ih;
    let union = a.d * a.d + b.d * b.d - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Temporal cohesion score per frame: S_i = sum over f != i of IoU(i,f)/|i-f|.
pub fn cohesion_scores(track: &PatchTrack) -> CohesionScores {
    let f_count = track.patches.len();
    let mut scores = vec![0.0f64; f_count];
    // IoU is symmetric so each pair contributes to both scores
    for i in 0..f_count {
        for f in (i + 1)..f_count {
            let v = iou(&track.patches[i], &track.patches[f]) / (f - i) as f64;
            scores[i] += v;
            scores[f] += v;
        }
    }
    CohesionScores { scores }
}

/// Greedy pivot selection: repeatedly take the available timestamp with the
/// highest score (ties broken by smaller timestamp), then remove it and the
/// two timestamps on each side from availability. Stops when `budget` pivots
/// are chosen or nothing remains.
pub fn select_pivots(scores: &CohesionScores, budget: usize) -> Result<PivotSet> {
    let f_count = scores.scores.len();
    if f_count == 0 {
        return Err(Error::EmptyTrack);
    }
    let budget = budget.max(1);

    let mut available = vec![true; f_count];
    let mut pt = Vec::new();
    while pt.len() < budget {
        let mut best: Option<usize> = None;
        for i in 0..f_count {
            if !available[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if scores.scores[i] > scores.scores[b] => best = Some(i),
                _ => {}
            }
        }
        let Some(i) = best else { break };
        pt.push(i);
        for off in -2i64..=2 {
            let j = i as i64 + off;
            if j >= 0 && (j as usize) < f_count {
                available[j as usize] = false;
            }
        }
    }
    pt.sort_unstable();

    let mut pt_fin = pt.clone();
    if !pt_fin.contains(&0) {
        pt_fin.insert(0, 0);
    }
    if !pt_fin.contains(&(f_count - 1)) {
        pt_fin.push(f_count - 1);
    }
    Ok(PivotSet { pt, pt_fin })
}

/// Replace the first and last patch coordinates with those of the nearest
/// pivot in `PT` (no-op where 0 or F-1 is itself a pivot).
pub fn correct_endpoints(track: &PatchTrack, pivots: &PivotSet) -> PatchTrack {
    let mut out = track.clone();
    let f_count = out.patches.len();
    if let (Some(&lo), Some(&hi)) = (pivots.pt.first(), pivots.pt.last()) {
        let src = out.patches[lo];
        let p0 = &mut out.patches[0];
        (p0.x, p0.y, p0.d) = (src.x, src.y, src.d);
        let src = out.patches[hi];
        let pn = &mut out.patches[f_count - 1];
        (pn.x, pn.y, pn.d) = (src.x, src.y, src.d);
    }
    out
}

/// De Casteljau evaluation of a Bezier curve over 3D control points.
/// Exact at the endpoints: B(0) is the first point, B(1) the last.
pub fn bezier_eval(points: &[[f64; 3]], t: f64) -> [f64; 3] {
    assert!(points.len() >= 2, "need at least 2 control points");
    if t == 0.0 {
        return points[0];
    }
    if t == 1.0 {
        return *points.last().unwrap();
    }
    let mut work = points.to_vec();
    for level in (1..work.len()).rev() {
        for i in 0..level {
            for c in 0..3 {
                work[i][c] = (1.0 - t) * work[i][c] + t * work[i + 1][c];
            }
        }
    }
    work[0]
}

/// Piecewise Bezier smoothing. For each consecutive pivot pair (i, j) in
/// `pt_fin`, the patches C_i..C_j are the control points of a (j-i)-degree
/// curve sampled at delta/(j-i). The result is then clamped to frame bounds
/// with a minimum side of 8 px.
pub fn smooth_track(
    track: &PatchTrack,
    pivots: &PivotSet,
    frame_w: u32,
    frame_h: u32,
) -> PatchTrack {
    let mut patches = track.patches.clone();
    for pair in pivots.pt_fin.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        if j <= i + 1 {
            continue; // adjacent pivots, segment is already pinned
        }
        let ctrl: Vec<[f64; 3]> = track.patches[i..=j].iter().map(|p| [p.x, p.y, p.d]).collect();
        let degree = (j - i) as f64;
        for delta in 0..=(j - i) {
            let [x, y, d] = bezier_eval(&ctrl, delta as f64 / degree);
            let p = &mut patches[i + delta];
            (p.x, p.y, p.d) = (x, y, d);
        }
    }
    for p in &mut patches {
        clamp_patch(p, frame_w, frame_h);
    }
    PatchTrack { patches, kind: TrackKind::Smoothed }
}

/// Clamp a patch to be realizable: side in [8, min(frame dims)], center
/// shifted so the square stays inside the frame.
pub fn clamp_patch(p: &mut SquarePatch, frame_w: u32, frame_h: u32) {
    let max_d = frame_w.min(frame_h) as f64;
    p.d = p.d.clamp(8.0_f64.min(max_d), max_d);
    let half = p.d / 2.0;
    p.x = p.x.clamp(half, frame_w as f64 - half);
    p.y = p.y.clamp(half, frame_h as f64 - half);
}

/// Default pivot budget: round(0.15 * F), at least 1.
pub fn default_pivot_budget(frame_count: usize) -> usize {
    ((0.15 * frame_count as f64).round() as usize).max(1)
}
