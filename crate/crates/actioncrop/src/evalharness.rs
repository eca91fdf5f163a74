//! Synthetic ground-truth videos and track-quality metrics.
//!
//! A textured square subject moves over a static or drifting background;
//! the generator records its tight box per frame. Metrics compare a
//! predicted track against that ground truth and quantify temporal jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{iou, PatchTrack, SquarePatch, TrackKind};
use crate::videoio::{Frame, VideoSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trajectory {
    Linear,
    Sinusoidal,
    RandomWalk,
}

impl std::str::FromStr for Trajectory {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Trajectory::Linear),
            "sinusoidal" => Ok(Trajectory::Sinusoidal),
            "random-walk" => Ok(Trajectory::RandomWalk),
            other => Err(format!("unknown trajectory '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub frame_w: u32,
    pub frame_h: u32,
    pub frames: usize,
    pub subject_size: u32,
    pub velocity: (f64, f64),
    pub trajectory: Trajectory,
    pub drifting_background: bool,
    pub noise_sigma: f64,
    /// Fraction of frames whose appearance is replaced by a decoy scene.
    pub jitter_frames: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            frame_w: 128,
            frame_h: 128,
            frames: 64,
            subject_size: 40,
            velocity: (1.0, 0.0),
            trajectory: Trajectory::Linear,
            drifting_background: false,
            noise_sigma: 0.0,
            jitter_frames: 0.0,
            seed: 0,
        }
    }
}

// subject pixels carry blue = 0 and red >= 150; the background never does
const SUBJECT_A: [u8; 3] = [255, 220, 0];
const SUBJECT_B: [u8; 3] = [150, 60, 0];

pub fn is_subject_pixel(rgb: [u8; 3]) -> bool {
    rgb[2] == 0 && rgb[0] >= 150
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrackMetrics {
    pub mean_iou_gt: f64,
    pub center_rmse: f64,
    pub jitter_raw: f64,
    pub jitter_smoothed: f64,
    pub containment: f64,
}

fn background_pixel(x: i64, y: i64) -> [u8; 3] {
    // mild texture, blue channel always >= 40
    let v = ((x.div_euclid(8) + y.div_euclid(8)).rem_euclid(2)) as u8;
    let shade = 70 + v * 40;
    let ripple = ((x * 7 + y * 13).rem_euclid(23) as u8) * 2;
    [shade / 2, shade, 40 + ripple]
}

fn subject_pixel(lx: u32, ly: u32) -> [u8; 3] {
    if ((lx / 4) + (ly / 4)) % 2 == 0 {
        SUBJECT_A
    } else {
        SUBJECT_B
    }
}

/// Deterministic synthetic video plus its ground-truth track.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(VideoSequence, PatchTrack)> {
    let (w, h) = (spec.frame_w as i64, spec.frame_h as i64);
    let size = spec.subject_size as i64;
    assert!(spec.frames >= 2, "need at least 2 frames");
    assert!(size >= 8 && size < w.min(h), "subject size out of range");

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // margin keeps the subject's motion blob off the frame border: dense
    // flow spreads motion by about half the averaging window and the
    // closing step dilates the mask a few more pixels
    let margin = 12i64;
    let max_x = (w - size - margin) as f64;
    let max_y = (h - size - margin) as f64;

    // subject top-left positions per frame
    let mut positions: Vec<(i64, i64)> = Vec::with_capacity(spec.frames);
    match spec.trajectory {
        Trajectory::Linear | Trajectory::Sinusoidal => {
            // displacement series first, then a start that keeps the whole
            // path inside the frame
            let amplitude = (max_y - margin as f64) / 4.0;
            let disp: Vec<(f64, f64)> = (0..spec.frames)
                .map(|t| match spec.trajectory {
                    Trajectory::Linear => (spec.velocity.0 * t as f64, spec.velocity.1 * t as f64),
                    _ => (
                        spec.velocity.0 * t as f64,
                        amplitude * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin(),
                    ),
                })
                .collect();
            let (min_dx, max_dx) = disp.iter().fold((0.0f64, 0.0f64), |(lo, hi), d| (lo.min(d.0), hi.max(d.0)));
            let (min_dy, max_dy) = disp.iter().fold((0.0f64, 0.0f64), |(lo, hi), d| (lo.min(d.1), hi.max(d.1)));
            let x_lo = margin as f64 - min_dx;
            let x_hi = max_x - max_dx;
            let y_lo = margin as f64 - min_dy;
            let y_hi = max_y - max_dy;
            if x_lo > x_hi || y_lo > y_hi {
                let t = disp
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        (a.1 .0.abs() + a.1 .1.abs()).partial_cmp(&(b.1 .0.abs() + b.1 .1.abs())).unwrap()
                    })
                    .map(|(t, _)| t)
                    .unwrap_or(0);
                return Err(Error::SubjectEscapesFrame { t });
            }
            let start_x = rng.gen_range(x_lo..=x_hi);
            let start_y = rng.gen_range(y_lo..=y_hi);
            for (t, d) in disp.iter().enumerate() {
                let (x, y) = (start_x + d.0, start_y + d.1);
                if x < 0.0 || y < 0.0 || x + size as f64 > w as f64 || y + size as f64 > h as f64 {
                    return Err(Error::SubjectEscapesFrame { t });
                }
                positions.push((x.round() as i64, y.round() as i64));
            }
        }
        Trajectory::RandomWalk => {
            let mut px = rng.gen_range(margin..=max_x as i64);
            let mut py = rng.gen_range(margin..=max_y as i64);
            let step = spec.velocity.0.abs().max(spec.velocity.1.abs()).max(0.5);
            let amp = ((1.5 * step).round() as i64).max(1);
            for t in 0..spec.frames {
                if t > 0 {
                    // integer steps of at least one pixel, so every frame
                    // carries motion signal; reflect off the walk bounds
                    let (mut dx, mut dy) = (0i64, 0i64);
                    while dx == 0 && dy == 0 {
                        dx = rng.gen_range(-amp..=amp);
                        dy = rng.gen_range(-amp..=amp);
                    }
                    if px + dx < margin || px + dx > max_x as i64 {
                        dx = -dx;
                    }
                    if py + dy < margin || py + dy > max_y as i64 {
                        dy = -dy;
                    }
                    px += dx;
                    py += dy;
                }
                positions.push((px, py));
            }
        }
    }

    let n_corrupt = (spec.jitter_frames * spec.frames as f64).round() as usize;
    let mut corrupted = vec![false; spec.frames];
    {
        // never corrupt the first or last frame
        let mut candidates: Vec<usize> = (1..spec.frames - 1).collect();
        for i in 0..n_corrupt.min(candidates.len()) {
            let j = rng.gen_range(i..candidates.len());
            candidates.swap(i, j);
            corrupted[candidates[i]] = true;
        }
    }

    let mut frames = Vec::with_capacity(spec.frames);
    let mut gt = Vec::with_capacity(spec.frames);
    for (t, &(sx, sy)) in positions.iter().enumerate() {
        let (bg_dx, bg_dy) = if spec.drifting_background {
            (-(t as i64), (t as i64) / 2)
        } else {
            (0, 0)
        };
        let mut frame = Frame::filled(spec.frame_w, spec.frame_h, [0, 0, 0], t);
        for y in 0..h {
            for x in 0..w {
                frame.set_pixel(x as u32, y as u32, background_pixel(x + bg_dx, y + bg_dy));
            }
        }
        if corrupted[t] {
            // decoy blob in the opposite half of the frame, unrelated to GT
            let dx = if sx + size / 2 < w / 2 { w - size - margin } else { margin };
            let dy = rng.gen_range(margin..(h - size - margin).max(margin + 1));
            for y in 0..size {
                for x in 0..size {
                    frame.set_pixel((dx + x) as u32, (dy + y) as u32, subject_pixel(x as u32, y as u32));
                }
            }
        } else {
            for y in 0..size {
                for x in 0..size {
                    frame.set_pixel((sx + x) as u32, (sy + y) as u32, subject_pixel(x as u32, y as u32));
                }
            }
        }
        if spec.noise_sigma > 0.0 {
            for b in frame.data.iter_mut() {
                // Box-Muller would be overkill; uniform of matched std is fine here
                let noise = rng.gen_range(-1.7320508..1.7320508) * spec.noise_sigma;
                *b = (*b as f64 + noise).round().clamp(0.0, 255.0) as u8;
            }
        }
        frames.push(frame);
        gt.push(SquarePatch {
            x: sx as f64 + size as f64 / 2.0,
            y: sy as f64 + size as f64 / 2.0,
            d: size as f64,
            t,
        });
    }

    Ok((
        VideoSequence::new(frames)?,
        PatchTrack { patches: gt, kind: TrackKind::Raw },
    ))
}

/// Tight box of subject-keyed pixels in a rendered frame, if any.
pub fn recover_subject_box(frame: &Frame) -> Option<SquarePatch> {
    let (mut l, mut t, mut r, mut b) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut found = false;
    for y in 0..frame.height {
        for x in 0..frame.width {
            if is_subject_pixel(frame.pixel(x, y)) {
                found = true;
                l = l.min(x);
                t = t.min(y);
                r = r.max(x);
                b = b.max(y);
            }
        }
    }
    found.then(|| SquarePatch {
        x: (l + r + 1) as f64 / 2.0,
        y: (t + b + 1) as f64 / 2.0,
        d: (r - l + 1).max(b - t + 1) as f64,
        t: frame.timestamp,
    })
}

fn mean_second_difference(track: &PatchTrack) -> f64 {
    let n = track.patches.len();
    if n < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for t in 1..n - 1 {
        let (a, b, c) = (&track.patches[t - 1], &track.patches[t], &track.patches[t + 1]);
        let dx = c.x - 2.0 * b.x + a.x;
        let dy = c.y - 2.0 * b.y + a.y;
        let dd = c.d - 2.0 * b.d + a.d;
        sum += (dx * dx + dy * dy + dd * dd).sqrt();
    }
    sum / (n - 2) as f64
}

/// Compare a predicted (smoothed) track against ground truth; `raw` feeds
/// the jitter-reduction comparison.
pub fn evaluate(pred: &PatchTrack, gt: &PatchTrack, raw: &PatchTrack) -> Result<TrackMetrics> {
    let n = gt.patches.len();
    if pred.patches.len() != n {
        return Err(Error::LengthMismatch(pred.patches.len(), n));
    }
    if raw.patches.len() != n {
        return Err(Error::LengthMismatch(raw.patches.len(), n));
    }

    let mut iou_sum = 0.0;
    let mut se_sum = 0.0;
    let mut contained = 0usize;
    for t in 0..n {
        let (p, g) = (&pred.patches[t], &gt.patches[t]);
        iou_sum += iou(p, g);
        se_sum += (p.x - g.x).powi(2) + (p.y - g.y).powi(2);
        if g.x >= p.left() && g.x <= p.right() && g.y >= p.top() && g.y <= p.bottom() {
            contained += 1;
        }
    }

    Ok(TrackMetrics {
        mean_iou_gt: iou_sum / n as f64,
        center_rmse: (se_sum / n as f64).sqrt(),
        jitter_raw: mean_second_difference(raw),
        jitter_smoothed: mean_second_difference(pred),
        containment: contained as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_subject_constant_gt() {
        let spec = SyntheticSpec { velocity: (0.0, 0.0), ..Default::default() };
        let (_, gt) = generate_synthetic(&spec).unwrap();
        let first = gt.patches[0];
        for p in &gt.patches {
            assert_eq!((p.x, p.y, p.d), (first.x, first.y, first.d));
        }
    }

    #[test]
    fn linear_gt_advances_by_velocity() {
        let spec = SyntheticSpec { frames: 20, velocity: (2.0, 0.0), ..Default::default() };
        let (_, gt) = generate_synthetic(&spec).unwrap();
        for t in 1..20 {
            assert_eq!(gt.patches[t].x - gt.patches[t - 1].x, 2.0);
            assert_eq!(gt.patches[t].y, gt.patches[0].y);
        }
    }

    #[test]
    fn same_seed_identical_pixels() {
        let spec = SyntheticSpec { noise_sigma: 3.0, jitter_frames: 0.1, ..Default::default() };
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subject_escapes_is_error() {
        let spec = SyntheticSpec { frames: 64, velocity: (10.0, 0.0), ..Default::default() };
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::SubjectEscapesFrame { .. })
        ));
    }

    #[test]
    fn rendered_subject_matches_gt_by_color_key() {
        let spec = SyntheticSpec { seed: 5, ..Default::default() };
        let (seq, gt) = generate_synthetic(&spec).unwrap();
        for (frame, g) in seq.frames.iter().zip(&gt.patches) {
            let rec = recover_subject_box(frame).expect("subject visible");
            assert_eq!(rec.x, g.x);
            assert_eq!(rec.y, g.y);
            assert_eq!(rec.d, g.d);
        }
    }

    #[test]
    fn evaluate_perfect_match() {
        let spec = SyntheticSpec::default();
        let (_, gt) = generate_synthetic(&spec).unwrap();
        let m = evaluate(&gt, &gt, &gt).unwrap();
        assert_eq!(m.mean_iou_gt, 1.0);
        assert_eq!(m.center_rmse, 0.0);
        assert_eq!(m.containment, 1.0);
    }

    #[test]
    fn evaluate_disjoint_tracks() {
        let make = |x: f64| PatchTrack {
            patches: (0..5).map(|t| SquarePatch { x, y: 10.0, d: 8.0, t }).collect(),
            kind: TrackKind::Raw,
        };
        let pred = make(10.0);
        let gt = make(100.0);
        let m = evaluate(&pred, &gt, &pred).unwrap();
        assert_eq!(m.mean_iou_gt, 0.0);
        assert_eq!(m.containment, 0.0);
    }

    #[test]
    fn evaluate_hand_built_pair() {
        // 5 frames; pred offset by (3,0) from gt, d 10 everywhere; one raw kink
        let gt = PatchTrack {
            patches: (0..5).map(|t| SquarePatch { x: 20.0, y: 20.0, d: 10.0, t }).collect(),
            kind: TrackKind::Raw,
        };
        let pred = PatchTrack {
            patches: (0..5).map(|t| SquarePatch { x: 23.0, y: 20.0, d: 10.0, t }).collect(),
            kind: TrackKind::Smoothed,
        };
        let mut raw = gt.clone();
        raw.patches[2].x = 30.0; // second differences: t=1: 10, t=2: 20, t=3: 10
        let m = evaluate(&pred, &gt, &raw).unwrap();
        // iou: inter 7*10, union 200-70
        assert!((m.mean_iou_gt - 70.0 / 130.0).abs() < 1e-9);
        assert!((m.center_rmse - 3.0).abs() < 1e-9);
        assert!((m.jitter_raw - 40.0 / 3.0).abs() < 1e-9);
        assert_eq!(m.jitter_smoothed, 0.0);
        assert_eq!(m.containment, 1.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let t5 = PatchTrack {
            patches: (0..5).map(|t| SquarePatch { x: 0.0, y: 0.0, d: 8.0, t }).collect(),
            kind: TrackKind::Raw,
        };
        let mut t4 = t5.clone();
        t4.patches.pop();
        assert!(matches!(evaluate(&t4, &t5, &t5), Err(Error::LengthMismatch(..))));
    }
}
