//! Materialize a smoothed track into the final square cropped video.

use crate::error::{Error, Result};
use crate::temporal::{PatchTrack, SquarePatch};
use crate::videoio::{Frame, VideoSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    Bilinear,
    Nearest,
}

impl std::str::FromStr for Resample {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bilinear" => Ok(Resample::Bilinear),
            "nearest" => Ok(Resample::Nearest),
            other => Err(format!("unknown resample '{other}' (expected bilinear|nearest)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetargetParams {
    pub out_size: u32,
    pub resample: Resample,
}

impl Default for RetargetParams {
    fn default() -> Self {
        RetargetParams { out_size: 56, resample: Resample::Bilinear }
    }
}

#[inline]
fn sample_bilinear(frame: &Frame, fx: f64, fy: f64) -> [u8; 3] {
    let fx = fx.clamp(0.0, frame.width as f64 - 1.0);
    let fy = fy.clamp(0.0, frame.height as f64 - 1.0);
    let x0 = fx.floor() as u32;
    let y0 = fy.floor() as u32;
    let x1 = (x0 + 1).min(frame.width - 1);
    let y1 = (y0 + 1).min(frame.height - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let p00 = frame.pixel(x0, y0);
    let p01 = frame.pixel(x1, y0);
    let p10 = frame.pixel(x0, y1);
    let p11 = frame.pixel(x1, y1);
    let mut out = [0u8; 3];
    for c in 0..3 {
        let v = p00[c] as f64 * (1.0 - tx) * (1.0 - ty)
            + p01[c] as f64 * tx * (1.0 - ty)
            + p10[c] as f64 * (1.0 - tx) * ty
            + p11[c] as f64 * tx * ty;
        out[c] = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}

#[inline]
fn sample_nearest(frame: &Frame, fx: f64, fy: f64) -> [u8; 3] {
    let x = (fx.round().clamp(0.0, frame.width as f64 - 1.0)) as u32;
    let y = (fy.round().clamp(0.0, frame.height as f64 - 1.0)) as u32;
    frame.pixel(x, y)
}

/// Resample the square region of `frame` described by `patch` into an
/// `out_size` x `out_size` frame.
pub fn crop_patch(frame: &Frame, patch: &SquarePatch, params: &RetargetParams) -> Result<Frame> {
    assert!(params.out_size >= 8, "out_size must be >= 8");
    let eps = 1e-6;
    if patch.d < 8.0
        || patch.left() < -eps
        || patch.top() < -eps
        || patch.right() > frame.width as f64 + eps
        || patch.bottom() > frame.height as f64 + eps
    {
        return Err(Error::PatchOutOfBounds {
            x: patch.x,
            y: patch.y,
            d: patch.d,
            w: frame.width,
            h: frame.height,
        });
    }

    let n = params.out_size;
    let scale = patch.d / n as f64;
    let mut data = Vec::with_capacity((n * n * 3) as usize);
    for oy in 0..n {
        // map output pixel center into source coordinates, then to the
        // sample grid (pixel centers at integer coordinates)
        let sy = patch.top() + (oy as f64 + 0.5) * scale - 0.5;
        for ox in 0..n {
            let sx = patch.left() + (ox as f64 + 0.5) * scale - 0.5;
            let px = match params.resample {
                Resample::Bilinear => sample_bilinear(frame, sx, sy),
                Resample::Nearest => sample_nearest(frame, sx, sy),
            };
            data.extend_from_slice(&px);
        }
    }
    Ok(Frame::new(n, n, data, patch.t))
}

/// Crop every frame of `seq` per `track`, preserving frame count.
pub fn retarget_video(
    seq: &VideoSequence,
    track: &PatchTrack,
    params: &RetargetParams,
) -> Result<VideoSequence> {
    if seq.frame_count() != track.patches.len() {
        return Err(Error::LengthMismatch(seq.frame_count(), track.patches.len()));
    }
    let frames: Result<Vec<Frame>> = seq
        .frames
        .iter()
        .zip(&track.patches)
        .map(|(f, p)| crop_patch(f, p, params))
        .collect();
    VideoSequence::new(frames?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::TrackKind;
    use rand::{Rng, SeedableRng};

    fn noise_frame(w: u32, h: u32, t: usize, seed: u64) -> Frame {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * 3).map(|_| rng.gen()).collect();
        Frame::new(w, h, data, t)
    }

    #[test]
    fn full_frame_nearest_is_identity() {
        let f = noise_frame(64, 64, 0, 1);
        let patch = SquarePatch { x: 32.0, y: 32.0, d: 64.0, t: 0 };
        let out = crop_patch(&f, &patch, &RetargetParams { out_size: 64, resample: Resample::Nearest }).unwrap();
        assert_eq!(out.data, f.data);
    }

    #[test]
    fn integer_aligned_crop_is_bit_exact_subimage() {
        let f = noise_frame(100, 100, 0, 2);
        // square covering columns 10..66, rows 20..76
        let patch = SquarePatch { x: 38.0, y: 48.0, d: 56.0, t: 0 };
        let out = crop_patch(&f, &patch, &RetargetParams { out_size: 56, resample: Resample::Nearest }).unwrap();
        for y in 0..56u32 {
            for x in 0..56u32 {
                assert_eq!(out.pixel(x, y), f.pixel(10 + x, 20 + y));
            }
        }
    }

    #[test]
    fn bilinear_preserves_constant_regions() {
        let f = Frame::filled(120, 120, [17, 200, 99], 0);
        let patch = SquarePatch { x: 60.0, y: 60.0, d: 100.0, t: 0 };
        let out = crop_patch(&f, &patch, &RetargetParams { out_size: 50, resample: Resample::Bilinear }).unwrap();
        assert!(out.data.chunks(3).all(|p| p == [17, 200, 99]));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let f = noise_frame(32, 32, 0, 3);
        let patch = SquarePatch { x: 2.0, y: 16.0, d: 20.0, t: 0 };
        assert!(matches!(
            crop_patch(&f, &patch, &RetargetParams::default()),
            Err(Error::PatchOutOfBounds { .. })
        ));
    }

    #[test]
    fn retarget_shape_contract() {
        let frames: Vec<Frame> = (0..16).map(|t| noise_frame(80, 60, t, t as u64)).collect();
        let seq = VideoSequence::new(frames).unwrap();
        let patches = (0..16)
            .map(|t| SquarePatch { x: 30.0, y: 30.0, d: 40.0, t })
            .collect();
        let track = PatchTrack { patches, kind: TrackKind::Smoothed };
        let out = retarget_video(&seq, &track, &RetargetParams::default()).unwrap();
        assert_eq!(out.frame_count(), 16);
        assert_eq!(out.width(), 56);
        assert_eq!(out.height(), 56);
    }
}
