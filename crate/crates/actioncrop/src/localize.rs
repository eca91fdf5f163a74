//! Per-frame action localization: pick the motion-heaviest interior C3s,
//! grow their bounding box to a minimum area, and square it.

use crate::error::{Error, Result};
use crate::motionseg::{BoundingBox, C3};
use crate::temporal::SquarePatch;

#[derive(Debug, Clone, Copy)]
pub struct LocalizeParams {
    /// Minimum patch area as a fraction of frame area (A_min).
    pub a_min_fraction: f64,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        LocalizeParams { a_min_fraction: 0.25 }
    }
}

impl LocalizeParams {
    pub fn clamped(&self) -> f64 {
        self.a_min_fraction.clamp(0.05, 0.9)
    }
}

/// A localized patch plus a flag for frames where no interior C3 existed
/// and the centered fallback was used.
#[derive(Debug, Clone, Copy)]
pub struct LocalizedPatch {
    pub patch: SquarePatch,
    pub low_confidence: bool,
}

/// Top two interior C3s by average saturation. Ties broken by larger pixel
/// count, then smaller cluster id.
pub fn select_candidates<'a>(c3s: &'a [C3]) -> Result<(&'a C3, Option<&'a C3>)> {
    let mut interior: Vec<&C3> = c3s.iter().filter(|c| !c.touches_border).collect();
    if interior.is_empty() {
        return Err(Error::NoInteriorC3);
    }
    interior.sort_by(|a, b| {
        b.avg_saturation
            .partial_cmp(&a.avg_saturation)
            .unwrap()
            .then(b.pixels.len().cmp(&a.pixels.len()))
            .then(a.cluster_id.cmp(&b.cluster_id))
    });
    Ok((interior[0], interior.get(1).copied()))
}

/// Expand `bbox` by an equal margin on all sides until its area reaches
/// `a_min`, clipping at frame edges and redistributing the shortfall to the
/// opposite side.
pub fn grow_to_min_area(bbox: &BoundingBox, a_min: u64, frame_w: u32, frame_h: u32) -> BoundingBox {
    if bbox.area() >= a_min {
        return *bbox;
    }
    let (w, h) = (bbox.width() as f64, bbox.height() as f64);
    // minimal m with (w + 2m)(h + 2m) >= a_min
    let a = 4.0;
    let b = 2.0 * (w + h);
    let c = w * h - a_min as f64;
    let m = ((-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)).max(0.0).ceil() as i64;

    let mut left = bbox.left as i64 - m;
    let mut right = bbox.right as i64 + m;
    let mut top = bbox.top as i64 - m;
    let mut bottom = bbox.bottom as i64 + m;

    // clip and push the lost margin to the opposite side
    let redistribute = |lo: &mut i64, hi: &mut i64, max: i64| {
        if *lo < 0 {
            *hi = (*hi - *lo).min(max);
            *lo = 0;
        }
        if *hi > max {
            *lo = (*lo - (*hi - max)).max(0);
            *hi = max;
        }
    };
    redistribute(&mut left, &mut right, frame_w as i64 - 1);
    redistribute(&mut top, &mut bottom, frame_h as i64 - 1);

    BoundingBox {
        left: left as u32,
        top: top as u32,
        right: right as u32,
        bottom: bottom as u32,
    }
}

/// Make `bbox` square by symmetrically extending the smaller dimension,
/// shifting inward at frame edges; cap at min(frame dims) and recenter
/// when the larger dimension does not fit.
fn square_box(bbox: &BoundingBox, frame_w: u32, frame_h: u32) -> SquarePatch {
    let cx = (bbox.left + bbox.right) as f64 / 2.0 + 0.5;
    let cy = (bbox.top + bbox.bottom) as f64 / 2.0 + 0.5;
    let d = (bbox.width().max(bbox.height()) as f64).min(frame_w.min(frame_h) as f64);
    let half = d / 2.0;
    let x = cx.clamp(half, frame_w as f64 - half);
    let y = cy.clamp(half, frame_h as f64 - half);
    SquarePatch { x, y, d, t: 0 }
}

/// Full per-frame localization per the selection logic: candidate pick,
/// A_min growth, optional merge with the second candidate on overlap,
/// squaring. Falls back to a centered sqrt(A_min) square when no interior
/// C3 exists.
pub fn localize_frame(
    c3s: &[C3],
    params: &LocalizeParams,
    frame_w: u32,
    frame_h: u32,
    t: usize,
) -> LocalizedPatch {
    let a_min = (params.clamped() * frame_w as f64 * frame_h as f64).round() as u64;

    let (top, second) = match select_candidates(c3s) {
        Ok(pair) => pair,
        Err(_) => {
            let d = (a_min as f64).sqrt().min(frame_w.min(frame_h) as f64).max(8.0);
            return LocalizedPatch {
                patch: SquarePatch { x: frame_w as f64 / 2.0, y: frame_h as f64 / 2.0, d, t },
                low_confidence: true,
            };
        }
    };

    let chosen = if top.bbox.area() >= a_min {
        top.bbox
    } else {
        let grown = grow_to_min_area(&top.bbox, a_min, frame_w, frame_h);
        match second {
            Some(snd) if grown.intersects(&snd.bbox) => {
                let merged = top.bbox.union(&snd.bbox);
                grow_to_min_area(&merged, a_min, frame_w, frame_h)
            }
            _ => grown,
        }
    };

    let mut patch = square_box(&chosen, frame_w, frame_h);
    patch.t = t;
    LocalizedPatch { patch, low_confidence: false }
}
