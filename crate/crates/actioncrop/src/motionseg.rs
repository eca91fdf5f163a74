//! Motion segmentation: cluster the HSV motion image, clean each cluster
//! mask morphologically, stack masks by average saturation, and extract
//! cluster connected components (C3s).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::opticalflow::MotionHsvImage;

pub const BACKGROUND_LABEL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct ClusterLabelMap {
    pub width: u32,
    pub height: u32,
    /// Per-pixel cluster id, or [`BACKGROUND_LABEL`] for uncovered pixels.
    pub labels: Vec<u32>,
    pub k: usize,
    pub centroids: Vec<[f64; 2]>,
}

/// Tight axis-aligned box, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.right - self.left + 1
    }
    pub fn height(&self) -> u32 {
        self.bottom - self.top + 1
    }
    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }
    /// Positive-area overlap: boxes sharing at least one pixel. Boxes that
    /// merely touch along an edge (no shared pixel) do not intersect.
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.left.max(other.left) <= self.right.min(other.right)
            && self.top.max(other.top) <= self.bottom.min(other.bottom)
    }
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            left: self.left.min(other.left),
            top: self.top.min(other.top),
            right: self.right.max(other.right),
            bottom: self.bottom.max(other.bottom),
        }
    }
}

/// Cluster connected component.
#[derive(Debug, Clone)]
pub struct C3 {
    pub cluster_id: u32,
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BoundingBox,
    pub avg_saturation: f64,
    pub touches_border: bool,
}

fn feature(h_deg: f32, s: f32) -> [f64; 2] {
    let rad = (h_deg as f64).to_radians();
    [s as f64 * rad.cos(), s as f64 * rad.sin()]
}

/// K-means++ clustering of the motion image in (s cos h, s sin h) space.
/// Deterministic for a fixed seed; converges when centroid movement drops
/// below 1e-4 or after 100 iterations. K is reduced to the number of
/// distinct feature points when smaller.
pub fn kmeanspp_cluster(img: &MotionHsvImage, k: usize, seed: u64) -> Result<ClusterLabelMap> {
    assert!(k >= 2, "K must be >= 2");
    let n = img.h.len();
    assert!(n >= k, "pixel count must be >= K");

    let feats: Vec<[f64; 2]> = (0..n).map(|i| feature(img.h[i], img.s[i])).collect();

    let mut distinct: Vec<[f64; 2]> = Vec::new();
    for f in &feats {
        if !distinct.iter().any(|d| d[0] == f[0] && d[1] == f[1]) {
            distinct.push(*f);
        }
        if distinct.len() > k {
            break;
        }
    }
    if distinct.len() < 2 {
        return Err(Error::SingleClusterError);
    }
    let k = k.min(distinct.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);

    // k-means++ seeding
    let mut centroids: Vec<[f64; 2]> = Vec::with_capacity(k);
    centroids.push(feats[rng.gen_range(0..n)]);
    let mut min_d2: Vec<f64> = feats.iter().map(|f| dist2(f, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total <= 0.0 {
            // all points coincide with chosen centroids; pick any unseen distinct one
            *distinct
                .iter()
                .find(|d| !centroids.iter().any(|c| c == *d))
                .unwrap()
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            feats[chosen]
        };
        for (i, f) in feats.iter().enumerate() {
            min_d2[i] = min_d2[i].min(dist2(f, &next));
        }
        centroids.push(next);
    }

    // Lloyd iterations
    let mut labels = vec![0u32; n];
    for _ in 0..100 {
        for (i, f) in feats.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::MAX;
            for (c, cent) in centroids.iter().enumerate() {
                let d = dist2(f, cent);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            labels[i] = best as u32;
        }
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (i, f) in feats.iter().enumerate() {
            let l = labels[i] as usize;
            sums[l][0] += f[0];
            sums[l][1] += f[1];
            counts[l] += 1;
        }
        let mut movement = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its centroid
            }
            let new = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            movement = movement.max(dist2(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if movement < 1e-4 {
            break;
        }
    }
    // final assignment against converged centroids
    for (i, f) in feats.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d = f64::MAX;
        for (c, cent) in centroids.iter().enumerate() {
            let d = dist2(f, cent);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best as u32;
    }

    Ok(ClusterLabelMap { width: img.width, height: img.height, labels, k, centroids })
}

#[derive(Debug, Clone)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask { width, height, bits: vec![false; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

// Chebyshev-ball structuring element: opening with it leaves rectangular
// blobs pixel-identical while still severing bridges thinner than 2r.
fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            out.push((dx, dy));
        }
    }
    out
}

pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let offsets = disc_offsets(radius);
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            if !mask.bits[(y * w + x) as usize] {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && nx < w && ny >= 0 && ny < h {
                    out.bits[(ny * w + nx) as usize] = true;
                }
            }
        }
    }
    out
}

pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let offsets = disc_offsets(radius);
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut out = BinaryMask::new(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            // out-of-frame counts as foreground so that masks touching the
            // frame border keep their border contact (border-touching C3s
            // must stay recognizable as such downstream)
            let all = offsets.iter().all(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx < 0 || nx >= w || ny < 0 || ny >= h || mask.bits[(ny * w + nx) as usize]
            });
            if all {
                out.bits[(y * w + x) as usize] = true;
            }
        }
    }
    out
}

/// Closing (fill pinholes) then opening (sever narrow bridges), then drop
/// 8-connected components smaller than `min_component_px`.
pub fn clean_cluster_mask(
    mask: &BinaryMask,
    open_radius: u32,
    close_radius: u32,
    min_component_px: usize,
) -> BinaryMask {
    let closed = erode(&dilate(mask, close_radius), close_radius);
    let opened = dilate(&erode(&closed, open_radius), open_radius);

    let mut out = opened.clone();
    for comp in connected_components(&opened) {
        if comp.len() < min_component_px {
            for &(x, y) in &comp {
                out.set(x, y, false);
            }
        }
    }
    out
}

/// 8-connected components of a binary mask.
pub fn connected_components(mask: &BinaryMask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; (w * h) as usize];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if seen[idx] || !mask.bits[idx] {
                continue;
            }
            let mut comp = Vec::new();
            seen[idx] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                comp.push((cx, cy));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let nidx = (ny as u32 * w + nx as u32) as usize;
                        if mask.bits[nidx] && !seen[nidx] {
                            seen[nidx] = true;
                            stack.push((nx as u32, ny as u32));
                        }
                    }
                }
            }
            comps.push(comp);
        }
    }
    comps
}

/// Paint cleaned cluster masks onto a blank label map in ascending
/// average-saturation order; higher-saturation clusters overwrite lower.
/// Equal saturations tie-break by smaller cluster id painted first.
pub fn stack_by_saturation(
    cleaned_masks: &[(u32, BinaryMask)],
    hsv: &MotionHsvImage,
) -> Result<ClusterLabelMap> {
    if cleaned_masks.iter().all(|(_, m)| m.count() == 0) {
        return Err(Error::AllMasksEmpty);
    }
    let (w, h) = (hsv.width, hsv.height);

    let mut order: Vec<(f64, u32, &BinaryMask)> = cleaned_masks
        .iter()
        .filter(|(_, m)| m.count() > 0)
        .map(|(id, m)| {
            let mut sum = 0.0f64;
            let mut cnt = 0usize;
            for y in 0..h {
                for x in 0..w {
                    if m.get(x, y) {
                        sum += hsv.s[(y * w + x) as usize] as f64;
                        cnt += 1;
                    }
                }
            }
            (sum / cnt as f64, *id, m)
        })
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut labels = vec![BACKGROUND_LABEL; (w * h) as usize];
    for (_, id, m) in &order {
        for (i, &on) in m.bits.iter().enumerate() {
            if on {
                labels[i] = *id;
            }
        }
    }
    Ok(ClusterLabelMap { width: w, height: h, labels, k: cleaned_masks.len(), centroids: vec![] })
}

/// 8-connected components per non-background label of the stacked map.
pub fn extract_c3s(stacked: &ClusterLabelMap, hsv: &MotionHsvImage) -> Vec<C3> {
    let (w, h) = (stacked.width, stacked.height);
    let mut label_ids: Vec<u32> = stacked
        .labels
        .iter()
        .copied()
        .filter(|&l| l != BACKGROUND_LABEL)
        .collect();
    label_ids.sort_unstable();
    label_ids.dedup();

    let mut out = Vec::new();
    for id in label_ids {
        let mut mask = BinaryMask::new(w, h);
        for (i, &l) in stacked.labels.iter().enumerate() {
            if l == id {
                mask.bits[i] = true;
            }
        }
        for pixels in connected_components(&mask) {
            let mut bbox = BoundingBox {
                left: u32::MAX,
                top: u32::MAX,
                right: 0,
                bottom: 0,
            };
            let mut sat = 0.0f64;
            let mut touches = false;
            for &(x, y) in &pixels {
                bbox.left = bbox.left.min(x);
                bbox.right = bbox.right.max(x);
                bbox.top = bbox.top.min(y);
                bbox.bottom = bbox.bottom.max(y);
                sat += hsv.s[(y * w + x) as usize] as f64;
                if x == 0 || x == w - 1 || y == 0 || y == h - 1 {
                    touches = true;
                }
            }
            let avg_saturation = sat / pixels.len() as f64;
            out.push(C3 { cluster_id: id, pixels, bbox, avg_saturation, touches_border: touches });
        }
    }
    out
}

/// Full per-frame segmentation: cluster, split into per-cluster masks,
/// clean, stack, extract C3s. Returns an empty list when every mask is
/// wiped out by cleaning or clustering degenerates.
pub fn segment_frame(
    hsv: &MotionHsvImage,
    k: usize,
    seed: u64,
    open_radius: u32,
    close_radius: u32,
    min_component_frac: f64,
) -> Vec<C3> {
    let labels = match kmeanspp_cluster(hsv, k, seed) {
        Ok(l) => l,
        Err(_) => return Vec::new(),
    };
    let min_px = ((hsv.width as f64 * hsv.height as f64 * min_component_frac).round() as usize).max(1);
    let mut masks = Vec::with_capacity(labels.k);
    for c in 0..labels.k as u32 {
        let mut m = BinaryMask::new(hsv.width, hsv.height);
        for (i, &l) in labels.labels.iter().enumerate() {
            if l == c {
                m.bits[i] = true;
            }
        }
        masks.push((c, clean_cluster_mask(&m, open_radius, close_radius, min_px)));
    }
    match stack_by_saturation(&masks, hsv) {
        Ok(stacked) => extract_c3s(&stacked, hsv),
        Err(_) => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hsv_image(w: u32, h: u32) -> MotionHsvImage {
        let n = (w * h) as usize;
        MotionHsvImage { width: w, height: h, h: vec![0.0; n], s: vec![0.0; n], v: vec![1.0; n] }
    }

    fn set_block(img: &mut MotionHsvImage, x0: u32, y0: u32, x1: u32, y1: u32, hue: f32, sat: f32) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let i = (y * img.width + x) as usize;
                img.h[i] = hue;
                img.s[i] = sat;
            }
        }
    }

    #[test]
    fn kmeans_three_value_image_reaches_optimum() {
        // two blobs with opposite motion on a still background: features are
        // exactly three distinct points, optimal 3-partition has zero inertia
        let mut img = hsv_image(40, 40);
        set_block(&mut img, 5, 5, 12, 12, 0.0, 1.0);
        set_block(&mut img, 25, 25, 32, 32, 180.0, 1.0);
        let lm = kmeanspp_cluster(&img, 3, 9).unwrap();
        assert_eq!(lm.k, 3);
        // inertia of the result
        let mut inertia = 0.0f64;
        for (i, &l) in lm.labels.iter().enumerate() {
            let f = feature(img.h[i], img.s[i]);
            let c = lm.centroids[l as usize];
            inertia += (f[0] - c[0]).powi(2) + (f[1] - c[1]).powi(2);
        }
        assert!(inertia < 1e-6, "inertia {inertia}");
        // blobs in different clusters
        let l1 = lm.labels[(6 * 40 + 6) as usize];
        let l2 = lm.labels[(26 * 40 + 26) as usize];
        let l3 = lm.labels[0];
        assert!(l1 != l2 && l1 != l3 && l2 != l3);
    }

    #[test]
    fn kmeans_constant_image_degenerate() {
        let img = hsv_image(8, 8);
        assert!(matches!(kmeanspp_cluster(&img, 2, 1), Err(Error::SingleClusterError)));
    }

    #[test]
    fn kmeans_deterministic() {
        let mut img = hsv_image(20, 20);
        set_block(&mut img, 2, 2, 8, 8, 45.0, 0.8);
        set_block(&mut img, 12, 12, 18, 18, 200.0, 0.6);
        let a = kmeanspp_cluster(&img, 3, 42).unwrap();
        let b = kmeanspp_cluster(&img, 3, 42).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn clean_mask_severs_one_px_bridge() {
        let mut m = BinaryMask::new(60, 30);
        for y in 5..25u32 {
            for x in 5..25u32 {
                m.set(x, y, true);
            }
            for x in 35..55u32 {
                m.set(x, y, true);
            }
        }
        for x in 25..35u32 {
            m.set(15, x.min(29), true); // bridge row y=15
        }
        for x in 25..35u32 {
            m.set(x, 15, true);
        }
        let cleaned = clean_cluster_mask(&m, 2, 0, 1);
        let comps = connected_components(&cleaned);
        assert_eq!(comps.len(), 2, "bridge should be severed");
    }

    #[test]
    fn clean_mask_empty_identity() {
        let m = BinaryMask::new(16, 16);
        let cleaned = clean_cluster_mask(&m, 2, 3, 4);
        assert_eq!(cleaned.count(), 0);
    }

    #[test]
    fn clean_mask_idempotent_on_large_square() {
        let mut m = BinaryMask::new(80, 80);
        for y in 15..65u32 {
            for x in 15..65u32 {
                m.set(x, y, true);
            }
        }
        let cleaned = clean_cluster_mask(&m, 2, 2, 1);
        assert_eq!(cleaned.bits, m.bits);
    }

    #[test]
    fn clean_mask_stays_in_dilation_envelope() {
        let mut m = BinaryMask::new(30, 30);
        for y in 10..20u32 {
            for x in 10..20u32 {
                m.set(x, y, true);
            }
        }
        let close_r = 3;
        let cleaned = clean_cluster_mask(&m, 2, close_r, 1);
        let envelope = dilate(&m, close_r);
        for i in 0..cleaned.bits.len() {
            assert!(!cleaned.bits[i] || envelope.bits[i]);
        }
    }

    #[test]
    fn stacking_overlap_goes_to_higher_saturation() {
        let mut img = hsv_image(20, 20);
        set_block(&mut img, 0, 0, 9, 19, 0.0, 0.2);
        set_block(&mut img, 5, 0, 14, 19, 90.0, 0.8);
        let mut m1 = BinaryMask::new(20, 20);
        let mut m2 = BinaryMask::new(20, 20);
        for y in 0..20u32 {
            for x in 0..10u32 {
                m1.set(x, y, true);
            }
            for x in 5..15u32 {
                m2.set(x, y, true);
            }
        }
        let stacked = stack_by_saturation(&[(0, m1), (1, m2)], &img).unwrap();
        // overlap x in 5..10 must carry cluster 1 (higher avg saturation)
        for y in 0..20u32 {
            for x in 5..10u32 {
                assert_eq!(stacked.labels[(y * 20 + x) as usize], 1);
            }
        }
        for y in 0..20u32 {
            assert_eq!(stacked.labels[(y * 20) as usize], 0);
        }
        assert_eq!(stacked.labels[(0 * 20 + 19) as usize], BACKGROUND_LABEL);
    }

    #[test]
    fn stacking_tie_broken_by_cluster_id() {
        let img = hsv_image(10, 10); // all saturation equal (0)
        let mut m1 = BinaryMask::new(10, 10);
        let mut m2 = BinaryMask::new(10, 10);
        for x in 0..6u32 {
            m1.set(x, 5, true);
        }
        for x in 4..10u32 {
            m2.set(x, 5, true);
        }
        let stacked = stack_by_saturation(&[(0, m1), (1, m2)], &img).unwrap();
        // tie: smaller id painted first, overwritten in the overlap
        assert_eq!(stacked.labels[(5 * 10 + 4) as usize], 1);
        assert_eq!(stacked.labels[(5 * 10 + 5) as usize], 1);
        assert_eq!(stacked.labels[(5 * 10 + 0) as usize], 0);
    }

    #[test]
    fn stacking_all_empty_errors() {
        let img = hsv_image(10, 10);
        let masks = [(0u32, BinaryMask::new(10, 10)), (1, BinaryMask::new(10, 10))];
        assert!(matches!(stack_by_saturation(&masks, &img), Err(Error::AllMasksEmpty)));
    }

    #[test]
    fn extract_c3_center_blob() {
        let mut img = hsv_image(30, 30);
        set_block(&mut img, 10, 10, 19, 19, 0.0, 0.7);
        let mut labels = vec![BACKGROUND_LABEL; 900];
        for y in 10..20u32 {
            for x in 10..20u32 {
                labels[(y * 30 + x) as usize] = 1;
            }
        }
        let stacked = ClusterLabelMap { width: 30, height: 30, labels, k: 2, centroids: vec![] };
        let c3s = extract_c3s(&stacked, &img);
        assert_eq!(c3s.len(), 1);
        let c = &c3s[0];
        assert!(!c.touches_border);
        assert_eq!(c.bbox, BoundingBox { left: 10, top: 10, right: 19, bottom: 19 });
        assert!((c.avg_saturation - 0.7).abs() < 1e-6);
        assert_eq!(c.pixels.len(), 100);
    }

    #[test]
    fn extract_c3_border_flag() {
        let img = hsv_image(12, 12);
        let mut labels = vec![BACKGROUND_LABEL; 144];
        labels[(5 * 12) as usize] = 0; // pixel (0, 5)
        labels[(5 * 12 + 1) as usize] = 0;
        let stacked = ClusterLabelMap { width: 12, height: 12, labels, k: 1, centroids: vec![] };
        let c3s = extract_c3s(&stacked, &img);
        assert_eq!(c3s.len(), 1);
        assert!(c3s[0].touches_border);
    }

    #[test]
    fn extract_c3_l_shape_bbox() {
        let img = hsv_image(20, 20);
        let mut labels = vec![BACKGROUND_LABEL; 400];
        // L: vertical arm (5..6)x(5..14), horizontal arm (5..12)x(13..14)
        for y in 5..15u32 {
            for x in 5..7u32 {
                labels[(y * 20 + x) as usize] = 2;
            }
        }
        for y in 13..15u32 {
            for x in 5..13u32 {
                labels[(y * 20 + x) as usize] = 2;
            }
        }
        let stacked = ClusterLabelMap { width: 20, height: 20, labels, k: 3, centroids: vec![] };
        let c3s = extract_c3s(&stacked, &img);
        assert_eq!(c3s.len(), 1);
        assert_eq!(c3s[0].bbox, BoundingBox { left: 5, top: 5, right: 12, bottom: 14 });
    }

    #[test]
    fn extract_c3_partitions_non_background() {
        let img = hsv_image(16, 16);
        let mut labels = vec![BACKGROUND_LABEL; 256];
        for i in 0..40 {
            labels[i] = 0;
        }
        for i in 100..140 {
            labels[i] = 1;
        }
        let stacked = ClusterLabelMap { width: 16, height: 16, labels: labels.clone(), k: 2, centroids: vec![] };
        let c3s = extract_c3s(&stacked, &img);
        let total: usize = c3s.iter().map(|c| c.pixels.len()).sum();
        let expected = labels.iter().filter(|&&l| l != BACKGROUND_LABEL).count();
        assert_eq!(total, expected);
    }
}
