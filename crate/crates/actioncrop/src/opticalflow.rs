//! Dense optical flow by polynomial expansion (Farneback-style) and its
//! HSV motion-image encoding.
//!
//! Each frame neighborhood is approximated by a quadratic polynomial with
//! Gaussian-weighted least squares; displacement falls out of the
//! coefficient differences, averaged over a window, refined coarse-to-fine
//! over an image pyramid with warping.

use crate::error::{Error, Result};
use crate::videoio::Frame;

#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    pub pyramid_levels: u32,
    pub pyramid_scale: f64,
    pub window_size: usize,
    pub iterations: u32,
    pub poly_n: usize,
    pub poly_sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            window_size: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
        }
    }
}

/// Per-pixel 2D displacement field: prev(x, y) content appears near
/// next(x + u, y + v).
#[derive(Debug, Clone)]
pub struct FlowField {
    pub width: u32,
    pub height: u32,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub src_timestamp: usize,
}

/// Flow rendered into HSV: hue = orientation in [0, 360), saturation =
/// magnitude normalized by the per-frame maximum, value fixed at 1.
#[derive(Debug, Clone)]
pub struct MotionHsvImage {
    pub width: u32,
    pub height: u32,
    pub h: Vec<f32>,
    pub s: Vec<f32>,
    pub v: Vec<f32>,
}

struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    #[inline]
    fn at(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

fn to_gray(frame: &Frame) -> GrayImage {
    let n = (frame.width * frame.height) as usize;
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let r = frame.data[i * 3] as f32;
        let g = frame.data[i * 3 + 1] as f32;
        let b = frame.data[i * 3 + 2] as f32;
        data.push(0.299 * r + 0.587 * g + 0.114 * b);
    }
    GrayImage { width: frame.width as usize, height: frame.height as usize, data }
}

// binomial smooth + 2x subsample
fn downsample(img: &GrayImage) -> GrayImage {
    let kernel = [1.0f32, 4.0, 6.0, 4.0, 1.0];
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * img.at(x as isize + k as isize - 2, y as isize);
            }
            tmp[y * w + x] = acc / 16.0;
        }
    }
    let tmp_img = GrayImage { width: w, height: h, data: tmp };
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = vec![0.0f32; nw * nh];
    for y in 0..nh {
        for x in 0..nw {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp_img.at(2 * x as isize, 2 * y as isize + k as isize - 2);
            }
            out[y * nw + x] = acc / 16.0;
        }
    }
    GrayImage { width: nw, height: nh, data: out }
}

// bilinear resize of one plane, values scaled by `gain`
fn resize_plane(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize, gain: f32) -> Vec<f32> {
    let mut out = vec![0.0f32; dw * dh];
    let sx_ratio = sw as f32 / dw as f32;
    let sy_ratio = sh as f32 / dh as f32;
    for y in 0..dh {
        let fy = ((y as f32 + 0.5) * sy_ratio - 0.5).clamp(0.0, sh as f32 - 1.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f32;
        for x in 0..dw {
            let fx = ((x as f32 + 0.5) * sx_ratio - 0.5).clamp(0.0, sw as f32 - 1.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f32;
            let v = src[y0 * sw + x0] * (1.0 - wx) * (1.0 - wy)
                + src[y0 * sw + x1] * wx * (1.0 - wy)
                + src[y1 * sw + x0] * (1.0 - wx) * wy
                + src[y1 * sw + x1] * wx * wy;
            out[y * dw + x] = v * gain;
        }
    }
    out
}

/// Quadratic expansion coefficients per pixel: [bx, by, axx, ayy, axy],
/// i.e. f(p + (u,v)) ~ c + bx*u + by*v + axx*u^2 + ayy*v^2 + axy*u*v.
struct PolyExpansion {
    width: usize,
    height: usize,
    coef: Vec<[f32; 5]>,
}

fn poly_expansion(img: &GrayImage, n: usize, sigma: f64) -> PolyExpansion {
    let half = (n / 2) as isize;
    // normalized Gaussian applicability
    let mut a = vec![0.0f64; n];
    let mut sum = 0.0;
    for k in -half..=half {
        let w = (-((k * k) as f64) / (2.0 * sigma * sigma)).exp();
        a[(k + half) as usize] = w;
        sum += w;
    }
    for w in &mut a {
        *w /= sum;
    }
    let s2: f64 = (-half..=half).map(|k| (k * k) as f64 * a[(k + half) as usize]).sum();
    let s4: f64 = (-half..=half).map(|k| (k * k * k * k) as f64 * a[(k + half) as usize]).sum();
    // Gram block for (1, u^2, v^2): [[1, s2, s2], [s2, s4, s2^2], [s2, s2^2, s4]]
    let (b, c, d) = (s2, s4, s2 * s2);
    let det = (c - d) * ((c + d) - 2.0 * b * b);
    let ig03 = -b * (c - d) / det;
    let ig33 = (c - b * b) / det;
    let ig34 = (b * b - d) / det;
    let ig11 = 1.0 / s2;
    let ig55 = 1.0 / (s2 * s2);

    let (w, h) = (img.width, img.height);
    // vertical pass: plain, k-weighted, and k^2-weighted column sums
    let mut rows = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut t0, mut t1, mut t2) = (0.0f64, 0.0f64, 0.0f64);
            for k in -half..=half {
                let wgt = a[(k + half) as usize];
                let val = img.at(x as isize, y as isize + k) as f64;
                t0 += wgt * val;
                t1 += wgt * k as f64 * val;
                t2 += wgt * (k * k) as f64 * val;
            }
            rows[y * w + x] = [t0, t1, t2];
        }
    }
    let row_at = |x: isize, y: usize| -> [f64; 3] { rows[y * w + x.clamp(0, w as isize - 1) as usize] };

    let mut coef = vec![[0.0f32; 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut p1, mut p2, mut p4) = (0.0f64, 0.0f64, 0.0f64);
            let (mut p3, mut p6, mut p5) = (0.0f64, 0.0f64, 0.0f64);
            for k in -half..=half {
                let wgt = a[(k + half) as usize];
                let r = row_at(x as isize + k, y);
                p1 += wgt * r[0];
                p2 += wgt * k as f64 * r[0];
                p4 += wgt * (k * k) as f64 * r[0];
                p3 += wgt * r[1];
                p6 += wgt * k as f64 * r[1];
                p5 += wgt * r[2];
            }
            let bx = p2 * ig11;
            let by = p3 * ig11;
            let axx = ig03 * p1 + ig33 * p4 + ig34 * p5;
            let ayy = ig03 * p1 + ig34 * p4 + ig33 * p5;
            let axy = p6 * ig55;
            coef[y * w + x] = [bx as f32, by as f32, axx as f32, ayy as f32, axy as f32];
        }
    }
    PolyExpansion { width: w, height: h, coef }
}

// attenuation of flow constraints near the image border
fn border_scale(x: usize, y: usize, w: usize, h: usize) -> f32 {
    const RAMP: [f32; 5] = [0.14, 0.14, 0.4472, 0.4472, 0.4472];
    let f = |i: usize, n: usize| -> f32 {
        let mut s = 1.0;
        if i < 5 {
            s *= RAMP[i];
        }
        if n - 1 - i < 5 {
            s *= RAMP[n - 1 - i];
        }
        s
    };
    f(x, w) * f(y, h)
}

fn update_flow(
    r0: &PolyExpansion,
    r1: &PolyExpansion,
    flow_u: &mut [f32],
    flow_v: &mut [f32],
    window: usize,
) {
    let (w, h) = (r0.width, r0.height);
    // per-pixel normal-equation terms: m11, m12, m22, h1, h2
    let mut m = vec![[0.0f32; 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let du = flow_u[idx];
            let dv = flow_v[idx];
            let c0 = r0.coef[idx];

            // sample the second expansion at the warped position (bilinear)
            let fx = x as f32 + du;
            let fy = y as f32 + dv;
            let x1 = fx.floor();
            let y1 = fy.floor();
            let (bx1, by1, mut a11, mut a22, mut a12);
            let inside = x1 >= 0.0 && y1 >= 0.0 && (x1 as usize) < w - 1 && (y1 as usize) < h - 1;
            if inside {
                let (xi, yi) = (x1 as usize, y1 as usize);
                let (tx, ty) = (fx - x1, fy - y1);
                let mut c1 = [0.0f32; 5];
                let wts = [
                    ((1.0 - tx) * (1.0 - ty), yi * w + xi),
                    (tx * (1.0 - ty), yi * w + xi + 1),
                    ((1.0 - tx) * ty, (yi + 1) * w + xi),
                    (tx * ty, (yi + 1) * w + xi + 1),
                ];
                for (wgt, j) in wts {
                    for ch in 0..5 {
                        c1[ch] += wgt * r1.coef[j][ch];
                    }
                }
                bx1 = c1[0];
                by1 = c1[1];
                a11 = (c0[2] + c1[2]) * 0.5;
                a22 = (c0[3] + c1[3]) * 0.5;
                a12 = (c0[4] + c1[4]) * 0.25;
            } else {
                bx1 = c0[0];
                by1 = c0[1];
                a11 = c0[2];
                a22 = c0[3];
                a12 = c0[4] * 0.5;
            }

            let mut dbx = (c0[0] - bx1) * 0.5 + a11 * du + a12 * dv;
            let mut dby = (c0[1] - by1) * 0.5 + a12 * du + a22 * dv;

            let scale = border_scale(x, y, w, h);
            if scale < 1.0 {
                a11 *= scale;
                a22 *= scale;
                a12 *= scale;
                dbx *= scale;
                dby *= scale;
            }
            m[idx] = [
                a11 * a11 + a12 * a12,
                a12 * (a11 + a22),
                a22 * a22 + a12 * a12,
                a11 * dbx + a12 * dby,
                a12 * dbx + a22 * dby,
            ];
        }
    }

    let blurred = box_blur5(&m, w, h, window / 2);
    for idx in 0..w * h {
        let [m11, m12, m22, h1, h2] = blurred[idx];
        let det = (m11 as f64) * (m22 as f64) - (m12 as f64) * (m12 as f64) + 1e-3;
        flow_u[idx] = (((m22 as f64) * (h1 as f64) - (m12 as f64) * (h2 as f64)) / det) as f32;
        flow_v[idx] = (((m11 as f64) * (h2 as f64) - (m12 as f64) * (h1 as f64)) / det) as f32;
    }
}

// separable mean filter over 5-channel data, window half-width `r`,
// normalized by the in-bounds sample count
fn box_blur5(src: &[[f32; 5]], w: usize, h: usize, r: usize) -> Vec<[f32; 5]> {
    let mut tmp = vec![[0.0f32; 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            let mut acc = [0.0f32; 5];
            for xx in lo..=hi {
                for ch in 0..5 {
                    acc[ch] += src[y * w + xx][ch];
                }
            }
            let cnt = (hi - lo + 1) as f32;
            for ch in 0..5 {
                tmp[y * w + x][ch] = acc[ch] / cnt;
            }
        }
    }
    let mut out = vec![[0.0f32; 5]; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        let cnt = (hi - lo + 1) as f32;
        for x in 0..w {
            let mut acc = [0.0f32; 5];
            for yy in lo..=hi {
                for ch in 0..5 {
                    acc[ch] += tmp[yy * w + x][ch];
                }
            }
            for ch in 0..5 {
                out[y * w + x][ch] = acc[ch] / cnt;
            }
        }
    }
    out
}

/// Dense flow from `prev` to `next`.
pub fn dense_flow(prev: &Frame, next: &Frame, params: &FlowParams) -> Result<FlowField> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::DimensionMismatch(prev.width, prev.height, next.width, next.height));
    }
    assert!(params.pyramid_levels >= 1, "pyramid_levels must be >= 1");
    assert!(params.window_size >= 5 && params.window_size % 2 == 1, "window_size must be odd >= 5");
    assert!(params.iterations >= 1, "iterations must be >= 1");

    let g0 = to_gray(prev);
    let g1 = to_gray(next);

    let mut pyr0 = vec![g0];
    let mut pyr1 = vec![g1];
    for _ in 1..params.pyramid_levels {
        let last = pyr0.last().unwrap();
        if last.width < 2 * params.poly_n || last.height < 2 * params.poly_n {
            break;
        }
        pyr0.push(downsample(pyr0.last().unwrap()));
        pyr1.push(downsample(pyr1.last().unwrap()));
    }

    let mut flow_u: Vec<f32> = Vec::new();
    let mut flow_v: Vec<f32> = Vec::new();
    for level in (0..pyr0.len()).rev() {
        let im0 = &pyr0[level];
        let im1 = &pyr1[level];
        let (w, h) = (im0.width, im0.height);
        if flow_u.is_empty() {
            flow_u = vec![0.0; w * h];
            flow_v = vec![0.0; w * h];
        } else {
            let pw = pyr0[level + 1].width;
            let ph = pyr0[level + 1].height;
            let gain = w as f32 / pw as f32;
            flow_u = resize_plane(&flow_u, pw, ph, w, h, gain);
            flow_v = resize_plane(&flow_v, pw, ph, w, h, gain);
        }
        let r0 = poly_expansion(im0, params.poly_n, params.poly_sigma);
        let r1 = poly_expansion(im1, params.poly_n, params.poly_sigma);
        for _ in 0..params.iterations {
            update_flow(&r0, &r1, &mut flow_u, &mut flow_v, params.window_size);
        }
    }

    for val in flow_u.iter_mut().chain(flow_v.iter_mut()) {
        if !val.is_finite() {
            *val = 0.0;
        }
    }

    Ok(FlowField {
        width: prev.width,
        height: prev.height,
        u: flow_u,
        v: flow_v,
        src_timestamp: prev.timestamp,
    })
}

/// Encode a flow field as an HSV motion image. Saturation is normalized by
/// max(per-frame max magnitude, 1e-9); zero flow maps to h = 0, s = 0.
pub fn flow_to_hsv(flow: &FlowField) -> MotionHsvImage {
    let n = flow.u.len();
    let mut mags = Vec::with_capacity(n);
    let mut max_mag = 0.0f64;
    for i in 0..n {
        let m = ((flow.u[i] as f64).powi(2) + (flow.v[i] as f64).powi(2)).sqrt();
        max_mag = max_mag.max(m);
        mags.push(m);
    }
    let norm = max_mag.max(1e-9);

    let mut h = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let hue = if mags[i] == 0.0 {
            0.0
        } else {
            let mut deg = (flow.v[i] as f64).atan2(flow.u[i] as f64).to_degrees();
            if deg < 0.0 {
                deg += 360.0;
            }
            if deg >= 360.0 {
                deg = 0.0;
            }
            deg
        };
        h.push(hue as f32);
        s.push((mags[i] / norm).min(1.0) as f32);
    }
    MotionHsvImage {
        width: flow.width,
        height: flow.height,
        h,
        s,
        v: vec![1.0; n],
    }
}

/// Render an HSV motion image to RGB bytes (for debug dumps).
pub fn hsv_to_rgb_frame(img: &MotionHsvImage, timestamp: usize) -> Frame {
    let n = (img.width * img.height) as usize;
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        let (r, g, b) = hsv_to_rgb(img.h[i], img.s[i], img.v[i]);
        data.push(r);
        data.push(g);
        data.push(b);
    }
    Frame::new(img.width, img.height, data, timestamp)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (u8, u8, u8) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    )
}
