//! Frame-sequence ingest and output.
//!
//! Supported inputs: a directory of PNG or PPM frames (ordered by filename),
//! or a raw-planar file (`video.raw`) plus a JSON manifest. Track sidecars
//! are JSON arrays of `{t, x, y, d}` records.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{PatchTrack, SquarePatch, TrackKind};

/// One 8-bit RGB frame, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
    pub timestamp: usize,
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>, timestamp: usize) -> Self {
        assert_eq!(data.len(), (width * height * 3) as usize);
        Frame { width, height, data, timestamp }
    }

    /// Solid-color frame, handy for tests and padding.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3], timestamp: usize) -> Self {
        let mut data = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Frame { width, height, data, timestamp }
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoSequence {
    pub frames: Vec<Frame>,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewFrames { found: frames.len() });
        }
        let (w, h) = (frames[0].width, frames[0].height);
        for f in &frames {
            if f.width != w || f.height != h {
                return Err(Error::DimensionMismatch(w, h, f.width, f.height));
            }
        }
        Ok(VideoSequence { frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFormat {
    Png,
    Ppm,
    Raw,
}

impl std::str::FromStr for SequenceFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "png" => Ok(SequenceFormat::Png),
            "ppm" => Ok(SequenceFormat::Ppm),
            "raw" => Ok(SequenceFormat::Raw),
            other => Err(format!("unknown format '{other}' (expected png|ppm|raw)")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawManifest {
    width: u32,
    height: u32,
    frames: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Read a frame sequence from `dir_path`.
///
/// If `manifest` is given (or the directory holds `manifest.json`), reads
/// raw-planar frames from `video.raw`; otherwise every `.png`/`.ppm` file
/// in the directory, sorted lexicographically.
pub fn read_sequence(dir_path: &Path, manifest: Option<&Path>) -> Result<VideoSequence> {
    let default_manifest = dir_path.join("manifest.json");
    let manifest_path = manifest
        .map(Path::to_path_buf)
        .or_else(|| default_manifest.exists().then(|| default_manifest.clone()));
    if let Some(mpath) = manifest_path {
        return read_raw_sequence(dir_path, &mpath);
    }

    let mut paths: Vec<PathBuf> = fs::read_dir(dir_path)
        .map_err(|e| io_err(dir_path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("ppm")
            )
        })
        .collect();
    paths.sort();

    let mut frames = Vec::with_capacity(paths.len());
    for (t, path) in paths.iter().enumerate() {
        let frame = read_frame(path, t)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if frame.width != first.width || frame.height != first.height {
                return Err(Error::MixedDimensions {
                    first_w: first.width,
                    first_h: first.height,
                    other_w: frame.width,
                    other_h: frame.height,
                    path: path.clone(),
                });
            }
        }
        frames.push(frame);
    }
    VideoSequence::new(frames)
}

fn read_frame(path: &Path, timestamp: usize) -> Result<Frame> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => read_ppm(path, timestamp),
        _ => {
            let img = image::open(path)
                .map_err(|e| Error::DecodeError { path: path.to_path_buf(), reason: e.to_string() })?
                .to_rgb8();
            Ok(Frame::new(img.width(), img.height(), img.into_raw(), timestamp))
        }
    }
}

fn read_raw_sequence(dir_path: &Path, manifest_path: &Path) -> Result<VideoSequence> {
    let text = fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let m: RawManifest = serde_json::from_str(&text).map_err(|e| Error::BadManifest {
        path: manifest_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if m.frames < 2 {
        return Err(Error::TooFewFrames { found: m.frames });
    }
    let raw_path = if dir_path.is_dir() { dir_path.join("video.raw") } else { dir_path.to_path_buf() };
    let mut bytes = Vec::new();
    fs::File::open(&raw_path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(&raw_path, e))?;

    let plane = (m.width * m.height) as usize;
    let frame_bytes = plane * 3;
    if bytes.len() != frame_bytes * m.frames {
        return Err(Error::BadManifest {
            path: manifest_path.to_path_buf(),
            reason: format!(
                "raw file is {} bytes, expected {} ({} frames of {}x{})",
                bytes.len(),
                frame_bytes * m.frames,
                m.frames,
                m.width,
                m.height
            ),
        });
    }

    let mut frames = Vec::with_capacity(m.frames);
    for t in 0..m.frames {
        let base = t * frame_bytes;
        let mut data = vec![0u8; frame_bytes];
        // planar R, G, B back to interleaved
        for i in 0..plane {
            data[i * 3] = bytes[base + i];
            data[i * 3 + 1] = bytes[base + plane + i];
            data[i * 3 + 2] = bytes[base + 2 * plane + i];
        }
        frames.push(Frame::new(m.width, m.height, data, t));
    }
    VideoSequence::new(frames)
}

/// Write `seq` under `dir_path` (created if absent). Raw format writes
/// `video.raw` + `manifest.json`; image formats write `frame_%06d.<ext>`.
pub fn write_sequence(seq: &VideoSequence, dir_path: &Path, format: SequenceFormat) -> Result<()> {
    fs::create_dir_all(dir_path).map_err(|e| io_err(dir_path, e))?;
    match format {
        SequenceFormat::Raw => {
            let raw_path = dir_path.join("video.raw");
            let plane = (seq.width() * seq.height()) as usize;
            let mut out = BufWriter::new(fs::File::create(&raw_path).map_err(|e| io_err(&raw_path, e))?);
            let mut planar = vec![0u8; plane * 3];
            for f in &seq.frames {
                for i in 0..plane {
                    planar[i] = f.data[i * 3];
                    planar[plane + i] = f.data[i * 3 + 1];
                    planar[2 * plane + i] = f.data[i * 3 + 2];
                }
                out.write_all(&planar).map_err(|e| io_err(&raw_path, e))?;
            }
            out.flush().map_err(|e| io_err(&raw_path, e))?;
            let m = RawManifest { width: seq.width(), height: seq.height(), frames: seq.frame_count() };
            let mpath = dir_path.join("manifest.json");
            fs::write(&mpath, serde_json::to_string_pretty(&m).unwrap()).map_err(|e| io_err(&mpath, e))?;
        }
        SequenceFormat::Png => {
            for f in &seq.frames {
                let path = dir_path.join(format!("frame_{:06}.png", f.timestamp));
                image::save_buffer(
                    &path,
                    &f.data,
                    f.width,
                    f.height,
                    image::ColorType::Rgb8,
                )
                .map_err(|e| Error::DecodeError { path, reason: e.to_string() })?;
            }
        }
        SequenceFormat::Ppm => {
            for f in &seq.frames {
                let path = dir_path.join(format!("frame_{:06}.ppm", f.timestamp));
                write_ppm(f, &path)?;
            }
        }
    }
    Ok(())
}

fn write_ppm(frame: &Frame, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path).map_err(|e| io_err(path, e))?);
    write!(out, "P6\n{} {}\n255\n", frame.width, frame.height).map_err(|e| io_err(path, e))?;
    out.write_all(&frame.data).map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

fn read_ppm(path: &Path, timestamp: usize) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let bad = |reason: &str| Error::DecodeError { path: path.to_path_buf(), reason: reason.into() };

    // header: magic, width, height, maxval, then single whitespace byte
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?.to_string());
    }
    pos += 1; // the single whitespace after maxval

    if fields[0] != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let width: u32 = fields[1].parse().map_err(|_| bad("bad width"))?;
    let height: u32 = fields[2].parse().map_err(|_| bad("bad height"))?;
    if fields[3] != "255" {
        return Err(bad("only maxval 255 supported"));
    }
    let n = (width * height * 3) as usize;
    if bytes.len() < pos + n {
        return Err(bad("truncated pixel data"));
    }
    Ok(Frame::new(width, height, bytes[pos..pos + n].to_vec(), timestamp))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct TrackRecord {
    t: usize,
    x: f64,
    y: f64,
    d: f64,
}

/// Write a track as a JSON sidecar: `[{"t":0,"x":..,"y":..,"d":..}, ...]`.
pub fn write_track_sidecar(track: &PatchTrack, path: &Path) -> Result<()> {
    let records: Vec<TrackRecord> = track
        .patches
        .iter()
        .map(|p| TrackRecord { t: p.t, x: p.x, y: p.y, d: p.d })
        .collect();
    let json = serde_json::to_string_pretty(&records).unwrap();
    fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn read_track_sidecar(path: &Path, kind: TrackKind) -> Result<PatchTrack> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let records: Vec<TrackRecord> = serde_json::from_str(&text).map_err(|e| Error::BadManifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let patches = records
        .into_iter()
        .map(|r| SquarePatch { x: r.x, y: r.y, d: r.d, t: r.t })
        .collect();
    Ok(PatchTrack { patches, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn noise_frame(w: u32, h: u32, t: usize, seed: u64) -> Frame {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * 3).map(|_| rng.gen()).collect();
        Frame::new(w, h, data, t)
    }

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..16).map(|t| noise_frame(24, 18, t, t as u64)).collect();
        let seq = VideoSequence::new(frames).unwrap();
        write_sequence(&seq, dir.path(), SequenceFormat::Ppm).unwrap();
        let back = read_sequence(dir.path(), None).unwrap();
        assert_eq!(back.frame_count(), 16);
        assert_eq!(back, seq);
        for (t, f) in back.frames.iter().enumerate() {
            assert_eq!(f.timestamp, t);
        }
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..3).map(|t| noise_frame(20, 20, t, 7 + t as u64)).collect();
        let seq = VideoSequence::new(frames).unwrap();
        write_sequence(&seq, dir.path(), SequenceFormat::Png).unwrap();
        let back = read_sequence(dir.path(), None).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..8).map(|t| noise_frame(64, 48, t, 100 + t as u64)).collect();
        let seq = VideoSequence::new(frames).unwrap();
        write_sequence(&seq, dir.path(), SequenceFormat::Raw).unwrap();
        let back = read_sequence(dir.path(), None).unwrap();
        assert_eq!(back.frame_count(), 8);
        assert_eq!(back.width(), 64);
        assert_eq!(back, seq);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_ppm(&noise_frame(16, 16, 0, 1), &dir.path().join("frame_000000.ppm")).unwrap();
        write_ppm(&noise_frame(16, 20, 1, 2), &dir.path().join("frame_000001.ppm")).unwrap();
        let err = read_sequence(dir.path(), None).unwrap_err();
        assert!(matches!(err, Error::MixedDimensions { .. }), "{err:?}");
    }

    #[test]
    fn too_few_frames_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_ppm(&noise_frame(16, 16, 0, 1), &dir.path().join("frame_000000.ppm")).unwrap();
        let err = read_sequence(dir.path(), None).unwrap_err();
        assert!(matches!(err, Error::TooFewFrames { found: 1 }));
    }

    #[test]
    fn track_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let track = PatchTrack {
            patches: vec![
                SquarePatch { x: 10.25, y: 3.5, d: 8.125, t: 0 },
                SquarePatch { x: 11.0, y: 4.0, d: 8.0, t: 1 },
                SquarePatch { x: 12.75, y: 4.5, d: 8.0625, t: 2 },
            ],
            kind: TrackKind::Smoothed,
        };
        let path = dir.path().join("track.json");
        write_track_sidecar(&track, &path).unwrap();
        let back = read_track_sidecar(&path, TrackKind::Smoothed).unwrap();
        assert_eq!(back.patches.len(), 3);
        for (a, b) in track.patches.iter().zip(&back.patches) {
            assert_eq!(a.t, b.t);
            assert!((a.x - b.x).abs() < 1e-12);
            assert!((a.y - b.y).abs() < 1e-12);
            assert!((a.d - b.d).abs() < 1e-12);
        }
    }
}
