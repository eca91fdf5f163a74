//! End-to-end tests for the command-line interface, driving the compiled
//! binary through temp directories.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_actioncrop"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("failed to spawn actioncrop");
    assert!(
        out.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn synth(dir: &Path, frames: usize) {
    run_ok(bin().args([
        "synth",
        dir.to_str().unwrap(),
        "--frames",
        &frames.to_string(),
        "--seed",
        "3",
    ]));
}

#[test]
fn synth_then_crop_with_dumped_tracks() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("video");
    let out = tmp.path().join("out");
    synth(&video, 12);
    assert!(video.join("frame_000000.png").exists());
    assert!(video.join("track_gt.json").exists());

    run_ok(bin().args([
        "crop",
        video.to_str().unwrap(),
        out.to_str().unwrap(),
        "--dump-tracks",
        "--out-size",
        "56",
    ]));

    let pngs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "png"))
        .collect();
    assert_eq!(pngs.len(), 12);
    let img = image::open(out.join("frame_000000.png")).unwrap();
    assert_eq!((img.width(), img.height()), (56, 56));

    let raw: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("track_raw.json")).unwrap()).unwrap();
    let smoothed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("track_smoothed.json")).unwrap())
            .unwrap();
    assert_eq!(raw.as_array().unwrap().len(), 12);
    assert_eq!(smoothed.as_array().unwrap().len(), 12);
    for rec in smoothed.as_array().unwrap() {
        for key in ["t", "x", "y", "d"] {
            assert!(rec.get(key).is_some(), "sidecar record missing {key}");
        }
    }
}

#[test]
fn staged_pipeline_matches_end_to_end_crop() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("video");
    synth(&video, 12);

    // one-shot crop
    let direct = tmp.path().join("direct");
    run_ok(bin().args(["crop", video.to_str().unwrap(), direct.to_str().unwrap()]));

    // localize -> smooth -> crop --track
    let raw_track = tmp.path().join("raw.json");
    let smoothed_track = tmp.path().join("smoothed.json");
    let staged = tmp.path().join("staged");
    run_ok(bin().args(["localize", video.to_str().unwrap(), raw_track.to_str().unwrap()]));
    run_ok(bin().args([
        "smooth",
        raw_track.to_str().unwrap(),
        smoothed_track.to_str().unwrap(),
        "--frame-width",
        "128",
        "--frame-height",
        "128",
    ]));
    run_ok(bin().args([
        "crop",
        video.to_str().unwrap(),
        staged.to_str().unwrap(),
        "--track",
        smoothed_track.to_str().unwrap(),
    ]));

    for i in 0..12 {
        let name = format!("frame_{i:06}.png");
        let a = std::fs::read(direct.join(&name)).unwrap();
        let b = std::fs::read(staged.join(&name)).unwrap();
        assert_eq!(a, b, "staged output differs from direct crop at {name}");
    }
}

#[test]
fn eval_reports_parseable_metrics() {
    let out = run_ok(bin().args([
        "eval",
        "--seeds",
        "0,1",
        "--trajectories",
        "linear,random-walk",
        "--frames",
        "12",
    ]));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let m = &row["metrics"];
        for key in ["mean_iou_gt", "center_rmse", "jitter_raw", "jitter_smoothed", "containment"] {
            assert!(m[key].is_number(), "missing metric {key} in {row}");
        }
        let iou = m["mean_iou_gt"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&iou));
    }
}

#[test]
fn single_frame_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("video");
    synth(&video, 12);
    // keep only the first frame
    for i in 1..12 {
        std::fs::remove_file(video.join(format!("frame_{i:06}.png"))).unwrap();
    }
    let out = tmp.path().join("out");
    let result = bin()
        .args(["crop", video.to_str().unwrap(), out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2), "expected data-error exit code");
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "not_a_known_key = 1\n").unwrap();
    let video = tmp.path().join("video");
    synth(&video, 12);
    let result = bin()
        .args([
            "crop",
            video.to_str().unwrap(),
            tmp.path().join("out").to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1), "expected usage-error exit code");
}

#[test]
fn raw_format_round_trips_through_crop() {
    let tmp = tempfile::tempdir().unwrap();
    let video = tmp.path().join("video");
    run_ok(bin().args([
        "synth",
        video.to_str().unwrap(),
        "--frames",
        "8",
        "--format",
        "raw",
    ]));
    assert!(video.join("video.raw").exists());
    assert!(video.join("manifest.json").exists());

    let out = tmp.path().join("out");
    run_ok(bin().args([
        "crop",
        video.to_str().unwrap(),
        out.to_str().unwrap(),
        "--format",
        "ppm",
        "--resample",
        "nearest",
    ]));
    let ppm = std::fs::read(out.join("frame_000000.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6"));
}
