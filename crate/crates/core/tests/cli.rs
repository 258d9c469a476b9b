use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thermofuse::burst::BurstSpec;
use thermofuse::calibration::{read_coefficients, write_coefficients, CoefficientTensor, RadialModel};
use thermofuse::cli::output::{RunManifest, LOCK_FILE, MANIFEST_FILE};
use thermofuse::fusion::{fuse, kernel_provider, KernelKind, OffsetModel};
use thermofuse::io::{read_json, read_mask_pgm, read_raw_map, write_json, write_raw_map};
use thermofuse::metrics::{default_thresholds, error_report, ErrorReport};
use thermofuse::pipeline::{kernels_for, CorpusSpec, KernelChoice};
use thermofuse::scene::SceneKind;
use thermofuse::Grid;

fn thermofuse(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermofuse"))
        .args(args)
        .current_dir(cwd)
        .env_remove("THERMOFUSE_THREADS")
        .output()
        .expect("binary runs")
}

#[track_caller]
fn ok(args: &[&str], cwd: &Path) -> String {
    let out = thermofuse(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn uniform_camera(dir: &Path, rows: usize, cols: usize) -> PathBuf {
    let center = RadialModel::reference_camera().reconstruct(3, 3).unwrap().pixel(1, 1);
    let path = dir.join("uniform.tfct");
    write_coefficients(&path, &CoefficientTensor::uniform(rows, cols, center).unwrap()).unwrap();
    path
}

fn max_relative_error(a: &CoefficientTensor, b: &CoefficientTensor) -> f64 {
    a.planes()
        .iter()
        .zip(b.planes())
        .flat_map(|(pa, pb)| pa.iter().zip(pb.iter()).map(|(x, y)| ((x - y) / y).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn synth_then_calibrate_recovers_the_camera() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out", "syn", "--rows", "16", "--cols", "16"], d);
    let out = ok(&["calibrate", "--manifest", "syn/measurements.json", "--out", "cal"], d);
    assert!(out.contains("16 samples"), "{out}");
    let truth = read_coefficients(&d.join("syn/coefficients.tfct")).unwrap();
    let back = read_coefficients(&d.join("cal/coefficients.tfct")).unwrap();
    assert!(max_relative_error(&back, &truth) < 1e-6);

    let m: RunManifest = read_json(&d.join("cal").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.command, "calibrate");
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.config_sha256.len(), 64);
    assert!(m.outputs.iter().any(|o| o.path == "coefficients.tfct"));
    assert!(!d.join("cal").join(LOCK_FILE).exists());
}

#[test]
fn radial_degree_zero_gives_constant_planes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--out", "syn", "--rows", "8", "--cols", "8", "--format", "f32"], d);
    ok(&["calibrate", "--manifest", "syn/measurements.json", "--out", "cal", "--radial-degree", "0"], d);
    let rm: RadialModel = read_json(&d.join("cal/radial.json")).unwrap();
    assert_eq!(rm.degree, 0);
    let rec = read_coefficients(&d.join("cal/coefficients_radial.tfct")).unwrap();
    for plane in rec.planes() {
        let first = plane.as_slice()[0];
        assert!(plane.iter().all(|&v| v == first));
    }
}

#[test]
fn too_few_samples_is_a_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = d.join("synth.json");
    fs::write(&cfg, r#"{"rows": 4, "cols": 4, "t_obj": [20, 40], "t_amb": [10, 20, 30]}"#).unwrap();
    ok(&["synth", "--out", "syn", "--config", "synth.json"], d);
    let out = thermofuse(&["calibrate", "--manifest", "syn/measurements.json", "--out", "cal"], d);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("at least 8 samples") && err.contains("rank-8"), "{err}");
}

#[test]
fn user_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(thermofuse(&["bogus"], d).status.code(), Some(2));
    assert_eq!(thermofuse(&["fuse", "--burst", "missing", "--out", "x"], d).status.code(), Some(2));
    assert_eq!(thermofuse(&["fuse", "--burst", "b", "--out", "x", "--kernels", "box"], d).status.code(), Some(2));
    assert_eq!(thermofuse(&["--help"], d).status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_thermofuse"))
        .args(["geometry", "--height", "50", "--focal-mm", "9.8", "--sensor-mm", "4.4", "--sensor-px", "256", "--speed", "10", "--fps", "30"])
        .env("THERMOFUSE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::create_dir(d.join("sc")).unwrap();
    fs::write(d.join("sc").join(LOCK_FILE), b"").unwrap();
    let out = thermofuse(&["scene", "--out", "sc", "--rows", "4", "--cols", "4"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}

#[test]
fn geometry_prints_flight_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(
        &["geometry", "--height", "50", "--focal-mm", "9.8", "--sensor-mm", "4.4", "--sensor-px", "256", "--speed", "10", "--fps", "30"],
        tmp.path(),
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["px_per_frame"].as_f64().unwrap() - 3.80).abs() < 0.02);
}

fn scene_and_burst(d: &Path, out: &str, extra: &[&str]) {
    if !d.join("sc/scene.f32").exists() {
        ok(&["scene", "--out", "sc", "--rows", "32", "--cols", "32", "--seed", "3"], d);
        ok(&["synth", "--out", "syn", "--rows", "32", "--cols", "32", "--format", "pgm"], d);
    }
    let mut args = vec!["burst", "--scene", "sc/scene.f32", "--coeffs", "syn/coefficients.tfct", "--out", out, "--t-amb", "12.5"];
    args.extend_from_slice(extra);
    ok(&args, d);
}

#[test]
fn bursts_are_byte_identical_under_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scene_and_burst(d, "a", &["--seed", "9"]);
    scene_and_burst(d, "b", &["--seed", "9"]);
    scene_and_burst(d, "c", &["--seed", "10"]);
    let (a, b, c) = (tree(&d.join("a")), tree(&d.join("b")), tree(&d.join("c")));
    assert_eq!(a, b);
    assert_ne!(a["frame_0000.pgm"], c["frame_0000.pgm"]);

    let meta: serde_json::Value = read_json(&d.join("a/burst.json")).unwrap();
    let pivot = meta["pivot"].as_u64().unwrap() as usize;
    for (i, o) in meta["overlaps"].as_array().unwrap().iter().enumerate() {
        let o = o.as_f64().unwrap();
        if i == pivot {
            assert_eq!(o, 1.0);
        } else {
            assert!((0.6..=0.8).contains(&o), "overlap {o}");
        }
    }
    let m: RunManifest = read_json(&d.join("a").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seed, 9);
    assert_eq!(m.inputs.len(), 2);

    scene_and_burst(d, "one", &["--n-frames", "1"]);
    let meta: serde_json::Value = read_json(&d.join("one/burst.json")).unwrap();
    assert_eq!(meta["n_frames"], 1);
    assert_eq!(meta["overlaps"][0], 1.0);
}

#[test]
fn identity_fuse_of_a_constant_burst_is_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cam = uniform_camera(d, 16, 16);
    write_raw_map(&d.join("flat.f32"), &Grid::filled(16, 16, 31.0), "degC").unwrap();
    write_json(&d.join("spec.json"), &BurstSpec::stationary(5)).unwrap();
    ok(
        &["burst", "--scene", "flat.f32", "--coeffs", cam.to_str().unwrap(), "--config", "spec.json", "--out", "b"],
        d,
    );
    ok(&["fuse", "--burst", "b", "--kernels", "identity", "--out", "f"], d);
    let est = read_raw_map(&d.join("f/estimate.f32")).unwrap();
    let first = est.as_slice()[0];
    assert!(est.iter().all(|&v| v == first));
    assert!(d.join("f/estimate.pgm").exists() && d.join("f/estimate.json").exists());
}

#[test]
fn file_kernels_match_builtin_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scene_and_burst(d, "b", &["--n-frames", "3"]);
    let ks = kernel_provider(&KernelKind::Average, 3, (32, 32), 3).unwrap();
    ks.write(&d.join("avg.tfks")).unwrap();
    fs::write(d.join("offset.json"), serde_json::to_string(&OffsetModel::constant(0.05)).unwrap()).unwrap();
    ok(&["fuse", "--burst", "b", "--kernels", "average", "--kernel-size", "3", "--offset", "offset.json", "--out", "builtin"], d);
    ok(&["fuse", "--burst", "b", "--kernels", "file:avg.tfks", "--kernel-size", "3", "--offset", "offset.json", "--out", "file"], d);
    assert_eq!(
        fs::read(d.join("builtin/estimate.f32")).unwrap(),
        fs::read(d.join("file/estimate.f32")).unwrap()
    );
    // kernels for another frame size are a user error
    kernel_provider(&KernelKind::Average, 3, (16, 16), 3).unwrap().write(&d.join("small.tfks")).unwrap();
    let out = thermofuse(&["fuse", "--burst", "b", "--kernels", "file:small.tfks", "--out", "bad"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shifted_fuse_matches_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scene_and_burst(d, "b", &[]);
    ok(&["fuse", "--burst", "b", "--kernels", "shifted", "--kernel-size", "11", "--out", "f"], d);
    let (burst, _) = thermofuse::burst::load_burst(&d.join("b")).unwrap();
    let ks = kernels_for(&burst, &KernelChoice::Shifted, 11).unwrap();
    let expect = fuse(&burst, &ks, &OffsetModel::zeros(0)).unwrap();
    let got = read_raw_map(&d.join("f/estimate.f32")).unwrap();
    assert_eq!(got, expect.map(|&v| v as f32 as f64));
}

#[test]
fn eval_reports_match_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let truth = Grid::from_fn(10, 12, |r, c| 20.0 + r as f64 * 0.5 + c as f64 * 0.25);
    write_raw_map(&d.join("t.f32"), &truth, "degC").unwrap();
    write_raw_map(&d.join("biased.f32"), &truth.map(|v| v + 0.5), "degC").unwrap();
    write_raw_map(&d.join("small.f32"), &Grid::zeros(4, 4), "degC").unwrap();

    ok(&["eval", "--estimate", "t.f32", "--truth", "t.f32", "--out", "same"], d);
    let r: ErrorReport = read_json(&d.join("same/report.json")).unwrap();
    assert_eq!(r.mae, 0.0);

    ok(&["eval", "--estimate", "biased.f32", "--truth", "t.f32", "--out", "bias"], d);
    let r: ErrorReport = read_json(&d.join("bias/report.json")).unwrap();
    assert!((r.mae - 0.5).abs() < 1e-12);
    let est = read_raw_map(&d.join("biased.f32")).unwrap();
    let t = read_raw_map(&d.join("t.f32")).unwrap();
    let lib = error_report(&est, &t, &thermofuse::Mask::all_true(10, 12), &default_thresholds()).unwrap();
    assert_eq!(r.mae, lib.mae);
    assert_eq!(r.cumulative, lib.cumulative);
    assert!(d.join("bias/diff.pgm").exists() && d.join("bias/diff.json").exists());

    let out = thermofuse(&["eval", "--estimate", "small.f32", "--truth", "t.f32", "--out", "bad"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn end_to_end_fuse_and_eval_use_the_burst_mask() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scene_and_burst(d, "b", &[]);
    ok(&["fuse", "--burst", "b", "--out", "f"], d);
    ok(&["eval", "--estimate", "f/estimate.f32", "--truth", "b/truth.f32", "--mask", "f/mask.pgm", "--out", "e"], d);
    let r: ErrorReport = read_json(&d.join("e/report.json")).unwrap();
    assert_eq!(r.valid_pixels, read_mask_pgm(&d.join("f/mask.pgm")).unwrap().count_true());
    assert!(r.mae.is_finite());
}

fn sweep_config(d: &Path) -> PathBuf {
    let cam = uniform_camera(d, 32, 32);
    let corpus = CorpusSpec {
        n_scenes: 20,
        scene_kind: SceneKind::Constant,
        scene_range: [28.0, 32.0],
        t_amb_range: [15.0, 25.0],
        burst: BurstSpec {
            noise_sigma2: 5.0,
            ..BurstSpec::stationary(7)
        },
        kernels: KernelChoice::Average,
        kernel_size: 1,
        seed: 10_000,
    };
    let fit = CorpusSpec {
        n_scenes: 300,
        burst: BurstSpec::stationary(1),
        seed: 0,
        ..corpus.clone()
    };
    let cfg = serde_json::json!({
        "coefficients": cam.file_name().unwrap().to_str().unwrap(),
        "corpus": corpus,
        "fit_corpus": fit,
        "nu": 3,
        "n_values": [1, 2, 4, 7],
    });
    let path = d.join("sweep.json");
    write_json(&path, &cfg).unwrap();
    path
}

fn read_sweep(path: &Path) -> Vec<(usize, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n_frames,mae"));
    lines
        .map(|l| {
            let (n, m) = l.split_once(',').unwrap();
            (n.parse().unwrap(), m.parse().unwrap())
        })
        .collect()
}

#[test]
fn sweep_mae_does_not_increase_with_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    sweep_config(d);
    ok(&["sweep-n", "--config", "sweep.json", "--out", "s1"], d);
    let rows = read_sweep(&d.join("s1/sweep.csv"));
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [1, 2, 4, 7]);
    for w in rows.windows(2) {
        assert!(w[1].1 <= w[0].1, "{rows:?}");
    }
    ok(&["sweep-n", "--config", "sweep.json", "--out", "s2"], d);
    assert_eq!(tree(&d.join("s1")), tree(&d.join("s2")));

    // reuse the fitted model, one frame count
    ok(&["sweep-n", "--config", "sweep.json", "--offset", "s1/offset.json", "--n-values", "4", "--out", "single"], d);
    let single = read_sweep(&d.join("single/sweep.csv"));
    assert_eq!(single.len(), 1);
    assert_eq!(single[0], rows[2]);
}
