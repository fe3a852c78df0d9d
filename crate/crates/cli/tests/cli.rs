use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use speckle_core::compensation::{FeatureMap, Weights};
use speckle_core::image_io::save_pgm8;
use speckle_core::solver::IntensityObjective;
use speckle_core::wpcf;
use speckle_core::{ComplexField, PropagationSpec, C64};

fn speckle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speckle")).args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_code(out: &Output) -> String {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_three_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let report = ok_json(&speckle(&["--out", s(&a), "--seed", "5", "simulate"]));
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["scene"]["seed"], 5);
    ok_json(&speckle(&["--out", s(&b), "--seed", "5", "simulate"]));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["ground_truth.wpcf", "intensity.pgm", "simulate.json"]);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    let c = dir.path().join("c");
    ok_json(&speckle(&["--out", s(&c), "--seed", "6", "simulate"]));
    assert_ne!(fs::read(a.join("intensity.pgm")).unwrap(), fs::read(c.join("intensity.pgm")).unwrap());
}

#[test]
fn bad_configs_report_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scene": {"widht": 32}}"#).unwrap();
    assert_eq!(error_code(&speckle(&["--config", s(&cfg), "simulate"])), "config_error");
    fs::write(&cfg, r#"{"scene": {"pitch_m": -1.0}}"#).unwrap();
    assert_eq!(error_code(&speckle(&["--config", s(&cfg), "--out", s(dir.path()), "simulate"])), "invalid_parameter");
    assert_eq!(error_code(&speckle(&["--config", "/nonexistent.json", "simulate"])), "io_error");
    assert_eq!(error_code(&speckle(&["--out", s(dir.path()), "reconstruct"])), "missing_input");
    let out = speckle(&["frobnicate"]);
    assert_eq!(error_code(&out), "usage");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reconstruct_logs_three_phases() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    ok_json(&speckle(&["--out", out, "simulate"]));
    let intensity = dir.path().join("intensity.pgm");
    let report = ok_json(&speckle(&["--out", out, "reconstruct", s(&intensity)]));
    assert_eq!(report["phase_objectives"].as_array().unwrap().len(), 3);
    assert!(report["out_of_band_mass"].as_f64().unwrap() <= 1e-12);
    for f in ["reconstruction.wpcf", "reconstruction.pgm", "initial.pgm", "reconstruct.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }

    let small = dir.path().join("small.pgm");
    save_pgm8(&small, 8, 8, &[0.5; 64]).unwrap();
    assert_eq!(error_code(&speckle(&["--out", out, "reconstruct", s(&small)])), "shape_mismatch");
}

#[test]
fn zero_gradient_reconstruction_is_the_projected_start() {
    let dir = tempfile::tempdir().unwrap();
    let (n, pitch) = (16, 10e-6);
    let spec = PropagationSpec::new(633e-9, 5e-3).unwrap();
    let psi = ComplexField::from_fn(n, n, pitch, |x, y| C64::new((x as f64 * 0.3).sin(), (y as f64 * 0.2).cos())).unwrap();
    let objective = IntensityObjective::consistent_with(&psi, spec).unwrap();
    let start = dir.path().join("start.wpcf");
    let measured = dir.path().join("measured.wpcf");
    wpcf::save_field(&start, &psi, None).unwrap();
    let intensity = ComplexField::from_real(n, n, pitch, objective.measured()).unwrap();
    wpcf::save_field(&measured, &intensity, None).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"scene": {{"width": {n}, "height": {n}, "pitch_m": {pitch}, "wavelength_m": 6.33e-7, "z1_m": 2e-3, "z2_m": 3e-3}},
                "reconstruct": {{"initializer": {{"kind": "field", "path": {:?}}}}}}}"#,
            s(&start)
        ),
    )
    .unwrap();
    ok_json(&speckle(&["--config", s(&cfg), "--out", s(dir.path()), "reconstruct", s(&measured)]));
    let (out, _) = wpcf::load_field(dir.path().join("reconstruction.wpcf")).unwrap();
    assert_eq!(out, objective.propagator().project(&psi).unwrap());
}

#[test]
fn filter_dumps_stages_and_preserves_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("zero.wpcf");
    wpcf::save_stack(&input, &FeatureMap::zeros(2, 10, 12).to_stack(1.0)).unwrap();
    let out = dir.path().join("out");
    let report = ok_json(&speckle(&["--out", s(&out), "--dump-stages", "filter", s(&input)]));
    assert_eq!(report["stages"].as_array().unwrap().len(), 12);
    assert_eq!(fs::read_dir(out.join("stages")).unwrap().count(), 12);
    let fin = FeatureMap::from_stack(&wpcf::load_stack(out.join("final.wpcf")).unwrap()).unwrap();
    assert!(fin.data().iter().all(|&v| v == 0.0));
}

#[test]
fn filter_is_deterministic_and_checks_weights() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.wpcf");
    let map = FeatureMap::new(2, 9, 9, (0..162).map(|i| (i as f64 * 0.21).sin()).collect()).unwrap();
    wpcf::save_stack(&input, &map.to_stack(1.0)).unwrap();
    let weights = dir.path().join("w.json");
    Weights::random(2, 2, 3, 1).unwrap().save(&weights).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"compensation": {{"weights": {:?}}}}}"#, s(&weights))).unwrap();
    let runs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            ok_json(&speckle(&["--config", s(&cfg), "--out", s(&out), "filter", s(&input)]));
            fs::read(out.join("final.wpcf")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);

    // three-channel weights against a two-channel input
    Weights::random(3, 3, 3, 1).unwrap().save(&weights).unwrap();
    let out = speckle(&["--config", s(&cfg), "--out", s(dir.path()), "filter", s(&input)]);
    assert_eq!(error_code(&out), "invalid_parameter");

    let mut manifest: Value = serde_json::from_slice(&fs::read(&weights).unwrap()).unwrap();
    manifest["tensors"][4]["shape"] = serde_json::json!([3, 2]);
    fs::write(&weights, manifest.to_string()).unwrap();
    let out = speckle(&["--config", s(&cfg), "--out", s(dir.path()), "filter", s(&input)]);
    assert_eq!(error_code(&out), "tensor_mismatch");
    assert!(String::from_utf8_lossy(&out.stderr).contains("fusion_3"));
}

#[test]
fn evaluate_identical_and_empty_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt, empty) = (dir.path().join("pred"), dir.path().join("gt"), dir.path().join("empty"));
    for d in [&pred, &gt, &empty] {
        fs::create_dir(d).unwrap();
    }
    for (name, k) in [("a", 3), ("b", 5)] {
        let mask: Vec<f64> = (0..36).map(|i| ((i % k) == 0) as u8 as f64).collect();
        save_pgm8(pred.join(format!("{name}.pgm")), 6, 6, &mask).unwrap();
        save_pgm8(gt.join(format!("{name}.png.pgm")), 6, 6, &mask).unwrap();
        save_pgm8(gt.join(format!("{name}.pgm")), 6, 6, &mask).unwrap();
    }
    let report = ok_json(&speckle(&["--out", s(dir.path()), "evaluate", s(&pred), s(&gt)]));
    assert_eq!(report["images"].as_array().unwrap().len(), 2);
    let mean = &report["mean"];
    assert_eq!(mean["mae"], 0.0);
    for key in ["max_f", "s_measure", "e_measure", "fbw"] {
        assert!((mean[key].as_f64().unwrap() - 1.0).abs() < 1e-12, "{key}");
    }
    assert_eq!(report["unmatched_ground_truths"].as_array().unwrap().len(), 2);
    assert_eq!(error_code(&speckle(&["--out", s(dir.path()), "evaluate", s(&empty), s(&gt)])), "no_matches");
    let file = pred.join("a.pgm");
    assert_eq!(error_code(&speckle(&["--out", s(dir.path()), "evaluate", s(&file), s(&gt)])), "usage");
}

#[test]
fn bench_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let report = ok_json(&speckle(&["--out", s(dir.path()), "bench", "--repeats", "1"]));
    let names: Vec<&str> = report["timings"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["simulate", "propagate", "adjoint", "project", "reconstruct", "filter", "evaluate"]);
}
