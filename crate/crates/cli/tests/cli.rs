use std::path::Path;
use std::process::{Command, Output};

use qsm_core::dipole::{dipole_kernel, forward_field};
use qsm_core::io::{read_qvol, read_volume};
use qsm_core::training::qpatch::read_qpatch_header;
use qsm_core::training::{total_loss, LossWeights};
use qsm_core::Unit;
use serde_json::Value;

fn qsm(dir: &Path, args: &[&str]) -> Output {
    qsm_env(dir, args, &[])
}

fn qsm_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qsm"));
    cmd.current_dir(dir).args(args).env_remove("QSM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run qsm")
}

#[track_caller]
fn ok(out: &Output) -> String {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn phantom(dir: &Path, out: &str, dims: &str) {
    ok(&qsm(dir, &["phantom", "--dims", dims, "--out-dir", out]));
}

const SPHERE: &str = r#"{"primitives": [{"shape": "sphere", "center_mm": [16, 16, 16], "radius_mm": 6, "chi_ppm": 0.1, "label": 1}]}"#;

#[test]
fn help_lists_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&qsm(dir.path(), &["--help"]));
    for c in ["phantom", "simulate", "prep", "recon", "cosmos", "metrics", "roi-stats", "patches", "loss", "augment", "kernel"] {
        assert!(text.contains(c), "{c} missing from help");
    }
    assert!(text.contains("QSM_THREADS"));
}

#[test]
fn phantom_is_deterministic_and_fast() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "a", "64,64,64");
    phantom(dir.path(), "b", "64,64,64");
    for name in ["chi", "mask", "labels", "magnitude"] {
        assert!(dir.path().join(format!("a/{name}.qvol")).exists());
    }
    let ma = json(&dir.path().join("a/manifest.json"));
    let mb = json(&dir.path().join("b/manifest.json"));
    let hashes = |m: &Value| -> Vec<String> {
        m["outputs"].as_array().unwrap().iter().map(|o| o["sha256"].as_str().unwrap().to_owned()).collect()
    };
    assert_eq!(hashes(&ma), hashes(&mb));
    assert_eq!(hashes(&ma).len(), 9);
    assert_eq!(ma["command"], "phantom");
    let t = ma["wall_time_s"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&t), "{t}");
}

#[test]
fn phantom_spec_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsm(dir.path(), &["phantom", "--spec", "missing.json", "--out-dir", "o"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    std::fs::write(dir.path().join("bad.json"), "{\"primitives\": [}").unwrap();
    assert_eq!(code(&qsm(dir.path(), &["phantom", "--spec", "bad.json", "--out-dir", "o"])), 4);

    std::fs::write(dir.path().join("edge.json"), SPHERE.replace("[16, 16, 16]", "[3, 16, 16]")).unwrap();
    let out = qsm(dir.path(), &["phantom", "--spec", "edge.json", "--dims", "32,32,32", "--out-dir", "o"]);
    assert_eq!(code(&out), 5);
    assert_eq!(code(&qsm(dir.path(), &["phantom", "--dims", "32,32", "--out-dir", "o"])), 2);
}

#[test]
fn single_orientation_is_the_forward_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.json"), SPHERE).unwrap();
    ok(&qsm(dir.path(), &["phantom", "--spec", "s.json", "--dims", "32,32,32", "--out-dir", "ph"]));
    ok(&qsm(dir.path(), &["simulate", "--chi", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--orientations", "1", "--out-dir", "sim"]));
    let chi = read_qvol::<f64>(&dir.path().join("ph/chi.qvol")).unwrap();
    let k = dipole_kernel::<f64>([32; 3], [1.0; 3], [0.0, 0.0, 1.0]).unwrap();
    let want = forward_field(&chi, &k).unwrap();
    let got = read_qvol::<f64>(&dir.path().join("sim/scan_0.field.qvol")).unwrap();
    assert!(got.sub(&want).unwrap().max_abs() < 1e-7);
    let index = json(&dir.path().join("sim/scans.json"));
    assert_eq!(index["scans"].as_array().unwrap().len(), 1);
}

#[test]
fn five_noisy_orientations_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "ph", "32,32,32");
    let args = ["simulate", "--chi", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--noise-sigma", "0.002", "--seed", "9"];
    ok(&qsm(dir.path(), &[&args[..], &["--out-dir", "a"]].concat()));
    ok(&qsm(dir.path(), &[&args[..], &["--out-dir", "b"]].concat()));
    let m = json(&dir.path().join("a/manifest.json"));
    assert_eq!(m["details"]["orientations"].as_array().unwrap().len(), 5);
    assert_eq!(m["details"]["noise_sigma_ppm"], 0.002);
    assert_eq!(m["config"]["simulate"]["noise_sigma_ppm"], 0.002);
    assert_eq!(m["config"]["simulate"]["seed"], 9);
    for i in 0..5 {
        let f = format!("scan_{i}.field.qvol");
        assert_eq!(std::fs::read(dir.path().join("a").join(&f)).unwrap(), std::fs::read(dir.path().join("b").join(&f)).unwrap());
    }
    assert_eq!(code(&qsm(dir.path(), &["simulate", "--chi", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--orientations", "4", "--out-dir", "c"])), 5);
}

#[test]
fn reconstructions_write_volume_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "ph", "32,32,32");
    ok(&qsm(dir.path(), &["simulate", "--chi", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--orientations", "3", "--out-dir", "sim"]));
    let field = ["--field", "sim/scan_0.field.qvol", "--mask", "ph/mask.qvol"];
    ok(&qsm(dir.path(), &[&["recon", "--method", "tkd", "--out", "r/tkd.qvol"][..], &field].concat()));
    ok(&qsm(dir.path(), &[&["recon", "--method", "medi", "--lambda-phase", "1000", "--out", "r/medi.nii"][..], &field].concat()));
    ok(&qsm(dir.path(), &["recon", "--method", "cosmos", "--scans", "sim/scans.json", "--out", "r/cosmos.qvol"]));
    ok(&qsm(dir.path(), &["cosmos", "--scans", "sim/scans.json", "--out", "r/cosmos2.qvol"]));

    let tkd = json(&dir.path().join("r/tkd.qvol.manifest.json"));
    assert_eq!(tkd["details"]["method"], "tkd");
    assert!(tkd["details"]["recon_seconds"].as_f64().unwrap() >= 0.0);
    let medi = json(&dir.path().join("r/medi.nii.manifest.json"));
    let obj = medi["details"]["objective"].as_array().unwrap();
    assert!(obj.len() >= 2);
    assert_eq!(medi["details"]["lambda_phase"], 1000.0);
    assert_eq!(
        std::fs::read(dir.path().join("r/cosmos.qvol")).unwrap(),
        std::fs::read(dir.path().join("r/cosmos2.qvol")).unwrap()
    );

    // noiseless COSMOS on the head phantom
    let out = ok(&qsm(dir.path(), &["metrics", "--ref", "ph/chi.qvol", "--test", "r/cosmos.qvol", "--mask", "ph/mask.qvol"]));
    let m: Value = serde_json::from_str(&out).unwrap();
    assert!(m["ssim"].as_f64().unwrap() > 0.7);
    assert!(m["rmse_percent"].as_f64().unwrap() < 15.0);

    let out = qsm(dir.path(), &["recon", "--method", "tkd", "--field", "sim/scan_0.field.qvol", "--mask", "nope.qvol", "--out", "x.qvol"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn metrics_on_identical_volumes() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "ph", "32,32,32");
    let out = ok(&qsm(dir.path(), &["metrics", "--ref", "ph/chi.qvol", "--test", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--out", "m.json"]));
    let m: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(m["rmse_percent"], 0.0);
    assert_eq!(m["hfen_percent"], 0.0);
    assert_eq!(json(&dir.path().join("m.json")), m);
    assert!(dir.path().join("m.json.manifest.json").exists());

    let out = ok(&qsm(dir.path(), &["roi-stats", "--labels", "ph/labels.qvol", "--mask", "ph/mask.qvol", "--map", "ph/chi.qvol", "--map", "ph/chi.qvol"]));
    let r: Value = serde_json::from_str(&out).unwrap();
    let rois = r["rois"].as_array().unwrap();
    assert_eq!(rois.len(), 5);
    assert!(rois.iter().all(|x| x["std_ppm"] == 0.0));
    let out = qsm(dir.path(), &["roi-stats", "--labels", "ph/labels.qvol", "--mask", "ph/mask.qvol", "--map", "ph/chi.qvol", "--rois", "9"]);
    assert_eq!(code(&out), 5);
}

#[test]
fn loss_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "ph", "32,32,32");
    let out = ok(&qsm(dir.path(), &["loss", "--chi", "ph/magnitude.qvol", "--label", "ph/chi.qvol", "--weights", "1,1,0.1"]));
    let got: Value = serde_json::from_str(&out).unwrap();
    let chi = read_volume::<f64>(&dir.path().join("ph/magnitude.qvol")).unwrap();
    let label = read_volume::<f64>(&dir.path().join("ph/chi.qvol")).unwrap();
    let k = dipole_kernel::<f64>(label.dims(), label.voxel_size(), [0.0, 0.0, 1.0]).unwrap();
    let want = total_loss(&chi, &label, &k, &LossWeights { w1: 1.0, w2: 1.0, w3: 0.1 }).unwrap();
    for (key, w) in [("model", want.model), ("l1", want.l1), ("gradient", want.gradient), ("total", want.total)] {
        let g = got[key].as_f64().unwrap();
        assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{key}: {g} vs {w}");
    }
    assert_eq!(code(&qsm(dir.path(), &["loss", "--chi", "ph/chi.qvol", "--label", "ph/chi.qvol", "--weights", "1,1"])), 2);
}

#[test]
fn patches_and_augment() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "ph", "64,64,64");
    let pair = ["--input", "ph/magnitude.qvol", "--label", "ph/chi.qvol", "--mask", "ph/mask.qvol"];
    ok(&qsm(dir.path(), &[&["patches", "--out", "p.qpatch"][..], &pair, &pair].concat()));
    let (h, _) = read_qpatch_header(&dir.path().join("p.qpatch")).unwrap();
    assert_eq!((h.patch_size, h.count), (64, 2));
    let m = json(&dir.path().join("p.qpatch.manifest.json"));
    assert_eq!(m["details"]["records_per_pair"], serde_json::json!([1, 1]));
    let out = qsm(dir.path(), &["patches", "--out", "q.qpatch", "--input", "ph/chi.qvol", "--label", "ph/chi.qvol"]);
    assert_eq!(code(&out), 2);

    ok(&qsm(dir.path(), &["augment", "--label", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--seed", "5", "--out-dir", "a1"]));
    ok(&qsm(dir.path(), &["augment", "--label", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--seed", "5", "--out-dir", "a2"]));
    assert_eq!(std::fs::read(dir.path().join("a1/input.qvol")).unwrap(), std::fs::read(dir.path().join("a2/input.qvol")).unwrap());
    ok(&qsm(dir.path(), &["augment", "--label", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--angle", "-12", "--axis", "y", "--out-dir", "a3"]));
    let m = json(&dir.path().join("a3/manifest.json"));
    assert_eq!(m["details"]["angle_deg"], -12.0);
    let out = qsm(dir.path(), &["augment", "--label", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--angle", "31", "--axis", "x", "--out-dir", "a4"]);
    assert_eq!(code(&out), 5);
}

#[test]
fn kernel_export() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qsm(dir.path(), &["kernel", "--dims", "16,12,8", "--voxel", "1,1,2", "--out", "k.qvol"]));
    let v = read_qvol::<f32>(&dir.path().join("k.qvol")).unwrap();
    assert_eq!(v.unit(), Unit::Dimensionless);
    let k = dipole_kernel::<f32>([16, 12, 8], [1.0, 1.0, 2.0], [0.0, 0.0, 1.0]).unwrap();
    assert_eq!(v.data(), k.values());
}

#[test]
fn config_files_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path(), "ph", "32,32,32");
    std::fs::write(
        dir.path().join("run.toml"),
        "[simulate]\norientations = 1\nnoise_sigma_ppm = 0.01\n\n[vsharp]\nradii_mm = [4.0, 3.0, 2.0, 1.0]\n",
    )
    .unwrap();
    ok(&qsm(dir.path(), &["--config", "run.toml", "simulate", "--chi", "ph/chi.qvol", "--mask", "ph/mask.qvol", "--noise-sigma", "0", "--phase", "--out-dir", "sim"]));
    let m = json(&dir.path().join("sim/manifest.json"));
    assert_eq!(m["config"]["simulate"]["orientations"], 1);
    assert_eq!(m["config"]["simulate"]["noise_sigma_ppm"], 0.0);

    ok(&qsm(dir.path(), &["--config", "run.toml", "prep", "--phase", "sim/scan_0.phase.qvol", "--mask", "ph/mask.qvol", "--out-dir", "prep"]));
    let m = json(&dir.path().join("prep/manifest.json"));
    assert_eq!(m["config"]["vsharp"]["radii_mm"], serde_json::json!([4.0, 3.0, 2.0, 1.0]));
    assert!(dir.path().join("prep/local_field.qvol").exists());

    std::fs::write(dir.path().join("run.json"), r#"{"tkd": {"inverse_cap": 3.0}}"#).unwrap();
    ok(&qsm(dir.path(), &["--config", "run.json", "--manifest", "tkd.json", "recon", "--method", "tkd", "--field", "sim/scan_0.field.qvol", "--mask", "ph/mask.qvol", "--out", "t.qvol"]));
    assert_eq!(json(&dir.path().join("tkd.json"))["config"]["tkd"]["inverse_cap"], 3.0);

    std::fs::write(dir.path().join("typo.toml"), "[vsharp]\nradius = 3\n").unwrap();
    assert_eq!(code(&qsm(dir.path(), &["--config", "typo.toml", "kernel", "--dims", "8,8,8", "--out", "k.qvol"])), 4);
}

#[test]
fn thread_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qsm_env(dir.path(), &["kernel", "--dims", "8,8,8", "--out", "k.qvol"], &[("QSM_THREADS", "2")]));
    assert_eq!(json(&dir.path().join("k.qvol.manifest.json"))["threads"], 2);
    let out = qsm_env(dir.path(), &["kernel", "--dims", "8,8,8", "--out", "k.qvol"], &[("QSM_THREADS", "zero")]);
    assert_eq!(code(&out), 2);
}
