use std::path::Path;
use std::process::Command;

const SMALL: &str = r#""grid": {"n_x": 32, "n_theta": 64, "n_beta": 32, "n_alpha": 24},
    "attenuation": {"kind": "gaussian", "center": [0.05, 0.1], "sigma": 0.25, "amp": [0.8, 0.6]},
    "range_degree": 10"#;

fn write_config(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    let body = if extra.is_empty() { format!("{{{SMALL}}}") } else { format!("{{{SMALL}, {extra}}}") };
    std::fs::write(&p, body).unwrap();
    p
}

fn geotomo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_geotomo")).args(args).output().unwrap()
}

fn code(o: &std::process::Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn malformed_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"grid\": {\"n_theta\": 30}}").unwrap();
    let o = geotomo(&["selfcheck", "--config", p.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&p, "{\"metric\": [").unwrap();
    assert_eq!(code(&geotomo(&["phantom", "--config", p.to_str().unwrap()])), 3);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&geotomo(&["phantom", "--config", missing.to_str().unwrap()])), 3);
}

#[test]
fn missing_data_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#""data": "absent""#);
    assert_eq!(code(&geotomo(&["rangetest", "--config", c.to_str().unwrap()])), 3);
}

#[test]
fn selfcheck_is_deterministic_and_filterable() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#""seed": 11, "checks": ["adjoint_duality", "chord_law"]"#);
    let c = c.to_str().unwrap();
    let out = |d: &str| dir.path().join(d);
    let a = geotomo(&["selfcheck", "--config", c, "--out", out("a").to_str().unwrap()]);
    let b = geotomo(&["selfcheck", "--config", c, "--out", out("b").to_str().unwrap()]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    let ra = std::fs::read(out("a/selfcheck_report.json")).unwrap();
    let rb = std::fs::read(out("b/selfcheck_report.json")).unwrap();
    assert_eq!(ra, rb);
    let v: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    let names: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["adjoint_duality", "chord_law"]);

    let e = write_config(dir.path(), "e.json", r#""checks": []"#);
    let o = geotomo(&["selfcheck", "--config", e.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/selfcheck_report.json")).unwrap()).unwrap();
    assert!(v["entries"].as_array().unwrap().is_empty());
}

#[test]
fn unattainable_tolerance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "c.json",
        r#""checks": ["adjoint_duality"], "tolerances": {"selfcheck_scale": 1e-12}"#,
    );
    assert_eq!(code(&geotomo(&["selfcheck", "--config", c.to_str().unwrap()])), 2);
}

#[test]
fn phantom_forward_reconstruct_rangetest() {
    let dir = tempfile::tempdir().unwrap();
    let phantom = r#""phantom": {"f": {"kind": "gaussian", "center": [0.1, -0.2], "sigma": 0.3, "amp": [1, 0.5]},
        "h0": {"kind": "poly-bump", "amp": [0.3, -0.7]}, "omega_plus": [[0.3, 0.1]]},
        "tolerances": {"reconstruct": 0.15}, "seed": 5"#;
    let c = write_config(dir.path(), "c.json", phantom);
    let c = c.to_str().unwrap();
    for cmd in ["phantom", "forward"] {
        let o = geotomo(&[cmd, "--config", c]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let out = dir.path().join("out");
    for f in ["phantom_f.bin", "phantom_f.json", "phantom_h0.pgm", "data.bin", "data.json", "forward_report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let pgm = std::fs::read(out.join("phantom_f.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 32\n255\n"));
    assert_eq!(std::fs::metadata(out.join("data.bin")).unwrap().len(), 32 * 24 * 16);
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("data.json")).unwrap()).unwrap();
    assert_eq!(side["dtype"], "complex128");
    assert_eq!(side["shape"], serde_json::json!([32, 24]));

    let with_data = format!("{phantom}, \"data\": \"out/data\"");
    let d = write_config(dir.path(), "d.json", &with_data);
    let d = d.to_str().unwrap();
    let o = geotomo(&["reconstruct", "--config", d, "--svd-cutoff", "1e-6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("reconstruct_report.json")).unwrap()).unwrap();
    assert!(r["consistency"].as_f64().unwrap() < 5e-2);
    assert!(out.join("recon_f.pgm").exists() && out.join("recon_h0.bin").exists());

    assert_eq!(code(&geotomo(&["rangetest", "--config", d])), 0);
    let i0 = format!("{with_data}, \"range_target\": \"i0\"");
    let e = write_config(dir.path(), "e.json", &i0);
    let o = geotomo(&["rangetest", "--config", e.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("rangetest_report.json")).unwrap()).unwrap();
    assert_eq!(r["verdict"], false);
    assert_eq!(r["target"], "i0");
}

#[test]
fn noisy_forward_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "c.json",
        r#""phantom": {"f": {"kind": "gaussian", "sigma": 0.3}}, "noise_snr": 20, "seed": 9"#,
    );
    let c = c.to_str().unwrap();
    let mut reports = Vec::new();
    for d in ["a", "b"] {
        let out = dir.path().join(d);
        assert_eq!(code(&geotomo(&["forward", "--config", c, "--out", out.to_str().unwrap()])), 0);
        reports.push((std::fs::read(out.join("data.bin")).unwrap(), std::fs::read(out.join("forward_report.json")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let r: serde_json::Value = serde_json::from_slice(&reports[0].1).unwrap();
    assert!(r["noise_sigma"].as_f64().unwrap() > 0.0);
}
