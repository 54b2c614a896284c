use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractube"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "experiment": "cross-section",
  "parameters": { "s": 0.5, "spacings": [0.0625, 0.03125], "k_max": 3 }
}"#;

#[test]
fn s_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment":"cross-section","parameters":{"s":1.5,"spacings":[0.0625],"k_max":3}}"#,
    );
    let o = run(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("s = 1.5"), "{}", stderr(&o));
}

#[test]
fn truncation_inside_bump_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment":"tube","parameters":{"s":0.5,"bump":{"depth":0.5,"half_length":4},
            "truncations":[2,8],"spacings":[0.25,0.125]}}"#,
    );
    let o = run(&[
        "run",
        &cfg,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("out").join("manifest.json").exists());
}

#[test]
fn missing_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment":"cross-section","parameters":{"s":0.5,"k_max":3}}"#,
    );
    let o = run(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spacings"), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment":"weyl","parameters":{"s":0.5,"widths":[4,8,16,32],"widht":1}}"#,
    );
    let o = run(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("widht"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment":"nope","parameters":{}}"#,
    );
    assert_eq!(run(&["validate", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    assert_eq!(
        run(&["validate", "/nonexistent/c.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn rerun_is_byte_identical_and_manifest_lists_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    let files = manifest["files"].as_array().unwrap();
    let mut listed: Vec<String> = files
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    listed.sort();
    let mut on_disk: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert!(listed.contains(&"eigenvalues.csv".to_string()));
    for name in &on_disk {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    for f in files {
        let text = fs::read_to_string(a.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(
            f["rows"].as_u64().unwrap() as usize + 1,
            text.lines().count()
        );
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("o");
    let o = run(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let o = run(&["validate", path.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            stderr(&o)
        );
        count += 1;
    }
    assert!(count >= 8);
}
