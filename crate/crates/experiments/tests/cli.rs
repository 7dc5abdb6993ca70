use std::path::Path;
use std::process::{Command, Output};

use pline_experiments::svg::GROUP_COLORS;
use pline_experiments::{ingest_demo, ExperimentConfig};

/// Runs the binary inside `dir` with reports going to `dir/out`, so the
/// recorded `out_dir` is the same across temporary directories.
fn pline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pline"))
        .current_dir(dir)
        .args(args)
        .args(["--out", "out"])
        .output()
        .expect("pline runs")
}

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn example_configs_load() {
    let default = ExperimentConfig::load(Path::new(&config_path("default.toml"))).unwrap();
    assert_eq!(default, ExperimentConfig::default());
    let noisy = ExperimentConfig::load(Path::new(&config_path("noisy.toml"))).unwrap();
    assert_eq!(noisy.repeats, 10);
}

#[test]
fn skip_writes_identical_csv_and_svg_on_rerun() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = pline(dir.path(), &["skip", "--svg", "--method", "pl", "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["skip.csv", "skip_pl_t0.svg", "skip_pl_t1.svg"] {
        let first = std::fs::read(a.path().join("out").join(file)).unwrap();
        assert_eq!(first, std::fs::read(b.path().join("out").join(file)).unwrap(), "{file}");
    }
    let svg = std::fs::read_to_string(a.path().join("out/skip_pl_t1.svg")).unwrap();
    for (n, color) in GROUP_COLORS.iter().enumerate() {
        assert!(svg.contains(&format!(r#"<g id="n{n}" fill="{color}""#)), "group {n}");
    }
}

#[test]
fn sweep_and_pairs_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["sweep", "pairs"] {
        let out = pline(dir.path(), &[cmd, "--method", "pl"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(dir.path().join("out").join(format!("{cmd}.csv"))).unwrap();
        assert!(text.starts_with(&format!("# experiment: {cmd}")), "{}", &text[..40]);
    }
}

#[test]
fn ingest_demo_reproduces_in_memory_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let demo = ingest_demo(&ExperimentConfig::default(), dir.path()).unwrap();
    assert!(demo.identical);
    assert!(demo.corner_file.exists());

    let out = pline(dir.path(), &["calibrate", "--corners", demo.corner_file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("out/calibrate.csv")).unwrap(),
        demo.report.to_csv_bytes().unwrap()
    );
}

#[test]
fn short_pose_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let corners = dir.path().join("corners.csv");
    let mut text = String::from("pose_id,corner_row,corner_col,board_x,board_y,u,v\n");
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        text.push_str(&format!("good,{r},{c},{},{},{},{}\n", c * 10, r * 10, 100 + c * 20, 50 + r * 20));
    }
    for (r, c) in [(0, 0), (0, 1), (1, 0)] {
        text.push_str(&format!("short,{r},{c},{},{},{},{}\n", c * 10, r * 10, 101 + c * 20, 50 + r * 21));
    }
    std::fs::write(&corners, text).unwrap();
    let out = pline(dir.path(), &["calibrate", "--corners", corners.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("pose short"), "{stderr}");
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "focal = 1600.0\n").unwrap();
    let out = pline(dir.path(), &["sweep", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
}
