use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn multifuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multifuse"))
        .args(args)
        .output()
        .unwrap()
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/glaciers")
}

fn fixture_inputs() -> Vec<String> {
    [
        "cedec",
        "exploradores",
        "forni",
        "iver",
        "iver_est",
        "el_morado",
        "morteratsch",
        "perito_moreno",
        "zebru",
    ]
    .iter()
    .map(|n| {
        fixture_dir()
            .join(format!("{n}.csv"))
            .to_string_lossy()
            .into_owned()
    })
    .collect()
}

fn write_pair(dir: &Path, name: &str, w: f64) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("node,a,b\na,1,{w}\nb,{w},1\n")).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let inputs: Vec<String> = fixture_inputs().iter().map(|p| format!("{p:?}")).collect();
    std::fs::write(
        &config,
        format!(
            "{{\"inputs\": [{}], \"output_dir\": \"out\"}}",
            inputs.join(", ")
        ),
    )
    .unwrap();
    let out = multifuse(&["run", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out_dir = dir.path().join("out");
    for name in [
        "report.json",
        "weights.csv",
        "dcor_monoplex.csv",
        "dcor_snf_layers.csv",
        "sma-r.graphml",
    ] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn fuse_single_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["fuse", "--method", "sma-w", "--weights", "uniform", "--out"];
    let out_dir = dir.path().to_string_lossy().into_owned();
    args.push(&out_dir);
    args.push("--inputs");
    let inputs = fixture_inputs();
    args.extend(inputs.iter().map(String::as_str));
    let out = multifuse(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let weights = std::fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    assert!(weights
        .lines()
        .skip(1)
        .all(|l| l.ends_with(&format!(",{}", 1.0 / 9.0))));
    assert!(dir.path().join("sma-w.matrix.csv").is_file());
    assert!(!dir.path().join("snf.matrix.csv").exists());
}

#[test]
fn strict_non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let inputs = fixture_inputs();
    let mut args = vec![
        "fuse",
        "--method",
        "snf",
        "--max-iter",
        "1",
        "--strict",
        "--out",
        &out_dir,
        "--inputs",
    ];
    args.extend(inputs.iter().map(String::as_str));
    let out = multifuse(&args);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn dcor_of_identical_matrices_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "node,a,b,c\na,1,0.9,0.1\nb,0.9,1,0.2\nc,0.1,0.2,1\n").unwrap();
    let p = path.to_str().unwrap();
    let out = multifuse(&["dcor", p, p]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1");
}

#[test]
fn cluster_prints_partition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut text = String::from("node,v0,v1,v2,v3,v4,v5,v6,v7\n");
    for i in 0..8 {
        text.push_str(&format!("v{i}"));
        for j in 0..8 {
            text.push_str(if i == j || (i < 4) == (j < 4) {
                ",1"
            } else {
                ",0"
            });
        }
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let out = multifuse(&["cluster", path.to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let communities: Vec<&str> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(communities, ["0", "0", "0", "0", "1", "1", "1", "1"]);
}

#[test]
fn export_edge_list_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_pair(dir.path(), "pair.csv", 0.4);
    let out = multifuse(&["export", &p, "--format", "edge-list"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "source,target,weight\na,b,0.4\n"
    );
    let out = multifuse(&["export", &p, "--format", "edge-list", "--threshold", "0.5"]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "source,target,weight\n"
    );
}

#[test]
fn parse_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "node,a,b\na,1,x\nb,0.4,1\n").unwrap();
    let out = multifuse(&["export", bad.to_str().unwrap(), "--format", "graphml"]);
    assert_eq!(out.status.code(), Some(2));

    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        "{\"inputs\": [], \"output_dir\": \"o\", \"typo\": 1}",
    )
    .unwrap();
    let out = multifuse(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = multifuse(&[
        "fuse", "--method", "nope", "--inputs", "a", "b", "--out", "o",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
