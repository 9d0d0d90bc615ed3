use std::path::{Path, PathBuf};

use multifuse_core::pipeline::{compute, read_similarity_csv, run_pipeline, PipelineConfig};
use multifuse_core::sma::WeightsMode;
use multifuse_core::{Error, FusionMethod};

fn fixture_config(out: &Path) -> PipelineConfig {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/glaciers/config.json");
    let mut cfg = PipelineConfig::from_json_file(&path).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn fixture_run_has_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&fixture_config(dir.path())).unwrap();

    assert_eq!(report.layers.len(), 9);
    let f = &report.filter;
    assert_eq!(f.total, 20);
    assert_eq!(f.absent_everywhere, ["ASV17", "ASV18"]);
    assert_eq!(f.absent_in_some_layer.len(), 2);
    assert_eq!(
        f.retained.len(),
        f.total - f.absent_everywhere.len() - f.absent_in_some_layer.len()
    );
    assert_eq!(f.retained.len(), 16);

    let methods: Vec<FusionMethod> = report.methods.iter().map(|m| m.method).collect();
    assert_eq!(methods, FusionMethod::ALL.to_vec());
    assert!(report.methods.iter().all(|m| m.converged));
    assert_eq!(report.weights.len(), 2);
    assert_eq!(report.partitions.len(), 4);

    let t = &report.dcor_monoplex;
    assert_eq!(t.names.len(), 4);
    for i in 0..4 {
        assert!((t.values[i][i] - 1.0).abs() < 1e-12);
        for j in 0..4 {
            assert_eq!(t.values[i][j], t.values[j][i]);
            assert!((0.0..=1.0).contains(&t.values[i][j]));
        }
    }
    let snf_layers = report.dcor_snf_layers.as_ref().unwrap();
    assert_eq!(snf_layers.len(), 9);
    assert!(snf_layers.iter().all(|c| (0.0..=1.0).contains(&c.dcor)));

    for m in FusionMethod::ALL {
        let s = read_similarity_csv(&dir.path().join(format!("{m}.matrix.csv"))).unwrap();
        assert_eq!(s.n(), 16);
    }
}

#[test]
fn fixture_run_matches_frozen_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&fixture_config(dir.path())).unwrap();
    // Values recorded from the first validated run of this fixture.
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    assert!(close(report.weights[0].weights[0], 0.110650941072833));
    assert!(close(report.weights[1].weights[0], 0.11058119372133496));
    assert!(close(report.dcor_monoplex.values[1][3], 0.9989643171079287));
    assert!(close(report.dcor_monoplex.values[0][2], 0.9130831543566158));
    assert!(close(
        report.dcor_snf_layers.as_ref().unwrap()[6].dcor,
        0.8950344033000621
    ));
    let planted: Vec<usize> = (0..16).map(|i| i % 3).collect();
    for p in &report.partitions[1..] {
        assert_eq!(p.community, planted);
    }
    // The diffused SNF monoplex is nearly flat, so it clusters as one block.
    assert_eq!(report.partitions[0].communities, 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&fixture_config(a.path())).unwrap();
    run_pipeline(&fixture_config(b.path())).unwrap();
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert_eq!(fa.len(), 21);
    assert_eq!(fa, fb);
}

#[test]
fn uniform_weights_are_one_over_m() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path());
    cfg.weights = Some(WeightsMode::Uniform);
    let out = compute(&cfg).unwrap();
    for table in &out.report.weights {
        assert!(table.weights.iter().all(|&w| w == 1.0 / 9.0));
    }
    for m in out
        .report
        .methods
        .iter()
        .filter(|m| m.method != FusionMethod::Snf)
    {
        assert!(m.weights.as_ref().unwrap().iter().all(|&w| w == 1.0 / 9.0));
    }
}

#[test]
fn strict_mode_names_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path());
    cfg.snf.max_iter = 2;
    cfg.strict = true;
    let err = compute(&cfg).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(stage, "snf"),
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.is_numerical());
    assert!(matches!(err.root(), Error::NotConverged { .. }));

    cfg.strict = false;
    let out = compute(&cfg).unwrap();
    assert!(!out.report.methods[0].converged);
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path());
    cfg.inputs.truncate(1);
    assert!(matches!(compute(&cfg), Err(Error::InvalidInput(_))));

    let mut cfg = fixture_config(dir.path());
    cfg.inputs.push(dir.path().join("missing.csv"));
    assert!(matches!(compute(&cfg), Err(Error::InvalidInput(_))));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "asv,s1\nA,-1\n").unwrap();
    let mut cfg = fixture_config(dir.path());
    cfg.inputs[0] = bad;
    let err = compute(&cfg).unwrap_err();
    assert!(matches!(err.root(), Error::Parse { line: 2, .. }), "{err}");
}
