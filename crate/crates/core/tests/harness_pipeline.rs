use std::fs;
use std::path::Path;
use std::process::Command;

use dnls_lab::grid::{load_snapshot, save_snapshot};
use dnls_lab::harness::config::gaussian_initial;
use dnls_lab::harness::{run_experiment, ExperimentConfig, Manifest, Overrides};
use dnls_lab::GridSpec;

const SMALL: &str = "half_width = 128.0\nn = 2048\nt_end = 6.0\nsnapshot_every = 0.5\nfit_t_min = 1.0\n";

fn small(kind: &str, out: &Path) -> ExperimentConfig {
    let text = format!("kind = \"{kind}\"\n{SMALL}");
    let o = Overrides {
        output_dir: Some(out.to_path_buf()),
        ..Default::default()
    };
    ExperimentConfig::from_toml_str(&text, &o).unwrap()
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn every_listed_file_exists_and_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&small("decay_scan", dir.path())).unwrap();
    assert!(m.errors.is_empty(), "{:?}", m.errors);
    for f in &m.files {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(m.files.last().map(String::as_str), Some("manifest.json"));
    assert_eq!(read_manifest(dir.path()), m);

    let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["time", "mass", "momentum", "energy", "linf_u", "linf_ux", "lu_l2"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    // snapshots at 0, 0.5, …, 6
    assert_eq!(csv.lines().count(), 1 + 13);

    let back = ExperimentConfig::load(dir.path().join("config.toml"), &Overrides::default()).unwrap();
    assert_eq!(back.hash(), m.config_hash);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small("packet_test", a.path());
    ca.seed = 4;
    ca.initial_data = dnls_lab::harness::InitialData::Gaussian {
        epsilon: 0.05,
        width: 1.0,
        noise: 0.3,
    };
    let mut cb = ca.clone();
    cb.output_dir = b.path().to_path_buf();
    let ma = run_experiment(&ca).unwrap();
    let mb = run_experiment(&cb).unwrap();
    assert_eq!(ma.files, mb.files);
    for f in ma.files.iter().filter(|f| f.ends_with(".csv") || f.ends_with(".snap")) {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn linear_baseline_decays_at_half_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("linear_baseline", dir.path());
    cfg.t_end = 30.0;
    cfg.fit_t_min = 5.0;
    let m = run_experiment(&cfg).unwrap();
    let e = m.fit("linf_u").unwrap().exponent;
    assert!((e + 0.5).abs() < 0.02, "{e}");
}

#[test]
fn custom_initial_data_from_snapshot_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(128.0, 2048).unwrap();
    let u0 = gaussian_initial(g, 0.04, 1.5, 0.0, 0).unwrap();
    let snap = dir.path().join("u0.snap");
    save_snapshot(&u0, &snap).unwrap();
    assert_eq!(load_snapshot(&snap).unwrap(), u0);

    let text = format!(
        "kind = \"simulate\"\n{SMALL}initial = \"custom\"\nsnapshot_file = {:?}\nepsilon = 0.05\n",
        snap.display().to_string()
    );
    let o = Overrides {
        output_dir: Some(dir.path().join("run")),
        ..Default::default()
    };
    let m = run_experiment(&ExperimentConfig::from_toml_str(&text, &o).unwrap()).unwrap();
    assert!(m.passed, "{m:?}");
    assert!(m.hypothesis[0].check.pass);
}

#[test]
fn cli_runs_and_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_dnls-lab");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(exe)
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--epsilon",
            "0.04",
            "--seed",
            "2",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let m = read_manifest(&out);
    assert_eq!((m.config.epsilon, m.config.seed), (0.04, 2));

    fs::write(&cfg, "colour = \"red\"\n").unwrap();
    let status = Command::new(exe)
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = Command::new(exe)
        .args(["simulate", "--epsilon", "0.9"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
