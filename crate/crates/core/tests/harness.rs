use std::fs;
use std::path::Path;
use std::process::Command;

use nozzleopt::harness::{
    flow_field_gallery, preset, run_experiment, ExperimentConfig, HarnessError, Sweep, PRESETS,
};
use nozzleopt::materials::GnfFluid;
use nozzleopt::mesh::MeshParams;
use nozzleopt::optimizer::ShapeSettings;
use nozzleopt::solver::{FlowGeometry, SolverConfig};

/// Newtonian, isothermal, coarse mesh and a short search: seconds per point.
fn cheap(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        name: "cheap".into(),
        output_dir: out.to_path_buf(),
        workers: 2,
        sweep: Sweep { feeding_rates: vec![2.0, 1.0], d_out: Vec::new() },
        fluid: GnfFluid::newtonian(1000.0),
        solver: Some(SolverConfig::isothermal(FlowGeometry::Axisymmetric)),
        mesh: MeshParams { h: 0.4, ..MeshParams::default() },
        optimizer: ShapeSettings { budget: 6, ..ShapeSettings::default() },
        ..ExperimentConfig::default()
    }
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn sweep_writes_consistent_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cheap(dir.path());
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.iter().map(|r| r.u_in).collect::<Vec<_>>(), vec![1.0, 2.0]);

    let table = csv(&dir.path().join("results.csv"));
    let header = &table[0];
    assert_eq!(table.len(), 3);
    assert!(table.iter().all(|r| r.len() == header.len()));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for (line, row) in table[1..].iter().zip(&rows) {
        assert_eq!(line[col("status")], "ok", "{line:?}");
        let base: f64 = line[col("dp_baseline")].parse().unwrap();
        let best: f64 = line[col("dp_opt")].parse().unwrap();
        let rel: f64 = line[col("rel_improvement")].parse().unwrap();
        assert_eq!(rel, 1.0 - best / base);
        assert!(best <= base && rel >= 0.0);
        assert_eq!(Some(best), row.dp_opt);
        assert!(row.mass_balance_error.unwrap() <= 5e-3);
        let key = format!("u{:.3}_d{:.3}", row.u_in, row.d_out);
        for f in [format!("fields/{key}_baseline.vtk"), format!("fields/{key}_opt.vtk"), format!("history/{key}.csv")] {
            assert!(dir.path().join(&f).is_file(), "{f}");
        }
    }
    // Laminar pressure loss grows with the feeding rate.
    assert!(rows[1].dp_baseline.unwrap() > rows[0].dp_baseline.unwrap());

    let saved = ExperimentConfig::from_toml_str(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(saved, cfg);
    let meta = fs::read_to_string(dir.path().join("run_metadata.toml")).unwrap();
    assert!(meta.parse::<toml::Table>().is_ok() && meta.contains("seed = 0"));

    // Replaying the checkpoints reproduces the rows.
    let again = run_experiment(&ExperimentConfig { resume: true, ..cfg }).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!((a.alpha_opt, a.dp_opt, a.n_evals), (b.alpha_opt, b.dp_opt, b.n_evals));
    }
}

#[test]
fn gallery_writes_one_row_per_angle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { sweep: Sweep { feeding_rates: vec![1.0], d_out: vec![0.4, 0.6] }, ..cheap(dir.path()) };
    let rows = flow_field_gallery(&cfg, &[30.0, 60.0]).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.report.as_ref().is_some_and(|r| r.feasible)));
    // The narrower outlet costs more pressure at either angle.
    assert!(rows[0].report.as_ref().unwrap().delta_p > rows[2].report.as_ref().unwrap().delta_p);
    let table = csv(&dir.path().join("gallery.csv"));
    assert_eq!(table.len(), 5);
    assert!(dir.path().join("gallery/u1.000_d0.400_a60.00.vtk").is_file());
    assert!(matches!(flow_field_gallery(&cfg, &[120.0]), Err(HarnessError::Validation(_))));
}

#[test]
fn validation_names_every_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = cheap(dir.path());
    cfg.sweep = Sweep { feeding_rates: vec![1.0, -2.0], d_out: vec![5.0] };
    cfg.workers = 0;
    let errs = cfg.validate().unwrap_err();
    for field in ["sweep.feeding_rates[1]", "sweep.d_out[0]", "workers"] {
        assert!(errs.iter().any(|e| e.starts_with(field)), "{field}: {errs:?}");
    }
    cfg.sweep.feeding_rates.clear();
    assert!(cfg.validate().unwrap_err().iter().any(|e| e.starts_with("sweep.feeding_rates")));
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Validation(_))));
    assert!(matches!(ExperimentConfig::from_toml_str("bogus_key = 1"), Err(HarnessError::Parse(_))));
}

#[test]
fn cli_prints_presets_and_rejects_bad_configs() {
    let exe = env!("CARGO_BIN_EXE_nozzleopt");
    for name in PRESETS {
        let out = Command::new(exe).args(["validate", "--preset", name]).output().unwrap();
        assert!(out.status.success());
        let cfg = ExperimentConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(Some(cfg), preset(name));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[sweep]\nfeeding_rates = [-1.0]\n").unwrap();
    let out = Command::new(exe).args(["validate", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("sweep.feeding_rates[0]"));
}
