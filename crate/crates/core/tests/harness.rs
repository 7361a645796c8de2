use mpsddg::harness::{
    error_table, experiment_by_name, export_field, observed_order, quadcheck, read_csv_samples, run_experiment,
    ExperimentConfig, ExperimentRegistry, ExportFormat,
};
use mpsddg::mesh::{generate_structured, Pattern, Rect};
use mpsddg::poly2::DgField;
use mpsddg::quadrature::triangle_rule;

fn small_heat(dir: Option<std::path::PathBuf>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        problem: "heat".into(),
        epsilon: Some(1.0),
        levels: 2,
        final_time: Some(2e-5),
        output_dir: dir,
        ..ExperimentConfig::default()
    };
    cfg.mesh.nx = 4;
    cfg
}

#[test]
fn observed_order_matches_table_row() {
    let o = observed_order(&[Some(1.94e-4), Some(2.60e-5)], &[0.0586, 0.0293]);
    assert_eq!(o[0], None);
    let v = o[1].unwrap();
    assert!((v - 2.90).abs() < 5e-3, "{v}");
}

#[test]
fn config_round_trips_through_toml() {
    let exp = experiment_by_name("porous").unwrap();
    let cfg = exp.base_config();
    let text = cfg.to_toml().unwrap();
    let back = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, back);
    assert!(ExperimentConfig::from_toml("levels = 0").is_err());
    assert!(ExperimentConfig::from_toml("final_time = -1.0").is_err());
    assert!(ExperimentConfig::from_toml("no_such_key = 1").is_err());
}

#[test]
fn registry_lists_all_experiments() {
    let r = ExperimentRegistry::default();
    assert_eq!(r.names(), vec!["accuracy", "porous", "sdp", "ns-accuracy", "ns-vortex"]);
    for name in r.names() {
        let e = r.get(name).unwrap();
        assert!(e.base_config().validate().is_ok());
        assert!(!e.presets(&e.base_config()).is_empty());
    }
    assert!(r.get("nope").is_err());
}

#[test]
fn runs_are_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small_heat(Some(a.path().to_path_buf()));
    ca.export_fields = true;
    let mut cb = ca.clone();
    cb.output_dir = Some(b.path().to_path_buf());
    run_experiment(&ca, "run").unwrap();
    run_experiment(&cb, "run").unwrap();
    for f in ["table.csv", "snapshots.csv", "level1/field_level1.csv", "level1/field_level1.vtk"] {
        let x = std::fs::read(a.path().join("run").join(f)).unwrap();
        let y = std::fs::read(b.path().join("run").join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
    let meta = std::fs::read_to_string(a.path().join("run/metadata.txt")).unwrap();
    assert!(meta.contains("linf error"));
    let echoed = std::fs::read_to_string(a.path().join("run/config.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&echoed).unwrap(), ca);
}

#[test]
fn limited_heat_run_has_zero_violation_and_blank_first_order() {
    let report = run_experiment(&small_heat(None), "run").unwrap();
    let table = error_table(&report.levels);
    assert_eq!(table.len(), 2);
    assert!(table[0].l2_order.is_none());
    assert!(table[1].l2_order.is_some());
    for row in &table {
        assert!(row.l2_error.unwrap() > 0.0);
        assert!(row.u_min_minus_bound.abs() <= 1e-12);
        assert!(row.u_max_minus_bound.abs() <= 1e-12);
    }
    for l in &report.levels {
        assert!(l.periodic);
        assert!(l.mass_drift() <= 1e-14 * l.mass_scale);
    }
}

#[test]
fn csv_export_round_trips() {
    let mesh = generate_structured(3, 3, Rect::UNIT, Pattern::Obtuse, true).unwrap();
    let f = DgField::project(&mesh, |p| (3.0 * p.x).sin() * p.y, &triangle_rule(5).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    export_field(&f, &mesh, &path, ExportFormat::Csv).unwrap();
    let samples = read_csv_samples(&path).unwrap();
    assert_eq!(samples.len(), 6 * mesh.num_cells());
    for (i, (x, y, v)) in samples.iter().enumerate() {
        let cell = i / 6;
        let p = mpsddg::Point2::new(*x, *y);
        let direct = f.polys[cell].evaluate(&mesh.frames[cell], p);
        assert!((direct - v).abs() < 1e-12);
    }
}

#[test]
fn constant_field_exports_equal_samples() {
    let mesh = generate_structured(2, 2, Rect::UNIT, Pattern::Uniform, false).unwrap();
    let f = DgField::constant(mesh.num_cells(), 0.25);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    export_field(&f, &mesh, &path, ExportFormat::Csv).unwrap();
    assert!(read_csv_samples(&path).unwrap().iter().all(|s| s.2 == 0.25));
    let vtk = dir.path().join("c.vtk");
    export_field(&f, &mesh, &vtk, ExportFormat::VtkLegacy).unwrap();
    let text = std::fs::read_to_string(vtk).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0"));
    assert!(text.contains(&format!("CELLS {} {}", mesh.num_cells(), 4 * mesh.num_cells())));
}

#[test]
fn quadrature_suite_passes() {
    for line in quadcheck(3).unwrap() {
        assert!(line.passed, "{}: {}", line.name, line.detail);
    }
}

#[test]
fn unlimited_run_can_stop_at_first_violation() {
    let exp = experiment_by_name("ns-vortex").unwrap();
    let mut cfg = exp.base_config();
    cfg.levels = 1;
    cfg.limiter = false;
    cfg.stop_on_violation = true;
    cfg.record_times = vec![0.01];
    let r = run_experiment(&cfg, "off").unwrap();
    let l = &r.levels[0];
    assert!(l.stopped_early);
    assert!(l.last.time < 0.1);
    assert!(l.last.min_violation < 0.0);
}
