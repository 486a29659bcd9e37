use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use foodsys::model::DimensionlessParams;
use foodsys::stability::{fixed_points, FixedPointKind};

fn foodsys(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foodsys"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = foodsys(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

/// Data rows of a CSV artifact, metadata comments and header removed.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn groups(kappa: f64, alpha: f64) -> DimensionlessParams {
    DimensionlessParams { alpha, beta: 0.5, delta: 5.0, omega: 10.0, gamma: 26.0, kappa, mu: 1.0, rho: 1.0 }
}

fn write_groups(path: &Path, p: &DimensionlessParams, start: Option<[f64; 4]>) {
    let mut v = serde_json::to_value(p).unwrap();
    if let Some(s) = start {
        for (k, x) in ["v0", "x0", "y0", "z0"].iter().zip(s) {
            v[*k] = x.into();
        }
    }
    fs::write(path, v.to_string()).unwrap();
}

#[test]
fn simulate_from_fixed_point_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let p = groups(0.3, 2.0);
    let fp = fixed_points(&p)
        .unwrap()
        .into_iter()
        .find(|f| f.kind == FixedPointKind::SustainableDomestic && f.exists)
        .unwrap();
    let params = dir.path().join("p.json");
    write_groups(&params, &p, Some(fp.state));
    ok(dir.path(), &["simulate", "--params", params.to_str().unwrap(), "--horizon", "50"]);
    let traj = rows(&dir.path().join("trajectory_dimensionless.csv"));
    assert_eq!(traj.len(), 51);
    for r in &traj {
        for i in 0..4 {
            assert!((r[i + 1] - fp.state[i]).abs() < 1e-7 * fp.state[i].max(1.0), "{r:?}");
        }
    }
}

#[test]
fn unsustainable_cell_loses_its_capital() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    // critical ratio 0.5 * 23 / (0.9 * 26 * 1.5) = 0.33
    write_groups(&params, &groups(0.9, 0.5), None);
    ok(dir.path(), &["simulate", "--params", params.to_str().unwrap(), "--horizon", "200", "--obs-step", "10"]);
    let traj = rows(&dir.path().join("trajectory_dimensionless.csv"));
    assert!(traj.last().unwrap()[1] < 1e-6, "{:?}", traj.last());
}

#[test]
fn dimensional_simulation_writes_both_frames() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(
        &params,
        r#"{"a":0.0086,"b":138.3,"e":0.0002,"f":2.2712,"g":82.4,"w":0.2392,"s":0.6703,"k":0.3602,
            "h":219478906,"m":0.0937,"q":132.0101,"r":0.1514,"C0":420000,"I0":1.3e8,"D0":2e8,"P0":135}"#,
    )
    .unwrap();
    ok(dir.path(), &["simulate", "--params", params.to_str().unwrap(), "--horizon", "24"]);
    let dim = rows(&dir.path().join("trajectory_dimensional.csv"));
    let nd = rows(&dir.path().join("trajectory_dimensionless.csv"));
    assert_eq!(dim.len(), 25);
    assert_eq!(nd.len(), 25);
    assert_eq!(dim[0][1], 420000.0);
    assert_eq!(nd[0][1], 1.0);
    assert!((nd[24][0] - 24.0 * 0.0086).abs() < 1e-12);
}

#[test]
fn invalid_params_fail_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"alpha":1,"beta":-0.5,"delta":5,"omega":10,"gamma":26,"kappa":0.3,"mu":1,"rho":1}"#).unwrap();
    let o = foodsys(dir.path(), &["stability", "--params", params.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
    assert!(!dir.path().join("stability.json").exists());
}

#[test]
fn stability_report_for_posterior_means() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(
        &params,
        r#"{"a":0.0086,"b":138.3,"e":0.0002,"f":2.2712,"g":82.4,"w":0.2392,"s":0.6703,"k":0.3602,
            "h":219478906,"m":0.0937,"q":132.0101,"r":0.1514}"#,
    )
    .unwrap();
    ok(dir.path(), &["--format", "json", "stability", "--params", params.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("stability.json")).unwrap()).unwrap();
    assert!((v["critical_ratio"].as_f64().unwrap() - 1.71).abs() < 0.02);
    assert!((v["critical_kappa"]["kappa"].as_f64().unwrap() - 0.616).abs() < 0.01);
    assert_eq!(v["regime"]["kind"], "sustainable_net_importer");
    assert_eq!(v["metadata"]["command"], "stability");
    let stable: Vec<&serde_json::Value> =
        v["fixed_points"].as_array().unwrap().iter().filter(|f| f["verdict"] == "Stable").collect();
    assert_eq!(stable.len(), 1);
    assert_eq!(stable[0]["fixed_point"]["kind"], "SustainableDomestic");
    assert!(stable[0]["return_time_months"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("eigenvalues.json").exists());
}

#[test]
fn regime_map_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"kappa_steps":4,"alpha_steps":5,"betas":[0.3]}"#).unwrap();
    ok(dir.path(), &["regime-map", "--config", grid.to_str().unwrap()]);
    let text = fs::read_to_string(dir.path().join("regime_map.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "kappa,alpha,beta,critical_ratio,surplus_ratio,regime,simulated_agreement");
    assert_eq!(data.len(), 21);
    assert!(text.contains("# input grid: sha256 "));

    fs::write(&grid, r#"{"kappa_steps":4,"bogus":1}"#).unwrap();
    assert!(!foodsys(dir.path(), &["regime-map", "--config", grid.to_str().unwrap()]).status.success());
}

#[test]
fn sensitivity_defaults_cover_all_parameters() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sensitivity"]);
    let text = fs::read_to_string(dir.path().join("sensitivity.csv")).unwrap();
    let n = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(n, 1 + 7 * 31);
    assert!(text.contains("\nq,1,1.628"));
    assert!(!foodsys(dir.path(), &["sensitivity", "--parameter", "z"]).status.success());
}

#[test]
fn validate_data_reports_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["validate-data", "--bundled-uk"]);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["months"], 60);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "month,breeding_herd,production_kg,imports_kg,exports_kg,price_p_per_kg\n2016-01,1,x,1,1,1\n")
        .unwrap();
    let o = foodsys(dir.path(), &["validate-data", "--data", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("production_kg"), "{err}");
}

#[test]
fn fit_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let fit_args =
        ["--seed", "4", "fit", "--bundled-uk", "--chains", "2", "--warmup", "150", "--draws", "30", "--steps-per-draw", "2"];
    ok(dir.path(), &fit_args);
    for f in ["chains.csv", "summary.json", "derived_draws.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metadata"]["seed"], 4);
    assert_eq!(summary["derived"][0]["name"], "critical_ratio");

    let chains = dir.path().join("chains.csv");
    ok(dir.path(), &["predict", "--chains", chains.to_str().unwrap(), "--bundled-uk", "--draws", "20"]);
    let bands = fs::read_to_string(dir.path().join("predictive_bands.csv")).unwrap();
    assert!(bands.lines().any(|l| l == "series,month_index,month,observed,lower,median,upper"));
    assert!(bands.contains("\nprice,0,2015-01,"));
}

#[test]
fn both_data_sources_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = foodsys(dir.path(), &["validate-data", "--bundled-uk", "--data", "x.csv"]);
    assert!(!o.status.success());
}
