use std::path::Path;
use std::process::{Command, Output};

fn alhier(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alhier")).args(args).arg("--out").arg(out).output().expect("spawn alhier")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn factorization_suite_passes_by_default() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["lattice", "verify", "--suite", "factorization"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&d.path().join("lattice_verify.json"));
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["check_name"].as_str().unwrap()).collect();
    assert!(names.contains(&"lattice.factorization"));
    assert!(names.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn evolve_writes_one_row_per_site_and_step() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["lattice", "evolve", "--boundary", "periodic", "--n", "64", "--dt", "1e-3", "--t", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.path().join("lattice_trajectory.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["time", "site", "re_x", "im_x", "re_y", "im_y"]);
    assert_eq!(r.records().count(), 64 * 1001);
    let side = json(&d.path().join("lattice_conservation.json"));
    assert_eq!(side["steps"], 1000);
    let h = side["hamiltonians"].as_array().unwrap();
    assert_eq!(h.len(), 8);
    assert!(h.iter().all(|e| e["relative_drift"].as_f64().unwrap() < 1e-8));
}

#[test]
fn malformed_config_exits_2_with_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"seed\": 1,\n  \"lattice\": {\"dt\": oops}\n}\n").unwrap();
    let o = alhier(d.path(), &["--config", cfg.to_str().unwrap(), "lattice", "evolve"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn bad_values_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(alhier(d.path(), &["lattice", "verify", "--suite", "toda"]).status.code(), Some(2));
    assert_eq!(alhier(d.path(), &["lattice", "evolve", "--flow", "ham:3:1"]).status.code(), Some(2));
    assert_eq!(alhier(d.path(), &["lattice", "evolve", "--dt", "-1"]).status.code(), Some(2));
    let cfg = d.path().join("tol.json");
    std::fs::write(&cfg, r#"{"tolerances": {"lattice.factorization": 0}}"#).unwrap();
    assert_eq!(alhier(d.path(), &["--config", cfg.to_str().unwrap(), "lattice", "verify"]).status.code(), Some(2));
}

#[test]
fn flags_override_config_and_tolerances_apply() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 11, "lattice": {"suite": "flows"}, "tolerances": {"lattice.factorization": 1e-30}}"#).unwrap();
    let o = alhier(d.path(), &["--config", cfg.to_str().unwrap(), "--seed", "5", "lattice", "verify", "--suite", "factorization"]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&d.path().join("lattice_verify.json"));
    assert_eq!(r["seed"], 5);
    let f = r["checks"].as_array().unwrap().iter().find(|c| c["check_name"] == "lattice.factorization").unwrap();
    assert_eq!(f["tolerance"], 1e-30);
    assert_eq!(f["pass"], false);
}

#[test]
fn print_defaults_is_a_valid_config() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_alhier")).arg("--print-defaults").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let cfg = d.path().join("defaults.json");
    std::fs::write(&cfg, &o.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lattice"]["n"], 64);
    let o = alhier(d.path(), &["--config", cfg.to_str().unwrap(), "lattice", "verify", "--suite", "semi_infinite"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn constant_hydro_field_does_not_move() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["hydro", "evolve", "--v-amp", "0", "--w-amp", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let side = json(&d.path().join("hydro_evolve.json"));
    assert_eq!(side["max_change"], 0.0);
    let mut r = csv::Reader::from_path(d.path().join("hydro_field.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["x", "re_v", "im_v", "re_w", "im_w"]);
    assert_eq!(r.records().count(), 256);
}

#[test]
fn gradient_catastrophe_exits_3_with_partial_output() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["hydro", "evolve", "--length", "0.32", "--v-amp", "0.8", "--w-amp", "0.5", "--grid", "64", "--t", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let mut r = csv::Reader::from_path(d.path().join("hydro_field.csv")).unwrap();
    assert_eq!(r.records().count(), 64);
    let side = json(&d.path().join("hydro_evolve.json"));
    assert!(side["error"].as_str().unwrap().contains("gradient catastrophe"));
}

#[test]
fn compare_reports_order() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["hydro", "compare", "--eps", "0.1,0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&d.path().join("hydro_compare.json"));
    let e = v.as_array().unwrap();
    assert_eq!(e.len(), 2);
    assert!(e[0]["order_estimate"].is_null());
    assert!(e[1]["order_estimate"].as_f64().unwrap() >= 0.7);
    assert!(e[1]["sup_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_mirror_records_elliptic_convention() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["verify", "mirror", "--points", "20"]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let v = json(&d.path().join("verify_mirror.json"));
    let rec = &v["suites"][0]["records"];
    assert!(rec["elliptic_convention"].is_string());
    assert!(rec["kappa"].is_string());
    assert_eq!(v["pass"], o.status.code() == Some(0));
}

#[test]
fn verify_frobenius_200_points_is_quick() {
    let d = tempfile::tempdir().unwrap();
    let t = std::time::Instant::now();
    let o = alhier(d.path(), &["verify", "frobenius", "--points", "200"]);
    assert!(t.elapsed().as_secs() < 60);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let v = json(&d.path().join("verify_frobenius.json"));
    let eta = v["suites"][0]["checks"].as_array().unwrap().iter().find(|c| c["check_name"] == "frobenius.eta_antidiagonal").unwrap().clone();
    assert_eq!(eta["points_tested"], 200);
    assert_eq!(eta["pass"], true);
}

#[test]
fn periods_table_has_both_routes_inside_the_strip() {
    let d = tempfile::tempdir().unwrap();
    let o = alhier(d.path(), &["periods", "--z", "-0.5,0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.path().join("periods.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["z", "v", "w", "p1_re", "p1_im", "p2_re", "p2_im", "route", "abs_route_gap"]);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.iter().filter(|r| &r[0] == "-0.5").count(), 10);
    assert_eq!(rows.iter().filter(|r| &r[0] == "0.5").count(), 5);
    for row in rows.iter().filter(|r| &r[0] == "-0.5") {
        assert!(row[8].parse::<f64>().unwrap() < 1e-6);
    }
    assert!(rows.iter().filter(|r| &r[0] == "0.5").all(|r| r[8].is_empty() && &r[7] == "closed_form"));
}
