use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use platemem::cli::{parse_config, reemit_csv, FIELD_HEADER, SUMMARY_HEADER, TRACE_HEADER};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platemem")).current_dir(dir).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

const SMALL: &str = "m = 1\nrho = 1\nn_plate = 8\nn_mem = 8\nmode_max = 2\nt_end = 0.05\nprofiles = plate_bump, rough\nseed = 11\n";

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = write_config(dir, SMALL);
        for args in [vec!["simulate", &cfg], vec!["spectrum", &cfg], vec!["render", &cfg, "--t", "0.02"]] {
            let out = run(dir, &args);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let files = [
        "platemem_out/plate_bump/trace_mode0.csv",
        "platemem_out/rough_11/trace_mode2.csv",
        "platemem_out/spectrum_mode1.csv",
        "platemem_out/spectrum_summary.csv",
        "platemem_out/field_theta.csv",
    ];
    for f in files {
        let (x, y) = (read(a.path().join(f)), read(b.path().join(f)));
        assert_eq!(x, y, "{f}");
        assert_eq!(reemit_csv(&x).unwrap(), x, "{f} does not round-trip");
    }
    assert!(read(a.path().join(files[0])).starts_with(&format!("{TRACE_HEADER}\n")));
    assert!(read(a.path().join(files[3])).starts_with(&format!("{SUMMARY_HEADER}\n")));
}

#[test]
fn trace_rows_carry_thirteen_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_plate = 8\nn_mem = 8\nmode_max = 0\nt_end = 0.01\ndt = 0.001\n");
    assert!(run(dir.path(), &["simulate", &cfg]).status.success());
    let text = read(dir.path().join("platemem_out/trace_mode0.csv"));
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.split(',').count() == 13));
}

#[test]
fn parse_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m = 1\n# comment\nrho = fast\n");
    let out = run(dir.path(), &["spectrum", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column 7"), "{err}");

    let cfg = write_config(dir.path(), "m = 1\nwobble = 2\n");
    let err = String::from_utf8_lossy(&run(dir.path(), &["spectrum", &cfg]).stderr).to_string();
    assert!(err.contains("line 2") && err.contains("wobble"), "{err}");
}

#[test]
fn canned_configs_honor_the_exit_contract() {
    let dir = tempfile::tempdir().unwrap();
    let code = |name: &str| run(dir.path(), &["regimes", data(name).to_str().unwrap()]).status.code();
    assert_eq!(code("consistent.cfg"), Some(0));
    assert_eq!(code("inconsistent_synthetic.cfg"), Some(2));
    assert_eq!(code("invalid.cfg"), Some(1));
    let report = read(dir.path().join("platemem_out/regime_report.txt"));
    assert!(report.contains("verdict: inconsistent"), "{report}");
}

#[test]
fn invalid_parameters_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", data("invalid.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta1"));
    assert!(!dir.path().join("platemem_out").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["scan", "x.cfg", "--lmin", "0"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["spectrum", "missing.cfg"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_plate = 8\nn_mem = 8\nmode_max = 1\n");
    let go = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_platemem"))
            .current_dir(dir.path())
            .env("PLATEMEM_THREADS", threads)
            .args(["spectrum", &cfg])
            .output()
            .unwrap()
    };
    assert_eq!(go("zero").status.code(), Some(1));
    let one = go("1");
    let summary_one = read(dir.path().join("platemem_out/spectrum_summary.csv"));
    let two = go("2");
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(summary_one, read(dir.path().join("platemem_out/spectrum_summary.csv")));
}

#[test]
fn check_geometry_reports_the_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "x0_x = 0\nx0_y = 0\n");
    let out = run(dir.path(), &["check-geometry", &cfg]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "satisfied, max q·nu = -1\n");
    let cfg = write_config(dir.path(), "x0_x = 2\n");
    let out = run(dir.path(), &["check-geometry", &cfg]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("violated, max q·nu = 1"));
}

#[test]
fn scan_writes_norms_and_prints_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_plate = 8\nn_mem = 8\nmode_max = 1\n");
    let out = run(dir.path(), &["scan", &cfg, "--lmin", "1", "--lmax", "16", "--n", "31"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("growth_exponent = "));
    let text = read(dir.path().join("platemem_out/resolvent_mode1.csv"));
    assert!(text.starts_with("lambda,norm\n"));
    // Uniform samples plus eigenvalue ordinates in range.
    assert!(text.lines().count() > 32);
}

#[test]
fn render_separates_plate_and_membrane_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_plate = 8\nn_mem = 8\nmode_max = 1\nprofiles = membrane_bump\n");
    let out = run(dir.path(), &["render", &cfg, "--t", "0", "--n-angles", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parse = |name: &str| -> Vec<[f64; 3]> {
        let text = read(dir.path().join(format!("platemem_out/field_{name}.csv")));
        assert!(text.starts_with(FIELD_HEADER));
        text.lines()
            .skip(1)
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect()
    };
    let (u, v) = (parse("u"), parse("v"));
    assert_eq!(u.len(), 4 * (8 + 8));
    for (pu, pv) in u.iter().zip(&v) {
        let r = pu[0].hypot(pu[1]);
        if r < 1.0 {
            assert_eq!(pu[2], 0.0);
        } else {
            assert_eq!(pv[2], 0.0);
        }
    }
    assert!(v.iter().any(|p| p[2].abs() > 1e-3));
}

#[test]
fn config_defaults() {
    let c = parse_config("").unwrap();
    assert_eq!((c.n_plate, c.n_mem, c.mode_min, c.mode_max), (64, 64, 0, 4));
    assert_eq!(c.output_dir, PathBuf::from("platemem_out"));
    assert!(c.dt.is_none() && c.t_end.is_none());
}

#[test]
#[ignore = "about a minute on one core at the default resolution"]
fn regimes_on_default_resolution_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m = 1\nrho = 1\n");
    assert_eq!(run(dir.path(), &["regimes", &cfg]).status.code(), Some(0));
}
