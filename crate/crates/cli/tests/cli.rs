use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[model.hot]
beta = 0.2
half_bandwidth = 1.0
spacing = 0.1
coupling = 0.4

[model.cold]
beta = 1.5
half_bandwidth = 1.0
spacing = 0.1
coupling = 0.4

[numerics]
dt = 0.1
cycles = 3

[regime.eps1]
start = -2.0
stop = 2.0
points = 5

[regime.eps2]
start = -2.0
stop = 2.0
points = 4
"#;

fn qotto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qotto")).args(args).output().expect("spawn qotto")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_into(cfg: &str, out: &Path) -> Output {
    qotto(&["run", "-c", cfg, "-o", out.to_str().unwrap()])
}

#[test]
fn run_writes_ledger_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = run_into(&cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(out.join("cycles.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..11], ["m", "W", "Qh", "Qc", "A", "F", "F0", "eta", "eta0", "dS", "Sigma"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let f: f64 = r[5].parse().unwrap();
        assert!(f.abs() < 1e-10, "first-law residual {f}");
    }

    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(samples.starts_with("t,eps,lambda_h,lambda_c,n_d,E_hot,E_cold,E_SI"));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["dim"], 41);
    assert_eq!(summary["cycles"], 3);
}

#[test]
fn identical_configs_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_into(&cfg, &a).status.success());
    assert!(run_into(&cfg, &b).status.success());
    for f in ["cycles.csv", "samples.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn checkpoints_are_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[output]\ncheckpoints = true\nsamples = false\n");
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("out");
    assert!(run_into(&cfg, &out).status.success());
    assert!(!out.join("samples.csv").exists());
    let n = fs::read_dir(out.join("checkpoints")).unwrap().count();
    // four boundaries per cycle plus the final state
    assert_eq!(n, 3 * 4 + 1);
}

#[test]
fn bad_config_exits_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[model]\nbogus = 1\n");
    let o = run_into(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let neg = SMALL.replace("dt = 0.1", "dt = -0.1");
    let cfg = write_config(tmp.path(), "neg.toml", &neg);
    assert_eq!(run_into(&cfg, &tmp.path().join("out")).status.code(), Some(2));

    let missing = tmp.path().join("nope.toml");
    let o = run_into(missing.to_str().unwrap(), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("dt = 0.1\ncycles = 3", "dt = 2.0\nsample_interval = 2.0\ncycles = 4");
    let cfg = write_config(tmp.path(), "unstable.toml", &body);
    let o = run_into(&cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("smaller time step"));
}

#[test]
fn sweep_keeps_going_past_a_failed_point() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[sweep]\ndt = [0.1, 3.0]\ncoupling = [0.2, 0.4]\n");
    let cfg = write_config(tmp.path(), "sweep.toml", &body);
    let out = tmp.path().join("sweep");
    let o = qotto(&["sweep", "-c", &cfg, "-o", out.to_str().unwrap(), "-w", "2"]);
    assert_eq!(o.status.code(), Some(4));

    let mut rdr = csv::Reader::from_path(out.join("index.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let ok: Vec<_> = rows.iter().filter(|r| &r[7] == "ok").collect();
    assert_eq!(ok.len(), 2);
    for r in &ok {
        assert!(out.join(&r[1]).join("cycles.csv").exists());
    }
    assert!(rows.iter().any(|r| r[7].starts_with("failed")));
}

#[test]
fn sweep_without_axes_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let o = qotto(&["sweep", "-c", &cfg, "-o", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn regime_writes_long_format_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("regime");
    let o = qotto(&["regime", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(out.join("regime.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["eps1", "eps2", "W_est"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        let (e1, e2, w): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(w.is_finite());
        if e1 == e2 {
            assert!(w.abs() < 1e-12);
        }
    }
}

#[test]
fn converge_reports_each_axis() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[converge]\ndt = [0.1, 0.05]\nspacing = [0.1, 0.05]\n");
    let cfg = write_config(tmp.path(), "conv.toml", &body);
    let out = tmp.path().join("conv");
    let o = qotto(&["converge", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("converge.json")).unwrap()).unwrap();
    let axes = report["axes"].as_array().unwrap();
    assert_eq!(axes.len(), 2);
    for a in axes {
        assert_eq!(a["entries"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn defaults_round_trip_through_run() {
    let o = qotto(&["defaults"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[model.hot]"));
    let cfg = qotto::RunConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, qotto::RunConfig::default());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = qotto::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            for point in cfg.sweep.combinations() {
                cfg.with_all(&point).validate().unwrap();
            }
            for (axis, values) in cfg.converge.axes().active() {
                for &v in values {
                    cfg.with(axis, v).validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                }
            }
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
