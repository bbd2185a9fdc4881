use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nlgamma(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlgamma"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("NLGAMMA_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rerun_from_config(out: &Path, again: &Path, command: &str) -> Output {
    let cfg = out.join("config.toml");
    nlgamma(again, &["--config", cfg.to_str().unwrap(), command])
}

#[test]
fn perimeter_prints_value_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = nlgamma(&a, &["perimeter", "--set", "halfspace", "--omega", "box:-1,1", "--s", "0.25", "--part", "interior"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    let exact = 8.0 - 4.0 * 2f64.sqrt();
    assert!((v - exact).abs() < 5e-3 * exact, "{v}");
    let csv = fs::read_to_string(a.join("perimeter.csv")).unwrap();
    assert!(csv.starts_with("s,part,perimeter,scaled_perimeter\n0.25,interior,"));
    let summary: toml::Table = fs::read_to_string(a.join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["exit_code"].as_integer(), Some(0));
    assert_eq!(summary["result"]["perimeter"].as_float(), Some(v));

    let o = rerun_from_config(&a, &b, "perimeter");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("perimeter.csv")).unwrap(), fs::read(b.join("perimeter.csv")).unwrap());
    assert_eq!(fs::read(a.join("config.toml")).unwrap(), fs::read(b.join("config.toml")).unwrap());
}

#[test]
fn bbm_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlgamma(dir.path(), &["sweep", "--experiment", "BBM_LIMIT"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("BBM_LIMIT: PASS"));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("series,parameter,scaled_seminorm,seminorm,reference,relative_error,flag"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn failed_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlgamma(dir.path(), &["sweep", "--experiment", "BBM_LIMIT", "--tolerance", "1e-6"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let summary: toml::Table = fs::read_to_string(dir.path().join("summary.toml")).unwrap().parse().unwrap();
    // The tolerance also bounds the extrapolation consistency check.
    assert_eq!(summary["result"]["experiment"]["verdict"].as_str(), Some("INCONCLUSIVE"));
    assert_eq!(summary["result"]["experiment"]["checks"]["limit"]["passed"].as_bool(), Some(false));
}

#[test]
fn multiplier_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlgamma(dir.path(), &["multiplier", "--s", "0.5", "--xi-max", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("multiplier.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        let (xi, s) = (v[1], v[2]);
        let exact = xi * xi.tanh();
        assert!((s - exact).abs() <= 1e-8 * exact, "xi={xi}: {s} vs {exact}");
        rows += 1;
    }
    assert_eq!(rows, 500);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlgamma(dir.path(), &["plot"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nlgamma(dir.path(), &["--threads", "0", "multiplier"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nlgamma(dir.path(), &["perimeter", "--omega", "box:-1,1", "--s", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("set"), "{}", stderr(&o));
    let o = nlgamma(dir.path(), &["sweep", "--experiment", "NO_SUCH"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[multiplier]\ns = [0.5]\nxi_maximum = 10.0\n").unwrap();
    let o = nlgamma(dir.path(), &["--config", cfg.to_str().unwrap(), "multiplier"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("xi_maximum"), "{}", stderr(&o));
    fs::write(&cfg, "[sweep]\nname = \"BBM_LIMIT\"\n[sweep.options]\ndrift = 1.0\n").unwrap();
    let o = nlgamma(dir.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("drift"), "{}", stderr(&o));
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[multiplier]\ns = [0.25, 0.75]\npoints = 7\n[perimeter]\ns = 0.1\n").unwrap();
    let o = nlgamma(dir.path(), &["--config", cfg.to_str().unwrap(), "multiplier", "--points", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eff: toml::Table = fs::read_to_string(dir.path().join("config.toml")).unwrap().parse().unwrap();
    assert_eq!(eff["multiplier"]["points"].as_integer(), Some(5));
    assert_eq!(eff["multiplier"]["s"].as_array().map(Vec::len), Some(2));
    assert_eq!(fs::read_to_string(dir.path().join("multiplier.csv")).unwrap().lines().count(), 11);
}

#[test]
fn minimize_then_energy_of_the_written_field() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let common = ["--functional", "F_full", "--eps", "0.2", "--s", "0.3", "--set", "halfspace", "--omega", "box:-1,1", "--cells", "32"];
    let mut args = vec!["minimize"];
    args.extend(common);
    let o = nlgamma(&a, &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let final_energy = fs::read_to_string(a.join("energy.csv")).unwrap();
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,energy,gradient_norm,step\n"));
    assert_eq!(fs::read_to_string(a.join("field.csv")).unwrap().lines().count(), 33);

    let field = format!("file:{}", a.join("field.bin").display());
    let mut args = vec!["energy"];
    args.extend(common);
    args.extend(["--field", field.as_str()]);
    let o = nlgamma(&b, &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(b.join("energy.csv")).unwrap(), final_energy);

    let o = rerun_from_config(&a, &c, "minimize");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("field.bin")).unwrap(), fs::read(c.join("field.bin")).unwrap());
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn set_functionals_and_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["energy", "--functional", "G_SHARP", "--set", "ball:0.5,0.5,0.25", "--omega", "box:0,1,0,1", "--cells", "32"];
    let o = nlgamma(&a, &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.5 * std::f64::consts::PI).abs() < 0.05, "{v}");

    let nonlocal = [
        "energy", "--functional", "F_full", "--eps", "0.1", "--s", "0.3", "--set", "ball:0.5,0.5,0.25", "--omega", "box:0,1,0,1", "--cells",
        "24", "--field", "recovery",
    ];
    let o = nlgamma(&a, &nonlocal);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for threads in ["1", "3"] {
        let mut threaded = vec!["--threads", threads];
        threaded.extend(nonlocal);
        let o = nlgamma(&b, &threaded);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(fs::read(a.join("energy.csv")).unwrap(), fs::read(b.join("energy.csv")).unwrap());
    }
}

#[test]
fn cache_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    fs::create_dir_all(&cache).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nlgamma"))
        .args(["--out", dir.path().join("out").to_str().unwrap()])
        .args(["perimeter", "--set", "halfspace", "--omega", "box:-1,1", "--s", "0.3", "--cells", "64"])
        .env("NLGAMMA_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_dir(&cache).unwrap().next().is_some(), "no table cached");
}
