use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ma_ot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ma-ot")).args(args).env("RUST_LOG", "error").output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("problem.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn solve(config: &str, out: &Path) -> Output {
    ma_ot(&["solve", "--config", config, "--out", out.to_str().unwrap()])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn square_experiment_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nname = \"square\"\nn = 32\n");
    let out = dir.path().join("out");
    let o = solve(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["u.csv", "map.csv", "mesh.csv", "report.json", "timing.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let u = fs::read_to_string(out.join("u.csv")).unwrap();
    assert!(u.starts_with("i,j,x1,x2,u\n"));
    assert_eq!(u.lines().count(), 32 * 32 + 1);
    assert!(fs::read_to_string(out.join("map.csv")).unwrap().starts_with("i,j,m1,m2\n"));

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let max_error = report["errors"]["max_error"].as_f64().unwrap();
    assert!((max_error - 0.0220).abs() < 1e-3, "{max_error}");
    assert!(report["converged"].as_bool().unwrap());
    let iterations = report["iterations"].as_u64().unwrap() as usize;
    assert_eq!(report["residual_history"].as_array().unwrap().len(), iterations + 1);
    let params = &report["params"];
    assert_eq!(params["n"], 32);
    assert_eq!(params["n_dirs"], 16);
    let dx = 1.0 / 31.0;
    assert!((params["delta"].as_f64().unwrap() - dx * dx).abs() < 1e-15);
    assert!(params["eps"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_field_is_rejected_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nname = \"square\"\nn = 32\ngird = 4\n");
    let o = solve(&cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("gird") && msg.contains("line 4"), "{msg}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_values_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[experiment]\nname = \"hexagon\"\nn = 32\n", "hexagon"),
        ("[experiment]\nname = \"square\"\nn = \"big\"\n", "n"),
        ("[grid]\nn = 17\nbounds = [-1.0, 1.0]\n", "[source]"),
        (
            "[grid]\nn = 17\nbounds = [-1.0, 1.0]\n[source]\ndensity = { kind = \"constant\", value = 1.0 }\n\
             [target]\nshape = { kind = \"points\", file = \"missing.txt\" }\nn_dirs = 16\n",
            "missing.txt",
        ),
        ("[experiment]\nname = \"square\"\nn = 17\n[solver]\neps = -1.0\n", "eps"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), text);
        let o = solve(&cfg, &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
}

#[test]
fn solver_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nname = \"square\"\nn = 17\n[solver]\nmax_iter = 1\ninit = \"quadratic\"\n");
    let o = solve(&cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no convergence"), "{}", stderr(&o));
}

#[test]
fn study_tabulates_orders() {
    let dir = tempfile::tempdir().unwrap();
    let o = ma_ot(&["study", "--experiment", "square", "--sizes", "32,64,128", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!(table.starts_with("n,n_dirs,iterations,error,order,status\n"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][4], "");
    for row in &rows[1..] {
        let order: f64 = row[4].parse().unwrap();
        assert!((0.8..=1.2).contains(&order), "{table}");
    }
    assert!(dir.path().join("timing.json").is_file());
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn = 33\nbounds = [-1.0, 1.0]\n\
         [source]\ndensity = { kind = \"gaussian\", center = [0.1, 0.0], sigma = 0.5, base = 0.5 }\n\
         support = { kind = \"disc\", center = [0.0, 0.0], radius = 0.9 }\n\
         [target]\nshape = { kind = \"square\", lo = -0.5, hi = 0.5 }\nn_dirs = 32\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(solve(&cfg, &a).status.success());
    assert!(solve(&cfg, &b).status.success());
    for name in ["u.csv", "map.csv", "mesh.csv", "report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn point_cloud_target_is_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut points = String::from("# unit square corners, shuffled\n");
    for p in ["0.5 0.5", "-0.5,-0.5", "0.5 -0.5", "", "-0.5 0.5"] {
        points += p;
        points.push('\n');
    }
    fs::write(dir.path().join("corners.txt"), points).unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn = 17\nbounds = [-0.5, 0.5]\n\
         [source]\ndensity = { kind = \"constant\", value = 1.0 }\n\
         [target]\nshape = { kind = \"points\", file = \"corners.txt\" }\nn_dirs = 16\n",
    );
    let out = dir.path().join("out");
    let o = solve(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    // Uniform onto the same square: the map stays within a cell of the identity.
    let map = fs::read_to_string(out.join("map.csv")).unwrap();
    let u = fs::read_to_string(out.join("u.csv")).unwrap();
    for (m, p) in map.lines().skip(1).zip(u.lines().skip(1)) {
        let m: Vec<f64> = m.split(',').skip(2).map(|s| s.parse().unwrap()).collect();
        let p: Vec<f64> = p.split(',').skip(2).take(2).map(|s| s.parse().unwrap()).collect();
        assert!((m[0] - p[0]).abs() <= 1.0 / 16.0 && (m[1] - p[1]).abs() <= 1.0 / 16.0);
    }
}

#[test]
fn version_prints_the_package_version() {
    let o = ma_ot(&["version"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), format!("ma-ot {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn thread_count_must_be_a_number() {
    let o = Command::new(env!("CARGO_BIN_EXE_ma-ot")).arg("version").env("MA_OT_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MA_OT_THREADS"));
}
