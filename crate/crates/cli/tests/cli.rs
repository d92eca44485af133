use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn hybridlin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridlin"))
        .args(args)
        .env_remove("HYBRIDLIN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn derive_order_three_prints_coefficient_and_offset() {
    let o = hybridlin(&["derive", "--system", "ballbeam", "--order", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("a = 2*B*x1*x4\n"), "{out}");
    assert!(out.contains("b = B*x2*x4^2 - B*G*x4*cos(x3)\n"), "{out}");
    assert!(out.contains("L_g L_f h = 0\n"));
    assert!(out.contains("probe (0.5, 0.1, 0.2, 1): a = 0.714285714, relative degree 3"), "{out}");
}

#[test]
fn derive_order_one_shows_vanishing_input_derivative() {
    let o = hybridlin(&["derive", "--system", "ballbeam", "--order", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("L_g h = 0\n"));
}

#[test]
fn derive_double_integrator_file() {
    let file = repo().join("systems/doubleint.txt");
    let spec = format!("file:{}", path(&file));
    let o = hybridlin(&["derive", "--system", &spec, "--order", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("relative degree 2 everywhere"));
}

#[test]
fn derive_accepts_user_probes() {
    let o = hybridlin(&["derive", "--system", "ballbeam", "--order", "3", "--probe", "-1,0,0,2", "--probe", "0,0,0,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("probe (-1, 0, 0, 2): a = -2.85714286, relative degree 3"), "{out}");
    assert!(out.contains("probe (0, 0, 0, 0): a = 0, relative degree undefined"), "{out}");
}

#[test]
fn derive_rejects_order_above_dimension() {
    let o = hybridlin(&["derive", "--system", "ballbeam", "--order", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = hybridlin(&["derive", "--system", "doubleint", "--order", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn derive_reports_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, "n = 1\nf = [\"x1 +\"]\ng = [\"1\"]\nh = \"x1\"\n").unwrap();
    let o = hybridlin(&["derive", "--system", &format!("file:{}", path(&file)), "--order", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("f[0]"), "{}", stderr(&o));
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(hybridlin(&["--help"]).status.code(), Some(0));
    assert_eq!(hybridlin(&[]).status.code(), Some(1));
    assert_eq!(hybridlin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hybridlin(&["derive", "--system", "nosuch", "--order", "1"]).status.code(), Some(1));
}

#[test]
fn simulate_zero_reference_writes_full_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let sc = repo().join("scenarios/regulate_zero.toml");
    let o = hybridlin(&["simulate", path(&sc), "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("regulate_zero.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,x3,x4,u,law,a1,err,abscos3"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 30_001);
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert!(cols[1..5].iter().all(|c| *c == "0"), "{row}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("regulate_zero.metrics.txt")).unwrap();
    assert!(metrics.starts_with("status: ok\n"));
    assert!(metrics.contains("tail_rms_error_m: 0\n"));
}

#[test]
fn simulate_uses_out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let sc = repo().join("scenarios/regulate_zero.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_hybridlin"))
        .args(["simulate", path(&sc)])
        .env("HYBRIDLIN_OUT_DIR", dir.path().join("nested"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("nested/regulate_zero.csv").exists());
}

#[test]
fn simulate_benchmark_scenario_stops_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let sc = repo().join("scenarios/benchmark.toml");
    let o = hybridlin(&["simulate", path(&sc), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exceeds pi"));
    let csv = std::fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn malformed_scenario_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo().join("scenarios/regulate_zero.toml")).unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, text.replace("duration", "duraton")).unwrap();
    let o = hybridlin(&["simulate", path(&file), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duraton"), "{}", stderr(&o));

    std::fs::write(&file, text.replace("eps4 = 0.08", "eps4 = \"wide\"")).unwrap();
    let o = hybridlin(&["simulate", path(&file), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps4"), "{}", stderr(&o));

    std::fs::write(&file, text.replace("law2 = -3.0", "law2 = 3.0")).unwrap();
    let o = hybridlin(&["simulate", path(&file), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("poles.law2"), "{}", stderr(&o));
}

#[test]
fn coverage_full_table_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let o = hybridlin(&["coverage", "--samples", "50000", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("coverage complete, 0 witnesses\n"));
    assert!(stdout(&o).contains("necessity witness: none"));
    let csv = std::fs::read_to_string(dir.path().join("witnesses.csv")).unwrap();
    assert_eq!(csv, "x1,x2,x3,x4,failed_laws\n");
    assert!(dir.path().join("coverage.txt").exists());
}

#[test]
fn coverage_without_law_three_finds_the_pair_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = hybridlin(&["coverage", "--laws", "1,2", "--samples", "10000", "--out", path(dir.path())]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("coverage incomplete,"), "{out}");
    let line = out.lines().find(|l| l.starts_with("necessity witness: (")).expect("witness line");
    let nums: Vec<f64> =
        line["necessity witness: (".len()..line.len() - 1].split(", ").map(|s| s.parse().unwrap()).collect();
    assert_eq!(nums[0], 0.0);
    assert!(nums[2].cos().abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("witnesses.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1;2")));
}

#[test]
fn coverage_law_one_alone_fails_on_its_first_factor() {
    let o = hybridlin(&["coverage", "--laws", "1", "--samples", "1000", "--out", path(tempfile::tempdir().unwrap().path())]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("necessity witness: (0, "));
}

#[test]
fn coverage_rejects_unknown_law() {
    assert_eq!(hybridlin(&["coverage", "--laws", "1,4"]).status.code(), Some(1));
    assert_eq!(hybridlin(&["coverage", "--laws", "1,1"]).status.code(), Some(1));
}

#[test]
fn involutivity_default_probes() {
    let o = hybridlin(&["involutivity"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("[g, ad_f^2 g] = (2*B*x1, -2*B*x2, 0, 0)\n"), "{out}");
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert!(rows.contains(&"0,0,0,0,0,0,0,0,3,3,false"), "{out}");
    assert!(rows.iter().any(|r| r.ends_with(",3,4,true")));
}

#[test]
fn involutivity_probe_file_off_axis_escalates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("probes.txt");
    std::fs::write(&file, "# x1 nonzero\n0.37, -1.2, 0.4, 0.9\n0,0,0,0\n").unwrap();
    let o = hybridlin(&["involutivity", "--probes", path(&file)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",3,4,true"), "{}", rows[0]);
    assert!(rows[1].ends_with(",3,3,false"));
}

#[test]
fn sweep_empty_directory_writes_header_only() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = hybridlin(&["sweep", path(input.path()), "--out", path(out.path())]);
    assert!(o.status.success());
    let summary = std::fs::read_to_string(out.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("scenario,status,samples,tail_rms,"));
}

fn short_copy(src: &Path, dst: &Path) {
    let text = std::fs::read_to_string(src).unwrap();
    let text = text.replace("duration = 10.0", "duration = 1.0").replace("tail_window = 5.0", "tail_window = 0.5");
    std::fs::write(dst, text).unwrap();
}

#[test]
fn sweep_runs_each_scenario_and_is_byte_deterministic() {
    let input = tempfile::tempdir().unwrap();
    let mut names = Vec::new();
    for entry in std::fs::read_dir(repo().join("scenarios/sweep")).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_owned();
        short_copy(&p, &input.path().join(&name));
        names.push(p.file_stem().unwrap().to_string_lossy().into_owned());
    }
    names.sort();
    std::fs::write(input.path().join("zz_broken.toml"), "step = ").unwrap();
    assert_eq!(names.len(), 4);

    let run = || {
        let out = tempfile::tempdir().unwrap();
        let o = hybridlin(&["sweep", path(input.path()), "--out", path(out.path())]);
        assert!(o.status.success(), "{}", stderr(&o));
        let summary = std::fs::read(out.path().join("summary.csv")).unwrap();
        let csvs: Vec<Vec<u8>> =
            names.iter().map(|n| std::fs::read(out.path().join(format!("{n}.csv"))).unwrap()).collect();
        (summary, csvs)
    };
    let (summary, csvs) = run();
    let text = String::from_utf8(summary.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6, "{text}");
    assert!(lines[0].ends_with("min_abs_a1,min_abs_x1,min_abs_x4,min_abs_cos3,switches"));
    for (line, name) in lines[1..5].iter().zip(&names) {
        assert!(line.starts_with(&format!("{name},ok,1001,")), "{line}");
    }
    assert!(lines[5].starts_with("zz_broken,invalid,"));
    assert_eq!(run(), (summary, csvs));
}
