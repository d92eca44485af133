use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hybridlin::ballbeam::PlantParams;
use hybridlin::controllers::LawDescriptor;
use hybridlin::coverage::{coverage_check, necessity_witness, StateBox};
use hybridlin::expr::simplify;
use hybridlin::geometry::{
    derivative_chain, involutivity_bracket, involutivity_witness, relative_degree_at, DEFAULT_RELATIVE_DEGREE_TOL,
};
use hybridlin::numfmt::g9;
use hybridlin::sim::{self, Metrics, RunOutput, Scenario, SimError, Trajectory};

use crate::systems;
use crate::CliError;

pub const SUMMARY_HEADER: &str =
    "scenario,status,samples,tail_rms,max_abs_x3,min_abs_a1,min_abs_x1,min_abs_x4,min_abs_cos3,switches";

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| g9(*v)).collect();
    format!("({})", parts.join(", "))
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>, String> {
    let x = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("probe '{text}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if x.len() != dim {
        return Err(format!("probe '{text}' has {} coordinates, system has {dim}", x.len()));
    }
    Ok(x)
}

fn lf_name(j: usize) -> String {
    match j {
        0 => "h".into(),
        1 => "L_f h".into(),
        _ => format!("L_f^{j} h"),
    }
}

fn lg_name(j: usize) -> String {
    match j {
        0 => "L_g h".into(),
        1 => "L_g L_f h".into(),
        _ => format!("L_g L_f^{j} h"),
    }
}

pub fn derive(system: &str, order: usize, probes: &[String]) -> Result<(), CliError> {
    let s = systems::load(system)?;
    let n = s.sys.dim();
    if order == 0 || order > n {
        return Err(CliError::Usage(format!("--order {order} outside 1..={n}")));
    }
    let probes = if probes.is_empty() {
        s.probes.clone()
    } else {
        probes.iter().map(|p| parse_point(p, n)).collect::<Result<_, _>>().map_err(CliError::Usage)?
    };
    let chain = derivative_chain(&s.sys, order).map_err(runtime)?;

    let mut out = String::new();
    let _ = writeln!(out, "system: {} (n = {n})", s.name);
    for (j, d) in chain.drift_derivatives.iter().enumerate() {
        let _ = writeln!(out, "{} = {}", lf_name(j), d.expr());
    }
    for (j, d) in chain.input_derivatives.iter().enumerate() {
        let _ = writeln!(out, "{} = {}", lg_name(j), d.expr());
    }
    let _ = writeln!(out, "a = {}", chain.coefficient.expr());
    let _ = writeln!(out, "b = {}", chain.offset.expr());

    let bound = simplify(&chain.coefficient.expr().bind_params(&s.params));
    let constant = bound.as_const().is_some_and(|c| !c.is_zero());
    if chain.is_uniform() && constant {
        let _ = writeln!(out, "relative degree {order} everywhere");
    } else {
        for x in &probes {
            let a = chain.coefficient.eval_at(&s.params, x).map_err(runtime)?;
            let verdict = match relative_degree_at(&s.sys, &s.params, x, n, DEFAULT_RELATIVE_DEGREE_TOL)
                .map_err(runtime)?
            {
                Some(r) => format!("relative degree {r}"),
                None => "relative degree undefined".into(),
            };
            let _ = writeln!(out, "probe {}: a = {}, {verdict}", point(x), g9(a));
        }
    }
    print!("{out}");
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Scenario::from_toml_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

enum Outcome {
    Done(RunOutput),
    Stopped { trajectory: Trajectory, metrics: Metrics, reason: String },
    Failed(String),
}

fn outcome(sc: &Scenario, result: Result<RunOutput, SimError>) -> Outcome {
    match result {
        Ok(out) => Outcome::Done(out),
        Err(SimError::RegimeExceeded { t, x3, partial }) => {
            let metrics = Metrics::compute(&partial, sc.output.tail_window);
            let reason = format!("|x3| = {} exceeds pi at t = {}", g9(x3.abs()), g9(t));
            Outcome::Stopped { trajectory: *partial, metrics, reason }
        }
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

pub fn simulate(path: &Path, out: &Path) -> Result<(), CliError> {
    let sc = load_scenario(path)?;
    let name = stem(path);
    let csv = out.join(format!("{name}.csv"));
    let report = out.join(format!("{name}.metrics.txt"));
    match outcome(&sc, sim::run(&sc)) {
        Outcome::Done(run) => {
            write_file(&csv, &run.trajectory.to_csv())?;
            let text = format!("status: ok\n{}", run.metrics);
            write_file(&report, &text)?;
            print!("{text}");
            Ok(())
        }
        Outcome::Stopped { trajectory, metrics, reason } => {
            write_file(&csv, &trajectory.to_csv())?;
            let text = format!("status: stopped, {reason}\n{metrics}");
            write_file(&report, &text)?;
            print!("{text}");
            Err(CliError::Runtime(format!("{}: {reason}", path.display())))
        }
        Outcome::Failed(msg) => Err(CliError::Runtime(format!("{}: {msg}", path.display()))),
    }
}

fn parse_laws(text: &str) -> Result<Vec<LawDescriptor>, CliError> {
    let mut laws: Vec<LawDescriptor> = Vec::new();
    for tok in text.split(',').map(str::trim) {
        let law = match tok {
            "1" => LawDescriptor::law1(),
            "2" => LawDescriptor::law2(),
            "3" => LawDescriptor::law3(),
            "alt" => LawDescriptor::law3_alternate(),
            _ => return Err(CliError::Usage(format!("--laws: unknown law '{tok}'; expected 1, 2, 3 or alt"))),
        };
        if laws.iter().any(|l| l.label == law.label) {
            return Err(CliError::Usage(format!("--laws: '{tok}' listed twice")));
        }
        laws.push(law);
    }
    Ok(laws)
}

pub fn coverage(laws: &str, samples: usize, margin: f64, seed: u64, half: f64, out: &Path) -> Result<(), CliError> {
    let laws = parse_laws(laws)?;
    if !(half.is_finite() && half > 0.0) {
        return Err(CliError::Usage(format!("--half must be positive, got {half}")));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(CliError::Usage(format!("--margin must be non-negative, got {margin}")));
    }
    let params = PlantParams::benchmark().bindings();
    let bx = StateBox::new(vec![-half, -half, -PI, -half], vec![half, half, PI, half]).map_err(runtime)?;
    let report = coverage_check(&laws, &params, &bx, samples, margin, seed).map_err(runtime)?;
    let witness = necessity_witness(&laws, &params).map_err(runtime)?;
    let mut text = report.to_string();
    match witness {
        Some(w) => {
            let _ = writeln!(text, "necessity witness: {}", point(&w));
        }
        None => text.push_str("necessity witness: none\n"),
    }
    write_file(&out.join("coverage.txt"), &text)?;
    write_file(&out.join("witnesses.csv"), &report.witness_csv())?;
    print!("{text}");
    Ok(())
}

fn read_probes(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then_some((i, line))
        })
        .map(|(i, line)| {
            parse_point(line, dim).map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn involutivity(system: &str, probes: Option<&Path>) -> Result<(), CliError> {
    let s = systems::load(system)?;
    let n = s.sys.dim();
    if n < 2 {
        return Err(CliError::Usage("involutivity needs n >= 2".into()));
    }
    let probes = match probes {
        Some(p) => read_probes(p, n)?,
        None if system == "ballbeam" => {
            vec![vec![0.0; 4], vec![0.5, 0.1, 0.2, 1.0], vec![-1.0, 0.5, -0.3, 0.2], vec![0.0, 0.7, 0.0, 0.0]]
        }
        None => s.probes.clone(),
    };
    let bracket = involutivity_bracket(&s.sys);
    let comps: Vec<String> = bracket.components().iter().map(|c| simplify(c).to_string()).collect();

    let mut out = String::new();
    let top = match n - 2 {
        0 => "g".to_string(),
        1 => "ad_f g".to_string(),
        k => format!("ad_f^{k} g"),
    };
    let _ = writeln!(out, "[g, {top}] = ({})", comps.join(", "));
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend((1..=n).map(|i| format!("b{i}")));
    header.extend(["rank_without".into(), "rank_with".into(), "escalates".into()]);
    let _ = writeln!(out, "{}", header.join(","));
    for x in &probes {
        let w = involutivity_witness(&s.sys, &s.params, x).map_err(runtime)?;
        let mut row: Vec<String> = x.iter().chain(&w.bracket).map(|v| g9(*v)).collect();
        row.push(w.rank_without.to_string());
        row.push(w.rank_with.to_string());
        row.push(w.escalates().to_string());
        let _ = writeln!(out, "{}", row.join(","));
    }
    print!("{out}");
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(g9).unwrap_or_default()
}

fn summary_row(name: &str, status: &str, tr: Option<&Trajectory>, m: Option<&Metrics>, tail: bool) -> String {
    let cols = [
        name.to_string(),
        status.to_string(),
        tr.map(|t| t.len().to_string()).unwrap_or_default(),
        opt(m.filter(|_| tail).map(|m| m.tail_rms_error)),
        opt(m.map(|m| m.max_abs_x3)),
        opt(m.map(|m| m.min_abs_a1)),
        opt(m.map(|m| m.min_abs_x1)),
        opt(m.map(|m| m.min_abs_x4)),
        opt(m.map(|m| m.min_abs_cos3)),
        m.map(|m| m.switch_count.to_string()).unwrap_or_default(),
    ];
    cols.join(",")
}

pub fn sweep(dir: &Path, out: &Path) -> Result<(), CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();

    let loaded: Vec<Result<Scenario, CliError>> = files.iter().map(|p| load_scenario(p)).collect();
    let runnable: Vec<Scenario> = loaded.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let mut results = sim::sweep(&runnable).into_iter().zip(&runnable);

    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut ok = 0;
    for (path, scenario) in files.iter().zip(loaded) {
        let name = stem(path);
        let row = match scenario {
            Err(e) => {
                eprintln!("{name}: {e}");
                summary_row(&name, "invalid", None, None, false)
            }
            Ok(_) => {
                let (result, sc) = results.next().expect("one result per runnable scenario");
                match outcome(sc, result) {
                    Outcome::Done(run) => {
                        ok += 1;
                        write_file(&out.join(format!("{name}.csv")), &run.trajectory.to_csv())?;
                        summary_row(&name, "ok", Some(&run.trajectory), Some(&run.metrics), true)
                    }
                    Outcome::Stopped { trajectory, metrics, reason } => {
                        eprintln!("{name}: {reason}");
                        write_file(&out.join(format!("{name}.csv")), &trajectory.to_csv())?;
                        summary_row(&name, "stopped", Some(&trajectory), Some(&metrics), false)
                    }
                    Outcome::Failed(msg) => {
                        eprintln!("{name}: {msg}");
                        summary_row(&name, "failed", None, None, false)
                    }
                }
            }
        };
        summary.push_str(&row);
        summary.push('\n');
    }
    write_file(&out.join("summary.csv"), &summary)?;
    println!("{} scenarios, {ok} completed", files.len());
    Ok(())
}
