//! Built-in system registry and the TOML system-file loader.

use std::collections::BTreeMap;
use std::path::Path;

use hybridlin::ballbeam::{symbolic_system, PlantParams};
use hybridlin::expr::{parse, parse_expr, Params, VectorField};
use hybridlin::geometry::ControlAffineSystem;
use serde::Deserialize;

use crate::CliError;

pub struct LoadedSystem {
    pub name: String,
    pub sys: ControlAffineSystem,
    pub params: Params,
    pub probes: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    n: usize,
    f: Vec<String>,
    g: Vec<String>,
    h: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

/// `ballbeam`, `doubleint` or `file:<path>`.
pub fn load(spec: &str) -> Result<LoadedSystem, CliError> {
    match spec {
        "ballbeam" => Ok(LoadedSystem {
            name: spec.into(),
            sys: symbolic_system(),
            params: PlantParams::benchmark().bindings(),
            probes: vec![vec![0.0; 4], vec![0.5, 0.1, 0.2, 1.0]],
        }),
        "doubleint" => from_text(spec, "n = 2\nf = [\"x2\", \"0\"]\ng = [\"0\", \"1\"]\nh = \"x1\"\n"),
        _ => match spec.strip_prefix("file:") {
            Some(path) => {
                let text = std::fs::read_to_string(Path::new(path))
                    .map_err(|e| CliError::Runtime(format!("{path}: {e}")))?;
                from_text(path, &text)
            }
            None => Err(CliError::Usage(format!(
                "unknown system '{spec}'; expected ballbeam, doubleint or file:<path>"
            ))),
        },
    }
}

fn from_text(name: &str, text: &str) -> Result<LoadedSystem, CliError> {
    let file: SystemFile = toml::from_str(text).map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
    let n = file.n;
    if n == 0 || file.f.len() != n || file.g.len() != n {
        return Err(CliError::Runtime(format!("{name}: f and g need exactly n = {n} components")));
    }
    let field = |parts: &[String], key: &str| -> Result<VectorField, CliError> {
        let comps = parts
            .iter()
            .enumerate()
            .map(|(i, p)| parse_expr(p, n).map_err(|e| CliError::Runtime(format!("{name}: {key}[{i}]: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(comps).map_err(|e| CliError::Runtime(format!("{name}: {key}: {e}")))
    };
    let f = field(&file.f, "f")?;
    let g = field(&file.g, "g")?;
    let h = parse(&file.h, n).map_err(|e| CliError::Runtime(format!("{name}: h: {e}")))?;
    let sys = ControlAffineSystem::new(f, g, h).map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
    let params = file.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    Ok(LoadedSystem { name: name.into(), sys, params, probes: vec![vec![0.0; n], vec![0.5; n]] })
}
