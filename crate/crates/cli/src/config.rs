//! Flag structs, `--config` merging and the small string grammars for
//! potentials, domains and initial data.

use std::path::{Path, PathBuf};

use clap::Args;
use entroflow::{Grid, GridSpec, InitialData, Potential};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_POTENTIAL: &str = "gaussian";
pub const DEFAULT_DOMAIN: &str = "-8:8";
pub const DEFAULT_NODES: usize = 2001;

/// Weight and discretization shared by every command.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridArgs {
    /// gaussian | flat | power:BETA | harmonic_log:EPS  [default: gaussian]
    #[arg(long)]
    pub potential: Option<String>,
    /// Interval a:b  [default: -8:8]
    #[arg(long, allow_hyphen_values = true, conflicts_with = "radial")]
    pub domain: Option<String>,
    /// Ball of dimension d and radius R, as d:R
    #[arg(long)]
    pub radial: Option<String>,
    /// Number of nodes  [default: 2001, or 2000 when F is singular at 0]
    #[arg(long)]
    pub n: Option<usize>,
}

impl GridArgs {
    pub fn spec(&self) -> Result<(Potential, GridSpec), CliError> {
        let singular = self.potential.as_deref().is_some_and(|p| p.starts_with("power") || p.starts_with("harmonic_log"));
        let n = self.n.unwrap_or(if singular && self.radial.is_none() { DEFAULT_NODES - 1 } else { DEFAULT_NODES });
        let spec = match (&self.radial, &self.domain) {
            (Some(_), Some(_)) => return Err(CliError::Config("--domain and --radial are exclusive".into())),
            (Some(r), None) => {
                let (d, radius) = split_pair(r, "--radial")?;
                let dim = d.parse().map_err(|_| CliError::Config(format!("bad dimension in --radial {r:?}")))?;
                GridSpec::Radial { dim, radius: parse_f64(radius, "--radial")?, n }
            }
            (None, d) => {
                let d = d.as_deref().unwrap_or(DEFAULT_DOMAIN);
                let (a, b) = split_pair(d, "--domain")?;
                GridSpec::Interval { xl: parse_f64(a, "--domain")?, xr: parse_f64(b, "--domain")?, n }
            }
        };
        let dim = match spec {
            GridSpec::Radial { dim, .. } => dim,
            GridSpec::Interval { .. } => 1,
        };
        Ok((parse_potential(self.potential.as_deref().unwrap_or(DEFAULT_POTENTIAL), dim)?, spec))
    }

    pub fn build(&self) -> Result<Grid, CliError> {
        let (potential, spec) = self.spec()?;
        Ok(spec.build(potential)?)
    }
}

fn split_pair<'a>(s: &'a str, flag: &str) -> Result<(&'a str, &'a str), CliError> {
    s.split_once(':').ok_or_else(|| CliError::Config(format!("{flag} expects a:b, got {s:?}")))
}

pub fn parse_f64(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::Config(format!("{what}: cannot parse {s:?} as a number")))
}

pub fn parse_potential(s: &str, dim: usize) -> Result<Potential, CliError> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let value = || -> Result<f64, CliError> {
        let a = arg.ok_or_else(|| CliError::Config(format!("potential {name:?} needs a parameter, e.g. {name}:1.5")))?;
        parse_f64(a, name)
    };
    let pot = match name {
        "gaussian" | "harmonic" => Potential::harmonic(),
        "flat" => Potential::flat(),
        "power" => Potential::power(value()?)?,
        "harmonic_log" => return Ok(Potential::harmonic_log(value()?, dim)?),
        _ => return Err(CliError::Config(format!("unknown potential {s:?}"))),
    };
    if dim == 1 {
        Ok(pot)
    } else {
        Ok(pot.with_dim(dim)?)
    }
}

/// `bump:A`, `odd:A`, `constant` or `csv:PATH` (one value per node, comma or
/// newline separated).
pub fn parse_initial(s: &str) -> Result<InitialData, CliError> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    match (name, arg) {
        ("bump", a) => Ok(InitialData::bump(a.map(|a| parse_f64(a, "--init bump")).transpose()?.unwrap_or(0.3))),
        ("odd", a) => Ok(InitialData::Odd { amplitude: a.map(|a| parse_f64(a, "--init odd")).transpose()?.unwrap_or(0.3) }),
        ("constant", None) => Ok(InitialData::Constant),
        ("csv", Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("--init {path}: {e}")))?;
            let values = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty() && !t.starts_with('#'))
                .map(|t| parse_f64(t, "--init csv"))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(InitialData::Values { values })
        }
        _ => Err(CliError::Config(format!("unknown initial datum {s:?}; use bump:A, odd:A, constant or csv:PATH"))),
    }
}

/// Reads `path` as a JSON object and overlays every non-null field of
/// `flags` on top of it, so flags win over the file.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("flags serialize"))
            .expect("flags round-trip"));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut file: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(base) = &mut file else {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    };
    let Value::Object(over) = serde_json::to_value(flags).expect("flags serialize") else {
        unreachable!("flag structs serialize to objects")
    };
    for key in base.keys() {
        if !over.contains_key(key) {
            return Err(CliError::Config(format!("{}: unknown field {key:?}", path.display())));
        }
    }
    for (k, v) in over {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
    serde_json::from_value(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Tolerance override from `ENTROFLOW_TOL`.
pub fn tolerance(default: f64) -> Result<f64, CliError> {
    match std::env::var("ENTROFLOW_TOL") {
        Ok(s) => {
            let t = parse_f64(&s, "ENTROFLOW_TOL")?;
            if t >= 0.0 {
                Ok(t)
            } else {
                Err(CliError::Config(format!("ENTROFLOW_TOL must be nonnegative, got {t}")))
            }
        }
        Err(_) => Ok(default),
    }
}

pub fn write_output(path: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}
