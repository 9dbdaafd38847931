//! `entroflow`: weighted eigenvalue criteria, entropy-dissipating flows and
//! verification reports.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 violated
//! hypothesis; `report` exits with `4 + failed verdicts` (capped at 125).

mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entroflow::criteria::{self, Hypotheses, PmeConstants};
use entroflow::functionals::{self, Functionals, PmeParams};
use entroflow::spectrum::{self, SpectralResult};
use entroflow::verify::{self, Verdict};
use entroflow::{flows, Column, Error, FlowConfig, FlowKind, Grid, TimeScheme, Trace};
use serde::{Deserialize, Serialize};
use serde_json::json;

use config::{merge, GridArgs};
use plot::Series;

const SLACK_TOLERANCE: f64 = 1e-8;
const MASS_TOLERANCE: f64 = 1e-10;
const MAX_EXIT: usize = 125;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Hypothesis(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Hypothesis(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Hypothesis(m) => write!(f, "hypothesis not met: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::SolverDiverged { .. }
            | Error::LinearSolveFailure(_)
            | Error::NewtonDiverged { .. }
            | Error::FloorViolation { .. }
            | Error::NonPositiveData { .. } => CliError::Numerical(msg),
            Error::OutsideEllipse { .. } | Error::QOutOfRange { .. } | Error::NonpositiveLambda(_) => CliError::Hypothesis(msg),
            _ => CliError::Config(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "entroflow", version, about = "Entropy-decay criteria for weighted linear and porous-media diffusions")]
struct Cli {
    /// JSON object supplying defaults for the command's flags; flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted eigenvalue λ₁(p) or λ₁(m,θ)
    #[command(allow_negative_numbers = true)]
    Lambda1(Lambda1Args),
    /// Run a linear or porous-media flow and write its trace
    #[command(allow_negative_numbers = true)]
    Flow(FlowArgs),
    /// Monte Carlo picture of the admissible ellipse
    #[command(allow_negative_numbers = true)]
    Region(RegionArgs),
    /// Decay constants of the porous-media theorem
    #[command(allow_negative_numbers = true)]
    Constants(ConstantsArgs),
    /// Verify a trace against the decay theorems
    #[command(allow_negative_numbers = true)]
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Linear,
    Pme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeArg {
    Bdf2,
    ImplicitEuler,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct Lambda1Args {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    /// Entropy exponent p in [1, 2]
    #[arg(long, conflicts_with = "theta")]
    p: Option<f64>,
    /// Porous-media parameter θ in [0, 1)
    #[arg(long)]
    theta: Option<f64>,
    /// Sweep p over a:b:k, k evenly spaced values
    #[arg(long, conflicts_with_all = ["p", "theta"])]
    p_sweep: Option<String>,
    /// Format of --output  [default: json]
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps  [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct FlowArgs {
    #[arg(value_enum)]
    kind: Option<KindArg>,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    /// θ recorded with a porous-media trace for its decay constants  [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Final time  [default: 4]
    #[arg(long)]
    tend: Option<f64>,
    /// Time step  [default: 10 h²]
    #[arg(long)]
    dt: Option<f64>,
    /// bump:A | odd:A | constant | csv:PATH  [default: bump:0.3]
    #[arg(long)]
    init: Option<String>,
    /// [default: bdf2]
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Steps between snapshots  [default: steps/200]
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Snapshots between stored fields  [default: 10]
    #[arg(long)]
    audit_stride: Option<usize>,
    /// Trace CSV destination
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RegionArgs {
    /// Comma-separated θ values in (0, 1]
    #[arg(long, conflicts_with = "from_p")]
    theta: Option<String>,
    /// Use θ₀ = 2/p₀ − 1
    #[arg(long)]
    from_p: Option<f64>,
    /// Report membership of this (m, p)
    #[arg(long, requires = "p")]
    m: Option<f64>,
    #[arg(long, requires = "m")]
    p: Option<f64>,
    /// [default: 10000]
    #[arg(long)]
    samples: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ConstantsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, conflicts_with = "from_p")]
    theta: Option<f64>,
    /// Use θ₀ = 2/p₀ − 1
    #[arg(long)]
    from_p: Option<f64>,
    /// λ₁(m,θ); computed on the grid when absent
    #[arg(long)]
    lambda1: Option<f64>,
    /// Initial entropy; computed from --init on the grid when absent
    #[arg(long)]
    e0: Option<f64>,
    /// [default: bump:0.3]
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ReportArgs {
    /// Trace CSV written by `flow`
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Grid flags default to the ones recorded in the trace
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    /// Comma-separated subset of envelope,dissipation,refined,poincare,lemma,mass  [default: all that apply]
    #[arg(long)]
    checks: Option<String>,
    /// SVG destination for E, I and their envelopes
    #[arg(long)]
    plot: Option<PathBuf>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Poincaré trial count  [default: 100]
    #[arg(long)]
    trials: Option<usize>,
    /// ε of the refined inequalities  [default: (1−α)/(2α)]
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.config.as_deref();
    let result = match &cli.command {
        Command::Lambda1(a) => merge(a, cfg).and_then(|a| cmd_lambda1(&a)),
        Command::Flow(a) => merge(a, cfg).and_then(|a| cmd_flow(&a)),
        Command::Region(a) => merge(a, cfg).and_then(|a| cmd_region(&a)),
        Command::Constants(a) => merge(a, cfg).and_then(|a| cmd_constants(&a)),
        Command::Report(a) => merge(a, cfg).and_then(|a| cmd_report(&a)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Order-preserving map over `items` on up to `jobs` scoped threads.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let chunk = items.len().div_ceil(jobs.clamp(1, items.len().max(1))).max(1);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}

/// Twelve decimals, without the sign of a value that rounds to zero.
fn fmt_lambda(l: f64) -> String {
    let s = format!("{l:.12}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn cmd_lambda1(a: &Lambda1Args) -> Result<u8, CliError> {
    let grid = a.grid.build()?;
    let format = a.out.unwrap_or(OutFormat::Json);
    if let Some(sweep) = &a.p_sweep {
        let parts: Vec<&str> = sweep.split(':').collect();
        let [lo, hi, k] = parts[..] else {
            return Err(CliError::Config(format!("--p-sweep expects a:b:k, got {sweep:?}")));
        };
        let (lo, hi) = (config::parse_f64(lo, "--p-sweep")?, config::parse_f64(hi, "--p-sweep")?);
        let k: usize = k.parse().map_err(|_| CliError::Config(format!("bad count in --p-sweep {sweep:?}")))?;
        if k < 2 {
            return Err(CliError::Config("--p-sweep needs at least 2 values".into()));
        }
        let ps: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
        let results = parallel_map(&ps, a.jobs.unwrap_or(1), |&p| spectrum::lambda1_linear(p, &grid));
        let mut rows = Vec::with_capacity(k);
        for (p, r) in ps.iter().zip(results) {
            let r = r?;
            println!("{p:.6} {}", fmt_lambda(r.lambda));
            rows.push(json!({ "p": p, "lambda": r.lambda, "residual": r.residual, "iterations": r.iterations, "edge_mass": r.edge_mass }));
        }
        let text = match format {
            OutFormat::Json => to_json(&json!({ "config": a, "sweep": rows })),
            OutFormat::Csv => {
                let mut s = String::from("p,lambda,residual,iterations,edge_mass\n");
                for r in &rows {
                    s += &format!("{},{},{},{},{}\n", r["p"], r["lambda"], r["residual"], r["iterations"], r["edge_mass"]);
                }
                s
            }
        };
        config::write_output(&a.output, &text)?;
        return Ok(0);
    }
    let result: SpectralResult = match (a.p, a.theta) {
        (Some(p), None) => spectrum::lambda1_linear(p, &grid)?,
        (None, Some(theta)) => spectrum::lambda1_pme(theta, &grid)?,
        (Some(_), Some(_)) => return Err(CliError::Config("give either --p or --theta, not both".into())),
        (None, None) => return Err(CliError::Config("need --p, --theta or --p-sweep".into())),
    };
    println!("{}", fmt_lambda(result.lambda));
    let text = match format {
        OutFormat::Json => to_json(&json!({ "config": a, "result": result })),
        OutFormat::Csv => {
            let mut s = format!("# lambda1: {:.16e}\n# residual: {:.3e}\nx,w\n", result.lambda, result.residual);
            for (x, w) in grid.nodes().iter().zip(&result.eigenvector) {
                s += &format!("{x:.16e},{w:.16e}\n");
            }
            s
        }
    };
    config::write_output(&a.output, &text)?;
    Ok(0)
}

fn flow_config(a: &FlowArgs) -> Result<FlowConfig, CliError> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Config(format!("flow needs {flag}")));
    let t_end = a.tend.unwrap_or(4.0);
    let mut cfg = match a.kind {
        Some(KindArg::Linear) => FlowConfig::linear(need(a.p, "--p")?, t_end),
        Some(KindArg::Pme) => FlowConfig::pme(need(a.m, "--m")?, need(a.p, "--p")?, a.theta.unwrap_or(0.5), t_end),
        None => return Err(CliError::Config("flow needs a kind: linear or pme".into())),
    };
    if let Some(init) = &a.init {
        cfg = cfg.with_initial(config::parse_initial(init)?);
    }
    cfg.dt = a.dt;
    cfg.snapshot_stride = a.snapshot_stride;
    if let Some(s) = a.audit_stride {
        cfg = cfg.with_audit_stride(s);
    }
    if let Some(s) = a.scheme {
        cfg = cfg.with_scheme(match s {
            SchemeArg::Bdf2 => TimeScheme::Bdf2,
            SchemeArg::ImplicitEuler => TimeScheme::ImplicitEuler,
        });
    }
    Ok(cfg)
}

fn cmd_flow(a: &FlowArgs) -> Result<u8, CliError> {
    let cfg = flow_config(a)?;
    let grid = a.grid.build()?;
    let mut trace = flows::run(&cfg, &grid)?;
    trace.config = Some(serde_json::to_value(FlowArgs { trace: None, ..a.clone() }).expect("flow args serialize"));
    if let Some(path) = &a.trace {
        std::fs::write(path, trace.to_csv(true)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    let last = trace.rows.last().expect("a run has at least one snapshot");
    let label = match cfg.kind {
        FlowKind::Linear { p } => format!("linear p={p}"),
        FlowKind::Pme { m, p, theta } => format!("pme m={m} p={p} theta={theta}"),
    };
    println!(
        "{label}: t={} E={:.6e} I={:.6e} K={:.6e} mass_drift={:.2e} clamps={} snapshots={}",
        last.t,
        last.e,
        last.i,
        last.k,
        trace.mass_drift(),
        trace.clamp_count,
        trace.rows.len()
    );
    Ok(0)
}

fn cmd_region(a: &RegionArgs) -> Result<u8, CliError> {
    let thetas: Vec<f64> = match (&a.theta, a.from_p) {
        (_, Some(p0)) => vec![criteria::theta_from_p(p0)?],
        (Some(list), None) => list.split(',').map(|t| config::parse_f64(t, "--theta")).collect::<Result<_, _>>()?,
        (None, None) => return Err(CliError::Config("region needs --theta or --from-p".into())),
    };
    let seed = a.seed.unwrap_or(0);
    let samples = a.samples.unwrap_or(10_000);
    let reports = parallel_map(&thetas, a.jobs.unwrap_or(1), |&t| criteria::region_report(t, samples, seed));
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let membership: Vec<_> = match (a.m, a.p) {
        (Some(m), Some(p)) => thetas
            .iter()
            .map(|&theta| {
                let margin = criteria::ellipse_margin(m, p, theta);
                json!({ "m": m, "p": p, "theta": theta, "margin": margin, "in_ellipse": margin < 0.0 })
            })
            .collect(),
        _ => vec![],
    };
    let outside = membership.iter().any(|v| v["in_ellipse"] == json!(false));
    let text = to_json(&json!({ "seed": seed, "samples": samples, "reports": reports, "membership": membership }));
    print!("{text}");
    config::write_output(&a.output, &text)?;
    Ok(if outside { 4 } else { 0 })
}

fn cmd_constants(a: &ConstantsArgs) -> Result<u8, CliError> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Config(format!("constants needs {flag}")));
    let (m, p) = (need(a.m, "--m")?, need(a.p, "--p")?);
    let theta = match (a.theta, a.from_p) {
        (_, Some(p0)) => criteria::theta_from_p(p0)?,
        (Some(t), None) => t,
        (None, None) => return Err(CliError::Config("constants needs --theta or --from-p".into())),
    };
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(CliError::Config(format!("theta must lie in (0, 1], got {theta}")));
    }
    let grid = if a.lambda1.is_none() || a.e0.is_none() { Some(a.grid.build()?) } else { None };
    let (lambda1, lambda_source) = match a.lambda1 {
        Some(l) => (l, "flag"),
        None => (spectrum::lambda1_pme(theta, grid.as_ref().expect("grid built"))?.lambda, "computed"),
    };
    let params = match PmeParams::new(m, p) {
        Ok(params) => params,
        Err(e) => {
            // exponents undefined: report what can still be decided
            let margin = criteria::ellipse_margin(m, p, theta);
            let q = (p + 3.0 * (m - 1.0)) / (p + 2.0 * (m - 1.0));
            let hyp = Hypotheses { in_ellipse: margin < 0.0, q_in_range: q > 1.0 && q < 4.0 / 3.0, lambda1_positive: lambda1 > 0.0 };
            let text = to_json(&json!({
                "config": a, "m": m, "p": p, "theta": theta, "lambda1": lambda1, "lambda1_source": lambda_source,
                "ellipse_margin": margin, "q": q, "hypotheses": hyp, "all_hold": false, "error": e.to_string(),
            }));
            print!("{text}");
            config::write_output(&a.output, &text)?;
            return if hyp.all() { Err(e.into()) } else { Ok(4) };
        }
    };
    let (e0, e0_source) = match a.e0 {
        Some(e) => (e, "flag"),
        None => {
            let grid = grid.as_ref().expect("grid built");
            let init = config::parse_initial(a.init.as_deref().unwrap_or("bump:0.3"))?;
            let v = init.realize(grid)?;
            (functionals::pme_functionals(&params, &v, grid)?.e, "computed")
        }
    };
    let k = PmeConstants::evaluate(&params, theta, lambda1, e0);
    let text = to_json(&json!({
        "config": a, "lambda1_source": lambda_source, "e0_source": e0_source,
        "constants": k, "all_hold": k.hypotheses.all(),
    }));
    print!("{text}");
    config::write_output(&a.output, &text)?;
    Ok(if k.hypotheses.all() { 0 } else { 4 })
}

/// Grid flags from the trace's recorded configuration, overridden by any given flags.
fn report_grid(a: &ReportArgs, trace: &Trace) -> Result<Grid, CliError> {
    let recorded: GridArgs = trace
        .config
        .as_ref()
        .and_then(|c| serde_json::from_value(c.clone()).ok())
        .unwrap_or_default();
    let g = GridArgs {
        potential: a.grid.potential.clone().or(recorded.potential),
        domain: a.grid.domain.clone().or(if a.grid.radial.is_some() { None } else { recorded.domain }),
        radial: a.grid.radial.clone().or(if a.grid.domain.is_some() { None } else { recorded.radial }),
        n: a.grid.n.or(recorded.n),
    };
    let grid = g.build()?;
    if trace.grid_hash != grid.identity_hash() {
        return Err(CliError::Config(format!(
            "trace grid hash {:016x} does not match the reconstructed grid {:016x}",
            trace.grid_hash,
            grid.identity_hash()
        )));
    }
    Ok(grid)
}

fn retolerate(mut v: Verdict, tol: f64) -> Verdict {
    v.tolerance = tol;
    v.pass = v.worst_violation >= -tol;
    v
}

fn cmd_report(a: &ReportArgs) -> Result<u8, CliError> {
    let path = a.trace.as_ref().ok_or_else(|| CliError::Config("report needs --trace".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let trace = Trace::from_csv(&text)?;
    let first = *trace.rows.first().ok_or_else(|| CliError::Config("trace has no rows".into()))?;
    let grid = report_grid(a, &trace)?;
    let tol = config::tolerance(SLACK_TOLERANCE)?;
    let seed = a.seed.unwrap_or(0);

    let applicable: &[&str] = match trace.flow.kind {
        FlowKind::Linear { p } if p > 1.0 && p < 2.0 => &["mass", "envelope", "dissipation", "refined", "poincare"],
        FlowKind::Linear { p } if p > 1.0 => &["mass", "envelope", "dissipation", "poincare"],
        FlowKind::Linear { .. } => &["mass", "envelope", "dissipation"],
        FlowKind::Pme { .. } => &["mass", "envelope", "lemma", "dissipation"],
    };
    let checks: Vec<String> = match &a.checks {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => applicable.iter().map(|s| s.to_string()).collect(),
    };
    for c in &checks {
        if !applicable.contains(&c.as_str()) {
            return Err(CliError::Config(format!("check {c:?} does not apply to this trace; choose from {applicable:?}")));
        }
    }

    // (t ↦ E bound, t ↦ I bound) when the envelopes are available
    type Envelope = Box<dyn Fn(f64) -> f64>;
    let mut envelopes: Option<(Envelope, Envelope)> = None;
    let mut verdicts = Vec::new();
    let mut chain: Option<PmeConstants> = None;
    match trace.flow.kind {
        FlowKind::Linear { p } => {
            let lambda = spectrum::lambda1_linear(p, &grid)?.lambda;
            let (e0, i0) = (first.e, first.i);
            envelopes = Some((
                Box::new(move |t| criteria::envelope_exponential(e0, lambda, t)),
                Box::new(move |t| criteria::envelope_exponential(i0, lambda, t)),
            ));
        }
        FlowKind::Pme { m, p, theta } => {
            let lambda = spectrum::lambda1_pme(theta, &grid)?.lambda;
            match criteria::constants_chain(m, p, theta, lambda, first.e) {
                Ok(k) => {
                    let (i0, kappa) = (first.i, k.kappa);
                    envelopes = Some((
                        Box::new(move |t| criteria::envelope_pme(i0, kappa, t).1),
                        Box::new(move |t| criteria::envelope_pme(i0, kappa, t).0),
                    ));
                    chain = Some(k);
                }
                Err(e) => verdicts.push(Verdict::new("constants", -1.0, None, tol).with_note(e.to_string())),
            }
        }
    }

    for check in &checks {
        match check.as_str() {
            "mass" => verdicts.push(Verdict::new("mass_drift", -trace.mass_drift(), None, MASS_TOLERANCE)),
            "envelope" => {
                if let Some((env_e, env_i)) = &envelopes {
                    verdicts.push(retolerate(verify::check_envelope(&trace, env_e.as_ref(), Column::E, tol), tol));
                    verdicts.push(retolerate(verify::check_envelope(&trace, env_i.as_ref(), Column::I, tol), tol));
                }
            }
            "dissipation" => verdicts.push(verify::dissipation_audit(&trace, verify::spatial_allowance(&grid))?),
            "refined" => {
                let FlowKind::Linear { p } = trace.flow.kind else { unreachable!("filtered above") };
                if trace.fields.is_empty() {
                    return Err(CliError::Config("refined check needs stored fields in the trace".into()));
                }
                let alpha = (2.0 - p) / p;
                let eps = a.epsilon.unwrap_or((1.0 - alpha) / (2.0 * alpha));
                verdicts.push(retolerate(verify::refined_inequality_audit(&trace, &grid, eps)?, tol));
            }
            "poincare" => {
                let FlowKind::Linear { p } = trace.flow.kind else { unreachable!("filtered above") };
                let lambda = spectrum::lambda1_linear(p, &grid)?.lambda;
                let o = verify::poincare_test(p, lambda, &grid, a.trials.unwrap_or(100), seed)?;
                verdicts.push(retolerate(o.main, tol));
                verdicts.push(retolerate(o.weak, tol));
            }
            "lemma" => {
                if let Some(k) = &chain {
                    let mut worst = f64::INFINITY;
                    let mut at = None;
                    for r in &trace.rows {
                        let c = criteria::lemma_functional_check(k.m, k.p, k.theta, k.lambda1, Functionals { e: r.e, i: r.i, k: r.k })?;
                        if c.relative_slack < worst {
                            worst = c.relative_slack;
                            at = Some(r.t);
                        }
                    }
                    verdicts.push(Verdict::new("lemma", worst, at, tol));
                }
            }
            _ => unreachable!("filtered above"),
        }
    }

    if let Some(plot_path) = &a.plot {
        let pts = |f: &dyn Fn(&entroflow::TraceRow) -> f64| trace.rows.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
        let mut series = vec![
            Series { label: "E".into(), color: "#1f77b4", dashed: false, points: pts(&|r| r.e) },
            Series { label: "I".into(), color: "#d62728", dashed: false, points: pts(&|r| r.i) },
        ];
        if let Some((env_e, env_i)) = &envelopes {
            series.push(Series { label: "E bound".into(), color: "#1f77b4", dashed: true, points: pts(&|r| env_e(r.t)) });
            series.push(Series { label: "I bound".into(), color: "#d62728", dashed: true, points: pts(&|r| env_i(r.t)) });
        }
        let svg = plot::log_plot(&format!("{} ({})", path.display(), checks.join(", ")), &series);
        std::fs::write(plot_path, svg).map_err(|e| CliError::Config(format!("{}: {e}", plot_path.display())))?;
    }

    eprintln!("seed {seed}, tolerance {tol:e}");
    let text = to_json(&verdicts);
    print!("{text}");
    config::write_output(&a.output, &text)?;
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    Ok(if failed == 0 { 0 } else { (4 + failed).min(MAX_EXIT) as u8 })
}
