//! Time integration of `v_t = Δ_g v` and `v_t = Δ_g v^m` with homogeneous
//! Neumann closure.
//!
//! Both flows use the same implicit, conservative stepper: variable-step
//! BDF2 (implicit Euler for the first step or after a step-size cut), or
//! implicit Euler throughout if requested. The discrete `Δ_g` has zero
//! `dγ`-weighted column sums, so each step conserves mass up to round-off.
//! The nonlinear step is solved by damped Newton on tridiagonal Jacobians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{self, Functionals, LinearParams, PmeParams};
use crate::grid::{Field, Grid};
use crate::linalg;
use crate::trace::{StoredField, Trace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowKind {
    Linear { p: f64 },
    /// `θ` only enters the criteria, not the dynamics.
    Pme { m: f64, p: f64, theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    Bdf2,
    ImplicitEuler,
}

/// Initial density before normalization to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum InitialData {
    /// `1 + a φ`, `φ` a Gaussian bump made `dγ`-orthogonal to constants and scaled to `max|φ| = 1`.
    Bump { amplitude: f64, center: f64, width: f64 },
    /// `1 + a φ` with `φ ∝ x e^{-x²/8}`, mean removed, `max|φ| = 1`.
    Odd { amplitude: f64 },
    Constant,
    Values { values: Vec<f64> },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Bump { amplitude: 0.3, center: 0.5, width: 1.0 }
    }
}

impl InitialData {
    pub fn bump(amplitude: f64) -> Self {
        InitialData::Bump { amplitude, center: 0.5, width: 1.0 }
    }

    /// Unit-mass density on `grid`.
    pub fn realize(&self, grid: &Grid) -> Result<Field> {
        let perturb = |a: f64, shape: Field| -> Result<Field> {
            let mean = grid.integrate(&shape);
            let phi: Vec<f64> = shape.iter().map(|x| x - mean).collect();
            let max = phi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if max == 0.0 {
                return Ok(Field::constant(grid, 1.0));
            }
            Ok(Field::new(phi.iter().map(|x| 1.0 + a * x / max).collect()))
        };
        let raw = match self {
            InitialData::Bump { amplitude, center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::Parameter(format!("bump width must be positive, got {width}")));
                }
                perturb(*amplitude, Field::from_fn(grid, |x| (-(x - center).powi(2) / (2.0 * width * width)).exp()))?
            }
            InitialData::Odd { amplitude } => perturb(*amplitude, Field::from_fn(grid, |x| x * (-x * x / 8.0).exp()))?,
            InitialData::Constant => Field::constant(grid, 1.0),
            InitialData::Values { values } => {
                grid.check(values)?;
                Field::new(values.clone())
            }
        };
        functionals::normalize_mass(grid, &raw)
    }
}

fn default_audit_stride() -> usize {
    10
}

fn default_floor() -> f64 {
    functionals::DELTA_FLOOR
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_max_halvings() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    #[serde(flatten)]
    pub kind: FlowKind,
    #[serde(default)]
    pub initial: InitialData,
    pub t_end: f64,
    /// Defaults to `10 h²`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Steps between snapshots; defaults to the largest stride giving at least 200.
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    /// Snapshots between stored density fields.
    #[serde(default = "default_audit_stride")]
    pub audit_stride: usize,
    #[serde(default)]
    pub scheme: TimeScheme,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
}

impl FlowConfig {
    pub fn new(kind: FlowKind, t_end: f64) -> Self {
        Self {
            kind,
            initial: InitialData::default(),
            t_end,
            dt: None,
            snapshot_stride: None,
            audit_stride: default_audit_stride(),
            scheme: TimeScheme::default(),
            floor: default_floor(),
            newton_tol: default_newton_tol(),
            max_halvings: default_max_halvings(),
        }
    }

    pub fn linear(p: f64, t_end: f64) -> Self {
        Self::new(FlowKind::Linear { p }, t_end)
    }

    pub fn pme(m: f64, p: f64, theta: f64, t_end: f64) -> Self {
        Self::new(FlowKind::Pme { m, p, theta }, t_end)
    }

    pub fn with_initial(mut self, initial: InitialData) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = Some(stride);
        self
    }

    pub fn with_audit_stride(mut self, stride: usize) -> Self {
        self.audit_stride = stride;
        self
    }

    /// Evaluates `(E, I, K)` of `v` for this flow's functional family.
    pub fn functionals(&self, v: &[f64], grid: &Grid) -> Result<Functionals> {
        match self.kind {
            FlowKind::Linear { p } => functionals::linear_functionals(&LinearParams::new(p)?, v, grid),
            FlowKind::Pme { m, p, .. } => functionals::pme_functionals(&PmeParams::new(m, p)?, v, grid),
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            FlowKind::Linear { p } => {
                LinearParams::new(p)?;
            }
            FlowKind::Pme { m, p, .. } => {
                PmeParams::new(m, p)?;
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Parameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
            }
        }
        if self.snapshot_stride == Some(0) || self.audit_stride == 0 {
            return Err(Error::Parameter("strides must be at least 1".into()));
        }
        Ok(())
    }

    fn exponent(&self) -> f64 {
        match self.kind {
            FlowKind::Linear { .. } => 1.0,
            FlowKind::Pme { m, .. } => m,
        }
    }
}

/// One implicit step `a v − dt Δ_g(v^m) = rhs`.
struct Stepper<'a> {
    grid: &'a Grid,
    m: f64,
    newton_tol: f64,
}

const MAX_NEWTON: usize = 50;
const MAX_DAMPING: usize = 30;

impl Stepper<'_> {
    fn solve(&self, a: f64, dt: f64, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let (lo, up) = (self.grid.lower(), self.grid.upper());
        let n = rhs.len();
        if self.m == 1.0 {
            let sub: Vec<f64> = lo.iter().map(|c| -dt * c).collect();
            let sup: Vec<f64> = up.iter().map(|c| -dt * c).collect();
            let diag: Vec<f64> = (0..n).map(|i| a + dt * (lo[i] + up[i])).collect();
            return linalg::solve_tridiagonal(&sub, &diag, &sup, rhs);
        }
        let m = self.m;
        let residual = |v: &[f64]| -> Vec<f64> {
            let u: Vec<f64> = v.iter().map(|x| x.powf(m)).collect();
            let lu = self.grid.apply_delta(&u);
            (0..n).map(|i| a * v[i] - dt * lu[i] - rhs[i]).collect()
        };
        let norm = |r: &[f64]| r.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
        let tol = self.newton_tol * norm(rhs).max(1.0);
        let mut v = guess.to_vec();
        let mut r = residual(&v);
        let mut rn = norm(&r);
        for _ in 0..MAX_NEWTON {
            if rn <= tol {
                return Ok(v);
            }
            let du: Vec<f64> = v.iter().map(|x| m * x.powf(m - 1.0)).collect();
            let sub: Vec<f64> = (0..n).map(|i| if i > 0 { -dt * lo[i] * du[i - 1] } else { 0.0 }).collect();
            let sup: Vec<f64> = (0..n).map(|i| if i + 1 < n { -dt * up[i] * du[i + 1] } else { 0.0 }).collect();
            let diag: Vec<f64> = (0..n).map(|i| a + dt * (lo[i] + up[i]) * du[i]).collect();
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let delta = linalg::solve_tridiagonal(&sub, &diag, &sup, &neg)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_DAMPING {
                let trial: Vec<f64> = v.iter().zip(&delta).map(|(x, d)| x + lambda * d).collect();
                if trial.iter().all(|x| *x > 0.0) {
                    let rt = residual(&trial);
                    let rtn = norm(&rt);
                    if rtn < rn || rtn <= tol {
                        v = trial;
                        r = rt;
                        rn = rtn;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::NewtonDiverged { t: f64::NAN, halvings: 0 });
            }
        }
        if rn <= tol {
            Ok(v)
        } else {
            Err(Error::NewtonDiverged { t: f64::NAN, halvings: 0 })
        }
    }

    /// BDF2 with step ratio `ω = dt/dt_prev` when a history is given, implicit Euler otherwise.
    fn step(&self, prev: Option<(&[f64], f64)>, v: &[f64], dt: f64) -> Result<Vec<f64>> {
        match prev {
            Some((vp, dtp)) => {
                let w = dt / dtp;
                let a = (1.0 + 2.0 * w) / (1.0 + w);
                let c1 = 1.0 + w;
                let c2 = w * w / (1.0 + w);
                let rhs: Vec<f64> = v.iter().zip(vp).map(|(x, y)| c1 * x - c2 * y).collect();
                self.solve(a, dt, &rhs, v)
            }
            None => self.solve(1.0, dt, v, v),
        }
    }
}

/// Largest step ratio for which variable-step BDF2 is used; above it the
/// history is dropped and an implicit Euler step restarts the scheme.
const MAX_STEP_RATIO: f64 = 2.0;

/// Integrates the flow described by `config` and records its trace.
pub fn run(config: &FlowConfig, grid: &Grid) -> Result<Trace> {
    config.validate()?;
    let dt_nominal = config.dt.unwrap_or(10.0 * grid.spacing().powi(2));
    let steps = ((config.t_end / dt_nominal) - 1e-9).ceil().max(1.0) as usize;
    let dt = config.t_end / steps as f64;
    let stride = config.snapshot_stride.unwrap_or((steps / 200).max(1));
    let stepper = Stepper { grid, m: config.exponent(), newton_tol: config.newton_tol };
    let bdf2 = config.scheme == TimeScheme::Bdf2;

    let mut v = config.initial.realize(grid)?.into_inner();
    let mut history: Option<(Vec<f64>, f64)> = None;
    let mut trace = Trace {
        flow: config.clone(),
        config: None,
        grid_hash: grid.identity_hash(),
        rows: Vec::new(),
        fields: Vec::new(),
        clamp_count: 0,
    };
    let snapshot = |trace: &mut Trace, t: f64, v: &[f64], last: bool| -> Result<()> {
        let f = config.functionals(v, grid)?;
        let row = trace.rows.len();
        trace.rows.push(TraceRow {
            t,
            e: f.e,
            i: f.i,
            k: f.k,
            mass: grid.integrate(v),
            min_v: v.iter().copied().fold(f64::INFINITY, f64::min),
        });
        if row.is_multiple_of(config.audit_stride) || last {
            trace.fields.push(StoredField { row, v: v.to_vec() });
        }
        Ok(())
    };
    snapshot(&mut trace, 0.0, &v, false)?;

    for n in 0..steps {
        let t = n as f64 * dt;
        let mut halvings = 0;
        let (v_new, new_history) = loop {
            match advance(&stepper, bdf2, history.as_ref(), &v, dt, halvings) {
                Ok(out) => break out,
                Err(Error::NewtonDiverged { .. }) | Err(Error::LinearSolveFailure(_)) if halvings < config.max_halvings => {
                    halvings += 1;
                }
                Err(Error::NewtonDiverged { .. }) | Err(Error::LinearSolveFailure(_)) => {
                    return Err(Error::NewtonDiverged { t, halvings });
                }
                Err(e) => return Err(e),
            }
        };
        v = v_new;
        for x in v.iter_mut() {
            if *x < config.floor {
                *x = config.floor;
                trace.clamp_count += 1;
            }
        }
        history = new_history;
        let last = n + 1 == steps;
        if (n + 1) % stride == 0 || last {
            // recompute t from the step index so snapshot times never drift
            snapshot(&mut trace, (n + 1) as f64 * dt, &v, last)?;
        }
    }
    Ok(trace)
}

/// One nominal step of size `dt`, split into `2^halvings` equal substeps.
/// Previous state and the step that produced it.
type History = (Vec<f64>, f64);

fn advance(
    stepper: &Stepper,
    bdf2: bool,
    history: Option<&History>,
    v: &[f64],
    dt: f64,
    halvings: usize,
) -> Result<(Vec<f64>, Option<History>)> {
    let parts = 1usize << halvings;
    let h = dt / parts as f64;
    let mut prev: Option<History> = history.filter(|(_, hp)| bdf2 && h / hp <= MAX_STEP_RATIO).cloned();
    let mut cur = v.to_vec();
    for _ in 0..parts {
        let next = stepper.step(prev.as_ref().map(|(p, hp)| (p.as_slice(), *hp)), &cur, h)?;
        prev = if bdf2 { Some((cur, h)) } else { None };
        cur = next;
    }
    Ok((cur, prev))
}

/// Linear flow `v_t = Δ_g v`.
pub fn run_linear(config: &FlowConfig, grid: &Grid) -> Result<Trace> {
    if !matches!(config.kind, FlowKind::Linear { .. }) {
        return Err(Error::Parameter("run_linear needs a linear flow config".into()));
    }
    run(config, grid)
}

/// Weighted porous-media flow `v_t = Δ_g v^m`.
pub fn run_pme(config: &FlowConfig, grid: &Grid) -> Result<Trace> {
    if !matches!(config.kind, FlowKind::Pme { .. }) {
        return Err(Error::Parameter("run_pme needs a porous-media flow config".into()));
    }
    run(config, grid)
}
