//! Pass/fail verdicts over traces and spectral results: envelope checks,
//! exponential rate fits, dissipation-identity audits, the generalized
//! Poincaré inequality and the refined-regime inequalities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::FlowKind;
use crate::functionals::{self, PmeParams};
use crate::grid::{Field, Grid};
use crate::spectrum;
use crate::trace::{Column, Trace};

pub const ENVELOPE_TOLERANCE: f64 = 1e-8;
pub const POINCARE_TOLERANCE: f64 = 1e-8;
/// Dissipation audits allow `DISSIPATION_FACTOR · Δ² · S` relative mismatch, `Δ` the
/// snapshot spacing and `S` the curvature scale of the trace.
pub const DISSIPATION_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// Signed slack; negative means the checked inequality is violated.
    pub worst_violation: f64,
    /// Time or trial index of the worst slack.
    pub location: Option<f64>,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn new(name: impl Into<String>, worst: f64, location: Option<f64>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: worst >= -tolerance,
            worst_violation: worst,
            location,
            tolerance,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Magnitudes below this are treated as rounding noise by [`relative_slack`].
pub const ABSOLUTE_FLOOR: f64 = 1e-14;

/// `(bound − value) / max(|bound|, |value|, ABSOLUTE_FLOOR)`.
pub fn relative_slack(bound: f64, value: f64) -> f64 {
    (bound - value) / bound.abs().max(value.abs()).max(ABSOLUTE_FLOOR)
}

/// Tracks the minimum slack and where it occurred.
struct Worst(f64, Option<f64>);

impl Worst {
    fn new() -> Self {
        Worst(f64::INFINITY, None)
    }

    fn update(&mut self, slack: f64, at: f64) {
        if slack < self.0 || self.1.is_none() {
            *self = Worst(slack, Some(at));
        }
    }

    fn verdict(self, name: &str, tolerance: f64) -> Verdict {
        let w = if self.1.is_none() { 0.0 } else { self.0 };
        Verdict::new(name, w, self.1, tolerance)
    }
}

/// Worst relative slack of `envelope(t) − value(t)` over the trace.
pub fn check_envelope(trace: &Trace, envelope: &dyn Fn(f64) -> f64, column: Column, tolerance: f64) -> Verdict {
    let mut worst = Worst::new();
    for r in &trace.rows {
        worst.update(relative_slack(envelope(r.t), column.of(r)), r.t);
    }
    worst.verdict(&format!("envelope_{}", column.name()), tolerance)
}

/// Least-squares slope of `−log y` against `t` on `window`.
pub fn fit_exponential_rate_series(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 10 {
        return Err(Error::WindowTooShort(pts.len()));
    }
    if let Some(&(t, value)) = pts.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::NonPositiveData { t, value });
    }
    Ok(-least_squares_slope(pts.iter().map(|&(t, y)| (t, y.ln()))))
}

pub fn fit_exponential_rate(trace: &Trace, column: Column, window: (f64, f64)) -> Result<f64> {
    fit_exponential_rate_series(&trace.times(), &trace.column(column), window)
}

fn least_squares_slope(pts: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let n = pts.clone().count() as f64;
    let (mx, my) = pts.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.clone().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of `log y` against `log x`, for power-law scaling checks.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::WindowTooShort(x.len().min(y.len())));
    }
    if let Some((t, value)) = x.iter().zip(y).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(Error::NonPositiveData { t: *t, value: *value });
    }
    Ok(least_squares_slope(x.iter().zip(y).map(|(x, y)| (x.ln(), y.ln()))))
}

/// Worst residuals of the summation-by-parts identity
/// `∫u Δ_g v dγ = −∫Du·Dv dγ` and of `∫u Δ_g v = ∫v Δ_g u`, relative to
/// `∫|Du||Dv|`-type scales, over `fields` seeded random pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureCheck {
    pub sbp: f64,
    pub self_adjoint: f64,
}

pub fn structure_check(grid: &Grid, fields: usize, seed: u64) -> Result<StructureCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = StructureCheck { sbp: 0.0, self_adjoint: 0.0 };
    for _ in 0..fields {
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lv = grid.delta_g(&v)?;
        let lu = grid.delta_g(&u)?;
        let ulv = grid.integrate(&u.iter().zip(lv.iter()).map(|(a, b)| a * b).collect::<Vec<_>>());
        let vlu = grid.integrate(&v.iter().zip(lu.iter()).map(|(a, b)| a * b).collect::<Vec<_>>());
        let scale = (grid.dirichlet(&u, &u)? * grid.dirichlet(&v, &v)?).sqrt().max(f64::MIN_POSITIVE);
        out.sbp = out.sbp.max((ulv + grid.dirichlet(&u, &v)?).abs() / scale);
        out.self_adjoint = out.self_adjoint.max((ulv - vlu).abs() / scale);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareOutcome {
    /// Constant `2/λ₁(p)`.
    pub main: Verdict,
    /// Constant `2/((p−1)λ₁(2))`.
    pub weak: Verdict,
    pub trials: usize,
}

/// Both sides of `(1/(p−1))[∫u² − (∫|u|^{2/p})^p] ≤ C ∫|Du|²`, all in `dγ`.
pub fn poincare_sides(p: f64, u: &[f64], grid: &Grid) -> Result<(f64, f64)> {
    grid.check(u)?;
    let l2 = grid.integrate(&u.iter().map(|x| x * x).collect::<Vec<_>>());
    let lq = grid.integrate(&u.iter().map(|x| x.abs().powf(2.0 / p)).collect::<Vec<_>>());
    Ok(((l2 - lq.powf(p)) / (p - 1.0), grid.dirichlet(u, u)?))
}

/// Seeded trial fields: the `λ₁(p)` ground state, `1 + ½φ₁` with `φ₁` the
/// first non-constant eigenfunction of `Δ_g`, then random mixtures of up to
/// five Gaussian bumps and low-frequency cosines clipped to be positive.
pub fn poincare_trials(p: f64, grid: &Grid, trials: usize, seed: u64) -> Result<Vec<Field>> {
    let mut out = Vec::with_capacity(trials);
    out.push(spectrum::lambda1_linear(p, grid)?.eigenvector_field());
    if trials > 1 {
        let phi = spectrum::spectral_gap(grid)?.eigenvector;
        let max = phi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        out.push(Field::new(phi.iter().map(|x| 1.0 + 0.5 * x / max).collect()));
    }
    // bulk of the measure: the 1%–99% quantiles of dγ
    let w = grid.dgamma_weights();
    let mut acc = 0.0;
    let (mut lo, mut hi) = (grid.nodes()[0], grid.nodes()[grid.len() - 1]);
    let mut found_lo = false;
    for (x, wi) in grid.nodes().iter().zip(w) {
        acc += wi;
        if !found_lo && acc >= 0.01 {
            lo = *x;
            found_lo = true;
        }
        if acc <= 0.99 {
            hi = *x;
        }
    }
    let span = (hi - lo).max(grid.spacing());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < trials {
        let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=5))
            .map(|_| (rng.gen_range(-1.0..1.0), lo + span * rng.gen::<f64>(), span * rng.gen_range(0.05..0.5)))
            .collect();
        let waves: Vec<(f64, f64)> = (1..=3).map(|k| (rng.gen_range(-0.5..0.5), k as f64)).collect();
        let base = rng.gen_range(0.5..2.0);
        out.push(Field::from_fn(grid, |x| {
            let b: f64 = bumps.iter().map(|(a, c, s)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum();
            let c: f64 = waves.iter().map(|(a, k)| a * (k * std::f64::consts::PI * (x - lo) / span).cos()).sum();
            (base + b + c).max(0.05)
        }));
    }
    Ok(out)
}

/// Generalized Poincaré inequality with constant `2/λ₁(p)` over seeded
/// trials, and the weaker form with `(p−1)λ₁(2)` in place of `λ₁(p)`.
pub fn poincare_test(p: f64, lambda1: f64, grid: &Grid, trials: usize, seed: u64) -> Result<PoincareOutcome> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Parameter(format!("poincare_test needs p in (1, 2], got {p}")));
    }
    if !(lambda1 > 0.0) {
        return Err(Error::NonpositiveLambda(lambda1));
    }
    let lambda2 = spectrum::lambda1_linear(2.0, grid)?.lambda;
    let fields = poincare_trials(p, grid, trials.max(1), seed)?;
    let mut main = Worst::new();
    let mut weak = Worst::new();
    for (k, u) in fields.iter().enumerate() {
        // normalize ∫|u|^{2/p} = 1
        let norm = grid.integrate(&u.iter().map(|x| x.abs().powf(2.0 / p)).collect::<Vec<_>>()).powf(0.5 * p);
        let u: Vec<f64> = if norm > 0.0 { u.iter().map(|x| x / norm).collect() } else { u.to_vec() };
        let (lhs, grad) = poincare_sides(p, &u, grid)?;
        main.update(relative_slack(2.0 / lambda1 * grad, lhs), k as f64);
        weak.update(relative_slack(2.0 / ((p - 1.0) * lambda2) * grad, lhs), k as f64);
    }
    Ok(PoincareOutcome {
        main: main.verdict("poincare", POINCARE_TOLERANCE),
        weak: weak.verdict("poincare_weak", POINCARE_TOLERANCE),
        trials: fields.len(),
    })
}

/// Default spatial allowance for [`dissipation_audit`]: `16 h²`.
pub fn spatial_allowance(grid: &Grid) -> f64 {
    16.0 * grid.spacing() * grid.spacing()
}

/// Signed relative mismatches of the dissipation identities at interior snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationMismatch {
    pub times: Vec<f64>,
    /// `(dE/dt + I) / I`.
    pub entropy: Vec<f64>,
    /// `(dI/dt + c_K K) / (c_K K)`, `c_K = 8/p` (linear) or `2m c(m,p)` (porous media).
    pub fisher: Vec<f64>,
    /// Largest snapshot spacing.
    pub spacing: f64,
    /// `max(1, max |Ï|/I)` from second differences; the centered-difference
    /// error of either identity is about `Δ² S / 6`.
    pub curvature: f64,
}

impl DissipationMismatch {
    pub fn max_abs(&self) -> f64 {
        self.entropy.iter().chain(&self.fisher).fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn three_point_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    (-h2 / (h1 * (h1 + h2))) * y[0] + ((h2 - h1) / (h1 * h2)) * y[1] + (h1 / (h2 * (h1 + h2))) * y[2]
}

pub fn dissipation_mismatch(trace: &Trace) -> Result<DissipationMismatch> {
    let rows = &trace.rows;
    if rows.len() < 3 {
        return Err(Error::WindowTooShort(rows.len()));
    }
    let ck = match trace.flow.kind {
        FlowKind::Linear { p } => 8.0 / p,
        FlowKind::Pme { m, p, .. } => 2.0 * m * PmeParams::new(m, p)?.c(),
    };
    let mut out = DissipationMismatch { times: vec![], entropy: vec![], fisher: vec![], spacing: 0.0, curvature: 1.0 };
    for w in rows.windows(2) {
        out.spacing = out.spacing.max(w[1].t - w[0].t);
    }
    for w in rows.windows(3) {
        let t = [w[0].t, w[1].t, w[2].t];
        let de = three_point_derivative(t, [w[0].e, w[1].e, w[2].e]);
        let di = three_point_derivative(t, [w[0].i, w[1].i, w[2].i]);
        let (i, k) = (w[1].i, ck * w[1].k);
        let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
        let d2 = 2.0 * ((w[2].i - w[1].i) / h2 - (w[1].i - w[0].i) / h1) / (h1 + h2);
        out.curvature = out.curvature.max(d2.abs() / i.abs().max(ABSOLUTE_FLOOR));
        out.times.push(t[1]);
        out.entropy.push((de + i) / i.abs().max(ABSOLUTE_FLOOR));
        out.fisher.push((di + k) / k.abs().max(ABSOLUTE_FLOOR));
    }
    Ok(out)
}

/// `dE/dt = −I` and the Fisher identity, checked to `5Δ²S + spatial_allowance`
/// relative mismatch. The allowance absorbs the `O(h²)` chain-rule defect of
/// the spatial discretization, which does not vanish as `Δ → 0`.
pub fn dissipation_audit(trace: &Trace, spatial_allowance: f64) -> Result<Verdict> {
    let mm = dissipation_mismatch(trace)?;
    let tol = DISSIPATION_FACTOR * mm.spacing * mm.spacing * mm.curvature + spatial_allowance;
    let mut worst = Worst::new();
    for (k, &t) in mm.times.iter().enumerate() {
        worst.update(-mm.entropy[k].abs().max(mm.fisher[k].abs()), t);
    }
    Ok(worst.verdict("dissipation", tol))
}

/// Observed orders of the two identities from traces at snapshot spacings
/// `Δ, Δ/2, Δ/4` (same grid, same snapshot times):
/// `log₂(‖r_Δ − r_{Δ/2}‖ / ‖r_{Δ/2} − r_{Δ/4}‖)` on the signed mismatches. The
/// differences cancel the time-independent spatial part of the mismatch.
pub fn dissipation_orders(coarse: &Trace, mid: &Trace, fine: &Trace) -> Result<(f64, f64)> {
    let [a, b, c] = [coarse, mid, fine].map(dissipation_mismatch);
    let (a, b, c) = (a?, b?, c?);
    let at = |m: &DissipationMismatch, t: f64| m.times.iter().position(|s| (s - t).abs() < 1e-9 * t.max(1.0));
    let mut d1 = (0.0_f64, 0.0_f64);
    let mut d2 = (0.0_f64, 0.0_f64);
    let mut common = 0;
    for (ia, &t) in a.times.iter().enumerate() {
        if let (Some(ib), Some(ic)) = (at(&b, t), at(&c, t)) {
            common += 1;
            d1.0 = d1.0.max((a.entropy[ia] - b.entropy[ib]).abs());
            d2.0 = d2.0.max((b.entropy[ib] - c.entropy[ic]).abs());
            d1.1 = d1.1.max((a.fisher[ia] - b.fisher[ib]).abs());
            d2.1 = d2.1.max((b.fisher[ib] - c.fisher[ic]).abs());
        }
    }
    if common < 3 {
        return Err(Error::WindowTooShort(common));
    }
    Ok(((d1.0 / d2.0).log2(), (d1.1 / d2.1).log2()))
}

/// Snapshot-wise refined inequalities of the linear flow, `z = v^{p/4}`:
///
/// ```text
/// K ≥ 16 (αε/(1+ε)) ∫|Dz|⁴ dγ
/// (p I)² ≤ 4⁴ (1 + (p−1)E) ∫|Dz|⁴ dγ
/// ```
///
/// `E, I, K` are taken from the trace rows and `∫|Dz|⁴` from the stored
/// fields. Both inequalities hold under convexity whatever `λ₁(p)` is; the
/// hypothesis `λ₁(p) = 0` of the refined decay theorem is not checked.
pub fn refined_inequality_audit(trace: &Trace, grid: &Grid, epsilon: f64) -> Result<Verdict> {
    let p = match trace.flow.kind {
        FlowKind::Linear { p } if p > 1.0 && p < 2.0 => p,
        _ => return Err(Error::Parameter("refined audit needs a linear trace with p in (1, 2)".into())),
    };
    let alpha = (2.0 - p) / p;
    let c1 = 16.0 * alpha * epsilon / (1.0 + epsilon);
    let mut worst = Worst::new();
    for f in &trace.fields {
        let r = trace
            .rows
            .get(f.row)
            .ok_or_else(|| Error::TraceFormat(format!("field attached to missing row {}", f.row)))?;
        let dz4 = functionals::gradient_fourth_moment(p, &f.v, grid)?;
        worst.update(relative_slack(r.k, c1 * dz4), r.t);
        worst.update(relative_slack(256.0 * (1.0 + (p - 1.0) * r.e) * dz4, (p * r.i).powi(2)), r.t);
    }
    Ok(worst
        .verdict("refined_inequalities", ENVELOPE_TOLERANCE)
        .with_note("checks the two underlying inequalities; the hypothesis lambda1(p) = 0 is not asserted"))
}
