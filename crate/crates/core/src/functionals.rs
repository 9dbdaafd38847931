//! Entropy `E`, entropy production `I` and second-order functional `K` for
//! the linear flow `v_t = Δ_g v` and the weighted porous-media flow
//! `v_t = Δ_g v^m`.
//!
//! Linear, `s = v^{p/2}`, `α = (2−p)/p`:
//!
//! ```text
//! E_p = 1/(p−1) ∫ v^p − 1 − p(v−1) dγ      (p = 1: ∫ v log v − (v−1) dγ)
//! I_p = 4/p ∫ |Ds|² dγ
//! K_p = ∫ |Δ_g s|² dγ + α ∫ Δ_g s |Ds|²/s dγ
//! ```
//!
//! Porous media, `v = s^β` with `β = (p/2+m−1)^{-1}` and `α = βm − 1`:
//!
//! ```text
//! E = 1/(m+p−2) ∫ v^{m+p−1} − 1 dγ
//! I = c(m,p) ∫ |Ds|² dγ,  c(m,p) = 4m(m+p−1)/(2m+p−2)²
//! K = ∫ s^{β(m−1)} (|Δ_g s|² + α Δ_g s |Ds|²/s) dγ
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg;

pub const DELTA_FLOOR: f64 = 1e-12;
pub const MASS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub p: f64,
}

impl LinearParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::Parameter(format!("linear functionals need p in [1, 2], got {p}")));
        }
        Ok(Self { p })
    }

    pub fn alpha(&self) -> f64 {
        (2.0 - self.p) / self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmeParams {
    pub m: f64,
    pub p: f64,
}

impl PmeParams {
    /// `m > 0`, `p ∈ (1, 2)` and `m + p ≠ 2`; the endpoints `p = 1, 2` are rejected.
    pub fn new(m: f64, p: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Parameter(format!("need m > 0, got {m}")));
        }
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::Parameter(format!("porous-media functionals need p in (1, 2), got {p}")));
        }
        if (m + p - 2.0).abs() < 1e-12 || 0.5 * p + m - 1.0 <= 0.0 {
            return Err(Error::Parameter(format!("m + p = 2 is degenerate (m = {m}, p = {p})")));
        }
        Ok(Self { m, p })
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.inv_beta()
    }

    /// `1/β = p/2 + m − 1`, grouped so that `m = 1` gives `p/2` bit-exactly.
    pub fn inv_beta(&self) -> f64 {
        0.5 * self.p + (self.m - 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.beta() * self.m - 1.0
    }

    pub fn q(&self) -> f64 {
        let (m, p) = (self.m, self.p);
        (p + 3.0 * (m - 1.0)) / (p + 2.0 * (m - 1.0))
    }

    /// `c(m,p) = 4m(m+p−1)/(2m+p−2)²`; equals `4/p` at `m = 1`.
    pub fn c(&self) -> f64 {
        let (m, p) = (self.m, self.p);
        4.0 * m * (m + p - 1.0) / (2.0 * m + p - 2.0).powi(2)
    }
}

/// One evaluation of the three functionals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Functionals {
    pub e: f64,
    pub i: f64,
    pub k: f64,
}

fn check_nonnegative(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
        Some(node) => Err(Error::NegativeDensity { node, value: v[node] }),
        None => Ok(()),
    }
}

fn check_floor(v: &[f64], floor: f64) -> Result<()> {
    match v.iter().position(|x| !(*x >= floor)) {
        Some(node) => Err(Error::FloorViolation { node, value: v[node], floor }),
        None => Ok(()),
    }
}

fn check_mass(grid: &Grid, v: &[f64]) -> Result<()> {
    let mass = grid.integrate(v);
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::MassNotNormalized { mass });
    }
    Ok(())
}

fn pow(v: &[f64], e: f64) -> Vec<f64> {
    v.iter().map(|&x| if x == 0.0 { 0.0 } else { (e * x.ln()).exp() }).collect()
}

/// `∫ [v^k − 1 − k(v−1)]/(k−1) dγ`, written as `v·expm1((k−1)log v)/(k−1) − (v−1)`
/// so that `k → 1` degrades gracefully; `k = 1` is the `v log v` entropy.
fn bregman_power(grid: &Grid, k: f64, v: &[f64]) -> f64 {
    let km1 = k - 1.0;
    let density = v.iter().map(|&x| {
        if x == 0.0 {
            1.0
        } else if km1 == 0.0 {
            x * x.ln() - (x - 1.0)
        } else {
            x * (km1 * x.ln()).exp_m1() / km1 - (x - 1.0)
        }
    });
    let w = grid.dgamma_weights();
    linalg::sum(density.zip(w).map(|(d, w)| d * w))
}

/// `∫ ρ (|Δ_g s|² + α Δ_g s |Ds|²/s) dγ`, `ρ ≡ 1` when `rho` is `None`.
fn second_order(grid: &Grid, s: &[f64], alpha: f64, rho: Option<&[f64]>) -> f64 {
    let l = grid.apply_delta(s);
    let g = grid.grad_dot_raw(s, s);
    let w = grid.dgamma_weights();
    linalg::sum((0..s.len()).map(|i| {
        let r = rho.map_or(1.0, |r| r[i]);
        w[i] * r * (l[i] * l[i] + alpha * l[i] * g[i] / s[i])
    }))
}

fn dirichlet_energy(grid: &Grid, s: &[f64]) -> f64 {
    grid.integrate(&grid.grad_dot_raw(s, s))
}

pub fn entropy_linear(params: &LinearParams, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_nonnegative(v)?;
    Ok(bregman_power(grid, params.p, v))
}

pub fn fisher_linear(params: &LinearParams, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_nonnegative(v)?;
    let s = pow(v, 0.5 * params.p);
    Ok(4.0 / params.p * dirichlet_energy(grid, &s))
}

pub fn k_linear(params: &LinearParams, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_floor(v, DELTA_FLOOR)?;
    let s = pow(v, 0.5 * params.p);
    Ok(second_order(grid, &s, params.alpha(), None))
}

pub fn linear_functionals(params: &LinearParams, v: &[f64], grid: &Grid) -> Result<Functionals> {
    Ok(Functionals {
        e: entropy_linear(params, v, grid)?,
        i: fisher_linear(params, v, grid)?,
        k: k_linear(params, v, grid)?,
    })
}

pub fn entropy_pme(params: &PmeParams, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_nonnegative(v)?;
    check_mass(grid, v)?;
    // with unit mass ∫ v^k − 1 equals the Bregman form, which is what m = 1 reduces to
    Ok(bregman_power(grid, params.p + (params.m - 1.0), v))
}

pub fn fisher_pme(params: &PmeParams, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_nonnegative(v)?;
    check_mass(grid, v)?;
    let s = pow(v, params.inv_beta());
    Ok(params.c() * dirichlet_energy(grid, &s))
}

pub fn k_pme(params: &PmeParams, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_floor(v, DELTA_FLOOR)?;
    check_mass(grid, v)?;
    let beta = params.beta();
    let s = pow(v, params.inv_beta());
    let rho = pow(&s, beta * (params.m - 1.0));
    Ok(second_order(grid, &s, params.alpha(), Some(&rho)))
}

pub fn pme_functionals(params: &PmeParams, v: &[f64], grid: &Grid) -> Result<Functionals> {
    Ok(Functionals {
        e: entropy_pme(params, v, grid)?,
        i: fisher_pme(params, v, grid)?,
        k: k_pme(params, v, grid)?,
    })
}

/// `∫ |Dz|⁴ dγ` with `z = v^{p/4}`.
pub fn gradient_fourth_moment(p: f64, v: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(v)?;
    check_floor(v, DELTA_FLOOR)?;
    let z = pow(v, 0.25 * p);
    let g = grid.grad_dot_raw(&z, &z);
    Ok(grid.integrate(&g.iter().map(|x| x * x).collect::<Vec<_>>()))
}

/// `(κ ∫|Dw|² + ∫V w²) / ∫ w²`, all in `dγ`.
pub fn rayleigh_quotient(coefficient: f64, potential_v: &[f64], w: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(w)?;
    grid.check(potential_v)?;
    let num = coefficient * dirichlet_energy(grid, w)
        + grid.integrate(&w.iter().zip(potential_v).map(|(a, b)| a * a * b).collect::<Vec<_>>());
    let den = grid.integrate(&w.iter().map(|a| a * a).collect::<Vec<_>>());
    Ok(num / den)
}

/// Rescales `v` to unit `dγ`-mass.
pub fn normalize_mass(grid: &Grid, v: &[f64]) -> Result<Field> {
    grid.check(v)?;
    check_nonnegative(v)?;
    let mass = grid.integrate(v);
    if !(mass > 0.0) {
        return Err(Error::MassNotNormalized { mass });
    }
    Ok(Field::new(v.iter().map(|x| x / mass).collect()))
}
