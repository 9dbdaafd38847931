//! Confinement potentials `F` with closed-form derivatives.
//!
//! A potential defines the reference measure `dγ = e^{-F} dx`. Every family
//! returns `F`, `F'` and `F''` exactly; tabulated potentials must carry their
//! own derivative columns. Radial use evaluates at `x = r > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridKind};

/// Value and first two derivatives of `F` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `F = x²/2`.
    Harmonic,
    /// `F = x²/2 + ε log|x|`.
    HarmonicLog { epsilon: f64 },
    /// `F = |x|^β / β`.
    Power { beta: f64 },
    /// `F ≡ 0`.
    Flat,
    /// Piecewise-linear interpolation of tabulated `F`, `F'`, `F''`.
    Tabulated {
        x: Vec<f64>,
        f: Vec<f64>,
        df: Vec<f64>,
        d2f: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    family: Family,
    #[serde(default = "default_dim")]
    dim: usize,
}

fn default_dim() -> usize {
    1
}

impl Potential {
    pub fn harmonic() -> Self {
        Self { family: Family::Harmonic, dim: 1 }
    }

    pub fn flat() -> Self {
        Self { family: Family::Flat, dim: 1 }
    }

    /// `ε ∈ (0, d)` with `d ≥ 3`; outside that range `e^{-F}` is not a finite measure.
    pub fn harmonic_log(epsilon: f64, dim: usize) -> Result<Self> {
        let p = Self { family: Family::HarmonicLog { epsilon }, dim };
        p.validate()?;
        Ok(p)
    }

    /// `β ∈ (1, 2]`; `β = 2` is the harmonic case.
    pub fn power(beta: f64) -> Result<Self> {
        let p = Self { family: Family::Power { beta }, dim: 1 };
        p.validate()?;
        Ok(p)
    }

    pub fn tabulated(x: Vec<f64>, f: Vec<f64>, df: Vec<f64>, d2f: Vec<f64>) -> Result<Self> {
        let p = Self { family: Family::Tabulated { x, f, df, d2f }, dim: 1 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        self.dim = dim;
        self.validate()?;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        match &self.family {
            Family::HarmonicLog { epsilon } => {
                if self.dim < 3 {
                    return Err(Error::Parameter(format!(
                        "harmonic_log needs d >= 3, got d = {}",
                        self.dim
                    )));
                }
                if !(*epsilon > 0.0 && *epsilon < self.dim as f64) {
                    return Err(Error::Parameter(format!(
                        "harmonic_log needs epsilon in (0, {}), got {epsilon}",
                        self.dim
                    )));
                }
            }
            Family::Power { beta } => {
                if !(*beta > 1.0 && *beta <= 2.0) {
                    return Err(Error::Parameter(format!("power needs beta in (1, 2], got {beta}")));
                }
            }
            Family::Tabulated { x, f, df, d2f } => {
                if x.len() < 2 || f.len() != x.len() || df.len() != x.len() || d2f.len() != x.len() {
                    return Err(Error::Parameter(
                        "tabulated potential needs equal-length x, F, F', F'' columns (>= 2 rows)".into(),
                    ));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Parameter("tabulated x must be strictly increasing".into()));
                }
                if f.iter().chain(df).chain(d2f).any(|v| !v.is_finite()) {
                    return Err(Error::Parameter("tabulated potential has non-finite entries".into()));
                }
            }
            Family::Harmonic | Family::Flat => {}
        }
        Ok(())
    }

    /// Whether the family is undefined at `x = 0`.
    pub fn singular_at_origin(&self) -> bool {
        match self.family {
            Family::HarmonicLog { .. } => true,
            Family::Power { beta } => beta < 2.0,
            _ => false,
        }
    }

    pub fn eval(&self, x: f64) -> Result<Derivs> {
        match &self.family {
            Family::Harmonic => Ok(Derivs { f: 0.5 * x * x, df: x, d2f: 1.0 }),
            Family::Flat => Ok(Derivs { f: 0.0, df: 0.0, d2f: 0.0 }),
            Family::HarmonicLog { epsilon } => {
                if x == 0.0 {
                    return Err(Error::DomainError { x, reason: "log|x| is singular".into() });
                }
                Ok(Derivs {
                    f: 0.5 * x * x + epsilon * x.abs().ln(),
                    df: x + epsilon / x,
                    d2f: 1.0 - epsilon / (x * x),
                })
            }
            Family::Power { beta } => {
                let beta = *beta;
                let r = x.abs();
                if r == 0.0 && beta < 2.0 {
                    return Err(Error::DomainError {
                        x,
                        reason: "|x|^(beta-2) is singular".into(),
                    });
                }
                Ok(Derivs {
                    f: r.powf(beta) / beta,
                    df: x.signum() * r.powf(beta - 1.0),
                    d2f: (beta - 1.0) * r.powf(beta - 2.0),
                })
            }
            Family::Tabulated { x: xs, f, df, d2f } => {
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    return Err(Error::DomainError { x, reason: "outside the tabulated range".into() });
                }
                let j = match xs.binary_search_by(|v| v.total_cmp(&x)) {
                    Ok(j) => return Ok(Derivs { f: f[j], df: df[j], d2f: d2f[j] }),
                    Err(j) => j.clamp(1, n - 1),
                };
                let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
                let lerp = |c: &[f64]| c[j - 1] + t * (c[j] - c[j - 1]);
                Ok(Derivs { f: lerp(f), df: lerp(df), d2f: lerp(d2f) })
            }
        }
    }
}

/// Closed-form data for the harmonic-plus-logarithm example in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBound {
    /// Largest admissible `ε`: `b − √(b² − (d−2)²)`.
    pub bound: f64,
    /// `ν = p / (2(p−1))`.
    pub nu: f64,
    /// `b = 2ν + d − 2`.
    pub b: f64,
    /// `ν > d/2`, equivalently `p < d/(d−1)`: the constant term alone is positive.
    pub constant_term_positive: bool,
}

impl EpsilonBound {
    /// `a² = 1 − ε(2b − ε)/(d−2)²` for a given `ε`.
    pub fn a_squared(&self, d: usize, epsilon: f64) -> f64 {
        let dm2 = (d as f64 - 2.0).powi(2);
        1.0 - epsilon * (2.0 * self.b - epsilon) / dm2
    }

    /// Lower bound `(d/2) a + ν − (d − ε)/2` on `ν λ₁(p)`, usable when `ε ≤ bound`.
    pub fn scaled_lambda_lower_bound(&self, d: usize, epsilon: f64) -> f64 {
        let a = self.a_squared(d, epsilon).max(0.0).sqrt();
        let d = d as f64;
        0.5 * d * a + self.nu - 0.5 * (d - epsilon)
    }
}

pub fn example1_epsilon_bound(d: usize, p: f64) -> Result<EpsilonBound> {
    if d < 3 {
        return Err(Error::Parameter(format!("need d >= 3, got {d}")));
    }
    if p == 1.0 {
        return Err(Error::Parameter(format!(
            "nu is infinite at p = 1; the admissible epsilon behaves like (d-2)^2 (p-1)/(2p) = {}",
            example1_epsilon_asymptotic(d, p)
        )));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Parameter(format!("need p in (1, 2], got {p}")));
    }
    let nu = p / (2.0 * (p - 1.0));
    let dm2 = d as f64 - 2.0;
    let b = 2.0 * nu + dm2;
    // b - sqrt(b^2 - c^2) rewritten as c^2 / (b + sqrt(b^2 - c^2)) to avoid cancellation for large b
    let root = ((b - dm2) * (b + dm2)).sqrt();
    let bound = dm2 * dm2 / (b + root);
    Ok(EpsilonBound { bound, nu, b, constant_term_positive: nu > 0.5 * d as f64 })
}

/// Small-`(p−1)` order of the admissible `ε`: `(d−2)²(p−1)/(2p)`.
pub fn example1_epsilon_asymptotic(d: usize, p: f64) -> f64 {
    (d as f64 - 2.0).powi(2) * (p - 1.0) / (2.0 * p)
}

/// Hessian infimum `V = inf_ξ (D²F ξ, ξ)` at the grid nodes: `F''` on an
/// interval, `min(F'', F'/r)` for a radial potential in `d ≥ 2`.
pub fn hessian_infimum_v(grid: &Grid) -> Field {
    let radial = grid.dim() >= 2 && matches!(grid.kind(), GridKind::Radial { .. });
    Field::new(
        grid.nodes()
            .iter()
            .zip(grid.derivs())
            .map(|(&r, d)| if radial { d.d2f.min(d.df / r) } else { d.d2f })
            .collect(),
    )
}

/// Flat-measure Schrödinger potential `νV + ¼|DF|² − ½ΔF` obtained from the
/// substitution `u = w e^{-F/2}`; radially `ΔF = F'' + (d−1)F'/r`.
pub fn schrodinger_potential(grid: &Grid, nu: f64) -> Result<Field> {
    if !(nu >= 1.0) {
        return Err(Error::Parameter(format!("need nu >= 1, got {nu}")));
    }
    let v = hessian_infimum_v(grid);
    let k = (grid.dim() - 1) as f64;
    let out: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.derivs())
        .zip(v.iter())
        .map(|((&r, d), &vi)| {
            let lap = if k > 0.0 { d.d2f + k * d.df / r } else { d.d2f };
            nu * vi + 0.25 * d.df * d.df - 0.5 * lap
        })
        .collect();
    if let Some(i) = out.iter().position(|u| !u.is_finite()) {
        return Err(Error::DomainError { x: grid.nodes()[i], reason: "DF or the Laplacian of F is singular".into() });
    }
    Ok(Field::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_values() {
        let d = Potential::harmonic().eval(2.0).unwrap();
        assert_eq!((d.f, d.df, d.d2f), (2.0, 2.0, 1.0));
    }

    #[test]
    fn power_values() {
        let d = Potential::power(1.5).unwrap().eval(4.0).unwrap();
        assert_relative_eq!(d.f, 16.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(d.df, 2.0, epsilon = 1e-14);
        assert_relative_eq!(d.d2f, 0.25, epsilon = 1e-14);
        let m = Potential::power(1.5).unwrap().eval(-4.0).unwrap();
        assert_relative_eq!(m.df, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn harmonic_log_values() {
        let d = Potential::harmonic_log(0.1, 3).unwrap().eval(1.0).unwrap();
        assert_relative_eq!(d.f, 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.df, 1.1, epsilon = 1e-15);
        assert_relative_eq!(d.d2f, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn singular_families_reject_origin() {
        assert!(matches!(
            Potential::power(1.5).unwrap().eval(0.0),
            Err(Error::DomainError { .. })
        ));
        assert!(matches!(
            Potential::harmonic_log(0.5, 3).unwrap().eval(0.0),
            Err(Error::DomainError { .. })
        ));
        assert!(Potential::power(2.0).unwrap().eval(0.0).is_ok());
    }

    #[test]
    fn parameter_ranges() {
        assert!(Potential::harmonic_log(0.1, 2).is_err());
        assert!(Potential::harmonic_log(3.0, 3).is_err());
        assert!(Potential::harmonic_log(0.0, 3).is_err());
        assert!(Potential::power(1.0).is_err());
        assert!(Potential::power(2.5).is_err());
        assert!(Potential::tabulated(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_hits_nodes() {
        let t = Potential::tabulated(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0, 4.0],
            vec![0.0, 2.0, 4.0],
            vec![2.0, 2.0, 2.0],
        )
        .unwrap();
        assert_eq!(t.eval(1.0).unwrap().f, 1.0);
        assert_relative_eq!(t.eval(1.5).unwrap().f, 2.5);
        assert!(t.eval(2.5).is_err());
    }

    #[test]
    fn config_shape() {
        let p: Potential = serde_json::from_str(r#"{"family":"power","beta":1.5}"#).unwrap();
        assert_eq!(p, Potential::power(1.5).unwrap());
        let h: Potential = serde_json::from_str(r#"{"family":"harmonic_log","epsilon":0.1,"dim":3}"#).unwrap();
        assert_eq!(h.dim(), 3);
    }

    #[test]
    fn epsilon_bound_closed_forms() {
        let b = example1_epsilon_bound(3, 2.0).unwrap();
        assert_relative_eq!(b.nu, 1.0);
        assert_relative_eq!(b.b, 3.0);
        assert_relative_eq!(b.bound, 3.0 - 8f64.sqrt(), epsilon = 1e-15);
        assert!(!b.constant_term_positive);
        assert!(b.a_squared(3, b.bound).abs() < 1e-12);

        let b10 = example1_epsilon_bound(10, 2.0).unwrap();
        assert_relative_eq!(b10.bound, 4.0, epsilon = 1e-13);
    }

    #[test]
    fn epsilon_bound_small_p_order() {
        for &pm1 in &[1e-3, 1e-5, 1e-7] {
            let p = 1.0 + pm1;
            let b = example1_epsilon_bound(3, p).unwrap();
            let ratio = b.bound / example1_epsilon_asymptotic(3, p);
            assert!((ratio - 1.0).abs() < 2.0 * pm1 + 1e-9, "ratio {ratio} at p-1 = {pm1}");
            assert!(b.constant_term_positive);
        }
        assert!(matches!(example1_epsilon_bound(3, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn epsilon_bound_increasing_in_p() {
        // b = 2ν + d − 2 falls as p grows, and c²/(b + √(b² − c²)) falls with b.
        for d in 3..8 {
            let mut prev = 0.0;
            for k in 1..=200 {
                let p = 1.0 + k as f64 / 200.0;
                let b = example1_epsilon_bound(d, p).unwrap().bound;
                assert!(b > prev, "d={d} p={p}");
                prev = b;
            }
        }
    }

    #[test]
    fn v_for_builtin_families() {
        let g = Grid::interval(-5.0, 5.0, 101, Potential::harmonic()).unwrap();
        assert!(hessian_infimum_v(&g).iter().all(|&v| v == 1.0));

        let eps = 0.1;
        let r = Grid::radial(3, 12.0, 400, Potential::harmonic_log(eps, 3).unwrap()).unwrap();
        let v = hessian_infimum_v(&r);
        for (x, vi) in r.nodes().iter().zip(v.iter()) {
            assert_relative_eq!(*vi, 1.0 - eps / (x * x), epsilon = 1e-12);
        }

        let pw = Grid::interval(-5.0, 5.0, 100, Potential::power(1.5).unwrap()).unwrap();
        let v = hessian_infimum_v(&pw);
        for (x, vi) in pw.nodes().iter().zip(v.iter()) {
            assert_relative_eq!(*vi, 0.5 / x.abs().sqrt(), epsilon = 1e-12);
            assert!(*vi > 0.0);
        }
    }

    #[test]
    fn v_matches_centered_differences() {
        let pot = Potential::harmonic_log(0.3, 3).unwrap();
        let r = Grid::radial(3, 10.0, 200, pot.clone()).unwrap();
        let v = hessian_infimum_v(&r);
        let h = 1e-4;
        for (x, vi) in r.nodes().iter().zip(v.iter()).skip(5) {
            let f = |y: f64| pot.eval(y).unwrap().f;
            let d2 = (f(x + h) - 2.0 * f(*x) + f(x - h)) / (h * h);
            let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((vi - d2.min(d1 / x)).abs() < 1e-5 * (1.0 + vi.abs()), "r={x}");
        }
    }

    #[test]
    fn schrodinger_potential_recomposes() {
        let g = Grid::interval(-6.0, 6.0, 121, Potential::harmonic()).unwrap();
        let u = schrodinger_potential(&g, 1.0).unwrap();
        for (x, ui) in g.nodes().iter().zip(u.iter()) {
            assert_relative_eq!(*ui, 1.0 + 0.25 * x * x - 0.5, epsilon = 1e-12);
        }

        // the reduced potential displayed for F = |x|^β/β
        let beta = 1.5;
        let nu = 3.0;
        let g = Grid::interval(-6.0, 6.0, 120, Potential::power(beta).unwrap()).unwrap();
        let u = schrodinger_potential(&g, nu).unwrap();
        for (x, ui) in g.nodes().iter().zip(u.iter()) {
            let a = x.abs();
            let expect = (nu - 0.5) * (beta - 1.0) * a.powf(beta - 2.0) + 0.25 * a.powf(2.0 * (beta - 1.0));
            assert_relative_eq!(*ui, expect, max_relative = 1e-12);
        }

        let f = Grid::interval(0.0, 1.0, 32, Potential::flat()).unwrap();
        assert!(schrodinger_potential(&f, 2.0).unwrap().iter().all(|&x| x == 0.0));
        assert!(schrodinger_potential(&f, 0.5).is_err());
    }
}
