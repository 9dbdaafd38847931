//! Uniform 1D and radial discretizations carrying the weighted measure
//! `dγ = e^{-F} dx` and a divergence-form `Δ_g = Δ − DF·D`.
//!
//! The discrete operator is built from face conductances
//! `c_{i+½} = |face| g_{i+½} / h` with `g_{i+½} = e^{-(F_i+F_{i+1})/2}`, so
//!
//! ```text
//! Σ_i w_i u_i (Δ_g v)_i = −Σ_e c_e (u_{j}−u_{i})(v_{j}−v_{i})
//! ```
//!
//! holds by construction (summation by parts), `Δ_g` is self-adjoint in
//! `ℓ²(w)` and annihilates constants. Neumann closure: no flux through the
//! outer faces. All weights are formed in log space so that the operator
//! coefficients stay finite even where `e^{-F}` underflows.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::linalg;
use crate::potential::{Derivs, Family, Potential};

pub const MIN_NODES: usize = 16;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    Interval,
    Radial { dim: usize },
}

/// Declarative grid description, as used in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Interval { xl: f64, xr: f64, n: usize },
    Radial { dim: usize, radius: f64, n: usize },
}

impl GridSpec {
    pub fn build(&self, potential: Potential) -> Result<Grid> {
        match *self {
            GridSpec::Interval { xl, xr, n } => Grid::interval(xl, xr, n, potential),
            GridSpec::Radial { dim, radius, n } => Grid::radial(dim, radius, n, potential),
        }
    }
}

/// Node-aligned real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field(vec![c; grid.len()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Field(grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    kind: GridKind,
    potential: Potential,
    nodes: Vec<f64>,
    spacing: f64,
    dx_weights: Vec<f64>,
    derivs: Vec<Derivs>,
    g_values: Vec<f64>,
    dgamma_weights: Vec<f64>,
    log_dgamma: Vec<f64>,
    /// `|face| / h` for the n−1 interior faces.
    face_dx: Vec<f64>,
    /// Normalized dγ conductances `c_e`.
    conductance: Vec<f64>,
    /// `(Δ_g v)_i = lower_i (v_{i−1} − v_i) + upper_i (v_{i+1} − v_i)`.
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn sphere_area(d: usize) -> f64 {
    // |S^{d−1}| = 2 π^{d/2} / Γ(d/2), Γ at half-integers by recursion
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < 0.5 * d as f64 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(0.5 * d as f64) / gamma
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + linalg::sum(xs.iter().map(|x| (x - m).exp())).ln()
}

impl Grid {
    /// Uniform vertex grid on `[xl, xr]` with trapezoid weights.
    pub fn interval(xl: f64, xr: f64, n: usize, potential: Potential) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::DegenerateDomain(n));
        }
        if !(xl < xr) || !xl.is_finite() || !xr.is_finite() {
            return Err(Error::InvalidDomain(format!("need xl < xr, got [{xl}, {xr}]")));
        }
        if potential.dim() != 1 {
            return Err(Error::Parameter(format!(
                "interval grids need a 1D potential, got d = {}",
                potential.dim()
            )));
        }
        let h = (xr - xl) / (n - 1) as f64;
        // centered indexing keeps nodes of a symmetric domain exactly mirror-symmetric
        let mid = 0.5 * (xl + xr);
        let half = 0.5 * (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| mid + (i as f64 - half) * h).collect();
        nodes[0] = xl;
        nodes[n - 1] = xr;
        let mut dx = vec![h; n];
        dx[0] = 0.5 * h;
        dx[n - 1] = 0.5 * h;
        let face_dx = vec![1.0 / h; n - 1];
        Self::assemble(GridKind::Interval, potential, nodes, h, dx, face_dx)
    }

    /// Radial grid on `(0, R]` for a radial potential in `ℝ^d`: nodes
    /// `r_i = (i+½)h` with `h = R/(n−½)`, zero flux at the origin and at `R`.
    /// Fails if the analytic tail-mass bound beyond `R` exceeds `1e-10`.
    pub fn radial(dim: usize, radius: f64, n: usize, potential: Potential) -> Result<Self> {
        Self::radial_with_tolerance(dim, radius, n, potential, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn radial_with_tolerance(
        dim: usize,
        radius: f64,
        n: usize,
        potential: Potential,
        tail_tolerance: f64,
    ) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::DegenerateDomain(n));
        }
        if dim == 0 {
            return Err(Error::Parameter("radial grids need d >= 1".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("need R > 0, got {radius}")));
        }
        let potential = if potential.dim() == dim { potential } else { potential.with_dim(dim)? };
        let h = radius / (n as f64 - 0.5);
        let area = sphere_area(dim);
        let k = (dim - 1) as i32;
        let mut nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        nodes[n - 1] = radius;
        let mut dx: Vec<f64> = nodes.iter().map(|r| area * r.powi(k) * h).collect();
        dx[n - 1] *= 0.5;
        let face_dx: Vec<f64> = (1..n).map(|i| area * (i as f64 * h).powi(k) / h).collect();
        let grid = Self::assemble(GridKind::Radial { dim }, potential, nodes, h, dx, face_dx)?;
        if let Some(tail) = grid.tail_mass() {
            if !(tail <= tail_tolerance) {
                return Err(Error::TailMassTooLarge { tail, tolerance: tail_tolerance });
            }
        }
        Ok(grid)
    }

    fn assemble(
        kind: GridKind,
        potential: Potential,
        nodes: Vec<f64>,
        spacing: f64,
        dx_weights: Vec<f64>,
        face_dx: Vec<f64>,
    ) -> Result<Self> {
        let n = nodes.len();
        let derivs = nodes.iter().map(|&x| potential.eval(x)).collect::<Result<Vec<_>>>()?;
        if let Some((i, d)) = derivs
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.f.is_finite() && d.df.is_finite() && d.d2f.is_finite()))
        {
            return Err(Error::NonFiniteWeight(format!("F is not finite at x = {} ({:?})", nodes[i], d)));
        }
        let g_values: Vec<f64> = derivs.iter().map(|d| (-d.f).exp()).collect();
        if g_values.iter().any(|g| g.is_infinite()) {
            return Err(Error::NonFiniteWeight("e^-F overflows".into()));
        }
        if g_values.iter().all(|&g| g == 0.0) {
            return Err(Error::NonFiniteWeight("e^-F underflows to 0 at every node".into()));
        }

        let log_m: Vec<f64> = dx_weights.iter().zip(&derivs).map(|(w, d)| w.ln() - d.f).collect();
        let log_z = log_sum_exp(&log_m);
        let mut log_dgamma: Vec<f64> = log_m.iter().map(|l| l - log_z).collect();
        let raw: Vec<f64> = log_dgamma.iter().map(|l| l.exp()).collect();
        let total = linalg::sum(raw.iter().copied());
        let dgamma_weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let log_total = total.ln();
        log_dgamma.iter_mut().for_each(|l| *l -= log_total);
        let log_z = log_z + log_total;

        let conductance: Vec<f64> = (0..n - 1)
            .map(|e| face_dx[e] * (-0.5 * (derivs[e].f + derivs[e + 1].f) - log_z).exp())
            .collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for e in 0..n - 1 {
            let df = 0.5 * (derivs[e].f - derivs[e + 1].f);
            upper[e] = face_dx[e] / dx_weights[e] * df.exp();
            lower[e + 1] = face_dx[e] / dx_weights[e + 1] * (-df).exp();
        }
        if lower.iter().chain(&upper).any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteWeight("operator coefficients overflow: F varies too fast between nodes".into()));
        }

        Ok(Self {
            kind,
            potential,
            nodes,
            spacing,
            dx_weights,
            derivs,
            g_values,
            dgamma_weights,
            log_dgamma,
            face_dx,
            conductance,
            lower,
            upper,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Spatial dimension the grid represents (1 for intervals).
    pub fn dim(&self) -> usize {
        match self.kind {
            GridKind::Interval => 1,
            GridKind::Radial { dim } => dim,
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dx_weights(&self) -> &[f64] {
        &self.dx_weights
    }

    pub fn derivs(&self) -> &[Derivs] {
        &self.derivs
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    pub fn dgamma_weights(&self) -> &[f64] {
        &self.dgamma_weights
    }

    pub fn log_dgamma(&self) -> &[f64] {
        &self.log_dgamma
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    pub(crate) fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub(crate) fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::AlignmentMismatch { expected: self.len(), got: v.len() });
        }
        Ok(())
    }

    /// `Σ_i dγ_i f_i`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        linalg::sum(self.dgamma_weights.iter().zip(f).map(|(w, v)| w * v))
    }

    /// `Σ_i dx_i f_i` (flat measure, radial Jacobian included).
    pub fn integrate_dx(&self, f: &[f64]) -> f64 {
        linalg::sum(self.dx_weights.iter().zip(f).map(|(w, v)| w * v))
    }

    pub(crate) fn apply_delta(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = 0.0;
                if i > 0 {
                    r += self.lower[i] * (v[i - 1] - v[i]);
                }
                if i + 1 < n {
                    r += self.upper[i] * (v[i + 1] - v[i]);
                }
                r
            })
            .collect()
    }

    /// Discrete `Δ_g v` with homogeneous Neumann closure.
    pub fn delta_g(&self, v: &[f64]) -> Result<Field> {
        self.check(v)?;
        Ok(Field(self.apply_delta(v)))
    }

    pub(crate) fn grad_dot_raw(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = 0.0;
                if i > 0 {
                    r += self.lower[i] * (u[i - 1] - u[i]) * (v[i - 1] - v[i]);
                }
                if i + 1 < n {
                    r += self.upper[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]);
                }
                0.5 * r
            })
            .collect()
    }

    /// Node field `Du·Dv`: each face's product split evenly between its two nodes,
    /// so `Σ_i dγ_i (Du·Dv)_i` is the discrete Dirichlet form.
    pub fn grad_dot(&self, u: &[f64], v: &[f64]) -> Result<Field> {
        self.check(u)?;
        self.check(v)?;
        Ok(Field(self.grad_dot_raw(u, v)))
    }

    /// Node field `|Dv|²`, consistent with [`Grid::delta_g`].
    pub fn gradient_sq(&self, v: &[f64]) -> Result<Field> {
        self.grad_dot(v, v)
    }

    /// Face-sum Dirichlet form `Σ_e c_e δu_e δv_e`.
    pub fn dirichlet(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(linalg::sum(
            self.conductance.iter().enumerate().map(|(e, c)| c * (u[e + 1] - u[e]) * (v[e + 1] - v[e])),
        ))
    }

    /// Off-diagonal of the `ℓ²(w)`-symmetrized Dirichlet operator. With the
    /// geometric-mean face weight the `g` factors cancel exactly, and the
    /// same entries serve the flat-measure operator.
    pub(crate) fn symmetric_off_diagonal(&self) -> Vec<f64> {
        (0..self.len() - 1)
            .map(|e| -self.face_dx[e] / (self.dx_weights[e] * self.dx_weights[e + 1]).sqrt())
            .collect()
    }

    /// Diagonal of the flat-measure (`dx`) Neumann Laplacian `−Δ`.
    pub(crate) fn flat_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = 0.0;
                if i > 0 {
                    r += self.face_dx[i - 1];
                }
                if i + 1 < n {
                    r += self.face_dx[i];
                }
                r / self.dx_weights[i]
            })
            .collect()
    }

    /// Normalized mass of `e^{-F}` outside the truncated domain, from the
    /// log-concave tail bound `∫_R^∞ f ≤ f(R) / (−(log f)'(R))`.
    /// `None` for tabulated potentials, `+∞` when the density does not decay.
    pub fn tail_mass(&self) -> Option<f64> {
        if matches!(self.potential.family(), Family::Tabulated { .. }) {
            return None;
        }
        if matches!(self.potential.family(), Family::Flat) {
            return Some(f64::INFINITY);
        }
        let log_total = log_sum_exp(
            &self.dx_weights.iter().zip(&self.derivs).map(|(w, d)| w.ln() - d.f).collect::<Vec<_>>(),
        );
        let side = |x: f64, outward: f64, k: f64, log_area: f64| -> f64 {
            let d = match self.potential.eval(x) {
                Ok(d) => d,
                Err(_) => return f64::INFINITY,
            };
            let decay = outward * d.df - k / x.abs();
            if decay <= 0.0 {
                return f64::INFINITY;
            }
            (log_area + k * x.abs().ln() - d.f - decay.ln() - log_total).exp()
        };
        let n = self.len();
        Some(match self.kind {
            GridKind::Interval => side(self.nodes[0], -1.0, 0.0, 0.0) + side(self.nodes[n - 1], 1.0, 0.0, 0.0),
            GridKind::Radial { dim } => side(self.nodes[n - 1], 1.0, (dim - 1) as f64, sphere_area(dim).ln()),
        })
    }

    /// FNV-1a over the node positions and `F` values.
    pub fn identity_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.dim() as f64);
        for (x, d) in self.nodes.iter().zip(&self.derivs) {
            eat(*x);
            eat(d.f);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(n: usize) -> Grid {
        Grid::interval(-8.0, 8.0, n, Potential::harmonic()).unwrap()
    }

    /// Composite Gauss–Legendre (5 points per panel) on [a, b].
    fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let xs = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
        let ws = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let c = a + (k as f64 + 0.5) * h;
                xs.iter().zip(&ws).map(|(x, w)| w * f(c + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0);
        assert_relative_eq!(sphere_area(2), 2.0 * std::f64::consts::PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(4), 2.0 * std::f64::consts::PI.powi(2), epsilon = 1e-13);
    }

    #[test]
    fn too_few_nodes() {
        assert_eq!(Grid::interval(0.0, 1.0, 15, Potential::flat()).unwrap_err(), Error::DegenerateDomain(15));
        assert!(matches!(Grid::interval(1.0, 0.0, 32, Potential::flat()), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn gaussian_grid_is_normalized_and_symmetric() {
        let g = gaussian(2001);
        assert!((g.dgamma_weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let n = g.len();
        for i in 0..n / 2 {
            assert_eq!(g.g_values()[i], g.g_values()[n - 1 - i]);
        }
    }

    #[test]
    fn flat_unit_interval_weights() {
        let g = Grid::interval(0.0, 1.0, 101, Potential::flat()).unwrap();
        let w = g.dgamma_weights();
        assert_relative_eq!(w[0], 0.005, epsilon = 1e-15);
        assert_relative_eq!(w[100], 0.005, epsilon = 1e-15);
        for &wi in &w[1..100] {
            assert_relative_eq!(wi, 0.01, epsilon = 1e-15);
        }
    }

    #[test]
    fn gaussian_second_moment() {
        // oracle: ∫x² e^{-x²/2} / ∫e^{-x²/2} over [-8, 8] by Gauss–Legendre
        let num = gauss_legendre(|x| x * x * (-0.5 * x * x).exp(), -8.0, 8.0, 400);
        let den = gauss_legendre(|x| (-0.5 * x * x).exp(), -8.0, 8.0, 400);
        let exact = num / den;
        assert!((exact - 1.0).abs() < 1e-12);
        let g = gaussian(2001);
        let m2 = g.integrate(&Field::from_fn(&g, |x| x * x));
        assert!((m2 - exact).abs() < 1e-6, "{m2}");
    }

    #[test]
    fn radial_mass_self_consistent_under_refinement() {
        let pot = Potential::harmonic_log(0.1, 3).unwrap();
        let mass = |n: usize| {
            let g = Grid::radial(3, 12.0, n, pot.clone()).unwrap();
            g.integrate_dx(g.g_values())
        };
        let (m1, m2, m4) = (mass(4000), mass(8000), mass(16000));
        // second-order Richardson: m1 − m2 ≈ 4 (m2 − m4)
        let rich = m2 + (m2 - m1) / 3.0;
        assert!(((m1 - m2) / m2).abs() < 1e-6, "{m1} {m2}");
        assert!(((rich - m4) / m4).abs() < 1e-8);
        let g = Grid::radial(3, 12.0, 4000, pot).unwrap();
        assert!((g.dgamma_weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn radial_tail_check() {
        let pot = Potential::harmonic_log(0.1, 3).unwrap();
        assert!(Grid::radial(3, 12.0, 400, pot.clone()).unwrap().tail_mass().unwrap() < 1e-25);
        assert!(matches!(Grid::radial(3, 3.0, 400, pot), Err(Error::TailMassTooLarge { .. })));
        let flat = Grid::radial_with_tolerance(1, 1.0, 64, Potential::flat(), f64::INFINITY).unwrap();
        assert_eq!(flat.tail_mass(), Some(f64::INFINITY));
    }

    #[test]
    fn radial_d1_matches_interval_on_even_data() {
        let n = 2001;
        let rad = Grid::radial(1, 8.0, n, Potential::harmonic()).unwrap();
        let int = gaussian(2 * n);
        let f = |x: f64| 1.0 + 0.3 * (-(x * x)).exp() + 0.1 * x * x / (1.0 + x * x);
        let vr = Field::from_fn(&rad, f);
        let vi = Field::from_fn(&int, f);
        assert!((rad.integrate(&vr) - int.integrate(&vi)).abs() < 1e-10);
        let dr = rad.integrate(&rad.gradient_sq(&vr).unwrap());
        let di = int.integrate(&int.gradient_sq(&vi).unwrap());
        assert!((dr - di).abs() < 1e-10, "{dr} {di}");
        let lr = rad.delta_g(&vr).unwrap();
        let li = int.delta_g(&vi).unwrap();
        let sr = rad.integrate(&lr.iter().map(|x| x * x).collect::<Vec<_>>());
        let si = int.integrate(&li.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!((sr - si).abs() < 1e-10 * si.abs().max(1.0));
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = gaussian(301);
        let l = g.delta_g(&Field::constant(&g, 3.5)).unwrap();
        assert!(l.iter().all(|&x| x == 0.0));
        assert!(g.gradient_sq(&Field::constant(&g, 3.5)).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn delta_g_of_x_is_minus_x() {
        let g = gaussian(2001);
        let l = g.delta_g(&Field::from_fn(&g, |x| x)).unwrap();
        let h = g.spacing();
        for i in 1..g.len() - 1 {
            let x = g.nodes()[i];
            assert!((l[i] + x).abs() < 2.0 * h * h * (1.0 + x.abs().powi(3)), "x={x}");
        }
    }

    #[test]
    fn gradient_of_linear_is_one_on_flat_grid() {
        let g = Grid::interval(-1.0, 2.0, 64, Potential::flat()).unwrap();
        let s = g.gradient_sq(&Field::from_fn(&g, |x| x)).unwrap();
        for &v in s.iter() {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn summation_by_parts_on_white_noise() {
        let g = gaussian(2001);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = g.integrate(&u.iter().zip(g.delta_g(&v).unwrap().iter()).map(|(a, b)| a * b).collect::<Vec<_>>());
            let rhs = -g.integrate(&g.grad_dot(&u, &v).unwrap());
            let face = -g.dirichlet(&u, &v).unwrap();
            // white noise puts the full 1/h² operator scale into both sides
            let scale = 4.0 / (g.spacing() * g.spacing());
            assert!((lhs - rhs).abs() < 1e-14 * scale, "{lhs} {rhs}");
            assert!((rhs - face).abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn alignment_is_checked() {
        let g = gaussian(101);
        assert!(matches!(g.delta_g(&[1.0; 10]), Err(Error::AlignmentMismatch { .. })));
    }

    #[test]
    fn far_tail_coefficients_stay_finite() {
        // e^{-F} is ~1e-290 at |x| = 100 for β = 1.5
        let g = Grid::interval(-100.0, 100.0, 4000, Potential::power(1.5).unwrap()).unwrap();
        assert!(g.lower().iter().chain(g.upper()).all(|c| c.is_finite()));
        assert!(g.g_values().iter().all(|&x| x > 0.0));
        assert!(g.tail_mass().unwrap() < 1e-100);
    }

    #[test]
    fn singular_potential_needs_node_free_origin() {
        assert!(matches!(
            Grid::interval(-1.0, 1.0, 101, Potential::power(1.5).unwrap()),
            Err(Error::DomainError { .. })
        ));
        assert!(Grid::interval(-1.0, 1.0, 100, Potential::power(1.5).unwrap()).is_ok());
    }
}
