//! Tridiagonal kernels: Thomas solves, Sturm-count bisection and inverse
//! iteration for symmetric tridiagonal eigenproblems, compensated sums.

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return Err(Error::LinearSolveFailure(0));
    }
    c[0] = if n > 1 { sup[0] / piv } else { 0.0 };
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::LinearSolveFailure(i));
        }
        c[i] = if i + 1 < n { sup[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n−1.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Unit Euclidean norm, non-negative sum.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = self.diag[i].abs();
                if i > 0 {
                    r += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    r += self.off[i].abs();
                }
                r
            })
            .fold(0.0, f64::max)
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (LDLᵀ inertia).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_inf());
        let mut count = 0;
        let mut d = self.diag[0] - x;
        for i in 0.. {
            if d == 0.0 {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
            if i + 1 == self.len() {
                break;
            }
            let b = self.off[i];
            d = self.diag[i + 1] - x - b * b / d;
        }
        count
    }

    /// Bracket `[lo, hi]` around the `k`-th smallest eigenvalue (0-based).
    pub fn bisect(&self, k: usize) -> (f64, f64) {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        lo -= 1e-12 * scale;
        hi += 1e-12 * scale;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenpair: Sturm bisection for a shift, then inverse
    /// iteration until the residual `‖Tx − λx‖₂` drops to `tol`.
    pub fn eigenpair(&self, k: usize, tol: f64, max_iter: usize) -> Result<EigenPair> {
        let n = self.len();
        if n == 1 {
            return Ok(EigenPair { value: self.diag[0], vector: vec![1.0], residual: 0.0, iterations: 0 });
        }
        let (lo, _) = self.bisect(k);
        let shift = lo;
        let sub: Vec<f64> = std::iter::once(0.0).chain(self.off.iter().copied()).collect();
        let sup: Vec<f64> = self.off.iter().copied().chain(std::iter::once(0.0)).collect();
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();

        // smooth positive start: never orthogonal to a ground state
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 0.5) * (k as f64 + 1.0) * std::f64::consts::PI / n as f64).cos())
            .collect();
        normalize(&mut x);
        let mut residual = f64::INFINITY;
        let mut value = shift;
        for it in 1..=max_iter {
            let y = match solve_tridiagonal(&sub, &diag, &sup, &x) {
                Ok(y) => y,
                // shift hit an eigenvalue to machine precision: x is already converged
                Err(_) => x.clone(),
            };
            x = y;
            if !normalize(&mut x) {
                return Err(Error::SolverDiverged { residual, iterations: it });
            }
            let tx = self.apply(&x);
            value = sum(x.iter().zip(&tx).map(|(a, b)| a * b));
            residual = sum(tx.iter().zip(&x).map(|(t, xi)| (t - value * xi).powi(2))).sqrt();
            if residual <= tol {
                if sum(x.iter().copied()) < 0.0 {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
                return Ok(EigenPair { value, vector: x, residual, iterations: it });
            }
        }
        let _ = value;
        Err(Error::SolverDiverged { residual, iterations: max_iter })
    }
}

fn normalize(x: &mut [f64]) -> bool {
    let nrm = sum(x.iter().map(|v| v * v)).sqrt();
    if !(nrm > 0.0 && nrm.is_finite()) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= nrm);
    true
}
