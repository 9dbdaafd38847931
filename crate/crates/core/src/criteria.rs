//! Closed-form admissibility conditions, constants and decay envelopes.
//!
//! For the porous-media chain, with `q = (p+3(m−1))/(p+2(m−1))` and
//! `α = βm − 1`:
//!
//! ```text
//! 𝖺 = θ/q²   𝖻 = 8(α+2−2q)/q³   𝖼 = 16(q−1)(q−1−α)/q⁴ + 2𝖻
//! κ₁ = λ₁(m,θ)/q²   κ₂ = 𝖼 − 𝖻²/(4𝖺)   𝖪 = 1/(4 q⁸ κ₁² κ₂)
//! κ = (3/2) m [4𝖪 c(m,p)]^{-1/3} [(m+p−2)E₀ + 1]^{-(4−3q)/(3(2−q))}
//! ```
//!
//! `κ₂ > 0` exactly when `(m,p)` lies in the ellipse `𝖤_θ`:
//! `(p+2m−4)² + [5m² + 2(2p−7)m + (p−3)²] θ < 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{Functionals, PmeParams};

/// Left-hand side of the ellipse condition; `(m,p) ∈ 𝖤_θ ⟺ margin < 0`.
pub fn ellipse_margin(m: f64, p: f64, theta: f64) -> f64 {
    (p + 2.0 * m - 4.0).powi(2) + (5.0 * m * m + 2.0 * (2.0 * p - 7.0) * m + (p - 3.0).powi(2)) * theta
}

/// Smallest `θ` with `(m,p) ∈ 𝖤_θ` for all larger `θ`, or `None` if no
/// `θ > 0` works. The margin is affine in `θ`, so this is exact.
pub fn theta_threshold(m: f64, p: f64) -> Option<f64> {
    let fixed = (p + 2.0 * m - 4.0).powi(2);
    let slope = 5.0 * m * m + 2.0 * (2.0 * p - 7.0) * m + (p - 3.0).powi(2);
    (slope < 0.0).then(|| fixed / -slope)
}

/// `θ₀ = 2/p₀ − 1`, for which `1 − θ₀ = 2(p₀−1)/p₀`.
pub fn theta_from_p(p0: f64) -> Result<f64> {
    if !(p0 > 1.0 && p0 <= 2.0) {
        return Err(Error::Parameter(format!("need p0 in (1, 2], got {p0}")));
    }
    Ok(2.0 / p0 - 1.0)
}

/// Analytic description of `𝖤_θ` as a conic `xᵀAx + bᵀx + c < 0`, `x = (m,p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub half_widths: (f64, f64),
}

pub fn ellipse(theta: f64) -> Result<Ellipse> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Parameter(format!("need theta in (0, 1], got {theta}")));
    }
    let (a11, a12, a22) = (4.0 + 5.0 * theta, 2.0 + 2.0 * theta, 1.0 + theta);
    let (b1, b2) = (-16.0 - 14.0 * theta, -8.0 - 6.0 * theta);
    let det = theta * (1.0 + theta);
    let (i11, i12, i22) = (a22 / det, -a12 / det, a11 / det);
    let center = (-0.5 * (i11 * b1 + i12 * b2), -0.5 * (i12 * b1 + i22 * b2));
    let q0 = ellipse_margin(center.0, center.1, theta);
    Ok(Ellipse { center, half_widths: ((-q0 * i11).sqrt(), (-q0 * i22).sqrt()) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub theta: f64,
    pub samples: usize,
    pub inside: usize,
    pub analytic: Ellipse,
    /// Mean of the sampled points inside `𝖤_θ`.
    pub measured_center: (f64, f64),
    /// `[m_min, m_max, p_min, p_max]` of the inside samples.
    pub bounding_box: [f64; 4],
    /// `θ' = θ/2`: every inside sample of `𝖤_{θ'}` also lies in `𝖤_θ`.
    pub smaller_theta: f64,
    pub nesting_violations: usize,
}

/// Monte Carlo picture of `𝖤_θ`: uniform samples over the analytic bounding
/// box enlarged by 25 % in each direction.
pub fn region_report(theta: f64, samples: usize, seed: u64) -> Result<RegionReport> {
    let e = ellipse(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wm, wp) = (1.25 * e.half_widths.0, 1.25 * e.half_widths.1);
    let smaller = 0.5 * theta;
    let mut inside = 0;
    let mut sum = (0.0, 0.0);
    let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    let mut violations = 0;
    for _ in 0..samples {
        let m = e.center.0 + wm * rng.gen_range(-1.0..1.0);
        let p = e.center.1 + wp * rng.gen_range(-1.0..1.0);
        let here = ellipse_margin(m, p, theta) < 0.0;
        if ellipse_margin(m, p, smaller) < 0.0 && !here {
            violations += 1;
        }
        if here {
            inside += 1;
            sum.0 += m;
            sum.1 += p;
            bbox = [bbox[0].min(m), bbox[1].max(m), bbox[2].min(p), bbox[3].max(p)];
        }
    }
    let n = inside.max(1) as f64;
    Ok(RegionReport {
        theta,
        samples,
        inside,
        analytic: e,
        measured_center: (sum.0 / n, sum.1 / n),
        bounding_box: bbox,
        smaller_theta: smaller,
        nesting_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub in_ellipse: bool,
    pub q_in_range: bool,
    pub lambda1_positive: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.in_ellipse && self.q_in_range && self.lambda1_positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmeConstants {
    pub m: f64,
    pub p: f64,
    pub theta: f64,
    pub lambda1: f64,
    pub e0: f64,
    pub q: f64,
    pub beta: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// `𝖪 = 1/(4q⁸κ₁²κ₂)`.
    pub big_k: f64,
    pub c_mp: f64,
    /// `(4−3q)/(3(2−q))`.
    pub exponent: f64,
    pub kappa0: f64,
    pub kappa: f64,
    pub ellipse_margin: f64,
    pub hypotheses: Hypotheses,
}

impl PmeConstants {
    /// All closed forms, whether or not the hypotheses hold (values may be
    /// negative or non-finite when they fail).
    pub fn evaluate(params: &PmeParams, theta: f64, lambda1: f64, e0: f64) -> Self {
        let (m, p) = (params.m, params.p);
        let q = params.q();
        let beta = params.beta();
        let alpha = params.alpha();
        let a = theta / (q * q);
        let b = 8.0 * (alpha + 2.0 - 2.0 * q) / q.powi(3);
        let c = 16.0 * (q - 1.0) * (q - 1.0 - alpha) / q.powi(4) + 2.0 * b;
        let kappa1 = lambda1 / (q * q);
        let kappa2 = c - b * b / (4.0 * a);
        let big_k = 1.0 / (4.0 * q.powi(8) * kappa1 * kappa1 * kappa2);
        let c_mp = params.c();
        let exponent = (4.0 - 3.0 * q) / (3.0 * (2.0 - q));
        let kappa0 = 1.5 * m * (4.0 * big_k * c_mp).powf(-1.0 / 3.0);
        let kappa = kappa0 * ((m + p - 2.0) * e0 + 1.0).powf(-exponent);
        let margin = ellipse_margin(m, p, theta);
        Self {
            m,
            p,
            theta,
            lambda1,
            e0,
            q,
            beta,
            alpha,
            a,
            b,
            c,
            kappa1,
            kappa2,
            big_k,
            c_mp,
            exponent,
            kappa0,
            kappa,
            ellipse_margin: margin,
            hypotheses: Hypotheses {
                in_ellipse: margin < 0.0,
                q_in_range: q > 1.0 && q < 4.0 / 3.0,
                lambda1_positive: lambda1 > 0.0,
            },
        }
    }

    /// `F(s) = κ₀ s [(m+p−2)s + 1]^{-(4−3q)/(3(2−q))}`; along the flow `F(E) ≤ (3/2) I^{2/3}`.
    pub fn corollary_f(&self, s: f64) -> f64 {
        self.kappa0 * s * ((self.m + self.p - 2.0) * s + 1.0).powf(-self.exponent)
    }

    /// `κ` for a different initial entropy.
    pub fn kappa_for(&self, e0: f64) -> f64 {
        self.kappa0 * ((self.m + self.p - 2.0) * e0 + 1.0).powf(-self.exponent)
    }
}

/// Checks the hypotheses in the order `q ∈ (1, 4/3)`, `(m,p) ∈ 𝖤_θ`, `λ₁ > 0`
/// and evaluates the full chain.
pub fn constants_chain(m: f64, p: f64, theta: f64, lambda1: f64, e0: f64) -> Result<PmeConstants> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Parameter(format!("need theta in (0, 1], got {theta}")));
    }
    let params = PmeParams::new(m, p)?;
    let k = PmeConstants::evaluate(&params, theta, lambda1, e0);
    if !k.hypotheses.q_in_range {
        return Err(Error::QOutOfRange { q: k.q, m, p });
    }
    if !k.hypotheses.in_ellipse {
        return Err(Error::OutsideEllipse { m, p, theta });
    }
    if !k.hypotheses.lambda1_positive {
        return Err(Error::NonpositiveLambda(lambda1));
    }
    Ok(k)
}

/// `X₀ e^{-2λ₁ t}`.
pub fn envelope_exponential(x0: f64, lambda1: f64, t: f64) -> f64 {
    x0 * (-2.0 * lambda1 * t).exp()
}

/// `I₀ / (1 + κ I₀ t)`.
pub fn envelope_refined(i0: f64, kappa: f64, t: f64) -> f64 {
    i0 / (1.0 + kappa * i0 * t)
}

/// `κ = (αε/(1+ε)) (p/2) / (1 + (p−1)E₀)` for the refined linear bound.
pub fn refined_kappa(p: f64, epsilon: f64, e0: f64) -> f64 {
    let alpha = (2.0 - p) / p;
    alpha * epsilon / (1.0 + epsilon) * 0.5 * p / (1.0 + (p - 1.0) * e0)
}

/// Porous-media envelopes
///
/// ```text
/// I(t) ≤ I₀ / [1 + (κ/3) I₀^{1/3} t]³
/// E(t) ≤ 3 I₀^{2/3} / (2κ [1 + (κ/3) I₀^{1/3} t]²)
/// ```
///
/// The entropy bound is `∫_t^∞` of the Fisher bound.
pub fn envelope_pme(i0: f64, kappa: f64, t: f64) -> (f64, f64) {
    if i0 == 0.0 {
        return (0.0, 0.0);
    }
    let g = 1.0 + kappa / 3.0 * i0.cbrt() * t;
    (i0 / g.powi(3), 3.0 * i0.powf(2.0 / 3.0) / (2.0 * kappa * g * g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    /// `I^{4/3}`.
    pub lhs: f64,
    /// `(1/3)(4c)^{4/3} 𝖪^{1/3} B^{(4−3q)/(3(2−q))} K`, `B = (m+p−2)E + 1`.
    pub rhs: f64,
    /// `(rhs − lhs) / max(lhs, rhs)`, 0 when both vanish.
    pub relative_slack: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub eta_bar: f64,
    /// `f(η̄) = K₁ + K₂η̄⁴ − K₃η̄`, nonnegative exactly when the inequality holds.
    pub f_eta_bar: f64,
}

/// The functional inequality `I^{4/3} ≤ (1/3)(4c)^{4/3} 𝖪^{1/3} B^{…} K` on one snapshot,
/// together with the quartic `f(η) = K₁ + K₂η⁴ − K₃η` at its minimizer.
pub fn lemma_functional_check(m: f64, p: f64, theta: f64, lambda1: f64, snapshot: Functionals) -> Result<LemmaCheck> {
    let k = constants_chain(m, p, theta, lambda1, snapshot.e)?;
    let b = (m + p - 2.0) * snapshot.e + 1.0;
    let lhs = snapshot.i.powf(4.0 / 3.0);
    let rhs = (4.0 * k.c_mp).powf(4.0 / 3.0) * k.big_k.cbrt() * b.powf(k.exponent) * snapshot.k / 3.0;
    let k1 = snapshot.k;
    let k2 = k.big_k * b.powf((4.0 - 3.0 * k.q) / (2.0 - k.q));
    let k3 = snapshot.i / k.c_mp;
    let eta_bar = (k3 / (4.0 * k2)).cbrt();
    let f_eta_bar = k1 + k2 * eta_bar.powi(4) - k3 * eta_bar;
    let scale = lhs.max(rhs);
    let relative_slack = if scale > 0.0 { (rhs - lhs) / scale } else { 0.0 };
    Ok(LemmaCheck { lhs, rhs, relative_slack, k1, k2, k3, eta_bar, f_eta_bar })
}
