//! Model parameters, jump-size laws, payoffs and the inequality checks that
//! gate every simulation.
//!
//! The asset follows a jump-diffusion whose jump arrival rate is a CIR
//! process:
//!
//! ```text
//! dS = μ S dt + σ₁ S dW^S + ∫ (e^{J(z)} − 1) S Ñ(dt, dz)
//! dλ = κ (Θ − λ) dt + σ₂ √λ dW
//! ```
//!
//! Jump marks `z` have probability density `C_z`, so the total jump rate at
//! time `t` is `λ_t`, and a mark moves the log-price by `J(z)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::quadrature::{adaptive_simpson, adaptive_simpson_split, QuadratureError};
use crate::stats::norm_interval;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tail truncation radius for a custom density: `(p, tol) -> R` such that
/// the mass of `e^{pJ(z)} C_z` outside `[-R, R]` is below `tol`.
pub type TailRadiusFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Absolute tolerance used for every z-quadrature over the mark density.
pub const QUADRATURE_TOL: f64 = 1e-12;
const TAIL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma2: f64,
    pub lambda0: f64,
}

impl CirParams {
    pub fn new(kappa: f64, theta: f64, sigma2: f64, lambda0: f64) -> Self {
        Self { kappa, theta, sigma2, lambda0 }
    }

    /// `C_σ = κΘ/2 − σ₂²/8`.
    pub fn c_sigma(&self) -> f64 {
        self.kappa * self.theta / 2.0 - self.sigma2 * self.sigma2 / 8.0
    }

    /// Closed-form `E[λ_t]`.
    pub fn mean(&self, t: f64) -> f64 {
        self.theta + (self.lambda0 - self.theta) * (-self.kappa * t).exp()
    }

    /// Closed-form `Var[λ_t]`.
    pub fn variance(&self, t: f64) -> f64 {
        let (k, s2) = (self.kappa, self.sigma2 * self.sigma2);
        let e1 = (-k * t).exp();
        self.lambda0 * (s2 / k) * (e1 - e1 * e1) + self.theta * (s2 / (2.0 * k)) * (1.0 - e1).powi(2)
    }

    /// `∫₀ᵗ E[λ_s] ds`.
    pub fn integrated_mean(&self, t: f64) -> f64 {
        self.theta * t + (self.lambda0 - self.theta) * (1.0 - (-self.kappa * t).exp()) / self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    /// Risk-free drift.
    pub mu: f64,
    pub sigma1: f64,
    pub s0: f64,
    pub horizon: f64,
}

impl DiffusionParams {
    pub fn new(mu: f64, sigma1: f64, s0: f64, horizon: f64) -> Self {
        Self { mu, sigma1, s0, horizon }
    }
}

/// Probability density of the jump marks.
#[derive(Clone)]
pub enum JumpDensity {
    Gaussian { mean: f64, stdev: f64 },
    /// Double exponential: `p_up·η_up·e^{−η_up z}` for `z ≥ 0` and
    /// `(1 − p_up)·η_down·e^{η_down z}` for `z < 0`.
    Kou { eta_up: f64, eta_down: f64, p_up: f64 },
    Custom(CustomDensity),
}

#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub pdf: ScalarFn,
    /// `∂_z log C_z`.
    pub dlog_pdf: ScalarFn,
    /// Inverse CDF, used to draw marks from a uniform.
    pub quantile: ScalarFn,
    pub tail_radius: TailRadiusFn,
    /// Points where the density or its derivative is discontinuous.
    pub breakpoints: Vec<f64>,
}

/// The map `z ↦ J(z)` from mark to log-jump.
#[derive(Clone)]
pub enum JumpMap {
    /// `J(z) = z`
    Identity,
    /// `J(z) = −|z|`
    NegAbs,
    /// `J(z) = |z|`
    PosAbs,
    Custom(CustomMap),
}

#[derive(Clone)]
pub struct CustomMap {
    pub name: String,
    pub value: ScalarFn,
    pub slope: ScalarFn,
    pub curvature: ScalarFn,
}

impl JumpMap {
    pub fn name(&self) -> &str {
        match self {
            JumpMap::Identity => "identity",
            JumpMap::NegAbs => "neg_abs",
            JumpMap::PosAbs => "pos_abs",
            JumpMap::Custom(m) => &m.name,
        }
    }

    /// Linear pieces `(lo, hi, slope)` with `J(z) = slope·z` on each piece.
    fn linear_pieces(&self) -> Option<[(f64, f64, f64); 2]> {
        let (neg, pos) = match self {
            JumpMap::Identity => (1.0, 1.0),
            JumpMap::NegAbs => (1.0, -1.0),
            JumpMap::PosAbs => (-1.0, 1.0),
            JumpMap::Custom(_) => return None,
        };
        Some([(f64::NEG_INFINITY, 0.0, neg), (0.0, f64::INFINITY, pos)])
    }
}

/// Jump-size law: mark density, log-jump map and the constants of the
/// non-degeneracy and smoothness conditions.
#[derive(Clone)]
pub struct JumpLaw {
    pub density: JumpDensity,
    pub map: JumpMap,
    /// Lower bound required of `|v|`.
    pub eps0: f64,
    /// Exponent `γ` in `|∂_z J|^{-1} ≤ c_J |z|^{-γ}`.
    pub gamma: f64,
    pub c_j: f64,
}

impl fmt::Debug for JumpLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let density = match &self.density {
            JumpDensity::Gaussian { mean, stdev } => format!("Gaussian(mean={mean}, stdev={stdev})"),
            JumpDensity::Kou { eta_up, eta_down, p_up } => {
                format!("Kou(eta_up={eta_up}, eta_down={eta_down}, p_up={p_up})")
            }
            JumpDensity::Custom(c) => format!("Custom({})", c.name),
        };
        f.debug_struct("JumpLaw")
            .field("density", &density)
            .field("map", &self.map.name())
            .field("eps0", &self.eps0)
            .field("gamma", &self.gamma)
            .field("c_j", &self.c_j)
            .finish()
    }
}

impl JumpLaw {
    pub const DEFAULT_EPS0: f64 = 1e-3;

    /// Gaussian marks with `J(z) = z` (Merton-type jumps).
    pub fn gaussian(mean: f64, stdev: f64) -> Self {
        Self::with_parts(JumpDensity::Gaussian { mean, stdev }, JumpMap::Identity)
    }

    /// Double-exponential marks with `J(z) = −|z|`.
    pub fn kou(eta_up: f64, eta_down: f64, p_up: f64) -> Self {
        Self::with_parts(JumpDensity::Kou { eta_up, eta_down, p_up }, JumpMap::NegAbs)
    }

    pub fn with_parts(density: JumpDensity, map: JumpMap) -> Self {
        Self { density, map, eps0: Self::DEFAULT_EPS0, gamma: 0.0, c_j: 1.0 }
    }

    pub fn with_map(mut self, map: JumpMap) -> Self {
        self.map = map;
        self
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn with_k1(mut self, gamma: f64, c_j: f64) -> Self {
        self.gamma = gamma;
        self.c_j = c_j;
        self
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match &self.density {
            JumpDensity::Gaussian { mean, stdev } => {
                let u = (z - mean) / stdev;
                crate::stats::norm_pdf(u) / stdev
            }
            JumpDensity::Kou { eta_up, eta_down, p_up } => {
                if z >= 0.0 {
                    p_up * eta_up * (-eta_up * z).exp()
                } else {
                    (1.0 - p_up) * eta_down * (eta_down * z).exp()
                }
            }
            JumpDensity::Custom(c) => (c.pdf)(z),
        }
    }

    /// `∂_z log C_z`.
    pub fn dlog_pdf(&self, z: f64) -> f64 {
        match &self.density {
            JumpDensity::Gaussian { mean, stdev } => -(z - mean) / (stdev * stdev),
            JumpDensity::Kou { eta_up, eta_down, .. } => {
                if z >= 0.0 {
                    -eta_up
                } else {
                    *eta_down
                }
            }
            JumpDensity::Custom(c) => (c.dlog_pdf)(z),
        }
    }

    /// Draws one mark from `C_z`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.density {
            JumpDensity::Gaussian { mean, stdev } => {
                let n: f64 = StandardNormal.sample(rng);
                mean + stdev * n
            }
            JumpDensity::Kou { eta_up, eta_down, p_up } => {
                let up = rng.random::<f64>() < *p_up;
                let e: f64 = Exp1.sample(rng);
                if up {
                    e / eta_up
                } else {
                    -e / eta_down
                }
            }
            JumpDensity::Custom(c) => {
                let u: f64 = rng.random();
                (c.quantile)(u)
            }
        }
    }

    pub fn j(&self, z: f64) -> f64 {
        match &self.map {
            JumpMap::Identity => z,
            JumpMap::NegAbs => -z.abs(),
            JumpMap::PosAbs => z.abs(),
            JumpMap::Custom(m) => (m.value)(z),
        }
    }

    /// `∂_z J`; the absolute-value maps use the one-sided slope away from 0.
    pub fn dj(&self, z: f64) -> f64 {
        match &self.map {
            JumpMap::Identity => 1.0,
            JumpMap::NegAbs => {
                if z >= 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            JumpMap::PosAbs => {
                if z >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            JumpMap::Custom(m) => (m.slope)(z),
        }
    }

    pub fn d2j(&self, z: f64) -> f64 {
        match &self.map {
            JumpMap::Custom(m) => (m.curvature)(z),
            _ => 0.0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        if let JumpDensity::Custom(c) = &self.density {
            pts.extend(c.breakpoints.iter().copied());
        }
        pts
    }

    /// `∫_lo^hi e^{q z} C_z dz` in closed form for the built-in densities;
    /// `+∞` when the integral diverges, `None` for custom densities.
    pub fn partial_exp_moment(&self, q: f64, lo: f64, hi: f64) -> Option<f64> {
        if hi <= lo {
            return Some(0.0);
        }
        match &self.density {
            JumpDensity::Gaussian { mean, stdev } => {
                let shift = mean + q * stdev * stdev;
                let scale = (q * mean + 0.5 * q * q * stdev * stdev).exp();
                let p = norm_interval((lo - shift) / stdev, (hi - shift) / stdev);
                Some(if p == 0.0 { 0.0 } else { scale * p })
            }
            JumpDensity::Kou { eta_up, eta_down, p_up } => {
                let mut total = 0.0;
                if hi > 0.0 {
                    let (a, b) = (lo.max(0.0), hi);
                    total += p_up * eta_up * exp_segment(-(eta_up - q), a, b)?;
                }
                if lo < 0.0 {
                    let (a, b) = (lo, hi.min(0.0));
                    total += (1.0 - p_up) * eta_down * exp_segment(eta_down + q, a, b)?;
                }
                Some(total)
            }
            JumpDensity::Custom(_) => None,
        }
    }

    fn tail_mass(&self, p: f64, radius: f64) -> Option<f64> {
        let pieces = self.map.linear_pieces()?;
        let left = self.partial_exp_moment(p * pieces[0].2, f64::NEG_INFINITY, -radius)?;
        let right = self.partial_exp_moment(p * pieces[1].2, radius, f64::INFINITY)?;
        Some(left + right)
    }

    /// Truncation radius `R` with the mass of `e^{pJ} C_z` outside `[-R, R]`
    /// below `tol`.
    pub fn tail_radius(&self, p: f64, tol: f64) -> f64 {
        if let JumpDensity::Custom(c) = &self.density {
            return (c.tail_radius)(p, tol);
        }
        let centre = match &self.density {
            JumpDensity::Gaussian { mean, stdev } => mean.abs() + p * stdev * stdev,
            _ => 0.0,
        };
        let mut radius = 1.0 + centre;
        for _ in 0..200 {
            match self.tail_mass(p, radius) {
                Some(m) if m.is_finite() && m < tol => return radius,
                Some(_) => radius *= 1.25,
                // custom map with a built-in density: fall back to the |z| bound
                None => break,
            }
        }
        if matches!(self.map, JumpMap::Custom(_)) {
            let bound = JumpLaw { map: JumpMap::PosAbs, ..self.clone() };
            return bound.tail_radius(p, tol);
        }
        radius
    }

    /// `u_p = ∫ e^{pJ(z)} C_z dz`, in closed form for built-in laws and by
    /// adaptive quadrature otherwise.
    pub fn moment(&self, p: f64) -> Result<f64, ModelError> {
        if p == 0.0 {
            return Ok(1.0);
        }
        match (self.map.linear_pieces(), &self.density) {
            (Some(pieces), JumpDensity::Gaussian { .. } | JumpDensity::Kou { .. }) => {
                let total: f64 = pieces
                    .iter()
                    .map(|&(lo, hi, slope)| self.partial_exp_moment(p * slope, lo, hi).unwrap_or(f64::NAN))
                    .sum();
                if total.is_finite() {
                    Ok(total)
                } else {
                    Err(ModelError::MomentDivergent { p })
                }
            }
            _ => self.moment_by_quadrature(p),
        }
    }

    /// `u_p` by adaptive Simpson on a truncated interval, independent of the
    /// closed forms.
    pub fn moment_by_quadrature(&self, p: f64) -> Result<f64, ModelError> {
        if self.moment_diverges(p) {
            return Err(ModelError::MomentDivergent { p });
        }
        let radius = self.tail_radius(p, TAIL_TOL);
        let value = adaptive_simpson_split(
            |z| (p * self.j(z)).exp() * self.pdf(z),
            -radius,
            radius,
            &self.breakpoints(),
            QUADRATURE_TOL,
        )?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ModelError::MomentDivergent { p })
        }
    }

    fn moment_diverges(&self, p: f64) -> bool {
        match (self.map.linear_pieces(), &self.density) {
            (Some(pieces), JumpDensity::Kou { eta_up, eta_down, .. }) => {
                eta_up - p * pieces[1].2 <= 0.0 || eta_down + p * pieces[0].2 <= 0.0
            }
            _ => false,
        }
    }

    /// `v = ∫ (e^{J(z)} − 1) C_z dz = u_1 − 1`.
    pub fn drift(&self) -> Result<f64, ModelError> {
        Ok(self.moment(1.0)? - 1.0)
    }

    /// Integrals over the regions split by the level `J(z) = c`:
    /// `(∫_{J ≥ c} (e^J − 1) C_z dz, ∫_{J < c} C_z dz)`.
    pub fn region_integrals(&self, c: f64) -> Result<(f64, f64), ModelError> {
        match (self.map.linear_pieces(), &self.density) {
            (Some(pieces), JumpDensity::Gaussian { .. } | JumpDensity::Kou { .. }) => {
                let mut above = 0.0;
                let mut below = 0.0;
                for (lo, hi, slope) in pieces {
                    // J = slope·z on the piece; the region J ≥ c is a half-line
                    let (a_lo, a_hi, b_lo, b_hi) = if slope > 0.0 {
                        (lo.max(c), hi, lo, hi.min(c))
                    } else {
                        (lo, hi.min(-c), lo.max(-c), hi)
                    };
                    let m = |q, a, b| self.partial_exp_moment(q, a, b).unwrap_or(f64::NAN);
                    above += m(slope, a_lo, a_hi) - m(0.0, a_lo, a_hi);
                    below += m(0.0, b_lo, b_hi);
                }
                Ok((above, below.clamp(0.0, 1.0)))
            }
            _ => self.region_integrals_by_quadrature(c),
        }
    }

    pub fn region_integrals_by_quadrature(&self, c: f64) -> Result<(f64, f64), ModelError> {
        let radius = self.tail_radius(1.0, TAIL_TOL);
        let mut edges = vec![-radius, radius];
        edges.extend(self.breakpoints().into_iter().filter(|p| p.abs() < radius));
        edges.extend(self.level_crossings(c, radius));
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let tol = QUADRATURE_TOL / edges.len() as f64;
        let (mut above, mut below) = (0.0, 0.0);
        for w in edges.windows(2) {
            // the indicator is constant between consecutive crossings
            if self.j(0.5 * (w[0] + w[1])) >= c {
                above += adaptive_simpson(|z| self.j(z).exp_m1() * self.pdf(z), w[0], w[1], tol)?;
            } else {
                below += adaptive_simpson(|z| self.pdf(z), w[0], w[1], tol)?;
            }
        }
        Ok((above, below.clamp(0.0, 1.0)))
    }

    /// Points in `[-radius, radius]` where `J(z) − c` changes sign, located by
    /// a uniform scan refined with bisection.
    fn level_crossings(&self, c: f64, radius: f64) -> Vec<f64> {
        let steps = 4096;
        let at = |k: usize| -radius + 2.0 * radius * k as f64 / steps as f64;
        let mut roots = Vec::new();
        for k in 0..steps {
            let (mut lo, mut hi) = (at(k), at(k + 1));
            let above_lo = self.j(lo) >= c;
            if above_lo == (self.j(hi) >= c) {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (self.j(mid) >= c) == above_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(hi);
        }
        roots
    }

    /// Checks the lower bound on `|∂_z J|` and the growth of `∂²_z J` on a
    /// grid of nonzero marks in `[-radius, radius]`.
    pub fn check_k1(&self, radius: f64) -> Result<(), ModelError> {
        let steps = 2000;
        for k in 1..=steps {
            let mag = radius * k as f64 / steps as f64;
            for z in [-mag, mag] {
                let slope = self.dj(z).abs();
                let floor_ok = slope > 0.0 && 1.0 / slope <= self.c_j * mag.powf(-self.gamma) * (1.0 + 1e-12);
                let curv_ok = self.d2j(z).abs() <= self.c_j * mag.powf(self.gamma - 1.0) * (1.0 + 1e-12);
                if !(floor_ok && curv_ok) {
                    return Err(ModelError::K1Violated { z });
                }
            }
        }
        Ok(())
    }
}

/// `∫_a^b e^{r z} dz`, allowing infinite endpoints when it converges.
fn exp_segment(r: f64, a: f64, b: f64) -> Option<f64> {
    if b <= a {
        return Some(0.0);
    }
    if r == 0.0 {
        return Some(b - a);
    }
    let upper = if b.is_infinite() {
        if r < 0.0 {
            0.0
        } else {
            return Some(f64::INFINITY);
        }
    } else {
        (r * b).exp()
    };
    let lower = if a.is_infinite() {
        if r > 0.0 {
            0.0
        } else {
            return Some(f64::INFINITY);
        }
    } else {
        (r * a).exp()
    };
    Some((upper - lower) / r)
}

/// Payoff `f(S_T)` together with its antiderivative `F(x) = ∫₀ˣ f`.
#[derive(Clone)]
pub enum Payoff {
    Call { strike: f64 },
    /// Logistic step `1 / (1 + e^{−(x − centre)/width})`, bounded and smooth.
    Sigmoid { center: f64, width: f64 },
    Custom(CustomPayoff),
}

#[derive(Clone)]
pub struct CustomPayoff {
    pub name: String,
    pub value: ScalarFn,
    pub antiderivative: ScalarFn,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Call { strike } => write!(f, "Call(strike={strike})"),
            Payoff::Sigmoid { center, width } => write!(f, "Sigmoid(center={center}, width={width})"),
            Payoff::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl Payoff {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (x - strike).max(0.0),
            Payoff::Sigmoid { center, width } => 1.0 / (1.0 + (-(x - center) / width).exp()),
            Payoff::Custom(c) => (c.value)(x),
        }
    }

    pub fn antiderivative(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { strike } => {
                if x > *strike {
                    let d = x - strike;
                    0.5 * d * d
                } else {
                    0.0
                }
            }
            Payoff::Sigmoid { center, width } => {
                width * (softplus((x - center) / width) - softplus(-center / width))
            }
            Payoff::Custom(c) => (c.antiderivative)(x),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Payoff::Call { strike } => Some(*strike),
            _ => None,
        }
    }
}

/// Cut-off configuration for the smooth Poisson weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffConfig {
    /// Outer radius; `None` derives it from the mean integrated intensity.
    pub radius: Option<f64>,
    pub alpha: f64,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self { radius: None, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// `u_p` must be finite for every integer `p` up to this value.
    pub p_max: u32,
    /// Largest `p` examined when estimating `p₀`.
    pub p0_scan_max: u32,
    /// `p₀` below this value raises a warning.
    pub p0_threshold: f64,
    /// Floor applied to `λ` wherever `1/λ` is formed.
    pub lambda_floor: f64,
    pub cutoff: CutoffConfig,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { p_max: 4, p0_scan_max: 64, p0_threshold: 32.0, lambda_floor: 1e-12, cutoff: CutoffConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("FellerViolated: 2κΘ = {lhs} must exceed σ₂² = {rhs}")]
    FellerViolated { lhs: f64, rhs: f64 },
    #[error("WeightConditionViolated: 2κΘ = {lhs} must exceed 3σ₂² = {rhs}")]
    WeightConditionViolated { lhs: f64, rhs: f64 },
    #[error("DegenerateJump: |v| = {v_abs} is below eps0 = {eps0}")]
    DegenerateJump { v_abs: f64, eps0: f64 },
    #[error("MomentDivergent: u_p is infinite for p = {p}")]
    MomentDivergent { p: f64 },
    #[error("QuadratureNonconvergent: {0}")]
    QuadratureNonconvergent(#[from] QuadratureError),
    #[error("K1Violated: derivative bounds on J fail at z = {z}")]
    K1Violated { z: f64 },
}

impl ModelError {
    pub fn name(&self) -> &'static str {
        match self {
            ModelError::InvalidParameter { .. } => "InvalidParameter",
            ModelError::FellerViolated { .. } => "FellerViolated",
            ModelError::WeightConditionViolated { .. } => "WeightConditionViolated",
            ModelError::DegenerateJump { .. } => "DegenerateJump",
            ModelError::MomentDivergent { .. } => "MomentDivergent",
            ModelError::QuadratureNonconvergent(_) => "QuadratureNonconvergent",
            ModelError::K1Violated { .. } => "K1Violated",
        }
    }
}

/// Every violation found by [`validate_model`].
#[derive(Debug, Clone, PartialEq, Error)]
#[error("model validation failed: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<ModelError>);

impl ValidationErrors {
    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(ModelError::name).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelWarning {
    /// `p₀ = max{p ≥ 2 : u_p σ₂² ≤ 2κ}` is below the configured threshold.
    P0BelowThreshold { p0: f64, threshold: f64 },
}

impl fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelWarning::P0BelowThreshold { p0, threshold } => {
                write!(f, "p0 estimate {p0} is below {threshold}; moment bounds may not hold")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    pub c_sigma: f64,
    pub u1: f64,
    pub u2: f64,
    pub v: f64,
    /// `max{p ≥ 2 : u_p σ₂² ≤ 2κ}` over integers; `∞` if it holds for every
    /// scanned `p`, `0` if it fails already at `p = 2`.
    pub p0_estimate: f64,
}

/// A model whose parameters satisfy every inequality the weights rely on.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    pub cir: CirParams,
    pub diffusion: DiffusionParams,
    pub jump: JumpLaw,
    pub payoff: Payoff,
    pub derived: DerivedQuantities,
    pub options: ModelOptions,
    pub warnings: Vec<ModelWarning>,
}

impl ValidatedModel {
    /// Same model with a different payoff; derived quantities do not depend
    /// on the payoff.
    pub fn with_payoff(&self, payoff: Payoff) -> Self {
        Self { payoff, ..self.clone() }
    }

    /// Same model with a different initial asset price.
    pub fn with_s0(&self, s0: f64) -> Self {
        let mut m = self.clone();
        m.diffusion.s0 = s0;
        m
    }

    /// Outer radius of the smooth-weight cut-off.
    pub fn cutoff_radius(&self) -> f64 {
        self.options.cutoff.radius.unwrap_or_else(|| {
            let mass = self.cir.integrated_mean(self.diffusion.horizon);
            0.5 * mass.powf(1.0 / self.options.cutoff.alpha)
        })
    }
}

/// One inequality with both sides evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the intensity inequalities: Feller, positivity of `C_σ`, and the
/// weight condition `2κΘ > 3σ₂²`.
pub fn check_inequalities(cir: &CirParams) -> Vec<InequalityCheck> {
    let two_k_theta = 2.0 * cir.kappa * cir.theta;
    let s2 = cir.sigma2 * cir.sigma2;
    vec![
        InequalityCheck {
            name: "Feller",
            statement: "2*kappa*theta > sigma2^2",
            lhs: two_k_theta,
            rhs: s2,
            holds: two_k_theta > s2,
        },
        InequalityCheck {
            name: "CSigmaPositive",
            statement: "kappa*theta/2 - sigma2^2/8 > 0",
            lhs: cir.c_sigma(),
            rhs: 0.0,
            holds: cir.c_sigma() > 0.0,
        },
        InequalityCheck {
            name: "WeightCondition",
            statement: "2*kappa*theta > 3*sigma2^2",
            lhs: two_k_theta,
            rhs: 3.0 * s2,
            holds: two_k_theta > 3.0 * s2,
        },
    ]
}

pub fn validate_model(
    cir: CirParams,
    diffusion: DiffusionParams,
    jump: JumpLaw,
    payoff: Payoff,
) -> Result<ValidatedModel, ValidationErrors> {
    validate_model_with(cir, diffusion, jump, payoff, ModelOptions::default())
}

pub fn validate_model_with(
    cir: CirParams,
    diffusion: DiffusionParams,
    jump: JumpLaw,
    payoff: Payoff,
    options: ModelOptions,
) -> Result<ValidatedModel, ValidationErrors> {
    let mut errors = Vec::new();
    let mut positive = |name: &'static str, value: f64| {
        if !(value.is_finite() && value > 0.0) {
            errors.push(ModelError::InvalidParameter { name, value, reason: "must be finite and > 0" });
        }
    };
    positive("kappa", cir.kappa);
    positive("theta", cir.theta);
    positive("sigma2", cir.sigma2);
    positive("sigma1", diffusion.sigma1);
    positive("s0", diffusion.s0);
    positive("horizon", diffusion.horizon);
    positive("eps0", jump.eps0);
    positive("lambda_floor", options.lambda_floor);
    if !(cir.lambda0.is_finite() && cir.lambda0 >= 0.0) {
        errors.push(ModelError::InvalidParameter { name: "lambda0", value: cir.lambda0, reason: "must be finite and >= 0" });
    }
    if !diffusion.mu.is_finite() {
        errors.push(ModelError::InvalidParameter { name: "mu", value: diffusion.mu, reason: "must be finite" });
    }
    match &jump.density {
        JumpDensity::Gaussian { mean, stdev } => {
            if !mean.is_finite() {
                errors.push(ModelError::InvalidParameter { name: "jump_mean", value: *mean, reason: "must be finite" });
            }
            if !(stdev.is_finite() && *stdev > 0.0) {
                errors.push(ModelError::InvalidParameter { name: "jump_stdev", value: *stdev, reason: "must be finite and > 0" });
            }
        }
        JumpDensity::Kou { eta_up, eta_down, p_up } => {
            for (name, v) in [("kou_eta_up", *eta_up), ("kou_eta_down", *eta_down)] {
                if !(v.is_finite() && v > 0.0) {
                    errors.push(ModelError::InvalidParameter { name, value: v, reason: "must be finite and > 0" });
                }
            }
            if !(0.0..=1.0).contains(p_up) {
                errors.push(ModelError::InvalidParameter { name: "kou_p_up", value: *p_up, reason: "must lie in [0, 1]" });
            }
        }
        JumpDensity::Custom(_) => {}
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let checks = check_inequalities(&cir);
    if !checks[0].holds {
        errors.push(ModelError::FellerViolated { lhs: checks[0].lhs, rhs: checks[0].rhs });
    }
    if !checks[2].holds {
        errors.push(ModelError::WeightConditionViolated { lhs: checks[2].lhs, rhs: checks[2].rhs });
    }

    let mut moments = Vec::new();
    for p in 1..=options.p_max.max(2) {
        match jump.moment(p as f64) {
            Ok(u) => moments.push(u),
            Err(e) => {
                errors.push(e);
                break;
            }
        }
    }
    let (u1, u2) = match moments.as_slice() {
        [u1, u2, ..] => (*u1, *u2),
        _ => (f64::NAN, f64::NAN),
    };
    let v = u1 - 1.0;
    if moments.len() >= 1 && !(v.abs() >= jump.eps0) {
        errors.push(ModelError::DegenerateJump { v_abs: v.abs(), eps0: jump.eps0 });
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let p0_estimate = estimate_p0(&cir, &jump, options.p0_scan_max);
    let mut warnings = Vec::new();
    if p0_estimate < options.p0_threshold {
        warnings.push(ModelWarning::P0BelowThreshold { p0: p0_estimate, threshold: options.p0_threshold });
    }
    let derived = DerivedQuantities { c_sigma: cir.c_sigma(), u1, u2, v, p0_estimate };
    Ok(ValidatedModel { cir, diffusion, jump, payoff, derived, options, warnings })
}

/// `max{p ≥ 2 : u_p σ₂² ≤ 2κ}` over integers up to `scan_max`. The admissible
/// set is an interval starting at 0 because `p ↦ log u_p` is convex with
/// `u_0 = 1`, so the scan stops at the first failure.
pub fn estimate_p0(cir: &CirParams, jump: &JumpLaw, scan_max: u32) -> f64 {
    let bound = 2.0 * cir.kappa;
    let s2 = cir.sigma2 * cir.sigma2;
    let mut last_ok = 0.0;
    for p in 2..=scan_max {
        match jump.moment(p as f64) {
            Ok(u) if u * s2 <= bound => last_ok = p as f64,
            _ => return last_ok,
        }
    }
    f64::INFINITY
}
