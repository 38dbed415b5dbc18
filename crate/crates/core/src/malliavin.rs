//! Malliavin weights for the pricing and delta identities.
//!
//! Wiener side: the direction `h_u = (κ/2 + C_σ/λ_u)/v`, the functional
//! `B_T = −σ₂ ∫₀ᵀ √λ_s (1 − e^{−G_s}) ds` with `G_s = ∫₀ˢ (κ/2 + C_σ/λ_r) dr`,
//! its derivative `D_t B_T`, and the Skorokhod integral `Z_T = δ(h/B_T)`.
//!
//! Poisson side: the region integrals of the call-specific weight and the
//! cut-off weight `δ^{N}(A)/N_ξ` with `A = ξ(z) / (S_0 ∂_z J)`.

use thiserror::Error;

use crate::model::{JumpLaw, ModelError, ValidatedModel, QUADRATURE_TOL};
use crate::paths::{GridSpec, PathBundle};
use crate::quadrature::adaptive_simpson_split;

/// Cumulative decay `G_i = ∫₀^{t_i} g_r dr` with `g_r = κ/2 + C_σ/λ_r`.
#[derive(Debug, Clone)]
pub struct DecayAccumulator {
    /// Integrand `g` at every node.
    pub rate: Vec<f64>,
    pub g: Vec<f64>,
    /// Nodes whose intensity was raised to the floor before inversion.
    pub floored_nodes: usize,
}

impl DecayAccumulator {
    /// `A_{t_i, t_j} = e^{−(G_j − G_i)} − 1`.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        (-(self.g[j] - self.g[i])).exp_m1()
    }
}

pub fn decay_accumulate(grid: &GridSpec, lambda: &[f64], kappa: f64, c_sigma: f64, lambda_floor: f64) -> DecayAccumulator {
    let mut floored_nodes = 0;
    let rate: Vec<f64> = lambda
        .iter()
        .map(|&l| {
            let l = if l < lambda_floor {
                floored_nodes += 1;
                lambda_floor
            } else {
                l
            };
            0.5 * kappa + c_sigma / l
        })
        .collect();
    let half_dt = 0.5 * grid.dt();
    let mut g = Vec::with_capacity(rate.len());
    let mut acc = 0.0;
    g.push(acc);
    for w in rate.windows(2) {
        acc += half_dt * (w[0] + w[1]);
        g.push(acc);
    }
    DecayAccumulator { rate, g, floored_nodes }
}

/// `h_i = g_i / v`.
pub fn direction_h(decay: &DecayAccumulator, v: f64) -> Vec<f64> {
    decay.rate.iter().map(|g| g / v).collect()
}

fn trapezoid(values: impl ExactSizeIterator<Item = f64>, dt: f64) -> f64 {
    let last = values.len().saturating_sub(1);
    values
        .enumerate()
        .map(|(i, y)| if i == 0 || i == last { 0.5 * y } else { y })
        .sum::<f64>()
        * dt
}

/// `B_T = −σ₂ ∫₀ᵀ √λ_s (1 − e^{−G_s}) ds`, trapezoid rule.
pub fn bt_functional(grid: &GridSpec, lambda: &[f64], decay: &DecayAccumulator, sigma2: f64) -> f64 {
    let integrand = lambda.iter().zip(&decay.g).map(|(l, g)| l.sqrt() * -(-g).exp_m1());
    -sigma2 * trapezoid(integrand, grid.dt())
}

/// `D_{t_i} B_T` at every node:
///
/// ```text
/// σ₂² ∫_t^T [ ½ A_{0,s} (1 + A_{t,s}) + C_σ √λ_s e^{−G_s} ∫_t^s λ_r^{−3/2} e^{−(G_r − G_t)} dr ] ds
/// ```
///
/// Both double integrals use the trapezoid rule in each variable and are
/// evaluated by a backward recursion in `O(n)` total.
pub fn dw_bt(grid: &GridSpec, lambda: &[f64], decay: &DecayAccumulator, sigma2: f64, c_sigma: f64, lambda_floor: f64) -> Vec<f64> {
    let n = grid.n;
    let dt = grid.dt();
    let half = 0.5 * dt;
    let g = &decay.g;
    let a0: Vec<f64> = g.iter().map(|gi| (-gi).exp_m1()).collect();
    let w: Vec<f64> = lambda.iter().zip(g).map(|(l, gi)| l.sqrt() * (-gi).exp()).collect();
    let f: Vec<f64> = lambda.iter().map(|&l| l.max(lambda_floor).powf(-1.5)).collect();

    // tail[j] = Σ_{k=j}^{n} w_k dt − (dt/2) w_n
    let mut tail = vec![0.0; n + 1];
    tail[n] = half * w[n];
    for j in (0..n).rev() {
        tail[j] = tail[j + 1] + dt * w[j];
    }

    let mut out = vec![0.0; n + 1];
    let (mut t1, mut m) = (0.0, 0.0);
    for i in (0..n).rev() {
        let e = (-(g[i + 1] - g[i])).exp();
        t1 = half * a0[i] + e * (half * a0[i + 1] + t1);
        let c = half * (f[i] + f[i + 1] * e);
        m = c * tail[i + 1] + e * m;
        out[i] = sigma2 * sigma2 * (0.5 * t1 + c_sigma * m);
    }
    out
}

/// `Z_T = (1/B_T) Σ h_i dW_i + (1/B_T²) Σ ω_i D_{t_i}B_T h_i dt`, left-point Itô
/// sum and trapezoid weights `ω`.
pub fn z_weight(grid: &GridSpec, dw: &[f64], h: &[f64], b_t: f64, dwb: &[f64]) -> f64 {
    let ito: f64 = h.iter().zip(dw).map(|(hi, d)| hi * d).sum();
    let correction = trapezoid(dwb.iter().zip(h).map(|(d, hi)| d * hi), grid.dt());
    ito / b_t + correction / (b_t * b_t)
}

/// Wiener-side weights of one path.
#[derive(Debug, Clone)]
pub struct MalliavinWeights {
    pub decay: DecayAccumulator,
    pub h: Vec<f64>,
    pub b_t: f64,
    pub dwb: Vec<f64>,
    pub z: f64,
}

pub fn malliavin_weights(model: &ValidatedModel, path: &PathBundle) -> MalliavinWeights {
    let cir = &model.cir;
    let floor = model.options.lambda_floor;
    let c_sigma = model.derived.c_sigma;
    let decay = decay_accumulate(&path.grid, &path.lambda, cir.kappa, c_sigma, floor);
    let h = direction_h(&decay, model.derived.v);
    let b_t = bt_functional(&path.grid, &path.lambda, &decay, cir.sigma2);
    let dwb = dw_bt(&path.grid, &path.lambda, &decay, cir.sigma2, c_sigma, floor);
    let z = z_weight(&path.grid, &path.dw, &h, b_t, &dwb);
    MalliavinWeights { decay, h, b_t, dwb, z }
}

/// Pieces of the call-specific Poisson weight on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRegionReport {
    /// `∫ 1{S_T e^{J} ≥ K} (e^{J} − 1) C_z dz`
    pub i_plus: f64,
    /// `∫ 1{S_T e^{J} < K} C_z dz`
    pub i_minus: f64,
    /// `∫₀ᵀ λ_t dt`
    pub int_lambda: f64,
    /// `∫₀ᵀ v λ_t dt`
    pub int_v_lambda: f64,
}

impl JumpRegionReport {
    /// Factor multiplying `S_T H_K(S_T)/S_0` in the delta estimator.
    pub fn multiplier(&self) -> f64 {
        let mut m = self.i_minus;
        if self.int_v_lambda != 0.0 {
            m += self.i_plus * self.int_lambda / self.int_v_lambda;
        }
        m
    }
}

pub fn jump_weight_call(path: &PathBundle, jump: &JumpLaw, v: f64, strike: f64) -> Result<JumpRegionReport, ModelError> {
    let level = if strike > 0.0 { (strike / path.s_t()).ln() } else { f64::NEG_INFINITY };
    let (i_plus, i_minus) = jump.region_integrals(level)?;
    let int_lambda = trapezoid(path.lambda.iter().copied(), path.grid.dt());
    Ok(JumpRegionReport { i_plus, i_minus, int_lambda, int_v_lambda: v * int_lambda })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutoffError {
    #[error("cut-off radius must be finite and > 0, got {0}")]
    InvalidRadius(f64),
    #[error("derivative bound of the cut-off is not finite")]
    UnboundedDerivative,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `ξ(z) = |z|^{3+γ}·b(|z|)` where the bump `b` is `C^∞`, equal to 1 on
/// `|z| ≤ R/2` and to 0 on `|z| ≥ R`.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub radius: f64,
    pub gamma: f64,
    /// `sup |∂_z ξ(z)| / |z|^{2+γ}` measured on a grid.
    pub c1: f64,
    /// `∫ ∂_z(C_z A(z)) dz` over the support, per unit intensity.
    pub compensator_density: f64,
    s0: f64,
}

fn smooth_step(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let phi = |t: f64| (-1.0 / t).exp();
    let dphi = |t: f64| (-1.0 / t).exp() / (t * t);
    let (a, b) = (phi(x), phi(1.0 - x));
    let value = a / (a + b);
    let slope = (dphi(x) * b + a * dphi(1.0 - x)) / ((a + b) * (a + b));
    (value, slope)
}

impl Cutoff {
    pub fn new(model: &ValidatedModel) -> Result<Self, CutoffError> {
        Self::with_radius(model, model.cutoff_radius())
    }

    pub fn with_radius(model: &ValidatedModel, radius: f64) -> Result<Self, CutoffError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CutoffError::InvalidRadius(radius));
        }
        let gamma = model.jump.gamma;
        let mut cut = Cutoff { radius, gamma, c1: 0.0, compensator_density: 0.0, s0: model.diffusion.s0 };
        let samples = 4000;
        let mut c1: f64 = 0.0;
        for k in 1..samples {
            let z = radius * k as f64 / samples as f64;
            c1 = c1.max(cut.dxi(z).abs() / z.powf(2.0 + gamma));
        }
        if !c1.is_finite() {
            return Err(CutoffError::UnboundedDerivative);
        }
        cut.c1 = c1;
        model.jump.check_k1(radius)?;
        let jump = &model.jump;
        let r = radius;
        cut.compensator_density = adaptive_simpson_split(
            |z| jump.pdf(z) * cut.log_derivative_term(jump, z),
            -r,
            r,
            &[-0.5 * r, 0.0, 0.5 * r],
            QUADRATURE_TOL,
        )
        .map_err(ModelError::from)?;
        Ok(cut)
    }

    fn bump(&self, a: f64) -> (f64, f64) {
        let half = 0.5 * self.radius;
        let (s, ds) = smooth_step((a - half) / half);
        (1.0 - s, -ds / half)
    }

    pub fn xi(&self, z: f64) -> f64 {
        let a = z.abs();
        if a >= self.radius {
            return 0.0;
        }
        a.powf(3.0 + self.gamma) * self.bump(a).0
    }

    pub fn dxi(&self, z: f64) -> f64 {
        let a = z.abs();
        if a >= self.radius || a == 0.0 {
            return 0.0;
        }
        let p = 3.0 + self.gamma;
        let (b, db) = self.bump(a);
        z.signum() * (p * a.powf(p - 1.0) * b + a.powf(p) * db)
    }

    /// `A(z) = ξ(z) / (S_0 ∂_z J(z))`.
    pub fn a(&self, jump: &JumpLaw, z: f64) -> f64 {
        let xi = self.xi(z);
        if xi == 0.0 {
            0.0
        } else {
            xi / (self.s0 * jump.dj(z))
        }
    }

    /// `(1/C_z) ∂_z (C_z A) = ∂_z A + A ∂_z log C_z`.
    pub fn log_derivative_term(&self, jump: &JumpLaw, z: f64) -> f64 {
        let xi = self.xi(z);
        let dxi = self.dxi(z);
        if xi == 0.0 && dxi == 0.0 {
            return 0.0;
        }
        let dj = jump.dj(z);
        let da = (dxi * dj - xi * jump.d2j(z)) / (self.s0 * dj * dj);
        da + xi / (self.s0 * dj) * jump.dlog_pdf(z)
    }
}

/// Pieces of the cut-off Poisson weight on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSmoothReport {
    /// `N_ξ = Σ ξ(z_i)` over the path's events.
    pub n_xi: f64,
    /// `δ^{N}(A)`: event sum minus compensator.
    pub delta_np: f64,
}

impl JumpSmoothReport {
    /// `δ^{N}(A)/N_ξ`, or `None` when no event falls inside the cut-off.
    pub fn weight(&self) -> Option<f64> {
        (self.n_xi > 0.0).then(|| self.delta_np / self.n_xi)
    }
}

pub fn jump_weight_smooth(path: &PathBundle, jump: &JumpLaw, cutoff: &Cutoff) -> JumpSmoothReport {
    let mut n_xi = 0.0;
    let mut sum = 0.0;
    for e in &path.jumps {
        n_xi += cutoff.xi(e.mark);
        sum += cutoff.log_derivative_term(jump, e.mark);
    }
    let int_lambda = trapezoid(path.lambda.iter().copied(), path.grid.dt());
    JumpSmoothReport { n_xi, delta_np: sum - int_lambda * cutoff.compensator_density }
}
