//! Monte Carlo estimators for price and delta, and a conditional Merton
//! oracle for Gaussian jumps.
//!
//! Paths are processed in fixed-size chunks in parallel; chunk statistics are
//! merged in chunk order, so results do not depend on the thread count.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::malliavin::{jump_weight_call, jump_weight_smooth, malliavin_weights, Cutoff, CutoffError};
use crate::model::{JumpDensity, JumpMap, ModelError, Payoff, ValidatedModel};
use crate::paths::{simulate_intensity, simulate_path, DriverSet, GridSpec, PathBundle};
use crate::stats::{norm_cdf, RunningStats};

const CHUNK: u64 = 1024;
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Grid nodes whose intensity was floored before forming `1/λ`.
    pub floored_nodes: u64,
    /// Paths with no event inside the cut-off support.
    pub empty_cutoff_paths: u64,
}

impl Diagnostics {
    fn merge(&mut self, other: &Diagnostics) {
        self.floored_nodes += other.floored_nodes;
        self.empty_cutoff_paths += other.empty_cutoff_paths;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub n_paths: u64,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    pub fn from_stats(stats: &RunningStats, seed: u64, diagnostics: Diagnostics) -> Self {
        let value = stats.mean();
        let stderr = stats.std_error();
        Self {
            value,
            stderr,
            ci95: (value - Z95 * stderr, value + Z95 * stderr),
            n_paths: stats.count(),
            seed,
            diagnostics,
        }
    }

    /// `|a − b| / √(se_a² + se_b²)`.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        (self.value - other.value).abs() / self.stderr.hypot(other.stderr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMethod {
    /// `f(S_T) Z_T / S_0`
    WienerWeight,
    /// `(S_T H_K(S_T)/S_0)·(I₊ ∫λ/∫vλ + I₋)`
    JumpRegionWeight,
    /// `f(S_T) δ^N(A)/N_ξ`
    JumpSmoothWeight,
    /// Central difference in `S_0` with common random numbers.
    FiniteDifference { bump: Option<f64> },
    /// `H_K(S_T) S_T / S_0`
    PathwiseExact,
    /// `share·Wiener + (1 − share)·JumpRegion`
    Mixed { wiener_share: f64 },
}

impl DeltaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DeltaMethod::WienerWeight => "wiener",
            DeltaMethod::JumpRegionWeight => "jump_region",
            DeltaMethod::JumpSmoothWeight => "jump_smooth",
            DeltaMethod::FiniteDifference { .. } => "fd",
            DeltaMethod::PathwiseExact => "pathwise",
            DeltaMethod::Mixed { .. } => "mixed",
        }
    }

    fn needs_call(&self) -> bool {
        matches!(self, DeltaMethod::JumpRegionWeight | DeltaMethod::PathwiseExact | DeltaMethod::Mixed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("MethodPayoffMismatch: {method} requires a call payoff")]
    MethodPayoffMismatch { method: &'static str },
    #[error("OracleUnsupported: {0}")]
    OracleUnsupported(&'static str),
    #[error("SeriesTruncationTooCoarse: Poisson tail {tail:e} exceeds {tolerance:e}")]
    SeriesTruncationTooCoarse { tail: f64, tolerance: f64 },
    #[error("invalid path count {0}")]
    NoPaths(u64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
}

/// Runs `per_path` for every index and reduces `K` outputs deterministically.
pub(crate) fn run_paths<const K: usize, F>(n_paths: u64, per_path: F) -> Result<([RunningStats; K], Diagnostics), EstimatorError>
where
    F: Fn(u64, &mut Diagnostics) -> Result<[f64; K], EstimatorError> + Sync,
{
    if n_paths == 0 {
        return Err(EstimatorError::NoPaths(0));
    }
    let chunks = n_paths.div_ceil(CHUNK);
    let parts: Vec<Result<([RunningStats; K], Diagnostics), EstimatorError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stats = [RunningStats::new(); K];
            let mut diag = Diagnostics::default();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let out = per_path(idx, &mut diag)?;
                for (s, x) in stats.iter_mut().zip(out) {
                    s.push(x);
                }
            }
            Ok((stats, diag))
        })
        .collect();
    let mut total = [RunningStats::new(); K];
    let mut diag = Diagnostics::default();
    for part in parts {
        let (stats, d) = part?;
        for (t, s) in total.iter_mut().zip(&stats) {
            t.merge(s);
        }
        diag.merge(&d);
    }
    Ok((total, diag))
}

/// Per-path delta contribution of one method, with its precomputed state.
pub struct DeltaKernel {
    method: DeltaMethod,
    cutoff: Option<Cutoff>,
    bump: f64,
}

impl DeltaKernel {
    pub fn new(model: &ValidatedModel, method: DeltaMethod) -> Result<Self, EstimatorError> {
        if method.needs_call() && model.payoff.strike().is_none() {
            return Err(EstimatorError::MethodPayoffMismatch { method: method.name() });
        }
        let cutoff = match method {
            DeltaMethod::JumpSmoothWeight => Some(Cutoff::new(model)?),
            _ => None,
        };
        let bump = match method {
            DeltaMethod::FiniteDifference { bump } => bump.unwrap_or(0.01 * model.diffusion.s0),
            _ => 0.0,
        };
        Ok(Self { method, cutoff, bump })
    }

    pub fn evaluate(&self, model: &ValidatedModel, path: &PathBundle, diag: &mut Diagnostics) -> Result<f64, EstimatorError> {
        let s0 = model.diffusion.s0;
        let s_t = path.s_t();
        let f = &model.payoff;
        let pathwise = |strike: f64| if s_t >= strike { s_t / s0 } else { 0.0 };
        let wiener = |diag: &mut Diagnostics| {
            let w = malliavin_weights(model, path);
            diag.floored_nodes += w.decay.floored_nodes as u64;
            f.value(s_t) * w.z / s0
        };
        let region = |strike: f64| -> Result<f64, EstimatorError> {
            if s_t < strike {
                return Ok(0.0);
            }
            let rep = jump_weight_call(path, &model.jump, model.derived.v, strike)?;
            Ok(s_t / s0 * rep.multiplier())
        };
        Ok(match self.method {
            DeltaMethod::WienerWeight => wiener(diag),
            DeltaMethod::PathwiseExact => pathwise(model.payoff.strike().expect("checked")),
            DeltaMethod::JumpRegionWeight => region(model.payoff.strike().expect("checked"))?,
            DeltaMethod::Mixed { wiener_share } => {
                let k = model.payoff.strike().expect("checked");
                wiener_share * wiener(diag) + (1.0 - wiener_share) * region(k)?
            }
            DeltaMethod::JumpSmoothWeight => {
                let cut = self.cutoff.as_ref().expect("built with the kernel");
                match jump_weight_smooth(path, &model.jump, cut).weight() {
                    Some(w) => f.value(s_t) * w,
                    None => {
                        diag.empty_cutoff_paths += 1;
                        0.0
                    }
                }
            }
            DeltaMethod::FiniteDifference { .. } => {
                let growth = path.x_t().exp();
                let h = self.bump;
                (f.value((s0 + h) * growth) - f.value((s0 - h) * growth)) / (2.0 * h)
            }
        })
    }
}

/// Per-path price contribution: `f(S_T)` or `(F(S_T)/S_T)(1 + Z_T)`.
pub fn price_contribution(model: &ValidatedModel, path: &PathBundle, weighted: bool, diag: &mut Diagnostics) -> f64 {
    let s_t = path.s_t();
    if weighted {
        let w = malliavin_weights(model, path);
        diag.floored_nodes += w.decay.floored_nodes as u64;
        model.payoff.antiderivative(s_t) / s_t * (1.0 + w.z)
    } else {
        model.payoff.value(s_t)
    }
}

/// Undiscounted price `E f(S_T)`, plain or through the Wiener weight.
pub fn estimate_price(
    model: &ValidatedModel,
    grid: &GridSpec,
    n_paths: u64,
    seed: u64,
    weighted: bool,
) -> Result<Estimate, EstimatorError> {
    let (stats, diag) = run_paths(n_paths, |idx, diag| {
        let path = simulate_path(model, grid, seed, idx);
        Ok([price_contribution(model, &path, weighted, diag)])
    })?;
    Ok(Estimate::from_stats(&stats[0], seed, diag))
}

pub fn estimate_delta(
    model: &ValidatedModel,
    grid: &GridSpec,
    n_paths: u64,
    seed: u64,
    method: DeltaMethod,
) -> Result<Estimate, EstimatorError> {
    let kernel = DeltaKernel::new(model, method)?;
    let (stats, diag) = run_paths(n_paths, |idx, diag| {
        let path = simulate_path(model, grid, seed, idx);
        Ok([kernel.evaluate(model, &path, diag)?])
    })?;
    Ok(Estimate::from_stats(&stats[0], seed, diag))
}

/// Several delta methods on the same paths; the returned estimates are
/// correlated through the shared scenarios.
pub fn estimate_deltas<const K: usize>(
    model: &ValidatedModel,
    grid: &GridSpec,
    n_paths: u64,
    seed: u64,
    methods: [DeltaMethod; K],
) -> Result<[Estimate; K], EstimatorError> {
    let kernels = methods
        .iter()
        .map(|m| DeltaKernel::new(model, *m))
        .collect::<Result<Vec<_>, _>>()?;
    let (stats, diag) = run_paths(n_paths, |idx, diag| {
        let path = simulate_path(model, grid, seed, idx);
        let mut out = [0.0; K];
        for (o, k) in out.iter_mut().zip(&kernels) {
            *o = k.evaluate(model, &path, diag)?;
        }
        Ok(out)
    })?;
    Ok(std::array::from_fn(|i| Estimate::from_stats(&stats[i], seed, diag)))
}

/// Undiscounted Black–Scholes call on a lognormal `S_T` with drift `μ`:
/// returns `(E(S_T − K)⁺, ∂/∂S_0)`.
pub fn black_scholes_call(s0: f64, mu: f64, sigma: f64, horizon: f64, strike: f64) -> (f64, f64) {
    let forward = s0 * (mu * horizon).exp();
    if strike <= 0.0 {
        return (forward - strike, (mu * horizon).exp());
    }
    let vol = sigma * horizon.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * vol * vol) / vol;
    let d2 = d1 - vol;
    (forward * norm_cdf(d1) - strike * norm_cdf(d2), (mu * horizon).exp() * norm_cdf(d1))
}

/// Conditional call value given `Λ = ∫₀ᵀ λ dt`: the jump count is
/// Poisson(Λ) and, given `k` jumps, `log S_T` is Gaussian. Returns
/// `(price, delta, tail)` where `tail` bounds the Poisson mass beyond the
/// truncation.
pub fn conditional_call(model: &ValidatedModel, big_lambda: f64, terms: usize) -> Result<(f64, f64, f64), EstimatorError> {
    let (mu_j, sd_j) = match (&model.jump.density, &model.jump.map) {
        (JumpDensity::Gaussian { mean, stdev }, JumpMap::Identity) => (*mean, *stdev),
        _ => return Err(EstimatorError::OracleUnsupported("requires Gaussian marks with J(z) = z")),
    };
    let strike = match model.payoff {
        Payoff::Call { strike } => strike,
        _ => return Err(EstimatorError::OracleUnsupported("requires a call payoff")),
    };
    let d = &model.diffusion;
    let base = d.s0.ln() + (d.mu - 0.5 * d.sigma1 * d.sigma1) * d.horizon - model.derived.v * big_lambda;
    let (mut price, mut delta) = (0.0, 0.0);
    let mut pmf = (-big_lambda).exp();
    let mut mass = 0.0;
    for k in 0..terms {
        if k > 0 {
            pmf *= big_lambda / k as f64;
        }
        mass += pmf;
        let m = base + k as f64 * mu_j;
        let s = (d.sigma1 * d.sigma1 * d.horizon + k as f64 * sd_j * sd_j).sqrt();
        let mean = (m + 0.5 * s * s).exp();
        if strike <= 0.0 {
            price += pmf * (mean - strike);
            delta += pmf * mean / d.s0;
        } else {
            let d1 = (m - strike.ln() + s * s) / s;
            let in_money = norm_cdf(d1);
            price += pmf * (mean * in_money - strike * norm_cdf(d1 - s));
            delta += pmf * mean * in_money / d.s0;
        }
    }
    Ok((price, delta, (1.0 - mass).max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub price: Estimate,
    pub delta: Estimate,
    /// Largest Poisson tail mass dropped by the truncation over all paths.
    pub max_tail: f64,
}

/// Default bound on the truncated Poisson tail.
pub const ORACLE_TAIL_TOLERANCE: f64 = 1e-10;

/// Simulates intensity paths only and averages the conditional closed forms.
/// `Λ` is the left-endpoint sum, which is exactly the jump-count mean of the
/// simulated scheme.
pub fn conditional_merton_oracle(
    model: &ValidatedModel,
    grid: &GridSpec,
    n_lambda_paths: u64,
    seed: u64,
    series_terms: usize,
) -> Result<OracleEstimate, EstimatorError> {
    conditional_call(model, 0.0, 1)?;
    let dt = grid.dt();
    // nonnegative floats order like their bit patterns
    let max_tail_bits = AtomicU64::new(0);
    let (stats, diag) = run_paths(n_lambda_paths, |idx, _| {
        let drivers = DriverSet::generate(grid, seed, idx);
        let lambda = simulate_intensity(grid, &model.cir, &drivers.dw);
        let big_lambda = lambda[..grid.n].iter().sum::<f64>() * dt;
        let (p, d, tail) = conditional_call(model, big_lambda, series_terms)?;
        max_tail_bits.fetch_max(tail.to_bits(), Ordering::Relaxed);
        Ok([p, d])
    })?;
    let max_tail = f64::from_bits(max_tail_bits.into_inner());
    if max_tail > ORACLE_TAIL_TOLERANCE {
        return Err(EstimatorError::SeriesTruncationTooCoarse { tail: max_tail, tolerance: ORACLE_TAIL_TOLERANCE });
    }
    Ok(OracleEstimate {
        price: Estimate::from_stats(&stats[0], seed, diag),
        delta: Estimate::from_stats(&stats[1], seed, diag),
        max_tail,
    })
}
