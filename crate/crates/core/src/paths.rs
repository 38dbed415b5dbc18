//! Driver generation and Euler simulation of intensity, jumps and asset.
//!
//! Jumps are drawn with a hazard clock: an exponential threshold is consumed
//! by the integrated piecewise-constant intensity `λ_i·dt`, and an event fires
//! each time the threshold is exhausted. Per step this yields a
//! Poisson(`λ_i·dt`) count with uniform event times, while drawing random
//! numbers only when an event actually occurs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::model::{CirParams, JumpLaw, ValidatedModel};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(n: usize, horizon: f64) -> Self {
        assert!(n >= 1, "grid needs at least one step");
        Self { n, horizon }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("CoarsenMismatch: factor {factor} does not divide {fine_n} steps")]
    CoarsenMismatch { fine_n: usize, factor: usize },
}

/// Random inputs of one path: both Brownian increment arrays and the jump
/// stream.
#[derive(Debug, Clone)]
pub struct DriverSet {
    /// Increments of the intensity Brownian motion.
    pub dw: Vec<f64>,
    /// Increments of the asset Brownian motion.
    pub dws: Vec<f64>,
    pub jump_rng: ChaCha8Rng,
    pub seed: u64,
    pub path_index: u64,
}

impl DriverSet {
    pub fn generate(grid: &GridSpec, seed: u64, path_index: u64) -> Self {
        let sd = grid.dt().sqrt();
        let draw = |purpose| {
            let mut rng = stream(seed, path_index, purpose);
            (0..grid.n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect::<Vec<f64>>()
        };
        Self {
            dw: draw(Purpose::IntensityBrownian),
            dws: draw(Purpose::AssetBrownian),
            jump_rng: stream(seed, path_index, Purpose::Jumps),
            seed,
            path_index,
        }
    }

    /// Increments of the coarse grid: sums of `factor` consecutive fine ones.
    pub fn coarsen_increments(fine: &[f64], factor: usize) -> Vec<f64> {
        fine.chunks_exact(factor).map(|c| c.iter().sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    /// Grid step `i` with `t_i ≤ time < t_{i+1}`; the jump is applied at `t_{i+1}`.
    pub step: usize,
    pub mark: f64,
    pub j_value: f64,
}

/// One simulated scenario on one grid.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: GridSpec,
    pub dw: Vec<f64>,
    pub dws: Vec<f64>,
    /// Truncated Euler intensity `λ̂_i⁺` per node.
    pub lambda: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    /// Log-return `log(S_t/S_0)` per node.
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

impl PathBundle {
    pub fn s_t(&self) -> f64 {
        *self.s.last().expect("nonempty path")
    }

    pub fn x_t(&self) -> f64 {
        *self.x.last().expect("nonempty path")
    }
}

/// Full-truncation Euler for the CIR intensity; returns `max(λ̂_i, 0)` at
/// every node.
pub fn simulate_intensity(grid: &GridSpec, cir: &CirParams, dw: &[f64]) -> Vec<f64> {
    assert_eq!(dw.len(), grid.n, "driver length must match the grid");
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.n + 1);
    let mut raw = cir.lambda0;
    out.push(raw.max(0.0));
    for &inc in dw {
        let pos = raw.max(0.0);
        raw += cir.kappa * (cir.theta - pos) * dt + cir.sigma2 * pos.sqrt() * inc;
        out.push(raw.max(0.0));
    }
    out
}

/// Jump events for a piecewise-constant intensity `λ_i` on `[t_i, t_{i+1})`.
pub fn simulate_jumps<R: Rng + ?Sized>(grid: &GridSpec, jump: &JumpLaw, lambda: &[f64], rng: &mut R) -> Vec<JumpEvent> {
    let dt = grid.dt();
    let mut events = Vec::new();
    let mut threshold: f64 = Exp1.sample(rng);
    for (i, &rate) in lambda.iter().take(grid.n).enumerate() {
        let mut remaining = rate * dt;
        let mut used = 0.0;
        while threshold <= remaining {
            used += threshold;
            remaining -= threshold;
            let time = (grid.time(i) + used / rate).min(grid.time(i + 1));
            let mark = jump.sample_mark(rng);
            events.push(JumpEvent { time, step: i, mark, j_value: jump.j(mark) });
            threshold = Exp1.sample(rng);
        }
        threshold -= remaining;
    }
    events
}

/// Assembles log-asset and asset on the grid: left-endpoint compensator,
/// exact Brownian part, jumps applied at the end of their step.
pub fn build_asset_path(
    grid: &GridSpec,
    model: &ValidatedModel,
    lambda: Vec<f64>,
    jumps: Vec<JumpEvent>,
    dw: Vec<f64>,
    dws: Vec<f64>,
) -> PathBundle {
    let dt = grid.dt();
    let d = &model.diffusion;
    let v = model.derived.v;
    let drift = (d.mu - 0.5 * d.sigma1 * d.sigma1) * dt;
    let mut jump_sum = vec![0.0; grid.n];
    for e in &jumps {
        jump_sum[e.step] += e.j_value;
    }
    let mut x = Vec::with_capacity(grid.n + 1);
    let mut acc = 0.0;
    x.push(acc);
    for i in 0..grid.n {
        acc += drift + d.sigma1 * dws[i] - v * lambda[i] * dt + jump_sum[i];
        x.push(acc);
    }
    let s = x.iter().map(|xi| d.s0 * xi.exp()).collect();
    PathBundle { grid: *grid, dw, dws, lambda, jumps, x, s }
}

/// Simulates path `index` of the run keyed by `seed`.
pub fn simulate_path(model: &ValidatedModel, grid: &GridSpec, seed: u64, index: u64) -> PathBundle {
    let mut drivers = DriverSet::generate(grid, seed, index);
    let lambda = simulate_intensity(grid, &model.cir, &drivers.dw);
    let jumps = simulate_jumps(grid, &model.jump, &lambda, &mut drivers.jump_rng);
    build_asset_path(grid, model, lambda, jumps, drivers.dw, drivers.dws)
}

/// Reference path on `fine_grid` and one coarse path per factor, all driven
/// by the same Brownian increments and the same candidate jump stream.
///
/// Candidate events are drawn at the dominating rate `max(λ_fine, λ_coarse…)`
/// of each fine step; each grid keeps a candidate when a shared uniform `u`
/// satisfies `u·λ_max < λ_grid`. Every grid therefore sees jumps at exactly
/// its own piecewise-constant intensity, and grids disagree only on the
/// fraction `|λ_a − λ_b|/λ_max` of candidates.
pub fn build_coupled_family(
    fine_grid: &GridSpec,
    factors: &[usize],
    model: &ValidatedModel,
    seed: u64,
    index: u64,
) -> Result<(PathBundle, Vec<PathBundle>), PathError> {
    for &factor in factors {
        if factor == 0 || fine_grid.n % factor != 0 {
            return Err(PathError::CoarsenMismatch { fine_n: fine_grid.n, factor });
        }
    }
    let mut drivers = DriverSet::generate(fine_grid, seed, index);
    let fine_lambda = simulate_intensity(fine_grid, &model.cir, &drivers.dw);
    let coarse: Vec<(GridSpec, Vec<f64>, Vec<f64>, Vec<f64>)> = factors
        .iter()
        .map(|&factor| {
            let grid = GridSpec::new(fine_grid.n / factor, fine_grid.horizon);
            let dw = DriverSet::coarsen_increments(&drivers.dw, factor);
            let dws = DriverSet::coarsen_increments(&drivers.dws, factor);
            let lambda = simulate_intensity(&grid, &model.cir, &dw);
            (grid, dw, dws, lambda)
        })
        .collect();

    let dt = fine_grid.dt();
    let rng = &mut drivers.jump_rng;
    let mut fine_jumps = Vec::new();
    let mut coarse_jumps: Vec<Vec<JumpEvent>> = vec![Vec::new(); factors.len()];
    let mut threshold: f64 = Exp1.sample(rng);
    for j in 0..fine_grid.n {
        let lam_f = fine_lambda[j];
        let lam_max = factors
            .iter()
            .zip(&coarse)
            .fold(lam_f, |m, (&factor, c)| m.max(c.3[j / factor]));
        let mut remaining = lam_max * dt;
        let mut used = 0.0;
        while threshold <= remaining {
            used += threshold;
            remaining -= threshold;
            let time = (fine_grid.time(j) + used / lam_max).min(fine_grid.time(j + 1));
            let u: f64 = rng.random();
            let mark = model.jump.sample_mark(rng);
            let j_value = model.jump.j(mark);
            if u * lam_max < lam_f {
                fine_jumps.push(JumpEvent { time, step: j, mark, j_value });
            }
            for ((&factor, c), out) in factors.iter().zip(&coarse).zip(coarse_jumps.iter_mut()) {
                if u * lam_max < c.3[j / factor] {
                    out.push(JumpEvent { time, step: j / factor, mark, j_value });
                }
            }
            threshold = Exp1.sample(rng);
        }
        threshold -= remaining;
    }

    let coarse_paths = coarse
        .into_iter()
        .zip(coarse_jumps)
        .map(|((grid, dw, dws, lambda), jumps)| build_asset_path(&grid, model, lambda, jumps, dw, dws))
        .collect();
    let reference = build_asset_path(fine_grid, model, fine_lambda, fine_jumps, drivers.dw, drivers.dws);
    Ok((reference, coarse_paths))
}

/// Reference path and one coarse path whose grid has `fine_grid.n / coarsen`
/// steps.
pub fn build_coupled_pair(
    fine_grid: &GridSpec,
    coarsen: usize,
    model: &ValidatedModel,
    seed: u64,
    index: u64,
) -> Result<(PathBundle, PathBundle), PathError> {
    let (reference, mut coarse) = build_coupled_family(fine_grid, &[coarsen], model, seed, index)?;
    Ok((reference, coarse.pop().expect("one coarse path")))
}
