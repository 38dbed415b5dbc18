//! Strong convergence of the Euler scheme on coupled grids.
//!
//! Every path is simulated once on a reference grid (a multiple of the finest
//! level) and on each level with the same drivers, then per-path differences
//! of the target are averaged.

use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{price_contribution, DeltaKernel, DeltaMethod, Diagnostics, EstimatorError};
use crate::model::ValidatedModel;
use crate::paths::{build_coupled_family, GridSpec, PathBundle, PathError};
use crate::stats::RunningStats;

const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub abs_error: f64,
    pub mse_error: f64,
    pub log2_abs: f64,
    pub log2_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Column {
    Abs,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `S_T`
    Asset,
    /// Weighted price integrand `(F(S_T)/S_T)(1 + Z_T)`.
    Price,
    /// Per-path contribution of a delta estimator.
    Delta(DeltaMethod),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("LevelNotPowerOfTwo: levels must be n₀·2^k in ascending order, got {0:?}")]
    LevelNotPowerOfTwo(Vec<usize>),
    #[error("InsufficientRows: slope fit needs at least 4 rows, got {0}")]
    InsufficientRows(usize),
    #[error("reference factor must be at least 1")]
    InvalidReferenceFactor,
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

pub const DEFAULT_LEVELS: [usize; 5] = [100, 200, 400, 800, 1600];
pub const DEFAULT_REFERENCE_FACTOR: usize = 4;

pub fn run_convergence_study(
    model: &ValidatedModel,
    levels: &[usize],
    n_paths: u64,
    seed: u64,
    target: Target,
) -> Result<Vec<ConvergenceRow>, ConvergenceError> {
    run_convergence_study_with(model, levels, n_paths, seed, target, DEFAULT_REFERENCE_FACTOR)
}

/// As [`run_convergence_study`] with an explicit reference grid of
/// `reference_factor × finest level` steps.
pub fn run_convergence_study_with(
    model: &ValidatedModel,
    levels: &[usize],
    n_paths: u64,
    seed: u64,
    target: Target,
    reference_factor: usize,
) -> Result<Vec<ConvergenceRow>, ConvergenceError> {
    let doubling = levels.windows(2).all(|w| w[1] == 2 * w[0]);
    if levels.is_empty() || levels[0] == 0 || !doubling {
        return Err(ConvergenceError::LevelNotPowerOfTwo(levels.to_vec()));
    }
    if reference_factor == 0 {
        return Err(ConvergenceError::InvalidReferenceFactor);
    }
    if n_paths == 0 {
        return Err(EstimatorError::NoPaths(0).into());
    }
    let finest = *levels.last().expect("nonempty");
    let fine = GridSpec::new(finest * reference_factor, model.diffusion.horizon);
    let factors: Vec<usize> = levels.iter().map(|&n| fine.n / n).collect();
    let kernel = match target {
        Target::Delta(method) => Some(DeltaKernel::new(model, method)?),
        _ => None,
    };
    let eval = |path: &PathBundle| -> Result<f64, ConvergenceError> {
        let mut diag = Diagnostics::default();
        Ok(match target {
            Target::Asset => path.s_t(),
            Target::Price => price_contribution(model, path, true, &mut diag),
            Target::Delta(_) => kernel.as_ref().expect("built above").evaluate(model, path, &mut diag)?,
        })
    };

    let chunks = n_paths.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut abs = vec![RunningStats::new(); levels.len()];
            let mut sq = vec![RunningStats::new(); levels.len()];
            for idx in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let (reference, coarse) = build_coupled_family(&fine, &factors, model, seed, idx)?;
                let r = eval(&reference)?;
                for (k, path) in coarse.iter().enumerate() {
                    let d = r - eval(path)?;
                    abs[k].push(d.abs());
                    sq[k].push(d * d);
                }
            }
            Ok((abs, sq))
        })
        .collect::<Vec<Result<_, ConvergenceError>>>();

    let mut abs = vec![RunningStats::new(); levels.len()];
    let mut sq = vec![RunningStats::new(); levels.len()];
    for part in parts {
        let (a, s) = part?;
        for k in 0..levels.len() {
            abs[k].merge(&a[k]);
            sq[k].merge(&s[k]);
        }
    }
    Ok(levels
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (abs_error, mse_error) = (abs[k].mean(), sq[k].mean());
            ConvergenceRow { n, abs_error, mse_error, log2_abs: abs_error.log2(), log2_mse: mse_error.log2() }
        })
        .collect())
}

/// Least-squares fit of `log2(error)` against `log2(n)`.
pub fn fit_log2_slope(rows: &[ConvergenceRow], column: Column) -> Result<SlopeReport, ConvergenceError> {
    if rows.len() < 4 {
        return Err(ConvergenceError::InsufficientRows(rows.len()));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let y = match column {
                Column::Abs => r.log2_abs,
                Column::Mse => r.log2_mse,
            };
            ((r.n as f64).log2(), y)
        })
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeReport { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, CirParams, DiffusionParams, JumpLaw, Payoff};
    use approx::assert_relative_eq;

    fn rows_from_log2(ns: &[usize], log2_mse: &[f64]) -> Vec<ConvergenceRow> {
        ns.iter()
            .zip(log2_mse)
            .map(|(&n, &l)| ConvergenceRow { n, abs_error: 0.0, mse_error: l.exp2(), log2_abs: 0.0, log2_mse: l })
            .collect()
    }

    #[test]
    fn exact_power_law_slope() {
        let ns = [16, 32, 64, 128, 256];
        let logs: Vec<f64> = ns.iter().map(|&n| -(n as f64).log2()).collect();
        let fit = fit_log2_slope(&rows_from_log2(&ns, &logs), Column::Mse).unwrap();
        assert_relative_eq!(fit.slope, -1.0, epsilon = 1e-14);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn published_gaussian_and_kou_tables() {
        let ns: Vec<usize> = (0..9).map(|k| 100 << k).collect();
        let gaussian = [-9.2632, -10.7205, -11.9393, -13.1895, -14.8794, -15.8664, -16.8042, -18.1038, -19.1524];
        let kou = [-9.2857, -10.9481, -12.1544, -13.4421, -14.8213, -15.9298, -17.2007, -17.9369, -19.2163];
        let g = fit_log2_slope(&rows_from_log2(&ns, &gaussian), Column::Mse).unwrap();
        let k = fit_log2_slope(&rows_from_log2(&ns, &kou), Column::Mse).unwrap();
        // reference fits from an independent least-squares solver
        assert_relative_eq!(g.slope, -1.23522333, max_relative = 1e-7);
        assert_relative_eq!(k.slope, -1.22115167, max_relative = 1e-7);
        assert!((g.slope + 1.24).abs() < 0.03 && (k.slope + 1.24).abs() < 0.03);
    }

    #[test]
    fn too_few_rows() {
        let rows = rows_from_log2(&[1, 2, 4], &[0.0, -1.0, -2.0]);
        assert_eq!(fit_log2_slope(&rows, Column::Abs), Err(ConvergenceError::InsufficientRows(3)));
    }

    fn model() -> ValidatedModel {
        validate_model(
            CirParams::new(0.32, 2.0, 0.10, 0.10),
            DiffusionParams::new(1.0, 0.40, 5.0, 1.0),
            JumpLaw::gaussian(-0.10, 0.50),
            Payoff::Call { strike: 6.0 },
        )
        .unwrap()
    }

    #[test]
    fn levels_must_double() {
        let m = model();
        for bad in [vec![100, 300], vec![], vec![0, 0], vec![200, 100]] {
            assert!(matches!(
                run_convergence_study(&m, &bad, 10, 1, Target::Asset),
                Err(ConvergenceError::LevelNotPowerOfTwo(_))
            ));
        }
    }

    #[test]
    fn unit_coupling_has_zero_error() {
        let m = model();
        let rows = run_convergence_study_with(&m, &[64], 200, 1, Target::Asset, 1).unwrap();
        assert_eq!(rows[0].abs_error, 0.0);
        assert_eq!(rows[0].mse_error, 0.0);
    }

    #[test]
    fn asset_mse_decreases_and_is_reproducible() {
        let m = model();
        let a = run_convergence_study(&m, &[25, 50, 100, 200], 2000, 4, Target::Asset).unwrap();
        let b = run_convergence_study(&m, &[25, 50, 100, 200], 2000, 4, Target::Asset).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[1].mse_error < w[0].mse_error), "{a:?}");
    }
}
