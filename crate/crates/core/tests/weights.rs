//! Statistical identities for the Wiener weight and the delta estimators.

use coxpricer::estimators::{estimate_delta, estimate_deltas, DeltaMethod};
use coxpricer::malliavin::malliavin_weights;
use coxpricer::model::{validate_model, CirParams, DiffusionParams, JumpLaw, Payoff, ValidatedModel};
use coxpricer::paths::{simulate_path, GridSpec};
use coxpricer::stats::RunningStats;
use rayon::prelude::*;

/// Fast, noisy intensity so the weight's correlations are measurable.
fn high_signal() -> ValidatedModel {
    validate_model(
        CirParams::new(2.0, 1.0, 1.0, 1.0),
        DiffusionParams::new(0.0, 0.1, 1.0, 1.0),
        JumpLaw::gaussian(0.5, 0.3),
        Payoff::Call { strike: 1.0 },
    )
    .unwrap()
}

fn model_7_2(strike: f64) -> ValidatedModel {
    validate_model(
        CirParams::new(0.5, 0.30, 0.05, 0.10),
        DiffusionParams::new(0.01, 0.10, 5.0, 1.0),
        JumpLaw::gaussian(-0.10, 0.50),
        Payoff::Call { strike },
    )
    .unwrap()
}

/// Means of `[Z, (X_T − ΣJ)·Z, N_T·Z]` over `n` paths.
fn z_moments(m: &ValidatedModel, grid: &GridSpec, n: u64, seed: u64) -> [RunningStats; 3] {
    let merge = |mut a: [RunningStats; 3], b: [RunningStats; 3]| {
        for (x, y) in a.iter_mut().zip(&b) {
            x.merge(y);
        }
        a
    };
    (0..n)
        .into_par_iter()
        .fold(
            || [RunningStats::new(); 3],
            |mut acc, i| {
                let path = simulate_path(m, grid, seed, i);
                let z = malliavin_weights(m, &path).z;
                let jumps: f64 = path.jumps.iter().map(|e| e.j_value).sum();
                acc[0].push(z);
                acc[1].push((path.x_t() - jumps) * z);
                acc[2].push(path.jumps.len() as f64 * z);
                acc
            },
        )
        .reduce(|| [RunningStats::new(); 3], merge)
}

#[test]
fn wiener_weight_duality() {
    let m = high_signal();
    let v = m.derived.v;
    let [z, cont, count] = z_moments(&m, &GridSpec::new(200, 1.0), 100_000, 11);
    assert!(z.mean().abs() < 4.0 * z.std_error(), "E[Z] = {} +- {}", z.mean(), z.std_error());
    // the weight differentiates the continuous part of X_T exactly once
    assert!((cont.mean() - 1.0).abs() < 4.0 * cont.std_error(), "{} +- {}", cont.mean(), cont.std_error());
    // the jump count responds to the intensity shift through E[N | λ] = Λ
    assert!((count.mean() + 1.0 / v).abs() < 4.0 * count.std_error(), "{} +- {} vs {}", count.mean(), count.std_error(), -1.0 / v);
}

#[test]
fn finite_difference_delta_decreases_in_strike() {
    let grid = GridSpec::new(50, 1.0);
    let method = DeltaMethod::FiniteDifference { bump: None };
    let deltas: Vec<f64> = [4.0, 4.5, 5.0, 5.5, 6.0, 6.5]
        .iter()
        .map(|&k| estimate_delta(&model_7_2(k), &grid, 20_000, 3, method).unwrap().value)
        .collect();
    assert!(deltas.windows(2).all(|w| w[1] < w[0]), "{deltas:?}");
}

#[test]
fn pathwise_and_finite_difference_agree() {
    let [pw, fd] = estimate_deltas(
        &model_7_2(6.0),
        &GridSpec::new(100, 1.0),
        100_000,
        5,
        [DeltaMethod::PathwiseExact, DeltaMethod::FiniteDifference { bump: None }],
    )
    .unwrap();
    assert!(pw.z_score(&fd) < 5.0, "{pw:?} {fd:?}");
}

#[test]
fn mixed_is_the_average_of_its_parts() {
    let [w, r, mixed] = estimate_deltas(
        &model_7_2(6.0),
        &GridSpec::new(50, 1.0),
        5_000,
        9,
        [DeltaMethod::WienerWeight, DeltaMethod::JumpRegionWeight, DeltaMethod::Mixed { wiener_share: 0.5 }],
    )
    .unwrap();
    let expected = 0.5 * (w.value + r.value);
    assert!((mixed.value - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{} vs {expected}", mixed.value);
}
