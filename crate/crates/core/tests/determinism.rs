use coxpricer::convergence::{run_convergence_study, Target};
use coxpricer::estimators::{conditional_merton_oracle, estimate_delta, estimate_price, DeltaMethod};
use coxpricer::model::{validate_model, CirParams, DiffusionParams, JumpLaw, Payoff, ValidatedModel};
use coxpricer::paths::GridSpec;

fn model() -> ValidatedModel {
    validate_model(
        CirParams::new(0.5, 0.30, 0.05, 0.10),
        DiffusionParams::new(0.01, 0.10, 5.0, 1.0),
        JumpLaw::gaussian(-0.10, 0.50),
        Payoff::Call { strike: 6.0 },
    )
    .unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let m = model();
    let grid = GridSpec::new(40, 1.0);
    let run = || {
        (
            estimate_price(&m, &grid, 5_000, 8, true).unwrap(),
            estimate_delta(&m, &grid, 5_000, 8, DeltaMethod::JumpSmoothWeight).unwrap(),
            estimate_delta(&m, &grid, 5_000, 8, DeltaMethod::FiniteDifference { bump: None }).unwrap(),
            conditional_merton_oracle(&m, &grid, 5_000, 8, 40).unwrap(),
        )
    };
    let one = in_pool(1, run);
    let many = in_pool(5, run);
    assert_eq!(one.0.value.to_bits(), many.0.value.to_bits());
    assert_eq!(one.0.stderr.to_bits(), many.0.stderr.to_bits());
    assert_eq!(one.1.value.to_bits(), many.1.value.to_bits());
    assert_eq!(one.1.diagnostics, many.1.diagnostics);
    assert_eq!(one.2.value.to_bits(), many.2.value.to_bits());
    assert_eq!(one.3.delta.value.to_bits(), many.3.delta.value.to_bits());
}

#[test]
fn convergence_rows_do_not_depend_on_thread_count() {
    let m = model();
    let run = || run_convergence_study(&m, &[10, 20, 40, 80], 600, 3, Target::Price).unwrap();
    assert_eq!(in_pool(1, run), in_pool(3, run));
}

#[test]
fn seeds_change_results() {
    let m = model();
    let grid = GridSpec::new(20, 1.0);
    let a = estimate_price(&m, &grid, 1_000, 1, false).unwrap();
    let b = estimate_price(&m, &grid, 1_000, 2, false).unwrap();
    assert_ne!(a.value, b.value);
}
