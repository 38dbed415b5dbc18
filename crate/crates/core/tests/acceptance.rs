//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test --release --test acceptance -- --nocapture --test-threads=1`.

use std::time::Instant;

use coxpricer::convergence::{fit_log2_slope, run_convergence_study, Column, Target, DEFAULT_LEVELS};
use coxpricer::estimators::{
    black_scholes_call, conditional_call, conditional_merton_oracle, estimate_delta, estimate_deltas,
    estimate_price, DeltaMethod, Estimate,
};
use coxpricer::malliavin::{bt_functional, decay_accumulate, dw_bt, malliavin_weights};
use coxpricer::model::{validate_model, CirParams, DiffusionParams, JumpLaw, JumpMap, Payoff, ValidatedModel};
use coxpricer::paths::{simulate_intensity, simulate_path, DriverSet, GridSpec};
use coxpricer::stats::RunningStats;
use rayon::prelude::*;

const GRID_N: usize = 100;

fn model_7_1(jump: JumpLaw) -> ValidatedModel {
    validate_model(
        CirParams::new(0.32, 2.0, 0.10, 0.10),
        DiffusionParams::new(1.0, 0.40, 5.0, 1.0),
        jump,
        Payoff::Call { strike: 6.0 },
    )
    .unwrap()
}

fn gaussian_7_1() -> ValidatedModel {
    model_7_1(JumpLaw::gaussian(-0.10, 0.50))
}

fn kou_7_1() -> ValidatedModel {
    model_7_1(JumpLaw::kou(10.0, 5.0, 0.5).with_map(JumpMap::PosAbs))
}

fn model_7_2() -> ValidatedModel {
    validate_model(
        CirParams::new(0.5, 0.30, 0.05, 0.10),
        DiffusionParams::new(0.01, 0.10, 5.0, 1.0),
        JumpLaw::gaussian(-0.10, 0.50),
        Payoff::Call { strike: 6.0 },
    )
    .unwrap()
}

fn report(criterion: u32, pass: bool, detail: &str) -> bool {
    println!("{} criterion {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn check(label: &str, pass: bool, detail: String) -> bool {
    println!("    [{}] {label}: {detail}", if pass { "ok" } else { "violated" });
    pass
}

fn within_z(a: &Estimate, b: &Estimate, z: f64) -> (bool, f64) {
    let score = a.z_score(b);
    (score <= z, score)
}

#[test]
fn criterion_1_exact_delta() {
    let m = model_7_2();
    let grid = GridSpec::new(GRID_N, 1.0);
    let start = Instant::now();
    let e = estimate_delta(&m, &grid, 1_000_000, 101, DeltaMethod::PathwiseExact).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let target = 0.0481509;
    let ok = check(
        "pathwise delta vs 0.0481509 +- 0.005",
        (e.value - target).abs() <= 0.005,
        format!("{:.6} +- {:.6} (diff {:.6})", e.value, e.stderr, e.value - target),
    );
    let fast = check("runtime < 120 s", secs < 120.0, format!("{secs:.1} s"));
    assert!(report(1, ok && fast, "PathwiseExact delta at 1e6 paths"));
}

#[test]
fn criterion_2_method_error_ordering() {
    let m = model_7_2();
    let grid = GridSpec::new(GRID_N, 1.0);
    let [exact, wiener, region, fd] = estimate_deltas(
        &m,
        &grid,
        1_000_000,
        202,
        [
            DeltaMethod::PathwiseExact,
            DeltaMethod::WienerWeight,
            DeltaMethod::JumpRegionWeight,
            DeltaMethod::FiniteDifference { bump: None },
        ],
    )
    .unwrap();
    let err = |e: &Estimate| (e.value - exact.value).powi(2);
    println!("    pathwise {:.6} +- {:.6}", exact.value, exact.stderr);
    for (name, e) in [("wiener", &wiener), ("jump_region", &region), ("fd", &fd)] {
        println!("    {name} {:.6} +- {:.6}, squared error {:.3e}", e.value, e.stderr, err(e));
    }
    let a = check("err(wiener) <= 5e-3", err(&wiener) <= 5e-3, format!("{:.3e}", err(&wiener)));
    let b = check("err(jump_region) <= 2e-2", err(&region) <= 2e-2, format!("{:.3e}", err(&region)));
    let c = check("err(fd) >= err(wiener)", err(&fd) >= err(&wiener), format!("{:.3e} vs {:.3e}", err(&fd), err(&wiener)));
    assert!(report(2, a && b && c, "squared errors against PathwiseExact"));
}

#[test]
fn criterion_3_weighted_price_identity() {
    let grid = GridSpec::new(GRID_N, 1.0);
    let mut all = true;
    for (label, base) in [("7.1", gaussian_7_1()), ("7.2", model_7_2())] {
        for payoff in [Payoff::Call { strike: 6.0 }, Payoff::Sigmoid { center: 6.0, width: 0.5 }] {
            let m = base.with_payoff(payoff.clone());
            let plain = estimate_price(&m, &grid, 100_000, 301, false).unwrap();
            let weighted = estimate_price(&m, &grid, 100_000, 302, true).unwrap();
            let (ok, z) = within_z(&weighted, &plain, 4.0);
            let kind = if matches!(payoff, Payoff::Call { .. }) { "call" } else { "sigmoid" };
            all &= check(
                &format!("{label} {kind}"),
                ok,
                format!(
                    "weighted {:.6} +- {:.6}, plain {:.6} +- {:.6}, z = {z:.2}",
                    weighted.value, weighted.stderr, plain.value, plain.stderr
                ),
            );
        }
    }
    assert!(report(3, all, "weighted price equals plain price within 4 combined stderr"));
}

#[test]
fn criterion_4_convergence_slopes() {
    let start = Instant::now();
    let mut all = true;
    for (label, m) in [("gaussian", gaussian_7_1()), ("kou", kou_7_1())] {
        let targets = [
            ("asset", Target::Asset, Column::Mse, -0.5),
            ("price", Target::Price, Column::Abs, -0.25),
            ("delta", Target::Delta(DeltaMethod::JumpRegionWeight), Column::Mse, -0.5),
        ];
        for (name, target, column, bound) in targets {
            let rows = run_convergence_study(&m, &DEFAULT_LEVELS, 10_000, 401, target).unwrap();
            let fit = fit_log2_slope(&rows, column).unwrap();
            all &= check(
                &format!("{label} {name} slope <= {bound}"),
                fit.slope <= bound,
                format!("{:.4} (r2 {:.3})", fit.slope, fit.r_squared),
            );
            if name == "asset" {
                // soft band around the published tables
                let in_band = (-1.6..=-0.5).contains(&fit.slope);
                println!("    [{}] {label} asset slope in [-1.6, -0.5]", if in_band { "ok" } else { "warn" });
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    all &= check("runtime < 600 s", secs < 600.0, format!("{secs:.1} s"));
    assert!(report(4, all, "strong convergence slopes over levels 100..1600"));
}

#[test]
fn criterion_5_oracle_equivalence() {
    let grid = GridSpec::new(GRID_N, 1.0);
    let mut all = true;
    for (label, m) in [("7.1", gaussian_7_1()), ("7.2", model_7_2())] {
        let oracle = conditional_merton_oracle(&m, &grid, 100_000, 501, 60).unwrap();
        let price = estimate_price(&m, &grid, 200_000, 502, false).unwrap();
        let delta = estimate_delta(&m, &grid, 200_000, 503, DeltaMethod::PathwiseExact).unwrap();
        let (p_ok, pz) = within_z(&oracle.price, &price, 4.0);
        let (d_ok, dz) = within_z(&oracle.delta, &delta, 4.0);
        all &= check(
            &format!("{label} price"),
            p_ok,
            format!("oracle {:.6}, mc {:.6} +- {:.6}, z = {pz:.2}", oracle.price.value, price.value, price.stderr),
        );
        all &= check(
            &format!("{label} delta"),
            d_ok,
            format!("oracle {:.6}, mc {:.6} +- {:.6}, z = {dz:.2}", oracle.delta.value, delta.value, delta.stderr),
        );
    }
    for m in [gaussian_7_1(), model_7_2()] {
        let d = &m.diffusion;
        let (p, dl, _) = conditional_call(&m, 0.0, 60).unwrap();
        let (bp, bd) = black_scholes_call(d.s0, d.mu, d.sigma1, d.horizon, 6.0);
        let rel = ((p - bp) / bp).abs().max(((dl - bd) / bd).abs());
        all &= check("no jumps equals Black-Scholes", rel <= 1e-12, format!("relative {rel:.2e}"));
    }
    assert!(report(5, all, "conditional oracle against Monte Carlo"));
}

fn cir_moments(m: &ValidatedModel, n_paths: u64, seed: u64) -> bool {
    let grid = GridSpec::new(1000, m.diffusion.horizon);
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| *simulate_intensity(&grid, &m.cir, &DriverSet::generate(&grid, seed, i).dw).last().unwrap())
        .collect();
    let t = m.diffusion.horizon;
    let (mean, var) = (m.cir.mean(t), m.cir.variance(t));
    let mut first = RunningStats::new();
    let mut second = RunningStats::new();
    for x in &samples {
        first.push(*x);
        second.push((x - mean).powi(2));
    }
    let a = check(
        "CIR mean",
        (first.mean() - mean).abs() <= 4.0 * first.std_error(),
        format!("{:.6} vs {mean:.6} (se {:.1e})", first.mean(), first.std_error()),
    );
    let b = check(
        "CIR variance",
        (second.mean() - var).abs() <= 4.0 * second.std_error(),
        format!("{:.6} vs {var:.6} (se {:.1e})", second.mean(), second.std_error()),
    );
    a && b
}

#[test]
fn criterion_6_property_suite() {
    let grid = GridSpec::new(GRID_N, 1.0);
    let mut all = true;

    for m in [gaussian_7_1(), model_7_2()] {
        all &= cir_moments(&m, 100_000, 601);
    }

    for (label, m) in [("7.1", gaussian_7_1()), ("7.2", model_7_2())] {
        let discount = (-m.diffusion.mu * m.diffusion.horizon).exp();
        let (z, b_neg, disc) = (0..100_000u64)
            .into_par_iter()
            .map(|i| {
                let path = simulate_path(&m, &grid, 602, i);
                let w = malliavin_weights(&m, &path);
                (w.z, w.b_t < 0.0, discount * path.s_t())
            })
            .fold(
                || (RunningStats::new(), true, RunningStats::new()),
                |(mut z, neg, mut d), (zi, ni, di)| {
                    z.push(zi);
                    d.push(di);
                    (z, neg && ni, d)
                },
            )
            .reduce(
                || (RunningStats::new(), true, RunningStats::new()),
                |(mut z1, n1, mut d1), (z2, n2, d2)| {
                    z1.merge(&z2);
                    d1.merge(&d2);
                    (z1, n1 && n2, d1)
                },
            );
        let s0 = m.diffusion.s0;
        all &= check(
            &format!("{label} martingale"),
            (disc.mean() - s0).abs() <= 4.0 * disc.std_error(),
            format!("{:.6} vs {s0} (se {:.1e})", disc.mean(), disc.std_error()),
        );
        all &= check(
            &format!("{label} E[Z] = 0"),
            z.mean().abs() <= 4.0 * z.std_error(),
            format!("{:.4} (se {:.4})", z.mean(), z.std_error()),
        );
        all &= check(&format!("{label} B_T < 0 on every path"), b_neg, String::new());
    }

    // directional derivative of B_T along a Brownian shift of the tail
    let m = model_7_2();
    let fine = GridSpec::new(1 << 12, 1.0);
    let (kappa, cs, s2, floor) = (m.cir.kappa, m.derived.c_sigma, m.cir.sigma2, m.options.lambda_floor);
    let eps = 1e-5;
    let dt = fine.dt();
    let worst = (0..100u64)
        .into_par_iter()
        .map(|idx| {
            let d = DriverSet::generate(&fine, 603, idx);
            let lam = simulate_intensity(&fine, &m.cir, &d.dw);
            let dec = decay_accumulate(&fine, &lam, kappa, cs, floor);
            let b = bt_functional(&fine, &lam, &dec, s2);
            let dwb = dw_bt(&fine, &lam, &dec, s2, cs, floor);
            let start = (idx as usize * 37) % (fine.n / 2);
            let mut shifted = d.dw.clone();
            shifted[start..].iter_mut().for_each(|x| *x += eps * dt);
            let lam2 = simulate_intensity(&fine, &m.cir, &shifted);
            let dec2 = decay_accumulate(&fine, &lam2, kappa, cs, floor);
            let fd = (bt_functional(&fine, &lam2, &dec2, s2) - b) / eps;
            let predicted: f64 = dwb[start..fine.n].iter().sum::<f64>() * dt;
            ((fd - predicted) / predicted).abs()
        })
        .reduce(|| 0.0, f64::max);
    all &= check("Cameron-Martin on 100 paths", worst <= 1e-2, format!("worst relative {worst:.2e}"));

    // u_p is finite for the Kou law with |z| marks only while p < η_down = 5
    let laws = [
        ("gaussian", JumpLaw::gaussian(-0.10, 0.50), &[1.0, 2.0, 4.0, 8.0][..]),
        ("kou", JumpLaw::kou(10.0, 5.0, 0.5).with_map(JumpMap::PosAbs), &[1.0, 2.0, 4.0][..]),
    ];
    for (label, law, powers) in laws {
        for &p in powers {
            let closed = law.moment(p).unwrap();
            let quad = law.moment_by_quadrature(p).unwrap();
            let rel = ((closed - quad) / closed).abs();
            all &= check(&format!("{label} u_{p}"), rel <= 1e-10, format!("relative {rel:.1e}"));
        }
    }
    assert!(report(6, all, "property suite"));
}
