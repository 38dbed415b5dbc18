//! Adaptive Simpson quadrature.

use thiserror::Error;

const INITIAL_PANELS: usize = 64;
const MAX_DEPTH: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("adaptive Simpson did not reach tolerance {tol:e} on [{lo}, {hi}]")]
pub struct QuadratureError {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first cut into fixed panels so that narrow features are
/// not skipped by the coarsest Simpson estimate, then each panel is refined
/// recursively with Richardson correction.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let width = (hi - lo) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut failed = false;
    for k in 0..INITIAL_PANELS {
        let p_lo = lo + k as f64 * width;
        let p_hi = if k + 1 == INITIAL_PANELS { hi } else { p_lo + width };
        let mid = 0.5 * (p_lo + p_hi);
        // outer endpoints are sampled just inside so that a function with a
        // jump exactly at a breakpoint contributes its one-sided limit
        let inset = 1e-15 * (hi - lo);
        let f_lo = if k == 0 { f(lo + inset) } else { f(p_lo) };
        let f_hi = if k + 1 == INITIAL_PANELS { f(hi - inset) } else { f(p_hi) };
        let f_mid = f(mid);
        let whole = simpson(p_lo, p_hi, f_lo, f_mid, f_hi);
        total += refine(&f, p_lo, p_hi, f_lo, f_mid, f_hi, whole, panel_tol, MAX_DEPTH, &mut failed);
    }
    if failed || !total.is_finite() {
        return Err(QuadratureError { lo, hi, tol });
    }
    Ok(sign * total)
}

/// Integrates over `[a, b]` splitting at every breakpoint inside the interval.
pub fn adaptive_simpson_split<F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&c| c > a && c < b).collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let pieces = (edges.len() - 1) as f64;
    edges
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], tol / pieces))
        .sum()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // the second test stops refinement once the correction is at roundoff level
    if delta.abs() <= 15.0 * tol || delta.abs() <= 64.0 * f64::EPSILON * (left.abs() + right.abs()) {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, failed)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, failed)
}
