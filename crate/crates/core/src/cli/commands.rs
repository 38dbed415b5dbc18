//! Command implementations. Each produces the text artifact for its output
//! destination plus any notes for stderr.

use thiserror::Error;

use super::config::{ConfigErrors, RunConfig};
use super::output::{render, Metadata, Table};
use crate::convergence::{fit_log2_slope, run_convergence_study_with, Column, ConvergenceError};
use crate::estimators::{
    conditional_merton_oracle, estimate_delta, estimate_price, Estimate, EstimatorError,
};
use crate::model::{check_inequalities, estimate_p0, ValidatedModel, ValidationErrors};
use crate::paths::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Price,
    Delta,
    Converge,
    Oracle,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Price => "price",
            CommandKind::Delta => "delta",
            CommandKind::Converge => "converge",
            CommandKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig { path: String, source: std::io::Error },
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("COXPRICER_THREADS must be a non-negative integer, found {0:?}")]
    Threads(String),
    #[error("{0}")]
    Validation(#[from] ValidationErrors),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Config(_) | CliError::Threads(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Estimator(_) | CliError::Convergence(_) | CliError::Write { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifact: String,
    /// Warnings and failure details for stderr.
    pub notes: Vec<String>,
    pub exit_code: i32,
}

pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut meta = Metadata::new(kind.name(), cfg.run.seed, &cfg.hash());
    if kind == CommandKind::Validate {
        return Ok(validate(cfg, meta));
    }
    let model = cfg.validated_model()?;
    let notes: Vec<String> = model.warnings.iter().map(|w| format!("warning: {w}")).collect();
    let grid = GridSpec::new(cfg.run.grid_n, model.diffusion.horizon);
    let table = match kind {
        CommandKind::Price => {
            let e = estimate_price(&model, &grid, cfg.run.n_paths, cfg.run.seed, cfg.run.weighted)?;
            let label = if cfg.run.weighted { "weighted" } else { "plain" };
            meta.push("grid_n", cfg.run.grid_n);
            estimate_table(&[("price", label, e)])
        }
        CommandKind::Delta => {
            let method = cfg.delta_method();
            let e = estimate_delta(&model, &grid, cfg.run.n_paths, cfg.run.seed, method)?;
            meta.push("grid_n", cfg.run.grid_n);
            estimate_table(&[("delta", method.name(), e)])
        }
        CommandKind::Oracle => {
            let o = conditional_merton_oracle(&model, &grid, cfg.run.n_paths, cfg.run.seed, cfg.run.series_terms)?;
            meta.push("grid_n", cfg.run.grid_n);
            meta.push("series_terms", cfg.run.series_terms);
            meta.push("max_tail", o.max_tail);
            estimate_table(&[("price", "oracle", o.price), ("delta", "oracle", o.delta)])
        }
        CommandKind::Converge => converge(cfg, &model, &mut meta)?,
        CommandKind::Validate => unreachable!("handled above"),
    };
    Ok(Outcome { artifact: render(&table, &meta, cfg.output.format), notes, exit_code: 0 })
}

fn estimate_table(rows: &[(&str, &str, Estimate)]) -> Table {
    let mut t = Table::new(vec![
        "quantity",
        "method",
        "value",
        "stderr",
        "ci95_low",
        "ci95_high",
        "n_paths",
        "seed",
        "floored_nodes",
        "empty_cutoff_paths",
    ]);
    for (quantity, method, e) in rows {
        t.push(vec![
            (*quantity).into(),
            (*method).into(),
            e.value.into(),
            e.stderr.into(),
            e.ci95.0.into(),
            e.ci95.1.into(),
            e.n_paths.into(),
            e.seed.into(),
            e.diagnostics.floored_nodes.into(),
            e.diagnostics.empty_cutoff_paths.into(),
        ]);
    }
    t
}

fn converge(cfg: &RunConfig, model: &ValidatedModel, meta: &mut Metadata) -> Result<Table, CliError> {
    let target = cfg.target();
    let rows = run_convergence_study_with(
        model,
        &cfg.run.levels,
        cfg.run.n_paths,
        cfg.run.seed,
        target,
        cfg.run.reference_factor,
    )?;
    meta.push("target", cfg.run.target.as_str());
    if cfg.run.target == "delta" {
        meta.push("method", cfg.run.method.as_str());
    }
    meta.push("reference_factor", cfg.run.reference_factor);
    if rows.len() >= 4 {
        for (label, column) in [("abs", Column::Abs), ("mse", Column::Mse)] {
            let fit = fit_log2_slope(&rows, column)?;
            meta.push(&format!("slope_{label}"), fit.slope);
            meta.push(&format!("r2_{label}"), fit.r_squared);
        }
    }
    let mut t = Table::new(vec!["n", "abs_error", "mse_error", "log2_abs", "log2_mse"]);
    for r in rows {
        t.push(vec![r.n.into(), r.abs_error.into(), r.mse_error.into(), r.log2_abs.into(), r.log2_mse.into()]);
    }
    Ok(t)
}

/// Inequality report. Exits with 2 when the model would be rejected, after
/// still emitting every check.
fn validate(cfg: &RunConfig, meta: Metadata) -> Outcome {
    let mut t = Table::new(vec!["check", "statement", "lhs", "rhs", "holds"]);
    for c in check_inequalities(&cfg.model.cir) {
        t.push(vec![c.name.into(), c.statement.into(), c.lhs.into(), c.rhs.into(), c.holds.into()]);
    }
    let jump = cfg.jump_law();
    if let Ok(v) = jump.drift() {
        t.push(vec![
            "NonDegenerateJump".into(),
            "|v| >= eps0".into(),
            v.abs().into(),
            jump.eps0.into(),
            (v.abs() >= jump.eps0).into(),
        ]);
    }
    let p_max = cfg.model.p_max as f64;
    let u = jump.moment(p_max).unwrap_or(f64::INFINITY);
    t.push(vec!["MomentFinite".into(), "u_pmax < inf".into(), u.into(), f64::INFINITY.into(), u.is_finite().into()]);
    let opts = cfg.model_options();
    let p0 = estimate_p0(&cfg.model.cir, &jump, opts.p0_scan_max);
    t.push(vec![
        "P0Estimate".into(),
        "p0 >= threshold (warning only)".into(),
        p0.into(),
        opts.p0_threshold.into(),
        (p0 >= opts.p0_threshold).into(),
    ]);

    let (notes, exit_code) = match cfg.validated_model() {
        Ok(model) => (model.warnings.iter().map(|w| format!("warning: {w}")).collect(), 0),
        Err(errs) => (errs.0.iter().map(|e| format!("error: {e}")).collect(), 2),
    };
    Outcome { artifact: render(&t, &meta, cfg.output.format), notes, exit_code }
}
