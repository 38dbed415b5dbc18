//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [model]
//! kappa = 0.5
//! jump_law = gaussian
//! ...
//! [run]
//! n_paths = 100000
//! [output]
//! format = csv
//! ```
//!
//! `#` starts a comment. Unknown sections and keys are rejected; every
//! problem in a file is reported, each with its `section.key` path.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::convergence::Target;
use crate::estimators::DeltaMethod;
use crate::model::{
    validate_model_with, CirParams, CutoffConfig, DiffusionParams, JumpLaw, JumpMap, ModelOptions, Payoff,
    ValidatedModel, ValidationErrors,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Finite and > 0.
    Positive,
    /// Finite and ≥ 0.
    NonNegative,
    Finite,
    /// Finite, in [0, 1].
    Probability,
    /// Integer ≥ 1.
    Count,
    /// Integer ≥ 0.
    Seed,
    Bool,
    Choice(&'static [&'static str]),
    /// Comma-separated counts.
    CountList,
    Text,
}

impl Kind {
    fn expected(&self) -> String {
        match self {
            Kind::Positive => "finite number > 0".into(),
            Kind::NonNegative => "finite number >= 0".into(),
            Kind::Finite => "finite number".into(),
            Kind::Probability => "number in [0, 1]".into(),
            Kind::Count => "integer >= 1".into(),
            Kind::Seed => "integer >= 0".into(),
            Kind::Bool => "true or false".into(),
            Kind::Choice(opts) => format!("one of {}", opts.join("|")),
            Kind::CountList => "comma-separated integers >= 1".into(),
            Kind::Text => "text".into(),
        }
    }

    fn check(&self, raw: &str) -> bool {
        let float = || raw.parse::<f64>().ok().filter(|x| x.is_finite());
        match self {
            Kind::Positive => float().is_some_and(|x| x > 0.0),
            Kind::NonNegative => float().is_some_and(|x| x >= 0.0),
            Kind::Finite => float().is_some(),
            Kind::Probability => float().is_some_and(|x| (0.0..=1.0).contains(&x)),
            Kind::Count => raw.parse::<u64>().is_ok_and(|x| x >= 1),
            Kind::Seed => raw.parse::<u64>().is_ok(),
            Kind::Bool => matches!(raw, "true" | "false"),
            Kind::Choice(opts) => opts.contains(&raw),
            Kind::CountList => {
                !raw.is_empty() && raw.split(',').all(|p| p.trim().parse::<usize>().is_ok_and(|x| x >= 1))
            }
            Kind::Text => !raw.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Need {
    Always,
    Optional,
    /// Required when another key has the given value.
    When(&'static str, &'static str),
}

struct KeySpec {
    path: &'static str,
    kind: Kind,
    need: Need,
    default: Option<&'static str>,
}

const fn key(path: &'static str, kind: Kind, need: Need, default: Option<&'static str>) -> KeySpec {
    KeySpec { path, kind, need, default }
}

pub const JUMP_LAWS: &[&str] = &["gaussian", "kou"];
pub const JUMP_MAPS: &[&str] = &["identity", "neg_abs", "pos_abs"];
pub const PAYOFFS: &[&str] = &["call", "sigmoid"];
pub const METHODS: &[&str] = &["wiener", "jump_region", "jump_smooth", "fd", "pathwise", "mixed"];
pub const TARGETS: &[&str] = &["asset", "price", "delta"];
pub const FORMATS: &[&str] = &["csv", "json"];

use Kind::*;
use Need::*;

static SCHEMA: &[KeySpec] = &[
    key("model.kappa", Positive, Always, None),
    key("model.theta", Positive, Always, None),
    key("model.sigma2", Positive, Always, None),
    key("model.lambda0", NonNegative, Always, None),
    key("model.mu", Finite, Always, None),
    key("model.sigma1", Positive, Always, None),
    key("model.s0", Positive, Always, None),
    key("model.horizon", Positive, Always, None),
    key("model.jump_law", Choice(JUMP_LAWS), Always, None),
    key("model.jump_mean", Finite, When("model.jump_law", "gaussian"), None),
    key("model.jump_stdev", Positive, When("model.jump_law", "gaussian"), None),
    key("model.kou_eta_up", Positive, When("model.jump_law", "kou"), None),
    key("model.kou_eta_down", Positive, When("model.jump_law", "kou"), None),
    key("model.kou_p_up", Probability, When("model.jump_law", "kou"), None),
    key("model.jump_map", Choice(JUMP_MAPS), Optional, None),
    key("model.payoff", Choice(PAYOFFS), Always, None),
    key("model.strike", NonNegative, When("model.payoff", "call"), None),
    key("model.sigmoid_center", Finite, When("model.payoff", "sigmoid"), None),
    key("model.sigmoid_width", Positive, When("model.payoff", "sigmoid"), None),
    key("model.eps0", Positive, Optional, Some("0.001")),
    key("model.gamma", NonNegative, Optional, Some("0")),
    key("model.c_j", Positive, Optional, Some("1")),
    key("model.p_max", Count, Optional, Some("4")),
    key("model.lambda_floor", Positive, Optional, Some("1e-12")),
    key("model.cutoff_radius", Positive, Optional, None),
    key("model.cutoff_alpha", Positive, Optional, Some("1")),
    key("run.n_paths", Count, Optional, Some("100000")),
    key("run.grid_n", Count, Optional, Some("100")),
    key("run.seed", Seed, Optional, Some("1")),
    key("run.method", Choice(METHODS), Optional, Some("pathwise")),
    key("run.wiener_share", Probability, Optional, Some("0.5")),
    key("run.fd_bump", Positive, Optional, None),
    key("run.levels", CountList, Optional, Some("100,200,400,800,1600")),
    key("run.reference_factor", Count, Optional, Some("4")),
    key("run.target", Choice(TARGETS), Optional, Some("asset")),
    key("run.series_terms", Count, Optional, Some("40")),
    key("run.weighted", Bool, Optional, Some("false")),
    key("output.format", Choice(FORMATS), Optional, Some("csv")),
    key("output.path", Text, Optional, Some("-")),
];

const SECTIONS: &[&str] = &["model", "run", "output"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("SchemaError at {key}: unknown key")]
    UnknownKey { key: String },
    #[error("SchemaError at {key}: set more than once")]
    DuplicateKey { key: String },
    #[error("SchemaError at {key}: missing required key, expected {expected}")]
    Missing { key: String, expected: String },
    #[error("SchemaError at {key}: expected {expected}, found {found:?}")]
    Schema { key: String, expected: String, found: String },
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key }
            | ConfigError::DuplicateKey { key }
            | ConfigError::Missing { key, .. }
            | ConfigError::Schema { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct ConfigErrors(pub Vec<ConfigError>);

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    File,
    CommandLine,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpSpec {
    Gaussian { mean: f64, stdev: f64 },
    Kou { eta_up: f64, eta_down: f64, p_up: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayoffSpec {
    Call { strike: f64 },
    Sigmoid { center: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub cir: CirParams,
    pub diffusion: DiffusionParams,
    pub jump: JumpSpec,
    /// `None` selects the law's default map.
    pub jump_map: Option<String>,
    pub payoff: PayoffSpec,
    pub eps0: f64,
    pub gamma: f64,
    pub c_j: f64,
    pub p_max: u32,
    pub lambda_floor: f64,
    pub cutoff_radius: Option<f64>,
    pub cutoff_alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub n_paths: u64,
    pub grid_n: usize,
    pub seed: u64,
    pub method: String,
    pub wiener_share: f64,
    /// `None` means `0.01·s0`.
    pub fd_bump: Option<f64>,
    pub levels: Vec<usize>,
    pub reference_factor: usize,
    pub target: String,
    pub series_terms: usize,
    pub weighted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub format: OutputFormat,
    pub path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSection,
    pub run: RunSection,
    pub output: OutputSection,
    /// Source of every key that has a value.
    pub provenance: BTreeMap<String, Provenance>,
}

fn spec(path: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|k| k.path == path)
}

fn lex(text: &str) -> (Vec<(String, String)>, Vec<ConfigError>) {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut section: Option<String> = None;
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(ConfigError::Syntax { line: line_no, message: format!("unterminated section header {line:?}") });
                continue;
            };
            let name = name.trim();
            if SECTIONS.contains(&name) {
                section = Some(name.to_string());
            } else {
                errors.push(ConfigError::UnknownSection { line: line_no, section: name.to_string() });
                section = None;
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(ConfigError::Syntax { line: line_no, message: format!("expected key = value, found {line:?}") });
            continue;
        };
        match &section {
            Some(s) => entries.push((format!("{s}.{}", k.trim()), v.trim().to_string())),
            None => errors.push(ConfigError::Syntax {
                line: line_no,
                message: format!("key {:?} outside a known section", k.trim()),
            }),
        }
    }
    (entries, errors)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `section.key = value` overrides (as given on
/// the command line) before type checking.
pub fn parse_config_with_overrides(text: &str, overrides: &[(&str, String)]) -> Result<RunConfig, ConfigErrors> {
    let (entries, mut errors) = lex(text);
    let mut explicit: BTreeMap<String, (String, Provenance)> = BTreeMap::new();
    for (k, v) in entries {
        if spec(&k).is_none() {
            errors.push(ConfigError::UnknownKey { key: k });
        } else if explicit.contains_key(&k) {
            errors.push(ConfigError::DuplicateKey { key: k });
        } else {
            explicit.insert(k, (v, Provenance::File));
        }
    }
    for (k, v) in overrides {
        if spec(k).is_none() {
            errors.push(ConfigError::UnknownKey { key: k.to_string() });
        } else {
            explicit.insert(k.to_string(), (v.clone(), Provenance::CommandLine));
        }
    }

    let mut resolved: BTreeMap<String, (String, Provenance)> = BTreeMap::new();
    for ks in SCHEMA {
        if let Some((v, p)) = explicit.get(ks.path) {
            if ks.kind.check(v) {
                resolved.insert(ks.path.to_string(), (v.clone(), *p));
            } else {
                errors.push(ConfigError::Schema {
                    key: ks.path.to_string(),
                    expected: ks.kind.expected(),
                    found: v.clone(),
                });
            }
        } else if let Some(d) = ks.default {
            resolved.insert(ks.path.to_string(), (d.to_string(), Provenance::Default));
        }
    }
    for ks in SCHEMA {
        let required = match ks.need {
            Always => true,
            Optional => false,
            When(other, value) => explicit.get(other).is_some_and(|(v, _)| v == value),
        };
        if required && !explicit.contains_key(ks.path) {
            errors.push(ConfigError::Missing { key: ks.path.to_string(), expected: ks.kind.expected() });
        }
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(build(&resolved))
}

fn build(values: &BTreeMap<String, (String, Provenance)>) -> RunConfig {
    let s = |k: &str| values.get(k).map(|v| v.0.as_str());
    let f = |k: &str| s(k).map(|v| v.parse::<f64>().expect("checked"));
    let req = |k: &str| f(k).expect("required key present");
    let u = |k: &str| s(k).map(|v| v.parse::<u64>().expect("checked")).expect("defaulted");

    let jump = match s("model.jump_law") {
        Some("kou") => JumpSpec::Kou {
            eta_up: req("model.kou_eta_up"),
            eta_down: req("model.kou_eta_down"),
            p_up: req("model.kou_p_up"),
        },
        _ => JumpSpec::Gaussian { mean: req("model.jump_mean"), stdev: req("model.jump_stdev") },
    };
    let payoff = match s("model.payoff") {
        Some("sigmoid") => PayoffSpec::Sigmoid { center: req("model.sigmoid_center"), width: req("model.sigmoid_width") },
        _ => PayoffSpec::Call { strike: req("model.strike") },
    };
    let model = ModelSection {
        cir: CirParams::new(req("model.kappa"), req("model.theta"), req("model.sigma2"), req("model.lambda0")),
        diffusion: DiffusionParams::new(req("model.mu"), req("model.sigma1"), req("model.s0"), req("model.horizon")),
        jump,
        jump_map: s("model.jump_map").map(str::to_string),
        payoff,
        eps0: req("model.eps0"),
        gamma: req("model.gamma"),
        c_j: req("model.c_j"),
        p_max: u("model.p_max") as u32,
        lambda_floor: req("model.lambda_floor"),
        cutoff_radius: f("model.cutoff_radius"),
        cutoff_alpha: req("model.cutoff_alpha"),
    };
    let run = RunSection {
        n_paths: u("run.n_paths"),
        grid_n: u("run.grid_n") as usize,
        seed: u("run.seed"),
        method: s("run.method").expect("defaulted").to_string(),
        wiener_share: req("run.wiener_share"),
        fd_bump: f("run.fd_bump"),
        levels: s("run.levels")
            .expect("defaulted")
            .split(',')
            .map(|p| p.trim().parse().expect("checked"))
            .collect(),
        reference_factor: u("run.reference_factor") as usize,
        target: s("run.target").expect("defaulted").to_string(),
        series_terms: u("run.series_terms") as usize,
        weighted: s("run.weighted") == Some("true"),
    };
    let output = OutputSection {
        format: if s("output.format") == Some("json") { OutputFormat::Json } else { OutputFormat::Csv },
        path: s("output.path").expect("defaulted").to_string(),
    };
    let provenance = values.iter().map(|(k, (_, p))| (k.clone(), *p)).collect();
    RunConfig { model, run, output, provenance }
}

fn fmt_f64(x: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{x:?}")
}

impl RunConfig {
    /// Every key with a value, in schema order.
    fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let r = &self.run;
        let mut out: Vec<(&'static str, String)> = vec![
            ("model.kappa", fmt_f64(m.cir.kappa)),
            ("model.theta", fmt_f64(m.cir.theta)),
            ("model.sigma2", fmt_f64(m.cir.sigma2)),
            ("model.lambda0", fmt_f64(m.cir.lambda0)),
            ("model.mu", fmt_f64(m.diffusion.mu)),
            ("model.sigma1", fmt_f64(m.diffusion.sigma1)),
            ("model.s0", fmt_f64(m.diffusion.s0)),
            ("model.horizon", fmt_f64(m.diffusion.horizon)),
        ];
        match m.jump {
            JumpSpec::Gaussian { mean, stdev } => out.extend([
                ("model.jump_law", "gaussian".to_string()),
                ("model.jump_mean", fmt_f64(mean)),
                ("model.jump_stdev", fmt_f64(stdev)),
            ]),
            JumpSpec::Kou { eta_up, eta_down, p_up } => out.extend([
                ("model.jump_law", "kou".to_string()),
                ("model.kou_eta_up", fmt_f64(eta_up)),
                ("model.kou_eta_down", fmt_f64(eta_down)),
                ("model.kou_p_up", fmt_f64(p_up)),
            ]),
        }
        if let Some(map) = &m.jump_map {
            out.push(("model.jump_map", map.clone()));
        }
        match m.payoff {
            PayoffSpec::Call { strike } => {
                out.extend([("model.payoff", "call".to_string()), ("model.strike", fmt_f64(strike))])
            }
            PayoffSpec::Sigmoid { center, width } => out.extend([
                ("model.payoff", "sigmoid".to_string()),
                ("model.sigmoid_center", fmt_f64(center)),
                ("model.sigmoid_width", fmt_f64(width)),
            ]),
        }
        out.extend([
            ("model.eps0", fmt_f64(m.eps0)),
            ("model.gamma", fmt_f64(m.gamma)),
            ("model.c_j", fmt_f64(m.c_j)),
            ("model.p_max", m.p_max.to_string()),
            ("model.lambda_floor", fmt_f64(m.lambda_floor)),
        ]);
        if let Some(radius) = m.cutoff_radius {
            out.push(("model.cutoff_radius", fmt_f64(radius)));
        }
        out.extend([
            ("model.cutoff_alpha", fmt_f64(m.cutoff_alpha)),
            ("run.n_paths", r.n_paths.to_string()),
            ("run.grid_n", r.grid_n.to_string()),
            ("run.seed", r.seed.to_string()),
            ("run.method", r.method.clone()),
            ("run.wiener_share", fmt_f64(r.wiener_share)),
        ]);
        if let Some(bump) = r.fd_bump {
            out.push(("run.fd_bump", fmt_f64(bump)));
        }
        out.extend([
            ("run.levels", r.levels.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
            ("run.reference_factor", r.reference_factor.to_string()),
            ("run.target", r.target.clone()),
            ("run.series_terms", r.series_terms.to_string()),
            ("run.weighted", r.weighted.to_string()),
            (
                "output.format",
                match self.output.format {
                    OutputFormat::Csv => "csv",
                    OutputFormat::Json => "json",
                }
                .to_string(),
            ),
            ("output.path", self.output.path.clone()),
        ]);
        out
    }

    fn render_filtered(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut text = String::new();
        let mut current = "";
        for (path, value) in self.entries() {
            if !keep(path) {
                continue;
            }
            let (section, name) = path.split_once('.').expect("dotted path");
            if section != current {
                if !current.is_empty() {
                    text.push('\n');
                }
                text.push_str(&format!("[{section}]\n"));
                current = section;
            }
            text.push_str(&format!("{name} = {value}\n"));
        }
        text
    }

    /// Config text holding the explicitly set keys; parsing it yields a
    /// config equal to `self` with command-line values recorded as file values.
    pub fn render(&self) -> String {
        self.render_filtered(|k| self.provenance.get(k).is_some_and(|p| *p != Provenance::Default))
    }

    /// Config text with every resolved key, defaults included.
    pub fn render_resolved(&self) -> String {
        self.render_filtered(|_| true)
    }

    /// SHA-256 of the fully resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render_resolved().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn jump_law(&self) -> JumpLaw {
        let m = &self.model;
        let law = match m.jump {
            JumpSpec::Gaussian { mean, stdev } => JumpLaw::gaussian(mean, stdev),
            JumpSpec::Kou { eta_up, eta_down, p_up } => JumpLaw::kou(eta_up, eta_down, p_up),
        };
        let law = match m.jump_map.as_deref() {
            Some("identity") => law.with_map(JumpMap::Identity),
            Some("neg_abs") => law.with_map(JumpMap::NegAbs),
            Some("pos_abs") => law.with_map(JumpMap::PosAbs),
            _ => law,
        };
        law.with_eps0(m.eps0).with_k1(m.gamma, m.c_j)
    }

    pub fn payoff(&self) -> Payoff {
        match self.model.payoff {
            PayoffSpec::Call { strike } => Payoff::Call { strike },
            PayoffSpec::Sigmoid { center, width } => Payoff::Sigmoid { center, width },
        }
    }

    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            p_max: self.model.p_max,
            lambda_floor: self.model.lambda_floor,
            cutoff: CutoffConfig { radius: self.model.cutoff_radius, alpha: self.model.cutoff_alpha },
            ..ModelOptions::default()
        }
    }

    pub fn validated_model(&self) -> Result<ValidatedModel, ValidationErrors> {
        validate_model_with(self.model.cir, self.model.diffusion, self.jump_law(), self.payoff(), self.model_options())
    }

    pub fn delta_method(&self) -> DeltaMethod {
        method_from_name(&self.run.method, self.run.wiener_share, self.run.fd_bump)
    }

    pub fn target(&self) -> Target {
        match self.run.target.as_str() {
            "price" => Target::Price,
            "delta" => Target::Delta(self.delta_method()),
            _ => Target::Asset,
        }
    }
}

pub fn method_from_name(name: &str, wiener_share: f64, fd_bump: Option<f64>) -> DeltaMethod {
    match name {
        "wiener" => DeltaMethod::WienerWeight,
        "jump_region" => DeltaMethod::JumpRegionWeight,
        "jump_smooth" => DeltaMethod::JumpSmoothWeight,
        "fd" => DeltaMethod::FiniteDifference { bump: fd_bump },
        "mixed" => DeltaMethod::Mixed { wiener_share },
        _ => DeltaMethod::PathwiseExact,
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_resolved())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::{DEFAULT_LEVELS, DEFAULT_REFERENCE_FACTOR};

    const PAPER_7_2: &str = "\
[model]
kappa = 0.5
theta = 0.30
sigma2 = 0.05
lambda0 = 0.10
mu = 0.01
sigma1 = 0.10
s0 = 5
horizon = 1
jump_law = gaussian
jump_mean = -0.10
jump_stdev = 0.50
payoff = call
strike = 6
[run]
seed = 7   # inline comment
";

    #[test]
    fn parses_and_validates() {
        let cfg = parse_config(PAPER_7_2).unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.run.n_paths, 100_000);
        assert_eq!(cfg.provenance["run.seed"], Provenance::File);
        assert_eq!(cfg.provenance["run.n_paths"], Provenance::Default);
        assert_eq!(cfg.run.levels, DEFAULT_LEVELS.to_vec());
        assert_eq!(cfg.run.reference_factor, DEFAULT_REFERENCE_FACTOR);
        let model = cfg.validated_model().unwrap();
        assert_eq!(model.derived.c_sigma, 0.0746875);
    }

    #[test]
    fn empty_file_names_every_required_key() {
        let errs = parse_config("").unwrap_err();
        let keys: Vec<&str> = errs.0.iter().filter_map(|e| e.key()).collect();
        let required: Vec<&str> = SCHEMA.iter().filter(|k| k.need == Always).map(|k| k.path).collect();
        assert_eq!(keys, required);
        assert!(errs.0.iter().all(|e| matches!(e, ConfigError::Missing { .. })));
    }

    #[test]
    fn negative_sigma2_is_a_schema_error() {
        let text = PAPER_7_2.replace("sigma2 = 0.05", "sigma2 = -0.05");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(
            errs.0,
            vec![ConfigError::Schema {
                key: "model.sigma2".into(),
                expected: "finite number > 0".into(),
                found: "-0.05".into()
            }]
        );
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let text = format!("{PAPER_7_2}[model]\nkappa = 1\nvolatility = 2\n[extras]\nx = 1\n");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.0.contains(&ConfigError::DuplicateKey { key: "model.kappa".into() }));
        assert!(errs.0.contains(&ConfigError::UnknownKey { key: "model.volatility".into() }));
        assert!(errs.0.iter().any(|e| matches!(e, ConfigError::UnknownSection { .. })));
    }

    #[test]
    fn conditional_keys_follow_the_law() {
        let text = PAPER_7_2.replace("jump_law = gaussian", "jump_law = kou");
        let errs = parse_config(&text).unwrap_err();
        let missing: Vec<&str> = errs.0.iter().filter_map(|e| e.key()).collect();
        assert_eq!(missing, vec!["model.kou_eta_up", "model.kou_eta_down", "model.kou_p_up"]);
    }

    #[test]
    fn render_round_trips() {
        let cfg = parse_config(PAPER_7_2).unwrap();
        assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
        let resolved = parse_config(&cfg.render_resolved()).unwrap();
        assert_eq!(resolved.model, cfg.model);
        assert_eq!(resolved.run, cfg.run);
        assert_eq!(resolved.hash(), cfg.hash());
    }

    #[test]
    fn overrides_take_precedence_and_are_checked() {
        let cfg = parse_config_with_overrides(PAPER_7_2, &[("run.seed", "99".into())]).unwrap();
        assert_eq!(cfg.run.seed, 99);
        assert_eq!(cfg.provenance["run.seed"], Provenance::CommandLine);
        let bad = parse_config_with_overrides(PAPER_7_2, &[("run.method", "magic".into())]).unwrap_err();
        assert_eq!(bad.0[0].key(), Some("run.method"));
    }

    #[test]
    fn hash_tracks_resolved_values() {
        let a = parse_config(PAPER_7_2).unwrap();
        let b = parse_config(&PAPER_7_2.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
