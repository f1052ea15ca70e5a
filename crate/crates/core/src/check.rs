//! End-to-end robustness check: configuration, the pipeline from network
//! file to verdict, and the JSON report.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::axis_box::AxisBox;
use crate::backward::{abstract_interpret, PropertyConfig};
use crate::distribution::{Distribution, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimator::{
    combine, estimate_closeness_mass, estimate_components, mc_baseline, ComponentStatus,
    ConditionalEstimate, EstimateComponent, Proportion, SampleAllocation,
};
use crate::network::{parse_network, NetworkSpec};
use crate::polyhedra::PolySet;
use crate::product::construct_product;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    PerPolyhedron,
    Total,
}

fn default_budget() -> usize {
    64
}
fn default_samples() -> usize {
    20_000
}
fn default_closeness_samples() -> usize {
    100_000
}
fn default_workers() -> usize {
    1
}
fn default_distribution() -> DistributionSpec {
    DistributionSpec::Uniform
}

/// A single run. Loaded from TOML; every field except `network`, `epsilon`,
/// `k`, `delta` and `domain` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: PathBuf,
    pub epsilon: f64,
    pub k: f64,
    pub delta: f64,
    pub domain: DomainSpec,
    #[serde(default = "default_distribution")]
    pub distribution: DistributionSpec,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Importance-sampling proposals, interpreted per `sample_mode`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub sample_mode: SampleMode,
    #[serde(default = "default_closeness_samples")]
    pub closeness_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Record wall-clock timings in the report (makes it non-reproducible).
    #[serde(default)]
    pub timings: bool,
}

impl RunConfig {
    /// Parses TOML. A relative `network` path is resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base_dir {
            if cfg.network.is_relative() {
                cfg.network = base.join(&cfg.network);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::Config(format!("k must be finite and >= 0, got {}", self.k)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Config(format!(
                "delta must be finite and > 0, got {}",
                self.delta
            )));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.samples < 2 {
            return Err(Error::Config("samples must be at least 2".into()));
        }
        if self.closeness_samples < 1000 {
            return Err(Error::Config("closeness_samples must be at least 1000".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.domain_box()?;
        Ok(())
    }

    pub fn domain_box(&self) -> Result<AxisBox> {
        AxisBox::new(self.domain.lo.clone(), self.domain.hi.clone())
    }

    pub fn allocation(&self) -> SampleAllocation {
        match self.sample_mode {
            SampleMode::PerPolyhedron => SampleAllocation::PerPolyhedron(self.samples),
            SampleMode::Total => SampleAllocation::Total(self.samples),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Probabilistically robust: `err <= epsilon`.
    T,
    /// Not robust: `err > epsilon`.
    F,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::T => "T",
            Verdict::F => "F",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Parse,
    Setup,
    AbstractInterpret,
    Closeness,
    Estimate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("unknown"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisCounts {
    /// Non-empty disjuncts of the encoded property.
    pub disjuncts: usize,
    pub polyhedra_before_merge: usize,
    pub polyhedra_after_merge: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub abstract_interpret_ms: f64,
    pub closeness_ms: f64,
    pub estimate_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub tool_version: String,
    pub seed: u64,
    /// The run's configuration, minus the output path.
    pub config: RunConfig,
    /// `None` when the run failed; see `failure`.
    pub verdict: Option<Verdict>,
    pub err: Option<f64>,
    pub err_std_error: Option<f64>,
    /// Set when `|err − epsilon| < 3 · err_std_error`.
    pub inconclusive: bool,
    /// Set when some polyhedron's mass is an upper bound instead of an estimate.
    pub conservative: bool,
    pub joint_mass: Option<f64>,
    pub joint_mass_std_error: Option<f64>,
    pub closeness: Option<Proportion>,
    pub analysis: Option<AnalysisCounts>,
    pub samples_total: usize,
    pub components: Vec<EstimateComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    pub failure: Option<Failure>,
}

impl RobustnessReport {
    fn empty(cfg: &RunConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            seed: cfg.seed,
            config: RunConfig {
                out: None,
                ..cfg.clone()
            },
            verdict: None,
            err: None,
            err_std_error: None,
            inconclusive: false,
            conservative: false,
            joint_mass: None,
            joint_mass_std_error: None,
            closeness: None,
            analysis: None,
            samples_total: 0,
            components: Vec::new(),
            timings: None,
            failure: None,
        }
    }

    fn failed(mut self, stage: Stage, e: Error) -> Self {
        self.failure = Some(Failure {
            stage,
            message: e.to_string(),
        });
        self.verdict = None;
        self
    }

    /// 0 for T, 1 for F, 2 for a failed run.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Some(Verdict::T) => 0,
            Some(Verdict::F) => 1,
            None => 2,
        }
    }

    /// `VERDICT err=<v>±<se> eps=<ε> polys=<n> samples=<N>`, with a trailing
    /// `INCONCLUSIVE` / `CONSERVATIVE` marker when flagged.
    pub fn summary_line(&self) -> String {
        if let Some(f) = &self.failure {
            return format!("ERROR stage={} {}", f.stage, f.message);
        }
        let verdict = self.verdict.map_or("?".to_string(), |v| v.to_string());
        let polys = self.analysis.as_ref().map_or(0, |a| a.polyhedra_after_merge);
        let mut line = format!(
            "{verdict} err={}±{} eps={} polys={polys} samples={}",
            self.err.unwrap_or(f64::NAN),
            self.err_std_error.unwrap_or(f64::NAN),
            self.config.epsilon,
            self.samples_total
        );
        if self.inconclusive {
            line.push_str(" INCONCLUSIVE");
        }
        if self.conservative {
            line.push_str(" CONSERVATIVE");
        }
        line
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report: {e}")))
    }
}

/// Runs the whole pipeline for a configuration. Never fails: errors end up
/// in the report's `failure` field with the stage they came from.
pub fn check_probabilistic_robustness(cfg: &RunConfig) -> RobustnessReport {
    let report = RobustnessReport::empty(cfg);
    if let Err(e) = cfg.validate() {
        return report.failed(Stage::Config, e);
    }
    let spec = match std::fs::read(&cfg.network)
        .map_err(|e| Error::Io(format!("{}: {e}", cfg.network.display())))
        .and_then(|bytes| parse_network(&bytes))
    {
        Ok(spec) => spec,
        Err(e) => return report.failed(Stage::Parse, e),
    };
    check_network(&spec, cfg)
}

/// Everything the pipeline needs besides the network, derived from a config.
pub struct Prepared {
    pub spec_input_dim: usize,
    pub property: PropertyConfig,
    pub domain: AxisBox,
    pub distribution: Distribution,
}

pub fn prepare(spec: &NetworkSpec, cfg: &RunConfig) -> Result<Prepared> {
    let domain = cfg.domain_box()?;
    if domain.dim() != spec.input_dim() {
        return Err(Error::Config(format!(
            "domain has {} coordinates but the network takes {}",
            domain.dim(),
            spec.input_dim()
        )));
    }
    Ok(Prepared {
        spec_input_dim: spec.input_dim(),
        property: PropertyConfig::new(cfg.k, cfg.delta, spec.input_dim(), spec.output_dim())?,
        distribution: Distribution::build(&cfg.distribution, &domain)?,
        domain,
    })
}

/// The pipeline on an already parsed network; `cfg.network` is only echoed.
pub fn check_network(spec: &NetworkSpec, cfg: &RunConfig) -> RobustnessReport {
    let mut report = RobustnessReport::empty(cfg);
    if let Err(e) = cfg.validate() {
        return report.failed(Stage::Config, e);
    }
    let mut timings = Timings::default();
    let clock = Instant::now();

    let prepared = match prepare(spec, cfg) {
        Ok(p) => p,
        Err(e) => return report.failed(Stage::Setup, e),
    };
    let pf = construct_product(&spec.to_cat());
    timings.setup_ms = ms_since(clock);

    let clock = Instant::now();
    let analysis = match abstract_interpret(&pf, &prepared.property, &prepared.domain, cfg.budget)
    {
        Ok(a) => a,
        Err(e) => return report.failed(Stage::AbstractInterpret, e),
    };
    timings.abstract_interpret_ms = ms_since(clock);
    report.analysis = Some(AnalysisCounts {
        disjuncts: analysis.disjuncts,
        polyhedra_before_merge: analysis.before_merge,
        polyhedra_after_merge: analysis.polys.len(),
    });

    let estimate = if analysis.polys.is_empty() {
        ConditionalEstimate {
            joint_mass: 0.0,
            joint_std_error: 0.0,
            err: 0.0,
            err_std_error: 0.0,
        }
    } else {
        let clock = Instant::now();
        let closeness = match estimate_closeness_mass(
            &prepared.distribution,
            cfg.delta,
            cfg.closeness_samples,
            cfg.seed,
        ) {
            Ok(c) => c,
            Err(e) => return report.failed(Stage::Closeness, e),
        };
        timings.closeness_ms = ms_since(clock);
        report.closeness = Some(closeness);

        let clock = Instant::now();
        let components = match estimate_components(
            &analysis.polys,
            &pf,
            &prepared.property,
            &prepared.distribution,
            cfg.allocation(),
            cfg.seed,
            cfg.workers,
        ) {
            Ok(c) => c,
            Err(e) => return report.failed(Stage::Estimate, e),
        };
        timings.estimate_ms = ms_since(clock);
        report.samples_total = components.iter().map(|c| c.samples_used).sum();
        report.conservative = components
            .iter()
            .any(|c| c.status == ComponentStatus::Conservative);
        let est = combine(&components, &closeness);
        report.components = components;
        est
    };

    report.err = Some(estimate.err);
    report.err_std_error = Some(estimate.err_std_error);
    report.joint_mass = Some(estimate.joint_mass);
    report.joint_mass_std_error = Some(estimate.joint_std_error);
    report.verdict = Some(if estimate.err > cfg.epsilon {
        Verdict::F
    } else {
        Verdict::T
    });
    report.inconclusive = (estimate.err - cfg.epsilon).abs() < 3.0 * estimate.err_std_error;
    if cfg.timings {
        report.timings = Some(timings);
    }
    report
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Writes the JSON report to `path` and prints the summary line.
pub fn emit_report(r: &RobustnessReport, path: &Path) -> Result<()> {
    std::fs::write(path, r.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    println!("{}", r.summary_line());
    Ok(())
}

/// Plain Monte Carlo estimate for the configured network, for comparison.
pub fn run_baseline(cfg: &RunConfig) -> Result<Proportion> {
    cfg.validate()?;
    let spec = parse_network(&std::fs::read(&cfg.network)?)?;
    let prepared = prepare(&spec, cfg)?;
    mc_baseline(
        &spec.to_cat(),
        &prepared.property,
        &prepared.distribution,
        cfg.samples,
        cfg.seed,
    )
}

/// The analysis result for the configured network.
pub fn run_analysis(cfg: &RunConfig) -> Result<PolySet> {
    cfg.validate()?;
    let spec = parse_network(&std::fs::read(&cfg.network)?)?;
    let prepared = prepare(&spec, cfg)?;
    let pf = construct_product(&spec.to_cat());
    Ok(abstract_interpret(&pf, &prepared.property, &prepared.domain, cfg.budget)?.polys)
}
