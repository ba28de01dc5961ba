//! Randomized property suites.
//!
//! A suite draws random states and channels, evaluates an inequality or
//! identity for each draw and records `lhs − rhs` against a tolerance. Trials
//! run in parallel; each one owns a seed derived from the configured seed, so
//! a report is identical across runs and any failing trial can be re-run
//! alone with [`rerun_trial`].

mod generators;
mod suites;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::BipartiteChannel;
use crate::error::{Error, Result};
use crate::format::{channel_to_string, operator_to_string};
use crate::operators::HermitianOperator;
use crate::state_measures::MeasureOptions;

pub use generators::{
    random_ppt_entangled_3x3, random_ppt_state, random_pure, random_state, realignment_norm,
};
pub(crate) use generators::{random_hermitian, random_mixed_with, random_state_with, random_unitary};

/// Property families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Operators,
    Channels,
    Divergences,
    Sdp,
    States,
    ChannelMeasures,
    Superchannels,
    Amortization,
    Distillation,
    Additivity,
    All,
}

impl Suite {
    pub const FAMILIES: [Suite; 10] = [
        Suite::Operators,
        Suite::Channels,
        Suite::Divergences,
        Suite::Sdp,
        Suite::States,
        Suite::ChannelMeasures,
        Suite::Superchannels,
        Suite::Amortization,
        Suite::Distillation,
        Suite::Additivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::Channels => "channels",
            Suite::Divergences => "divergences",
            Suite::Sdp => "sdp",
            Suite::States => "states",
            Suite::ChannelMeasures => "channel-measures",
            Suite::Superchannels => "superchannels",
            Suite::Amortization => "amortization",
            Suite::Distillation => "distillation",
            Suite::Additivity => "additivity",
            Suite::All => "all",
        }
    }

    fn families(self) -> Vec<Suite> {
        if self == Suite::All {
            Suite::FAMILIES.to_vec()
        } else {
            vec![self]
        }
    }

    fn stream(self) -> u64 {
        Suite::FAMILIES.iter().position(|&s| s == self).unwrap_or(Suite::FAMILIES.len()) as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::FAMILIES
            .iter()
            .chain([Suite::All].iter())
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

/// Measures exercised by faithfulness, ordering and monotonicity checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Measure {
    /// `E_N`
    LogNegativity,
    /// `R_max`
    MaxRains,
    /// `E_κ`
    Kappa,
    /// `E_M`
    MinRains,
    /// `−log₂ W₀`
    ExactDistillable,
}

impl Measure {
    pub const ALL: [Measure; 5] =
        [Measure::LogNegativity, Measure::MaxRains, Measure::Kappa, Measure::MinRains, Measure::ExactDistillable];

    pub fn name(self) -> &'static str {
        match self {
            Measure::LogNegativity => "en",
            Measure::MaxRains => "rmax",
            Measure::Kappa => "kappa",
            Measure::MinRains => "emin",
            Measure::ExactDistillable => "w0",
        }
    }

    /// Has a channel version computed exactly by an SDP.
    pub fn has_channel_form(self) -> bool {
        matches!(self, Measure::LogNegativity | Measure::MaxRains | Measure::Kappa)
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown measure `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    /// Cap on the dimension of each sampled system. Channel-level suites
    /// (superchannels, amortization, distillation, additivity) use qubits.
    pub dims: usize,
    /// Allowed excess `lhs − rhs` for inequalities between measures.
    pub slack: f64,
    pub measures: Vec<Measure>,
    pub options: MeasureOptions,
    /// Replace the C-PPT-P samples of the channel faithfulness check by a
    /// channel that prepares a Bell state, to exercise failure reporting.
    pub inject_violation: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            suite: Suite::All,
            seed: 0,
            trials: 10,
            dims: 2,
            slack: 1e-5,
            measures: Measure::ALL.to_vec(),
            options: MeasureOptions::default(),
            inject_violation: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.slack > 0.0 && self.slack.is_finite()) {
            return Err(Error::InvalidArgument(format!("slack must be positive, got {}", self.slack)));
        }
        if self.dims < 2 {
            return Err(Error::InvalidArgument(format!("dimension cap must be at least 2, got {}", self.dims)));
        }
        self.options.solver.validate()
    }

    pub(crate) fn uses(&self, m: Measure) -> bool {
        self.measures.contains(&m)
    }
}

/// An input to a check, kept so failures can be serialized.
#[derive(Clone, Debug)]
pub enum Input {
    Operator(HermitianOperator),
    Channel(BipartiteChannel),
}

impl Input {
    fn serialize(&self) -> String {
        match self {
            Input::Operator(op) => operator_to_string(op),
            Input::Channel(ch) => channel_to_string(ch),
        }
    }
}

impl From<&HermitianOperator> for Input {
    fn from(op: &HermitianOperator) -> Self {
        Input::Operator(op.clone())
    }
}

impl From<&BipartiteChannel> for Input {
    fn from(ch: &BipartiteChannel) -> Self {
        Input::Channel(ch.clone())
    }
}

/// One evaluation of one property: it holds when `lhs − rhs ≤ tolerance`.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub property: String,
    pub anchor: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    /// The solver did not reach optimality; the property was not evaluated.
    pub solver_failure: bool,
    /// Any error raised while evaluating.
    pub error: Option<String>,
    pub inputs: Vec<(String, Input)>,
}

impl CheckResult {
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs
    }

    /// A violation or an unexpected error. Solver failures are not failures.
    pub fn failed(&self) -> bool {
        !self.solver_failure && (self.error.is_some() || !(self.excess() <= self.tolerance))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessInput {
    pub name: String,
    pub text: String,
}

/// A failing trial with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub trial: usize,
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub error: Option<String>,
    pub inputs: Vec<WitnessInput>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub suite: Suite,
    pub property: String,
    pub anchor: String,
    pub tolerance: f64,
    pub trials: usize,
    pub failures: usize,
    pub solver_failures: usize,
    /// Largest `lhs − rhs` over evaluated trials.
    pub worst_slack: Option<f64>,
    pub witnesses: Vec<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub slack: f64,
    pub properties: Vec<PropertyReport>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.properties.iter().map(|p| p.failures).sum()
    }

    pub fn solver_failures(&self) -> usize {
        self.properties.iter().map(|p| p.solver_failures).sum()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn property(&self, name: &str) -> Option<&PropertyReport> {
        self.properties.iter().find(|p| p.property == name)
    }

    /// One JSON object per property.
    pub fn to_json_lines(&self) -> String {
        self.properties
            .iter()
            .map(|p| serde_json::to_string(p).expect("plain data serializes") + "\n")
            .collect()
    }

    pub fn write_json_lines(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json_lines())?)
    }
}

/// Seed of every trial of one family.
pub fn trial_seeds(suite: Suite, seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite.stream());
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Runs one trial of a single family from its seed.
pub fn rerun_trial(suite: Suite, trial_seed: u64, cfg: &SuiteConfig) -> Result<Vec<CheckResult>> {
    cfg.validate()?;
    if suite == Suite::All {
        return Err(Error::InvalidArgument("re-run a trial of a single family, not `all`".into()));
    }
    Ok(suites::run_trial(suite, trial_seed, cfg))
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let jobs: Vec<(Suite, usize, u64)> = cfg
        .suite
        .families()
        .into_iter()
        .flat_map(|s| trial_seeds(s, cfg.seed, cfg.trials).into_iter().enumerate().map(move |(t, seed)| (s, t, seed)))
        .collect();
    let results: Vec<Vec<CheckResult>> =
        jobs.par_iter().map(|&(suite, _, seed)| suites::run_trial(suite, seed, cfg)).collect();

    let mut properties: Vec<PropertyReport> = Vec::new();
    for (&(suite, trial, seed), checks) in jobs.iter().zip(results) {
        for c in checks {
            let idx = match properties.iter().position(|p| p.suite == suite && p.property == c.property) {
                Some(i) => i,
                None => {
                    properties.push(PropertyReport {
                        suite,
                        property: c.property.clone(),
                        anchor: c.anchor.to_string(),
                        tolerance: c.tolerance,
                        trials: 0,
                        failures: 0,
                        solver_failures: 0,
                        worst_slack: None,
                        witnesses: Vec::new(),
                    });
                    properties.len() - 1
                }
            };
            let p = &mut properties[idx];
            p.trials += 1;
            if c.solver_failure {
                p.solver_failures += 1;
                continue;
            }
            if c.error.is_none() {
                let e = c.excess();
                p.worst_slack = Some(p.worst_slack.map_or(e, |w: f64| if e.is_nan() { e } else { w.max(e) }));
            }
            if c.failed() {
                p.failures += 1;
                p.witnesses.push(Witness {
                    trial,
                    seed,
                    lhs: c.lhs,
                    rhs: c.rhs,
                    error: c.error.clone(),
                    inputs: c.inputs.iter().map(|(n, i)| WitnessInput { name: n.clone(), text: i.serialize() }).collect(),
                });
            }
        }
    }
    Ok(SuiteReport { suite: cfg.suite, seed: cfg.seed, trials: cfg.trials, slack: cfg.slack, properties })
}
