//! Run configuration: parsing, validation, and emission.
//!
//! Configs are TOML documents with two optional sections, `[model]` and
//! `[exponents]`, plus top-level run keys. Every key is optional; an empty
//! document parses to the default configuration. Unknown keys are rejected.
//!
//! ```toml
//! mode = "simulate"            # simulate | renorm-table | tightness-report | selfcheck
//! ensemble = 4                 # trajectories, >= 1
//! snapshot_every = 10          # steps between stored snapshots, >= 1
//! burn_in_t = 0.5              # burn-in horizon (noise and joint phases)
//! pcn_steps = 10000            # Metropolis steps for the initial sampler
//! growth_factor = 3.0          # uniformity-table red-flag threshold
//! output_dir = "phi4-out"
//!
//! [model]
//! n = 0                        # cutoff order
//! m0 = 1.0                     # mass
//! lambda = 0.1                 # coupling, 0 < lambda <= lambda0
//! lambda0 = 1.0
//! t_final = 1.0
//! dt = 0.01
//! seed = 1
//! k = 4                        # optional; default 2^(n+2)
//! m = 18                       # optional; default smallest FFT-friendly M >= 4k+1
//!
//! [exponents]
//! alpha = 0.45
//! eps = 0.005
//! gamma = 0.02
//! eta = 0.55
//! q = 1.1
//! eps_tilde = 0.05
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ExponentSet;
use crate::fft::good_fft_size;
use crate::renorm::ModelParams;
use crate::spectral::TorusGrid;

/// What a run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    RenormTable,
    TightnessReport,
    Selfcheck,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::RenormTable => "renorm-table",
            Mode::TightnessReport => "tightness-report",
            Mode::Selfcheck => "selfcheck",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "renorm-table" => Ok(Mode::RenormTable),
            "tightness-report" => Ok(Mode::TightnessReport),
            "selfcheck" => Ok(Mode::Selfcheck),
            other => Err(Error::Config(format!(
                "unknown mode '{other}'; expected simulate, renorm-table, \
                 tightness-report, or selfcheck"
            ))),
        }
    }
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub exponents: ExponentSet,
    /// Number of independent trajectories.
    pub ensemble: usize,
    /// Steps between stored snapshots.
    pub snapshot_every: usize,
    /// Burn-in horizon, used for both the noise burn-in and the joint phase.
    pub burn_in_t: f64,
    /// Metropolis chain length for drawing the initial field.
    pub pcn_steps: u64,
    /// Red-flag threshold for the uniformity table.
    pub growth_factor: f64,
    pub output_dir: PathBuf,
    pub mode: Mode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let n = 0;
        Self {
            params: ModelParams {
                n,
                m0: 1.0,
                lambda: 0.1,
                lambda0: 1.0,
                t_final: 1.0,
                dt: 0.01,
                seed: 1,
                grid: crate::cutoff::default_grid(n),
            },
            exponents: ExponentSet::default(),
            ensemble: 1,
            snapshot_every: 10,
            burn_in_t: 0.5,
            pcn_steps: 10_000,
            growth_factor: 3.0,
            output_dir: PathBuf::from("phi4-out"),
            mode: Mode::Simulate,
        }
    }
}

impl RunConfig {
    /// Re-checks every component invariant, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.exponents.validate()?;
        if self.ensemble < 1 {
            return Err(Error::Config("ensemble must be >= 1".into()));
        }
        if self.snapshot_every < 1 {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        if !(self.burn_in_t >= 0.0 && self.burn_in_t.is_finite()) {
            return Err(Error::Config(format!(
                "burn_in_t must be finite and >= 0, got {}",
                self.burn_in_t
            )));
        }
        if !(self.growth_factor > 1.0) {
            return Err(Error::Config(format!(
                "growth_factor must be > 1, got {}",
                self.growth_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ExponentDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_tilde: Option<f64>,
}

/// The serialization mirror of [`RunConfig`]: every key optional on input,
/// every key explicit on output. Also embedded verbatim in run manifests.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ConfigDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pcn_steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentDoc>,
}

impl ConfigDoc {
    pub(crate) fn from_config(config: &RunConfig) -> Self {
        let p = &config.params;
        let e = &config.exponents;
        Self {
            mode: Some(config.mode.as_str().to_string()),
            ensemble: Some(config.ensemble),
            snapshot_every: Some(config.snapshot_every),
            burn_in_t: Some(config.burn_in_t),
            pcn_steps: Some(config.pcn_steps),
            growth_factor: Some(config.growth_factor),
            output_dir: Some(config.output_dir.clone()),
            model: Some(ModelDoc {
                n: Some(p.n),
                m0: Some(p.m0),
                lambda: Some(p.lambda),
                lambda0: Some(p.lambda0),
                t_final: Some(p.t_final),
                dt: Some(p.dt),
                seed: Some(p.seed),
                k: Some(p.grid.k_max()),
                m: Some(p.grid.m()),
            }),
            exponents: Some(ExponentDoc {
                alpha: Some(e.alpha),
                eps: Some(e.eps),
                gamma: Some(e.gamma),
                eta: Some(e.eta),
                q: Some(e.q),
                eps_tilde: Some(e.eps_tilde),
            }),
        }
    }

    fn into_config(self) -> Result<RunConfig> {
        let defaults = RunConfig::default();
        let md = self.model.unwrap_or_default();
        let n = md.n.unwrap_or(defaults.params.n);
        let k = md.k.unwrap_or(1usize << (n + 2));
        let m = md.m.unwrap_or_else(|| good_fft_size(4 * k + 1));
        let params = ModelParams {
            n,
            m0: md.m0.unwrap_or(defaults.params.m0),
            lambda: md.lambda.unwrap_or(defaults.params.lambda),
            lambda0: md.lambda0.unwrap_or(defaults.params.lambda0),
            t_final: md.t_final.unwrap_or(defaults.params.t_final),
            dt: md.dt.unwrap_or(defaults.params.dt),
            seed: md.seed.unwrap_or(defaults.params.seed),
            grid: TorusGrid::new(k, m)?,
        };
        let ed = self.exponents.unwrap_or_default();
        let de = defaults.exponents;
        let exponents = ExponentSet {
            alpha: ed.alpha.unwrap_or(de.alpha),
            eps: ed.eps.unwrap_or(de.eps),
            gamma: ed.gamma.unwrap_or(de.gamma),
            eta: ed.eta.unwrap_or(de.eta),
            q: ed.q.unwrap_or(de.q),
            eps_tilde: ed.eps_tilde.unwrap_or(de.eps_tilde),
        };
        let config = RunConfig {
            params,
            exponents,
            ensemble: self.ensemble.unwrap_or(defaults.ensemble),
            snapshot_every: self.snapshot_every.unwrap_or(defaults.snapshot_every),
            burn_in_t: self.burn_in_t.unwrap_or(defaults.burn_in_t),
            pcn_steps: self.pcn_steps.unwrap_or(defaults.pcn_steps),
            growth_factor: self.growth_factor.unwrap_or(defaults.growth_factor),
            output_dir: self.output_dir.unwrap_or(defaults.output_dir),
            mode: match self.mode {
                Some(s) => Mode::parse(&s)?,
                None => defaults.mode,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parses and validates a TOML configuration document. Missing keys take
/// their defaults; constraint violations name the constraint.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: ConfigDoc =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    doc.into_config()
}

/// Command-line overrides layered on top of a config document before
/// validation. `None` keeps the document's value (or its default).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<u32>,
    pub m0: Option<f64>,
    pub lambda: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub ensemble: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub mode: Option<Mode>,
}

/// Builds a validated run configuration from an optional TOML document plus
/// command-line overrides; flags win over file keys. Overriding the cutoff
/// order re-derives any grid dimension that is not itself pinned by a flag,
/// and overriding `k` likewise re-derives `m`.
pub fn load_config(text: Option<&str>, over: &Overrides) -> Result<RunConfig> {
    let mut doc: ConfigDoc = match text {
        Some(t) => {
            toml::from_str(t).map_err(|e| Error::Config(format!("config parse error: {e}")))?
        }
        None => ConfigDoc::default(),
    };
    let model = doc.model.get_or_insert_with(ModelDoc::default);
    if over.n.is_some() {
        model.n = over.n;
        if over.k.is_none() {
            model.k = None;
        }
        if over.m.is_none() {
            model.m = None;
        }
    }
    if over.k.is_some() {
        model.k = over.k;
        if over.m.is_none() {
            model.m = None;
        }
    }
    if over.m.is_some() {
        model.m = over.m;
    }
    if over.m0.is_some() {
        model.m0 = over.m0;
    }
    if over.lambda.is_some() {
        model.lambda = over.lambda;
    }
    if over.t_final.is_some() {
        model.t_final = over.t_final;
    }
    if over.dt.is_some() {
        model.dt = over.dt;
    }
    if over.seed.is_some() {
        model.seed = over.seed;
    }
    if over.ensemble.is_some() {
        doc.ensemble = over.ensemble;
    }
    if let Some(dir) = &over.output_dir {
        doc.output_dir = Some(dir.clone());
    }
    if let Some(mode) = over.mode {
        doc.mode = Some(mode.as_str().to_string());
    }
    doc.into_config()
}

/// Emits a configuration as a complete TOML document; `parse_config` of the
/// output reproduces the input exactly.
pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(&ConfigDoc::from_config(config))
        .expect("a validated config always serializes")
}
