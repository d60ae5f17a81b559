//! Run configuration: a TOML document with dotted sections.
//!
//! ```toml
//! run_id = "limit"
//!
//! [system]
//! name = "limit_cycle"
//! params = { radius = 1.0 }
//!
//! [data]
//! count = 200000
//! seed = 1
//!
//! [net]
//! m = 30
//!
//! [train]
//! epochs = 300
//!
//! [sim]
//! T = 40.0
//! initial = [[0.5, 0.0], [1.8, 1.8]]
//! ```
//!
//! Every section except `system` has defaults. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffnet::{Activation, TrainConfig};
use crate::io;
use crate::synthesis::DEFAULT_TAU;
use crate::systems::{self, Domain, ForcedSystem, VectorField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    #[default]
    Train,
    NefBaseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Fixed points for `multi_fixed_point`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    /// Per-axis `[lo, hi]` replacing the catalog domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Training samples `d#`.
    pub count: usize,
    pub seed: u64,
    /// Nodes per axis of the evaluation grid used for `E_max`.
    pub eval_per_axis: usize,
    /// Nodes per axis of the field grid exported for quiver plots.
    pub quiver_per_axis: usize,
    /// Domain samples for Lipschitz estimates.
    pub lipschitz_samples: usize,
    /// Also write the training set as CSV.
    pub save: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            count: 20_000,
            seed: 0,
            eval_per_axis: 101,
            quiver_per_axis: 21,
            lipschitz_samples: 20_000,
            save: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub m: usize,
    pub activation: Activation,
    pub mode: TrainMode,
    /// Encoder range for the NEF baseline.
    pub encoder_scale: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            m: 10,
            activation: Activation::Tanh,
            mode: TrainMode::Train,
            encoder_scale: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnConfig {
    pub tau: f64,
    /// Add `θ/τ` to the hidden-unit derivatives.
    pub bias_drive: bool,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            tau: DEFAULT_TAU,
            bias_drive: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Initial conditions; empty means the domain center.
    pub initial: Vec<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            h: 1e-3,
            horizon: 40.0,
            initial: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// τ values for the sweep; empty skips it.
    pub taus: Vec<f64>,
    #[serde(rename = "tau_T")]
    pub tau_horizon: f64,
    pub tau_h: f64,
    /// Nodes per axis of the potential surface (2-D systems only).
    pub potential_per_axis: usize,
    /// `ε` for the τ conditions; defaults to the measured `E_orb` target.
    pub epsilon: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            taus: Vec::new(),
            tau_horizon: 40.0,
            tau_h: 1e-2,
            potential_per_axis: 201,
            epsilon: 1e-2,
        }
    }
}

/// Sinusoidal forcing `amplitude · cos(freq t)` added to the last state
/// derivative, learned by its own net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub amplitude: f64,
    #[serde(default = "one")]
    pub freq: f64,
    /// Hidden units of the forcing net.
    pub m: usize,
    pub count: usize,
    /// Feed the force into the hidden units as well as the outputs.
    #[serde(default)]
    pub hidden_forcing: bool,
    #[serde(default)]
    pub train: TrainConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub system: SystemConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub rnn: RnnConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingConfig>,
}

/// The ground truth a config describes.
#[derive(Clone, Debug)]
pub enum System {
    Field(VectorField),
    Forced(ForcedSystem),
}

impl System {
    /// The unforced field, which the main net learns.
    pub fn base(&self) -> &VectorField {
        match self {
            System::Field(f) => f,
            System::Forced(fs) => &fs.base,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::parse(&io::read_text(path)?)
    }

    /// Canonical TOML text; what gets echoed into run directories.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> Result<String> {
        Ok(io::content_hash(&self.to_toml()?))
    }

    /// Seed override from the command line: data and training both follow it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.train.seed = seed;
        if let Some(f) = self.forcing.as_mut() {
            f.train.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.contains("__")
        {
            return bad(format!(
                "run_id '{}' must be non-empty, without path separators or '__'",
                self.run_id
            ));
        }
        let system = self.build_system()?;
        let n = system.base().dim();
        if self.data.count == 0 {
            return bad("data.count must be positive".into());
        }
        if self.data.eval_per_axis < 2 || self.data.quiver_per_axis < 2 {
            return bad("grid sizes must be at least 2 per axis".into());
        }
        if self.data.lipschitz_samples == 0 {
            return bad("data.lipschitz_samples must be positive".into());
        }
        if self.net.m == 0 {
            return bad("net.m must be positive".into());
        }
        if !(self.net.encoder_scale > 0.0) {
            return bad("net.encoder_scale must be positive".into());
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(format!("train: {e}")))?;
        if !(self.rnn.tau > 0.0 && self.rnn.tau.is_finite()) {
            return bad("rnn.tau must be positive".into());
        }
        crate::integrate::step_count(self.sim.h, self.sim.horizon)
            .map_err(|e| Error::Config(format!("sim: {e}")))?;
        for q0 in &self.sim.initial {
            if q0.len() != n {
                return bad(format!(
                    "initial condition {q0:?} has dimension {}, system has {n}",
                    q0.len()
                ));
            }
        }
        if !self.analysis.taus.is_empty() {
            if self
                .analysis
                .taus
                .iter()
                .any(|t| !(*t > 0.0 && t.is_finite()))
            {
                return bad("analysis.taus must be positive".into());
            }
            crate::integrate::step_count(self.analysis.tau_h, self.analysis.tau_horizon)
                .map_err(|e| Error::Config(format!("analysis: {e}")))?;
        }
        if self.analysis.potential_per_axis < 3 {
            return bad("analysis.potential_per_axis must be at least 3".into());
        }
        if !(self.analysis.epsilon > 0.0) {
            return bad("analysis.epsilon must be positive".into());
        }
        if let Some(f) = &self.forcing {
            if f.m == 0 || f.count == 0 {
                return bad("forcing.m and forcing.count must be positive".into());
            }
            f.train
                .validate()
                .map_err(|e| Error::Config(format!("forcing.train: {e}")))?;
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<System> {
        let s = &self.system;
        let mut field = systems::by_name(&s.name, &s.params, s.points.as_deref())?;
        if let Some(d) = &s.domain {
            field = field.with_domain(Domain::new(d.clone())?)?;
        }
        match &self.forcing {
            None => Ok(System::Field(field)),
            Some(f) => {
                let n = field.dim();
                let (drive, initial) = systems::sinusoidal_drive(n, n - 1, f.freq, f.amplitude)?;
                Ok(System::Forced(ForcedSystem::new(field, drive, initial)?))
            }
        }
    }

    /// Initial conditions, defaulting to the domain center.
    pub fn initial_conditions(&self) -> Result<Vec<Vec<f64>>> {
        if self.sim.initial.is_empty() {
            Ok(vec![self.build_system()?.base().domain.center()])
        } else {
            Ok(self.sim.initial.clone())
        }
    }
}
