//! Experiment configuration: a single TOML file with model, protocol,
//! sweep, numerics and output blocks, validated before any computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HermitianOperator;
use crate::model::{
    build_goe_bath, build_spin_chain_bath, pauli_operator, Protocol, ProtocolShape, TotalModel,
    WindowCenter, WindowSpec,
};

/// Root of the experiment configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub protocol: ProtocolBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub h_s: OperatorSpec,
    pub h_is: OperatorSpec,
    pub bath: BathBlock,
    pub window: WindowBlock,
    /// system level pair (α, β) analyzed by decay and border runs
    #[serde(default = "default_pair")]
    pub level_pair: [usize; 2],
}

fn default_pair() -> [usize; 2] {
    [0, 1]
}

/// A Hermitian operator given either as Pauli coefficients
/// (`{ x = 1.0, z = 0.3 }`, qubit only) or as an explicit real symmetric
/// matrix (`{ matrix = [[...], ...] }`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
    Pauli {
        #[serde(default)]
        i: f64,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        z: f64,
    },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<HermitianOperator> {
        match self {
            OperatorSpec::Pauli { i, x, y, z } => Ok(pauli_operator(*i, *x, *y, *z)),
            OperatorSpec::Matrix { matrix } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::Config("operator matrix must be square".into()));
                }
                let mut m = ndarray::Array2::<f64>::zeros((n, n));
                for (i, row) in matrix.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        m[[i, j]] = v;
                    }
                }
                HermitianOperator::from_real(m)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Pauli { .. } => 2,
            OperatorSpec::Matrix { matrix } => matrix.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BathBlock {
    Goe {
        dim: usize,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    SpinChain {
        sites: usize,
        j: f64,
        #[serde(default)]
        h_x: f64,
        #[serde(default)]
        h_z: f64,
    },
}

fn default_scale() -> f64 {
    1.0
}

impl BathBlock {
    pub fn dim(&self) -> usize {
        match self {
            BathBlock::Goe { dim, .. } => *dim,
            BathBlock::SpinChain { sites, .. } => 1usize << sites,
        }
    }

    /// The two bath operators (H_{E2}, H_I^{E2}) for one seed. The GOE
    /// interaction factor uses a seed offset so the two matrices are
    /// independent draws.
    pub fn build(&self, seed: u64) -> Result<(HermitianOperator, HermitianOperator)> {
        match self {
            BathBlock::Goe { dim, scale } => Ok((
                build_goe_bath(*dim, *scale, seed)?,
                build_goe_bath(*dim, *scale, seed ^ 0x5851_f42d_4c95_7f2d)?,
            )),
            BathBlock::SpinChain { sites, j, h_x, h_z } => {
                let h_e2 = build_spin_chain_bath(*sites, *j, *h_x, *h_z)?;
                // interaction factor: total transverse magnetization
                let h_ie2 = build_spin_chain_bath(*sites, 0.0, 1.0, 0.0)?;
                Ok((h_e2, h_ie2))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBlock {
    pub count: usize,
    #[serde(default = "default_center")]
    pub center: WindowCenter,
}

fn default_center() -> WindowCenter {
    WindowCenter::MidSpectrum
}

impl WindowBlock {
    pub fn spec(&self) -> WindowSpec {
        WindowSpec { center: self.center, count: self.count }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub shape: ProtocolShape,
    pub t0: f64,
    pub t1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl ProtocolBlock {
    pub fn protocol(&self) -> Result<Protocol> {
        Protocol::new(self.t0, self.t1, self.lambda0, self.lambda1, self.shape)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    /// absolute coupling strengths ε
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// coupling strengths as fractions of the perturbative border ε_p
    #[serde(default)]
    pub epsilon_rel: Vec<f64>,
    /// ramp durations for work sweeps (protocol rescaled to each)
    #[serde(default)]
    pub ramp_times: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self { epsilon: Vec::new(), epsilon_rel: Vec::new(), ramp_times: Vec::new(), seeds: vec![1] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsBlock {
    /// inverse temperature of the prepared Gibbs system state
    pub beta: f64,
    /// recorded samples per run
    pub target_samples: usize,
    /// control-parameter quantization for propagator reuse
    pub dlambda_max: f64,
    /// decay-fit window floor as a fraction of the initial coherence
    pub decay_floor: f64,
    /// maximum depletion included in the transition fit
    pub depletion_cap: f64,
    /// decay observation time in units of 1/R_d
    pub decay_time_factor: f64,
    /// target depletion setting the transition observation time
    pub depletion_target: f64,
    /// hard cap on any single run's simulated duration
    pub max_run_time: f64,
    /// transition-fit window as a fraction of the Heisenberg time 2πρ_E
    pub heisenberg_factor: f64,
    /// density-of-states window as a fraction of the populated spread
    pub dos_width_frac: f64,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            beta: 1.0,
            target_samples: 400,
            dlambda_max: crate::propagation::DEFAULT_DLAMBDA_MAX,
            decay_floor: crate::decoherence::DEFAULT_DECAY_FLOOR,
            depletion_cap: crate::decoherence::DEFAULT_DEPLETION_CAP,
            decay_time_factor: 4.0,
            depletion_target: 0.15,
            max_run_time: 5.0e6,
            heisenberg_factor: 1.0,
            dos_width_frac: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: String,
    pub svg: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: "out".into(), svg: false }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Structural validation beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        let dim_s = self.model.h_s.dim();
        if self.model.h_is.dim() != dim_s {
            return Err(Error::Config(format!(
                "H_S is {dim_s}-dimensional but H_I^S is {}-dimensional",
                self.model.h_is.dim()
            )));
        }
        if dim_s < 2 {
            return Err(Error::Config("system needs at least two levels".into()));
        }
        self.model.h_s.build()?;
        self.model.h_is.build()?;
        let dim_e = self.model.bath.dim();
        if self.model.window.count == 0 || self.model.window.count > dim_e {
            return Err(Error::Config(format!(
                "window count {} invalid for bath dimension {dim_e}",
                self.model.window.count
            )));
        }
        let [a, b] = self.model.level_pair;
        if a == b || a >= dim_s || b >= dim_s {
            return Err(Error::Config(format!(
                "level pair ({a}, {b}) invalid for a {dim_s}-level system"
            )));
        }
        self.protocol.protocol()?;
        for &e in &self.sweep.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Config(format!("sweep epsilon must be positive, got {e}")));
            }
        }
        for &r in &self.sweep.epsilon_rel {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Config(format!(
                    "sweep epsilon_rel must be positive, got {r}"
                )));
            }
        }
        for &t in &self.sweep.ramp_times {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("sweep ramp time must be positive, got {t}")));
            }
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one seed".into()));
        }
        if !(self.numerics.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.numerics.beta)));
        }
        Ok(())
    }

    /// Model with the configured protocol.
    pub fn build_model(&self, seed: u64) -> Result<TotalModel> {
        self.build_model_with_protocol(seed, self.protocol.protocol()?)
    }

    /// Model with a constant-λ protocol, as used by decay, border and
    /// scaling runs (ε ≡ λ).
    pub fn build_frozen_model(&self, seed: u64, epsilon: f64, t_end: f64) -> Result<TotalModel> {
        self.build_model_with_protocol(seed, Protocol::constant(0.0, t_end, epsilon)?)
    }

    fn build_model_with_protocol(&self, seed: u64, protocol: Protocol) -> Result<TotalModel> {
        let (h_e2, h_ie2) = self.model.bath.build(seed)?;
        TotalModel::new(
            self.model.h_s.build()?,
            self.model.h_is.build()?,
            h_e2,
            h_ie2,
            self.model.window.spec(),
            protocol,
        )
    }

    /// SHA-256 over the canonical serialized form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = toml::to_string(self).expect("config reserializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The demo configuration used by documentation and smoke tests.
    pub fn demo() -> Self {
        Self::from_toml(DEMO_CONFIG).expect("demo config is valid")
    }
}

/// Built-in demo configuration: qubit + GOE bath, slow weak ramp.
pub const DEMO_CONFIG: &str = r#"
[model]
h_s = { z = 0.5 }
h_is = { z = 1.0, x = 0.3 }
bath = { kind = "goe", dim = 1024, scale = 1.0 }
window = { count = 256 }

[protocol]
shape = "linear-ramp"
t0 = 0.0
t1 = 2000.0
lambda0 = 0.02
lambda1 = 0.03

[sweep]
epsilon_rel = [0.5]
seeds = [1]

[numerics]
beta = 1.0

[output]
directory = "out"
"#;
