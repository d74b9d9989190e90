//! Experiment configuration: a TOML file merged with command-line flags.
//!
//! Every key is optional; flags given on the command line override the file.
//!
//! ```toml
//! model = "bc"          # "bc", "cwp" or "gcwp"
//! q = 3                 # spin states (cwp, gcwp)
//! r = 2.0               # interaction exponent (gcwp)
//! beta = [0.5, 1.0]     # scalar or list
//! K = 0.8               # Blume-Capel interaction, scalar or list
//! n = [20, 40]          # scalar or list
//! eps = 0.25
//! mesh = 0.01
//! seed = 7
//! replicas = 1000
//! max_steps = 1000000
//! steps = 10000
//! stride = 10
//! t_max = 100000
//! start = "corners"     # couple: corners, equilibrium-vs-corner, shuffle
//! x = [0, 0, 2]         # explicit starting configurations (couple)
//! y = [2, 2, 2]
//! ```

use std::path::Path;

use mixlab::{Configuration, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<String>,
    pub q: Option<usize>,
    pub r: Option<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub beta: Vec<f64>,
    #[serde(rename = "K", deserialize_with = "one_or_many")]
    pub k: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    pub eps: Option<f64>,
    pub mesh: Option<f64>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub max_steps: Option<u64>,
    pub steps: Option<u64>,
    pub stride: Option<u64>,
    pub t_max: Option<u64>,
    pub start: Option<String>,
    pub x: Option<Vec<usize>>,
    pub y: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn merged(mut self, flags: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if flags.$f.is_some() { self.$f = flags.$f; })*};
        }
        take!(model, q, r, eps, mesh, seed, replicas, max_steps, steps, stride, t_max, start, x, y);
        if !flags.beta.is_empty() {
            self.beta = flags.beta;
        }
        if !flags.k.is_empty() {
            self.k = flags.k;
        }
        if !flags.n.is_empty() {
            self.n = flags.n;
        }
        self
    }

    /// SHA-256 over the command name and the canonical JSON of the resolved
    /// configuration.
    pub fn hash(&self, command: &str) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn family(&self) -> Result<&str, CliError> {
        match self.model.as_deref() {
            Some(m @ ("bc" | "cwp" | "gcwp")) => Ok(m),
            Some(other) => Err(CliError::Usage(format!("unknown model {other:?}; use bc, cwp or gcwp"))),
            None => Err(CliError::Usage("--model is required".into())),
        }
    }

    pub fn q(&self) -> Result<usize, CliError> {
        self.q.ok_or_else(|| CliError::Usage("--q is required for this model".into()))
    }

    /// Interaction exponent, 2 when unset.
    pub fn r(&self) -> f64 {
        self.r.unwrap_or(2.0)
    }

    pub fn single_beta(&self) -> Result<f64, CliError> {
        match self.beta.as_slice() {
            [b] => Ok(*b),
            [] => Err(CliError::Usage("--beta is required".into())),
            _ => Err(CliError::Usage("this command takes a single --beta".into())),
        }
    }

    pub fn single_k(&self) -> Result<f64, CliError> {
        match self.k.as_slice() {
            [k] => Ok(*k),
            [] => Err(CliError::Usage("--K is required for the bc model".into())),
            _ => Err(CliError::Usage("this command takes a single --K".into())),
        }
    }

    pub fn single_n(&self) -> Result<usize, CliError> {
        match self.n.as_slice() {
            [n] => Ok(*n),
            [] => Err(CliError::Usage("--n is required".into())),
            _ => Err(CliError::Usage("this command takes a single --n".into())),
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("randomized command: pass --seed (or set seed in the config)".into()))
    }

    /// The single model point named by the configuration.
    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let beta = self.single_beta()?;
        let spec = match self.family()? {
            "bc" => ModelSpec::blume_capel(beta, self.single_k()?),
            "cwp" => ModelSpec::cwp(self.q()?, beta),
            _ => ModelSpec::gcwp(self.q()?, self.r(), beta),
        };
        Ok(spec?)
    }

    pub fn explicit_starts(&self, q: usize) -> Result<Option<(Configuration, Configuration)>, CliError> {
        match (&self.x, &self.y) {
            (Some(x), Some(y)) => Ok(Some((Configuration::new(x.clone(), q)?, Configuration::new(y.clone(), q)?))),
            (None, None) => Ok(None),
            _ => Err(CliError::Usage("--x and --y must be given together".into())),
        }
    }
}
