use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Mdp;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// On-disk MDP document: `transition[s][a][s']`, `reward[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<T>>>,
    pub reward: Vec<Vec<T>>,
}

impl<T: Real> TryFrom<MdpFile<T>> for Mdp<T> {
    type Error = Error;

    fn try_from(f: MdpFile<T>) -> Result<Self> {
        if f.transition.len() != f.n_states {
            return Err(Error::Dimension(format!(
                "n_states = {} but transition has {} rows",
                f.n_states,
                f.transition.len()
            )));
        }
        if let Some(s) = f.transition.iter().position(|r| r.len() != f.n_actions) {
            return Err(Error::Dimension(format!(
                "n_actions = {} but transition[{s}] has {} entries",
                f.n_actions,
                f.transition[s].len()
            )));
        }
        Mdp::new(f.transition, f.reward)
    }
}

impl<T: Real> From<&Mdp<T>> for MdpFile<T> {
    fn from(m: &Mdp<T>) -> Self {
        MdpFile {
            n_states: m.n_states(),
            n_actions: m.n_actions(),
            transition: m.transition_nested(),
            reward: m.reward_nested(),
        }
    }
}

impl<T: Real> Mdp<T> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: MdpFile<T> = serde_json::from_str(s).map_err(|e| Error::json("MDP document", e))?;
        f.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&MdpFile::from(self)).expect("MDP serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: MdpFile<T> = serde_json::from_str(&text)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        f.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical JSON document, hex encoded.
    pub fn content_hash(&self) -> String {
        let compact = serde_json::to_vec(&MdpFile::from(self)).expect("MDP serializes");
        hex::encode(Sha256::digest(&compact))
    }
}
