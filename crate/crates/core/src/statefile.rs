//! Kind-dispatching loader for the JSON state-file schemas.
//!
//! Both schemas carry `"v": 1` and a `"kind"` discriminator; this module
//! peeks at the discriminator and defers to the matching parser.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::indist::{indist_state_from_json, IndistState};
use crate::multidof::{dist_state_from_json, DistState};

/// A state loaded from disk: either formalism, resolved by the file's
/// `kind` field.
#[derive(Clone, Debug)]
pub enum LoadedState {
    Distinguishable(DistState),
    Indistinguishable(IndistState),
}

impl LoadedState {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedState::Distinguishable(_) => "distinguishable",
            LoadedState::Indistinguishable(_) => "indistinguishable",
        }
    }

    pub fn d(&self) -> usize {
        match self {
            LoadedState::Distinguishable(s) => s.d(),
            LoadedState::Indistinguishable(s) => s.d(),
        }
    }

    /// DoFs per particle (distinguishable states here are side-symmetric).
    pub fn n(&self) -> usize {
        match self {
            LoadedState::Distinguishable(s) => s.dofs_a(),
            LoadedState::Indistinguishable(s) => s.n(),
        }
    }
}

#[derive(Deserialize)]
struct KindProbe {
    v: u32,
    kind: String,
}

/// Parses a state file of either kind.
pub fn load_state_json(text: &str) -> Result<LoadedState> {
    let probe: KindProbe =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))?;
    if probe.v != 1 {
        return Err(Error::Parse(format!(
            "unsupported state-file schema version {}",
            probe.v
        )));
    }
    match probe.kind.as_str() {
        "distinguishable" => Ok(LoadedState::Distinguishable(dist_state_from_json(text)?)),
        "indistinguishable" => Ok(LoadedState::Indistinguishable(indist_state_from_json(
            text,
        )?)),
        other => Err(Error::Parse(format!(
            "unknown state kind {other:?}; expected \"distinguishable\" or \"indistinguishable\""
        ))),
    }
}
