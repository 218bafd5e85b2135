//! Collective entity resolution for knowledge graphs.
//!
//! Weighted first-order rules over co-reference (`Same`), blocking
//! (`CandSame`), similarity, label, relation and ontology predicates are
//! grounded into hinge-loss potentials under Łukasiewicz semantics and solved
//! for their MAP state with consensus ADMM. The soft co-reference values are
//! then turned into clusters or reference-to-entity matchings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod blocking;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod grounding;
pub mod inference;
pub mod io;
pub mod kg;
mod par;
pub mod pipeline;
pub mod resolution;
pub mod rules;
pub mod similarity;

pub use error::{Error, Result};

/// The three resolution settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Cluster noisy references among themselves.
    Extractions,
    /// Map new references onto an existing graph, or to new entities.
    Extend,
    /// Map the entities of one graph onto a canonical target graph.
    Merge,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Extractions => "extractions",
            Scenario::Extend => "extend",
            Scenario::Merge => "merge",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extractions" => Ok(Scenario::Extractions),
            "extend" => Ok(Scenario::Extend),
            "merge" => Ok(Scenario::Merge),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}
