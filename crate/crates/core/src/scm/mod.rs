//! Structural causal models over discrete concepts.
//!
//! A graph is built from a [`GraphSpec`] by [`validate_graph`]. Root concepts
//! draw from a categorical prior through one stored uniform; every other
//! concept is `clamp(round(sum of terms + intercept + noise), lo, hi)` with a
//! Gaussian noise draw. Interventions replace a concept's mechanism by a
//! constant, and counterfactuals replay the same exogenous record under the
//! intervention.

mod eval;
mod graph;
pub mod spec;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use eval::{
    counterfactual_assignment, evaluate, intervene, root_draw_for_code, round_half_away,
    sample_exogenous, GroundingIds,
};
pub use graph::{
    enumerate_changes, validate_graph, Concept, Equation, Mechanism, ScmGraph, Term, TermSource,
};
pub use spec::GraphSpec;

/// All exogenous inputs for one individual.
///
/// Root concepts store the uniform draw fed through their prior's inverse
/// CDF; all other concepts store their Gaussian noise value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousRecord {
    pub seed: u64,
    pub noise: BTreeMap<String, f64>,
    pub persona_id: String,
    pub template_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptAssignment {
    pub values: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub interventions: BTreeSet<String>,
}

impl ConceptAssignment {
    pub fn get(&self, concept: &str) -> Option<u32> {
        self.values.get(concept).copied()
    }

    /// Concepts whose values differ between two assignments.
    pub fn diff(&self, other: &ConceptAssignment) -> BTreeSet<String> {
        self.values
            .iter()
            .filter(|(k, v)| other.values.get(*k) != Some(v))
            .map(|(k, _)| k.clone())
            .chain(
                other
                    .values
                    .keys()
                    .filter(|k| !self.values.contains_key(*k))
                    .cloned(),
            )
            .collect()
    }

    /// Codes in the graph's declaration order.
    pub fn codes(&self, graph: &ScmGraph) -> crate::Result<Vec<u32>> {
        graph
            .concepts()
            .iter()
            .map(|c| {
                self.get(&c.name)
                    .ok_or_else(|| crate::Error::UnknownConcept(c.name.clone()))
            })
            .collect()
    }

    pub fn from_codes(graph: &ScmGraph, codes: &[u32]) -> Self {
        ConceptAssignment {
            values: graph
                .concepts()
                .iter()
                .zip(codes)
                .map(|(c, &v)| (c.name.clone(), v))
                .collect(),
            interventions: BTreeSet::new(),
        }
    }
}

/// One concept moving from one value to another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptChange {
    pub concept: String,
    #[serde(rename = "from_code")]
    pub from: u32,
    #[serde(rename = "to_code")]
    pub to: u32,
}

impl ConceptChange {
    pub fn new(graph: &ScmGraph, concept: &str, from: u32, to: u32) -> crate::Result<Self> {
        let idx = graph.index_of(concept)?;
        graph.check_code(idx, from as i64)?;
        graph.check_code(idx, to as i64)?;
        if from == to {
            return Err(crate::Error::InvalidChange(format!(
                "`{concept}` change must move between distinct codes"
            )));
        }
        Ok(ConceptChange {
            concept: concept.to_string(),
            from,
            to,
        })
    }
}

impl fmt::Display for ConceptChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}->{}", self.concept, self.from, self.to)
    }
}
