//! Serialized graph description, as read from `graph.json`.
//!
//! ```json
//! {
//!   "name": "violence",
//!   "concepts": [{"name": "gender", "label": "Gender", "role": "concept",
//!                 "values": [{"code": 0, "text": "Female"}, {"code": 1, "text": "Male"}]}],
//!   "edges": [["gender", "license"]],
//!   "equations": [{"target": "license",
//!                  "terms": [{"parent": "gender", "kind": "code", "weight": 0.3}],
//!                  "intercept": 0.0, "noise": {"mean": 0.0, "std": 0.5}, "clamp": [0, 2]}],
//!   "priors": [{"target": "gender", "probs": [0.5, 0.5]}],
//!   "text": {"grounding": ["persona", "template"]}
//! }
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub name: String,
    #[serde(default)]
    pub title: String,
    /// Whether changes of the outcome concept belong to the default change set.
    #[serde(default)]
    pub outcome_in_changes: bool,
    pub concepts: Vec<ConceptSpec>,
    pub edges: Vec<(String, String)>,
    pub equations: Vec<EquationSpec>,
    #[serde(default)]
    pub priors: Vec<PriorSpec>,
    #[serde(default)]
    pub text: TextNodeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Outcome,
    Concept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub name: String,
    pub label: String,
    #[serde(default)]
    pub symbol: String,
    pub role: Role,
    pub values: Vec<ValueSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSpec {
    pub code: i64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    /// `weight * parent_code`
    Code,
    /// `weight * 1{parent = code}`
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub parent: String,
    pub kind: TermKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<i64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub target: String,
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub intercept: f64,
    pub noise: NoiseSpec,
    pub clamp: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub target: String,
    pub probs: Vec<f64>,
}

/// The text node depends on every concept plus the listed grounding inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextNodeSpec {
    pub grounding: Vec<String>,
}

impl Default for TextNodeSpec {
    fn default() -> Self {
        TextNodeSpec {
            grounding: vec!["persona".into(), "template".into()],
        }
    }
}

/// Reserved node name for the generated text.
pub const TEXT_NODE: &str = "text";
