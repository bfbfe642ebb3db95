//! Explained models, concept predictors and embedding providers behind one
//! interface each. Every kind has a file-backed store, a remote endpoint and
//! a built-in implementation that reads the deterministic renderer's markers.

mod remote;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use remote::{RemoteConceptPredictor, RemoteConfig, RemoteEmbedder, RemoteModel};

use crate::digest::text_digest;
use crate::error::{Error, Result};
use crate::render::parse_assignment;
use crate::scm::{ConceptAssignment, ScmGraph};

const SIMPLEX_TOL: f64 = 1e-6;
const RENORM_TOL: f64 = 1e-3;

/// Validates a probability vector. Sums off by at most 1e-3 are rescaled
/// with a warning; anything further off is rejected.
pub fn check_simplex(mut v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::MalformedResponse(format!("{what}: empty probability vector")));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::MalformedResponse(format!(
            "{what}: probabilities must be finite and non-negative"
        )));
    }
    let sum: f64 = v.iter().sum();
    let off = (sum - 1.0).abs();
    if off > RENORM_TOL {
        return Err(Error::MalformedResponse(format!(
            "{what}: probabilities sum to {sum}"
        )));
    }
    if off > SIMPLEX_TOL {
        log::warn!("{what}: probabilities sum to {sum}; renormalizing");
        v.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(v)
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub probs: Vec<f64>,
    pub model_id: String,
}

pub trait ExplainedModel: Send + Sync {
    fn id(&self) -> String;

    fn predict(&self, text: &str) -> Result<PredictionVector>;

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<PredictionVector>> {
        texts.iter().map(|t| self.predict(t)).collect()
    }
}

/// One entry of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPrediction {
    pub text_digest: String,
    pub probs: Vec<f64>,
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::CorruptLine {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Predictions looked up by text digest from `predictions.jsonl`.
#[derive(Debug, Clone)]
pub struct FileModel {
    id: String,
    entries: HashMap<String, Vec<f64>>,
}

impl FileModel {
    pub fn new(id: &str, entries: impl IntoIterator<Item = StoredPrediction>) -> Result<Self> {
        let mut map = HashMap::new();
        for e in entries {
            let probs = check_simplex(e.probs, &e.text_digest)?;
            map.insert(e.text_digest, probs);
        }
        Ok(FileModel {
            id: id.to_string(),
            entries: map,
        })
    }

    pub fn load(id: &str, path: &Path) -> Result<Self> {
        Self::new(id, read_lines::<StoredPrediction>(path)?)
    }
}

impl ExplainedModel for FileModel {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn predict(&self, text: &str) -> Result<PredictionVector> {
        let d = text_digest(text);
        let probs = self.entries.get(&d).cloned().ok_or(Error::UnknownText(d))?;
        Ok(PredictionVector {
            probs,
            model_id: self.id.clone(),
        })
    }
}

/// Extra score `weight * code(concept)` added to one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTerm {
    pub concept: String,
    pub weight: f64,
    pub class: usize,
}

/// Closed-form model over marker-rendered text:
/// `s_y = kappa * 1{y = Y} + sum_C w_C * code(C) * 1{y = target_C}`, then softmax.
#[derive(Debug, Clone)]
pub struct OracleModel {
    graph: ScmGraph,
    kappa: f64,
    terms: Vec<(usize, f64, usize)>,
}

impl OracleModel {
    pub fn new(graph: &ScmGraph, kappa: f64, terms: &[OracleTerm]) -> Result<Self> {
        let n = graph.outcome().cardinality();
        let terms = terms
            .iter()
            .map(|t| {
                if t.class >= n {
                    return Err(Error::Config(format!(
                        "oracle term class {} out of range for {} classes",
                        t.class, n
                    )));
                }
                Ok((graph.index_of(&t.concept)?, t.weight, t.class))
            })
            .collect::<Result<_>>()?;
        Ok(OracleModel {
            graph: graph.clone(),
            kappa,
            terms,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Class probabilities from a concept assignment.
    pub fn probs(&self, assignment: &ConceptAssignment) -> Result<Vec<f64>> {
        let codes = assignment.codes(&self.graph)?;
        let outcome = self.graph.outcome_index();
        let mut scores = vec![0.0; self.graph.outcome().cardinality()];
        scores[codes[outcome] as usize] += self.kappa;
        for &(c, w, class) in &self.terms {
            scores[class] += w * codes[c] as f64;
        }
        Ok(softmax(&scores))
    }

    /// Reference ICaCE computed from assignments alone.
    pub fn analytic_icace(
        &self,
        factual: &ConceptAssignment,
        counterfactual: &ConceptAssignment,
    ) -> Result<Vec<f64>> {
        let a = self.probs(factual)?;
        let b = self.probs(counterfactual)?;
        Ok(b.iter().zip(&a).map(|(x, y)| x - y).collect())
    }
}

impl ExplainedModel for OracleModel {
    fn id(&self) -> String {
        if self.terms.is_empty() {
            format!("oracle:kappa={}", self.kappa)
        } else {
            format!("oracle:kappa={}+{}terms", self.kappa, self.terms.len())
        }
    }

    fn predict(&self, text: &str) -> Result<PredictionVector> {
        let assignment = parse_assignment(&self.graph, text)?;
        Ok(PredictionVector {
            probs: self.probs(&assignment)?,
            model_id: self.id(),
        })
    }
}

/// Per-concept class probabilities for one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptPrediction {
    pub concepts: BTreeMap<String, Vec<f64>>,
}

impl ConceptPrediction {
    /// Checks every graph concept is present with a valid simplex.
    pub fn validated(mut self, graph: &ScmGraph) -> Result<Self> {
        for c in graph.concepts() {
            let v = self.concepts.remove(&c.name).ok_or_else(|| {
                Error::MalformedResponse(format!("concept prediction is missing `{}`", c.name))
            })?;
            if v.len() != c.cardinality() {
                return Err(Error::MalformedResponse(format!(
                    "concept `{}` has {} probabilities, expected {}",
                    c.name,
                    v.len(),
                    c.cardinality()
                )));
            }
            self.concepts.insert(c.name.clone(), check_simplex(v, &c.name)?);
        }
        Ok(self)
    }

    /// Most likely code per concept (lowest code on ties), in declaration order.
    pub fn argmax(&self, graph: &ScmGraph) -> Vec<u32> {
        graph
            .concepts()
            .iter()
            .map(|c| argmax(&self.concepts[&c.name]) as u32)
            .collect()
    }

    pub fn from_assignment(graph: &ScmGraph, a: &ConceptAssignment) -> Result<Self> {
        let codes = a.codes(graph)?;
        Ok(ConceptPrediction {
            concepts: graph
                .concepts()
                .iter()
                .zip(codes)
                .map(|(c, k)| (c.name.clone(), one_hot(c.cardinality(), k as usize)))
                .collect(),
        })
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub trait ConceptPredictor: Send + Sync {
    fn id(&self) -> String;
    fn predict_concepts(&self, text: &str) -> Result<ConceptPrediction>;
}

/// One-hot concept vectors read from markers; deterministic-renderer text only.
#[derive(Debug, Clone)]
pub struct GoldConceptPredictor {
    graph: ScmGraph,
}

impl GoldConceptPredictor {
    pub fn new(graph: &ScmGraph) -> Self {
        GoldConceptPredictor {
            graph: graph.clone(),
        }
    }
}

impl ConceptPredictor for GoldConceptPredictor {
    fn id(&self) -> String {
        "gold-markers".into()
    }

    fn predict_concepts(&self, text: &str) -> Result<ConceptPrediction> {
        ConceptPrediction::from_assignment(&self.graph, &parse_assignment(&self.graph, text)?)
    }
}

/// One entry of `concepts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredConcepts {
    pub text_digest: String,
    pub concepts: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FileConceptPredictor {
    id: String,
    entries: HashMap<String, ConceptPrediction>,
}

impl FileConceptPredictor {
    pub fn new(
        id: &str,
        graph: &ScmGraph,
        entries: impl IntoIterator<Item = StoredConcepts>,
    ) -> Result<Self> {
        let mut map = HashMap::new();
        for e in entries {
            let p = ConceptPrediction {
                concepts: e.concepts,
            }
            .validated(graph)?;
            map.insert(e.text_digest, p);
        }
        Ok(FileConceptPredictor {
            id: id.to_string(),
            entries: map,
        })
    }

    pub fn load(id: &str, graph: &ScmGraph, path: &Path) -> Result<Self> {
        Self::new(id, graph, read_lines::<StoredConcepts>(path)?)
    }
}

impl ConceptPredictor for FileConceptPredictor {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn predict_concepts(&self, text: &str) -> Result<ConceptPrediction> {
        let d = text_digest(text);
        self.entries.get(&d).cloned().ok_or(Error::UnknownText(d))
    }
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Concatenated one-hot concept codes read from markers.
#[derive(Debug, Clone)]
pub struct BagOfMarkers {
    graph: ScmGraph,
}

impl BagOfMarkers {
    pub fn new(graph: &ScmGraph) -> Self {
        BagOfMarkers {
            graph: graph.clone(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.graph.concepts().iter().map(|c| c.cardinality()).sum()
    }
}

impl Embedder for BagOfMarkers {
    fn id(&self) -> String {
        "bag-of-markers".into()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let a = parse_assignment(&self.graph, text)?;
        let mut out = Vec::with_capacity(self.dimension());
        for (c, k) in self.graph.concepts().iter().zip(a.codes(&self.graph)?) {
            out.extend(one_hot(c.cardinality(), k as usize));
        }
        Ok(out)
    }
}

/// One entry of `embeddings.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEmbedding {
    pub text_digest: String,
    pub vec: Vec<f64>,
}

/// Guards the fixed-dimension invariant of a provider.
#[derive(Debug, Default)]
pub(crate) struct DimensionGuard(OnceLock<usize>);

impl DimensionGuard {
    pub(crate) fn check(&self, v: &[f64], provider: &str) -> Result<()> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::MalformedResponse(format!(
                "{provider}: embedding has non-finite entries"
            )));
        }
        let want = *self.0.get_or_init(|| v.len());
        if want != v.len() {
            return Err(Error::MalformedResponse(format!(
                "{provider}: embedding dimension {} differs from {want}",
                v.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct FileEmbedder {
    id: String,
    entries: HashMap<String, Vec<f64>>,
}

impl FileEmbedder {
    pub fn new(id: &str, entries: impl IntoIterator<Item = StoredEmbedding>) -> Result<Self> {
        let guard = DimensionGuard::default();
        let mut map = HashMap::new();
        for e in entries {
            guard.check(&e.vec, id)?;
            map.insert(e.text_digest, e.vec);
        }
        Ok(FileEmbedder {
            id: id.to_string(),
            entries: map,
        })
    }

    pub fn load(id: &str, path: &Path) -> Result<Self> {
        Self::new(id, read_lines::<StoredEmbedding>(path)?)
    }
}

impl Embedder for FileEmbedder {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let d = text_digest(text);
        self.entries.get(&d).cloned().ok_or(Error::UnknownText(d))
    }
}
