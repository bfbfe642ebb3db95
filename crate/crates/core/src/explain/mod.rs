//! Explanation methods. Each one maps an (example, concept change) pair to a
//! vector over outcome classes that estimates the change in the explained
//! model's prediction.
//!
//! Matching methods average `f(candidate) - f(x)` over up to `k` candidates
//! from a pool whose target concept already takes the new value; they differ
//! in how candidates are ranked. Counterfactual generation edits the text
//! itself and scores `f(edit) - f(x)`.

mod cfgen;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cfgen::{
    build_cf_prompt, CfGenerator, CfStrategy, ChatEditor, EditRequest, StructuralEditor,
    TextEditor,
};

use crate::adapters::{ConceptPredictor, Embedder, ExplainedModel};
use crate::digest::text_digest;
use crate::error::{Error, Result};
use crate::render::write_atomic;
use crate::rng;
use crate::scm::{ConceptChange, ExogenousRecord, ScmGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationVector {
    pub example_id: String,
    pub change: ConceptChange,
    pub method_id: String,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    FtMatch,
    PtMatch,
    StMatch,
    RandomMatch,
    Approx,
    ConVecs,
    CfGen(CfStrategy),
}

impl Method {
    pub fn id(&self) -> String {
        match self {
            Method::FtMatch => "ft_match".into(),
            Method::PtMatch => "pt_match".into(),
            Method::StMatch => "st_match".into(),
            Method::RandomMatch => "random_match".into(),
            Method::Approx => "approx".into(),
            Method::ConVecs => "convecs".into(),
            Method::CfGen(s) => format!("cfgen:{s}"),
        }
    }

    pub fn is_semantic(&self) -> bool {
        matches!(self, Method::FtMatch | Method::PtMatch | Method::StMatch)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// `cfgen` alone selects the mediators-and-confounders strategy.
impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ft_match" => Method::FtMatch,
            "pt_match" => Method::PtMatch,
            "st_match" => Method::StMatch,
            "random_match" => Method::RandomMatch,
            "approx" => Method::Approx,
            "convecs" => Method::ConVecs,
            "cfgen" => Method::CfGen(CfStrategy::MediatorsConfounders),
            other => match other.strip_prefix("cfgen:") {
                Some(s) => Method::CfGen(s.parse()?),
                None => return Err(Error::UnknownMethod(other.to_string())),
            },
        })
    }
}

/// One text with everything the explainers read from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
    pub text_digest: String,
    pub prediction: Vec<f64>,
    /// Per-concept probabilities, in graph declaration order.
    pub concepts: Vec<Vec<f64>>,
    /// Argmax of each concept block.
    pub labels: Vec<u32>,
    pub embedding: Option<Vec<f64>>,
    pub exo: Option<ExogenousRecord>,
}

impl Item {
    pub fn build(
        graph: &ScmGraph,
        id: &str,
        text: &str,
        model: &dyn ExplainedModel,
        predictor: &dyn ConceptPredictor,
        embedder: Option<&dyn Embedder>,
    ) -> Result<Self> {
        let cp = predictor.predict_concepts(text)?.validated(graph)?;
        let labels = cp.argmax(graph);
        let concepts = graph
            .concepts()
            .iter()
            .map(|c| cp.concepts[&c.name].clone())
            .collect();
        Ok(Item {
            id: id.to_string(),
            text: text.to_string(),
            text_digest: text_digest(text),
            prediction: model.predict(text)?.probs,
            concepts,
            labels,
            embedding: embedder.map(|e| e.embed(text)).transpose()?,
            exo: None,
        })
    }

    pub fn with_exo(mut self, exo: ExogenousRecord) -> Self {
        self.exo = Some(exo);
        self
    }
}

/// Candidate texts indexed by (concept, predicted code). Candidates are kept
/// sorted by id, which is also the tie-breaking order.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    items: Vec<Item>,
    concept_index: HashMap<String, usize>,
    by_value: HashMap<(usize, u32), Vec<usize>>,
    /// Per concept: whether the outcome lies downstream of it.
    outcome_downstream: Vec<bool>,
    outcome: usize,
}

impl CandidatePool {
    pub fn new(graph: &ScmGraph, mut items: Vec<Item>) -> Self {
        items.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_value: HashMap<(usize, u32), Vec<usize>> = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            for (c, &code) in it.labels.iter().enumerate() {
                by_value.entry((c, code)).or_default().push(i);
            }
        }
        CandidatePool {
            items,
            concept_index: graph
                .concepts()
                .iter()
                .enumerate()
                .map(|(i, c)| (c.name.clone(), i))
                .collect(),
            by_value,
            outcome_downstream: (0..graph.len())
                .map(|i| graph.descendant_indices(i).contains(&graph.outcome_index()))
                .collect(),
            outcome: graph.outcome_index(),
        }
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn target(&self, change: &ConceptChange) -> Result<usize> {
        self.concept_index
            .get(&change.concept)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(change.concept.clone()))
    }

    /// Candidates with the target concept at the new value, excluding exact
    /// text duplicates of `x`.
    fn eligible(&self, x: &Item, change: &ConceptChange) -> Result<Vec<usize>> {
        let c = self.target(change)?;
        let out: Vec<usize> = self
            .by_value
            .get(&(c, change.to))
            .map(|v| {
                v.iter()
                    .copied()
                    .filter(|&i| self.items[i].text_digest != x.text_digest)
                    .collect()
            })
            .unwrap_or_default();
        if out.is_empty() {
            return Err(Error::EmptyCandidateSet {
                concept: change.concept.clone(),
                code: change.to,
            });
        }
        Ok(out)
    }

    fn delta(&self, x: &Item, chosen: &[usize]) -> Vec<f64> {
        let n = chosen.len() as f64;
        let mut mean = vec![0.0; x.prediction.len()];
        for &i in chosen {
            for (m, p) in mean.iter_mut().zip(&self.items[i].prediction) {
                *m += p;
            }
        }
        mean.iter().zip(&x.prediction).map(|(m, f)| m / n - f).collect()
    }

    /// Top `k` by descending similarity; ties keep id order.
    fn top_k(&self, mut scored: Vec<(usize, f64)>, k: usize) -> Vec<usize> {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.into_iter().take(k).map(|(i, _)| i).collect()
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn seeded_order(mut idx: Vec<usize>, seed: u64, x: &Item, change: &ConceptChange, tag: &str) -> Vec<usize> {
    let mut r = rng::stream(rng::derive_seed(seed, &[tag, &x.id, &change.to_string()]), 0);
    for i in 0..idx.len() {
        let j = i + rng::uniform_index(&mut r, idx.len() - i);
        idx.swap(i, j);
    }
    idx
}

/// Top-k by embedding cosine similarity to `x`.
pub fn explain_semantic_match(
    pool: &CandidatePool,
    x: &Item,
    change: &ConceptChange,
    k: usize,
) -> Result<Vec<f64>> {
    let missing = || Error::Config("semantic matching needs embeddings on every item".into());
    let ex = x.embedding.as_ref().ok_or_else(missing)?;
    let scored = pool
        .eligible(x, change)?
        .into_iter()
        .map(|i| {
            let e = pool.items[i].embedding.as_ref().ok_or_else(missing)?;
            Ok((i, cosine_similarity(ex, e)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pool.delta(x, &pool.top_k(scored, k.max(1))))
}

/// Baseline: `k` uniformly drawn candidates with the target value.
pub fn explain_random_match(
    pool: &CandidatePool,
    x: &Item,
    change: &ConceptChange,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut order = seeded_order(pool.eligible(x, change)?, seed, x, change, "random_match");
    order.truncate(k.max(1));
    Ok(pool.delta(x, &order))
}

/// Candidates whose other predicted concepts all equal `x`'s; when none
/// exist, candidates with exactly one mismatch. Up to `k` in seeded order.
/// The outcome concept is left out of the comparison when it is downstream
/// of the target, since it is meant to move with the change.
pub fn explain_approx(
    pool: &CandidatePool,
    x: &Item,
    change: &ConceptChange,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let target = pool.target(change)?;
    let eligible = pool.eligible(x, change)?;
    let skip_outcome = pool.outcome_downstream[target];
    let mismatches = |i: usize| {
        pool.items[i]
            .labels
            .iter()
            .zip(&x.labels)
            .enumerate()
            .filter(|&(c, (a, b))| c != target && !(skip_outcome && c == pool.outcome) && a != b)
            .count()
    };
    let mut chosen: Vec<usize> = eligible.iter().copied().filter(|&i| mismatches(i) == 0).collect();
    if chosen.is_empty() {
        chosen = eligible.iter().copied().filter(|&i| mismatches(i) == 1).collect();
    }
    if chosen.is_empty() {
        return Err(Error::EmptyCandidateSet {
            concept: change.concept.clone(),
            code: change.to,
        });
    }
    let mut order = seeded_order(chosen, seed, x, change, "approx");
    order.truncate(k.max(1));
    Ok(pool.delta(x, &order))
}

fn concat_blocks(item: &Item, skip: Option<usize>) -> Vec<f64> {
    item.concepts
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != skip)
        .flat_map(|(_, v)| v.iter().copied())
        .collect()
}

/// Top-k by cosine over concatenated concept probability vectors. The target
/// concept's block is left out unless `include_target` is set.
pub fn explain_convecs(
    pool: &CandidatePool,
    x: &Item,
    change: &ConceptChange,
    k: usize,
    include_target: bool,
) -> Result<Vec<f64>> {
    let target = pool.target(change)?;
    let skip = (!include_target).then_some(target);
    let qx = concat_blocks(x, skip);
    let scored = pool
        .eligible(x, change)?
        .into_iter()
        .map(|i| (i, cosine_similarity(&qx, &concat_blocks(&pool.items[i], skip))))
        .collect();
    Ok(pool.delta(x, &pool.top_k(scored, k.max(1))))
}

/// A configured explanation method.
pub enum Explainer<'a> {
    Semantic {
        method: Method,
        pool: &'a CandidatePool,
        k: usize,
    },
    Random {
        pool: &'a CandidatePool,
        k: usize,
        seed: u64,
    },
    Approx {
        pool: &'a CandidatePool,
        k: usize,
        seed: u64,
    },
    ConVecs {
        pool: &'a CandidatePool,
        k: usize,
        include_target: bool,
    },
    CfGen {
        generator: &'a CfGenerator<'a>,
        model: &'a dyn ExplainedModel,
    },
}

impl Explainer<'_> {
    pub fn method_id(&self) -> String {
        match self {
            Explainer::Semantic { method, .. } => method.id(),
            Explainer::Random { .. } => Method::RandomMatch.id(),
            Explainer::Approx { .. } => Method::Approx.id(),
            Explainer::ConVecs { .. } => Method::ConVecs.id(),
            Explainer::CfGen { generator, .. } => Method::CfGen(generator.strategy()).id(),
        }
    }

    pub fn explain(&self, x: &Item, change: &ConceptChange) -> Result<ExplanationVector> {
        let delta = match self {
            Explainer::Semantic { pool, k, .. } => explain_semantic_match(pool, x, change, *k),
            Explainer::Random { pool, k, seed } => explain_random_match(pool, x, change, *k, *seed),
            Explainer::Approx { pool, k, seed } => explain_approx(pool, x, change, *k, *seed),
            Explainer::ConVecs {
                pool,
                k,
                include_target,
            } => explain_convecs(pool, x, change, *k, *include_target),
            Explainer::CfGen { generator, model } => generator.explain(*model, x, change),
        }
        .map_err(|e| e.with_example(&x.id))?;
        Ok(ExplanationVector {
            example_id: x.id.clone(),
            change: change.clone(),
            method_id: self.method_id(),
            delta,
        })
    }

    /// Explains every query in parallel; output follows input order.
    pub fn explain_all(&self, queries: &[(&Item, ConceptChange)]) -> Result<Vec<ExplanationVector>> {
        queries
            .par_iter()
            .map(|(x, c)| self.explain(x, c))
            .collect()
    }
}

pub fn write_explanations(path: &Path, rows: &[ExplanationVector]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_atomic(path, &out)
}

pub fn read_explanations(path: &Path) -> Result<Vec<ExplanationVector>> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::one_hot;
    use crate::dgp::load_builtin;

    /// A three-concept toy graph: a -> b -> y.
    fn toy() -> ScmGraph {
        ScmGraph::from_json(
            r#"{
              "name": "toy",
              "concepts": [
                {"name":"a","label":"A","symbol":"A","role":"concept","values":[{"code":0,"text":"a0"},{"code":1,"text":"a1"}]},
                {"name":"b","label":"B","symbol":"B","role":"concept","values":[{"code":0,"text":"b0"},{"code":1,"text":"b1"}]},
                {"name":"y","label":"Y","symbol":"Y","role":"outcome","values":[{"code":0,"text":"y0"},{"code":1,"text":"y1"},{"code":2,"text":"y2"}]}
              ],
              "edges": [["a","b"],["b","y"]],
              "priors": [{"target":"a","probs":[0.5,0.5]}],
              "equations": [
                {"target":"b","terms":[{"parent":"a","kind":"code","weight":1.0}],"intercept":0.0,"noise":{"mean":0.0,"std":0.5},"clamp":[0,1]},
                {"target":"y","terms":[{"parent":"b","kind":"code","weight":1.0}],"intercept":0.0,"noise":{"mean":0.0,"std":0.5},"clamp":[0,2]}
              ]
            }"#,
        )
        .unwrap()
    }

    fn item(id: &str, labels: [u32; 3], pred: [f64; 3], emb: [f64; 2]) -> Item {
        let card = [2, 2, 3];
        Item {
            id: id.into(),
            text: id.into(),
            text_digest: text_digest(id),
            prediction: pred.to_vec(),
            concepts: labels
                .iter()
                .zip(card)
                .map(|(&l, n)| one_hot(n, l as usize))
                .collect(),
            labels: labels.to_vec(),
            embedding: Some(emb.to_vec()),
            exo: None,
        }
    }

    fn change(g: &ScmGraph, c: &str, from: u32, to: u32) -> ConceptChange {
        ConceptChange::new(g, c, from, to).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn semantic_match_averages_top_k() {
        let g = toy();
        let x = item("x", [0, 0, 0], [0.7, 0.2, 0.1], [1.0, 0.0]);
        let pool = CandidatePool::new(
            &g,
            vec![
                item("c1", [1, 0, 0], [0.1, 0.8, 0.1], [1.0, 0.1]),
                item("c2", [1, 0, 0], [0.2, 0.7, 0.1], [1.0, 0.2]),
                item("c3", [1, 1, 0], [0.3, 0.6, 0.1], [1.0, 0.3]),
                item("c4", [1, 1, 0], [0.9, 0.0, 0.1], [0.0, 1.0]),
                item("c5", [0, 1, 0], [0.0, 0.0, 1.0], [1.0, 0.0]),
            ],
        );
        let d = explain_semantic_match(&pool, &x, &change(&g, "a", 0, 1), 3).unwrap();
        // mean of the three nearest, minus f(x)
        let want = [
            (0.1 + 0.2 + 0.3) / 3.0 - 0.7,
            (0.8 + 0.7 + 0.6) / 3.0 - 0.2,
            (0.1 + 0.1 + 0.1) / 3.0 - 0.1,
        ];
        assert!(close(&d, &want));
        assert!(close(&d, &[-0.5, 0.5, 0.0]));
        assert!(d.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn fewer_candidates_than_k_uses_all() {
        let g = toy();
        let x = item("x", [0, 0, 0], [0.5, 0.5, 0.0], [1.0, 0.0]);
        let pool = CandidatePool::new(
            &g,
            vec![
                item("c1", [1, 0, 0], [1.0, 0.0, 0.0], [1.0, 0.0]),
                item("c2", [1, 0, 0], [0.0, 1.0, 0.0], [0.0, 1.0]),
            ],
        );
        let d = explain_semantic_match(&pool, &x, &change(&g, "a", 0, 1), 3).unwrap();
        assert!(close(&d, &[0.0, 0.0, 0.0]));
    }

    #[test]
    fn self_match_with_k1_recovers_icace() {
        let g = toy();
        let x = item("x", [0, 0, 0], [0.6, 0.3, 0.1], [1.0, 0.0]);
        let cf = item("x-cf", [1, 1, 1], [0.1, 0.8, 0.1], [1.0, 0.0]);
        let pool = CandidatePool::new(
            &g,
            vec![item("a-other", [1, 0, 2], [0.0, 0.0, 1.0], [0.5, 0.5]), cf.clone()],
        );
        let d = explain_semantic_match(&pool, &x, &change(&g, "a", 0, 1), 1).unwrap();
        let icace: Vec<f64> = cf.prediction.iter().zip(&x.prediction).map(|(a, b)| a - b).collect();
        assert!(close(&d, &icace));
    }

    #[test]
    fn empty_candidate_set() {
        let g = toy();
        let x = item("x", [0, 0, 0], [1.0, 0.0, 0.0], [1.0, 0.0]);
        let pool = CandidatePool::new(&g, vec![item("c", [0, 1, 0], [1.0, 0.0, 0.0], [1.0, 0.0])]);
        assert!(matches!(
            explain_semantic_match(&pool, &x, &change(&g, "a", 0, 1), 3),
            Err(Error::EmptyCandidateSet { .. })
        ));
        // an exact text duplicate of x is never a candidate
        let dup = CandidatePool::new(&g, vec![Item { id: "d".into(), ..item("x", [1, 0, 0], [0.0, 1.0, 0.0], [1.0, 0.0]) }]);
        assert!(explain_semantic_match(&dup, &x, &change(&g, "a", 0, 1), 3).is_err());
    }

    #[test]
    fn approx_prefers_perfect_matches_then_one_mismatch() {
        let g = toy();
        let x = item("x", [0, 1, 2], [1.0, 0.0, 0.0], [1.0, 0.0]);
        let perfect = item("p", [1, 1, 2], [0.0, 1.0, 0.0], [0.0, 1.0]);
        let one_off = item("q", [1, 0, 2], [0.0, 0.0, 1.0], [1.0, 0.0]);
        let two_off = item("r", [1, 0, 0], [0.5, 0.5, 0.0], [1.0, 0.0]);
        let c = change(&g, "a", 0, 1);
        let pool = CandidatePool::new(&g, vec![perfect.clone(), one_off.clone(), two_off.clone()]);
        assert!(close(&explain_approx(&pool, &x, &c, 3, 7).unwrap(), &[-1.0, 1.0, 0.0]));
        // y is downstream of a, so r's outcome mismatch is not counted
        let pool = CandidatePool::new(&g, vec![one_off.clone(), two_off.clone()]);
        assert!(close(&explain_approx(&pool, &x, &c, 3, 7).unwrap(), &[-0.75, 0.25, 0.5]));
        let outcome_only = item("s", [1, 1, 0], [0.0, 1.0, 0.0], [0.0, 1.0]);
        let pool = CandidatePool::new(&g, vec![one_off, outcome_only]);
        assert!(close(&explain_approx(&pool, &x, &c, 3, 7).unwrap(), &[-1.0, 1.0, 0.0]));
        let ineligible = item("n", [0, 1, 2], [1.0, 0.0, 0.0], [1.0, 0.0]);
        let pool = CandidatePool::new(&g, vec![ineligible]);
        assert!(explain_approx(&pool, &x, &c, 3, 7).is_err());
    }

    #[test]
    fn approx_selection_is_seeded() {
        let g = toy();
        let x = item("x", [0, 0, 0], [1.0, 0.0, 0.0], [1.0, 0.0]);
        let items: Vec<Item> = (0..6)
            .map(|i| item(&format!("c{i}"), [1, 0, 0], one_hot(3, i % 3).try_into().unwrap(), [1.0, 0.0]))
            .collect();
        let pool = CandidatePool::new(&g, items);
        let c = change(&g, "a", 0, 1);
        let a = explain_approx(&pool, &x, &c, 1, 3).unwrap();
        assert_eq!(a, explain_approx(&pool, &x, &c, 1, 3).unwrap());
        let distinct: std::collections::BTreeSet<String> = (0..20)
            .map(|s| format!("{:?}", explain_approx(&pool, &x, &c, 1, s).unwrap()))
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn convecs_similarity_of_one_hot_blocks() {
        // three binary blocks, one differing: cosine 2/3
        let u = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let v = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!((cosine_similarity(&u, &v) - 2.0 / 3.0).abs() < 1e-12);
        let g = toy();
        let x = item("x", [0, 1, 2], [1.0, 0.0, 0.0], [1.0, 0.0]);
        let same = item("z-same", [1, 1, 2], [0.0, 1.0, 0.0], [0.0, 1.0]);
        let diff = item("a-diff", [1, 0, 2], [0.0, 0.0, 1.0], [0.0, 1.0]);
        let pool = CandidatePool::new(&g, vec![same, diff]);
        let d = explain_convecs(&pool, &x, &change(&g, "a", 0, 1), 1, false).unwrap();
        assert!(close(&d, &[-1.0, 1.0, 0.0]));
    }

    #[test]
    fn convecs_orthogonal_ties_fall_back_to_id_order() {
        let g = toy();
        let mut x = item("x", [0, 0, 0], [1.0, 0.0, 0.0], [1.0, 0.0]);
        x.concepts = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0, 0.0]];
        let mut a = item("a", [1, 1, 1], [0.0, 1.0, 0.0], [1.0, 0.0]);
        a.concepts = vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 0.0]];
        let mut b = item("b", [1, 1, 2], [0.0, 0.0, 1.0], [1.0, 0.0]);
        b.concepts = vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0, 1.0]];
        let pool = CandidatePool::new(&g, vec![b, a]);
        let d = explain_convecs(&pool, &x, &change(&g, "a", 0, 1), 1, false).unwrap();
        assert!(close(&d, &[-1.0, 1.0, 0.0]));
    }

    #[test]
    fn method_names_parse() {
        for m in ["ft_match", "pt_match", "st_match", "random_match", "approx", "convecs"] {
            assert_eq!(m.parse::<Method>().unwrap().id(), m);
        }
        assert_eq!(
            "cfgen".parse::<Method>().unwrap(),
            Method::CfGen(CfStrategy::MediatorsConfounders)
        );
        assert_eq!("cfgen:fix_all".parse::<Method>().unwrap().id(), "cfgen:fix_all");
        assert!(matches!("lime".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert!(matches!("cfgen:bogus".parse::<Method>(), Err(Error::UnknownStrategy(_))));
    }

    #[test]
    fn explanations_round_trip() {
        let g = load_builtin("cv").unwrap().graph;
        let rows = vec![ExplanationVector {
            example_id: "e".into(),
            change: change(&g, "education", 0, 3),
            method_id: "approx".into(),
            delta: vec![-0.1, 0.05, 0.05],
        }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/explanations.jsonl");
        write_explanations(&p, &rows).unwrap();
        assert_eq!(read_explanations(&p).unwrap(), rows);
    }
}
