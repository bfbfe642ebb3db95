use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::spec::{GraphSpec, Role, TermKind, TEXT_NODE};
use super::ConceptChange;
use crate::digest::json_digest;
use crate::error::{Error, Result};

/// Tolerance on prior probabilities summing to one.
const PRIOR_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub name: String,
    pub label: String,
    pub symbol: String,
    pub role: Role,
    /// Verbalization per code; codes are `0..values.len()`.
    pub values: Vec<String>,
}

impl Concept {
    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn is_outcome(&self) -> bool {
        self.role == Role::Outcome
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermSource {
    Code,
    Indicator(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub parent: usize,
    pub source: TermSource,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub terms: Vec<Term>,
    pub intercept: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub clamp_lo: u32,
    pub clamp_hi: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// Root concept: categorical prior, stored as its cumulative distribution.
    Prior { probs: Vec<f64>, cdf: Vec<f64> },
    Equation(Equation),
}

/// A validated structural causal model. Immutable once built.
#[derive(Debug, Clone)]
pub struct ScmGraph {
    spec: GraphSpec,
    concepts: Vec<Concept>,
    index: BTreeMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    mechanisms: Vec<Mechanism>,
    topo: Vec<usize>,
    outcome: usize,
    digest: String,
}

impl PartialEq for ScmGraph {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl ScmGraph {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text)?;
        validate_graph(spec)
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn title(&self) -> &str {
        if self.spec.title.is_empty() {
            &self.spec.name
        } else {
            &self.spec.title
        }
    }

    /// SHA-256 over the canonical JSON encoding of the graph description.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concept(&self, idx: usize) -> &Concept {
        &self.concepts[idx]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(name.to_string()))
    }

    pub fn concept_by_name(&self, name: &str) -> Result<&Concept> {
        Ok(&self.concepts[self.index_of(name)?])
    }

    pub fn outcome_index(&self) -> usize {
        self.outcome
    }

    pub fn outcome(&self) -> &Concept {
        &self.concepts[self.outcome]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn parents_of(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children_of(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn mechanism(&self, idx: usize) -> &Mechanism {
        &self.mechanisms[idx]
    }

    pub fn is_root(&self, idx: usize) -> bool {
        self.parents[idx].is_empty()
    }

    pub fn outcome_in_changes(&self) -> bool {
        self.spec.outcome_in_changes
    }

    pub fn check_code(&self, idx: usize, code: i64) -> Result<u32> {
        let c = &self.concepts[idx];
        if code < 0 || code as usize >= c.cardinality() {
            return Err(Error::CodeOutOfRange {
                concept: c.name.clone(),
                code,
            });
        }
        Ok(code as u32)
    }

    /// Transitive ancestors of a concept as indices in declaration order.
    pub fn ancestor_indices(&self, idx: usize) -> Vec<usize> {
        closure(idx, &self.parents)
    }

    /// Transitive descendants of a concept as indices in declaration order.
    pub fn descendant_indices(&self, idx: usize) -> Vec<usize> {
        closure(idx, &self.children)
    }

    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<String>> {
        let idx = self.index_of(name)?;
        Ok(self.names(&self.ancestor_indices(idx)))
    }

    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>> {
        let idx = self.index_of(name)?;
        Ok(self.names(&self.descendant_indices(idx)))
    }

    fn names(&self, idx: &[usize]) -> BTreeSet<String> {
        idx.iter().map(|&i| self.concepts[i].name.clone()).collect()
    }

    /// Every ordered change `(c, c')` with `c != c'` of one concept, ordered
    /// by `from` then `to`.
    pub fn changes_of(&self, name: &str) -> Result<Vec<ConceptChange>> {
        let idx = self.index_of(name)?;
        Ok(self.changes_of_index(idx))
    }

    pub(crate) fn changes_of_index(&self, idx: usize) -> Vec<ConceptChange> {
        let c = &self.concepts[idx];
        let n = c.cardinality() as u32;
        let mut out = Vec::with_capacity((n * (n - 1)) as usize);
        for from in 0..n {
            for to in 0..n {
                if from != to {
                    out.push(ConceptChange {
                        concept: c.name.clone(),
                        from,
                        to,
                    });
                }
            }
        }
        out
    }

    /// Changes over all concepts in declaration order. The outcome concept is
    /// included only when `include_outcome` is set.
    pub fn all_changes(&self, include_outcome: bool) -> Vec<ConceptChange> {
        (0..self.len())
            .filter(|&i| include_outcome || i != self.outcome)
            .flat_map(|i| self.changes_of_index(i))
            .collect()
    }

    /// The default change set: outcome changes per the graph's configuration.
    pub fn default_changes(&self) -> Vec<ConceptChange> {
        self.all_changes(self.spec.outcome_in_changes)
    }

    /// Concepts whose changes form the default change set.
    pub fn change_concepts(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.spec.outcome_in_changes || i != self.outcome)
            .collect()
    }
}

/// Enumerates concept changes for one concept, or the default change set
/// when `concept` is `None`.
pub fn enumerate_changes(graph: &ScmGraph, concept: Option<&str>) -> Result<Vec<ConceptChange>> {
    match concept {
        Some(name) => graph.changes_of(name),
        None => Ok(graph.default_changes()),
    }
}

fn closure(start: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = adj[start].iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if n == start || seen[n] {
            continue;
        }
        seen[n] = true;
        queue.extend(adj[n].iter().copied());
    }
    (0..adj.len()).filter(|&i| seen[i]).collect()
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidGraph(msg.into())
}

/// Validates a parsed graph description and caches its topological order.
pub fn validate_graph(spec: GraphSpec) -> Result<ScmGraph> {
    if spec.concepts.is_empty() {
        return Err(invalid("no concepts declared"));
    }

    let mut index = BTreeMap::new();
    let mut labels = BTreeSet::new();
    let mut concepts = Vec::with_capacity(spec.concepts.len());
    for (i, c) in spec.concepts.iter().enumerate() {
        if c.name.is_empty() || c.name == TEXT_NODE {
            return Err(invalid(format!("illegal concept name `{}`", c.name)));
        }
        if index.insert(c.name.clone(), i).is_some() {
            return Err(invalid(format!("duplicate concept `{}`", c.name)));
        }
        if !labels.insert(c.label.clone()) {
            return Err(invalid(format!("duplicate concept label `{}`", c.label)));
        }
        if c.values.len() < 2 {
            return Err(invalid(format!("concept `{}` needs at least 2 values", c.name)));
        }
        let mut seen_text = BTreeSet::new();
        for (k, v) in c.values.iter().enumerate() {
            if v.code != k as i64 {
                return Err(invalid(format!(
                    "concept `{}`: codes must be consecutive from 0, found {} at position {k}",
                    c.name, v.code
                )));
            }
            if v.text.is_empty() || !seen_text.insert(v.text.as_str()) {
                return Err(invalid(format!(
                    "concept `{}`: verbalizations must be non-empty and distinct",
                    c.name
                )));
            }
        }
        concepts.push(Concept {
            name: c.name.clone(),
            label: c.label.clone(),
            symbol: c.symbol.clone(),
            role: c.role,
            values: c.values.iter().map(|v| v.text.clone()).collect(),
        });
    }

    let outcomes: Vec<usize> = (0..concepts.len())
        .filter(|&i| concepts[i].is_outcome())
        .collect();
    if outcomes.len() != 1 {
        return Err(Error::MultipleOutcomes(outcomes.len()));
    }
    let outcome = outcomes[0];

    let n = concepts.len();
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for (from, to) in &spec.edges {
        if from == TEXT_NODE {
            return Err(invalid("the text node cannot have outgoing edges"));
        }
        if to == TEXT_NODE {
            // text depends on every concept implicitly
            continue;
        }
        let f = *index
            .get(from)
            .ok_or_else(|| Error::UnknownParent(from.clone()))?;
        let t = *index
            .get(to)
            .ok_or_else(|| Error::UnknownParent(to.clone()))?;
        if f == t {
            return Err(Error::CycleDetected(from.clone()));
        }
        if !parents[t].contains(&f) {
            parents[t].push(f);
            children[f].push(t);
        }
    }
    for p in parents.iter_mut().chain(children.iter_mut()) {
        p.sort_unstable();
    }

    let topo = topological_order(&parents, &children)
        .map_err(|i| Error::CycleDetected(concepts[i].name.clone()))?;

    let mut mechanisms: Vec<Option<Mechanism>> = vec![None; n];
    for prior in &spec.priors {
        let t = *index
            .get(&prior.target)
            .ok_or_else(|| Error::UnknownConcept(prior.target.clone()))?;
        if !parents[t].is_empty() {
            return Err(invalid(format!(
                "`{}` has parents and cannot carry a prior",
                prior.target
            )));
        }
        if prior.probs.len() != concepts[t].cardinality() {
            return Err(invalid(format!(
                "prior for `{}` has {} entries, concept has {} values",
                prior.target,
                prior.probs.len(),
                concepts[t].cardinality()
            )));
        }
        if prior.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid(format!("prior for `{}` has a negative entry", prior.target)));
        }
        let sum: f64 = prior.probs.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(invalid(format!("prior for `{}` sums to {sum}", prior.target)));
        }
        let mut acc = 0.0;
        let cdf = prior
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if mechanisms[t].is_some() {
            return Err(invalid(format!("`{}` has two mechanisms", prior.target)));
        }
        mechanisms[t] = Some(Mechanism::Prior {
            probs: prior.probs.clone(),
            cdf,
        });
    }

    for eq in &spec.equations {
        let t = *index
            .get(&eq.target)
            .ok_or_else(|| Error::UnknownConcept(eq.target.clone()))?;
        let mut covered = BTreeSet::new();
        let mut terms = Vec::with_capacity(eq.terms.len());
        for term in &eq.terms {
            let p = *index
                .get(&term.parent)
                .ok_or_else(|| Error::UnknownParent(term.parent.clone()))?;
            if !parents[t].contains(&p) {
                return Err(Error::EquationParentMismatch {
                    target: eq.target.clone(),
                    detail: format!("`{}` is not a declared parent", term.parent),
                });
            }
            if !term.weight.is_finite() {
                return Err(invalid(format!("non-finite weight in equation for `{}`", eq.target)));
            }
            let source = match (term.kind, term.code) {
                (TermKind::Code, None) => TermSource::Code,
                (TermKind::Indicator, Some(code)) => {
                    let c = &concepts[p];
                    if code < 0 || code as usize >= c.cardinality() {
                        return Err(Error::CodeOutOfRange {
                            concept: c.name.clone(),
                            code,
                        });
                    }
                    TermSource::Indicator(code as u32)
                }
                (TermKind::Code, Some(_)) => {
                    return Err(invalid(format!(
                        "code term on `{}` must not carry a code",
                        term.parent
                    )))
                }
                (TermKind::Indicator, None) => {
                    return Err(invalid(format!(
                        "indicator term on `{}` needs a code",
                        term.parent
                    )))
                }
            };
            covered.insert(p);
            terms.push(Term {
                parent: p,
                source,
                weight: term.weight,
            });
        }
        if let Some(&missing) = parents[t].iter().find(|p| !covered.contains(p)) {
            return Err(Error::EquationParentMismatch {
                target: eq.target.clone(),
                detail: format!("parent `{}` has no term", concepts[missing].name),
            });
        }
        if parents[t].is_empty() {
            return Err(invalid(format!(
                "root concept `{}` needs a prior, not an equation",
                eq.target
            )));
        }
        let card = concepts[t].cardinality() as i64;
        let [lo, hi] = eq.clamp;
        if lo > hi || lo < 0 || hi >= card {
            return Err(invalid(format!(
                "clamp [{lo}, {hi}] of `{}` is outside its code range",
                eq.target
            )));
        }
        if !(eq.noise.std >= 0.0 && eq.noise.std.is_finite() && eq.noise.mean.is_finite()) {
            return Err(invalid(format!("bad noise parameters for `{}`", eq.target)));
        }
        if !eq.intercept.is_finite() {
            return Err(invalid(format!("non-finite intercept for `{}`", eq.target)));
        }
        if mechanisms[t].is_some() {
            return Err(invalid(format!("`{}` has two mechanisms", eq.target)));
        }
        mechanisms[t] = Some(Mechanism::Equation(Equation {
            terms,
            intercept: eq.intercept,
            noise_mean: eq.noise.mean,
            noise_std: eq.noise.std,
            clamp_lo: lo as u32,
            clamp_hi: hi as u32,
        }));
    }

    let mechanisms = mechanisms
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                invalid(format!(
                    "concept `{}` has neither a prior nor an equation",
                    concepts[i].name
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let digest = json_digest(&spec);
    Ok(ScmGraph {
        spec,
        concepts,
        index,
        parents,
        children,
        mechanisms,
        topo,
        outcome,
        digest,
    })
}

/// Kahn's algorithm; among ready nodes the earliest declared goes first.
/// On a cycle, returns the index of a node that could not be ordered.
fn topological_order(
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> std::result::Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &c in &children[next] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&i| indegree[i] > 0).unwrap())
    }
}
