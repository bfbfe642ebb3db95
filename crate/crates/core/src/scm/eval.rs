use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;

use super::graph::{Mechanism, ScmGraph, TermSource};
use super::{ConceptAssignment, ConceptChange, ExogenousRecord};
use crate::error::{Error, Result};
use crate::rng::{self, STREAM_GROUNDING, STREAM_NOISE};

/// Rounding used by every structural equation: halves go away from zero.
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Identifiers of the grounding assets an exogenous record may reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingIds {
    personas: Vec<String>,
    templates: Vec<String>,
}

impl GroundingIds {
    pub fn new(personas: Vec<String>, templates: Vec<String>) -> Result<Self> {
        if personas.is_empty() {
            return Err(Error::EmptyPool("persona"));
        }
        if templates.is_empty() {
            return Err(Error::EmptyPool("template"));
        }
        Ok(GroundingIds {
            personas,
            templates,
        })
    }

    /// A single persona and template, for tests and analytic runs.
    pub fn single(persona: &str, template: &str) -> Self {
        GroundingIds {
            personas: vec![persona.to_string()],
            templates: vec![template.to_string()],
        }
    }

    pub fn personas(&self) -> &[String] {
        &self.personas
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    /// Uniform, independent persona and template indices from the grounding stream.
    pub fn draw(&self, seed: u64) -> (usize, usize) {
        let mut rng = rng::stream(seed, STREAM_GROUNDING);
        let p = rng::uniform_index(&mut rng, self.personas.len());
        let t = rng::uniform_index(&mut rng, self.templates.len());
        (p, t)
    }
}

impl ScmGraph {
    /// Fills `out` (indexed by concept) with the exogenous draws for `seed`.
    pub fn sample_noise_into(&self, seed: u64, out: &mut [f64]) {
        let mut rng = rng::stream(seed, STREAM_NOISE);
        for &i in self.topo_order() {
            out[i] = match self.mechanism(i) {
                Mechanism::Prior { .. } => rng.random::<f64>(),
                Mechanism::Equation(eq) => {
                    let z: f64 = rng.sample(StandardNormal);
                    eq.noise_mean + eq.noise_std * z
                }
            };
        }
    }

    /// Exogenous noise of a record, indexed by concept.
    pub fn noise_vector(&self, exo: &ExogenousRecord) -> Result<Vec<f64>> {
        self.concepts()
            .iter()
            .map(|c| {
                exo.noise
                    .get(&c.name)
                    .copied()
                    .ok_or_else(|| Error::IncompleteExogenous(c.name.clone()))
            })
            .collect()
    }

    /// Evaluates all concepts in topological order. `forced[i] = Some(code)`
    /// applies `do(concept_i = code)`. Codes are assumed valid.
    pub fn evaluate_codes(&self, noise: &[f64], forced: &[Option<u32>], out: &mut [u32]) {
        for &i in self.topo_order() {
            if let Some(code) = forced[i] {
                out[i] = code;
                continue;
            }
            out[i] = match self.mechanism(i) {
                Mechanism::Prior { cdf, .. } => {
                    let u = noise[i];
                    cdf.iter()
                        .position(|&c| u < c)
                        .unwrap_or(cdf.len() - 1) as u32
                }
                Mechanism::Equation(eq) => {
                    let mut acc = 0.0;
                    for term in &eq.terms {
                        let x = out[term.parent];
                        let v = match term.source {
                            TermSource::Code => x as f64,
                            TermSource::Indicator(k) => {
                                if x == k {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        };
                        acc += term.weight * v;
                    }
                    let raw = round_half_away(acc + eq.intercept + noise[i]);
                    raw.clamp(eq.clamp_lo as f64, eq.clamp_hi as f64) as u32
                }
            };
        }
    }

    fn forced_vector(&self, interventions: &BTreeMap<String, u32>) -> Result<Vec<Option<u32>>> {
        let mut forced = vec![None; self.len()];
        for (name, &code) in interventions {
            let idx = self.index_of(name)?;
            forced[idx] = Some(self.check_code(idx, code as i64)?);
        }
        Ok(forced)
    }
}

/// Draws a full exogenous record. Deterministic in `(graph, seed, grounding)`.
pub fn sample_exogenous(graph: &ScmGraph, seed: u64, grounding: &GroundingIds) -> ExogenousRecord {
    let mut noise = vec![0.0; graph.len()];
    graph.sample_noise_into(seed, &mut noise);
    let (p, t) = grounding.draw(seed);
    ExogenousRecord {
        seed,
        noise: graph
            .concepts()
            .iter()
            .zip(noise)
            .map(|(c, v)| (c.name.clone(), v))
            .collect(),
        persona_id: grounding.personas[p].clone(),
        template_id: grounding.templates[t].clone(),
    }
}

/// Evaluates the model on one exogenous record under the given interventions.
pub fn evaluate(
    graph: &ScmGraph,
    exo: &ExogenousRecord,
    interventions: &BTreeMap<String, u32>,
) -> Result<ConceptAssignment> {
    let forced = graph.forced_vector(interventions)?;
    let noise = graph.noise_vector(exo)?;
    let mut codes = vec![0u32; graph.len()];
    graph.evaluate_codes(&noise, &forced, &mut codes);
    let mut out = ConceptAssignment::from_codes(graph, &codes);
    out.interventions = interventions.keys().cloned().collect::<BTreeSet<_>>();
    Ok(out)
}

/// `evaluate` with a single intervention `do(concept = code)`.
pub fn intervene(
    graph: &ScmGraph,
    exo: &ExogenousRecord,
    concept: &str,
    code: u32,
) -> Result<ConceptAssignment> {
    evaluate(graph, exo, &BTreeMap::from([(concept.to_string(), code)]))
}

/// Structural counterfactual: abduction is the stored record, action is
/// `do(change.concept = change.to)`, prediction re-evaluates the model.
pub fn counterfactual_assignment(
    graph: &ScmGraph,
    exo: &ExogenousRecord,
    change: &ConceptChange,
) -> Result<ConceptAssignment> {
    let idx = graph.index_of(&change.concept)?;
    graph.check_code(idx, change.from as i64)?;
    graph.check_code(idx, change.to as i64)?;
    let factual = evaluate(graph, exo, &BTreeMap::new())?;
    let actual = factual.values[&change.concept];
    if actual != change.from {
        return Err(Error::FactualMismatch {
            concept: change.concept.clone(),
            expected: change.from,
            actual,
        });
    }
    if change.to == actual {
        return Ok(factual);
    }
    intervene(graph, exo, &change.concept, change.to)
}

/// A uniform draw that the root concept's prior maps to `code` (the middle
/// of the code's CDF interval).
pub fn root_draw_for_code(graph: &ScmGraph, concept: &str, code: u32) -> Result<f64> {
    let idx = graph.index_of(concept)?;
    graph.check_code(idx, code as i64)?;
    match graph.mechanism(idx) {
        Mechanism::Prior { cdf, .. } => {
            let lo = if code == 0 { 0.0 } else { cdf[code as usize - 1] };
            Ok((lo + cdf[code as usize]) / 2.0)
        }
        Mechanism::Equation(_) => Err(Error::InvalidChange(format!(
            "`{concept}` is not a root concept"
        ))),
    }
}
