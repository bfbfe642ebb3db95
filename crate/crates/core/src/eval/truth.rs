//! Monte-Carlo effect of a concept on the outcome, straight from the SCM.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scm::ScmGraph;

const CHUNK: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectDefinition {
    /// Mean over individuals and their applicable changes `c -> c'` of
    /// `sum_y |1{Y_cf = y} - 1{Y = y}|` (0 or 2).
    #[default]
    Individual,
    /// Mean over ordered value pairs of `sum_y |P(Y | do c') - P(Y | do c)|`.
    Population,
}

impl FromStr for EffectDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "individual" => Ok(EffectDefinition::Individual),
            "population" => Ok(EffectDefinition::Population),
            other => Err(Error::Config(format!("unknown effect definition `{other}`"))),
        }
    }
}

/// Integer tallies, so the reduction does not depend on scheduling.
#[derive(Default)]
struct Tally {
    flips: u64,
    terms: u64,
    /// `do_counts[c][y]`: individuals with outcome `y` under `do(concept = c)`.
    do_counts: Vec<Vec<u64>>,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.flips += o.flips;
        self.terms += o.terms;
        if self.do_counts.is_empty() {
            self.do_counts = o.do_counts;
        } else {
            for (a, b) in self.do_counts.iter_mut().zip(o.do_counts) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        }
        self
    }
}

/// Estimates the effect of `concept` on the outcome over `n` sampled
/// exogenous records. Sample `i` always uses the same seed, so the result is
/// independent of the worker count.
pub fn true_effect_mc(
    graph: &ScmGraph,
    concept: &str,
    n: u64,
    seed: u64,
    definition: EffectDefinition,
) -> Result<f64> {
    let target = graph.index_of(concept)?;
    let outcome = graph.outcome_index();
    if target == outcome || graph.ancestor_indices(target).contains(&outcome) {
        return Err(Error::NotIdentifiable(concept.to_string()));
    }
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let card = graph.concept(target).cardinality();
    let n_y = graph.outcome().cardinality();
    let base = rng::derive_seed(seed, &["true_effect", concept]);
    let chunks = n.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut t = Tally {
                do_counts: vec![vec![0; n_y]; card],
                ..Tally::default()
            };
            let mut noise = vec![0.0; graph.len()];
            let mut forced = vec![None; graph.len()];
            let mut codes = vec![0u32; graph.len()];
            for i in chunk * CHUNK..((chunk + 1) * CHUNK).min(n) {
                graph.sample_noise_into(base.wrapping_add(i), &mut noise);
                forced[target] = None;
                graph.evaluate_codes(&noise, &forced, &mut codes);
                let (factual, y) = (codes[target], codes[outcome]);
                for c in 0..card as u32 {
                    let y_c = if c == factual {
                        y
                    } else {
                        forced[target] = Some(c);
                        graph.evaluate_codes(&noise, &forced, &mut codes);
                        codes[outcome]
                    };
                    t.do_counts[c as usize][y_c as usize] += 1;
                    if c != factual {
                        t.terms += 1;
                        t.flips += (y_c != y) as u64;
                    }
                }
            }
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(match definition {
        EffectDefinition::Individual => 2.0 * tally.flips as f64 / tally.terms as f64,
        EffectDefinition::Population => {
            let p: Vec<Vec<f64>> = tally
                .do_counts
                .iter()
                .map(|row| row.iter().map(|&k| k as f64 / n as f64).collect())
                .collect();
            let mut sum = 0.0;
            for a in 0..card {
                for b in 0..card {
                    if a != b {
                        sum += p[a].iter().zip(&p[b]).map(|(x, y)| (x - y).abs()).sum::<f64>();
                    }
                }
            }
            sum / (card * (card - 1)) as f64
        }
    })
}

/// Effects for every non-outcome concept in declaration order; `None` where
/// the effect is not identifiable.
pub fn true_effects_table(
    graph: &ScmGraph,
    n: u64,
    seed: u64,
    definition: EffectDefinition,
) -> Result<Vec<(String, Option<f64>)>> {
    graph
        .concepts()
        .iter()
        .filter(|c| !c.is_outcome())
        .map(|c| match true_effect_mc(graph, &c.name, n, seed, definition) {
            Ok(v) => Ok((c.name.clone(), Some(v))),
            Err(Error::NotIdentifiable(_)) => Ok((c.name.clone(), None)),
            Err(e) => Err(e),
        })
        .collect()
}
