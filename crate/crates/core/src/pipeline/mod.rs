//! Dataset generation: four splits of factual examples plus an interventional
//! set of counterfactual pairs, persisted as JSONL with a manifest.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_dataset, write_dataset, DATASET_FILE, MANIFEST_FILE, PAIRS_FILE};

use crate::dgp::DgpBundle;
use crate::digest::json_digest;
use crate::error::{Error, Result};
use crate::render::{RenderedText, Renderer};
use crate::rng::{self, PRNG_ID};
use crate::scm::{
    counterfactual_assignment, evaluate, intervene, sample_exogenous, ConceptAssignment,
    ConceptChange, ExogenousRecord,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Indices inside one split stay below this, keeping split seed ranges apart.
const SPLIT_STRIDE: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    ModelTrain,
    ModelTest,
    MethodTrain,
    Interventional,
}

impl Split {
    pub const ALL: [Split; 4] = [
        Split::ModelTrain,
        Split::ModelTest,
        Split::MethodTrain,
        Split::Interventional,
    ];

    fn tag(self) -> u64 {
        self as u64
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::ModelTrain => "model_train",
            Split::ModelTest => "model_test",
            Split::MethodTrain => "method_train",
            Split::Interventional => "interventional",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sizes {
    pub model_train: usize,
    pub model_test: usize,
    pub method_train: usize,
    pub interventional: usize,
}

impl Sizes {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::ModelTrain => self.model_train,
            Split::ModelTest => self.model_test,
            Split::MethodTrain => self.method_train,
            Split::Interventional => self.interventional,
        }
    }

    pub fn total(&self) -> usize {
        Split::ALL.iter().map(|&s| self.get(s)).sum()
    }
}

/// `model_train,model_test,method_train,interventional`
impl FromStr for Sizes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("sizes `{s}`: {e}")))?;
        let [model_train, model_test, method_train, interventional] = parts[..] else {
            return Err(Error::Config(format!(
                "sizes `{s}`: expected four comma-separated counts"
            )));
        };
        Ok(Sizes {
            model_train,
            model_test,
            method_train,
            interventional,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub split: Split,
    /// Position across all splits, in split order.
    pub index: u64,
    pub assignment: ConceptAssignment,
    pub exo: ExogenousRecord,
    pub text: RenderedText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionalPair {
    pub base_id: String,
    pub change: ConceptChange,
    pub cf_assignment: ConceptAssignment,
    pub cf_text: RenderedText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub dataset: String,
    pub graph_digest: String,
    pub renderer_id: String,
    pub prompt_version: String,
    pub prng_id: String,
    pub seed: u64,
    pub sizes: Sizes,
    pub changes_seed: Option<u64>,
    pub changes_per_example: Option<usize>,
    /// Interventional examples with fewer applicable changes than requested.
    pub insufficient_changes: usize,
    pub n_examples: usize,
    pub n_pairs: usize,
    /// Distinct interventional examples that carry at least one pair.
    pub n_pair_bases: usize,
    /// Digests of the data files; filled in by [`write_dataset`].
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub examples: Vec<Example>,
    pub pairs: Vec<InterventionalPair>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn example(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }

    pub fn example_index(&self) -> BTreeMap<&str, &Example> {
        self.examples.iter().map(|e| (e.id.as_str(), e)).collect()
    }

    /// D_{->c}: example ids carrying a pair for each change.
    pub fn change_sets(&self) -> BTreeMap<ConceptChange, BTreeSet<String>> {
        let mut out: BTreeMap<ConceptChange, BTreeSet<String>> = BTreeMap::new();
        for p in &self.pairs {
            out.entry(p.change.clone()).or_default().insert(p.base_id.clone());
        }
        out
    }

    /// `|D_c1 ∩ D_c2|` for every ordered pair of distinct changes.
    pub fn intersection_counts(&self) -> BTreeMap<(ConceptChange, ConceptChange), usize> {
        let sets = self.change_sets();
        let mut out = BTreeMap::new();
        for (a, sa) in &sets {
            for (b, sb) in &sets {
                if a != b {
                    out.insert((a.clone(), b.clone()), sa.intersection(sb).count());
                }
            }
        }
        out
    }
}

/// Runs `f` on a rayon pool of `jobs` threads (0 = rayon's default).
pub fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Exogenous seed of the `index`-th example of a split. Each split owns a
/// disjoint window of 2^40 consecutive seeds.
pub fn example_seed(dataset: &str, seed: u64, split: Split, index: u64) -> u64 {
    let base = rng::derive_seed(seed, &["examples", dataset]);
    base.wrapping_add(split.tag() * SPLIT_STRIDE + index)
}

pub fn example_id(dataset: &str, seed: u64, global_index: u64) -> String {
    json_digest(&(dataset, seed, global_index))[..20].to_string()
}

fn render_assignment(
    bundle: &DgpBundle,
    renderer: &dyn Renderer,
    assignment: &ConceptAssignment,
    exo: &ExogenousRecord,
) -> Result<RenderedText> {
    let persona = bundle.persona(&exo.persona_id)?;
    let template = bundle.template(&exo.template_id)?;
    renderer.render(bundle, assignment, persona, template)
}

/// Samples, evaluates and renders every split. Output is ordered by index
/// whatever the number of workers.
pub fn generate_dataset(
    bundle: &DgpBundle,
    renderer: &dyn Renderer,
    sizes: Sizes,
    seed: u64,
    jobs: usize,
) -> Result<Dataset> {
    let name = bundle.name.as_str();
    let grounding = bundle.grounding_ids()?;
    let mut jobs_list = Vec::with_capacity(sizes.total());
    let mut global = 0u64;
    for split in Split::ALL {
        for i in 0..sizes.get(split) as u64 {
            jobs_list.push((split, i, global));
            global += 1;
        }
    }
    let examples = run_in_pool(jobs, || {
        jobs_list
            .par_iter()
            .map(|&(split, i, global)| {
                let id = example_id(name, seed, global);
                let exo = sample_exogenous(&bundle.graph, example_seed(name, seed, split, i), &grounding);
                let assignment = evaluate(&bundle.graph, &exo, &BTreeMap::new())
                    .map_err(|e| e.with_example(&id))?;
                let text = render_assignment(bundle, renderer, &assignment, &exo)
                    .map_err(|e| e.with_example(&id))?;
                Ok(Example {
                    id,
                    split,
                    index: global,
                    assignment,
                    exo,
                    text,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let n_examples = examples.len();
    Ok(Dataset {
        manifest: Manifest {
            schema_version: SCHEMA_VERSION,
            dataset: name.to_string(),
            graph_digest: bundle.graph.digest().to_string(),
            renderer_id: renderer.id(),
            prompt_version: renderer.prompt_version(bundle),
            prng_id: PRNG_ID.to_string(),
            seed,
            sizes,
            changes_seed: None,
            changes_per_example: None,
            insufficient_changes: 0,
            n_examples,
            n_pairs: 0,
            n_pair_bases: 0,
            files: BTreeMap::new(),
        },
        examples,
        pairs: Vec::new(),
    })
}

/// Uniform sample of `n` distinct changes whose from-code equals the factual
/// value. Returns all applicable changes when fewer than `n` exist.
pub fn sample_changes(
    bundle: &DgpBundle,
    example: &Example,
    n: usize,
    seed: u64,
) -> (Vec<ConceptChange>, bool) {
    let mut pool: Vec<ConceptChange> = bundle
        .graph
        .default_changes()
        .into_iter()
        .filter(|c| example.assignment.get(&c.concept) == Some(c.from))
        .collect();
    if pool.len() <= n {
        pool.sort();
        let short = pool.len() < n;
        return (pool, short);
    }
    let mut rng = rng::stream(rng::derive_seed(seed, &["changes", &example.id]), 0);
    for i in 0..n {
        let j = i + rng::uniform_index(&mut rng, pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(n);
    pool.sort();
    (pool, false)
}

/// Adds `n` counterfactual pairs to every interventional example.
pub fn attach_counterfactuals(
    bundle: &DgpBundle,
    renderer: &dyn Renderer,
    dataset: &mut Dataset,
    n: usize,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let bases: Vec<&Example> = dataset.split(Split::Interventional).collect();
    if bases.is_empty() && dataset.manifest.sizes.interventional > 0 {
        return Err(Error::Config("interventional split is empty".into()));
    }
    let per_example = run_in_pool(jobs, || {
        bases
            .par_iter()
            .map(|ex| {
                let (changes, short) = sample_changes(bundle, ex, n, seed);
                let pairs = changes
                    .into_iter()
                    .map(|change| {
                        let cf_assignment = counterfactual_assignment(&bundle.graph, &ex.exo, &change)?;
                        let cf_text = render_assignment(bundle, renderer, &cf_assignment, &ex.exo)?;
                        Ok(InterventionalPair {
                            base_id: ex.id.clone(),
                            change,
                            cf_assignment,
                            cf_text,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| e.with_example(&ex.id))?;
                Ok((pairs, short))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut short = 0;
    let mut pairs = Vec::new();
    let mut bases_with_pairs = 0;
    for (p, s) in per_example {
        short += s as usize;
        bases_with_pairs += !p.is_empty() as usize;
        pairs.extend(p);
    }
    if short > 0 {
        log::warn!("{short} interventional examples had fewer than {n} applicable changes; took all");
    }
    dataset.pairs = pairs;
    let m = &mut dataset.manifest;
    m.changes_seed = Some(seed);
    m.changes_per_example = Some(n);
    m.insufficient_changes = short;
    m.n_pairs = dataset.pairs.len();
    m.n_pair_bases = bases_with_pairs;
    Ok(())
}

/// A base example rendered under `do(concept = code)`, used for CaCE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointText {
    pub base_id: String,
    pub concept: String,
    pub code: u32,
    pub assignment: ConceptAssignment,
    pub text: RenderedText,
}

/// Renders every base example under an intervention to each listed code.
pub fn render_endpoints(
    bundle: &DgpBundle,
    renderer: &dyn Renderer,
    bases: &[&Example],
    concept: &str,
    codes: &[u32],
    jobs: usize,
) -> Result<Vec<EndpointText>> {
    let work: Vec<(&Example, u32)> = bases
        .iter()
        .flat_map(|ex| codes.iter().map(move |&c| (*ex, c)))
        .collect();
    run_in_pool(jobs, || {
        work.par_iter()
            .map(|&(ex, code)| {
                let assignment = intervene(&bundle.graph, &ex.exo, concept, code)
                    .map_err(|e| e.with_example(&ex.id))?;
                let text = render_assignment(bundle, renderer, &assignment, &ex.exo)
                    .map_err(|e| e.with_example(&ex.id))?;
                Ok(EndpointText {
                    base_id: ex.id.clone(),
                    concept: concept.to_string(),
                    code,
                    assignment,
                    text,
                })
            })
            .collect()
    })?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::load_builtin;
    use crate::render::DeterministicRenderer;

    fn sizes(a: usize, b: usize, c: usize, d: usize) -> Sizes {
        Sizes {
            model_train: a,
            model_test: b,
            method_train: c,
            interventional: d,
        }
    }

    #[test]
    fn sizes_parse() {
        assert_eq!("1500,300,500,400".parse::<Sizes>().unwrap(), sizes(1500, 300, 500, 400));
        assert!("1,2,3".parse::<Sizes>().is_err());
        assert!("1,2,x,4".parse::<Sizes>().is_err());
    }

    #[test]
    fn counts_and_stable_ids() {
        let b = load_builtin("violence").unwrap();
        let a = generate_dataset(&b, &DeterministicRenderer, sizes(15, 3, 5, 4), 11, 2).unwrap();
        let c = generate_dataset(&b, &DeterministicRenderer, sizes(15, 3, 5, 4), 11, 1).unwrap();
        assert_eq!(a.examples.len(), 27);
        assert_eq!(a, c);
        let ids: BTreeSet<_> = a.examples.iter().map(|e| &e.id).collect();
        assert_eq!(ids.len(), 27);
    }

    #[test]
    fn empty_sizes_give_empty_dataset() {
        let b = load_builtin("cv").unwrap();
        let d = generate_dataset(&b, &DeterministicRenderer, Sizes::default(), 1, 1).unwrap();
        assert!(d.examples.is_empty());
        assert_eq!(d.manifest.n_examples, 0);
    }

    #[test]
    fn split_seeds_are_disjoint() {
        let mut seen = BTreeSet::new();
        for split in Split::ALL {
            for i in 0..200 {
                assert!(seen.insert(example_seed("violence", 3, split, i)));
            }
        }
    }

    #[test]
    fn sampled_changes_respect_factual_values() {
        let b = load_builtin("disease").unwrap();
        let mut d = generate_dataset(&b, &DeterministicRenderer, sizes(0, 0, 0, 20), 5, 1).unwrap();
        attach_counterfactuals(&b, &DeterministicRenderer, &mut d, 3, 9, 1).unwrap();
        let idx = d.example_index();
        for p in &d.pairs {
            let base = idx[p.base_id.as_str()];
            assert_eq!(base.assignment.get(&p.change.concept), Some(p.change.from));
            assert_ne!(p.change.from, p.change.to);
        }
        let per_base: BTreeMap<_, BTreeSet<_>> = d.pairs.iter().fold(BTreeMap::new(), |mut m, p| {
            m.entry(&p.base_id).or_default().insert((&p.change.concept, p.change.to));
            m
        });
        assert!(per_base.values().all(|s| s.len() == 3));
        let mut again = d.clone();
        attach_counterfactuals(&b, &DeterministicRenderer, &mut again, 3, 9, 4).unwrap();
        assert_eq!(again.pairs, d.pairs);
    }

    #[test]
    fn binary_concept_at_one_only_changes_down() {
        let b = load_builtin("violence").unwrap();
        let d = generate_dataset(&b, &DeterministicRenderer, sizes(0, 0, 0, 40), 2, 1).unwrap();
        let ex = d.examples.iter().find(|e| e.assignment.get("gender") == Some(1)).unwrap();
        let (all, _) = sample_changes(&b, ex, usize::MAX, 0);
        let gender: Vec<_> = all.iter().filter(|c| c.concept == "gender").collect();
        assert_eq!(gender.len(), 1);
        assert_eq!((gender[0].from, gender[0].to), (1, 0));
    }

    #[test]
    fn too_few_changes_takes_all() {
        let b = load_builtin("violence").unwrap();
        let mut d = generate_dataset(&b, &DeterministicRenderer, sizes(0, 0, 0, 3), 2, 1).unwrap();
        attach_counterfactuals(&b, &DeterministicRenderer, &mut d, 1000, 1, 1).unwrap();
        assert_eq!(d.manifest.insufficient_changes, 3);
        assert_eq!(d.manifest.n_pair_bases, 3);
    }

    #[test]
    fn intersections_match_brute_force() {
        let b = load_builtin("cv").unwrap();
        let mut d = generate_dataset(&b, &DeterministicRenderer, sizes(0, 0, 0, 60), 8, 2).unwrap();
        attach_counterfactuals(&b, &DeterministicRenderer, &mut d, 3, 8, 2).unwrap();
        for ((c1, c2), n) in d.intersection_counts() {
            let brute = d
                .examples
                .iter()
                .filter(|e| {
                    let has = |c: &ConceptChange| d.pairs.iter().any(|p| p.base_id == e.id && &p.change == c);
                    has(&c1) && has(&c2)
                })
                .count();
            assert_eq!(n, brute, "{c1} / {c2}");
        }
    }
}
