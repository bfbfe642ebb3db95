//! Pipeline stages. Every stage reads its inputs from files under the run
//! directory and writes its outputs back there:
//!
//! ```text
//! <dir>/data/           dataset.jsonl, pairs.jsonl, manifest.json
//! <dir>/predictions/    items.jsonl, manifest.json
//! <dir>/explanations/   <method>.jsonl
//! <dir>/truth/          true_effects.json
//! <dir>/report/         local.csv, global.csv, sensitivity.csv, true_effects.csv, manifest.json
//! <dir>/runs/           one run.json per stage invocation
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use concept_bench::adapters::ExplainedModel;
use concept_bench::dgp::{load_builtin, load_with_assets, DgpBundle};
use concept_bench::digest::sha256_hex;
use concept_bench::eval::{
    aggregate_local, explanation_table, global_importance, global_of, icace, mean_per_change,
    sensitivity, true_effects_table, write_report, EffectDefinition, EffectTable,
    EvaluationReport, GlobalRow, LocalRow, SensitivityRow, TrueEffectRow,
};
use concept_bench::explain::{
    read_explanations, write_explanations, CandidatePool, CfGenerator, ChatEditor, Explainer,
    Item, Method, StructuralEditor, TextEditor,
};
use concept_bench::pipeline::{
    attach_counterfactuals, generate_dataset, read_dataset, run_in_pool, write_dataset, Dataset,
    Split,
};
use concept_bench::render::{write_atomic, DeterministicRenderer, LlmRenderer, Renderer};
use concept_bench::scm::ConceptChange;
use concept_bench::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    build_embedder, build_model, build_predictor, AdapterSpec, EditorChoice, RendererChoice,
    RunConfig,
};

pub const DATA_DIR: &str = "data";
pub const PREDICTIONS_DIR: &str = "predictions";
pub const EXPLANATIONS_DIR: &str = "explanations";
pub const TRUTH_DIR: &str = "truth";
pub const REPORT_DIR: &str = "report";
const ITEMS_FILE: &str = "items.jsonl";
const TRUTH_FILE: &str = "true_effects.json";

/// Id of the item holding a pair's counterfactual text.
pub fn cf_item_id(base_id: &str, change: &ConceptChange) -> String {
    format!("{base_id}/{change}")
}

/// File name for one method's explanations.
pub fn explanation_file(method_id: &str) -> String {
    format!("{}.jsonl", method_id.replace(':', "-"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn record_run(cfg: &RunConfig, name: &str) -> Result<()> {
    write_json(&cfg.dir.join("runs").join(format!("{name}.json")), cfg)
}

fn dataset_name(cfg: &RunConfig) -> Result<&str> {
    cfg.dataset
        .as_deref()
        .ok_or_else(|| Error::Config(format!("`{}` needs --dataset", cfg.command)))
}

fn load_bundle(cfg: &RunConfig, name: &str, require_pools: bool) -> Result<DgpBundle> {
    match &cfg.assets {
        Some(root) => load_with_assets(name, root, require_pools),
        None if require_pools => Err(Error::MalformedAssetFile {
            path: PathBuf::from("<assets>"),
            reason: "the llm renderer needs --assets with persona and template pools".into(),
        }),
        None => load_builtin(name),
    }
}

/// Samples, renders and writes a dataset with its interventional pairs.
pub fn cmd_generate(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let name = dataset_name(cfg)?;
    let sizes = cfg.sizes.expect("validated");
    let bundle = load_bundle(cfg, name, cfg.renderer == RendererChoice::Llm)?;
    let renderer: Box<dyn Renderer> = match cfg.renderer {
        RendererChoice::Deterministic => Box::new(DeterministicRenderer),
        RendererChoice::Llm => {
            let llm = cfg.llm.as_ref().expect("validated");
            Box::new(LlmRenderer::new(
                cfg.chat_backend()?,
                &cfg.cache.join("render"),
                llm.temperature,
            )?)
        }
    };
    log::info!("generating {} examples for {name}", sizes.total());
    let mut dataset = generate_dataset(&bundle, renderer.as_ref(), sizes, cfg.seed, cfg.jobs)?;
    attach_counterfactuals(
        &bundle,
        renderer.as_ref(),
        &mut dataset,
        cfg.changes_per_example,
        cfg.seed,
        cfg.jobs,
    )?;
    let out = cfg.dir.join(DATA_DIR);
    let manifest = write_dataset(&out, &dataset)?;
    log::info!(
        "wrote {} examples and {} pairs to {}",
        manifest.n_examples,
        manifest.n_pairs,
        out.display()
    );
    record_run(cfg, "generate")?;
    Ok(out)
}

fn load_dataset(cfg: &RunConfig) -> Result<(DgpBundle, Dataset)> {
    let dir = cfg.dir.join(DATA_DIR);
    let dataset = read_dataset(&dir, None)?;
    let bundle = load_builtin(&dataset.manifest.dataset)?;
    if bundle.graph.digest() != dataset.manifest.graph_digest {
        return Err(Error::GraphDigestMismatch {
            found: dataset.manifest.graph_digest.clone(),
            expected: bundle.graph.digest().to_string(),
        });
    }
    Ok((bundle, dataset))
}

fn dataset_digest(dataset: &Dataset) -> String {
    dataset
        .manifest
        .files
        .get(concept_bench::pipeline::DATASET_FILE)
        .cloned()
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsManifest {
    pub dataset_digest: String,
    pub model_id: String,
    pub predictor_id: String,
    pub n_items: usize,
    pub items_sha256: String,
}

/// Prediction vectors and concept predictions for every example and every
/// counterfactual text.
pub fn cmd_predict(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let (bundle, dataset) = load_dataset(cfg)?;
    let graph = &bundle.graph;
    let model = build_model(cfg, cfg.model.as_ref().expect("validated"), graph)?;
    let predictor = build_predictor(cfg, cfg.concepts.as_ref().unwrap_or(&AdapterSpec::Gold), graph)?;

    let mut work: Vec<(String, &str, Option<&concept_bench::scm::ExogenousRecord>)> = dataset
        .examples
        .iter()
        .map(|e| (e.id.clone(), e.text.text.as_str(), Some(&e.exo)))
        .collect();
    work.extend(
        dataset
            .pairs
            .iter()
            .map(|p| (cf_item_id(&p.base_id, &p.change), p.cf_text.text.as_str(), None)),
    );
    if matches!(cfg.model, Some(AdapterSpec::Remote { .. })) {
        // one batched pass fills the response cache
        let texts: Vec<&str> = work.iter().map(|w| w.1).collect();
        run_in_pool(cfg.jobs, || model.predict_batch(&texts))??;
    }
    let items: Vec<Item> = run_in_pool(cfg.jobs, || {
        work.par_iter()
            .map(|(id, text, exo)| {
                let item = Item::build(graph, id, text, model.as_ref(), predictor.as_ref(), None)
                    .map_err(|e| e.with_example(id))?;
                Ok(match exo {
                    Some(x) => item.with_exo((*x).clone()),
                    None => item,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut bytes = Vec::new();
    for it in &items {
        serde_json::to_writer(&mut bytes, it)?;
        bytes.push(b'\n');
    }
    let out = cfg.dir.join(PREDICTIONS_DIR);
    ensure_dir(&out)?;
    write_atomic(&out.join(ITEMS_FILE), &bytes)?;
    write_json(
        &out.join("manifest.json"),
        &PredictionsManifest {
            dataset_digest: dataset_digest(&dataset),
            model_id: model.id(),
            predictor_id: predictor.id(),
            n_items: items.len(),
            items_sha256: sha256_hex(&bytes),
        },
    )?;
    record_run(cfg, "predict")?;
    Ok(out)
}

/// Predictions stage output, checked against its manifest and the dataset.
pub struct Predictions {
    pub manifest: PredictionsManifest,
    pub items: HashMap<String, Item>,
}

impl Predictions {
    pub fn get(&self, id: &str) -> Result<&Item> {
        self.items
            .get(id)
            .ok_or_else(|| Error::UnknownText(format!("no prediction for item {id}")))
    }
}

pub fn load_predictions(cfg: &RunConfig, dataset: &Dataset) -> Result<Predictions> {
    let dir = cfg.dir.join(PREDICTIONS_DIR);
    let manifest: PredictionsManifest = read_json(&dir.join("manifest.json"))?;
    let path = dir.join(ITEMS_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != manifest.items_sha256 || manifest.dataset_digest != dataset_digest(dataset) {
        return Err(Error::FileDigestMismatch(path));
    }
    let text = String::from_utf8_lossy(&bytes);
    let mut items = HashMap::with_capacity(manifest.n_items);
    for (i, line) in text.lines().enumerate() {
        let it: Item = serde_json::from_str(line).map_err(|e| Error::CorruptLine {
            path: path.clone(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        items.insert(it.id.clone(), it);
    }
    Ok(Predictions { manifest, items })
}

fn parse_method(cfg: &RunConfig, name: &str) -> Result<Method> {
    let m: Method = name.parse()?;
    Ok(match (m, &cfg.strategy) {
        (Method::CfGen(_), Some(s)) if name == "cfgen" => Method::CfGen(s.parse()?),
        _ => m,
    })
}

/// Explanations for every interventional pair with one method.
pub fn cmd_explain(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let method = parse_method(cfg, &cfg.methods[0])?;
    let (bundle, dataset) = load_dataset(cfg)?;
    let graph = &bundle.graph;
    let preds = load_predictions(cfg, &dataset)?;

    let mut pool_items: Vec<Item> = dataset
        .split(Split::MethodTrain)
        .map(|e| preds.get(&e.id).cloned())
        .collect::<Result<_>>()?;
    let mut bases: BTreeMap<&str, Item> = BTreeMap::new();
    for p in &dataset.pairs {
        if !bases.contains_key(p.base_id.as_str()) {
            bases.insert(&p.base_id, preds.get(&p.base_id)?.clone());
        }
    }
    if method.is_semantic() {
        let spec = cfg.embedder.as_ref().unwrap_or(&AdapterSpec::Markers);
        let embedder = build_embedder(cfg, spec, graph)?;
        let embed = |it: &mut Item| -> Result<()> {
            it.embedding = Some(embedder.embed(&it.text)?);
            Ok(())
        };
        run_in_pool(cfg.jobs, || {
            pool_items.par_iter_mut().try_for_each(embed)?;
            bases.par_iter_mut().try_for_each(|(_, it)| embed(it))
        })??;
    }
    let pool = CandidatePool::new(graph, pool_items);
    let queries: Vec<(&Item, ConceptChange)> = dataset
        .pairs
        .iter()
        .map(|p| (&bases[p.base_id.as_str()], p.change.clone()))
        .collect();

    let structural = StructuralEditor;
    let chat;
    let model: Box<dyn ExplainedModel>;
    let generator;
    let explainer = match method {
        Method::FtMatch | Method::PtMatch | Method::StMatch => Explainer::Semantic {
            method,
            pool: &pool,
            k: cfg.k,
        },
        Method::RandomMatch => Explainer::Random {
            pool: &pool,
            k: cfg.k,
            seed: cfg.seed,
        },
        Method::Approx => Explainer::Approx {
            pool: &pool,
            k: cfg.k,
            seed: cfg.seed,
        },
        Method::ConVecs => Explainer::ConVecs {
            pool: &pool,
            k: cfg.k,
            include_target: cfg.include_target,
        },
        Method::CfGen(strategy) => {
            let spec = cfg
                .model
                .as_ref()
                .ok_or_else(|| Error::Config("cfgen needs --model to score edited texts".into()))?;
            model = build_model(cfg, spec, graph)?;
            let editor: &dyn TextEditor = match cfg.editor {
                EditorChoice::Structural => &structural,
                EditorChoice::Llm => {
                    chat = ChatEditor::new(cfg.chat_backend()?);
                    &chat
                }
            };
            generator = CfGenerator::new(&bundle, editor, strategy, Some(&cfg.cache))?;
            Explainer::CfGen {
                generator: &generator,
                model: model.as_ref(),
            }
        }
    };
    let results = run_in_pool(cfg.jobs, || {
        queries
            .par_iter()
            .map(|(x, c)| match explainer.explain(x, c) {
                Ok(r) => Ok(Some(r)),
                Err(e) if no_candidates(&e) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::warn!(
            "{}: {skipped} of {} pairs have no eligible candidate and are left unexplained",
            explainer.method_id(),
            queries.len()
        );
    }
    let rows: Vec<_> = results.into_iter().flatten().collect();
    let path = cfg
        .dir
        .join(EXPLANATIONS_DIR)
        .join(explanation_file(&explainer.method_id()));
    write_explanations(&path, &rows)?;
    record_run(cfg, &format!("explain-{}", explainer.method_id().replace(':', "-")))?;
    Ok(path)
}

fn no_candidates(e: &Error) -> bool {
    match e {
        Error::EmptyCandidateSet { .. } => true,
        Error::Example { source, .. } => no_candidates(source),
        _ => false,
    }
}

/// Reference ICaCEs from stored predictions.
pub fn reference_table(dataset: &Dataset, preds: &Predictions) -> Result<EffectTable> {
    dataset
        .pairs
        .iter()
        .map(|p| {
            let fx = &preds.get(&p.base_id)?.prediction;
            let fc = &preds.get(&cf_item_id(&p.base_id, &p.change))?.prediction;
            Ok(((p.base_id.clone(), p.change.clone()), icace(fx, fc)?))
        })
        .collect()
}

/// Local and global faithfulness per method, sensitivity per concept, and
/// any true effects computed earlier. Returns the report manifest digest.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let (bundle, dataset) = load_dataset(cfg)?;
    let graph = &bundle.graph;
    let preds = load_predictions(cfg, &dataset)?;
    let refs = reference_table(&dataset, &preds)?;
    let change_sets = dataset.change_sets();
    let name = dataset.manifest.dataset.clone();
    let model_id = preds.manifest.model_id.clone();

    let concepts: Vec<&str> = graph
        .concepts()
        .iter()
        .map(|c| c.name.as_str())
        .filter(|n| change_sets.keys().any(|c| c.concept == *n))
        .collect();
    let gold = if change_sets.is_empty() {
        BTreeMap::new()
    } else {
        global_importance(&concepts, &mean_per_change(&change_sets, &refs)?)?
    };

    let mut report = EvaluationReport::default();
    let mut method_ids = Vec::new();
    for m in &cfg.methods {
        let method_id = parse_method(cfg, m)?.id();
        let path = cfg.dir.join(EXPLANATIONS_DIR).join(explanation_file(&method_id));
        let table = explanation_table(&read_explanations(&path)?);
        // score each method on the pairs it explained
        let mut covered = change_sets.clone();
        let mut n_missing = 0;
        for (c, ids) in covered.iter_mut() {
            let before = ids.len();
            ids.retain(|id| table.contains_key(&(id.clone(), c.clone())));
            n_missing += before - ids.len();
        }
        covered.retain(|_, ids| !ids.is_empty());
        if covered.is_empty() {
            return Err(Error::Config(format!("{method_id} explained no pairs")));
        }
        let agg = aggregate_local(&covered, &refs, &table)?;
        report.local.push(LocalRow {
            dataset: name.clone(),
            model_id: model_id.clone(),
            method_id: method_id.clone(),
            ed: agg.ed_bar,
            ed_cosine: agg.ed_cosine,
            ed_l2: agg.ed_l2,
            ed_norm_diff: agg.ed_norm_diff,
            of: agg.of_bar,
            n_changes: agg.n_changes,
            of_pairs_nonempty: agg.of_pairs_nonempty,
            of_pairs_total: agg.of_pairs_total,
            sign_ties: agg.sign_ties,
            n_missing,
        });
        let method_concepts: Vec<&str> = concepts
            .iter()
            .copied()
            .filter(|n| covered.keys().any(|c| c.concept == *n))
            .collect();
        if method_concepts.len() < concepts.len() {
            return Err(Error::Config(format!(
                "{method_id} left every pair of some concept unexplained"
            )));
        }
        let scores = global_importance(&concepts, &mean_per_change(&covered, &table)?)?;
        let gof = if concepts.len() >= 2 {
            Some(global_of(&gold, &scores)?)
        } else {
            None
        };
        for c in &concepts {
            report.global.push(GlobalRow {
                dataset: name.clone(),
                model_id: model_id.clone(),
                method_id: method_id.clone(),
                concept: c.to_string(),
                importance: scores[*c],
                gold_importance: gold[*c],
                global_of: gof,
            });
        }
        method_ids.push(method_id);
    }

    for c in &concepts {
        let vals: Vec<&[f64]> = refs
            .iter()
            .filter(|((_, ch), _)| ch.concept == *c)
            .map(|(_, v)| v.as_slice())
            .collect();
        report.sensitivity.push(SensitivityRow {
            dataset: name.clone(),
            model_id: model_id.clone(),
            concept: c.to_string(),
            sensitivity: sensitivity(&vals)?,
            n_items: vals.len(),
        });
    }

    let truth = cfg.dir.join(TRUTH_DIR).join(TRUTH_FILE);
    if truth.exists() {
        let rows: Vec<TrueEffectRow> = read_json(&truth)?;
        report.true_effects = rows.into_iter().filter(|r| r.dataset == name).collect();
    }

    let p = &mut report.provenance;
    p.insert("dataset".into(), name);
    p.insert("dataset_digest".into(), dataset_digest(&dataset));
    p.insert("graph_digest".into(), dataset.manifest.graph_digest.clone());
    p.insert("renderer_id".into(), dataset.manifest.renderer_id.clone());
    p.insert("model_id".into(), model_id);
    p.insert("predictor_id".into(), preds.manifest.predictor_id.clone());
    p.insert("predictions_digest".into(), preds.manifest.items_sha256.clone());
    p.insert("methods".into(), method_ids.join(","));
    p.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());

    let digest = write_report(&cfg.dir.join(REPORT_DIR), &report)?;
    record_run(cfg, "evaluate")?;
    Ok(digest)
}

/// Monte-Carlo effect of every concept on the outcome.
pub fn cmd_true_effects(cfg: &RunConfig) -> Result<Vec<TrueEffectRow>> {
    cfg.validate()?;
    let name = dataset_name(cfg)?;
    let bundle = load_builtin(name)?;
    let definition: EffectDefinition = cfg.definition.parse()?;
    let table = run_in_pool(cfg.jobs, || {
        true_effects_table(&bundle.graph, cfg.samples, cfg.seed, definition)
    })??;
    let rows: Vec<TrueEffectRow> = table
        .into_iter()
        .map(|(concept, effect)| TrueEffectRow {
            dataset: name.to_string(),
            concept,
            definition: cfg.definition.clone(),
            samples: cfg.samples,
            seed: cfg.seed,
            effect,
        })
        .collect();
    // keep rows of other datasets already in the file
    let path = cfg.dir.join(TRUTH_DIR).join(TRUTH_FILE);
    let mut all: Vec<TrueEffectRow> = if path.exists() { read_json(&path)? } else { Vec::new() };
    all.retain(|r| r.dataset != name);
    all.extend(rows.iter().cloned());
    all.sort_by(|a, b| a.dataset.cmp(&b.dataset));
    write_json(&path, &all)?;
    record_run(cfg, &format!("true-effects-{name}"))?;
    Ok(rows)
}
