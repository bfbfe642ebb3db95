//! Built-in data-generating processes: graph, verbalizations, grounding pools
//! and prompt templates for the three benchmark datasets.
//!
//! Asset directory layout (every part optional; missing parts fall back to
//! the bundled defaults):
//!
//! ```text
//! <root>/<dataset>/graph.json
//! <root>/<dataset>/personas/*.txt
//! <root>/<dataset>/templates/*.txt
//! <root>/<dataset>/prompts/*.txt
//! ```

mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digest::json_digest;
use crate::error::{Error, Result};
use crate::scm::{GroundingIds, ScmGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Violence,
    Disease,
    Cv,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [DatasetName::Violence, DatasetName::Disease, DatasetName::Cv];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Violence => "violence",
            DatasetName::Disease => "disease",
            DatasetName::Cv => "cv",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "violence" => Ok(DatasetName::Violence),
            "disease" => Ok(DatasetName::Disease),
            "cv" => Ok(DatasetName::Cv),
            other => Err(Error::UnknownDataset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Persona,
    Template,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingAsset {
    pub id: String,
    pub kind: AssetKind,
    pub body: String,
    pub dataset: DatasetName,
}

/// Map `(concept, code) -> verbalization` and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Verbalizer {
    forward: BTreeMap<String, Vec<String>>,
}

impl Verbalizer {
    pub fn from_graph(graph: &ScmGraph) -> Self {
        Verbalizer {
            forward: graph
                .concepts()
                .iter()
                .map(|c| (c.name.clone(), c.values.clone()))
                .collect(),
        }
    }

    pub fn verbalize(&self, concept: &str, code: u32) -> Result<&str> {
        let values = self
            .forward
            .get(concept)
            .ok_or_else(|| Error::UnknownConcept(concept.to_string()))?;
        values
            .get(code as usize)
            .map(String::as_str)
            .ok_or_else(|| Error::CodeOutOfRange {
                concept: concept.to_string(),
                code: code as i64,
            })
    }

    pub fn parse(&self, concept: &str, text: &str) -> Option<u32> {
        self.forward
            .get(concept)?
            .iter()
            .position(|v| v == text)
            .map(|p| p as u32)
    }
}

pub const PROMPT_GENERATION_SYSTEM: &str = "generation_system";
pub const PROMPT_GENERATION_USER: &str = "generation_user";

/// Named prompt templates of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub prompts: BTreeMap<String, String>,
}

impl PromptSet {
    pub fn get(&self, name: &str) -> Result<&str> {
        self.prompts
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("prompt `{name}` is not defined")))
    }

    /// Digest of every template; part of every cache key built from them.
    pub fn version(&self) -> String {
        json_digest(&self.prompts)[..16].to_string()
    }
}

#[derive(Debug, Clone)]
pub struct DgpBundle {
    pub name: DatasetName,
    pub graph: ScmGraph,
    pub verbalizer: Verbalizer,
    pub personas: Vec<GroundingAsset>,
    pub templates: Vec<GroundingAsset>,
    pub prompts: PromptSet,
}

impl DgpBundle {
    pub fn grounding_ids(&self) -> Result<GroundingIds> {
        GroundingIds::new(
            self.personas.iter().map(|a| a.id.clone()).collect(),
            self.templates.iter().map(|a| a.id.clone()).collect(),
        )
    }

    pub fn persona(&self, id: &str) -> Result<&GroundingAsset> {
        self.personas
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::Config(format!("unknown persona `{id}`")))
    }

    pub fn template(&self, id: &str) -> Result<&GroundingAsset> {
        self.templates
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::Config(format!("unknown template `{id}`")))
    }

    /// Concepts verbalized in generation prompts, in declaration order. The
    /// disease label is the prediction target of an anti-causal task and is
    /// never written into the patient's post.
    pub fn prompt_concepts(&self) -> Vec<usize> {
        let outcome = self.graph.outcome_index();
        (0..self.graph.len())
            .filter(|&i| self.name != DatasetName::Disease || i != outcome)
            .collect()
    }
}

/// Uniform independent persona and template draws, matching the ids that
/// [`crate::scm::sample_exogenous`] records for the same seed.
pub fn sample_grounding(bundle: &DgpBundle, seed: u64) -> Result<(&GroundingAsset, &GroundingAsset)> {
    if bundle.personas.is_empty() {
        return Err(Error::EmptyPool("persona"));
    }
    if bundle.templates.is_empty() {
        return Err(Error::EmptyPool("template"));
    }
    let (p, t) = bundle.grounding_ids()?.draw(seed);
    Ok((&bundle.personas[p], &bundle.templates[t]))
}

fn builtin_graph_json(name: DatasetName) -> &'static str {
    match name {
        DatasetName::Violence => include_str!("../../assets/violence/graph.json"),
        DatasetName::Disease => include_str!("../../assets/disease/graph.json"),
        DatasetName::Cv => include_str!("../../assets/cv/graph.json"),
    }
}

macro_rules! prompt_files {
    ($ds:literal) => {
        [
            ("generation_system", include_str!(concat!("../../assets/", $ds, "/prompts/generation_system.txt"))),
            ("generation_user", include_str!(concat!("../../assets/", $ds, "/prompts/generation_user.txt"))),
            ("cf_only_change", include_str!(concat!("../../assets/", $ds, "/prompts/cf_only_change.txt"))),
            ("cf_fix_all", include_str!(concat!("../../assets/", $ds, "/prompts/cf_fix_all.txt"))),
            ("cf_fix_confounders", include_str!(concat!("../../assets/", $ds, "/prompts/cf_fix_confounders.txt"))),
            ("cf_mediators_confounders", include_str!(concat!("../../assets/", $ds, "/prompts/cf_mediators_confounders.txt"))),
        ]
    };
}

fn builtin_prompts(name: DatasetName) -> PromptSet {
    let files = match name {
        DatasetName::Violence => prompt_files!("violence"),
        DatasetName::Disease => prompt_files!("disease"),
        DatasetName::Cv => prompt_files!("cv"),
    };
    PromptSet {
        prompts: files
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    }
}

/// Loads the built-in bundle with bundled synthetic grounding pools.
pub fn load_builtin(name: &str) -> Result<DgpBundle> {
    let name: DatasetName = name.parse()?;
    let graph = ScmGraph::from_json(builtin_graph_json(name))?;
    let verbalizer = Verbalizer::from_graph(&graph);
    let (personas, templates) = synthetic::pools(name, &graph);
    Ok(DgpBundle {
        name,
        graph,
        verbalizer,
        personas,
        templates,
        prompts: builtin_prompts(name),
    })
}

/// Loads a bundle, overriding built-in parts with whatever exists under
/// `<root>/<name>/`. With `require_pools`, missing persona or template
/// directories are an error instead of falling back to synthetic pools.
pub fn load_with_assets(name: &str, root: &Path, require_pools: bool) -> Result<DgpBundle> {
    let mut bundle = load_builtin(name)?;
    let dir = root.join(bundle.name.as_str());
    if require_pools && !dir.is_dir() {
        return Err(Error::MalformedAssetFile {
            path: dir,
            reason: "asset directory is missing".into(),
        });
    }

    let graph_path = dir.join("graph.json");
    if graph_path.is_file() {
        let text = read_utf8(&graph_path)?;
        bundle.graph = ScmGraph::from_json(&text).map_err(|e| Error::MalformedAssetFile {
            path: graph_path.clone(),
            reason: e.to_string(),
        })?;
        bundle.verbalizer = Verbalizer::from_graph(&bundle.graph);
    }

    for (kind, sub) in [(AssetKind::Persona, "personas"), (AssetKind::Template, "templates")] {
        let pool = read_pool(&dir.join(sub), kind, bundle.name)?;
        if pool.is_empty() {
            if require_pools {
                return Err(Error::MalformedAssetFile {
                    path: dir.join(sub),
                    reason: "no asset files".into(),
                });
            }
            continue;
        }
        match kind {
            AssetKind::Persona => bundle.personas = pool,
            AssetKind::Template => bundle.templates = pool,
        }
    }

    let prompt_dir = dir.join("prompts");
    for (file, _) in list_txt(&prompt_dir)? {
        let stem = file.file_stem().unwrap().to_string_lossy().to_string();
        let body = read_utf8(&file)?;
        bundle.prompts.prompts.insert(stem, body);
    }
    Ok(bundle)
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|_| Error::MalformedAssetFile {
        path: path.to_path_buf(),
        reason: "not valid UTF-8".into(),
    })
}

fn list_txt(dir: &Path) -> Result<Vec<(PathBuf, String)>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            let stem = path.file_stem().unwrap().to_string_lossy().to_string();
            files.push((path, stem));
        }
    }
    files.sort();
    Ok(files)
}

fn read_pool(dir: &Path, kind: AssetKind, dataset: DatasetName) -> Result<Vec<GroundingAsset>> {
    list_txt(dir)?
        .into_iter()
        .map(|(path, id)| {
            let body = read_utf8(&path)?;
            let body = body.trim_end().to_string();
            if body.trim().is_empty() {
                return Err(Error::MalformedAssetFile {
                    path,
                    reason: "empty body".into(),
                });
            }
            Ok(GroundingAsset {
                id,
                kind,
                body,
                dataset,
            })
        })
        .collect()
}
