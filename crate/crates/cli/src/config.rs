//! Run configuration and adapter specs.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use concept_bench::adapters::{
    BagOfMarkers, ConceptPredictor, Embedder, ExplainedModel, FileConceptPredictor, FileEmbedder,
    FileModel, GoldConceptPredictor, OracleModel, RemoteConceptPredictor, RemoteConfig,
    RemoteEmbedder, RemoteModel,
};
use concept_bench::pipeline::Sizes;
use concept_bench::render::{ChatBackend, ChatClient, ChatConfig};
use concept_bench::scm::ScmGraph;
use concept_bench::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_KAPPA: f64 = 2.0;

/// Where an adapter gets its answers from.
///
/// Written on the command line as `oracle[:kappa]`, `gold`, `markers`,
/// `file:<path>` or `remote:<url>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AdapterSpec {
    Oracle { kappa: f64 },
    Gold,
    Markers,
    File { path: PathBuf },
    Remote { url: String },
}

impl FromStr for AdapterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("oracle", None) => Ok(AdapterSpec::Oracle { kappa: DEFAULT_KAPPA }),
            ("oracle", Some(k)) => k
                .parse()
                .ok()
                .filter(|k: &f64| k.is_finite())
                .map(|kappa| AdapterSpec::Oracle { kappa })
                .ok_or_else(|| Error::Config(format!("bad oracle kappa `{k}`"))),
            ("gold", None) => Ok(AdapterSpec::Gold),
            ("markers", None) => Ok(AdapterSpec::Markers),
            ("file", Some(p)) if !p.is_empty() => Ok(AdapterSpec::File { path: p.into() }),
            ("remote", Some(u)) if !u.is_empty() => Ok(AdapterSpec::Remote { url: u.into() }),
            _ => Err(Error::Config(format!("unrecognised adapter `{s}`"))),
        }
    }
}

/// Remote service settings shared by every remote adapter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteSettings {
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        RemoteSettings {
            token_env: None,
            timeout_secs: 60,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RendererChoice {
    Deterministic,
    Llm,
}

impl FromStr for RendererChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(RendererChoice::Deterministic),
            "llm" => Ok(RendererChoice::Llm),
            _ => Err(Error::Config(format!("unknown renderer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditorChoice {
    /// Chat model edits the text (needs LLM settings).
    Llm,
    /// True SCM edit, re-rendered deterministically.
    Structural,
}

impl FromStr for EditorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llm" => Ok(EditorChoice::Llm),
            "structural" => Ok(EditorChoice::Structural),
            _ => Err(Error::Config(format!("unknown editor `{s}`"))),
        }
    }
}

/// Everything one stage needs. Unused fields stay at their defaults; the
/// whole struct goes into the stage's `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub dataset: Option<String>,
    pub sizes: Option<Sizes>,
    pub seed: u64,
    pub changes_per_example: usize,
    pub renderer: RendererChoice,
    pub llm: Option<LlmSettings>,
    pub assets: Option<PathBuf>,
    pub cache: PathBuf,
    pub model: Option<AdapterSpec>,
    pub concepts: Option<AdapterSpec>,
    pub embedder: Option<AdapterSpec>,
    pub remote: RemoteSettings,
    pub methods: Vec<String>,
    pub k: usize,
    pub strategy: Option<String>,
    pub editor: EditorChoice,
    pub include_target: bool,
    pub samples: u64,
    pub definition: String,
    pub dir: PathBuf,
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(command: &str, dir: &Path) -> Self {
        RunConfig {
            command: command.to_string(),
            dataset: None,
            sizes: None,
            seed: 0,
            changes_per_example: 3,
            renderer: RendererChoice::Deterministic,
            llm: None,
            assets: None,
            cache: dir.join("cache"),
            model: None,
            concepts: None,
            embedder: None,
            remote: RemoteSettings::default(),
            methods: Vec::new(),
            k: 3,
            strategy: None,
            editor: EditorChoice::Structural,
            include_target: false,
            samples: 1_000_000,
            definition: "individual".into(),
            dir: dir.to_path_buf(),
            jobs: 0,
        }
    }

    /// Checks the fields the command reads, before any work starts.
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("`{}` needs {what}", self.command)))
            }
        };
        match self.command.as_str() {
            "generate" => {
                need(self.dataset.is_some(), "--dataset")?;
                need(self.sizes.is_some(), "--sizes")?;
                need(self.changes_per_example > 0, "--changes > 0")?;
                if self.renderer == RendererChoice::Llm {
                    let llm = self.llm.as_ref().ok_or_else(|| {
                        Error::Config("the llm renderer needs --llm-url and --llm-model".into())
                    })?;
                    need(llm.temperature == 0.0, "temperature 0")?;
                }
            }
            "predict" => need(self.model.is_some(), "--model")?,
            "explain" => {
                need(self.methods.len() == 1, "exactly one --method")?;
                need(self.k > 0, "--k > 0")?;
            }
            "evaluate" => need(!self.methods.is_empty(), "--methods")?,
            "true-effects" => {
                need(self.dataset.is_some(), "--dataset")?;
                need(self.samples > 0, "--samples > 0")?;
                self.definition.parse::<concept_bench::eval::EffectDefinition>()?;
            }
            other => return Err(Error::Config(format!("unknown command `{other}`"))),
        }
        if let Some(s) = &self.strategy {
            s.parse::<concept_bench::explain::CfStrategy>()?;
        }
        Ok(())
    }

    fn remote_config(&self, url: &str, route: &str) -> RemoteConfig {
        let mut cfg = RemoteConfig::new(url, url);
        cfg.token_env = self.remote.token_env.clone();
        cfg.timeout_secs = self.remote.timeout_secs;
        cfg.batch_size = self.remote.batch_size;
        cfg.cache_dir = Some(self.cache.join(route));
        cfg
    }

    pub fn chat_backend(&self) -> Result<Arc<dyn ChatBackend>> {
        let llm = self
            .llm
            .as_ref()
            .ok_or_else(|| Error::Config("needs --llm-url and --llm-model".into()))?;
        Ok(Arc::new(ChatClient::new(ChatConfig {
            base_url: llm.base_url.clone(),
            model: llm.model.clone(),
            token_env: self.remote.token_env.clone(),
            timeout_secs: self.remote.timeout_secs,
            retry: Default::default(),
        })))
    }
}

fn unsupported(role: &str, spec: &AdapterSpec) -> Error {
    Error::Config(format!("{spec:?} cannot serve as {role}"))
}

pub fn build_model(cfg: &RunConfig, spec: &AdapterSpec, graph: &ScmGraph) -> Result<Box<dyn ExplainedModel>> {
    Ok(match spec {
        AdapterSpec::Oracle { kappa } => Box::new(OracleModel::new(graph, *kappa, &[])?),
        AdapterSpec::File { path } => Box::new(FileModel::load(&path.display().to_string(), path)?),
        AdapterSpec::Remote { url } => Box::new(RemoteModel::new(&cfg.remote_config(url, "models"))?),
        other => return Err(unsupported("an explained model", other)),
    })
}

pub fn build_predictor(
    cfg: &RunConfig,
    spec: &AdapterSpec,
    graph: &ScmGraph,
) -> Result<Box<dyn ConceptPredictor>> {
    Ok(match spec {
        AdapterSpec::Gold => Box::new(GoldConceptPredictor::new(graph)),
        AdapterSpec::File { path } => Box::new(FileConceptPredictor::load(
            &path.display().to_string(),
            graph,
            path,
        )?),
        AdapterSpec::Remote { url } => Box::new(RemoteConceptPredictor::new(
            &cfg.remote_config(url, "concepts"),
            graph,
        )?),
        other => return Err(unsupported("a concept predictor", other)),
    })
}

pub fn build_embedder(cfg: &RunConfig, spec: &AdapterSpec, graph: &ScmGraph) -> Result<Box<dyn Embedder>> {
    Ok(match spec {
        AdapterSpec::Markers => Box::new(BagOfMarkers::new(graph)),
        AdapterSpec::File { path } => Box::new(FileEmbedder::load(&path.display().to_string(), path)?),
        AdapterSpec::Remote { url } => Box::new(RemoteEmbedder::new(&cfg.remote_config(url, "embeddings"))?),
        other => return Err(unsupported("an embedder", other)),
    })
}
