//! Counterfactual generation by text editing.

use std::borrow::Cow;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Item;
use crate::adapters::ExplainedModel;
use crate::dgp::DgpBundle;
use crate::digest::json_digest;
use crate::error::{Error, Result};
use crate::render::template::fill;
use crate::render::{
    render_deterministic, CacheManifest, ChatBackend, ChatMessage, TextCache,
};
use crate::scm::{counterfactual_assignment, ConceptChange, ExogenousRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfStrategy {
    OnlyChange,
    FixAll,
    FixConfounders,
    MediatorsConfounders,
}

impl CfStrategy {
    pub const ALL: [CfStrategy; 4] = [
        CfStrategy::OnlyChange,
        CfStrategy::FixAll,
        CfStrategy::FixConfounders,
        CfStrategy::MediatorsConfounders,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CfStrategy::OnlyChange => "only_change",
            CfStrategy::FixAll => "fix_all",
            CfStrategy::FixConfounders => "fix_confounders",
            CfStrategy::MediatorsConfounders => "mediators_confounders",
        }
    }

    fn prompt_name(self) -> String {
        format!("cf_{}", self.as_str())
    }
}

impl fmt::Display for CfStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CfStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CfStrategy::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

fn label_list(bundle: &DgpBundle, idx: &[usize]) -> String {
    let shown = bundle.prompt_concepts();
    idx.iter()
        .filter(|i| shown.contains(i))
        .map(|&i| bundle.graph.concept(i).label.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Fills the strategy's edit prompt. Confounders are the target's ancestors
/// and mediators its descendants, both in declaration order and limited to
/// concepts that appear in the text.
pub fn build_cf_prompt(
    strategy: CfStrategy,
    bundle: &DgpBundle,
    text: &str,
    change: &ConceptChange,
) -> Result<String> {
    let graph = &bundle.graph;
    let target = graph.index_of(&change.concept)?;
    let concept = graph.concept(target);
    let old = bundle.verbalizer.verbalize(&change.concept, change.from)?;
    let new = bundle.verbalizer.verbalize(&change.concept, change.to)?;
    let confounders = label_list(bundle, &graph.ancestor_indices(target));
    let mediators = label_list(bundle, &graph.descendant_indices(target));
    let all = label_list(bundle, &(0..graph.len()).collect::<Vec<_>>());
    let template = bundle.prompts.get(&strategy.prompt_name())?;
    Ok(fill(template, |key| {
        Some(Cow::Borrowed(match key {
            "concept" => concept.label.as_str(),
            "text" => text,
            "old_value_text" => old,
            "new_value_text" => new,
            "confounders" => confounders.as_str(),
            "mediators" => mediators.as_str(),
            "all_concepts" => all.as_str(),
            _ => return None,
        }))
    })
    .trim_end()
    .to_string())
}

pub struct EditRequest<'a> {
    pub bundle: &'a DgpBundle,
    pub strategy: CfStrategy,
    pub prompt: &'a str,
    pub text: &'a str,
    pub change: &'a ConceptChange,
    pub exo: Option<&'a ExogenousRecord>,
}

pub trait TextEditor: Send + Sync {
    fn id(&self) -> String;
    fn edit(&self, req: &EditRequest<'_>) -> Result<String>;
}

/// Sends the edit prompt to a chat model at temperature 0.
pub struct ChatEditor {
    backend: Arc<dyn ChatBackend>,
}

impl ChatEditor {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        ChatEditor { backend }
    }
}

impl TextEditor for ChatEditor {
    fn id(&self) -> String {
        format!("llm/{}", self.backend.id())
    }

    fn edit(&self, req: &EditRequest<'_>) -> Result<String> {
        let out = self.backend.complete(&[ChatMessage::user(req.prompt)], 0.0)?;
        let out = out.trim();
        if out.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(out.to_string())
    }
}

/// Stand-in editor that performs the true structural counterfactual and
/// re-renders it with the deterministic renderer.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructuralEditor;

impl TextEditor for StructuralEditor {
    fn id(&self) -> String {
        "structural".into()
    }

    fn edit(&self, req: &EditRequest<'_>) -> Result<String> {
        let exo = req
            .exo
            .ok_or_else(|| Error::Config("structural editor needs the exogenous record".into()))?;
        let cf = counterfactual_assignment(&req.bundle.graph, exo, req.change)?;
        let persona = req.bundle.persona(&exo.persona_id)?;
        let template = req.bundle.template(&exo.template_id)?;
        Ok(render_deterministic(req.bundle, &cf, persona, template)?.text)
    }
}

/// Edits texts with one strategy, caching every generated counterfactual by
/// (strategy, text digest, change).
pub struct CfGenerator<'a> {
    bundle: &'a DgpBundle,
    editor: &'a dyn TextEditor,
    strategy: CfStrategy,
    cache: Option<TextCache>,
}

#[derive(Serialize)]
struct CfKey<'a> {
    strategy: CfStrategy,
    text_digest: &'a str,
    change: &'a ConceptChange,
    editor: String,
    prompt_version: String,
}

impl<'a> CfGenerator<'a> {
    pub fn new(
        bundle: &'a DgpBundle,
        editor: &'a dyn TextEditor,
        strategy: CfStrategy,
        cache_root: Option<&Path>,
    ) -> Result<Self> {
        let cache = cache_root
            .map(|root| {
                TextCache::open(
                    &root.join("cfgen"),
                    bundle.name.as_str(),
                    &CacheManifest {
                        renderer_id: editor.id(),
                        prompt_version: bundle.prompts.version(),
                    },
                )
            })
            .transpose()?;
        Ok(CfGenerator {
            bundle,
            editor,
            strategy,
            cache,
        })
    }

    pub fn strategy(&self) -> CfStrategy {
        self.strategy
    }

    /// The edited text and whether it came from the cache.
    pub fn generate(&self, x: &Item, change: &ConceptChange) -> Result<(String, bool)> {
        let compute = || {
            let prompt = build_cf_prompt(self.strategy, self.bundle, &x.text, change)?;
            self.editor.edit(&EditRequest {
                bundle: self.bundle,
                strategy: self.strategy,
                prompt: &prompt,
                text: &x.text,
                change,
                exo: x.exo.as_ref(),
            })
        };
        match &self.cache {
            Some(cache) => {
                let key = json_digest(&CfKey {
                    strategy: self.strategy,
                    text_digest: &x.text_digest,
                    change,
                    editor: self.editor.id(),
                    prompt_version: self.bundle.prompts.version(),
                });
                cache.get_or_compute(&key, compute)
            }
            None => compute().map(|t| (t, false)),
        }
    }

    pub fn explain(&self, model: &dyn ExplainedModel, x: &Item, change: &ConceptChange) -> Result<Vec<f64>> {
        let (text, _) = self.generate(x, change)?;
        let f_cf = model.predict(&text)?.probs;
        if f_cf.len() != x.prediction.len() {
            return Err(Error::LengthMismatch(f_cf.len(), x.prediction.len()));
        }
        Ok(f_cf.iter().zip(&x.prediction).map(|(a, b)| a - b).collect())
    }
}
