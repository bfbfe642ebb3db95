//! Turning concept assignments plus grounding into text.
//!
//! Two renderers share one contract: identical inputs give byte-identical
//! text. The deterministic renderer fills template slots with marker-wrapped
//! verbalizations; the LLM renderer prompts a chat-completions service at
//! temperature 0 and persists every completion in a content-addressed cache.

mod cache;
mod llm;
pub mod markers;
pub mod template;

use std::borrow::Cow;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cache::{CacheManifest, TextCache};
pub use cache::write_atomic;
pub use llm::{ChatBackend, ChatClient, ChatConfig, ChatMessage};
pub use markers::{mask_values, parse_assignment};

use crate::dgp::{DgpBundle, GroundingAsset, PROMPT_GENERATION_SYSTEM, PROMPT_GENERATION_USER};
use crate::digest::json_digest;
use crate::error::{Error, Result};
use crate::scm::ConceptAssignment;

pub const DETERMINISTIC_RENDERER_ID: &str = "deterministic/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedText {
    pub text: String,
    pub renderer_id: String,
    pub prompt_hash: String,
    /// Not persisted: it describes the run, not the text.
    #[serde(skip)]
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RendererKind {
    Deterministic,
    Llm,
}

/// Everything a rendered text depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderRequest<'a> {
    pub bundle: &'a str,
    pub assignment: &'a std::collections::BTreeMap<String, u32>,
    pub persona_id: &'a str,
    pub template_id: &'a str,
    pub renderer_id: &'a str,
    pub prompt_version: &'a str,
    pub temperature: f64,
}

impl RenderRequest<'_> {
    /// 256-bit key over the full request.
    pub fn hash(&self) -> String {
        json_digest(self)
    }
}

pub trait Renderer: Send + Sync {
    fn id(&self) -> String;

    fn prompt_version(&self, bundle: &DgpBundle) -> String;

    fn render(
        &self,
        bundle: &DgpBundle,
        assignment: &ConceptAssignment,
        persona: &GroundingAsset,
        template: &GroundingAsset,
    ) -> Result<RenderedText>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DeterministicRenderer;

impl Renderer for DeterministicRenderer {
    fn id(&self) -> String {
        DETERMINISTIC_RENDERER_ID.to_string()
    }

    fn prompt_version(&self, _bundle: &DgpBundle) -> String {
        DETERMINISTIC_RENDERER_ID.to_string()
    }

    fn render(
        &self,
        bundle: &DgpBundle,
        assignment: &ConceptAssignment,
        persona: &GroundingAsset,
        template: &GroundingAsset,
    ) -> Result<RenderedText> {
        render_deterministic(bundle, assignment, persona, template)
    }
}

fn slot_key(concept: &str) -> String {
    format!("slot:{concept}")
}

/// Fills `{slot:<concept>}` with `[Label: value]` markers and `{persona}`
/// with the persona body (prepended when the template has no persona slot).
pub fn render_deterministic(
    bundle: &DgpBundle,
    assignment: &ConceptAssignment,
    persona: &GroundingAsset,
    template: &GroundingAsset,
) -> Result<RenderedText> {
    let graph = &bundle.graph;
    for c in graph.concepts() {
        match template::count_placeholder(&template.body, &slot_key(&c.name)) {
            0 => {
                return Err(Error::MissingSlot {
                    template: template.id.clone(),
                    concept: c.name.clone(),
                })
            }
            1 => {}
            _ => {
                return Err(Error::DuplicateSlot {
                    template: template.id.clone(),
                    concept: c.name.clone(),
                })
            }
        }
        if assignment.get(&c.name).is_none() {
            return Err(Error::UnknownConcept(c.name.clone()));
        }
    }
    let mut markers = std::collections::BTreeMap::new();
    for c in graph.concepts() {
        let code = assignment.values[&c.name];
        let verbal = bundle.verbalizer.verbalize(&c.name, code)?;
        markers.insert(slot_key(&c.name), markers::marker(&c.label, verbal));
    }
    let has_persona = template::count_placeholder(&template.body, "persona") > 0;
    let body = template::fill(&template.body, |key| {
        if key == "persona" {
            Some(Cow::Borrowed(persona.body.as_str()))
        } else {
            markers.get(key).map(|m| Cow::Owned(m.clone()))
        }
    });
    let text = if has_persona {
        body
    } else {
        format!("{}\n\n{}", persona.body, body)
    };
    let request = RenderRequest {
        bundle: bundle.name.as_str(),
        assignment: &assignment.values,
        persona_id: &persona.id,
        template_id: &template.id,
        renderer_id: DETERMINISTIC_RENDERER_ID,
        prompt_version: DETERMINISTIC_RENDERER_ID,
        temperature: 0.0,
    };
    Ok(RenderedText {
        text,
        renderer_id: DETERMINISTIC_RENDERER_ID.to_string(),
        prompt_hash: request.hash(),
        cache_hit: false,
    })
}

/// `Label: value` pairs of the concepts a dataset verbalizes in prompts.
pub fn concept_details(bundle: &DgpBundle, assignment: &ConceptAssignment) -> Result<String> {
    bundle
        .prompt_concepts()
        .into_iter()
        .map(|i| {
            let c = bundle.graph.concept(i);
            let code = assignment
                .get(&c.name)
                .ok_or_else(|| Error::UnknownConcept(c.name.clone()))?;
            Ok(format!("{}: {}", c.label, bundle.verbalizer.verbalize(&c.name, code)?))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.join(", "))
}

/// System and user messages of the generation prompt. Each dataset's user
/// template names its slots differently; all names are filled.
pub fn generation_prompt(
    bundle: &DgpBundle,
    assignment: &ConceptAssignment,
    persona: &GroundingAsset,
    template: &GroundingAsset,
) -> Result<(String, String)> {
    let details = concept_details(bundle, assignment)?;
    let system = bundle.prompts.get(PROMPT_GENERATION_SYSTEM)?.trim_end().to_string();
    let user = template::fill(bundle.prompts.get(PROMPT_GENERATION_USER)?, |key| match key {
        "nurse_details" | "verbal_symptoms_list" | "candidate_info" => {
            Some(Cow::Borrowed(details.as_str()))
        }
        "nurses_persona" | "persona_info" | "persona_details" => {
            Some(Cow::Borrowed(persona.body.as_str()))
        }
        "dialogue_draft" | "reddit_template" | "cv_template" => {
            Some(Cow::Borrowed(template.body.as_str()))
        }
        _ => None,
    });
    Ok((system, user.trim_end().to_string()))
}

/// Renders through a chat backend with an on-disk cache in front of it.
pub struct LlmRenderer {
    backend: Arc<dyn ChatBackend>,
    cache_root: std::path::PathBuf,
    temperature: f64,
}

impl LlmRenderer {
    pub fn new(backend: Arc<dyn ChatBackend>, cache_root: &Path, temperature: f64) -> Result<Self> {
        if temperature != 0.0 {
            return Err(Error::NonZeroTemperature(temperature));
        }
        Ok(LlmRenderer {
            backend,
            cache_root: cache_root.to_path_buf(),
            temperature,
        })
    }

    fn cache(&self, bundle: &DgpBundle) -> Result<TextCache> {
        TextCache::open(
            &self.cache_root,
            bundle.name.as_str(),
            &CacheManifest {
                renderer_id: self.id(),
                prompt_version: self.prompt_version(bundle),
            },
        )
    }
}

impl Renderer for LlmRenderer {
    fn id(&self) -> String {
        format!("llm/{}", self.backend.id())
    }

    fn prompt_version(&self, bundle: &DgpBundle) -> String {
        bundle.prompts.version()
    }

    fn render(
        &self,
        bundle: &DgpBundle,
        assignment: &ConceptAssignment,
        persona: &GroundingAsset,
        template: &GroundingAsset,
    ) -> Result<RenderedText> {
        render_llm(self, bundle, assignment, persona, template)
    }
}

pub fn render_llm(
    renderer: &LlmRenderer,
    bundle: &DgpBundle,
    assignment: &ConceptAssignment,
    persona: &GroundingAsset,
    template: &GroundingAsset,
) -> Result<RenderedText> {
    if renderer.temperature != 0.0 {
        return Err(Error::NonZeroTemperature(renderer.temperature));
    }
    let renderer_id = renderer.id();
    let prompt_version = renderer.prompt_version(bundle);
    let request = RenderRequest {
        bundle: bundle.name.as_str(),
        assignment: &assignment.values,
        persona_id: &persona.id,
        template_id: &template.id,
        renderer_id: &renderer_id,
        prompt_version: &prompt_version,
        temperature: renderer.temperature,
    };
    let key = request.hash();
    let cache = renderer.cache(bundle)?;
    let (text, cache_hit) = cache.get_or_compute(&key, || {
        let (system, user) = generation_prompt(bundle, assignment, persona, template)?;
        let messages = [ChatMessage::system(system), ChatMessage::user(user)];
        let out = renderer.backend.complete(&messages, renderer.temperature)?;
        if out.trim().is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(out)
    })?;
    Ok(RenderedText {
        text,
        renderer_id,
        prompt_hash: key,
        cache_hit,
    })
}
