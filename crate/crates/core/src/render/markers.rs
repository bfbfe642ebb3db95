//! Marker grammar of the deterministic renderer: each concept value is written
//! as `[<Concept label>: <verbalization>]`, which reads naturally in the text
//! and can be recovered exactly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scm::{ConceptAssignment, ScmGraph};

pub fn marker(label: &str, verbalization: &str) -> String {
    format!("[{label}: {verbalization}]")
}

/// Every well-formed `[label: value]` span whose label names a concept, with
/// its byte range in `text`.
pub fn marker_spans<'a>(graph: &ScmGraph, text: &'a str) -> Vec<(usize, std::ops::Range<usize>, &'a str)> {
    let labels: BTreeMap<&str, usize> = graph
        .concepts()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.label.as_str(), i))
        .collect();
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(open) = text[pos..].find('[').map(|o| o + pos) {
        let Some(close) = text[open..].find(']').map(|c| c + open) else {
            break;
        };
        let inner = &text[open + 1..close];
        if let Some((label, value)) = inner.split_once(": ") {
            if let Some(&idx) = labels.get(label) {
                out.push((idx, open..close + 1, value));
                pos = close + 1;
                continue;
            }
        }
        pos = open + 1;
    }
    out
}

/// Recovers the full concept assignment from a deterministically rendered
/// text. Each concept must appear exactly once.
pub fn parse_assignment(graph: &ScmGraph, text: &str) -> Result<ConceptAssignment> {
    let mut codes: Vec<Option<u32>> = vec![None; graph.len()];
    for (idx, _, value) in marker_spans(graph, text) {
        let concept = graph.concept(idx);
        let code = concept
            .values
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| {
                Error::MarkerParse(format!("`{value}` is not a value of `{}`", concept.name))
            })? as u32;
        if codes[idx].replace(code).is_some() {
            return Err(Error::MarkerParse(format!(
                "concept `{}` appears more than once",
                concept.name
            )));
        }
    }
    let codes = codes
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| {
                Error::MarkerParse(format!("no marker for concept `{}`", graph.concept(i).name))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConceptAssignment::from_codes(graph, &codes))
}

/// Replaces every recognised marker with `[label]`, leaving the rest of the
/// text intact. Two renderings that differ only in concept values mask to
/// the same string.
pub fn mask_values(graph: &ScmGraph, text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (idx, range, _) in marker_spans(graph, text) {
        out.push_str(&text[last..range.start]);
        out.push('[');
        out.push_str(&graph.concept(idx).label);
        out.push(']');
        last = range.end;
    }
    out.push_str(&text[last..]);
    out
}
