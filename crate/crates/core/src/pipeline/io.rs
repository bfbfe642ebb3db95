use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example, InterventionalPair, Manifest, SCHEMA_VERSION};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::render::write_atomic;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// First line of every JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    schema_version: u32,
    dataset: String,
    graph_digest: String,
    renderer_id: String,
    prng_id: String,
    seed: u64,
}

fn header(m: &Manifest, kind: &str) -> Header {
    Header {
        kind: kind.to_string(),
        schema_version: m.schema_version,
        dataset: m.dataset.clone(),
        graph_digest: m.graph_digest.clone(),
        renderer_id: m.renderer_id.clone(),
        prng_id: m.prng_id.clone(),
        seed: m.seed,
    }
}

pub(crate) fn jsonl_bytes<T: Serialize>(head: &impl Serialize, rows: &[T]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(head)?;
    out.push(b'\n');
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes `dataset.jsonl`, `pairs.jsonl` and `manifest.json` into `dir` and
/// returns the manifest with file digests filled in.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = dataset.manifest.clone();
    manifest.files.clear();
    let ex = jsonl_bytes(&header(&manifest, "examples"), &dataset.examples)?;
    let pairs = jsonl_bytes(&header(&manifest, "pairs"), &dataset.pairs)?;
    write_atomic(&dir.join(DATASET_FILE), &ex)?;
    write_atomic(&dir.join(PAIRS_FILE), &pairs)?;
    manifest.files.insert(DATASET_FILE.into(), sha256_hex(&ex));
    manifest.files.insert(PAIRS_FILE.into(), sha256_hex(&pairs));
    let mut m = serde_json::to_vec_pretty(&manifest)?;
    m.push(b'\n');
    write_atomic(&dir.join(MANIFEST_FILE), &m)?;
    Ok(manifest)
}

fn check_versions(schema: u32, graph: &str, expected_graph: &str) -> Result<()> {
    if schema != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: schema,
            expected: SCHEMA_VERSION,
        });
    }
    if graph != expected_graph {
        return Err(Error::GraphDigestMismatch {
            found: graph.to_string(),
            expected: expected_graph.to_string(),
        });
    }
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    manifest: &Manifest,
    kind: &str,
) -> Result<Vec<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::CorruptLine {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    let corrupt = |line: usize, reason: String| Error::CorruptLine {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.split_inclusive('\n').enumerate();
    let Some((_, first)) = lines.next() else {
        return Err(corrupt(1, "missing header line".into()));
    };
    let head: Header = serde_json::from_str(first).map_err(|e| corrupt(1, e.to_string()))?;
    check_versions(head.schema_version, &head.graph_digest, &manifest.graph_digest)?;
    if head.kind != kind {
        return Err(corrupt(1, format!("expected `{kind}` records, found `{}`", head.kind)));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if !line.ends_with('\n') {
            return Err(corrupt(i + 1, "truncated record".into()));
        }
        rows.push(serde_json::from_str(line).map_err(|e| corrupt(i + 1, e.to_string()))?);
    }
    if let Some(want) = manifest.files.get(path.file_name().and_then(|f| f.to_str()).unwrap_or("")) {
        if *want != sha256_hex(&bytes) {
            return Err(Error::FileDigestMismatch(path.to_path_buf()));
        }
    }
    Ok(rows)
}

pub(crate) fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::CorruptLine {
        path,
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Reads a dataset written by [`write_dataset`], verifying schema version,
/// graph digest (against `expected_graph` when given) and file digests.
pub fn read_dataset(dir: &Path, expected_graph: Option<&str>) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    check_versions(
        manifest.schema_version,
        &manifest.graph_digest,
        expected_graph.unwrap_or(&manifest.graph_digest),
    )?;
    let examples: Vec<Example> = read_jsonl(&dir.join(DATASET_FILE), &manifest, "examples")?;
    let pairs: Vec<InterventionalPair> = read_jsonl(&dir.join(PAIRS_FILE), &manifest, "pairs")?;
    Ok(Dataset {
        manifest,
        examples,
        pairs,
    })
}
