//! CSV and JSON report tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::render::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRow {
    pub dataset: String,
    pub model_id: String,
    pub method_id: String,
    pub ed: f64,
    pub ed_cosine: f64,
    pub ed_l2: f64,
    pub ed_norm_diff: f64,
    pub of: Option<f64>,
    pub n_changes: usize,
    pub of_pairs_nonempty: usize,
    pub of_pairs_total: usize,
    pub sign_ties: usize,
    /// Pairs the method could not explain; they are left out of its scores.
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRow {
    pub dataset: String,
    pub model_id: String,
    pub method_id: String,
    pub concept: String,
    pub importance: f64,
    pub gold_importance: f64,
    pub global_of: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub dataset: String,
    pub model_id: String,
    pub concept: String,
    pub sensitivity: f64,
    pub n_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEffectRow {
    pub dataset: String,
    pub concept: String,
    pub definition: String,
    pub samples: u64,
    pub seed: u64,
    /// Empty when the effect is not identifiable.
    pub effect: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub local: Vec<LocalRow>,
    pub global: Vec<GlobalRow>,
    pub sensitivity: Vec<SensitivityRow>,
    pub true_effects: Vec<TrueEffectRow>,
    /// Dataset digest, model id, method versions and similar.
    pub provenance: BTreeMap<String, String>,
}

const LOCAL_HEADER: &[&str] = &[
    "dataset", "model_id", "method_id", "ed", "ed_cosine", "ed_l2", "ed_norm_diff", "of",
    "n_changes", "of_pairs_nonempty", "of_pairs_total", "sign_ties", "n_missing",
];
const GLOBAL_HEADER: &[&str] = &[
    "dataset", "model_id", "method_id", "concept", "importance", "gold_importance", "global_of",
];
const SENSITIVITY_HEADER: &[&str] = &["dataset", "model_id", "concept", "sensitivity", "n_items"];
const TRUE_EFFECT_HEADER: &[&str] = &["dataset", "concept", "definition", "samples", "seed", "effect"];

fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

#[derive(Serialize)]
struct ReportManifest<'a> {
    provenance: &'a BTreeMap<String, String>,
    /// The OF normalizer counts only change pairs that share examples.
    of_normalizer: &'static str,
    files: BTreeMap<&'static str, String>,
}

/// Writes `local.csv`, `global.csv`, `sensitivity.csv`, `true_effects.csv`
/// and a `manifest.json` with their digests. Returns the manifest digest.
pub fn write_report(dir: &Path, report: &EvaluationReport) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tables = [
        ("local.csv", csv_bytes(LOCAL_HEADER, &report.local)?),
        ("global.csv", csv_bytes(GLOBAL_HEADER, &report.global)?),
        ("sensitivity.csv", csv_bytes(SENSITIVITY_HEADER, &report.sensitivity)?),
        ("true_effects.csv", csv_bytes(TRUE_EFFECT_HEADER, &report.true_effects)?),
    ];
    let mut files = BTreeMap::new();
    for (name, bytes) in &tables {
        write_atomic(&dir.join(name), bytes)?;
        files.insert(*name, sha256_hex(bytes));
    }
    let mut manifest = serde_json::to_vec_pretty(&ReportManifest {
        provenance: &report.provenance,
        of_normalizer: "non-empty change-pair intersections",
        files,
    })?;
    manifest.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &manifest)?;
    Ok(sha256_hex(&manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        write_report(dir.path(), &EvaluationReport::default()).unwrap();
        let local = fs::read_to_string(dir.path().join("local.csv")).unwrap();
        assert_eq!(local.lines().count(), 1);
        assert!(local.starts_with("dataset,model_id,method_id,ed,"));
        let te = fs::read_to_string(dir.path().join("true_effects.csv")).unwrap();
        assert_eq!(te.trim(), TRUE_EFFECT_HEADER.join(","));
    }

    #[test]
    fn rewrite_is_byte_identical_and_digested() {
        let mut r = EvaluationReport::default();
        r.local.push(LocalRow {
            dataset: "cv".into(),
            model_id: "m".into(),
            method_id: "approx".into(),
            ed: 0.25,
            ed_cosine: 0.1,
            ed_l2: 0.4,
            ed_norm_diff: 0.25,
            of: None,
            n_changes: 1,
            of_pairs_nonempty: 0,
            of_pairs_total: 0,
            sign_ties: 0,
            n_missing: 0,
        });
        r.provenance.insert("dataset_digest".into(), "abc".into());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let da = write_report(a.path(), &r).unwrap();
        let db = write_report(b.path(), &r).unwrap();
        assert_eq!(da, db);
        for f in ["local.csv", "global.csv", "manifest.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let local = fs::read(a.path().join("local.csv")).unwrap();
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["files"]["local.csv"], sha256_hex(&local));
        assert!(String::from_utf8(local).unwrap().contains("cv,m,approx,0.25,0.1,0.4,0.25,,1,0,0,0,0"));
    }
}
