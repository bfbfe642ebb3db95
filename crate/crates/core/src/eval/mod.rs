//! Reference effects, explanation metrics and ground-truth effects.

mod report;
mod truth;

use std::collections::{BTreeMap, BTreeSet};

pub use report::{
    write_report, EvaluationReport, GlobalRow, LocalRow, SensitivityRow, TrueEffectRow,
};
pub use truth::{true_effect_mc, true_effects_table, EffectDefinition};

use crate::adapters::ExplainedModel;
use crate::error::{Error, Result};
use crate::explain::ExplanationVector;
use crate::pipeline::Dataset;
use crate::scm::ConceptChange;

/// Vectors keyed by (example id, change).
pub type EffectTable = BTreeMap<(String, ConceptChange), Vec<f64>>;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// `f(cf) - f(x)`.
pub fn icace(f_x: &[f64], f_cf: &[f64]) -> Result<Vec<f64>> {
    same_len(f_x, f_cf)?;
    Ok(sub(f_cf, f_x))
}

/// Mean over `bases` of `f(x -> change.to) - f(x -> change.from)`, where
/// `endpoints[(id, code)]` is the prediction on the base rendered under
/// `do(change.concept = code)`.
pub fn cace_empirical(
    bases: &[&str],
    change: &ConceptChange,
    endpoints: &BTreeMap<(String, u32), Vec<f64>>,
) -> Result<Vec<f64>> {
    if bases.is_empty() {
        return Err(Error::EmptySet);
    }
    let get = |id: &str, code: u32| {
        endpoints
            .get(&(id.to_string(), code))
            .ok_or_else(|| Error::MissingEndpointCounterfactual {
                example: id.to_string(),
                concept: change.concept.clone(),
                code,
            })
    };
    let mut acc: Option<Vec<f64>> = None;
    for id in bases {
        let d = icace(get(id, change.from)?, get(id, change.to)?)?;
        match &mut acc {
            None => acc = Some(d),
            Some(a) => {
                same_len(a, &d)?;
                a.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
            }
        }
    }
    let n = bases.len() as f64;
    Ok(acc.unwrap().into_iter().map(|x| x / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDistance {
    pub cosine: f64,
    pub l2: f64,
    pub norm_diff: f64,
    pub mean: f64,
}

/// Cosine distance is 1 when exactly one side is the zero vector and 0 when
/// both are.
pub fn error_distance(reference: &[f64], expl: &[f64]) -> Result<ErrorDistance> {
    same_len(reference, expl)?;
    let (nr, ne) = (norm(reference), norm(expl));
    let cosine = match (nr == 0.0, ne == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        // 1 - cos = |u - v|^2 / 2 for unit vectors; exact zero when u == v
        _ => {
            let d2: f64 = reference
                .iter()
                .zip(expl)
                .map(|(a, b)| (a / nr - b / ne).powi(2))
                .sum();
            d2 / 2.0
        }
    };
    let l2 = norm(&sub(reference, expl));
    let norm_diff = (nr - ne).abs();
    Ok(ErrorDistance {
        cosine,
        l2,
        norm_diff,
        mean: (cosine + l2 + norm_diff) / 3.0,
    })
}

/// Share of classes where the reference and explanation differences between
/// two changes agree in sign (`sgn(0) = 0`).
pub fn local_of(ref1: &[f64], ref2: &[f64], expl1: &[f64], expl2: &[f64]) -> Result<f64> {
    same_len(ref1, ref2)?;
    same_len(ref1, expl1)?;
    same_len(ref1, expl2)?;
    if ref1.is_empty() {
        return Err(Error::EmptySet);
    }
    let agree = (0..ref1.len())
        .filter(|&y| sgn(ref1[y] - ref2[y]) == sgn(expl1[y] - expl2[y]))
        .count();
    Ok(agree as f64 / ref1.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalAggregate {
    pub ed_bar: f64,
    pub ed_cosine: f64,
    pub ed_l2: f64,
    pub ed_norm_diff: f64,
    /// Absent with fewer than two changes or no shared examples.
    pub of_bar: Option<f64>,
    pub n_changes: usize,
    /// Ordered change pairs with a non-empty example intersection.
    pub of_pairs_nonempty: usize,
    pub of_pairs_total: usize,
    /// Zero entries among reference differences, where only an exact zero agrees.
    pub sign_ties: usize,
}

fn lookup<'t>(t: &'t EffectTable, id: &str, c: &ConceptChange, is_ref: bool) -> Result<&'t Vec<f64>> {
    t.get(&(id.to_string(), c.clone()))
        .ok_or_else(|| Error::MissingExplanation {
            example: id.to_string(),
            change: if is_ref { format!("{c} (reference)") } else { c.to_string() },
        })
}

/// ED averaged per change then across changes; OF averaged over shared
/// examples per ordered change pair, then across the pairs that share any.
pub fn aggregate_local(
    change_sets: &BTreeMap<ConceptChange, BTreeSet<String>>,
    refs: &EffectTable,
    expls: &EffectTable,
) -> Result<LocalAggregate> {
    if change_sets.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut sums = [0.0; 4];
    for (c, ids) in change_sets {
        let mut per = [0.0; 4];
        for id in ids {
            let ed = error_distance(lookup(refs, id, c, true)?, lookup(expls, id, c, false)?)?;
            per[0] += ed.mean;
            per[1] += ed.cosine;
            per[2] += ed.l2;
            per[3] += ed.norm_diff;
        }
        let n = ids.len().max(1) as f64;
        for k in 0..4 {
            sums[k] += per[k] / n;
        }
    }
    let nc = change_sets.len() as f64;
    let mut of_sum = 0.0;
    let mut nonempty = 0;
    let mut ties = 0;
    for (c1, s1) in change_sets {
        for (c2, s2) in change_sets {
            if c1 == c2 {
                continue;
            }
            let shared: Vec<&String> = s1.intersection(s2).collect();
            if shared.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for id in &shared {
                let (r1, r2) = (lookup(refs, id, c1, true)?, lookup(refs, id, c2, true)?);
                let (e1, e2) = (lookup(expls, id, c1, false)?, lookup(expls, id, c2, false)?);
                acc += local_of(r1, r2, e1, e2)?;
                ties += r1.iter().zip(r2.iter()).filter(|(a, b)| *a - *b == 0.0).count();
            }
            of_sum += acc / shared.len() as f64;
            nonempty += 1;
        }
    }
    Ok(LocalAggregate {
        ed_bar: sums[0] / nc,
        ed_cosine: sums[1] / nc,
        ed_l2: sums[2] / nc,
        ed_norm_diff: sums[3] / nc,
        of_bar: (nonempty > 0).then(|| of_sum / nonempty as f64),
        n_changes: change_sets.len(),
        of_pairs_nonempty: nonempty,
        of_pairs_total: change_sets.len() * (change_sets.len() - 1),
        sign_ties: ties,
    })
}

fn abs_sum(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Per concept, the mean over its changes of the CaCE absolute sum.
pub fn global_importance(
    concepts: &[&str],
    caces: &BTreeMap<ConceptChange, Vec<f64>>,
) -> Result<BTreeMap<String, f64>> {
    concepts
        .iter()
        .map(|&name| {
            let vals: Vec<f64> = caces
                .iter()
                .filter(|(c, _)| c.concept == name)
                .map(|(_, v)| abs_sum(v))
                .collect();
            if vals.is_empty() {
                return Err(Error::NoChangesForConcept(name.to_string()));
            }
            Ok((name.to_string(), vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

/// Share of ordered concept pairs ranked the same way by both score maps.
pub fn global_of(gold: &BTreeMap<String, f64>, method: &BTreeMap<String, f64>) -> Result<f64> {
    if !gold.keys().eq(method.keys()) {
        return Err(Error::KeyMismatch);
    }
    if gold.len() < 2 {
        return Err(Error::EmptySet);
    }
    let keys: Vec<&String> = gold.keys().collect();
    let mut agree = 0;
    let mut total = 0;
    for i in &keys {
        for j in &keys {
            if i == j {
                continue;
            }
            total += 1;
            if sgn(gold[*i] - gold[*j]) == sgn(method[*i] - method[*j]) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / total as f64)
}

/// Mean absolute sum of a concept's ICaCE vectors.
pub fn sensitivity(icaces: &[&[f64]]) -> Result<f64> {
    if icaces.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(icaces.iter().map(|v| abs_sum(v)).sum::<f64>() / icaces.len() as f64)
}

/// Mean vector per change over the examples of its change set.
pub fn mean_per_change(
    change_sets: &BTreeMap<ConceptChange, BTreeSet<String>>,
    table: &EffectTable,
) -> Result<BTreeMap<ConceptChange, Vec<f64>>> {
    change_sets
        .iter()
        .map(|(c, ids)| {
            let mut acc: Vec<f64> = Vec::new();
            for id in ids {
                let v = table.get(&(id.clone(), c.clone())).ok_or_else(|| {
                    Error::MissingExplanation {
                        example: id.clone(),
                        change: c.to_string(),
                    }
                })?;
                if acc.is_empty() {
                    acc = vec![0.0; v.len()];
                }
                same_len(&acc, v)?;
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            let n = ids.len().max(1) as f64;
            Ok((c.clone(), acc.into_iter().map(|x| x / n).collect()))
        })
        .collect()
}

/// `f(cf_text) - f(text)` for every stored pair.
pub fn reference_icaces(dataset: &Dataset, model: &dyn ExplainedModel) -> Result<EffectTable> {
    let idx = dataset.example_index();
    dataset
        .pairs
        .iter()
        .map(|p| {
            let base = idx.get(p.base_id.as_str()).ok_or_else(|| Error::MissingExplanation {
                example: p.base_id.clone(),
                change: p.change.to_string(),
            })?;
            let fx = model.predict(&base.text.text)?.probs;
            let fc = model.predict(&p.cf_text.text)?.probs;
            Ok(((p.base_id.clone(), p.change.clone()), icace(&fx, &fc)?))
        })
        .collect()
}

pub fn explanation_table(rows: &[ExplanationVector]) -> EffectTable {
    rows.iter()
        .map(|r| ((r.example_id.clone(), r.change.clone()), r.delta.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::load_builtin;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn icace_examples() {
        let d = icace(&[0.7, 0.2, 0.1], &[0.1, 0.8, 0.1]).unwrap();
        assert!(close(d[0], -0.6, 1e-12) && close(d[1], 0.6, 1e-12) && d[2] == 0.0);
        assert_eq!(icace(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(icace(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(matches!(icace(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn cace_from_endpoints() {
        let g = load_builtin("violence").unwrap().graph;
        let c = ConceptChange::new(&g, "gender", 0, 1).unwrap();
        let mut e = BTreeMap::new();
        e.insert(("a".to_string(), 0), vec![1.0, 0.0, 0.0]);
        e.insert(("a".to_string(), 1), vec![0.0, 0.0, 1.0]);
        assert_eq!(cace_empirical(&["a"], &c, &e).unwrap(), vec![-1.0, 0.0, 1.0]);
        e.insert(("b".to_string(), 0), vec![0.0, 0.0, 1.0]);
        e.insert(("b".to_string(), 1), vec![1.0, 0.0, 0.0]);
        assert_eq!(cace_empirical(&["a", "b"], &c, &e).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(matches!(
            cace_empirical(&["a", "z"], &c, &e),
            Err(Error::MissingEndpointCounterfactual { .. })
        ));
    }

    #[test]
    fn error_distance_examples() {
        let z = error_distance(&[0.2, -0.2], &[0.2, -0.2]).unwrap();
        assert!(z.cosine.abs() < 1e-12 && z.l2 == 0.0 && z.norm_diff == 0.0 && z.mean.abs() < 1e-12);

        let e = error_distance(&[0.5, -0.5], &[0.5, 0.5]).unwrap();
        assert!(close(e.cosine, 1.0, 1e-12) && close(e.l2, 1.0, 1e-12) && e.norm_diff.abs() < 1e-12);
        assert!(close(e.mean, 2.0 / 3.0, 1e-12));

        let e = error_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(close(e.l2, 2f64.sqrt(), 1e-12));
        assert!(close(e.mean, (1.0 + 2f64.sqrt()) / 3.0, 1e-12));
        assert!(close(e.mean, 0.8047, 1e-4));
    }

    #[test]
    fn zero_vector_cosine_convention() {
        assert_eq!(error_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap().cosine, 0.0);
        assert_eq!(error_distance(&[0.0, 0.0], &[0.1, -0.1]).unwrap().cosine, 1.0);
        assert_eq!(error_distance(&[0.1, -0.1], &[0.0, 0.0]).unwrap().cosine, 1.0);
    }

    #[test]
    fn local_of_examples() {
        // d_ref = (0.3, -0.3), d_expl = (0.1, 0.1)
        assert_eq!(local_of(&[0.3, -0.3], &[0.0, 0.0], &[0.1, 0.1], &[0.0, 0.0]).unwrap(), 0.5);
        let (r1, r2) = ([0.2, -0.1, -0.1], [-0.3, 0.1, 0.2]);
        assert_eq!(local_of(&r1, &r2, &r1, &r2).unwrap(), 1.0);
        let (n1, n2) = (r1.map(|x| -x), r2.map(|x| -x));
        assert_eq!(local_of(&r1, &r2, &n1, &n2).unwrap(), 0.0);
    }

    #[test]
    fn global_importance_and_of() {
        let g = load_builtin("violence").unwrap().graph;
        let mut caces = BTreeMap::new();
        caces.insert(ConceptChange::new(&g, "age", 0, 1).unwrap(), vec![0.2, -0.1, -0.1]);
        caces.insert(ConceptChange::new(&g, "age", 1, 0).unwrap(), vec![-0.4, 0.2, 0.2]);
        let s = global_importance(&["age"], &caces).unwrap();
        assert!(close(s["age"], 0.6, 1e-12));
        assert!(matches!(
            global_importance(&["race"], &caces),
            Err(Error::NoChangesForConcept(_))
        ));

        let m = |v: [(&str, f64); 3]| v.iter().map(|(k, x)| (k.to_string(), *x)).collect::<BTreeMap<_, _>>();
        let gold = m([("A", 3.0), ("B", 2.0), ("C", 1.0)]);
        assert_eq!(global_of(&gold, &gold).unwrap(), 1.0);
        assert_eq!(global_of(&gold, &m([("A", 1.0), ("B", 2.0), ("C", 3.0)])).unwrap(), 0.0);
        let v = global_of(&gold, &m([("A", 3.0), ("B", 1.0), ("C", 2.0)])).unwrap();
        assert!(close(v, 4.0 / 6.0, 1e-12));
        assert!(matches!(
            global_of(&gold, &m([("A", 3.0), ("B", 1.0), ("D", 2.0)])),
            Err(Error::KeyMismatch)
        ));
    }

    #[test]
    fn sensitivity_examples() {
        let flip = [-1.0, 1.0, 0.0];
        let none = [0.0, 0.0, 0.0];
        assert_eq!(sensitivity(&[&flip]).unwrap(), 2.0);
        assert_eq!(sensitivity(&[&none, &none]).unwrap(), 0.0);
        assert_eq!(sensitivity(&[&flip, &none, &flip, &none]).unwrap(), 1.0);
        assert!(matches!(sensitivity(&[]), Err(Error::EmptySet)));
    }

    #[test]
    fn single_change_has_no_of() {
        let g = load_builtin("violence").unwrap().graph;
        let c = ConceptChange::new(&g, "age", 0, 1).unwrap();
        let sets = BTreeMap::from([(c.clone(), BTreeSet::from(["a".to_string()]))]);
        let t = EffectTable::from([(("a".to_string(), c), vec![0.1, -0.1])]);
        let agg = aggregate_local(&sets, &t, &t).unwrap();
        assert_eq!(agg.of_bar, None);
        assert_eq!(agg.ed_bar, 0.0);
    }

    #[test]
    fn missing_explanation_is_named() {
        let g = load_builtin("violence").unwrap().graph;
        let c = ConceptChange::new(&g, "age", 0, 1).unwrap();
        let sets = BTreeMap::from([(c.clone(), BTreeSet::from(["a".to_string()]))]);
        let t = EffectTable::from([(("a".to_string(), c), vec![0.1, -0.1])]);
        assert!(matches!(
            aggregate_local(&sets, &t, &EffectTable::new()),
            Err(Error::MissingExplanation { .. })
        ));
    }
}
