use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::morphdata::TagSet;

/// Percentage of predictions string-equal to their gold.
pub fn exact_match<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], golds: &[G]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::dim("exact match", golds.len(), predictions.len()));
    }
    if golds.is_empty() {
        return Err(Error::InvalidInput("exact match over zero instances".into()));
    }
    let hits = predictions.iter().zip(golds).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(100.0 * hits as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Pool every (instance, tag) decision.
    #[default]
    Micro,
    /// Mean of per-tag F1 over tags that occur in gold or predictions.
    Macro,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 100.0 * (2 * self.tp) as f64 / denom as f64)
    }
}

/// Multi-label F1 as a percentage. When no instance has any predicted or
/// gold tag, every prediction is correct and the score is 100.
pub fn tag_f1(pred_sets: &[TagSet], gold_sets: &[TagSet], averaging: Averaging) -> Result<f64> {
    if pred_sets.len() != gold_sets.len() {
        return Err(Error::dim("tag F1", gold_sets.len(), pred_sets.len()));
    }
    if gold_sets.is_empty() {
        return Err(Error::InvalidInput("tag F1 over zero instances".into()));
    }
    let mut per_tag: BTreeMap<&str, Counts> = BTreeMap::new();
    for (p, g) in pred_sets.iter().zip(gold_sets) {
        for t in p.union(g) {
            let c = per_tag.entry(t.as_str()).or_default();
            match (p.contains(t), g.contains(t)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
    }
    Ok(match averaging {
        Averaging::Micro => {
            let total = per_tag.values().fold(Counts::default(), |a, c| Counts {
                tp: a.tp + c.tp,
                fp: a.fp + c.fp,
                fn_: a.fn_ + c.fn_,
            });
            total.f1().unwrap_or(100.0)
        }
        Averaging::Macro => {
            let scores: Vec<f64> = per_tag.values().filter_map(Counts::f1).collect();
            if scores.is_empty() {
                100.0
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            }
        }
    })
}

/// Micro F1 after randomly reassigning predicted sets to instances: the
/// score of a predictor that carries no per-instance information.
pub fn shuffled_tag_f1(pred_sets: &[TagSet], gold_sets: &[TagSet], seed: u64) -> Result<f64> {
    let mut shuffled = pred_sets.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    tag_f1(&shuffled, gold_sets, Averaging::Micro)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(tags: &[&str]) -> TagSet {
        tags.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match(&["a", "b"], &["a", "b"]).unwrap(), 100.0);
        assert_eq!(exact_match(&["x", "y"], &["a", "b"]).unwrap(), 0.0);
        assert_eq!(exact_match(&["a", "b", "c", "x"], &["a", "b", "c", "d"]).unwrap(), 75.0);
        assert!(exact_match(&["a"], &["a", "b"]).is_err());
        assert!(exact_match::<&str, &str>(&[], &[]).is_err());
    }

    #[test]
    fn f1_examples() {
        let g = vec![set(&["A", "B"]), set(&["C"])];
        assert_eq!(tag_f1(&g, &g, Averaging::Micro).unwrap(), 100.0);
        let f = tag_f1(&[set(&["A"])], &[set(&["A", "B"])], Averaging::Micro).unwrap();
        assert!((f - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(tag_f1(&[set(&[]), set(&[])], &g, Averaging::Micro).unwrap(), 0.0);
        assert_eq!(tag_f1(&[set(&[])], &[set(&[])], Averaging::Micro).unwrap(), 100.0);
        assert!(tag_f1(&[set(&[])], &g, Averaging::Micro).is_err());
        // A perfect on one tag, B always missed.
        let m = tag_f1(&[set(&["A"]), set(&["A"])], &[set(&["A", "B"]), set(&["A"])], Averaging::Macro).unwrap();
        assert!((m - 50.0).abs() < 1e-9);
    }

    fn sets() -> impl Strategy<Value = Vec<(TagSet, TagSet)>> {
        let tag = prop::sample::select(vec!["A", "B", "C", "D"]);
        let s = prop::collection::btree_set(tag.prop_map(String::from), 0..4);
        prop::collection::vec((s.clone(), s), 1..20)
    }

    proptest! {
        #[test]
        fn f1_permutation_invariant_and_perfect_iff_equal(pairs in sets(), seed in 0u64..100) {
            let (p, g): (Vec<TagSet>, Vec<TagSet>) = pairs.iter().cloned().unzip();
            let base = tag_f1(&p, &g, Averaging::Micro).unwrap();
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<TagSet> = idx.iter().map(|&i| p[i].clone()).collect();
            let g2: Vec<TagSet> = idx.iter().map(|&i| g[i].clone()).collect();
            prop_assert!((tag_f1(&p2, &g2, Averaging::Micro).unwrap() - base).abs() < 1e-9);
            prop_assert_eq!(base == 100.0, p == g);
            let words: Vec<String> = p.iter().map(|s| format!("{s:?}")).collect();
            let golds: Vec<String> = g.iter().map(|s| format!("{s:?}")).collect();
            let em = exact_match(&words, &golds).unwrap();
            let w2: Vec<&String> = idx.iter().map(|&i| &words[i]).collect();
            let g2s: Vec<&String> = idx.iter().map(|&i| &golds[i]).collect();
            let em2 = exact_match(&w2.iter().map(|s| s.as_str()).collect::<Vec<_>>(), &g2s.iter().map(|s| s.as_str()).collect::<Vec<_>>()).unwrap();
            prop_assert!((em - em2).abs() < 1e-9);
        }
    }
}
