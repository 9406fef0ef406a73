use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// Characters used as entity markers in decoded text; removed from phrases.
pub const MARKER_CHARS: &[char] = &['[', ']', '#'];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityTuple {
    pub phrase: String,
    pub tag: String,
}

impl EntityTuple {
    pub fn new(phrase: &str, tag: &str) -> Self {
        Self {
            phrase: normalize_phrase(phrase),
            tag: tag.trim().to_string(),
        }
    }
}

/// Lowercases, drops marker characters and collapses whitespace.
pub fn normalize_phrase(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| if MARKER_CHARS.contains(&c) { ' ' } else { c })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct F1Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl F1Counts {
    pub fn add(&mut self, o: F1Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }

    pub fn scores(&self) -> PrfScores {
        PrfScores {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

pub(crate) fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Multiset matching: each hypothesis item consumes at most one equal reference item.
pub fn multiset_counts<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> F1Counts {
    let mut pool: HashMap<&T, usize> = HashMap::new();
    for r in reference {
        *pool.entry(r).or_default() += 1;
    }
    let mut tp = 0;
    for h in hyp {
        if let Some(c) = pool.get_mut(h) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    F1Counts {
        tp,
        fp: hyp.len() - tp,
        fn_: reference.len() - tp,
    }
}

/// Micro-averaged counts over sentences, matching exact (phrase, tag) tuples.
pub fn ner_micro_counts(hyp: &[Vec<EntityTuple>], reference: &[Vec<EntityTuple>]) -> F1Counts {
    let mut total = F1Counts::default();
    for (h, r) in hyp.iter().zip(reference) {
        total.add(multiset_counts(h, r));
    }
    total
}

/// As `ner_micro_counts`, but only the tags have to match.
pub fn label_counts(hyp: &[Vec<EntityTuple>], reference: &[Vec<EntityTuple>]) -> F1Counts {
    let mut total = F1Counts::default();
    for (h, r) in hyp.iter().zip(reference) {
        let ht: Vec<&str> = h.iter().map(|t| t.tag.as_str()).collect();
        let rt: Vec<&str> = r.iter().map(|t| t.tag.as_str()).collect();
        total.add(multiset_counts(&ht, &rt));
    }
    total
}

pub fn ner_micro_f1(hyp: &[Vec<EntityTuple>], reference: &[Vec<EntityTuple>]) -> PrfScores {
    ner_micro_counts(hyp, reference).scores()
}

pub fn label_f1(hyp: &[Vec<EntityTuple>], reference: &[Vec<EntityTuple>]) -> PrfScores {
    label_counts(hyp, reference).scores()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(p: &str, tag: &str) -> EntityTuple {
        EntityTuple::new(p, tag)
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_phrase("  New   YORK] "), "new york");
        assert_eq!(t("#Paris]", "PLACE"), t("paris", "PLACE"));
    }

    #[test]
    fn examples() {
        let r = vec![vec![t("a", "X"), t("b", "Y")], vec![t("c", "X"), t("d", "Z")]];
        assert_eq!(ner_micro_f1(&r, &r).f1, 1.0);
        let mut h = r.clone();
        h[1].push(t("e", "Z"));
        let s = ner_micro_f1(&h, &r);
        assert_eq!((s.precision, s.recall), (0.8, 1.0));
        assert!((s.f1 - 8.0 / 9.0).abs() < 1e-15);
        let c = ner_micro_counts(&[vec![t("a", "X")]], &[vec![t("a", "X"), t("a", "X")]]);
        assert_eq!((c.tp, c.fp, c.fn_), (1, 0, 1));
    }

    #[test]
    fn label_examples() {
        let h = vec![vec![t("parris", "PLACE")]];
        let r = vec![vec![t("paris", "PLACE")]];
        assert_eq!(label_counts(&h, &r).tp, 1);
        let c = ner_micro_counts(&h, &r);
        assert_eq!((c.tp, c.fp, c.fn_), (0, 1, 1));
        let empty = label_f1(&[vec![]], &r);
        assert_eq!((empty.precision, empty.recall), (0.0, 0.0));
        let c = label_counts(
            &[vec![t("p", "A"), t("q", "A"), t("r", "B")]],
            &[vec![t("p", "A"), t("q", "B"), t("r", "B")]],
        );
        assert_eq!((c.tp, c.fp, c.fn_), (2, 1, 1));
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-15);
    }

    fn arb_sentence() -> impl Strategy<Value = Vec<EntityTuple>> {
        prop::collection::vec((0u8..3, 0u8..3), 0..5)
            .prop_map(|v| v.into_iter().map(|(p, g)| t(&format!("w{p}"), &format!("T{g}"))).collect())
    }

    proptest! {
        #[test]
        fn micro_at_most_label(h in prop::collection::vec(arb_sentence(), 1..5), r in prop::collection::vec(arb_sentence(), 1..5)) {
            let n = h.len().min(r.len());
            let micro = ner_micro_f1(&h[..n], &r[..n]);
            let label = label_f1(&h[..n], &r[..n]);
            prop_assert!(micro.f1 <= label.f1);
            prop_assert!((0.0..=1.0).contains(&micro.f1));
        }
    }
}
