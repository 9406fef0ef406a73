use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use super::{FeatureMatrix, SegmentTable};
use crate::{Error, Result};

/// Discrete class IDs paired row-for-row with a feature matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Parameter(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Range(format!(
                "label {bad} >= num_classes {num_classes}"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    /// Maps tokens to their index in `vocab`.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], vocab: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let labels = tokens
            .iter()
            .map(|t| {
                index
                    .get(t.as_ref())
                    .copied()
                    .ok_or_else(|| Error::Vocabulary(t.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, vocab.len())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// n x num_classes indicator matrix, the continuous view used by CCA, CKA and Procrustes.
    pub fn one_hot(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.labels.len(), self.num_classes);
        for (i, &l) in self.labels.iter().enumerate() {
            m[(i, l)] = 1.0;
        }
        m
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Labels for `features` taken from `table`, whose entries are in row order.
pub fn align_labels(
    features: &FeatureMatrix,
    table: &SegmentTable,
    vocab: &[String],
) -> Result<LabelVector> {
    if table.len() != features.rows() {
        return Err(Error::Shape(format!(
            "{} segments for {} feature rows",
            table.len(),
            features.rows()
        )));
    }
    let tokens: Vec<&str> = table.entries().iter().map(|s| s.label.as_str()).collect();
    LabelVector::from_tokens(&tokens, vocab)
}

/// One label token per line; `#` comments and blank lines skipped.
pub fn read_label_tokens(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = super::read_text(path.as_ref())?;
    Ok(super::data_lines(&text)
        .map(|(_, l)| l.trim().to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(labels: &[&str]) -> SegmentTable {
        let text: String = labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("u\t{l}\t{}\t{}\n", i as f64, i as f64 + 0.5))
            .collect();
        SegmentTable::parse(&text, true).unwrap()
    }

    fn vocab(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn align_in_vocab_order() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let t = table(&["a", "b", "a"]);
        assert_eq!(align_labels(&f, &t, &vocab(&["a", "b"])).unwrap().labels(), &[0, 1, 0]);
        assert_eq!(align_labels(&f, &t, &vocab(&["b", "a"])).unwrap().labels(), &[1, 0, 1]);
    }

    #[test]
    fn align_errors() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let t = table(&["a", "zz", "a"]);
        assert!(matches!(
            align_labels(&f, &t, &vocab(&["a", "b"])),
            Err(Error::Vocabulary(l)) if l == "zz"
        ));
        let t = table(&["a", "b"]);
        assert!(matches!(
            align_labels(&f, &t, &vocab(&["a", "b"])),
            Err(Error::Shape(_))
        ));
    }

    proptest! {
        #[test]
        fn one_hot_rows_and_column_sums(labels in prop::collection::vec(0usize..5, 1..50)) {
            let lv = LabelVector::new(labels, 5).unwrap();
            let oh = lv.one_hot();
            for r in 0..oh.nrows() {
                prop_assert_eq!(oh.row(r).iter().filter(|&&v| v == 1.0).count(), 1);
                prop_assert_eq!(oh.row(r).sum(), 1.0);
            }
            let counts = lv.class_counts();
            for c in 0..5 {
                prop_assert_eq!(oh.column(c).sum(), counts[c] as f64);
            }
        }
    }
}
