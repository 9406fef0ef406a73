use crate::{Error, Result};

/// Unit-cost Levenshtein distance between token sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word error rate: edit distance over the reference length.
pub fn wer<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Parameter("WER needs a non-empty reference".into()));
    }
    let h: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    Ok(edit_distance(&h, &r) as f64 / r.len() as f64)
}

fn contains_run<S: AsRef<str>>(hay: &[S], needle: &[S]) -> bool {
    !needle.is_empty()
        && hay
            .windows(needle.len())
            .any(|w| w.iter().zip(needle).all(|(a, b)| a.as_ref() == b.as_ref()))
}

/// Fraction of reference entity phrases found as contiguous token runs in the
/// matching hypothesis transcript.
pub fn ne_accuracy<S: AsRef<str>>(hyp: &[Vec<S>], phrases: &[Vec<Vec<S>>]) -> f64 {
    let (mut found, mut total) = (0usize, 0usize);
    for (h, ps) in hyp.iter().zip(phrases) {
        for p in ps {
            total += 1;
            found += usize::from(contains_run(h, p));
        }
    }
    if total == 0 {
        0.0
    } else {
        found as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer(&toks("a b c"), &toks("a b c")).unwrap(), 0.0);
        assert_eq!(wer(&toks(""), &toks("a b c d e")).unwrap(), 1.0);
        assert!((wer(&toks("a x c d"), &toks("a b c")).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(wer(&toks("a"), &toks("")), Err(Error::Parameter(_))));
    }

    #[test]
    fn accuracy_examples() {
        let hyp = vec![toks("i flew to new york on monday")];
        let found = vec![vec![toks("new york")]];
        assert_eq!(ne_accuracy(&hyp, &found), 1.0);
        let swapped = vec![vec![toks("york new")]];
        assert_eq!(ne_accuracy(&hyp, &swapped), 0.0);
        let four = vec![vec![toks("new york"), toks("monday"), toks("i flew"), toks("paris")]];
        assert_eq!(ne_accuracy(&hyp, &four), 0.75);
    }

    fn arb_tokens() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..4, 0..8)
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in arb_tokens(), b in arb_tokens(), c in arb_tokens()) {
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        }
    }
}
