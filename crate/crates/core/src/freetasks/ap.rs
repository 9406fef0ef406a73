use crate::{Error, Result};

/// Area under the precision-recall curve, integrated as a step function over
/// the distinct score thresholds. Pairs sharing a score form one rank block
/// and are admitted together, so every positive in the block sees the
/// precision at the block's end.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Data(format!("score {i} is NaN")));
    }
    let npos = positive.iter().filter(|&&p| p).count();
    if npos == 0 || npos == positive.len() {
        return Err(Error::Degenerate(
            "average precision needs at least one positive and one negative pair".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let npos = npos as f64;
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut block_tp = 0;
        while i < order.len() && scores[order[i]] == s {
            block_tp += positive[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        if block_tp > 0 {
            tp += block_tp;
            ap += (block_tp as f64 / npos) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Sweeps every distinct threshold and accumulates recall steps times precision.
    fn threshold_oracle(scores: &[f64], positive: &[bool]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let npos = positive.iter().filter(|&&p| p).count() as f64;
        let mut prev_tp = 0;
        let mut ap = 0.0;
        for t in thresholds {
            let tp = scores.iter().zip(positive).filter(|(&s, &p)| s >= t && p).count();
            let n = scores.iter().filter(|&&s| s >= t).count();
            if tp > prev_tp {
                ap += ((tp - prev_tp) as f64 / npos) * (tp as f64 / n as f64);
            }
            prev_tp = tp;
        }
        ap
    }

    #[test]
    fn examples() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tie_block_shares_precision() {
        // Both items tie: the positive sees precision 1/2.
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(average_precision(&[0.1, 0.2], &[true, true]), Err(Error::Degenerate(_))));
        assert!(matches!(average_precision(&[0.1, 0.2], &[false, false]), Err(Error::Degenerate(_))));
        assert!(matches!(average_precision(&[f64::NAN, 0.2], &[true, false]), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn matches_threshold_oracle(items in prop::collection::vec((0u8..6, any::<bool>()), 2..20)) {
            let scores: Vec<f64> = items.iter().map(|(s, _)| f64::from(*s) / 5.0).collect();
            let pos: Vec<bool> = items.iter().map(|(_, p)| *p).collect();
            prop_assume!(pos.iter().any(|&p| p) && pos.iter().any(|&p| !p));
            prop_assert_eq!(average_precision(&scores, &pos).unwrap(), threshold_oracle(&scores, &pos));
        }

        #[test]
        fn invariant_to_monotone_transform(items in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..30)) {
            let scores: Vec<f64> = items.iter().map(|(s, _)| *s).collect();
            let pos: Vec<bool> = items.iter().map(|(_, p)| *p).collect();
            prop_assume!(pos.iter().any(|&p| p) && pos.iter().any(|&p| !p));
            let warped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 - 1.0).collect();
            prop_assert_eq!(average_precision(&scores, &pos).unwrap(), average_precision(&warped, &pos).unwrap());
        }
    }
}
