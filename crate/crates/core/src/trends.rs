//! Layer-wise score curves, correlations between them, and plot-ready exports.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::Shape(format!("need at least 3 points, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in correlation input".into()));
    }
    Ok(())
}

fn pearson_unchecked(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    pearson_unchecked(a, b)
}

/// 1-based ranks; tied values share the average of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    pearson_unchecked(&average_ranks(a), &average_ranks(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub model_id: String,
    pub metric_id: String,
    pub layers: Vec<usize>,
    pub scores: Vec<f64>,
    /// Max minus min across sample sets, per layer.
    pub spread: Vec<f64>,
}

impl LayerCurve {
    pub fn new(
        model_id: impl Into<String>,
        metric_id: impl Into<String>,
        layers: Vec<usize>,
        scores: Vec<f64>,
        spread: Vec<f64>,
    ) -> Result<Self> {
        if layers.len() != scores.len() || spread.len() != scores.len() {
            return Err(Error::Shape("layers, scores and spread lengths differ".into()));
        }
        if layers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("layer indices must be strictly increasing".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("curve scores must be finite".into()));
        }
        Ok(Self {
            model_id: model_id.into(),
            metric_id: metric_id.into(),
            layers,
            scores,
            spread,
        })
    }

    /// Curve without spread information.
    pub fn from_scores(
        model_id: impl Into<String>,
        metric_id: impl Into<String>,
        layers: Vec<usize>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        let spread = vec![0.0; scores.len()];
        Self::new(model_id, metric_id, layers, scores, spread)
    }

    /// Keeps only the listed layers (which must all be present).
    pub fn restrict(&self, layers: &[usize]) -> Result<Self> {
        let mut idx = Vec::with_capacity(layers.len());
        for l in layers {
            idx.push(self.layers.binary_search(l).map_err(|_| {
                Error::Data(format!("curve {} has no layer {l}", self.metric_id))
            })?);
        }
        Ok(Self {
            model_id: self.model_id.clone(),
            metric_id: self.metric_id.clone(),
            layers: layers.to_vec(),
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
            spread: idx.iter().map(|&i| self.spread[i]).collect(),
        })
    }
}

/// Layers present in every curve, ascending.
pub fn intersect_layers(curves: &[&LayerCurve]) -> Vec<usize> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    first
        .layers
        .iter()
        .copied()
        .filter(|l| curves[1..].iter().all(|c| c.layers.binary_search(l).is_ok()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<String>,
    pub layers: Vec<usize>,
    /// `None` where the correlation is undefined.
    pub pearson: Vec<Vec<Option<f64>>>,
    pub spearman: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "metrics": self.metrics,
            "pearson": self.pearson,
            "spearman": self.spearman,
        });
        serde_json::to_string_pretty(&v).expect("matrix serializes")
    }

    /// Gnuplot `matrix` block per coefficient, separated by two blank lines.
    pub fn to_gnuplot(&self) -> String {
        let mut out = String::new();
        for (name, m) in [("pearson", &self.pearson), ("spearman", &self.spearman)] {
            let _ = writeln!(out, "# {name}: {}", self.metrics.join(" "));
            for row in m {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| c.map_or_else(|| "NaN".to_string(), |v| format!("{v:.6}")))
                    .collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
            out.push_str("\n\n");
        }
        out
    }
}

/// Pairwise Pearson and Spearman correlations over the shared layer set.
pub fn curve_correlation_matrix(curves: &[LayerCurve]) -> Result<CorrelationMatrix> {
    let refs: Vec<&LayerCurve> = curves.iter().collect();
    let layers = intersect_layers(&refs);
    if layers.len() < 3 {
        return Err(Error::Shape(format!(
            "curves share {} layers; at least 3 are needed",
            layers.len()
        )));
    }
    let restricted = curves
        .iter()
        .map(|c| c.restrict(&layers))
        .collect::<Result<Vec<_>>>()?;
    let n = curves.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<(Option<f64>, Option<f64>)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&restricted[i].scores, &restricted[j].scores);
            (pearson(a, b).ok(), spearman(a, b).ok())
        })
        .collect();
    let mut p = vec![vec![None; n]; n];
    let mut s = vec![vec![None; n]; n];
    for i in 0..n {
        p[i][i] = Some(1.0);
        s[i][i] = Some(1.0);
    }
    for (&(i, j), &(pv, sv)) in cells.iter().zip(&values) {
        p[i][j] = pv;
        p[j][i] = pv;
        s[i][j] = sv;
        s[j][i] = sv;
    }
    Ok(CorrelationMatrix {
        metrics: curves.iter().map(|c| c.metric_id.clone()).collect(),
        layers,
        pearson: p,
        spearman: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterTransform {
    #[default]
    None,
    /// `1 - x`, for distances in [0, 1].
    OneMinus,
    /// `1 - x/2`, for distances in [0, 2].
    OneMinusHalf,
}

impl ScatterTransform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ScatterTransform::None => x,
            ScatterTransform::OneMinus => 1.0 - x,
            ScatterTransform::OneMinusHalf => 1.0 - x / 2.0,
        }
    }
}

impl fmt::Display for ScatterTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScatterTransform::None => "none",
            ScatterTransform::OneMinus => "one-minus",
            ScatterTransform::OneMinusHalf => "one-minus-half",
        })
    }
}

impl FromStr for ScatterTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ScatterTransform::None),
            "one-minus" => Ok(ScatterTransform::OneMinus),
            "one-minus-half" => Ok(ScatterTransform::OneMinusHalf),
            _ => Err(Error::Parameter(format!("unknown scatter transform {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub layer: usize,
    pub x: f64,
    pub y: f64,
    pub model: String,
}

/// One row per shared layer, with `transform` applied to the x curve.
pub fn export_scatter(
    curve_x: &LayerCurve,
    curve_y: &LayerCurve,
    transform: ScatterTransform,
) -> Result<Vec<ScatterRow>> {
    let layers = intersect_layers(&[curve_x, curve_y]);
    let cx = curve_x.restrict(&layers)?;
    let cy = curve_y.restrict(&layers)?;
    Ok(layers
        .iter()
        .enumerate()
        .map(|(i, &layer)| ScatterRow {
            layer,
            x: transform.apply(cx.scores[i]),
            y: cy.scores[i],
            model: curve_x.model_id.clone(),
        })
        .collect())
}

pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("layer,x,y,model\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.layer, r.x, r.y, r.model);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_eq!(pearson(&a, &b).unwrap(), 1.0);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(pearson(&a, &neg).unwrap(), -1.0);
        assert!((pearson(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let cubed: Vec<f64> = a.iter().map(|x: &f64| x.powi(3)).collect();
        assert_eq!(spearman(&a, &cubed).unwrap(), 1.0);
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert_eq!(spearman(&a, &rev).unwrap(), -1.0);
        // Ranks [1, 2.5, 2.5, 4] vs [1, 2, 3, 4]: deviations [-1.5, 0, 0, 1.5] and
        // [-1.5, -0.5, 0.5, 1.5]; r = 4.5 / sqrt(4.5 * 5).
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn undefined_and_short() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    fn curve(metric: &str, layers: Vec<usize>, scores: Vec<f64>) -> LayerCurve {
        LayerCurve::from_scores("m", metric, layers, scores).unwrap()
    }

    #[test]
    fn matrix_basics() {
        let a = curve("a", vec![0, 1, 2, 3], vec![0.1, 0.2, 0.3, 0.5]);
        let b = curve("b", vec![0, 1, 2, 3], vec![0.1, 0.2, 0.3, 0.5]);
        let c = curve("c", vec![0, 1, 2, 3], vec![0.5, 0.3, 0.2, 0.1]);
        let flat = curve("flat", vec![0, 1, 2, 3], vec![1.0; 4]);
        let m = curve_correlation_matrix(&[a, b, c, flat]).unwrap();
        assert_eq!(m.pearson[0][1], Some(1.0));
        assert_eq!(m.spearman[0][2], Some(-1.0));
        assert_eq!(m.pearson[0][3], None);
        assert_eq!(m.pearson[3][3], Some(1.0));
        assert!(m.to_json().contains("null"));
        assert!(m.to_gnuplot().contains("NaN"));
    }

    #[test]
    fn intersection_of_layers() {
        let base = curve("base", (0..13).collect(), (0..13).map(|i| i as f64).collect());
        let large = curve("large", (0..25).step_by(2).collect(), (0..13).map(|i| (i * i) as f64).collect());
        let m = curve_correlation_matrix(&[base, large]).unwrap();
        assert_eq!(m.layers, vec![0, 2, 4, 6, 8, 10, 12]);
        assert_eq!(m.spearman[0][1], Some(1.0));
    }

    #[test]
    fn curve_validation() {
        assert!(LayerCurve::from_scores("m", "x", vec![0, 0, 1], vec![1.0, 2.0, 3.0]).is_err());
        assert!(LayerCurve::from_scores("m", "x", vec![0, 1], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn scatter_transforms() {
        let x = curve("cka", vec![0, 1, 2], vec![0.3, 2.0, 0.123456789]);
        let y = curve("task", vec![0, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0]);
        let rows = export_scatter(&x, &y, ScatterTransform::OneMinus).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].x - 0.7).abs() < 1e-15);
        assert_eq!(export_scatter(&x, &y, ScatterTransform::OneMinusHalf).unwrap()[1].x, 0.0);
        assert_eq!(export_scatter(&x, &y, ScatterTransform::None).unwrap()[2].x, 0.123456789);
        assert!(scatter_csv(&rows).starts_with("layer,x,y,model\n0,"));
    }

    proptest! {
        #[test]
        fn spearman_monotone_invariant(v in prop::collection::vec(-10.0f64..10.0, 3..20), w in prop::collection::vec(-10.0f64..10.0, 3..20)) {
            let n = v.len().min(w.len());
            let (a, b) = (&v[..n], &w[..n]);
            if let Ok(r) = spearman(a, b) {
                let warped: Vec<f64> = a.iter().map(|x| x * 3.0 + 7.0).collect();
                prop_assert_eq!(spearman(&warped, b).unwrap(), r);
            }
        }

        #[test]
        fn matrix_symmetric(s in prop::collection::vec(0.0f64..1.0, 15)) {
            let curves: Vec<LayerCurve> = s.chunks(5).enumerate()
                .map(|(i, c)| curve(&i.to_string(), (0..5).collect(), c.to_vec()))
                .collect();
            let m = curve_correlation_matrix(&curves).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(m.pearson[i][j], m.pearson[j][i]);
                    prop_assert_eq!(m.spearman[i][j], m.spearman[j][i]);
                }
            }
        }
    }
}
