use super::MetricsError;
use crate::anatomy::Label;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// `2|a∩b| / (|a|+|b|)`; two empty masks score 1.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ShapeMismatch { left: a.len(), right: b.len() });
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Dice of one label between two label masks.
pub fn dice_label(pred: &[Label], truth: &[Label], label: Label) -> Result<f64, MetricsError> {
    let a: Vec<bool> = pred.iter().map(|&l| l == label).collect();
    let b: Vec<bool> = truth.iter().map(|&l| l == label).collect();
    dice(&a, &b)
}

/// Mean Dice over `labels`, or over every nonzero label present in either
/// mask when `labels` is empty. Two all-background masks score 1.
pub fn mean_dice(pred: &[Label], truth: &[Label], labels: &[Label]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch { left: pred.len(), right: truth.len() });
    }
    let chosen: Vec<Label> = if labels.is_empty() {
        let mut all: Vec<Label> = pred.iter().chain(truth).copied().filter(|&l| l != 0).collect();
        all.sort_unstable();
        all.dedup();
        all
    } else {
        labels.to_vec()
    };
    if chosen.is_empty() {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    for &l in &chosen {
        sum += dice_label(pred, truth, l)?;
    }
    Ok(sum / chosen.len() as f64)
}

pub fn delta_metric(augmented: f64, baseline: f64) -> f64 {
    augmented - baseline
}

/// Rounds half away from zero to one decimal place.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Scores ×100 by synthetic source (rows) and real subset (columns), with
/// a delta row under every non-baseline source. Cells and deltas are at
/// one decimal place; deltas use the rounded cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceTable {
    pub columns: Vec<String>,
    pub baseline: String,
    pub rows: Vec<DiceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceRow {
    pub source: String,
    pub scores: Vec<Option<f64>>,
    pub deltas: Option<Vec<Option<f64>>>,
}

impl DiceTable {
    /// `scores` maps `(source, column)` to a mean Dice ×100.
    pub fn build(
        sources: &[String],
        columns: &[String],
        baseline: &str,
        scores: &BTreeMap<(String, String), f64>,
    ) -> Self {
        let cell = |s: &str, c: &str| scores.get(&(s.to_string(), c.to_string())).map(|&v| round1(v));
        let base: Vec<Option<f64>> = columns.iter().map(|c| cell(baseline, c)).collect();
        let rows = sources
            .iter()
            .map(|s| {
                let vals: Vec<Option<f64>> = columns.iter().map(|c| cell(s, c)).collect();
                let deltas = (s != baseline).then(|| {
                    vals.iter()
                        .zip(&base)
                        .map(|(v, b)| Some(round1(delta_metric((*v)?, (*b)?))))
                        .collect()
                });
                DiceRow { source: s.clone(), scores: vals, deltas }
            })
            .collect();
        Self {
            columns: columns.to_vec(),
            baseline: baseline.to_string(),
            rows,
        }
    }

    pub fn delta(&self, source: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.source == source)?.deltas.as_ref()?[c]
    }

    pub fn render(&self) -> String {
        let width = 8;
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "");
        for c in &self.columns {
            let _ = write!(out, "{c:>width$}");
        }
        out.push('\n');
        let fmt = |v: &Option<f64>, signed: bool| match v {
            Some(v) if signed => format!("{v:+.1}"),
            Some(v) => format!("{v:.1}"),
            None => "-".to_string(),
        };
        for r in &self.rows {
            let _ = write!(out, "{:<width$}", r.source);
            for v in &r.scores {
                let _ = write!(out, "{:>width$}", fmt(v, false));
            }
            out.push('\n');
            if let Some(d) = &r.deltas {
                let _ = write!(out, "{:<width$}", format!("d_{}", r.source));
                for v in d {
                    let _ = write!(out, "{:>width$}", fmt(v, true));
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dice_examples() {
        let a = [true, true, true, true, false, false];
        let b = [false, false, true, true, true, true];
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&[true, false], &[false, true]).unwrap(), 0.0);
        assert_eq!(dice(&[false; 3], &[false; 3]).unwrap(), 1.0);
        assert_eq!(dice(&[false; 3], &[true, false, false]).unwrap(), 0.0);
        assert!(dice(&[true], &[true, false]).is_err());
    }

    #[test]
    fn mean_dice_over_present_labels() {
        let truth = [0, 1, 1, 2, 2];
        let pred = [0, 1, 1, 0, 0];
        assert_eq!(mean_dice(&pred, &truth, &[]).unwrap(), 0.5);
        assert_eq!(mean_dice(&pred, &truth, &[1]).unwrap(), 1.0);
        assert_eq!(mean_dice(&[0, 0], &[0, 0], &[]).unwrap(), 1.0);
    }

    #[test]
    fn table_deltas() {
        let cols: Vec<String> = ["none", "r80"].map(String::from).to_vec();
        let srcs: Vec<String> = ["none", "cut"].map(String::from).to_vec();
        let mut s = BTreeMap::new();
        s.insert(("none".into(), "r80".into()), 53.54);
        s.insert(("cut".into(), "r80".into()), 63.61);
        s.insert(("cut".into(), "none".into()), 34.9);
        let t = DiceTable::build(&srcs, &cols, "none", &s);
        assert_eq!(t.delta("cut", "r80"), Some(10.1));
        assert_eq!(t.delta("cut", "none"), None);
        assert!(t.render().contains("+10.1"));
    }
}
