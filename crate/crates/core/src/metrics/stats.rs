use super::MetricsError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Gaussian summary of a feature set: sample mean and unbiased covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub dim: usize,
    pub count: u64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl FeatureStats {
    /// Builds stats directly from parameters, e.g. for closed-form fixtures.
    pub fn from_parts(mean: DVector<f64>, covariance: DMatrix<f64>, count: u64) -> Result<Self, MetricsError> {
        let dim = mean.len();
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(MetricsError::DimensionMismatch {
                expected: dim,
                found: covariance.nrows().max(covariance.ncols()),
            });
        }
        if count < 2 {
            return Err(MetricsError::TooFewSamples(count as usize));
        }
        Ok(Self {
            dim,
            count,
            mean,
            covariance,
        })
    }
}

/// Single-pass Welford accumulator; partial accumulators merge exactly
/// (Chan et al. pairwise update), so sharded streams can be reduced in any
/// grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    count: u64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) -> Result<(), MetricsError> {
        if x.len() != self.dim() {
            return Err(MetricsError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        let x = DVector::from_column_slice(x);
        self.count += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.m2.ger(1.0, &delta, &delta2, 1.0);
        Ok(())
    }

    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<(), MetricsError> {
        if other.dim() != self.dim() {
            return Err(MetricsError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        self.m2 += &other.m2;
        self.m2.ger(na * nb / n, &delta, &delta, 1.0);
        self.mean += &delta * (nb / n);
        self.count += other.count;
        Ok(())
    }

    pub fn finish(&self) -> Result<FeatureStats, MetricsError> {
        if self.count < 2 {
            return Err(MetricsError::TooFewSamples(self.count as usize));
        }
        let mut cov = &self.m2 / (self.count as f64 - 1.0);
        // Exact symmetry regardless of rounding in the rank-one updates.
        let t = cov.transpose();
        cov = (cov + t) * 0.5;
        Ok(FeatureStats {
            dim: self.dim(),
            count: self.count,
            mean: self.mean.clone(),
            covariance: cov,
        })
    }
}

pub fn accumulate_stats<'a, I>(features: I) -> Result<FeatureStats, MetricsError>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = features.into_iter().peekable();
    let dim = iter.peek().map(|v| v.len()).ok_or(MetricsError::TooFewSamples(0))?;
    let mut acc = StatsAccumulator::new(dim);
    for v in iter {
        acc.push(v)?;
    }
    acc.finish()
}

/// Feature table: one row per image, `image_id` then the feature columns.
/// A header row is skipped when its second field is not numeric.
pub fn read_feature_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| MetricsError::Input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut dim = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| MetricsError::Input(format!("{}: {e}", path.display())))?;
        if rec.len() < 2 {
            return Err(MetricsError::Input(format!(
                "{} row {}: need an id and at least one feature",
                path.display(),
                i + 1
            )));
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().skip(1).map(|f| f.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(MetricsError::Input(format!("{} row {}: {e}", path.display(), i + 1)));
            }
        };
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(MetricsError::DimensionMismatch {
                    expected: d,
                    found: values.len(),
                })
            }
            _ => {}
        }
        rows.push((rec[0].trim().to_string(), values));
    }
    Ok(rows)
}

pub fn write_feature_csv(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<(), MetricsError> {
    let io = |e: csv::Error| MetricsError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    if let Some((_, first)) = rows.first() {
        let mut header = vec!["image_id".to_string()];
        header.extend((0..first.len()).map(|i| format!("f{i}")));
        w.write_record(&header).map_err(io)?;
    }
    for (id, values) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(values.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| MetricsError::Input(format!("{}: {e}", path.display())))
}
