use super::{FeatureStats, MetricsError};
use nalgebra::{DMatrix, SymmetricEigen};

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn clamped_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    // Rounding leaves eigenvalues of a PSD matrix slightly negative or at
    // noise level; both are treated as exact zeros.
    let mut e = SymmetricEigen::new(symmetrized(m));
    let floor = 1e-8 * e.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    e.eigenvalues.iter_mut().for_each(|v| *v = if *v <= floor { 0.0 } else { *v });
    e
}

/// Principal square root of a symmetric positive semi-definite matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = clamped_eigen(m);
    let roots = e.eigenvalues.map(f64::sqrt);
    &e.eigenvectors * DMatrix::from_diagonal(&roots) * e.eigenvectors.transpose()
}

/// `|μa−μb|² + Tr(Σa) + Tr(Σb) − 2·Tr((Σa^½ Σb Σa^½)^½)`, clamped at 0.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64, MetricsError> {
    if a.dim != b.dim || a.mean.len() != b.mean.len() {
        return Err(MetricsError::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let finite = |s: &FeatureStats| s.mean.iter().chain(s.covariance.iter()).all(|v| v.is_finite());
    if !finite(a) || !finite(b) {
        return Err(MetricsError::NonFinite);
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let sa = sqrt_psd(&a.covariance);
    // Tr((Σa^½ Σb Σa^½)^½) is the sum of singular values of Σb^½ Σa^½, which
    // avoids square roots of near-zero eigenvalues in rank-deficient cases.
    let sb = sqrt_psd(&b.covariance);
    let cross: f64 = (&sb * &sa).singular_values().iter().sum();
    let d = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    if !d.is_finite() {
        return Err(MetricsError::NonFinite);
    }
    Ok(d.max(0.0))
}
