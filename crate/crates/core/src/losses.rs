//! Reference evaluations of the unpaired translation objectives: the
//! cycle-consistent objective (adversarial + cycle + identity) and the
//! patch-contrastive objective (adversarial + PatchNCE on both domains).
//! Values only; no gradients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("zero-norm vector in {0}; cosine similarity undefined")]
    ZeroNorm(&'static str),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_idt: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub temperature: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cyc: 10.0,
            lambda_idt: 5.0,
            lambda_x: 1.0,
            lambda_y: 1.0,
            temperature: 0.07,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let lambdas = [self.lambda_cyc, self.lambda_idt, self.lambda_x, self.lambda_y];
        if !lambdas.iter().all(|l| l.is_finite() && *l >= 0.0) {
            return Err(LossError::InvalidWeights("lambdas must be finite and non-negative".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(LossError::InvalidWeights("temperature must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialForm {
    /// `mean((D(real) − 1)²) + mean(D(fake)²)` on raw discriminator outputs.
    #[default]
    LeastSquares,
    /// Binary cross-entropy on logits: `mean(softplus(−real)) + mean(softplus(fake))`.
    BceWithLogits,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn softplus(x: f64) -> f64 {
    // ln(1 + e^x) without overflow.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn adversarial_loss(d_on_real: &[f64], d_on_fake: &[f64]) -> Result<f64, LossError> {
    adversarial_loss_with(AdversarialForm::LeastSquares, d_on_real, d_on_fake)
}

pub fn adversarial_loss_with(form: AdversarialForm, d_on_real: &[f64], d_on_fake: &[f64]) -> Result<f64, LossError> {
    if d_on_real.is_empty() {
        return Err(LossError::Empty("d_on_real"));
    }
    if d_on_fake.is_empty() {
        return Err(LossError::Empty("d_on_fake"));
    }
    let all = d_on_real.iter().chain(d_on_fake);
    if !all.into_iter().all(|v| v.is_finite()) {
        return Err(LossError::NonFinite("discriminator outputs"));
    }
    Ok(match form {
        AdversarialForm::LeastSquares => {
            mean(&d_on_real.iter().map(|d| (d - 1.0).powi(2)).collect::<Vec<_>>())
                + mean(&d_on_fake.iter().map(|d| d * d).collect::<Vec<_>>())
        }
        AdversarialForm::BceWithLogits => {
            mean(&d_on_real.iter().map(|&d| softplus(-d)).collect::<Vec<_>>())
                + mean(&d_on_fake.iter().map(|&d| softplus(d)).collect::<Vec<_>>())
        }
    })
}

/// Mean absolute difference; used for both the cycle and identity terms.
pub fn l1_consistency(a: &[f64], b: &[f64]) -> Result<f64, LossError> {
    if a.len() != b.len() {
        return Err(LossError::ShapeMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(LossError::Empty("tensor"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub fn cyclegan_total(adv_xy: f64, adv_yx: f64, cyc: f64, idt: f64, w: &LossWeights) -> f64 {
    adv_xy + adv_yx + w.lambda_cyc * cyc + w.lambda_idt * idt
}

pub fn cut_total(adv: f64, nce_x: f64, nce_y: f64, w: &LossWeights) -> f64 {
    adv + w.lambda_x * nce_x + w.lambda_y * nce_y
}

fn normalized(v: &[f64], what: &'static str) -> Result<Vec<f64>, LossError> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(LossError::NonFinite(what));
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(LossError::ZeroNorm(what));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean over queries of `−log softmax(cos/τ)[positive]`, the positive being
/// logit 0 and each query's negatives the rest.
pub fn patch_nce_loss(
    queries: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: &[Vec<Vec<f64>>],
    temperature: f64,
) -> Result<f64, LossError> {
    if queries.is_empty() {
        return Err(LossError::Empty("queries"));
    }
    if positives.len() != queries.len() {
        return Err(LossError::ShapeMismatch { left: queries.len(), right: positives.len() });
    }
    if negatives.len() != queries.len() {
        return Err(LossError::ShapeMismatch { left: queries.len(), right: negatives.len() });
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(LossError::InvalidWeights("temperature must be positive".into()));
    }
    let dim = queries[0].len();
    let check = |v: &Vec<f64>| {
        if v.len() == dim {
            Ok(())
        } else {
            Err(LossError::ShapeMismatch { left: dim, right: v.len() })
        }
    };
    let mut total = 0.0;
    for ((q, p), negs) in queries.iter().zip(positives).zip(negatives) {
        check(q)?;
        check(p)?;
        if negs.is_empty() {
            return Err(LossError::Empty("negatives"));
        }
        let q = normalized(q, "query")?;
        let mut logits = vec![dot(&q, &normalized(p, "positive")?) / temperature];
        for n in negs {
            check(n)?;
            logits.push(dot(&q, &normalized(n, "negative")?) / temperature);
        }
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - logits[0];
    }
    Ok(total / queries.len() as f64)
}

/// Self-describing fixture for cross-implementation checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum LossFixture {
    Adversarial {
        d_on_real: Vec<f64>,
        d_on_fake: Vec<f64>,
        #[serde(default)]
        form: AdversarialForm,
    },
    L1Consistency {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    CycleganTotal {
        adv_xy: f64,
        adv_yx: f64,
        cyc: f64,
        idt: f64,
        #[serde(default)]
        weights: LossWeights,
    },
    PatchNce {
        queries: Vec<Vec<f64>>,
        positives: Vec<Vec<f64>>,
        negatives: Vec<Vec<Vec<f64>>>,
        temperature: Option<f64>,
    },
    CutTotal {
        adv: f64,
        nce_x: f64,
        nce_y: f64,
        #[serde(default)]
        weights: LossWeights,
    },
}

impl LossFixture {
    pub fn name(&self) -> &'static str {
        match self {
            LossFixture::Adversarial { .. } => "adversarial",
            LossFixture::L1Consistency { .. } => "l1_consistency",
            LossFixture::CycleganTotal { .. } => "cyclegan_total",
            LossFixture::PatchNce { .. } => "patch_nce",
            LossFixture::CutTotal { .. } => "cut_total",
        }
    }

    pub fn evaluate(&self) -> Result<f64, LossError> {
        match self {
            LossFixture::Adversarial { d_on_real, d_on_fake, form } => adversarial_loss_with(*form, d_on_real, d_on_fake),
            LossFixture::L1Consistency { a, b } => l1_consistency(a, b),
            LossFixture::CycleganTotal { adv_xy, adv_yx, cyc, idt, weights } => {
                weights.validate()?;
                Ok(cyclegan_total(*adv_xy, *adv_yx, *cyc, *idt, weights))
            }
            LossFixture::PatchNce { queries, positives, negatives, temperature } => patch_nce_loss(
                queries,
                positives,
                negatives,
                temperature.unwrap_or(LossWeights::default().temperature),
            ),
            LossFixture::CutTotal { adv, nce_x, nce_y, weights } => {
                weights.validate()?;
                Ok(cut_total(*adv, *nce_x, *nce_y, weights))
            }
        }
    }
}
