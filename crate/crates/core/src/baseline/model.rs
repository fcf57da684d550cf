use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::metrics::{threshold_label, BinaryLabel};

/// Fixed-length real feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.0.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Log-loss (logistic regression).
    Logistic,
    /// Hinge loss (linear SVM).
    Hinge,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Hinge => "hinge",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logistic" => Some(ModelKind::Logistic),
            "hinge" | "svm" => Some(ModelKind::Hinge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub kind: ModelKind,
    /// Inverse regularization strength.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 100.0,
            epochs: 500,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("c must be positive, got {}", self.c)));
        }
        if self.epochs == 0 {
            return Err(ModelError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Per-sample loss and its derivative with respect to the margin `z = w·x + b`.
fn loss_and_slope(kind: ModelKind, label: u8, z: f64) -> (f64, f64) {
    let s = sign(label);
    let t = s * z;
    match kind {
        ModelKind::Logistic => {
            // log(1 + e^{-t}) without overflow
            let loss = if t > 0.0 { (-t).exp().ln_1p() } else { -t + t.exp().ln_1p() };
            (loss, -s * sigmoid(-t))
        }
        ModelKind::Hinge => {
            if t < 1.0 {
                (1.0 - t, -s)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    pub fn zeros(dim: usize, kind: ModelKind, c: f64) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            kind,
            c,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        if x.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// Mean loss plus `(1/c)·½‖w‖²`. The bias is not regularized.
    pub fn objective(&self, xs: &[FeatureVector], ys: &[u8]) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            total += loss_and_slope(self.kind, y, self.margin(x)?).0;
        }
        Ok(total / xs.len() as f64 + self.penalty())
    }

    fn penalty(&self) -> f64 {
        0.5 * self.weights.iter().map(|w| w * w).sum::<f64>() / self.c
    }

    /// Analytic (sub)gradient of [`objective`](Self::objective) as
    /// `(∂/∂w, ∂/∂b)`, summing samples in `order`.
    pub fn gradient_in_order(
        &self,
        xs: &[FeatureVector],
        ys: &[u8],
        order: &[usize],
    ) -> Result<(Vec<f64>, f64), ModelError> {
        let n = xs.len() as f64;
        let mut gw = vec![0.0; self.dim()];
        let mut gb = 0.0;
        for &i in order {
            let slope = loss_and_slope(self.kind, ys[i], self.margin(&xs[i])?).1;
            if slope != 0.0 {
                for (g, v) in gw.iter_mut().zip(&xs[i].0) {
                    *g += slope * v;
                }
                gb += slope;
            }
        }
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + w / self.c;
        }
        Ok((gw, gb / n))
    }

    pub fn gradient(&self, xs: &[FeatureVector], ys: &[u8]) -> Result<(Vec<f64>, f64), ModelError> {
        let order: Vec<usize> = (0..xs.len()).collect();
        self.gradient_in_order(xs, ys, &order)
    }
}

fn check_data(xs: &[FeatureVector], ys: &[u8]) -> Result<usize, ModelError> {
    if xs.len() != ys.len() {
        return Err(ModelError::LengthMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(ModelError::InvalidConfig("need at least 2 samples".into()));
    }
    if let Some(&y) = ys.iter().find(|&&y| y > 1) {
        return Err(ModelError::InvalidConfig(format!("labels must be 0 or 1, got {y}")));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(ModelError::SingleClassData);
    }
    let d = xs[0].dim();
    for x in xs {
        if x.dim() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: x.dim(),
            });
        }
        if x.0.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidConfig("non-finite feature value".into()));
        }
    }
    Ok(d)
}

/// Full-batch gradient descent from zero weights. Returns the model and the
/// objective after each epoch.
pub fn train_traced(
    xs: &[FeatureVector],
    ys: &[u8],
    cfg: &TrainConfig,
    kind: ModelKind,
) -> Result<(LinearModel, Vec<f64>), ModelError> {
    cfg.validate()?;
    let d = check_data(xs, ys)?;
    let mut model = LinearModel::zeros(d, kind, cfg.c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (gw, gb) = model.gradient_in_order(xs, ys, &order)?;
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * g;
        }
        model.bias -= cfg.learning_rate * gb;
        history.push(model.objective(xs, ys)?);
    }
    Ok((model, history))
}

pub fn train(xs: &[FeatureVector], ys: &[u8], cfg: &TrainConfig, kind: ModelKind) -> Result<LinearModel, ModelError> {
    train_traced(xs, ys, cfg, kind).map(|(m, _)| m)
}

/// Confidence in [0, 1]: sigmoid of the margin for logistic models,
/// `0.5·(1 + clamp(margin, −1, 1))` for hinge models.
pub fn predict_score(m: &LinearModel, x: &FeatureVector) -> Result<f64, ModelError> {
    let z = m.margin(x)?;
    Ok(match m.kind {
        ModelKind::Logistic => sigmoid(z),
        ModelKind::Hinge => 0.5 * (1.0 + z.clamp(-1.0, 1.0)),
    })
}

pub const DEFAULT_CLASSIFY_THRESHOLD: f64 = 0.5;

/// `score ≥ threshold` is positive.
pub fn classify(score: f64, threshold: f64) -> Result<BinaryLabel, ModelError> {
    threshold_label(score, threshold).map_err(|_| ModelError::ScoreOutOfRange(score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(v: &[f64]) -> Vec<FeatureVector> {
        v.iter().map(|&x| FeatureVector(vec![x])).collect()
    }

    #[test]
    fn one_dimensional_logistic() {
        let cfg = TrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let m = train(&xs(&[-1.0, 1.0]), &[0, 1], &cfg, ModelKind::Logistic).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(predict_score(&m, &FeatureVector(vec![1.0])).unwrap() > 0.5);
        assert!(predict_score(&m, &FeatureVector(vec![-1.0])).unwrap() < 0.5);
    }

    #[test]
    fn grid_search_agrees_on_sign() {
        // brute-force minimizer of the same objective over a (w, b) grid
        let data = xs(&[-1.0, 1.0]);
        let probe = |w: f64, b: f64| {
            LinearModel {
                weights: vec![w],
                bias: b,
                kind: ModelKind::Logistic,
                c: 100.0,
            }
            .objective(&data, &[0, 1])
            .unwrap()
        };
        let mut best = (f64::INFINITY, 0.0);
        for i in -100..=100 {
            for j in -20..=20 {
                let (w, b) = (i as f64 * 0.1, j as f64 * 0.1);
                let v = probe(w, b);
                if v < best.0 {
                    best = (v, w);
                }
            }
        }
        assert!(best.1 > 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let r = train(&xs(&[1.0, 2.0, 3.0]), &[1, 1, 1], &TrainConfig::default(), ModelKind::Hinge);
        assert!(matches!(r, Err(ModelError::SingleClassData)));
    }

    #[test]
    fn dimension_mismatch() {
        let data = vec![FeatureVector(vec![1.0, 2.0]), FeatureVector(vec![1.0])];
        let r = train(&data, &[0, 1], &TrainConfig::default(), ModelKind::Logistic);
        assert!(matches!(r, Err(ModelError::DimensionMismatch { .. })));
        let m = LinearModel::zeros(2, ModelKind::Logistic, 1.0);
        assert!(predict_score(&m, &FeatureVector(vec![1.0])).is_err());
    }

    #[test]
    fn duplicated_data_same_boundary() {
        let x = xs(&[-2.0, -0.5, 0.3, 1.5, 0.1]);
        let y = [0, 0, 1, 1, 0];
        let cfg = TrainConfig {
            epochs: 300,
            ..Default::default()
        };
        let a = train(&x, &y, &cfg, ModelKind::Logistic).unwrap();
        let x2: Vec<_> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<_> = y.iter().chain(&y).copied().collect();
        let b = train(&x2, &y2, &cfg, ModelKind::Logistic).unwrap();
        assert!((a.weights[0] - b.weights[0]).abs() < 1e-9);
        assert!((a.bias - b.bias).abs() < 1e-9);
    }

    #[test]
    fn zero_model_scores_half() {
        let m = LinearModel::zeros(3, ModelKind::Logistic, 1.0);
        for x in [[0.0, 0.0, 0.0], [5.0, -3.0, 100.0]] {
            assert_eq!(predict_score(&m, &FeatureVector(x.to_vec())).unwrap(), 0.5);
        }
        let h = LinearModel::zeros(1, ModelKind::Hinge, 1.0);
        assert_eq!(predict_score(&h, &FeatureVector(vec![4.0])).unwrap(), 0.5);
    }

    #[test]
    fn hinge_score_mapping() {
        let m = LinearModel {
            weights: vec![1.0],
            bias: 0.0,
            kind: ModelKind::Hinge,
            c: 1.0,
        };
        let s = |x: f64| predict_score(&m, &FeatureVector(vec![x])).unwrap();
        assert_eq!(s(-3.0), 0.0);
        assert_eq!(s(0.5), 0.75);
        assert_eq!(s(2.0), 1.0);
    }

    #[test]
    fn classify_boundary() {
        assert_eq!(classify(0.5, 0.5).unwrap(), BinaryLabel::Positive);
        assert_eq!(classify(0.49, 0.5).unwrap(), BinaryLabel::Negative);
        assert!(matches!(classify(1.5, 0.5), Err(ModelError::ScoreOutOfRange(_))));
    }

    #[test]
    fn stable_logistic_loss() {
        let (l, _) = loss_and_slope(ModelKind::Logistic, 1, -800.0);
        assert!((l - 800.0).abs() < 1e-9);
        let (l, _) = loss_and_slope(ModelKind::Logistic, 1, 800.0);
        assert!(l >= 0.0 && l < 1e-300);
    }
}
