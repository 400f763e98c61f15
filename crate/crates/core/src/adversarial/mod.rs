//! Adversarial debiasing: a one-hidden-layer classifier trained against a
//! logistic adversary that tries to recover the sensitive group from the
//! classifier's logit. The classifier gradient has its component along the
//! adversary gradient removed and is pushed against the adversary by `alpha`.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::Group;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numeric::{dot, sigmoid, softplus, Scalar};
use crate::rng::derived_rng;

mod member;
mod tune;

pub use member::AdvLearner;
pub use tune::{adv_tune, default_adv_grid, AdvTuning, TuneScore};

/// What the adversary sees besides the logit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryInput {
    /// `(logit, y, logit * y)`: targets equalized odds.
    #[default]
    EqualizedOdds,
    /// `logit` only: targets demographic parity.
    DemographicParity,
}

impl AdversaryInput {
    fn width(self) -> usize {
        match self {
            AdversaryInput::EqualizedOdds => 3,
            AdversaryInput::DemographicParity => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_units: usize,
    /// Weight of the adversary gradient in the classifier update.
    pub alpha: f64,
    pub learning_rate: f64,
    /// Learning rate at epoch `t` is `learning_rate / (1 + decay * t)`.
    pub decay: f64,
    pub adversary: AdversaryInput,
    pub seed: u64,
}

impl Default for AdvConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            hidden_units: 16,
            alpha: 1.0,
            learning_rate: 0.1,
            decay: 1.0,
            adversary: AdversaryInput::EqualizedOdds,
            seed: 0,
        }
    }
}

impl AdvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_units == 0 {
            return Err(Error::Config("epochs, batch_size and hidden_units must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.decay >= 0.0) {
            return Err(Error::Config("learning_rate must be > 0 and decay >= 0".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.decay * epoch as f64)
    }
}

/// Classifier and adversary weights.
///
/// Classifier layout: hidden weights (unit-major), hidden biases, output
/// weights, output bias. Adversary layout: input weights, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvModel<F> {
    pub dim: usize,
    pub hidden: usize,
    pub adversary_input: AdversaryInput,
    pub classifier: Vec<F>,
    pub adversary: Vec<F>,
}

struct Forward<F> {
    hidden: Vec<F>,
    logit: F,
}

impl<F: Scalar> AdvModel<F> {
    pub fn zeros(dim: usize, hidden: usize, adversary_input: AdversaryInput) -> Self {
        Self {
            dim,
            hidden,
            adversary_input,
            classifier: vec![F::zero(); hidden * dim + 2 * hidden + 1],
            adversary: vec![F::zero(); adversary_input.width() + 1],
        }
    }

    fn forward(&self, x: &[F]) -> Forward<F> {
        let (d, h) = (self.dim, self.hidden);
        let c = &self.classifier;
        let mut hidden = Vec::with_capacity(h);
        for k in 0..h {
            let z = dot(&c[k * d..(k + 1) * d], x) + c[h * d + k];
            hidden.push(z.tanh());
        }
        let out = &c[h * d + h..h * d + 2 * h];
        let logit = dot(out, &hidden) + c[h * d + 2 * h];
        Forward { hidden, logit }
    }

    pub fn logit(&self, x: &[F]) -> F {
        self.forward(x).logit
    }

    pub fn probability(&self, x: &[F]) -> F {
        sigmoid(self.logit(x))
    }

    fn adversary_features(&self, logit: F, y: bool) -> Vec<F> {
        match self.adversary_input {
            AdversaryInput::EqualizedOdds => {
                let yf = if y { F::one() } else { F::zero() };
                vec![logit, yf, logit * yf]
            }
            AdversaryInput::DemographicParity => vec![logit],
        }
    }

    fn adversary_logit(&self, feats: &[F]) -> F {
        let m = feats.len();
        dot(&self.adversary[..m], feats) + self.adversary[m]
    }

    /// Adversary's probability that the record belongs to group B.
    pub fn adversary_probability(&self, x: &[F], y: bool) -> F {
        let feats = self.adversary_features(self.logit(x), y);
        sigmoid(self.adversary_logit(&feats))
    }

    /// `d logit / d logit-input` for the adversary features.
    fn adversary_dlogit(&self, y: bool) -> F {
        match self.adversary_input {
            AdversaryInput::EqualizedOdds if y => self.adversary[0] + self.adversary[2],
            _ => self.adversary[0],
        }
    }

    /// Accumulates `delta * d logit / d classifier` into `grad`.
    fn backprop(&self, x: &[F], fw: &Forward<F>, delta: F, grad: &mut [F]) {
        let (d, h) = (self.dim, self.hidden);
        let out = &self.classifier[h * d + h..h * d + 2 * h];
        for k in 0..h {
            let hk = fw.hidden[k];
            grad[h * d + h + k] += delta * hk;
            let dz = delta * out[k] * (F::one() - hk * hk);
            for (g, &xj) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *g += dz * xj;
            }
            grad[h * d + k] += dz;
        }
        grad[h * d + 2 * h] += delta;
    }
}

/// Mean prediction and adversary losses over `rows` with all gradients.
#[derive(Debug, Clone)]
pub struct BatchGradients<F> {
    pub prediction_loss: F,
    pub adversary_loss: F,
    /// d prediction loss / d classifier.
    pub prediction: Vec<F>,
    /// d adversary loss / d classifier.
    pub adversary_wrt_classifier: Vec<F>,
    /// d adversary loss / d adversary.
    pub adversary: Vec<F>,
}

/// Binary cross-entropy losses and their gradients on a batch.
pub fn batch_gradients<F: Scalar>(
    model: &AdvModel<F>,
    x: &Matrix<F>,
    y: &[bool],
    a: &[Group],
    rows: &[usize],
) -> BatchGradients<F> {
    let nc = model.classifier.len();
    let na = model.adversary.len();
    let mut g = BatchGradients {
        prediction_loss: F::zero(),
        adversary_loss: F::zero(),
        prediction: vec![F::zero(); nc],
        adversary_wrt_classifier: vec![F::zero(); nc],
        adversary: vec![F::zero(); na],
    };
    for &i in rows {
        let xi = x.row(i);
        let fw = model.forward(xi);
        let s = fw.logit;
        let yf = if y[i] { F::one() } else { F::zero() };
        let af = F::lit(a[i].indicator());
        g.prediction_loss += softplus(s) - yf * s;
        model.backprop(xi, &fw, sigmoid(s) - yf, &mut g.prediction);

        let feats = model.adversary_features(s, y[i]);
        let t = model.adversary_logit(&feats);
        g.adversary_loss += softplus(t) - af * t;
        let dt = sigmoid(t) - af;
        for (gu, &f) in g.adversary.iter_mut().zip(&feats) {
            *gu += dt * f;
        }
        g.adversary[na - 1] += dt;
        model.backprop(xi, &fw, dt * model.adversary_dlogit(y[i]), &mut g.adversary_wrt_classifier);
    }
    let n = F::from_count(rows.len().max(1));
    g.prediction_loss /= n;
    g.adversary_loss /= n;
    for v in g
        .prediction
        .iter_mut()
        .chain(g.adversary_wrt_classifier.iter_mut())
        .chain(g.adversary.iter_mut())
    {
        *v /= n;
    }
    g
}

/// `g_p - proj_{g_a}(g_p) - alpha * g_a`; the projection uses `g_a / max(|g_a|, 1e-8)`.
pub fn debiased_direction<F: Scalar>(g_p: &[F], g_a: &[F], alpha: F) -> Vec<F> {
    let norm = dot(g_a, g_a).sqrt().max(F::lit(1e-8));
    let unit: Vec<F> = g_a.iter().map(|&v| v / norm).collect();
    let along = dot(g_p, &unit);
    g_p.iter()
        .zip(&unit)
        .zip(g_a)
        .map(|((&p, &u), &ga)| p - along * u - alpha * ga)
        .collect()
}

fn check_inputs<F: Scalar>(x: &Matrix<F>, y: &[bool], a: &[Group]) -> Result<()> {
    if y.len() != x.rows() || a.len() != x.rows() {
        return Err(Error::Dimension { expected: x.rows(), got: y.len().min(a.len()) });
    }
    if !(y.contains(&true) && y.contains(&false)) {
        return Err(Error::Training("adversarial training needs both labels".into()));
    }
    if !(a.contains(&Group::A) && a.contains(&Group::B)) {
        return Err(Error::Training("adversarial training needs both groups".into()));
    }
    Ok(())
}

/// Trains classifier and adversary jointly with mini-batch gradient steps.
pub fn adv_train<F: Scalar>(x: &Matrix<F>, y: &[bool], a: &[Group], config: &AdvConfig) -> Result<AdvModel<F>> {
    config.validate()?;
    check_inputs(x, y, a)?;
    let (n, d, h) = (x.rows(), x.cols(), config.hidden_units);
    let mut model = AdvModel::zeros(d, h, config.adversary);
    let mut rng = derived_rng(config.seed, &[0xAD]);
    let w1 = Normal::new(0.0, (1.0 / d.max(1) as f64).sqrt()).expect("valid normal");
    let w2 = Normal::new(0.0, (1.0 / h as f64).sqrt()).expect("valid normal");
    for v in &mut model.classifier[..h * d] {
        *v = F::lit(w1.sample(&mut rng));
    }
    for v in &mut model.classifier[h * d + h..h * d + 2 * h] {
        *v = F::lit(w2.sample(&mut rng));
    }

    let alpha = F::lit(config.alpha);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let lr = F::lit(config.learning_rate_at(epoch));
        order.shuffle(&mut rng);
        for (batch, rows) in order.chunks(config.batch_size).enumerate() {
            let g = batch_gradients(&model, x, y, a, rows);
            if !(g.prediction_loss.is_finite() && g.adversary_loss.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch,
                    prediction_loss: g.prediction_loss.as_f64(),
                    adversary_loss: g.adversary_loss.as_f64(),
                });
            }
            let dir = debiased_direction(&g.prediction, &g.adversary_wrt_classifier, alpha);
            for (w, step) in model.classifier.iter_mut().zip(dir) {
                *w -= lr * step;
            }
            for (u, step) in model.adversary.iter_mut().zip(&g.adversary) {
                *u -= lr * *step;
            }
        }
    }
    Ok(model)
}

pub fn adv_predict<F: Scalar>(model: &AdvModel<F>, x: &[F]) -> Result<F> {
    if x.len() != model.dim {
        return Err(Error::Dimension { expected: model.dim, got: x.len() });
    }
    Ok(model.probability(x))
}

/// Accuracy of the model's own adversary at recovering the group.
pub fn adversary_accuracy<F: Scalar>(model: &AdvModel<F>, x: &Matrix<F>, y: &[bool], a: &[Group]) -> f64 {
    let hits = (0..x.rows())
        .filter(|&i| (model.adversary_probability(x.row(i), y[i]) > F::lit(0.5)) == (a[i] == Group::B))
        .count();
    hits as f64 / x.rows().max(1) as f64
}
