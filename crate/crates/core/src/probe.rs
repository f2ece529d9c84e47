//! L2-regularized multinomial linear probes.
//!
//! The training objective is the mean multinomial cross-entropy plus
//! `(lambda / 2) * ||W||_F^2`; the bias is not penalized. Optimization is
//! full-batch gradient descent from the zero point, with Barzilai-Borwein
//! trial steps safeguarded by non-monotone Armijo backtracking (the
//! sufficient-decrease reference is the worst of the last few accepted losses).

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fvec_io::{split, FeatureDataset};

/// Seven log-spaced strengths from `1e-4` to `1e2`.
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbeJson", into = "ProbeJson")]
pub struct ProbeModel {
    /// `d x C`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub lambda: f64,
    /// Iterations used by the optimizer (0 for models not produced by training).
    pub iterations: usize,
    /// False when training stopped at `max_iter` or a stalled line search
    /// before reaching the gradient tolerance.
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct ProbeJson {
    d: usize,
    #[serde(rename = "C")]
    c: usize,
    lambda: f64,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<ProbeModel> for ProbeJson {
    fn from(m: ProbeModel) -> Self {
        ProbeJson {
            d: m.d(),
            c: m.n_classes(),
            lambda: m.lambda,
            weights: m.weights.iter().copied().collect(),
            bias: m.bias.to_vec(),
        }
    }
}

impl TryFrom<ProbeJson> for ProbeModel {
    type Error = String;

    fn try_from(j: ProbeJson) -> std::result::Result<Self, String> {
        if j.bias.len() != j.c {
            return Err(format!("bias has {} entries, C = {}", j.bias.len(), j.c));
        }
        let weights = Array2::from_shape_vec((j.d, j.c), j.weights).map_err(|e| e.to_string())?;
        ProbeModel::new(weights, Array1::from(j.bias), j.lambda).map_err(|e| e.to_string())
    }
}

impl ProbeModel {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, lambda: f64) -> Result<Self> {
        if weights.ncols() != bias.len() {
            return Err(Error::Contract(format!(
                "weights have {} classes, bias has {}",
                weights.ncols(),
                bias.len()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Contract(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite probe parameter".into()));
        }
        Ok(ProbeModel {
            weights,
            bias,
            lambda,
            iterations: 0,
            converged: true,
        })
    }

    pub fn zeros(d: usize, n_classes: usize, lambda: f64) -> Self {
        ProbeModel {
            weights: Array2::zeros((d, n_classes)),
            bias: Array1::zeros(n_classes),
            lambda,
            iterations: 0,
            converged: true,
        }
    }

    pub fn d(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.ncols()
    }

    fn check_dataset(&self, ds: &FeatureDataset) -> Result<()> {
        if ds.d() != self.d() {
            return Err(Error::Contract(format!(
                "probe expects {} features, dataset `{}` has {}",
                self.d(),
                ds.name(),
                ds.d()
            )));
        }
        if ds.n_classes() > self.n_classes() {
            return Err(Error::Contract(format!(
                "probe has {} classes, dataset `{}` has {}",
                self.n_classes(),
                ds.name(),
                ds.n_classes()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Kept for interface stability; training starts from zero parameters.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grad_tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "grad_tol must be > 0 and max_iter >= 1 (got {}, {})",
                self.grad_tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Gradient of the objective with respect to the probe parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ProbeGrad {
    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn dot(&self, other: &ProbeGrad) -> f64 {
        let w: f64 = self.weights.iter().zip(other.weights.iter()).map(|(a, b)| a * b).sum();
        let b: f64 = self.bias.iter().zip(other.bias.iter()).map(|(a, b)| a * b).sum();
        w + b
    }
}

/// Logits for one row, skipping zero features (one-hot inputs are common).
fn row_logits(x: ndarray::ArrayView1<'_, f64>, weights: &Array2<f64>, bias: &Array1<f64>, out: &mut [f64]) {
    out.copy_from_slice(bias.as_slice().expect("contiguous bias"));
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (o, &w) in out.iter_mut().zip(weights.row(j)) {
                *o += xj * w;
            }
        }
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

fn objective(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    lambda: f64,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    grad: Option<&mut ProbeGrad>,
) -> f64 {
    let n = features.nrows();
    let c = bias.len();
    let mut z = vec![0.0; c];
    let mut ce = 0.0;
    let mut grad = grad;
    if let Some(g) = grad.as_deref_mut() {
        g.weights.fill(0.0);
        g.bias.fill(0.0);
    }
    for (x, &y) in features.rows().into_iter().zip(labels) {
        row_logits(x, weights, bias, &mut z);
        let lse = log_sum_exp(&z);
        ce += lse - z[y];
        if let Some(g) = grad.as_deref_mut() {
            // z becomes p - onehot(y)
            for v in z.iter_mut() {
                *v = (*v - lse).exp();
            }
            z[y] -= 1.0;
            for (gb, &r) in g.bias.iter_mut().zip(&z) {
                *gb += r;
            }
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    for (gw, &r) in g.weights.row_mut(j).iter_mut().zip(&z) {
                        *gw += xj * r;
                    }
                }
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    let sq_norm: f64 = weights.iter().map(|w| w * w).sum();
    if let Some(g) = grad {
        g.bias.mapv_inplace(|v| v * inv_n);
        g.weights.zip_mut_with(weights, |gw, &w| *gw = *gw * inv_n + lambda * w);
    }
    ce * inv_n + 0.5 * lambda * sq_norm
}

/// Regularized mean cross-entropy and its analytic gradient.
pub fn loss_and_grad(model: &ProbeModel, ds: &FeatureDataset) -> Result<(f64, ProbeGrad)> {
    model.check_dataset(ds)?;
    let mut grad = ProbeGrad {
        weights: Array2::zeros(model.weights.raw_dim()),
        bias: Array1::zeros(model.n_classes()),
    };
    let loss = objective(
        &model.weights,
        &model.bias,
        model.lambda,
        ds.features(),
        ds.labels(),
        Some(&mut grad),
    );
    Ok((loss, grad))
}

/// Mean cross-entropy without the penalty term.
pub fn cross_entropy(model: &ProbeModel, ds: &FeatureDataset) -> Result<f64> {
    model.check_dataset(ds)?;
    Ok(objective(&model.weights, &model.bias, 0.0, ds.features(), ds.labels(), None))
}

/// Fits a probe on `train` from zero initialization.
pub fn train_probe(train: &FeatureDataset, lambda: f64, cfg: &TrainConfig) -> Result<ProbeModel> {
    cfg.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    const ARMIJO: f64 = 1e-4;
    const MAX_BACKTRACK: usize = 60;
    const MEMORY: usize = 10;

    let (d, c) = (train.d(), train.n_classes());
    let feats = train.features();
    let labels = train.labels();
    let mut model = ProbeModel::zeros(d, c, lambda);
    let mut grad = ProbeGrad {
        weights: Array2::zeros((d, c)),
        bias: Array1::zeros(c),
    };
    let mut loss = objective(&model.weights, &model.bias, lambda, feats, labels, Some(&mut grad));
    if !loss.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }

    let mut history = std::collections::VecDeque::with_capacity(MEMORY);
    history.push_back(loss);
    let mut trial_grad = grad.clone();
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..cfg.max_iter {
        if grad.max_abs() <= cfg.grad_tol {
            converged = true;
            break;
        }
        iterations = iter + 1;
        let g_sq = grad.dot(&grad);
        let reference = history.iter().fold(f64::NEG_INFINITY, |m: f64, &v| m.max(v));
        let mut t = step;
        let mut accepted = None;
        let mut saw_non_finite = false;
        for _ in 0..MAX_BACKTRACK {
            let w = &model.weights - &(&grad.weights * t);
            let b = &model.bias - &(&grad.bias * t);
            let f = objective(&w, &b, lambda, feats, labels, Some(&mut trial_grad));
            if f.is_finite() && f <= reference - ARMIJO * t * g_sq {
                accepted = Some((w, b, f));
                break;
            }
            saw_non_finite |= !f.is_finite();
            t *= 0.5;
        }
        let Some((w, b, f)) = accepted else {
            if saw_non_finite {
                return Err(Error::NonFinite { iteration: iter + 1 });
            }
            // No further decrease is representable.
            break;
        };

        // Barzilai-Borwein step for the next trial: s.s / s.y
        let s_sq = t * t * g_sq;
        let s_dot_y = -t * (trial_grad.dot(&grad) - g_sq);
        step = if s_dot_y > 0.0 { (s_sq / s_dot_y).clamp(1e-10, 1e10) } else { t * 2.0 };

        model.weights = w;
        model.bias = b;
        loss = f;
        if history.len() == MEMORY {
            history.pop_front();
        }
        history.push_back(loss);
        std::mem::swap(&mut grad, &mut trial_grad);
    }
    if !converged && grad.max_abs() <= cfg.grad_tol {
        converged = true;
    }
    if !converged {
        log::debug!(
            "probe on `{}` (lambda = {lambda}) stopped after {iterations} iterations with |grad|_inf = {:.3e}",
            train.name(),
            grad.max_abs()
        );
    }
    model.iterations = iterations;
    model.converged = converged;
    Ok(model)
}

/// Argmax of the logits per row; ties go to the lowest class index.
pub fn predict(model: &ProbeModel, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if features.ncols() != model.d() {
        return Err(Error::Contract(format!(
            "probe expects {} features, got {}",
            model.d(),
            features.ncols()
        )));
    }
    let mut z = vec![0.0; model.n_classes()];
    Ok(features
        .rows()
        .into_iter()
        .map(|x| {
            row_logits(x, &model.weights, &model.bias, &mut z);
            argmax(&z)
        })
        .collect())
}

pub(crate) fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = k;
        }
    }
    best
}

pub fn zero_one_risk(model: &ProbeModel, ds: &FeatureDataset) -> Result<f64> {
    model.check_dataset(ds)?;
    zero_one_risk_rows(model, ds.features(), ds.labels())
}

pub fn zero_one_risk_rows(
    model: &ProbeModel,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Contract("empty evaluation set".into()));
    }
    let pred = predict(model, features)?;
    let wrong = pred.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_lambda: f64,
    /// `(lambda, validation risk)` for every grid point, in grid order.
    pub val_risks: Vec<(f64, f64)>,
    pub model: ProbeModel,
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    if grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Config("lambda grid must be strictly positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("lambda grid must be sorted ascending".into()));
    }
    Ok(())
}

/// Fits one probe per grid point on `train` and keeps the one with the
/// lowest validation 0-1 risk (ties go to the smaller lambda). With
/// `refit_on_union`, the chosen strength is refit on `train ∪ val`.
pub fn tune_lambda(
    train: &FeatureDataset,
    val: &FeatureDataset,
    grid: &[f64],
    cfg: &TrainConfig,
    refit_on_union: bool,
) -> Result<TuneResult> {
    validate_grid(grid)?;
    let fits: Vec<Result<(ProbeModel, f64)>> = grid
        .par_iter()
        .map(|&lambda| {
            let tag = |e| Error::Tuning {
                lambda,
                source: Box::new(e),
            };
            let model = train_probe(train, lambda, cfg).map_err(tag)?;
            let risk = zero_one_risk(&model, val).map_err(tag)?;
            Ok((model, risk))
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut models = Vec::with_capacity(grid.len());
    let mut val_risks = Vec::with_capacity(grid.len());
    for (i, fit) in fits.into_iter().enumerate() {
        let (model, risk) = fit?;
        if best.is_none_or(|(_, r)| risk < r) {
            best = Some((i, risk));
        }
        val_risks.push((grid[i], risk));
        models.push(model);
    }
    let (idx, _) = best.expect("non-empty grid");
    let best_lambda = grid[idx];
    let model = if refit_on_union {
        let union = train.concat(val)?;
        train_probe(&union, best_lambda, cfg).map_err(|e| Error::Tuning {
            lambda: best_lambda,
            source: Box::new(e),
        })?
    } else {
        models.swap_remove(idx)
    };
    Ok(TuneResult {
        best_lambda,
        val_risks,
        model,
    })
}

/// How the regularization strength of a probe is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed(f64),
    /// Hold out a stratified `val_fraction` slice of the training set, pick
    /// the best grid point on it, then refit on the whole training set.
    Tune {
        grid: Vec<f64>,
        val_fraction: f64,
        seed: u64,
    },
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Tune {
            grid: DEFAULT_LAMBDA_GRID.to_vec(),
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl LambdaPolicy {
    /// Fits a probe on `train` according to the policy.
    pub fn fit(&self, train: &FeatureDataset, cfg: &TrainConfig) -> Result<ProbeModel> {
        match self {
            LambdaPolicy::Fixed(lambda) => train_probe(train, *lambda, cfg),
            LambdaPolicy::Tune {
                grid,
                val_fraction,
                seed,
            } => {
                validate_grid(grid)?;
                if grid.len() == 1 {
                    return train_probe(train, grid[0], cfg);
                }
                let val_idx = split::stratified_fraction(train, *val_fraction, *seed)?.indices;
                let fit_idx = split::complement(&val_idx, train.n());
                if fit_idx.is_empty() {
                    return Err(Error::Config(format!(
                        "dataset `{}` ({} rows) is too small to hold out a tuning slice",
                        train.name(),
                        train.n()
                    )));
                }
                let fit_part = train.select(&fit_idx)?;
                let val_part = train.select(&val_idx)?;
                let tuned = tune_lambda(&fit_part, &val_part, grid, cfg, false)?;
                train_probe(train, tuned.best_lambda, cfg)
            }
        }
    }
}
