//! Synthetic Gaussian tasks, a zoo of stand-in encoders, and brute-force
//! oracles for checking the decomposition without any pretrained model.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{self, RefRisk, RiskComponents};
use crate::error::{Error, Result};
use crate::fvec_io::{default_sub_size, make_split_plan, FeatureDataset};
use crate::probe::{LambdaPolicy, ProbeModel, TrainConfig};
use crate::rng;

/// Isotropic Gaussian mixture with equal class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTask {
    pub n_classes: usize,
    pub d_raw: usize,
    /// `n_classes` rows of length `d_raw`.
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
    pub n_pre: usize,
    pub n_tr: usize,
    pub n_te: usize,
    pub seed: u64,
}

/// Spacing of the default task's class means along the coordinate axes.
/// Puts the full-shot linear probe risk near 0.15.
pub const DEFAULT_MEAN_SCALE: f64 = 2.8;

impl SynthTask {
    /// Ten classes in 16 dimensions, means at `DEFAULT_MEAN_SCALE * e_k`,
/// 500 train and 1000 test rows.
    pub fn gaussian_default(seed: u64) -> Self {
        let (c, d) = (10, 16);
        let means = (0..c)
            .map(|k| (0..d).map(|j| if j == k { DEFAULT_MEAN_SCALE } else { 0.0 }).collect())
            .collect();
        SynthTask {
            n_classes: c,
            d_raw: d,
            means,
            sigma: 1.0,
            n_pre: 0,
            n_tr: 500,
            n_te: 1000,
            seed,
        }
    }

    /// Two classes with means `-delta/2 * e_1` and `+delta/2 * e_1`.
    pub fn two_gaussians(delta: f64, sigma: f64, d_raw: usize, n_tr: usize, n_te: usize, seed: u64) -> Self {
        let mean = |s: f64| (0..d_raw).map(|j| if j == 0 { s * delta / 2.0 } else { 0.0 }).collect();
        SynthTask {
            n_classes: 2,
            d_raw,
            means: vec![mean(-1.0), mean(1.0)],
            sigma,
            n_pre: 0,
            n_tr,
            n_te,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SynthTask { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.d_raw == 0 {
            return Err(Error::Config("task needs at least one class and one dimension".into()));
        }
        if self.means.len() != self.n_classes || self.means.iter().any(|m| m.len() != self.d_raw) {
            return Err(Error::Config(format!(
                "means must be {} x {}",
                self.n_classes, self.d_raw
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n_tr == 0 || self.n_te == 0 {
            return Err(Error::Config("n_tr and n_te must be at least 1".into()));
        }
        Ok(())
    }

    fn sample(&self, name: &str, n: usize, stream: u64) -> Result<FeatureDataset> {
        let mut rng = rng::seeded(rng::derive(self.seed, stream));
        let labels: Vec<usize> = (0..n).map(|i| i % self.n_classes).collect();
        let mut feats = Array2::zeros((n, self.d_raw));
        for (mut row, &y) in feats.rows_mut().into_iter().zip(&labels) {
            for (v, &m) in row.iter_mut().zip(&self.means[y]) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = m + self.sigma * z;
            }
        }
        FeatureDataset::new(name, feats, labels, self.n_classes)
    }
}

#[derive(Debug, Clone)]
pub struct RawSplits {
    /// Extra unlabeled pool; `None` when `n_pre = 0`.
    pub pretrain: Option<FeatureDataset>,
    pub train: FeatureDataset,
    pub test: FeatureDataset,
}

/// Class-balanced i.i.d. draws (labels cycle through the classes),
/// deterministic in the task seed.
pub fn gen_gaussian_task(task: &SynthTask) -> Result<RawSplits> {
    task.validate()?;
    let pretrain = if task.n_pre > 0 {
        Some(task.sample("raw_pretrain", task.n_pre, 1)?)
    } else {
        None
    };
    Ok(RawSplits {
        pretrain,
        train: task.sample("raw_train", task.n_tr, 2)?,
        test: task.sample("raw_test", task.n_te, 3)?,
    })
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    Identity,
    Constant {
        #[serde(default = "one")]
        d_out: usize,
    },
    /// Row `i` of the pretraining set maps to the indicator `e_i`; any other
    /// row maps to the zero vector.
    OneHotTrain,
    RandomProjection {
        d_out: usize,
        #[serde(default)]
        nonlinear: bool,
        #[serde(default)]
        seed: u64,
    },
    NoisyIdentity {
        sigma_noise: f64,
        #[serde(default)]
        seed: u64,
    },
    PcaPretrained {
        d_out: usize,
    },
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Identity => f.write_str("identity"),
            EncoderSpec::Constant { d_out } => write!(f, "constant(d={d_out})"),
            EncoderSpec::OneHotTrain => f.write_str("one_hot_train"),
            EncoderSpec::RandomProjection { d_out, nonlinear, .. } => {
                write!(f, "random_projection(d={d_out}{})", if *nonlinear { ",tanh" } else { "" })
            }
            EncoderSpec::NoisyIdentity { sigma_noise, .. } => write!(f, "noisy_identity({sigma_noise})"),
            EncoderSpec::PcaPretrained { d_out } => write!(f, "pca_pretrained(d={d_out})"),
        }
    }
}

impl EncoderSpec {
    pub fn from_json(text: &str) -> Result<Vec<EncoderSpec>> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("encoder list: {e}")))
    }

    fn validate(&self) -> Result<()> {
        match self {
            EncoderSpec::Constant { d_out }
            | EncoderSpec::RandomProjection { d_out, .. }
            | EncoderSpec::PcaPretrained { d_out }
                if *d_out == 0 =>
            {
                Err(Error::Config(format!("{self}: d_out must be at least 1")))
            }
            EncoderSpec::NoisyIdentity { sigma_noise, .. } if !(*sigma_noise >= 0.0) => {
                Err(Error::Config(format!("{self}: sigma_noise must be >= 0")))
            }
            _ => Ok(()),
        }
    }

    /// Fits the encoder on unlabeled `pretrain` rows.
    pub fn fit(&self, pretrain: &FeatureDataset) -> Result<FittedEncoder> {
        self.validate()?;
        let d_in = pretrain.d();
        let kind = match *self {
            EncoderSpec::Identity => Fitted::Identity,
            EncoderSpec::Constant { d_out } => Fitted::Constant(d_out),
            EncoderSpec::OneHotTrain => {
                let mut index = HashMap::with_capacity(pretrain.n());
                for (i, row) in pretrain.features().rows().into_iter().enumerate() {
                    index.entry(row_key(row)).or_insert(i);
                }
                Fitted::OneHot {
                    index,
                    d_out: pretrain.n(),
                }
            }
            EncoderSpec::RandomProjection { d_out, nonlinear, seed } => {
                let mut rng = rng::seeded(seed);
                let scale = 1.0 / (d_in as f64).sqrt();
                let matrix = Array2::from_shape_fn((d_in, d_out), |_| {
                    scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                });
                Fitted::Linear {
                    center: None,
                    matrix,
                    tanh: nonlinear,
                }
            }
            EncoderSpec::NoisyIdentity { sigma_noise, seed } => Fitted::Noisy { sigma_noise, seed },
            EncoderSpec::PcaPretrained { d_out } => {
                let (center, matrix) = fit_pca(pretrain, d_out)?;
                Fitted::Linear {
                    center: Some(center),
                    matrix,
                    tanh: false,
                }
            }
        };
        Ok(FittedEncoder {
            spec: self.clone(),
            d_in,
            kind,
        })
    }
}

fn row_key(row: ndarray::ArrayView1<'_, f64>) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

#[derive(Debug, Clone)]
enum Fitted {
    Identity,
    Constant(usize),
    OneHot { index: HashMap<Vec<u64>, usize>, d_out: usize },
    Linear { center: Option<Array1<f64>>, matrix: Array2<f64>, tanh: bool },
    Noisy { sigma_noise: f64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct FittedEncoder {
    pub spec: EncoderSpec,
    d_in: usize,
    kind: Fitted,
}

impl FittedEncoder {
    /// For linear encoders, the `d_in x d_out` projection matrix.
    pub fn projection(&self) -> Option<&Array2<f64>> {
        match &self.kind {
            Fitted::Linear { matrix, .. } => Some(matrix),
            _ => None,
        }
    }

    pub fn encode(&self, ds: &FeatureDataset) -> Result<FeatureDataset> {
        if ds.d() != self.d_in {
            return Err(Error::Contract(format!(
                "encoder `{}` expects {} inputs, `{}` has {}",
                self.spec,
                self.d_in,
                ds.name(),
                ds.d()
            )));
        }
        let name = format!("{}[{}]", ds.name(), self.spec);
        let feats = match &self.kind {
            Fitted::Identity => ds.features().to_owned(),
            Fitted::Constant(d_out) => Array2::ones((ds.n(), *d_out)),
            Fitted::OneHot { index, d_out } => {
                let mut out = Array2::zeros((ds.n(), *d_out));
                for (i, row) in ds.features().rows().into_iter().enumerate() {
                    if let Some(&j) = index.get(&row_key(row)) {
                        out[[i, j]] = 1.0;
                    }
                }
                out
            }
            Fitted::Linear { center, matrix, tanh } => {
                let mut x = ds.features().to_owned();
                if let Some(c) = center {
                    x -= c;
                }
                let mut z = x.dot(matrix);
                if *tanh {
                    z.mapv_inplace(f64::tanh);
                }
                z
            }
            Fitted::Noisy { sigma_noise, seed } => {
                let mut rng = rng::seeded(rng::derive_str(*seed, ds.name()));
                ds.features()
                    .mapv(|v| v + sigma_noise * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            }
        };
        ds.with_features(name, feats)
    }
}

pub fn apply_encoder(
    spec: &EncoderSpec,
    pretrain: &FeatureDataset,
    ds: &FeatureDataset,
) -> Result<FeatureDataset> {
    spec.fit(pretrain)?.encode(ds)
}

/// Mean and top-`d_out` principal directions (as columns) of `pretrain`.
fn fit_pca(pretrain: &FeatureDataset, d_out: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, d) = (pretrain.n(), pretrain.d());
    if d_out > d {
        return Err(Error::Config(format!("PCA to {d_out} dims from {d} inputs")));
    }
    if n < d_out.max(2) {
        return Err(Error::Config(format!(
            "PCA to {d_out} dims needs at least {} pretraining rows, got {n}",
            d_out.max(2)
        )));
    }
    let x = pretrain.features();
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = Array2::zeros((d, d_out));
    for (k, &col) in order.iter().take(d_out).enumerate() {
        let v = eig.eigenvectors.column(col);
        // Sign convention: largest-magnitude entry positive.
        let pivot = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            basis[[j, k]] = sign * v[j];
        }
    }
    Ok((mean, basis))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesMethod {
    ClosedForm,
    MonteCarlo,
    /// All class means coincide: labels are independent of the input.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesRisk {
    pub risk: f64,
    pub std_error: Option<f64>,
    pub method: BayesMethod,
}

pub const BAYES_MC_SAMPLES: usize = 1_000_000;

/// Irreducible risk of the task under equal priors and shared isotropic
/// covariance. Two classes use `Phi(-delta / (2 sigma))`; more classes use
/// Monte Carlo over the nearest-mean rule.
pub fn bayes_risk_oracle(task: &SynthTask) -> Result<BayesRisk> {
    task.validate()?;
    let c = task.n_classes;
    if task.means.iter().all(|m| m == &task.means[0]) {
        return Ok(BayesRisk {
            risk: (c - 1) as f64 / c as f64,
            std_error: Some(0.0),
            method: BayesMethod::Degenerate,
        });
    }
    if c == 2 {
        let delta = task.means[0]
            .iter()
            .zip(&task.means[1])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        return Ok(BayesRisk {
            risk: normal_cdf(-delta / (2.0 * task.sigma)),
            std_error: Some(0.0),
            method: BayesMethod::ClosedForm,
        });
    }
    Ok(bayes_risk_monte_carlo(task, BAYES_MC_SAMPLES))
}

/// Nearest-mean error rate over `samples` fresh draws, with its standard error.
pub fn bayes_risk_monte_carlo(task: &SynthTask, samples: usize) -> BayesRisk {
    const CHUNK: usize = 10_000;
    let chunks = samples.div_ceil(CHUNK);
    let errors: usize = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::seeded(rng::derive(task.seed, 1_000 + chunk as u64));
            let mut x = vec![0.0; task.d_raw];
            let len = CHUNK.min(samples - chunk * CHUNK);
            let mut wrong = 0;
            for _ in 0..len {
                let y = rng.random_range(0..task.n_classes);
                for (v, &m) in x.iter_mut().zip(&task.means[y]) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = m + task.sigma * z;
                }
                let dist = |k: usize| -> f64 {
                    x.iter().zip(&task.means[k]).map(|(a, b)| (a - b).powi(2)).sum()
                };
                let mut best = 0;
                let mut best_d = dist(0);
                for k in 1..task.n_classes {
                    let dk = dist(k);
                    if dk < best_d {
                        best = k;
                        best_d = dk;
                    }
                }
                wrong += usize::from(best != y);
            }
            wrong
        })
        .sum();
    let p = errors as f64 / samples as f64;
    BayesRisk {
        risk: p,
        std_error: Some((p * (1.0 - p) / samples as f64).sqrt()),
        method: BayesMethod::MonteCarlo,
    }
}

/// Exact population 0-1 risk of a two-class linear probe on a two-class
/// isotropic Gaussian task (ties at the decision boundary have measure zero).
pub fn two_class_population_risk(task: &SynthTask, probe: &ProbeModel) -> Result<f64> {
    if task.n_classes != 2 || probe.n_classes() != 2 || probe.d() != task.d_raw {
        return Err(Error::Contract("two-class task and probe of matching dimension required".into()));
    }
    // score = a.x + beta; predict class 1 when score > 0
    let a: Vec<f64> = (0..task.d_raw)
        .map(|j| probe.weights[[j, 1]] - probe.weights[[j, 0]])
        .collect();
    let beta = probe.bias[1] - probe.bias[0];
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mean_score = |k: usize| a.iter().zip(&task.means[k]).map(|(x, m)| x * m).sum::<f64>() + beta;
    if norm == 0.0 {
        // Constant prediction: class 1 if beta > 0, else class 0.
        return Ok(0.5);
    }
    let s = task.sigma * norm;
    let err0 = 1.0 - normal_cdf(-mean_score(0) / s);
    let err1 = normal_cdf(-mean_score(1) / s);
    Ok(0.5 * (err0 + err1))
}

/// Closed lattice `{min, min + step, ..., <= max}` used for every free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Lattice {
    fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.max >= self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::Config(format!("empty lattice {self:?}")));
        }
        let m = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..m).map(|i| self.min + i as f64 * self.step).collect())
    }
}

pub const MAX_LATTICE_POINTS: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub min_loss: f64,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub points: u128,
}

/// Exhaustive minimum of the regularized probe objective over a lattice.
///
/// Softmax logits are invariant to a shared per-row shift, so the search
/// runs over the identifiable parameters: each weight row sums to zero
/// across classes and `bias[0] = 0`. The minimum over this slice equals the
/// minimum over all parameters. `(d + 1) * (C - 1)` lattice coordinates are
/// enumerated.
pub fn brute_force_probe(tiny: &FeatureDataset, lambda: f64, lattice: &Lattice) -> Result<BruteForceResult> {
    let (n, d, c) = (tiny.n(), tiny.d(), tiny.n_classes());
    if (d + 1) * c > 6 {
        return Err(Error::Config(format!("(d + 1) * C = {} exceeds 6", (d + 1) * c)));
    }
    let grid = lattice.points()?;
    let free = (d + 1) * (c - 1);
    let total = (grid.len() as u128).checked_pow(free as u32).unwrap_or(u128::MAX);
    if total > MAX_LATTICE_POINTS {
        return Err(Error::Config(format!(
            "lattice has {total} points, more than {MAX_LATTICE_POINTS}"
        )));
    }

    let xs: Vec<f64> = tiny.features().iter().copied().collect();
    let y = tiny.labels();
    let mut digits = vec![0usize; free];
    let mut w = vec![vec![0.0; c]; d];
    let mut b = vec![0.0; c];
    let mut best = (f64::INFINITY, w.clone(), b.clone());
    loop {
        // Free coordinates: w[j][1..c] then b[1..c].
        let mut it = digits.iter().map(|&i| grid[i]);
        for row in w.iter_mut() {
            let mut s = 0.0;
            for v in row.iter_mut().skip(1) {
                *v = it.next().unwrap();
                s += *v;
            }
            row[0] = -s;
        }
        for v in b.iter_mut().skip(1) {
            *v = it.next().unwrap();
        }

        let mut loss = 0.0;
        let mut logits = [0.0f64; 6];
        for i in 0..n {
            let row = &xs[i * d..(i + 1) * d];
            let mut m = f64::NEG_INFINITY;
            for (k, z) in logits[..c].iter_mut().enumerate() {
                *z = b[k] + row.iter().zip(&w).map(|(xj, wj)| xj * wj[k]).sum::<f64>();
                m = m.max(*z);
            }
            let lse = m + logits[..c].iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            loss += lse - logits[y[i]];
        }
        let penalty: f64 = w.iter().flatten().map(|v| v * v).sum();
        let obj = loss / n as f64 + 0.5 * lambda * penalty;
        if obj < best.0 {
            best = (obj, w.clone(), b.clone());
        }

        // odometer
        let mut pos = 0;
        loop {
            if pos == free {
                let (min_loss, w, b) = best;
                return Ok(BruteForceResult {
                    min_loss,
                    weights: Array2::from_shape_fn((d, c), |(j, k)| w[j][k]),
                    bias: Array1::from(b),
                    points: total,
                });
            }
            digits[pos] += 1;
            if digits[pos] < grid.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Which rows the synthetic encoders are pretrained on. `one_hot_train`
/// always indexes the train split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PretrainSet {
    /// The task's unlabeled pool, or the train split when `n_pre = 0`.
    #[default]
    Pool,
    Train,
    /// Train split followed by the pool.
    TrainAndPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub policy: LambdaPolicy,
    pub train: TrainConfig,
    pub pretrain: PretrainSet,
    /// `None` uses `default_sub_size`.
    pub sub_size: Option<usize>,
    /// Subtract the oracle Bayes risk from the approximation error.
    pub excess_risk: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            policy: LambdaPolicy::default(),
            train: TrainConfig::default(),
            pretrain: PretrainSet::Pool,
            sub_size: None,
            excess_risk: false,
        }
    }
}

/// Featurizes one task draw with `spec` and decomposes its risk, using the
/// raw train set for the supervised reference.
pub fn decompose_encoder(
    raw: &RawSplits,
    spec: &EncoderSpec,
    cfg: &SweepConfig,
    split_seed: u64,
    bayes_risk: f64,
) -> Result<RiskComponents> {
    let pretrain = match (spec, cfg.pretrain, &raw.pretrain) {
        (EncoderSpec::OneHotTrain, _, _) | (_, PretrainSet::Train, _) | (_, _, None) => raw.train.clone(),
        (_, PretrainSet::Pool, Some(pool)) => pool.clone(),
        (_, PretrainSet::TrainAndPool, Some(pool)) => raw.train.concat(pool)?,
    };
    let encoder = spec.fit(&pretrain)?;
    let train = encoder.encode(&raw.train)?;
    let test = encoder.encode(&raw.test)?;
    let sub_size = cfg.sub_size.unwrap_or_else(|| default_sub_size(train.n(), test.n()));
    let plan = make_split_plan(&train, &test, sub_size, split_seed)?;
    let (_, mut comps) = decomposition::estimate_components(
        &train,
        &test,
        &plan,
        RefRisk::Raw(&raw.train),
        &cfg.policy,
        &cfg.train,
    )?;
    if bayes_risk != 0.0 {
        comps = comps.with_bayes(bayes_risk)?;
    }
    Ok(comps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub encoder: String,
    pub spec: EncoderSpec,
    pub per_seed: Vec<RiskComponents>,
    pub mean: MeanComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanComponents {
    pub usability: f64,
    pub probe_gen: f64,
    pub approx: f64,
    pub encoder_gen: f64,
    pub total: f64,
}

impl MeanComponents {
    pub fn of(rows: &[RiskComponents]) -> Self {
        let n = rows.len() as f64;
        let avg = |f: fn(&RiskComponents) -> f64| rows.iter().map(f).sum::<f64>() / n;
        MeanComponents {
            usability: avg(|r| r.usability),
            probe_gen: avg(|r| r.probe_gen),
            approx: avg(|r| r.approx),
            encoder_gen: avg(|r| r.encoder_gen),
            total: avg(|r| r.total),
        }
    }
}

/// Full decomposition of every encoder over task draws `task.with_seed(s)`.
pub fn tradeoff_sweep(
    task: &SynthTask,
    specs: &[EncoderSpec],
    seeds: &[u64],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if specs.is_empty() {
        return Err(Error::Config("no encoders to sweep".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("no seeds to sweep".into()));
    }
    let per_seed: Vec<Result<Vec<RiskComponents>>> = seeds
        .par_iter()
        .map(|&seed| {
            let draw = task.with_seed(seed);
            let raw = gen_gaussian_task(&draw)?;
            let bayes = if cfg.excess_risk {
                bayes_risk_oracle(&draw)?.risk
            } else {
                0.0
            };
            specs
                .iter()
                .map(|spec| decompose_encoder(&raw, spec, cfg, rng::derive(seed, 7), bayes))
                .collect()
        })
        .collect();
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let rows: Vec<RiskComponents> = per_seed.iter().map(|s| s[i].clone()).collect();
            SweepRow {
                encoder: spec.to_string(),
                spec: spec.clone(),
                mean: MeanComponents::of(&rows),
                per_seed: rows,
            }
        })
        .collect())
}

/// Frontier table; columns `encoder,usability,probe_gen,approx,encoder_gen,total,seeds`.
pub fn frontier_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["encoder", "usability", "probe_gen", "approx", "encoder_gen", "total", "seeds"])?;
    for r in rows {
        w.write_record([
            r.encoder.clone(),
            r.mean.usability.to_string(),
            r.mean.probe_gen.to_string(),
            r.mean.approx.to_string(),
            r.mean.encoder_gen.to_string(),
            r.mean.total.to_string(),
            r.per_seed.len().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
