//! Scaling laws for probe risk as a function of the number of labeled
//! examples.
//!
//! The decomposition law predicts the risk of a probe trained on `n`
//! examples from the components measured with `N` examples:
//!
//! ```text
//! R(n) = approx + encoder_gen + (1 - w) usability + (w usability + probe_gen) (N / n)^alpha
//! ```
//!
//! with the Bayes risk folded into `approx`, so that `R(N)` equals the total
//! risk. The baseline is the usual power law per group `e` with a shared
//! probe-size term, `R(n, p, e) = I_e + C_e n^(-alpha_e) + K p^(-beta)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{RiskComponents, SettingResult};
use crate::error::{Error, Result};
use crate::rng;

pub const ALPHA_MAX: f64 = 2.0;
pub const GRID_POINTS: usize = 200;
pub const SIMPLEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingObservation {
    pub encoder: String,
    pub components: RiskComponents,
    /// Probe training rows behind `components`.
    #[serde(rename = "N")]
    pub n_full: f64,
    /// Probe training rows behind `observed_risk`.
    #[serde(rename = "n")]
    pub n: f64,
    pub observed_risk: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Probe parameter count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<String>,
}

impl ScalingObservation {
    fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0 && self.n_full >= 1.0) {
            return Err(Error::Contract(format!(
                "{}: sample counts must be at least 1 (N = {}, n = {})",
                self.encoder, self.n_full, self.n
            )));
        }
        if !self.observed_risk.is_finite() {
            return Err(Error::Contract(format!("{}: non-finite observed risk", self.encoder)));
        }
        Ok(())
    }
}

/// Closed-form decomposition law. Not clamped.
pub fn predict_risk(c: &RiskComponents, n_full: f64, n: f64, alpha: f64, w: f64) -> f64 {
    let base = c.bayes_risk + c.approx + c.encoder_gen;
    base + (1.0 - w) * c.usability + (w * c.usability + c.probe_gen) * (n_full / n).powf(alpha)
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() || actual.is_empty() {
        return Err(Error::Contract(format!(
            "R² needs equal nonzero lengths, got {} and {}",
            pred.len(),
            actual.len()
        )));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2("the observed values are constant".into()));
    }
    let ss_res: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Nelder-Mead on a box, projecting every trial point into the bounds.
/// Stops when the simplex diameter drops to `tol`.
pub fn simplex_minimize<F>(f: F, start: &[f64], step: &[f64], lo: &[f64], hi: &[f64], tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for k in 0..dim {
            x[k] = x[k].clamp(lo[k], hi[k]);
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    for k in 0..dim {
        let mut x = start.to_vec();
        x[k] = if x[k] + step[k] <= hi[k] { x[k] + step[k] } else { x[k] - step[k] };
        clamp(&mut x);
        pts.push(x);
    }
    let mut vals: Vec<f64> = pts.iter().map(|x| f(x)).collect();
    let diameter = |pts: &[Vec<f64>]| {
        let mut d = 0.0f64;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let s: f64 = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y).powi(2)).sum();
                d = d.max(s.sqrt());
            }
        }
        d
    };
    for _ in 0..20_000 {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if diameter(&pts) <= tol {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|k| pts[..dim].iter().map(|p| p[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..dim).map(|k| centroid[k] + t * (pts[dim][k] - centroid[k])).collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[dim] = xe;
                vals[dim] = fe;
            } else {
                pts[dim] = xr;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            pts[dim] = xr;
            vals[dim] = fr;
        } else {
            let (xc, fc) = if fr < vals[dim] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[dim].min(fr) {
                pts[dim] = xc;
                vals[dim] = fc;
            } else {
                for i in 1..=dim {
                    let x: Vec<f64> = (0..dim).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = f(&x);
                    pts[i] = x;
                }
            }
        }
    }
    let best = (0..=dim).min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b))).unwrap();
    (pts[best].clone(), vals[best])
}

fn grid(max: f64) -> Vec<f64> {
    (0..GRID_POINTS).map(|i| max * i as f64 / (GRID_POINTS - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingLawFit {
    pub alpha: f64,
    pub w: f64,
    pub sse: f64,
    pub r2_train: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_test: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    /// `predicted - observed` on the training observations.
    pub residuals: Vec<f64>,
    /// Observations with `n > N`, where the law extrapolates past the
    /// decomposition.
    pub extrapolated: Vec<String>,
}

impl ScalingLawFit {
    pub fn predict(&self, obs: &ScalingObservation) -> f64 {
        predict_risk(&obs.components, obs.n_full, obs.n, self.alpha, self.w)
    }
}

fn sse(obs: &[ScalingObservation], alpha: f64, w: f64) -> f64 {
    obs.iter()
        .map(|o| (predict_risk(&o.components, o.n_full, o.n, alpha, w) - o.observed_risk).powi(2))
        .sum()
}

/// Least-squares `(alpha, w)` over `[0, 2] x [0, 1]`: a 200 x 200 grid, then
/// simplex refinement from the best cell. Grid ties go to the lowest alpha,
/// then the lowest w.
pub fn fit_decomposition_law(obs: &[ScalingObservation]) -> Result<ScalingLawFit> {
    for o in obs {
        o.validate()?;
    }
    let ratios: BTreeSet<u64> = obs.iter().map(|o| (o.n_full / o.n).to_bits()).collect();
    if ratios.len() < 2 {
        return Err(Error::Unidentifiable(
            "every observation has the same N/n, so the exponent is not identified".into(),
        ));
    }
    let alphas = grid(ALPHA_MAX);
    let ws = grid(1.0);
    let cells: Vec<(f64, f64, f64)> = alphas
        .par_iter()
        .map(|&a| {
            ws.iter()
                .map(|&w| (a, w, sse(obs, a, w)))
                .fold((a, 0.0, f64::INFINITY), |best, c| if c.2 < best.2 { c } else { best })
        })
        .collect();
    let (a0, w0, _) = cells
        .into_iter()
        .fold((0.0, 0.0, f64::INFINITY), |best, c| if c.2 < best.2 { c } else { best });
    let step_a = ALPHA_MAX / (GRID_POINTS - 1) as f64;
    let step_w = 1.0 / (GRID_POINTS - 1) as f64;
    let (x, best) = simplex_minimize(
        |p| sse(obs, p[0], p[1]),
        &[a0, w0],
        &[step_a, step_w],
        &[0.0, 0.0],
        &[ALPHA_MAX, 1.0],
        SIMPLEX_TOL,
    );
    let (alpha, w) = (x[0], x[1]);
    let pred: Vec<f64> = obs.iter().map(|o| predict_risk(&o.components, o.n_full, o.n, alpha, w)).collect();
    let actual: Vec<f64> = obs.iter().map(|o| o.observed_risk).collect();
    let extrapolated: Vec<String> = obs
        .iter()
        .filter(|o| o.n > o.n_full)
        .map(|o| format!("{}@{}", o.encoder, o.n))
        .collect();
    if !extrapolated.is_empty() {
        log::warn!("{} observations have n > N", extrapolated.len());
    }
    Ok(ScalingLawFit {
        alpha,
        w,
        sse: best,
        r2_train: r_squared(&pred, &actual)?,
        r2_test: None,
        n_train: obs.len(),
        n_test: 0,
        residuals: pred.iter().zip(&actual).map(|(p, a)| p - a).collect(),
        extrapolated,
    })
}

/// Which observations to hold out when scoring a fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Holdout {
    /// Two settings per encoder, chosen by seed.
    Iid { seed: u64 },
    /// Every observation of one group.
    Group(String),
}

impl FromStr for Holdout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "iid" {
            Ok(Holdout::Iid { seed: 0 })
        } else if let Some(g) = s.strip_prefix("group:") {
            Ok(Holdout::Group(g.to_string()))
        } else {
            Err(Error::Usage(format!("holdout must be `iid` or `group:<key>`, got `{s}`")))
        }
    }
}

impl fmt::Display for Holdout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Holdout::Iid { .. } => f.write_str("iid"),
            Holdout::Group(g) => write!(f, "group:{g}"),
        }
    }
}

pub const IID_HELD_OUT_PER_ENCODER: usize = 2;

/// Splits into (train, test) observations.
pub fn split_holdout(
    obs: &[ScalingObservation],
    holdout: &Holdout,
) -> Result<(Vec<ScalingObservation>, Vec<ScalingObservation>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    match holdout {
        Holdout::Iid { seed } => {
            let mut by_encoder: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, o) in obs.iter().enumerate() {
                by_encoder.entry(&o.encoder).or_default().push(i);
            }
            let mut held = BTreeSet::new();
            for (enc, idx) in &by_encoder {
                if idx.len() <= IID_HELD_OUT_PER_ENCODER {
                    return Err(Error::Config(format!(
                        "encoder `{enc}` has {} observations; holding out {IID_HELD_OUT_PER_ENCODER} leaves none to fit",
                        idx.len()
                    )));
                }
                let mut shuffled = idx.clone();
                shuffled.shuffle(&mut rng::seeded(rng::derive_str(*seed, enc)));
                held.extend(shuffled.into_iter().take(IID_HELD_OUT_PER_ENCODER));
            }
            for (i, o) in obs.iter().enumerate() {
                if held.contains(&i) { &mut test } else { &mut train }.push(o.clone());
            }
        }
        Holdout::Group(g) => {
            for o in obs {
                if o.group.as_deref() == Some(g.as_str()) { &mut test } else { &mut train }.push(o.clone());
            }
            if test.is_empty() {
                return Err(Error::Config(format!("no observations in group `{g}`")));
            }
        }
    }
    Ok((train, test))
}

/// Fits on the retained observations and scores R² on the held-out ones.
pub fn fit_with_holdout(obs: &[ScalingObservation], holdout: &Holdout) -> Result<ScalingLawFit> {
    let (train, test) = split_holdout(obs, holdout)?;
    let mut fit = fit_decomposition_law(&train)?;
    let pred: Vec<f64> = test.iter().map(|o| fit.predict(o)).collect();
    let actual: Vec<f64> = test.iter().map(|o| o.observed_risk).collect();
    fit.r2_test = Some(r_squared(&pred, &actual)?);
    fit.n_test = test.len();
    Ok(fit)
}

/// Observations for one encoder from a few-shot table: one per feasible
/// setting, with `n` the mean number of probe training rows.
pub fn observations_from_fewshot(
    encoder: &str,
    components: &RiskComponents,
    n_full: f64,
    results: &[SettingResult],
) -> Vec<ScalingObservation> {
    results
        .iter()
        .filter_map(|r| {
            Some(ScalingObservation {
                encoder: encoder.to_string(),
                components: components.clone(),
                n_full,
                n: r.mean_n_train()?,
                observed_risk: r.mean?,
                group: None,
                p: None,
                setting: Some(r.setting.to_string()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLaw {
    pub group: String,
    pub intercept: f64,
    pub coef: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardLawFit {
    pub groups: Vec<GroupLaw>,
    /// `None` when the probe size never varies within a group, so the
    /// `K p^(-beta)` term cannot be told apart from the intercepts.
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub beta_indeterminate: bool,
    pub n_params: usize,
    pub sse: f64,
    pub r2_train: f64,
}

impl StandardLawFit {
    pub fn predict(&self, group: &str, n: f64, p: Option<f64>) -> Option<f64> {
        let g = self.groups.iter().find(|g| g.group == group)?;
        let size_term = match (self.k, self.beta, p) {
            (Some(k), Some(b), Some(p)) => k * p.powf(-b),
            _ => 0.0,
        };
        Some(g.intercept + g.coef * n.powf(-g.alpha) + size_term)
    }
}

struct StdProblem {
    groups: Vec<String>,
    gid: Vec<usize>,
    n: Vec<f64>,
    p: Vec<f64>,
    y: Vec<f64>,
    with_size: bool,
}

impl StdProblem {
    /// Least-squares linear coefficients `[I_0, C_0, I_1, C_1, ..., K]` and
    /// the residual sum of squares for fixed exponents.
    fn project(&self, alphas: &[f64], beta: f64) -> (Vec<f64>, f64) {
        let g = self.groups.len();
        let cols = 2 * g + usize::from(self.with_size);
        let m = self.y.len();
        let x = DMatrix::from_fn(m, cols, |i, j| {
            let e = self.gid[i];
            if j == 2 * e {
                1.0
            } else if j == 2 * e + 1 {
                self.n[i].powf(-alphas[e])
            } else if j == 2 * g {
                self.p[i].powf(-beta)
            } else {
                0.0
            }
        });
        let y = DVector::from_column_slice(&self.y);
        let svd = x.clone().svd(true, true);
        let coef = svd.solve(&y, 1e-12).unwrap_or_else(|_| DVector::zeros(cols));
        let resid = &x * &coef - &y;
        (coef.iter().copied().collect(), resid.norm_squared())
    }
}

/// Least-squares power law per group with an optional shared probe-size
/// term. Exponents are searched on grids over `[0, 2]` and then refined by
/// the simplex; intercepts and coefficients are solved exactly for each
/// choice of exponents.
pub fn fit_standard_law(obs: &[ScalingObservation]) -> Result<StandardLawFit> {
    if obs.is_empty() {
        return Err(Error::Contract("no observations".into()));
    }
    for o in obs {
        o.validate()?;
    }
    let key = |o: &ScalingObservation| o.group.clone().unwrap_or_else(|| o.encoder.clone());
    let groups: Vec<String> = obs.iter().map(key).collect::<BTreeSet<_>>().into_iter().collect();
    let gid: Vec<usize> = obs.iter().map(|o| groups.binary_search(&key(o)).unwrap()).collect();
    for (e, name) in groups.iter().enumerate() {
        let distinct: BTreeSet<u64> = obs
            .iter()
            .zip(&gid)
            .filter(|(_, &g)| g == e)
            .map(|(o, _)| o.n.to_bits())
            .collect();
        if distinct.len() < 3 {
            return Err(Error::Unidentifiable(format!(
                "group `{name}` has {} distinct n values; at least 3 are needed",
                distinct.len()
            )));
        }
    }
    let all_p = obs.iter().all(|o| o.p.is_some());
    let varies_within = all_p
        && (0..groups.len()).any(|e| {
            let ps: BTreeSet<u64> = obs
                .iter()
                .zip(&gid)
                .filter(|(_, &g)| g == e)
                .map(|(o, _)| o.p.unwrap().to_bits())
                .collect();
            ps.len() > 1
        });
    if let Some(o) = obs.iter().find(|o| o.p.is_some_and(|p| !(p > 0.0))) {
        return Err(Error::Contract(format!("{}: probe size must be positive", o.encoder)));
    }
    let prob = StdProblem {
        gid,
        n: obs.iter().map(|o| o.n).collect(),
        p: obs.iter().map(|o| o.p.unwrap_or(1.0)).collect(),
        y: obs.iter().map(|o| o.observed_risk).collect(),
        with_size: varies_within,
        groups,
    };
    let g = prob.groups.len();
    let alpha_grid = grid(ALPHA_MAX);

    // Coordinate grid search over the exponents for each beta, then simplex.
    let beta_grid: Vec<f64> = if prob.with_size { grid(ALPHA_MAX) } else { vec![0.0] };
    let starts: Vec<(Vec<f64>, f64, f64)> = beta_grid
        .par_iter()
        .map(|&beta| {
            let mut alphas = vec![1.0; g];
            let mut best = prob.project(&alphas, beta).1;
            for _ in 0..4 {
                for e in 0..g {
                    for &a in &alpha_grid {
                        let mut trial = alphas.clone();
                        trial[e] = a;
                        let s = prob.project(&trial, beta).1;
                        if s < best {
                            best = s;
                            alphas = trial;
                        }
                    }
                }
            }
            (alphas, beta, best)
        })
        .collect();
    let (alphas0, beta0, _) = starts
        .into_iter()
        .fold((vec![], 0.0, f64::INFINITY), |b, c| if c.2 < b.2 { c } else { b });

    let dim = g + usize::from(prob.with_size);
    let mut start = alphas0.clone();
    if prob.with_size {
        start.push(beta0);
    }
    let objective = |x: &[f64]| {
        let beta = if prob.with_size { x[g] } else { 0.0 };
        prob.project(&x[..g], beta).1
    };
    let step = ALPHA_MAX / (GRID_POINTS - 1) as f64;
    let (x, sse) = simplex_minimize(
        objective,
        &start,
        &vec![step; dim],
        &vec![0.0; dim],
        &vec![ALPHA_MAX; dim],
        1e-10,
    );
    let beta = prob.with_size.then(|| x[g]);
    let (coef, _) = prob.project(&x[..g], beta.unwrap_or(0.0));
    let fit = StandardLawFit {
        groups: prob
            .groups
            .iter()
            .enumerate()
            .map(|(e, name)| GroupLaw {
                group: name.clone(),
                intercept: coef[2 * e],
                coef: coef[2 * e + 1],
                alpha: x[e],
            })
            .collect(),
        k: prob.with_size.then(|| coef[2 * g]),
        beta,
        beta_indeterminate: !prob.with_size,
        n_params: 3 * g + 2,
        sse,
        r2_train: 0.0,
    };
    let pred: Vec<f64> = obs
        .iter()
        .map(|o| fit.predict(&key(o), o.n, o.p).unwrap())
        .collect();
    Ok(StandardLawFit {
        r2_train: r_squared(&pred, &prob.y)?,
        ..fit
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose, RiskEstimates};
    use approx::assert_abs_diff_eq;

    fn comps(approx: f64, encoder_gen: f64, usability: f64, probe_gen: f64) -> RiskComponents {
        let hr_ff = approx;
        let hr_af = hr_ff + usability;
        let hr_as = hr_af + probe_gen;
        let hr_us = hr_as + encoder_gen;
        decompose(&RiskEstimates::new(hr_ff, hr_af, hr_as, hr_us), 0.0).unwrap()
    }

    #[test]
    fn closed_form_example() {
        let c = comps(0.01, 0.02, 0.10, 0.15);
        let got = predict_risk(&c, 1000.0, 100.0, 0.15, 0.5);
        assert_abs_diff_eq!(got, 0.08 + 0.20 * 10f64.powf(0.15), epsilon = 1e-15);
        assert_abs_diff_eq!(predict_risk(&c, 1000.0, 1000.0, 1.3, 0.2), c.total, epsilon = 1e-15);
        assert_eq!(predict_risk(&c, 1000.0, 10.0, 0.0, 0.7), predict_risk(&c, 1000.0, 500.0, 0.0, 0.7));
    }

    #[test]
    fn r_squared_edges() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(r_squared(&[1.0, 2.0], &[1.0, 1.0]), Err(Error::UndefinedR2(_))));
        assert!(r_squared(&[], &[]).is_err());
    }

    fn observe(c: &RiskComponents, enc: &str, n: f64, alpha: f64, w: f64) -> ScalingObservation {
        ScalingObservation {
            encoder: enc.into(),
            components: c.clone(),
            n_full: 1000.0,
            n,
            observed_risk: predict_risk(c, 1000.0, n, alpha, w),
            group: None,
            p: None,
            setting: None,
        }
    }

    #[test]
    fn two_settings_interpolate() {
        let c = comps(0.05, 0.01, 0.2, 0.1);
        let obs = vec![observe(&c, "a", 1000.0, 0.3, 0.4), observe(&c, "a", 50.0, 0.3, 0.4)];
        let fit = fit_decomposition_law(&obs).unwrap();
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn single_ratio_is_unidentifiable() {
        let c = comps(0.05, 0.01, 0.2, 0.1);
        let obs = vec![observe(&c, "a", 100.0, 0.3, 0.4), observe(&c, "b", 100.0, 0.3, 0.4)];
        assert!(matches!(fit_decomposition_law(&obs), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn w_at_the_boundary() {
        let mut obs = Vec::new();
        for (i, c) in [comps(0.05, 0.01, 0.2, 0.1), comps(0.02, 0.0, 0.05, 0.3)].iter().enumerate() {
            for n in [1000.0, 300.0, 100.0, 30.0, 10.0] {
                obs.push(observe(c, &format!("e{i}"), n, 0.4, 1.0));
            }
        }
        let fit = fit_decomposition_law(&obs).unwrap();
        assert!(fit.w >= 0.98, "{fit:?}");
    }

    #[test]
    fn standard_law_noiseless_recovery() {
        let truth = [("a", 0.1, 0.8, 0.5), ("b", 0.2, 1.5, 0.3)];
        let (k, beta) = (0.4, 0.7);
        let mut obs = Vec::new();
        for (g, i_e, c_e, a_e) in truth {
            for (j, n) in [10.0, 30.0, 100.0, 300.0, 1000.0].into_iter().enumerate() {
                let p = [10.0, 20.0, 40.0][j % 3];
                let c = comps(0.0, 0.0, 0.0, 0.0);
                obs.push(ScalingObservation {
                    encoder: g.into(),
                    components: c,
                    n_full: 1000.0,
                    n,
                    observed_risk: i_e + c_e * f64::powf(n, -a_e) + k * f64::powf(p, -beta),
                    group: Some(g.into()),
                    p: Some(p),
                    setting: None,
                });
            }
        }
        let fit = fit_standard_law(&obs).unwrap();
        for ((_, i_e, c_e, a_e), g) in truth.iter().zip(&fit.groups) {
            assert_abs_diff_eq!(g.intercept, i_e, epsilon = 1e-4);
            assert_abs_diff_eq!(g.coef, c_e, epsilon = 1e-4);
            assert_abs_diff_eq!(g.alpha, a_e, epsilon = 1e-4);
        }
        assert_abs_diff_eq!(fit.k.unwrap(), k, epsilon = 1e-4);
        assert_abs_diff_eq!(fit.beta.unwrap(), beta, epsilon = 1e-4);
        assert_eq!(fit.n_params, 8);
    }

    #[test]
    fn constant_probe_size_is_indeterminate() {
        let mut obs = Vec::new();
        for n in [10.0, 100.0, 1000.0, 5000.0] {
            obs.push(ScalingObservation {
                encoder: "a".into(),
                components: comps(0.0, 0.0, 0.0, 0.0),
                n_full: 1000.0,
                n,
                observed_risk: 0.1 + 0.5 * f64::powf(n, -0.4),
                group: None,
                p: Some(64.0),
                setting: None,
            });
        }
        let fit = fit_standard_law(&obs).unwrap();
        assert!(fit.beta_indeterminate && fit.beta.is_none());
        assert_eq!(fit.n_params, 5);
        assert_abs_diff_eq!(fit.groups[0].alpha, 0.4, epsilon = 1e-4);
        obs.truncate(2);
        assert!(matches!(fit_standard_law(&obs), Err(Error::Unidentifiable(m)) if m.contains("`a`")));
    }

    #[test]
    fn holdout_parsing() {
        assert_eq!("iid".parse::<Holdout>().unwrap(), Holdout::Iid { seed: 0 });
        assert_eq!("group:vit".parse::<Holdout>().unwrap(), Holdout::Group("vit".into()));
        assert!("random".parse::<Holdout>().is_err());
    }
}
