//! Four-way risk decomposition of a linearly probed encoder.
//!
//! Four risks are estimated by training and evaluating probes on different
//! partitions of the train and test sets, and the components are their
//! successive differences:
//!
//! ```text
//! approx      = hr_FF - bayes
//! usability   = hr_AF - hr_FF
//! probe_gen   = hr_AS - hr_AF
//! encoder_gen = hr_US - hr_AS
//! total       = hr_US
//! ```
//!
//! Components are non-negative only in expectation; negative estimates are
//! reported as-is and flagged.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fvec_io::{split, FeatureDataset, Partition, SplitPlan};
use crate::probe::{zero_one_risk, LambdaPolicy, ProbeModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Computed,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimates {
    #[serde(rename = "hr_FF")]
    pub hr_ff: f64,
    #[serde(rename = "hr_AF")]
    pub hr_af: f64,
    #[serde(rename = "hr_AS")]
    pub hr_as: f64,
    #[serde(rename = "hr_US")]
    pub hr_us: f64,
    /// Provenance of `hr_FF`; the other three are always computed.
    pub hr_ff_source: Source,
}

impl RiskEstimates {
    pub fn new(hr_ff: f64, hr_af: f64, hr_as: f64, hr_us: f64) -> Self {
        RiskEstimates {
            hr_ff,
            hr_af,
            hr_as,
            hr_us,
            hr_ff_source: Source::Computed,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hr_FF", self.hr_ff),
            ("hr_AF", self.hr_af),
            ("hr_AS", self.hr_as),
            ("hr_US", self.hr_us),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Contract(format!("{name} = {v} is not a risk in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    NegativeApprox,
    NegativeUsability,
    NegativeProbeGen,
    NegativeEncoderGen,
    BayesExceedsRefRisk,
    ProbeNotConverged,
    /// Some class has at most one test row, so the alternative
    /// decomposition's test-set training error is optimistic.
    SmallTestSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskComponents {
    #[serde(rename = "hr_FF")]
    pub hr_ff: f64,
    #[serde(rename = "hr_AF")]
    pub hr_af: f64,
    #[serde(rename = "hr_AS")]
    pub hr_as: f64,
    #[serde(rename = "hr_US")]
    pub hr_us: f64,
    pub approx: f64,
    pub usability: f64,
    pub probe_gen: f64,
    pub encoder_gen: f64,
    pub bayes_risk: f64,
    pub total: f64,
    pub flags: Vec<Flag>,
}

impl RiskComponents {
    pub fn estimates(&self) -> RiskEstimates {
        RiskEstimates::new(self.hr_ff, self.hr_af, self.hr_as, self.hr_us)
    }

    /// `approx + usability + probe_gen + encoder_gen + bayes_risk`.
    pub fn component_sum(&self) -> f64 {
        self.approx + self.usability + self.probe_gen + self.encoder_gen + self.bayes_risk
    }

    /// The same estimates decomposed against `bayes_risk`, keeping
    /// estimation flags.
    pub fn with_bayes(&self, bayes_risk: f64) -> Result<RiskComponents> {
        let mut out = decompose(&self.estimates(), bayes_risk)?;
        for &f in &self.flags {
            if matches!(f, Flag::ProbeNotConverged | Flag::SmallTestSet) {
                out.push_flag(f);
            }
        }
        Ok(out)
    }

    fn push_flag(&mut self, flag: Flag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }
}

/// Differences of the stored estimates.
pub fn decompose(est: &RiskEstimates, bayes_risk: f64) -> Result<RiskComponents> {
    est.validate()?;
    if !(0.0..=1.0).contains(&bayes_risk) {
        return Err(Error::Contract(format!("bayes risk {bayes_risk} is not in [0, 1]")));
    }
    let mut out = RiskComponents {
        hr_ff: est.hr_ff,
        hr_af: est.hr_af,
        hr_as: est.hr_as,
        hr_us: est.hr_us,
        approx: est.hr_ff - bayes_risk,
        usability: est.hr_af - est.hr_ff,
        probe_gen: est.hr_as - est.hr_af,
        encoder_gen: est.hr_us - est.hr_as,
        bayes_risk,
        total: est.hr_us,
        flags: Vec::new(),
    };
    if bayes_risk > est.hr_ff {
        log::warn!("bayes risk {bayes_risk} exceeds hr_FF {}: approximation error is negative", est.hr_ff);
        out.push_flag(Flag::BayesExceedsRefRisk);
    }
    for (v, flag) in [
        (out.approx, Flag::NegativeApprox),
        (out.usability, Flag::NegativeUsability),
        (out.probe_gen, Flag::NegativeProbeGen),
        (out.encoder_gen, Flag::NegativeEncoderGen),
    ] {
        if v < 0.0 {
            out.push_flag(flag);
        }
    }
    Ok(out)
}

/// Fits a probe on `train` under `policy` and returns its 0-1 risk on `eval`.
pub fn risk(
    train: &FeatureDataset,
    eval: &FeatureDataset,
    policy: &LambdaPolicy,
    cfg: &TrainConfig,
) -> Result<f64> {
    if train.d() != eval.d() {
        return Err(Error::Contract(format!(
            "train has {} dimensions, eval has {}",
            train.d(),
            eval.d()
        )));
    }
    let model = policy.fit(train, cfg)?;
    zero_one_risk(&model, eval)
}

/// Where the supervised reference risk `hr_FF` comes from.
#[derive(Debug, Clone, Copy)]
pub enum RefRisk<'a> {
    /// A known training error of a supervised model of the same family.
    External(f64),
    /// Raw inputs on which the composed family is linear: fit a probe and
    /// take its training error.
    Raw(&'a FeatureDataset),
    Missing,
}

/// Training 0-1 risk of a probe fit on the raw (un-encoded) train set.
pub fn estimate_hr_ff_from_raw(
    raw_train: &FeatureDataset,
    policy: &LambdaPolicy,
    cfg: &TrainConfig,
) -> Result<f64> {
    risk(raw_train, raw_train, policy, cfg)
}

fn fit_and_score(
    train: &FeatureDataset,
    evals: &[&FeatureDataset],
    policy: &LambdaPolicy,
    cfg: &TrainConfig,
) -> Result<(ProbeModel, Vec<f64>)> {
    let model = policy.fit(train, cfg)?;
    let risks = evals
        .iter()
        .map(|ds| zero_one_risk(&model, ds))
        .collect::<Result<Vec<_>>>()?;
    Ok((model, risks))
}

/// Runs the three probe-based estimators on featurized train/test sets and
/// resolves `hr_FF` from `reference`. Components use a Bayes risk of 0.
pub fn estimate_components(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &SplitPlan,
    reference: RefRisk<'_>,
    policy: &LambdaPolicy,
    cfg: &TrainConfig,
) -> Result<(RiskEstimates, RiskComponents)> {
    if train.d() != test.d() {
        return Err(Error::Contract(format!(
            "train has {} dimensions, test has {}",
            train.d(),
            test.d()
        )));
    }
    let train_minus_sub = plan.materialize(Partition::TrainMinusSub, train, test)?;
    let sub = plan.materialize(Partition::Sub, train, test)?;

    let ((full, finite), hr_ff) = rayon::join(
        || {
            rayon::join(
                || fit_and_score(train, &[train, test], policy, cfg),
                || fit_and_score(&train_minus_sub, &[&sub], policy, cfg),
            )
        },
        || -> Result<(f64, Source)> {
            match reference {
                RefRisk::External(v) => Ok((v, Source::External)),
                RefRisk::Raw(raw) => {
                    if raw.n() != train.n() || raw.labels() != train.labels() {
                        return Err(Error::Contract(
                            "raw train set must be the un-encoded version of the train features".into(),
                        ));
                    }
                    Ok((estimate_hr_ff_from_raw(raw, policy, cfg)?, Source::Computed))
                }
                RefRisk::Missing => Err(Error::Config(
                    "hr_FF needs either an external reference risk or the raw train set".into(),
                )),
            }
        },
    );
    let (full_model, full_risks) = full?;
    let (sub_model, sub_risks) = finite?;
    let (hr_ff, hr_ff_source) = hr_ff?;

    let est = RiskEstimates {
        hr_ff,
        hr_af: full_risks[0],
        hr_as: sub_risks[0],
        hr_us: full_risks[1],
        hr_ff_source,
    };
    let mut comps = decompose(&est, 0.0)?;
    if !(full_model.converged && sub_model.converged) {
        comps.push_flag(Flag::ProbeNotConverged);
    }
    Ok((est, comps))
}

/// Decomposition that swaps the order of the two generalization terms,
/// using the training error of a probe fit on the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltComponents {
    #[serde(rename = "hr_US")]
    pub hr_us: f64,
    #[serde(rename = "hr_AF")]
    pub hr_af: f64,
    #[serde(rename = "hr_UF")]
    pub hr_uf: f64,
    /// `hr_US - hr_UF`
    pub probe_gen_alt: f64,
    /// `hr_UF - hr_AF`
    pub encoder_gen_alt: f64,
    pub flags: Vec<Flag>,
}

pub fn alternative_components(
    train: &FeatureDataset,
    test: &FeatureDataset,
    policy: &LambdaPolicy,
    cfg: &TrainConfig,
) -> Result<AltComponents> {
    if test.n() < test.n_classes().max(train.n_classes()) {
        return Err(Error::Estimation(format!(
            "test set has {} rows, fewer than the {} classes",
            test.n(),
            test.n_classes().max(train.n_classes())
        )));
    }
    let mut flags = Vec::new();
    if test.class_counts().iter().any(|&c| c <= 1) {
        log::warn!("test set has at most one row for some class; hr_UF underestimates its target");
        flags.push(Flag::SmallTestSet);
    }
    let (full, on_test) = rayon::join(
        || fit_and_score(train, &[train, test], policy, cfg),
        || fit_and_score(test, &[test], policy, cfg),
    );
    let (_, full) = full?;
    let (_, on_test) = on_test?;
    let (hr_af, hr_us, hr_uf) = (full[0], full[1], on_test[0]);
    Ok(AltComponents {
        hr_us,
        hr_af,
        hr_uf,
        probe_gen_alt: hr_us - hr_uf,
        encoder_gen_alt: hr_uf - hr_af,
        flags,
    })
}

/// A label budget for few-shot evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Full,
    /// Fraction of each class, in (0, 1).
    Fraction(f64),
    KShot(usize),
}

impl Setting {
    /// `100%, 30-shot, 1%, 5-shot, 3-shot`.
    pub fn defaults() -> Vec<Setting> {
        vec![
            Setting::Full,
            Setting::KShot(30),
            Setting::Fraction(0.01),
            Setting::KShot(5),
            Setting::KShot(3),
        ]
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Full => f.write_str("100%"),
            Setting::Fraction(p) => write!(f, "{}%", (p * 100.0 * 1e9).round() / 1e9),
            Setting::KShot(k) => write!(f, "{k}-shot"),
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::Usage(format!("invalid setting `{s}`: {why}"));
        if s.eq_ignore_ascii_case("full") || s == "100%" {
            return Ok(Setting::Full);
        }
        if let Some(p) = s.strip_suffix('%') {
            let p: f64 = p.parse().map_err(|_| bad("percentage is not a number"))?;
            return match p {
                p if p > 0.0 && p < 100.0 => Ok(Setting::Fraction(p / 100.0)),
                100.0 => Ok(Setting::Full),
                _ => Err(bad("percentage must be in (0, 100]")),
            };
        }
        if let Some(k) = s.strip_suffix("-shot") {
            let k: usize = k.parse().map_err(|_| bad("shot count is not an integer"))?;
            if k == 0 {
                return Err(bad("shot count must be at least 1"));
            }
            return Ok(Setting::KShot(k));
        }
        Err(bad("expected `full`, `<p>%` or `<k>-shot`"))
    }
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRisk {
    pub seed: u64,
    pub risk: f64,
    /// Rows the probe was trained on.
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub setting: Setting,
    pub per_seed: Vec<SeedRisk>,
    pub mean: Option<f64>,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: Option<f64>,
    /// Reason the setting could not be evaluated.
    pub infeasible: Option<String>,
}

impl SettingResult {
    pub fn mean_n_train(&self) -> Option<f64> {
        if self.per_seed.is_empty() {
            return None;
        }
        Some(self.per_seed.iter().map(|r| r.n_train as f64).sum::<f64>() / self.per_seed.len() as f64)
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn subsample(train: &FeatureDataset, setting: Setting, seed: u64) -> Result<FeatureDataset> {
    match setting {
        Setting::Full => Ok(train.clone()),
        Setting::Fraction(p) => train.select(&split::stratified_fraction(train, p, seed)?.indices),
        Setting::KShot(k) => train.select(&split::stratified_kshot(train, k, seed)?.indices),
    }
}

/// Test risk of tuned probes trained on label-budgeted subsets of `train`,
/// for every setting and seed.
pub fn fewshot_suite(
    train: &FeatureDataset,
    test: &FeatureDataset,
    settings: &[Setting],
    seeds: &[u64],
    policy: &LambdaPolicy,
    cfg: &TrainConfig,
) -> Result<Vec<SettingResult>> {
    if seeds.is_empty() {
        return Err(Error::Usage("at least one seed is required".into()));
    }
    settings
        .iter()
        .map(|&setting| {
            let cells: Vec<Result<SeedRisk>> = seeds
                .par_iter()
                .map(|&seed| {
                    let subset = subsample(train, setting, seed)?;
                    let risk = risk(&subset, test, policy, cfg)?;
                    Ok(SeedRisk {
                        seed,
                        risk,
                        n_train: subset.n(),
                    })
                })
                .collect();
            let mut per_seed = Vec::with_capacity(seeds.len());
            for cell in cells {
                match cell {
                    Ok(r) => per_seed.push(r),
                    Err(e @ (Error::Sampling(_) | Error::Config(_))) => {
                        log::warn!("setting {setting} skipped: {e}");
                        return Ok(SettingResult {
                            setting,
                            per_seed: Vec::new(),
                            mean: None,
                            std: None,
                            infeasible: Some(e.to_string()),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            let risks: Vec<f64> = per_seed.iter().map(|r| r.risk).collect();
            let (mean, std) = mean_std(&risks);
            Ok(SettingResult {
                setting,
                per_seed,
                mean: Some(mean),
                std: Some(std),
                infeasible: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn telescoping_example() {
        let est = RiskEstimates::new(0.01, 0.06, 0.16, 0.18);
        let c = decompose(&est, 0.0).unwrap();
        assert_abs_diff_eq!(c.approx, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(c.usability, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.probe_gen, 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(c.encoder_gen, 0.02, epsilon = 1e-15);
        assert_eq!(c.total, 0.18);
        assert!(c.flags.is_empty());
    }

    #[test]
    fn equal_estimates_are_all_approximation() {
        let c = decompose(&RiskEstimates::new(0.25, 0.25, 0.25, 0.25), 0.0).unwrap();
        assert_eq!((c.approx, c.usability, c.probe_gen, c.encoder_gen), (0.25, 0.0, 0.0, 0.0));
    }

    #[test]
    fn bayes_shifts_approximation() {
        let c = decompose(&RiskEstimates::new(0.16, 0.2, 0.25, 0.3), 0.1587).unwrap();
        assert_abs_diff_eq!(c.approx, 0.0013, epsilon = 1e-12);
        let over = decompose(&RiskEstimates::new(0.1, 0.2, 0.25, 0.3), 0.15).unwrap();
        assert!(over.approx < 0.0);
        assert!(over.flags.contains(&Flag::BayesExceedsRefRisk));
    }

    #[test]
    fn negative_probe_gen_is_reported_not_clamped() {
        let c = decompose(&RiskEstimates::new(0.05, 0.12, 0.10, 0.14), 0.0).unwrap();
        assert!(c.probe_gen < 0.0);
        assert!(c.flags.contains(&Flag::NegativeProbeGen));
    }

    #[test]
    fn out_of_range_estimate_rejected() {
        assert!(decompose(&RiskEstimates::new(0.05, 1.2, 0.1, 0.1), 0.0).is_err());
    }

    #[test]
    fn json_field_names() {
        let c = decompose(&RiskEstimates::new(0.01, 0.06, 0.16, 0.18), 0.0).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        for key in [
            "hr_FF", "hr_AF", "hr_AS", "hr_US", "approx", "usability", "probe_gen", "encoder_gen",
            "bayes_risk", "total", "flags",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn setting_parsing() {
        assert_eq!("full".parse::<Setting>().unwrap(), Setting::Full);
        assert_eq!("100%".parse::<Setting>().unwrap(), Setting::Full);
        assert_eq!("1%".parse::<Setting>().unwrap(), Setting::Fraction(0.01));
        assert_eq!("30-shot".parse::<Setting>().unwrap(), Setting::KShot(30));
        assert!("0-shot".parse::<Setting>().is_err());
        assert!("-3-shot".parse::<Setting>().is_err());
        assert!("150%".parse::<Setting>().is_err());
        assert!("banana".parse::<Setting>().is_err());
        let names: Vec<String> = Setting::defaults().iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["100%", "30-shot", "1%", "5-shot", "3-shot"]);
    }

    proptest! {
        #[test]
        fn components_telescope(
            a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, d in 0.0f64..=1.0,
            bayes in 0.0f64..=1.0,
        ) {
            let comps = decompose(&RiskEstimates::new(a, b, c, d), bayes).unwrap();
            prop_assert!((comps.component_sum() - comps.total).abs() < 1e-12);
            prop_assert_eq!(comps.total, d);
            prop_assert_eq!(comps.approx, a - bayes);
        }
    }
}
