//! Dataset partitioning: the estimator split plan and few-shot subsampling.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng;

/// The four risk estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    /// Finite-sample encoder and probe: train on `S_tr`, evaluate on `S_te`.
    Us,
    /// Population encoder, finite-sample probe: train on `S_tr \ S_sub`, evaluate on `S_sub`.
    As,
    /// Population encoder and probe: train and evaluate on `S_tr`.
    Af,
    /// Best predictor of the composed family: supervised training error on `S_tr`.
    Ff,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Us, Estimator::As, Estimator::Af, Estimator::Ff];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Train,
    TrainMinusSub,
    Sub,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "S_tr",
            Partition::TrainMinusSub => "S_tr\\S_sub",
            Partition::Sub => "S_sub",
            Partition::Test => "S_te",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub pretrain: Partition,
    pub train: Partition,
    pub eval: Partition,
    /// The probe is a supervised end-to-end reference rather than the SSL encoder.
    pub supervised_reference: bool,
}

/// Assignment of pretrain/train/eval partitions for every estimator, plus
/// the concrete `S_sub` draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    n_train: usize,
    n_test: usize,
    sub: Vec<usize>,
    train_minus_sub: Vec<usize>,
    pub sub_size: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub fn roles(estimator: Estimator) -> Roles {
        use Partition::*;
        let (train, eval, supervised_reference) = match estimator {
            Estimator::Us => (Train, Test, false),
            Estimator::As => (TrainMinusSub, Sub, false),
            Estimator::Af => (Train, Train, false),
            Estimator::Ff => (Train, Train, true),
        };
        Roles {
            pretrain: Train,
            train,
            eval,
            supervised_reference,
        }
    }

    /// Sorted row indices of `S_sub` within the train set.
    pub fn sub(&self) -> &[usize] {
        &self.sub
    }

    /// Sorted row indices of `S_tr \ S_sub` within the train set.
    pub fn train_minus_sub(&self) -> &[usize] {
        &self.train_minus_sub
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    /// Row indices of `partition` into its own dataset (train or test).
    pub fn indices(&self, partition: Partition) -> Vec<usize> {
        match partition {
            Partition::Train => (0..self.n_train).collect(),
            Partition::TrainMinusSub => self.train_minus_sub.clone(),
            Partition::Sub => self.sub.clone(),
            Partition::Test => (0..self.n_test).collect(),
        }
    }

    /// Materializes `partition` from the train/test feature sets.
    pub fn materialize(
        &self,
        partition: Partition,
        train: &FeatureDataset,
        test: &FeatureDataset,
    ) -> Result<FeatureDataset> {
        if train.n() != self.n_train || test.n() != self.n_test {
            return Err(Error::Contract(format!(
                "plan was made for ({}, {}) rows, datasets have ({}, {})",
                self.n_train,
                self.n_test,
                train.n(),
                test.n()
            )));
        }
        match partition {
            Partition::Train => Ok(train.clone()),
            Partition::Test => Ok(test.clone()),
            Partition::Sub => train.select(&self.sub),
            Partition::TrainMinusSub => train.select(&self.train_minus_sub),
        }
    }
}

/// `min(|S_te|, floor(|S_tr| / 10))`, at least 1.
pub fn default_sub_size(n_train: usize, n_test: usize) -> usize {
    n_test.min(n_train / 10).max(1)
}

/// Per-class quotas summing to `total`, proportional to `counts` with
/// largest-remainder rounding (ties go to the lower class index).
pub(crate) fn proportional_quotas(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * total / n).collect();
    let assigned: usize = quotas.iter().sum();
    let mut remainders: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| ((c * total) % n, k))
        .collect();
    // Largest remainder first, lower index on ties.
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in remainders.iter().take(total - assigned) {
        quotas[k] += 1;
    }
    quotas
}

/// Draws `quotas[k]` rows of each class without replacement. The result is sorted.
fn draw_per_class(by_class: &[Vec<usize>], quotas: &[usize], seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(seed);
    let mut picked = Vec::with_capacity(quotas.iter().sum());
    for (members, &q) in by_class.iter().zip(quotas) {
        let mut pool = members.clone();
        pool.shuffle(&mut rng);
        picked.extend_from_slice(&pool[..q]);
    }
    picked.sort_unstable();
    picked
}

/// Builds the estimator split plan. `S_sub` is drawn stratified by class,
/// without replacement, from the train set.
pub fn make_split_plan(
    train: &FeatureDataset,
    test: &FeatureDataset,
    sub_size: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if train.d() != test.d() {
        return Err(Error::Plan(format!(
            "train has {} feature dimensions, test has {}",
            train.d(),
            test.d()
        )));
    }
    if sub_size == 0 {
        return Err(Error::Plan("S_sub must contain at least one row".into()));
    }
    if sub_size > train.n() {
        return Err(Error::Plan(format!(
            "sub_size {} exceeds the {} train rows",
            sub_size,
            train.n()
        )));
    }
    if sub_size == train.n() {
        return Err(Error::Plan("sub_size equals the train size: S_tr \\ S_sub is empty".into()));
    }
    let empty = train.empty_classes();
    if !empty.is_empty() {
        return Err(Error::Plan(format!("classes {empty:?} have no rows in S_tr")));
    }

    let quotas = proportional_quotas(&train.class_counts(), sub_size);
    let sub = draw_per_class(&train.indices_by_class(), &quotas, seed);
    let mut in_sub = vec![false; train.n()];
    for &i in &sub {
        in_sub[i] = true;
    }
    let train_minus_sub = (0..train.n()).filter(|&i| !in_sub[i]).collect();
    Ok(SplitPlan {
        n_train: train.n(),
        n_test: test.n(),
        sub,
        train_minus_sub,
        sub_size,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SubsetMode {
    KShot(usize),
    /// Fraction in (0, 1]; each class contributes `ceil(fraction * count)` rows.
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub indices: Vec<usize>,
    pub mode: SubsetMode,
    pub seed: u64,
}

pub fn stratified_kshot(ds: &FeatureDataset, k: usize, seed: u64) -> Result<SubsetSpec> {
    if k == 0 {
        return Err(Error::Sampling("k must be at least 1".into()));
    }
    let counts = ds.class_counts();
    if let Some((class, &have)) = counts.iter().enumerate().find(|(_, &c)| c < k) {
        return Err(Error::Sampling(format!(
            "class {class} has {have} rows, fewer than k = {k}"
        )));
    }
    let quotas = vec![k; counts.len()];
    Ok(SubsetSpec {
        indices: draw_per_class(&ds.indices_by_class(), &quotas, seed),
        mode: SubsetMode::KShot(k),
        seed,
    })
}

pub fn stratified_fraction(ds: &FeatureDataset, fraction: f64, seed: u64) -> Result<SubsetSpec> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Sampling(format!("fraction {fraction} is outside (0, 1]")));
    }
    let quotas: Vec<usize> = ds
        .class_counts()
        .iter()
        .map(|&c| ((fraction * c as f64).ceil() as usize).min(c))
        .collect();
    Ok(SubsetSpec {
        indices: draw_per_class(&ds.indices_by_class(), &quotas, seed),
        mode: SubsetMode::Fraction(fraction),
        seed,
    })
}

/// Complement of a sorted index list within `0..n`.
pub fn complement(indices: &[usize], n: usize) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in indices {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn labeled(labels: &[usize]) -> FeatureDataset {
        let n = labels.len();
        let feats = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let c = labels.iter().max().unwrap() + 1;
        FeatureDataset::new("t", feats, labels.to_vec(), c).unwrap()
    }

    fn cycle(n: usize, c: usize) -> FeatureDataset {
        labeled(&(0..n).map(|i| i % c).collect::<Vec<_>>())
    }

    #[test]
    fn roles_follow_the_estimator_table() {
        use Partition::*;
        let r = |e| {
            let r = SplitPlan::roles(e);
            (r.pretrain, r.train, r.eval, r.supervised_reference)
        };
        assert_eq!(r(Estimator::Us), (Train, Train, Test, false));
        assert_eq!(r(Estimator::As), (Train, TrainMinusSub, Sub, false));
        assert_eq!(r(Estimator::Af), (Train, Train, Train, false));
        assert_eq!(r(Estimator::Ff), (Train, Train, Train, true));
    }

    #[test]
    fn sub_defaults_to_test_size() {
        let train = cycle(1000, 4);
        let test = cycle(40, 4);
        let size = default_sub_size(train.n(), test.n());
        assert_eq!(size, 40);
        let plan = make_split_plan(&train, &test, size, 3).unwrap();
        assert_eq!(plan.sub().len(), test.n());
        // Tiny train sets are guarded.
        assert_eq!(default_sub_size(50, 40), 5);
    }

    #[test]
    fn degenerate_sub_sizes() {
        let train = cycle(20, 2);
        let test = cycle(4, 2);
        assert!(matches!(make_split_plan(&train, &test, 20, 0), Err(Error::Plan(_))));
        assert!(matches!(make_split_plan(&train, &test, 21, 0), Err(Error::Plan(_))));
        assert!(matches!(make_split_plan(&train, &test, 0, 0), Err(Error::Plan(_))));
    }

    #[test]
    fn empty_class_rejected() {
        let train = FeatureDataset::new("t", Array2::zeros((4, 1)), vec![0, 0, 2, 2], 3).unwrap();
        let test = cycle(3, 3);
        assert!(matches!(make_split_plan(&train, &test, 2, 0), Err(Error::Plan(_))));
    }

    #[test]
    fn same_seed_same_plan() {
        let train = cycle(300, 3);
        let test = cycle(30, 3);
        let a = make_split_plan(&train, &test, 30, 11).unwrap();
        let b = make_split_plan(&train, &test, 30, 11).unwrap();
        let c = make_split_plan(&train, &test, 30, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sub(), c.sub());
    }

    #[test]
    fn kshot_examples() {
        let ds = cycle(100, 10);
        let s = stratified_kshot(&ds, 3, 1).unwrap();
        assert_eq!(s.indices.len(), 30);
        let sub = ds.select(&s.indices).unwrap();
        assert!(sub.class_counts().iter().all(|&c| c == 3));

        let uneven = labeled(&[0, 0, 0, 0, 0, 1, 1]);
        let full = stratified_kshot(&uneven, 2, 0).unwrap();
        assert!(full.indices.contains(&5) && full.indices.contains(&6));
        match stratified_kshot(&uneven, 3, 0) {
            Err(Error::Sampling(msg)) => assert!(msg.contains("class 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fraction_uses_per_class_ceil() {
        let ds = labeled(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1]);
        let s = stratified_fraction(&ds, 0.01, 4).unwrap();
        assert_eq!(ds.select(&s.indices).unwrap().class_counts(), vec![1, 1]);
        let s = stratified_fraction(&ds, 0.5, 4).unwrap();
        assert_eq!(ds.select(&s.indices).unwrap().class_counts(), vec![5, 2]);
        assert!(stratified_fraction(&ds, 0.0, 4).is_err());
        assert!(stratified_fraction(&ds, 1.5, 4).is_err());
    }

    #[test]
    fn quotas_round_by_largest_remainder() {
        assert_eq!(proportional_quotas(&[5, 5, 5], 4), vec![2, 1, 1]);
        assert_eq!(proportional_quotas(&[70, 30], 10), vec![7, 3]);
        assert_eq!(proportional_quotas(&[1, 1, 98], 3), vec![0, 0, 3]);
    }

    proptest! {
        #[test]
        fn partition_algebra_and_stratification(
            labels in prop::collection::vec(0usize..4, 12..120),
            frac in 0.05f64..0.6,
            seed in any::<u64>(),
        ) {
            let c = labels.iter().max().unwrap() + 1;
            prop_assume!((0..c).all(|k| labels.contains(&k)));
            let train = labeled(&labels);
            let test = labeled(&labels[..c.max(2).min(labels.len())]);
            let size = ((labels.len() as f64 * frac) as usize).clamp(1, labels.len() - 1);
            let plan = make_split_plan(&train, &test, size, seed).unwrap();

            prop_assert_eq!(plan.sub().len(), size);
            let mut union: Vec<usize> = plan.sub().iter().chain(plan.train_minus_sub()).copied().collect();
            union.sort_unstable();
            prop_assert_eq!(union, (0..train.n()).collect::<Vec<_>>());
            prop_assert!(plan.sub().windows(2).all(|w| w[0] < w[1]));

            let counts = train.class_counts();
            let sub_counts = train.select(plan.sub()).unwrap().class_counts();
            for (have, total) in sub_counts.iter().zip(&counts) {
                let ideal = size as f64 * *total as f64 / train.n() as f64;
                prop_assert!((*have as f64 - ideal).abs() <= 1.0);
            }
        }
    }
}
