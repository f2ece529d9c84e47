//! Featurized datasets, their on-disk formats, and partitioning.

mod dataset;
pub mod fvec;
pub mod split;
mod text;

pub use dataset::{FeatureDataset, Precision};
pub use fvec::{load_fvec, save_fvec};
pub use split::{
    default_sub_size, make_split_plan, stratified_fraction, stratified_kshot, Estimator,
    Partition, Roles, SplitPlan, SubsetMode, SubsetSpec,
};
pub use text::{load_csv, read_csv};
