//! Representation statistics: effective dimensionality, uniformity on the
//! hypersphere, and alignment of paired representations.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{Design, OlsFit};
use crate::error::{Error, Result};

pub const DEFAULT_ATOL: f64 = 1e-4;
pub const DEFAULT_RTOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepStats {
    pub effective_dim: usize,
    pub uniformity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<f64>,
}

/// All statistics of `z` with default tolerances; alignment only when
/// `pairs` is given.
pub fn rep_stats(z: ArrayView2<'_, f64>, pairs: Option<ArrayView2<'_, f64>>) -> Result<RepStats> {
    Ok(RepStats {
        effective_dim: effective_dim(z, DEFAULT_ATOL, DEFAULT_RTOL)?,
        uniformity: uniformity(z)?,
        alignment: pairs.map(|p| alignment(z, p)).transpose()?,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.comp
    }
}

fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Numerical rank of the Pearson correlation matrix of the columns of `z`:
/// the number of singular values above `max(atol, rtol * largest)`.
/// Constant columns are left out; if every column is constant the result is 1.
pub fn effective_dim(z: ArrayView2<'_, f64>, atol: f64, rtol: f64) -> Result<usize> {
    let (n, _) = z.dim();
    if n < 2 {
        return Err(Error::Contract(format!("effective dimension needs at least 2 rows, got {n}")));
    }
    let varying: Vec<usize> = z
        .axis_iter(Axis(1))
        .enumerate()
        .filter(|(_, col)| col.iter().any(|&v| v != col[0]))
        .map(|(j, _)| j)
        .collect();
    let dropped = z.ncols() - varying.len();
    if dropped > 0 {
        log::warn!("{dropped} constant columns have no correlation and are left out of the rank");
    }
    if varying.is_empty() {
        return Ok(1);
    }
    let standardized: Vec<Vec<f64>> = varying
        .par_iter()
        .map(|&j| {
            let col = z.column(j);
            let mean = neumaier_sum(col.iter().copied()) / n as f64;
            let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let norm = neumaier_sum(centered.iter().map(|v| v * v)).sqrt();
            centered.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let k = standardized.len();
    let mut corr = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let r = neumaier_sum(standardized[a].iter().zip(&standardized[b]).map(|(x, y)| x * y));
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    let sv: Vec<f64> = SymmetricEigen::new(corr).eigenvalues.iter().map(|v| v.abs()).collect();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let tol = atol.max(rtol * largest);
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

fn normalized_rows(z: ArrayView2<'_, f64>) -> Result<Vec<Vec<f64>>> {
    z.axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Contract(format!("row {i} has norm {norm} and cannot be normalized")));
            }
            Ok(row.iter().map(|v| v / norm).collect())
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `log` of the mean of `exp(-2 |u_i - u_j|^2)` over distinct pairs of the
/// row-normalized `u`. Lies in `[-8, 0]`; more negative is more spread out.
pub fn uniformity(z: ArrayView2<'_, f64>) -> Result<f64> {
    let n = z.nrows();
    if n < 2 {
        return Err(Error::Contract(format!("uniformity needs at least 2 rows, got {n}")));
    }
    let u = normalized_rows(z)?;
    // log-sum-exp around the largest exponent keeps the boundary cases exact
    let m = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| -2.0 * sq_dist(&u[i], &u[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let partial: Vec<f64> = (0..n - 1)
        .into_par_iter()
        .map(|i| neumaier_sum((i + 1..n).map(|j| (-2.0 * sq_dist(&u[i], &u[j]) - m).exp())))
        .collect();
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(m + neumaier_sum(partial).ln() - pairs.ln())
}

/// Mean over rows of `|z1_i - z2_i|^2`.
pub fn alignment(z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>) -> Result<f64> {
    if z1.dim() != z2.dim() {
        return Err(Error::Contract(format!(
            "paired representations have shapes {:?} and {:?}",
            z1.dim(),
            z2.dim()
        )));
    }
    if z1.nrows() == 0 {
        return Err(Error::Contract("alignment of zero rows".into()));
    }
    let row = |a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>| -> f64 {
        neumaier_sum(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)))
    };
    let per_row = z1.axis_iter(Axis(0)).zip(z2.axis_iter(Axis(0))).map(|(a, b)| row(a, b));
    Ok(neumaier_sum(per_row) / z1.nrows() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub effective_dim: f64,
    pub uniformity: f64,
    pub alignment: f64,
    pub agg_risk: f64,
}

/// Published fit of aggregated risk (in percent) on the statistics:
/// intercept, `log(effective_dim)`, uniformity, alignment.
pub const REFERENCE_COEFFICIENTS: [f64; 4] = [93.0, -9.5, -0.51, 4.4];

pub const STATS_TERMS: [&str; 4] = ["intercept", "log_effective_dim", "uniformity", "alignment"];

/// OLS of `agg_risk` on an intercept, `log(effective_dim)`, uniformity and
/// alignment.
pub fn stats_regression(rows: &[StatsRow]) -> Result<OlsFit> {
    if rows.len() < 5 {
        return Err(Error::Estimation(format!("need at least 5 rows, got {}", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.effective_dim >= 1.0)) {
        return Err(Error::Contract(format!("effective dimension {} is below 1", r.effective_dim)));
    }
    let mut design = Design::default();
    design.push(STATS_TERMS[0], vec![1.0; rows.len()]);
    design.push(STATS_TERMS[1], rows.iter().map(|r| r.effective_dim.ln()).collect());
    design.push(STATS_TERMS[2], rows.iter().map(|r| r.uniformity).collect());
    design.push(STATS_TERMS[3], rows.iter().map(|r| r.alignment).collect());
    let y: Vec<f64> = rows.iter().map(|r| r.agg_risk).collect();
    design.fit(&y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn collinear_columns_lose_rank() {
        let mut rng = crate::rng::seeded(1);
        let z = Array2::from_shape_fn((50, 2), |_| rng.random::<f64>() - 0.5);
        let cols = Array2::from_shape_fn((50, 3), |(i, j)| match j {
            0 => z[[i, 0]],
            1 => 2.0 * z[[i, 0]],
            _ => z[[i, 1]],
        });
        assert_eq!(effective_dim(cols.view(), DEFAULT_ATOL, DEFAULT_RTOL).unwrap(), 2);
    }

    #[test]
    fn constant_representation_has_dim_one() {
        let z = Array2::from_elem((10, 4), 3.0);
        assert_eq!(effective_dim(z.view(), DEFAULT_ATOL, DEFAULT_RTOL).unwrap(), 1);
        assert!(effective_dim(Array2::<f64>::zeros((1, 3)).view(), DEFAULT_ATOL, DEFAULT_RTOL).is_err());
    }

    #[test]
    fn uniformity_boundaries() {
        assert_eq!(uniformity(array![[1.0, 2.0], [1.0, 2.0]].view()).unwrap(), 0.0);
        assert_eq!(uniformity(array![[3.0, 0.0], [-1.0, 0.0]].view()).unwrap(), -8.0);
        assert!(uniformity(array![[0.0, 0.0], [1.0, 0.0]].view()).is_err());
    }

    #[test]
    fn uniformity_square() {
        let z = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let expect = ((4.0 * (-4.0f64).exp() + 2.0 * (-8.0f64).exp()) / 6.0).ln();
        assert!((uniformity(z.view()).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn alignment_basics() {
        let a = array![[0.5, 1.0], [2.0, -0.25]];
        let b = array![[1.5, 3.0], [3.0, 1.75]];
        assert_eq!(alignment(a.view(), a.view()).unwrap(), 0.0);
        assert_eq!(alignment(a.view(), b.view()).unwrap(), 5.0);
        assert_eq!(alignment(b.view(), a.view()).unwrap(), 5.0);
        assert!(alignment(a.view(), array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn regression_needs_five_rows_and_variation() {
        let row = |d: f64, u: f64, a: f64| StatsRow {
            effective_dim: d,
            uniformity: u,
            alignment: a,
            agg_risk: 40.0 + u,
        };
        assert!(stats_regression(&[row(2.0, -1.0, 0.5); 4]).is_err());
        let rows: Vec<_> = (0..6).map(|i| row(8.0, -(i as f64), 0.1 * (i * i) as f64)).collect();
        match stats_regression(&rows).unwrap_err() {
            Error::RankDeficient { column, depends_on } => {
                assert_eq!(column, "log_effective_dim");
                assert_eq!(depends_on, vec!["intercept".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }
}
