//! Linear design-choice analyses: ordinary least squares with classical
//! inference, the controlled analysis (fixed effects for every combination
//! of the other design choices) and the global linear analysis (explicit
//! controls).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coef {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    /// Two-sided.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<Coef>,
    pub r_squared: f64,
    /// Residual degrees of freedom, `n_obs - columns`.
    pub dof: usize,
    pub n_obs: usize,
    pub residual_std: f64,
}

impl OlsFit {
    pub fn coef(&self, name: &str) -> Option<&Coef> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
pub fn t_test_p_value(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    statrs::function::beta::beta_reg(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

const RANK_TOL: f64 = 1e-9;

/// Least squares via Householder QR, with classical standard errors.
///
/// A column whose component orthogonal to the preceding columns is
/// negligible is reported as a rank error together with the columns it
/// depends on.
pub fn ols(x: ArrayView2<'_, f64>, y: &[f64], names: &[String]) -> Result<OlsFit> {
    let (n, p) = x.dim();
    if names.len() != p {
        return Err(Error::Contract(format!("{p} design columns but {} names", names.len())));
    }
    if y.len() != n {
        return Err(Error::Contract(format!("{n} design rows but {} responses", y.len())));
    }
    if p == 0 {
        return Err(Error::Contract("design has no columns".into()));
    }
    if n < p + 1 {
        return Err(Error::Estimation(format!(
            "{n} rows cannot support {p} coefficients with positive residual degrees of freedom"
        )));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::Estimation(format!("non-finite value {v} in regression data")));
    }

    let xm = DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
    let col_norms: Vec<f64> = (0..p).map(|j| xm.column(j).norm()).collect();
    let qr = xm.qr();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)].abs() <= RANK_TOL * col_norms[j] || col_norms[j] == 0.0 {
            let depends_on = if j == 0 || col_norms[j] == 0.0 {
                Vec::new()
            } else {
                let rj = r.view((0, 0), (j, j)).into_owned();
                let rhs = r.view((0, j), (j, 1)).into_owned();
                let c = rj.solve_upper_triangular(&rhs).unwrap_or_else(|| DMatrix::zeros(j, 1));
                (0..j)
                    .filter(|&k| (c[(k, 0)] * col_norms[k]).abs() > 1e-6 * col_norms[j])
                    .map(|k| names[k].clone())
                    .collect()
            };
            return Err(Error::RankDeficient {
                column: names[j].clone(),
                depends_on,
            });
        }
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Estimation("singular triangular factor".into()))?;
    let fitted = DMatrix::from_fn(n, p, |i, j| x[[i, j]]) * &beta;
    let ssr: f64 = (0..n).map(|i| (y[i] - fitted[i]).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedR2("the response is constant".into()));
    }
    let dof = n - p;
    let sigma2 = ssr / dof as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Estimation("singular triangular factor".into()))?;

    let coefficients = (0..p)
        .map(|j| {
            let var: f64 = (0..p).map(|k| r_inv[(j, k)].powi(2)).sum::<f64>() * sigma2;
            let se = var.sqrt();
            let est = beta[j];
            let (t, pv) = if se > 0.0 {
                let t = est / se;
                (t, t_test_p_value(t, dof as f64))
            } else if est == 0.0 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY.copysign(est), 0.0)
            };
            Coef {
                name: names[j].clone(),
                estimate: est,
                std_error: se,
                t_stat: t,
                p_value: pv,
            }
        })
        .collect();
    Ok(OlsFit {
        coefficients,
        r_squared: 1.0 - ssr / sst,
        dof,
        n_obs: n,
        residual_std: sigma2.sqrt(),
    })
}

/// Named columns of a design matrix, assembled column by column.
#[derive(Debug, Clone, Default)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(column);
    }

    pub fn fit(&self, y: &[f64]) -> Result<OlsFit> {
        let n = y.len();
        if let Some((name, _)) = self.names.iter().zip(&self.columns).find(|(_, c)| c.len() != n) {
            return Err(Error::Contract(format!("column `{name}` length differs from the response")));
        }
        let x = ndarray::Array2::from_shape_fn((n, self.columns.len()), |(i, j)| self.columns[j][i]);
        ols(x.view(), y, &self.names)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    fn is_missing(&self, i: usize) -> bool {
        match self {
            Column::Numeric(v) => v[i].is_none(),
            Column::Categorical(v) => v[i].is_none(),
        }
    }

    /// Grouping key of row `i`; missing values form their own level.
    fn key(&self, i: usize) -> String {
        match self {
            Column::Numeric(v) => v[i].map_or_else(|| "NA".into(), |x| format!("{x:?}")),
            Column::Categorical(v) => v[i].clone().unwrap_or_else(|| "NA".into()),
        }
    }
}

/// Model records by named columns. Metric columns are the responses; every
/// other non-id column is a design choice.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTable {
    names: Vec<String>,
    columns: Vec<Column>,
    metrics: BTreeSet<String>,
    id_column: Option<String>,
}

fn is_missing_cell(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "nan" | "null")
}

impl ModelTable {
    pub fn new(columns: Vec<(String, Column)>, metrics: &[&str], id_column: Option<&str>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, _) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate column `{name}`")));
            }
        }
        let n = columns.first().map_or(0, |(_, c)| c.len());
        if let Some((name, _)) = columns.iter().find(|(_, c)| c.len() != n) {
            return Err(Error::Validation(format!("column `{name}` has a different length")));
        }
        let (names, columns): (Vec<_>, Vec<_>) = columns.into_iter().unzip();
        let table = ModelTable {
            names,
            columns,
            metrics: metrics.iter().map(|s| s.to_string()).collect(),
            id_column: id_column.map(str::to_string),
        };
        for m in &table.metrics {
            match table.column(m) {
                Ok(Column::Numeric(_)) => {}
                Ok(Column::Categorical(_)) => {
                    return Err(Error::Validation(format!("metric column `{m}` is not numeric")))
                }
                Err(_) => {}
            }
        }
        if let Some(id) = &table.id_column {
            table.column(id)?;
        }
        Ok(table)
    }

    /// Reads a headered CSV. A column is numeric when every non-missing cell
    /// parses as a number. Metric names absent from the header are ignored.
    pub fn read_csv<R: Read>(reader: R, metrics: &[&str], id_column: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    line: line + 2,
                    msg: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                cells[j].push(cell.to_string());
            }
        }
        let columns = header
            .into_iter()
            .zip(cells)
            .map(|(name, col)| {
                let parsed: Option<Vec<Option<f64>>> = col
                    .iter()
                    .map(|s| {
                        if is_missing_cell(s) {
                            Some(None)
                        } else {
                            s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
                        }
                    })
                    .collect();
                let is_id = Some(name.as_str()) == id_column;
                let column = match parsed {
                    Some(v) if !is_id => Column::Numeric(v),
                    _ => Column::Categorical(
                        col.into_iter()
                            .map(|s| (!is_missing_cell(&s)).then(|| s.trim().to_string()))
                            .collect(),
                    ),
                };
                (name, column)
            })
            .collect();
        let present: Vec<&str> = metrics.to_vec();
        Self::new(columns, &present, id_column)
    }

    pub fn load_csv(path: &Path, metrics: &[&str], id_column: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, metrics, id_column)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| &self.columns[j])
            .ok_or_else(|| Error::Config(format!("no column named `{name}`")))
    }

    /// Every column that is neither the id nor a metric.
    pub fn design_columns(&self) -> Vec<&str> {
        self.names
            .iter()
            .filter(|n| !self.metrics.contains(*n) && self.id_column.as_ref() != Some(*n))
            .map(String::as_str)
            .collect()
    }

    fn numeric(&self, name: &str, log: bool) -> Result<Vec<Option<f64>>> {
        let Column::Numeric(v) = self.column(name)? else {
            return Err(Error::Config(format!("column `{name}` is not numeric")));
        };
        if !log {
            return Ok(v.clone());
        }
        v.iter()
            .enumerate()
            .map(|(i, x)| match x {
                Some(x) if *x > 0.0 => Ok(Some(x.ln())),
                Some(x) => Err(Error::Validation(format!(
                    "cannot take the log of {x} in column `{name}`, row {i}"
                ))),
                None => Ok(None),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ca,
    Gla,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ca => "ca",
            Method::Gla => "gla",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ca" => Ok(Method::Ca),
            "gla" => Ok(Method::Gla),
            _ => Err(Error::Usage(format!("unknown analysis method `{s}` (expected ca or gla)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub method: Method,
    pub hparam: String,
    pub metric: String,
    pub log_hparam: bool,
    pub log_metric: bool,
    /// Design choices held fixed (CA) or regressed on (GLA).
    pub controls: Vec<String>,
    pub n_groups: Option<usize>,
    pub rows_used: usize,
    pub fit: OlsFit,
}

impl Analysis {
    /// The hparam's coefficient; the first one when it is categorical.
    pub fn effect(&self) -> &Coef {
        self.fit
            .coef(&self.hparam)
            .or_else(|| {
                let prefix = format!("{}=", self.hparam);
                self.fit.coefficients.iter().find(|c| c.name.starts_with(&prefix))
            })
            .expect("the hparam is always in the design")
    }
}

/// `metric = alpha * hparam + beta[group]`, where the group is the joint value
/// of every other design choice.
pub fn controlled_fit(
    table: &ModelTable,
    hparam: &str,
    metric: &str,
    log_hparam: bool,
    log_metric: bool,
) -> Result<Analysis> {
    let h = table.numeric(hparam, log_hparam)?;
    let y = table.numeric(metric, log_metric)?;
    let others: Vec<&str> = table
        .design_columns()
        .into_iter()
        .filter(|c| *c != hparam && *c != metric)
        .collect();
    let other_cols = others.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in 0..table.n_rows() {
        if h[i].is_none() || y[i].is_none() {
            continue;
        }
        let key = others
            .iter()
            .zip(&other_cols)
            .map(|(name, col)| format!("{name}={}", col.key(i)))
            .collect::<Vec<_>>()
            .join(",");
        groups.entry(key).or_default().push(i);
    }
    let controlled = groups
        .values()
        .filter(|rows| {
            let first = h[rows[0]];
            rows.iter().any(|&i| h[i] != first)
        })
        .count();
    if controlled == 0 {
        return Err(Error::Coverage(format!(
            "no two models differ only in `{hparam}`; the controlled analysis has nothing to compare"
        )));
    }

    let rows: Vec<usize> = groups.values().flatten().copied().collect();
    let mut design = Design::default();
    design.push(hparam, rows.iter().map(|&i| h[i].unwrap()).collect());
    for (key, members) in &groups {
        let set: BTreeSet<usize> = members.iter().copied().collect();
        let name = if key.is_empty() { "group".to_string() } else { format!("group[{key}]") };
        design.push(name, rows.iter().map(|i| f64::from(u8::from(set.contains(i)))).collect());
    }
    let response: Vec<f64> = rows.iter().map(|&i| y[i].unwrap()).collect();
    let fit = design.fit(&response)?;
    Ok(Analysis {
        method: Method::Ca,
        hparam: hparam.to_string(),
        metric: metric.to_string(),
        log_hparam,
        log_metric,
        controls: others.iter().map(|s| s.to_string()).collect(),
        n_groups: Some(groups.len()),
        rows_used: rows.len(),
        fit,
    })
}

/// Pushes `name` into `design`: numeric as is, categorical one-hot with the
/// alphabetically first level dropped.
fn push_encoded(design: &mut Design, table: &ModelTable, name: &str, rows: &[usize], log: bool) -> Result<()> {
    match table.column(name)? {
        Column::Numeric(_) => {
            let v = table.numeric(name, log)?;
            design.push(name, rows.iter().map(|&i| v[i].unwrap()).collect());
        }
        Column::Categorical(v) => {
            if log {
                return Err(Error::Config(format!("cannot log-transform categorical column `{name}`")));
            }
            let levels: BTreeSet<&str> = rows.iter().map(|&i| v[i].as_deref().unwrap()).collect();
            for level in levels.iter().skip(1) {
                design.push(
                    format!("{name}={level}"),
                    rows.iter()
                        .map(|&i| f64::from(u8::from(v[i].as_deref() == Some(*level))))
                        .collect(),
                );
            }
        }
    }
    Ok(())
}

/// OLS of `metric` on an intercept, `hparam` and the caller's `controls`.
/// Rows missing any used column are dropped.
pub fn global_fit(
    table: &ModelTable,
    hparam: &str,
    controls: &[&str],
    metric: &str,
    log_hparam: bool,
    log_metric: bool,
) -> Result<Analysis> {
    if controls.contains(&hparam) {
        return Err(Error::Config(format!("`{hparam}` cannot control for itself")));
    }
    let y = table.numeric(metric, log_metric)?;
    let mut used = vec![hparam];
    used.extend_from_slice(controls);
    let cols = used.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<usize> = (0..table.n_rows())
        .filter(|&i| y[i].is_some() && cols.iter().all(|c| !c.is_missing(i)))
        .collect();
    if rows.len() < table.n_rows() {
        log::warn!("dropped {} rows with missing values", table.n_rows() - rows.len());
    }
    if rows.is_empty() {
        return Err(Error::Coverage("no complete rows for the requested columns".into()));
    }
    let mut design = Design::default();
    design.push("intercept", vec![1.0; rows.len()]);
    push_encoded(&mut design, table, hparam, &rows, log_hparam)?;
    for c in controls {
        push_encoded(&mut design, table, c, &rows, false)?;
    }
    let response: Vec<f64> = rows.iter().map(|&i| y[i].unwrap()).collect();
    let fit = design.fit(&response)?;
    Ok(Analysis {
        method: Method::Gla,
        hparam: hparam.to_string(),
        metric: metric.to_string(),
        log_hparam,
        log_metric,
        controls: controls.iter().map(|s| s.to_string()).collect(),
        n_groups: None,
        rows_used: rows.len(),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_line() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| if j == 0 { i as f64 } else { 1.0 });
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let fit = ols(x.view(), &y, &names(&["x", "intercept"])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0].estimate, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.coefficients[1].estimate, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_eq!(fit.dof, 8);
    }

    #[test]
    fn t_p_values_against_known_quantiles() {
        // t_{0.975} quantiles from standard tables
        assert_abs_diff_eq!(t_test_p_value(12.706, 1.0), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(t_test_p_value(2.228, 10.0), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(t_test_p_value(0.0, 5.0), 1.0, epsilon = 1e-15);
        // large dof tends to the normal: 2 * Phi(-1.96)
        assert_abs_diff_eq!(t_test_p_value(1.959964, 1e6), 0.05, epsilon = 1e-5);
    }

    #[test]
    fn normal_bridge_at_large_dof() {
        // The largest gap to the normal, near |t| = 1.56, is 1.58e-3 at 200
        // degrees of freedom and falls below 1e-3 from about 317.
        let grid: Vec<f64> = (0..=600).map(|i| i as f64 / 100.0).collect();
        let gap = |dof: f64| {
            grid.iter()
                .map(|&t| (t_test_p_value(t, dof) - 2.0 * crate::synth::normal_cdf(-t)).abs())
                .fold(0.0, f64::max)
        };
        assert!(gap(200.0) < 1.6e-3);
        assert!(gap(320.0) < 1e-3);
        assert!(gap(1000.0) < 3.2e-4);
    }

    #[test]
    fn t_p_values_against_scipy() {
        // scipy.stats.t.sf(t, dof) * 2
        for (t, dof, p) in [
            (1.555, 200.0, 0.12152704525232969),
            (2.0, 250.0, 0.04658210534325142),
            (0.7, 12.0, 0.4972741537907074),
            (4.5, 38.0, 6.243141215626563e-05),
        ] {
            assert!((t_test_p_value(t, dof) - p).abs() < 1e-9 * p.max(1e-3), "{t} {dof}");
            assert!((t_test_p_value(-t, dof) - p).abs() < 1e-9 * p.max(1e-3));
        }
    }

    #[test]
    fn rank_error_names_the_dependency() {
        let x = Array2::from_shape_fn((6, 3), |(i, j)| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 3.0 * i as f64,
        });
        let y: Vec<f64> = (0..6).map(|i| (i * i) as f64).collect();
        let err = ols(x.view(), &y, &names(&["intercept", "a", "b"])).unwrap_err();
        match err {
            Error::RankDeficient { column, depends_on } => {
                assert_eq!(column, "b");
                assert_eq!(depends_on, vec!["a".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = Array2::<f64>::ones((2, 2));
        assert!(matches!(
            ols(x.view(), &[1.0, 2.0], &names(&["a", "b"])),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = crate::rng::seeded(11);
        let n = 30;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| 1.5 * x + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let fit_with = |c: f64| {
            let mut d = Design::default();
            d.push("intercept", vec![1.0; n]);
            d.push("x", xs.iter().map(|x| c * x).collect());
            d.fit(&y).unwrap()
        };
        let a = fit_with(1.0);
        let b = fit_with(7.0);
        assert_abs_diff_eq!(a.coefficients[1].estimate / 7.0, b.coefficients[1].estimate, epsilon = 1e-9);
        assert_abs_diff_eq!(a.coefficients[1].t_stat, b.coefficients[1].t_stat, epsilon = 1e-9);
        assert_abs_diff_eq!(a.coefficients[1].p_value, b.coefficients[1].p_value, epsilon = 1e-9);
    }

    #[test]
    fn orthogonal_control_leaves_slope() {
        let n = 8;
        let x: Vec<f64> = [-3., -1., 1., 3., -3., -1., 1., 3.].to_vec();
        let z: Vec<f64> = [1., 1., 1., 1., -1., -1., -1., -1.].to_vec();
        let y: Vec<f64> = (0..n).map(|i| 0.7 * x[i] + [0.1, -0.2, 0.05, 0.3, -0.1, 0.2, 0.0, -0.3][i]).collect();
        let mut d = Design::default();
        d.push("intercept", vec![1.0; n]);
        d.push("x", x.clone());
        let a = d.fit(&y).unwrap();
        d.push("z", z);
        let b = d.fit(&y).unwrap();
        assert_abs_diff_eq!(a.coefficients[1].estimate, b.coefficients[1].estimate, epsilon = 1e-12);
    }

    fn cat(v: &[&str]) -> Column {
        Column::Categorical(v.iter().map(|s| Some(s.to_string())).collect())
    }

    fn num(v: &[f64]) -> Column {
        Column::Numeric(v.iter().map(|&x| Some(x)).collect())
    }

    #[test]
    fn controlled_recovers_log_slope() {
        let dims = [128.0, 512.0, 2048.0, 256.0, 1024.0, 64.0, 4096.0];
        let arch = ["rn50", "rn50", "rn50", "vit", "vit", "vit", "vit"];
        let offset = |a: &str| if a == "rn50" { 10.0 } else { -4.0 };
        let metric: Vec<f64> = dims.iter().zip(arch).map(|(d, a)| 2.0 * f64::ln(*d) + offset(a)).collect();
        let mut noisy = metric.clone();
        noisy[0] += 0.01;
        let table = ModelTable::new(
            vec![
                ("dim".into(), num(&dims)),
                ("arch".into(), cat(&arch)),
                ("usability".into(), num(&noisy)),
            ],
            &["usability"],
            None,
        )
        .unwrap();
        let exact = ModelTable::new(
            vec![("dim".into(), num(&dims)), ("arch".into(), cat(&arch)), ("usability".into(), num(&metric))],
            &["usability"],
            None,
        )
        .unwrap();
        let a = controlled_fit(&exact, "dim", "usability", true, false).unwrap();
        assert_abs_diff_eq!(a.effect().estimate, 2.0, epsilon = 1e-10);
        assert_eq!(a.n_groups, Some(2));
        let b = controlled_fit(&table, "dim", "usability", true, false).unwrap();
        assert!((b.effect().estimate - 2.0).abs() < 0.01);
    }

    #[test]
    fn controlled_needs_coverage() {
        let table = ModelTable::new(
            vec![
                ("dim".into(), num(&[1.0, 2.0, 3.0])),
                ("arch".into(), cat(&["a", "b", "c"])),
                ("m".into(), num(&[0.1, 0.2, 0.4])),
            ],
            &["m"],
            None,
        )
        .unwrap();
        assert!(matches!(controlled_fit(&table, "dim", "m", false, false), Err(Error::Coverage(_))));
    }

    #[test]
    fn global_noiseless_recovery_and_confounding() {
        let n = 20;
        let mut rng = crate::rng::seeded(3);
        let h: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let c1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let c2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let c3: Vec<&str> = (0..n).map(|i| ["x", "y", "z"][i % 3]).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 4.0 * h[i] - 1.0 * c1[i] + 0.5 * c2[i] + if c3[i] == "z" { 2.0 } else { 0.0 } + 3.0)
            .collect();
        let table = ModelTable::new(
            vec![
                ("h".into(), num(&h)),
                ("c1".into(), num(&c1)),
                ("c2".into(), num(&c2)),
                ("c3".into(), cat(&c3)),
                ("bad".into(), num(&h.iter().map(|v| 2.0 * v).collect::<Vec<_>>())),
                ("m".into(), num(&y)),
            ],
            &["m"],
            None,
        )
        .unwrap();
        let a = global_fit(&table, "h", &["c1", "c2", "c3"], "m", false, false).unwrap();
        assert_abs_diff_eq!(a.effect().estimate, 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.fit.coef("c3=z").unwrap().estimate, 2.0, epsilon = 1e-9);
        assert!(a.fit.coef("c3=x").is_none());
        match global_fit(&table, "h", &["c1", "bad"], "m", false, false).unwrap_err() {
            Error::RankDeficient { column, depends_on } => {
                assert_eq!(column, "bad");
                assert_eq!(depends_on, vec!["h".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_types_and_missing() {
        let text = "model,dim,arch,usability\nm1,128,rn50,0.2\nm2,,vit,0.3\nm3,512,vit,NA\n";
        let t = ModelTable::read_csv(text.as_bytes(), &["usability"], Some("model")).unwrap();
        assert_eq!(t.design_columns(), vec!["dim", "arch"]);
        assert!(matches!(t.column("dim").unwrap(), Column::Numeric(v) if v[1].is_none()));
        assert!(matches!(t.column("arch").unwrap(), Column::Categorical(_)));
        let bad = "a,m\n1,x\n";
        assert!(ModelTable::read_csv(bad.as_bytes(), &["m"], None).is_err());
    }
}
