//! Presentation and persistence: radar-normalized summaries, accuracy
//! rendering, the result store and the report bundle tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::decomposition::{RiskComponents, Setting, SettingResult};
use crate::error::{Error, Result};

/// `100 (1 - risk)` with one decimal.
pub fn accuracy(risk: f64) -> String {
    format!("{:.1}", 100.0 * (1.0 - risk))
}

/// Accuracies joined by ` / `, as in the usual results tables.
pub fn render_accuracy_row(risks: &[f64]) -> String {
    risks.iter().map(|&r| accuracy(r)).collect::<Vec<_>>().join(" / ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub models: Vec<String>,
    pub metrics: Vec<String>,
    /// `values[i][j]` is metric `j` of model `i`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarTable {
    pub models: Vec<String>,
    pub metrics: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Constant columns, left out.
    pub dropped: Vec<String>,
}

/// Per metric, `1 - (m - min) / (max - min)`: the lowest risk maps to 1 and
/// the highest to 0.
pub fn radar_normalize(table: &MetricTable) -> Result<RadarTable> {
    if table.models.len() < 2 {
        return Err(Error::Contract(format!(
            "radar normalization needs at least 2 models, got {}",
            table.models.len()
        )));
    }
    if table.values.len() != table.models.len()
        || table.values.iter().any(|r| r.len() != table.metrics.len())
    {
        return Err(Error::Contract("metric table is not rectangular".into()));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (j, name) in table.metrics.iter().enumerate() {
        let col: Vec<f64> = table.values.iter().map(|r| r[j]).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            log::warn!("metric `{name}` is constant across models and is dropped from the radar");
            dropped.push(name.clone());
        } else {
            kept.push((j, lo, hi));
        }
    }
    Ok(RadarTable {
        models: table.models.clone(),
        metrics: kept.iter().map(|&(j, _, _)| table.metrics[j].clone()).collect(),
        values: table
            .values
            .iter()
            .map(|row| kept.iter().map(|&(j, lo, hi)| 1.0 - (row[j] - lo) / (hi - lo)).collect())
            .collect(),
        dropped,
    })
}

/// Fixed column order of the per-model component table.
pub const COMPONENT_COLUMNS: [&str; 4] = ["approx", "usability", "probe_gen", "encoder_gen"];

/// One row per model: the four components, then the mean risk of each of the
/// default label-budget settings (empty when not measured).
pub fn components_csv(rows: &[(String, Option<RiskComponents>, Vec<SettingResult>)]) -> Result<String> {
    let settings = Setting::defaults();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string()];
    header.extend(COMPONENT_COLUMNS.iter().map(|s| s.to_string()));
    header.extend(settings.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (model, comps, fewshot) in rows {
        let mut rec = vec![model.clone()];
        match comps {
            Some(c) => rec.extend([c.approx, c.usability, c.probe_gen, c.encoder_gen].map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        for s in &settings {
            let v = fewshot.iter().find(|r| r.setting == *s).and_then(|r| r.mean);
            rec.push(v.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Frozen column order of the few-shot table.
pub const FEWSHOT_COLUMNS: [&str; 7] =
    ["setting", "mean_risk", "std", "seeds", "mean_n_train", "accuracy", "infeasible"];

pub fn fewshot_csv(results: &[SettingResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FEWSHOT_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in results {
        w.write_record([
            r.setting.to_string(),
            opt(r.mean),
            opt(r.std),
            r.per_seed.len().to_string(),
            opt(r.mean_n_train()),
            r.mean.map(accuracy).unwrap_or_default(),
            r.infeasible.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Plain-text component table.
pub fn component_table(c: &RiskComponents) -> String {
    let mut s = String::new();
    for (name, v) in [
        ("approximation", c.approx),
        ("usability", c.usability),
        ("probe generalization", c.probe_gen),
        ("encoder generalization", c.encoder_gen),
    ] {
        s.push_str(&format!("{name:<24}{v:>10.4}\n"));
    }
    s.push_str(&format!("{:<24}{:>10.4}\n", "total risk", c.total));
    if !c.flags.is_empty() {
        let flags: Vec<String> = c.flags.iter().map(|f| format!("{f:?}")).collect();
        s.push_str(&format!("flags: {}\n", flags.join(", ")));
    }
    s
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(content_hash(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// A stored result with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDoc {
    pub command: String,
    pub encoder: String,
    pub config_hash: String,
    pub config: Value,
    pub result: Value,
}

/// Directory of JSON result documents, one file per
/// `(command, encoder, config hash)`.
#[derive(Debug, Clone)]
pub struct ResultStore {
    root: PathBuf,
}

fn safe_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

impl ResultStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(ResultStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Hash of the canonical JSON of the resolved configuration.
    pub fn key(command: &str, encoder: &str, config: &Value) -> String {
        // serde_json maps are ordered by key, so the text is canonical.
        let text = serde_json::json!({"command": command, "encoder": encoder, "config": config}).to_string();
        content_hash(text.as_bytes())
    }

    fn path(&self, command: &str, encoder: &str, hash: &str) -> PathBuf {
        self.root
            .join(safe_component(command))
            .join(format!("{}-{}.json", safe_component(encoder), &hash[..16]))
    }

    pub fn get(&self, command: &str, encoder: &str, config: &Value) -> Result<Option<StoredDoc>> {
        let hash = Self::key(command, encoder, config);
        let path = self.path(command, encoder, &hash);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let doc: StoredDoc = serde_json::from_str(&text)?;
        Ok((doc.config_hash == hash).then_some(doc))
    }

    pub fn put(&self, command: &str, encoder: &str, config: &Value, result: Value) -> Result<StoredDoc> {
        let hash = Self::key(command, encoder, config);
        let doc = StoredDoc {
            command: command.to_string(),
            encoder: encoder.to_string(),
            config_hash: hash.clone(),
            config: config.clone(),
            result,
        };
        let path = self.path(command, encoder, &hash);
        write_atomic(&path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
        Ok(doc)
    }

    /// Returns the stored document, computing and storing it on a miss or
    /// when `force` is set.
    pub fn get_or_run<F>(&self, command: &str, encoder: &str, config: &Value, force: bool, run: F) -> Result<(StoredDoc, bool)>
    where
        F: FnOnce() -> Result<Value>,
    {
        if !force {
            if let Some(doc) = self.get(command, encoder, config)? {
                return Ok((doc, true));
            }
        }
        Ok((self.put(command, encoder, config, run()?)?, false))
    }

    /// Every document of `command`, ordered by encoder then file name.
    pub fn list(&self, command: &str) -> Result<Vec<StoredDoc>> {
        let dir = self.root.join(safe_component(command));
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Ok(serde_json::from_str(&text)?)
            })
            .collect()
    }

    /// Latest document of `command` per encoder, by modification time and
    /// then file name.
    pub fn latest_by_encoder(&self, command: &str) -> Result<BTreeMap<String, StoredDoc>> {
        let dir = self.root.join(safe_component(command));
        let mut out = BTreeMap::new();
        if !dir.exists() {
            return Ok(out);
        }
        let mut entries: Vec<(std::time::SystemTime, PathBuf)> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .map(|e| {
                let t = e.metadata().and_then(|m| m.modified()).unwrap_or(std::time::UNIX_EPOCH);
                (t, e.path())
            })
            .collect();
        entries.sort();
        for (_, p) in entries {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let doc: StoredDoc = serde_json::from_str(&text)?;
            out.insert(doc.encoder.clone(), doc);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn accuracy_rendering() {
        assert_eq!(render_accuracy_row(&[0.263, 0.445, 0.596]), "73.7 / 55.5 / 40.4");
        assert_eq!(render_accuracy_row(&[0.238, 0.438, 0.631]), "76.2 / 56.2 / 36.9");
    }

    #[test]
    fn radar_two_models() {
        let t = MetricTable {
            models: vec!["a".into(), "b".into()],
            metrics: vec!["risk".into(), "flat".into()],
            values: vec![vec![0.2, 0.5], vec![0.4, 0.5]],
        };
        let r = radar_normalize(&t).unwrap();
        assert_eq!(r.values, vec![vec![1.0], vec![0.0]]);
        assert_eq!(r.dropped, vec!["flat".to_string()]);
        let one = MetricTable { models: vec!["a".into()], metrics: vec![], values: vec![vec![]] };
        assert!(radar_normalize(&one).is_err());
    }

    #[test]
    fn store_hits_and_force() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::open(dir.path()).unwrap();
        let cfg = json!({"seed": 1, "train": "a.fvec"});
        let mut calls = 0;
        let (a, hit) = store
            .get_or_run("decompose", "enc", &cfg, false, || {
                calls += 1;
                Ok(json!({"total": 0.25}))
            })
            .unwrap();
        assert!(!hit);
        let (b, hit) = store.get_or_run("decompose", "enc", &cfg, false, || unreachable!()).unwrap();
        assert!(hit);
        assert_eq!(a, b);
        let (_, hit) = store
            .get_or_run("decompose", "enc", &cfg, true, || {
                calls += 1;
                Ok(json!({"total": 0.25}))
            })
            .unwrap();
        assert!(!hit);
        assert_eq!(calls, 2);
        let other = json!({"seed": 2, "train": "a.fvec"});
        assert!(store.get("decompose", "enc", &other).unwrap().is_none());
        assert_eq!(store.list("decompose").unwrap().len(), 1);
    }

    #[test]
    fn component_csv_columns() {
        let csv = components_csv(&[("m".into(), None, vec![])]).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "model,approx,usability,probe_gen,encoder_gen,100%,30-shot,1%,5-shot,3-shot"
        );
    }
}
