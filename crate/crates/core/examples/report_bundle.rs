//! Store two decomposition results and build the report tables from the store.

use std::collections::BTreeMap;

use riskdec::cli::build_report;
use riskdec::decomposition::{decompose, RiskEstimates};
use riskdec::report::ResultStore;
use serde_json::json;

fn main() -> riskdec::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| riskdec::Error::Format(e.to_string()))?;
    let store = ResultStore::open(dir.path())?;
    for (name, est) in [("mae", (0.08, 0.20, 0.23, 0.25)), ("dino", (0.08, 0.12, 0.16, 0.17))] {
        let comps = decompose(&RiskEstimates::new(est.0, est.1, est.2, est.3), 0.0)?;
        let config = json!({"encoder": name});
        store.put("decompose", name, &config, json!({"components": comps, "n_train": 1000}))?;
    }
    let decomp = store.latest_by_encoder("decompose")?;
    for (file, text) in build_report(&decomp, &BTreeMap::new(), &[])? {
        println!("== {file}\n{text}");
    }
    Ok(())
}
