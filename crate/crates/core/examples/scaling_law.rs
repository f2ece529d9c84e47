//! Fit the decomposition scaling law and the standard law to synthetic curves.

use riskdec::decomposition::{decompose, RiskEstimates};
use riskdec::scaling::{fit_decomposition_law, fit_standard_law, fit_with_holdout, predict_risk, Holdout, ScalingObservation};

fn main() -> riskdec::Result<()> {
    let n_full = 50_000.0;
    let mut obs = Vec::new();
    for (i, est) in [(0.10, 0.14, 0.17, 0.18), (0.10, 0.20, 0.21, 0.22), (0.12, 0.13, 0.19, 0.19)].iter().enumerate() {
        let c = decompose(&RiskEstimates::new(est.0, est.1, est.2, est.3), 0.0)?;
        for n in [n_full, 10_000.0, 1_000.0, 300.0, 100.0] {
            obs.push(ScalingObservation {
                encoder: format!("enc{i}"),
                components: c.clone(),
                n_full,
                n,
                observed_risk: predict_risk(&c, n_full, n, 0.3, 0.4),
                group: Some(format!("enc{i}")),
                p: None,
                setting: None,
            });
        }
    }
    let fit = fit_decomposition_law(&obs)?;
    println!("decomposition law: alpha {:.4}  w {:.4}  R2 {:.6}", fit.alpha, fit.w, fit.r2_train);
    let held = fit_with_holdout(&obs, &Holdout::Iid { seed: 0 })?;
    println!("two settings per encoder held out: R2 {:.6}", held.r2_test.unwrap_or(f64::NAN));

    let std = fit_standard_law(&obs)?;
    println!("standard law: {} groups, {} parameters, R2 {:.4}", std.groups.len(), std.n_params, std.r2_train);
    Ok(())
}
