//! Fit a linear probe with tuned regularization and score it.

use riskdec::fvec_io::split::complement;
use riskdec::fvec_io::stratified_fraction;
use riskdec::probe::{self, LambdaPolicy, TrainConfig, DEFAULT_LAMBDA_GRID};
use riskdec::synth::{gen_gaussian_task, SynthTask};

fn main() -> riskdec::Result<()> {
    let raw = gen_gaussian_task(&SynthTask::gaussian_default(1))?;
    let cfg = TrainConfig::default();

    let val_idx = stratified_fraction(&raw.train, 0.1, 3)?.indices;
    let fit_part = raw.train.select(&complement(&val_idx, raw.train.n()))?;
    let val = raw.train.select(&val_idx)?;
    let tuned = probe::tune_lambda(&fit_part, &val, &DEFAULT_LAMBDA_GRID, &cfg, false)?;
    for (lambda, risk) in &tuned.val_risks {
        println!("lambda {lambda:>8}  validation risk {risk:.3}");
    }
    println!("picked lambda = {}", tuned.best_lambda);

    let model = LambdaPolicy::default().fit(&raw.train, &cfg)?;
    println!(
        "converged {} after {} iterations; train risk {:.3}, test risk {:.3}",
        model.converged,
        model.iterations,
        probe::zero_one_risk(&model, &raw.train)?,
        probe::zero_one_risk(&model, &raw.test)?
    );
    Ok(())
}
