//! Bayes risk of Gaussian tasks, and the probe optimizer against a lattice search.

use riskdec::fvec_io::FeatureDataset;
use riskdec::probe::{self, LambdaPolicy, TrainConfig};
use riskdec::synth::{self, Lattice, SynthTask};

fn main() -> riskdec::Result<()> {
    let two = SynthTask::two_gaussians(2.0, 1.0, 4, 10_000, 1000, 0);
    let oracle = synth::bayes_risk_oracle(&two)?;
    println!("two Gaussians, delta 2: Bayes risk {:.6} ({:?})", oracle.risk, oracle.method);
    let raw = synth::gen_gaussian_task(&two)?;
    let model = LambdaPolicy::default().fit(&raw.train, &TrainConfig::default())?;
    println!("probe population risk {:.6}", synth::two_class_population_risk(&two, &model)?);

    let ten = SynthTask::gaussian_default(0);
    let mc = synth::bayes_risk_monte_carlo(&ten, 200_000);
    println!("ten classes: Monte Carlo Bayes risk {:.4} +- {:.4}", mc.risk, mc.std_error.unwrap_or(0.0));

    let tiny = FeatureDataset::from_rows("tiny", &[vec![-1.0], vec![-0.2], vec![0.3], vec![1.2]], &[0, 1, 0, 1])?;
    let lambda = 0.5;
    let lattice = synth::brute_force_probe(&tiny, lambda, &Lattice { min: -3.0, max: 3.0, step: 0.001 })?;
    let trained = probe::train_probe(&tiny, lambda, &TrainConfig::default())?;
    let objective = probe::loss_and_grad(&trained, &tiny)?.0;
    println!("lattice minimum {:.6} over {} points, trained objective {objective:.6}", lattice.min_loss, lattice.points);
    Ok(())
}
