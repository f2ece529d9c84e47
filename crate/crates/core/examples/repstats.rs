//! Effective dimension, uniformity and alignment of two synthetic encoders.

use ndarray::Array2;
use riskdec::repstats::rep_stats;
use riskdec::synth::{gen_gaussian_task, EncoderSpec, SynthTask};

fn main() -> riskdec::Result<()> {
    let raw = gen_gaussian_task(&SynthTask::gaussian_default(4))?;
    let specs = [
        EncoderSpec::PcaPretrained { d_out: 4 },
        EncoderSpec::Identity,
        EncoderSpec::RandomProjection { d_out: 32, nonlinear: true, seed: 1 },
    ];
    let noisy = EncoderSpec::NoisyIdentity { sigma_noise: 0.3, seed: 9 }.fit(&raw.test)?.encode(&raw.test)?;
    for spec in &specs {
        let enc = spec.fit(&raw.train)?;
        let z = enc.encode(&raw.test)?;
        let pairs: Option<Array2<f64>> = match spec {
            EncoderSpec::Identity => Some(noisy.features().to_owned()),
            _ => None,
        };
        let stats = rep_stats(z.features(), pairs.as_ref().map(|p| p.view()))?;
        println!("{spec:<32} {}", serde_json::to_string(&stats)?);
    }
    Ok(())
}
