//! Usability against probe generalization across encoders of growing capacity.

use riskdec::probe::LambdaPolicy;
use riskdec::synth::{frontier_csv, tradeoff_sweep, EncoderSpec, SweepConfig, SynthTask};

fn main() -> riskdec::Result<()> {
    let specs = [
        EncoderSpec::Constant { d_out: 1 },
        EncoderSpec::PcaPretrained { d_out: 4 },
        EncoderSpec::RandomProjection { d_out: 8, nonlinear: false, seed: 0 },
        EncoderSpec::Identity,
        EncoderSpec::RandomProjection { d_out: 128, nonlinear: true, seed: 0 },
        EncoderSpec::OneHotTrain,
    ];
    let cfg = SweepConfig { policy: LambdaPolicy::Fixed(1e-4), ..SweepConfig::default() };
    let rows = tradeoff_sweep(&SynthTask::gaussian_default(0), &specs, &[0, 1, 2], &cfg)?;
    print!("{}", frontier_csv(&rows)?);
    Ok(())
}
