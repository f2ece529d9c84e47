//! Decompose the risk of a random-projection encoder on the synthetic task.

use riskdec::decomposition::{estimate_components, RefRisk};
use riskdec::fvec_io::{default_sub_size, make_split_plan};
use riskdec::probe::{LambdaPolicy, TrainConfig};
use riskdec::report::component_table;
use riskdec::synth::{bayes_risk_oracle, gen_gaussian_task, EncoderSpec, SynthTask};

fn main() -> riskdec::Result<()> {
    let task = SynthTask::gaussian_default(5);
    let raw = gen_gaussian_task(&task)?;
    let encoder = EncoderSpec::RandomProjection { d_out: 8, nonlinear: false, seed: 3 }.fit(&raw.train)?;
    let (train, test) = (encoder.encode(&raw.train)?, encoder.encode(&raw.test)?);

    let plan = make_split_plan(&train, &test, default_sub_size(train.n(), test.n()), 0)?;
    let (est, comps) = estimate_components(
        &train,
        &test,
        &plan,
        RefRisk::Raw(&raw.train),
        &LambdaPolicy::default(),
        &TrainConfig::default(),
    )?;
    println!("hr_FF {:.3}  hr_AF {:.3}  hr_AS {:.3}  hr_US {:.3}", est.hr_ff, est.hr_af, est.hr_as, est.hr_us);
    print!("{}", component_table(&comps));

    let bayes = bayes_risk_oracle(&task)?;
    println!("\nexcess risk view (Bayes risk {:.4}):", bayes.risk);
    print!("{}", component_table(&comps.with_bayes(bayes.risk)?));
    Ok(())
}
