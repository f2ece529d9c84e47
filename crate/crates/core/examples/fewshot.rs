//! Risk under the standard label budgets, rendered as accuracies.

use riskdec::decomposition::{fewshot_suite, Setting};
use riskdec::probe::{LambdaPolicy, TrainConfig};
use riskdec::report::{fewshot_csv, render_accuracy_row};
use riskdec::synth::{gen_gaussian_task, SynthTask};

fn main() -> riskdec::Result<()> {
    let task = SynthTask { n_tr: 3000, ..SynthTask::gaussian_default(2) };
    let raw = gen_gaussian_task(&task)?;
    let settings = Setting::defaults();
    let results = fewshot_suite(&raw.train, &raw.test, &settings, &[0, 1, 2], &LambdaPolicy::default(), &TrainConfig::default())?;
    print!("{}", fewshot_csv(&results)?);
    let means: Vec<f64> = results.iter().filter_map(|r| r.mean).collect();
    println!("accuracy: {}", render_accuracy_row(&means));
    Ok(())
}
