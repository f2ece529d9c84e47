//! Controlled and global linear analysis of a design choice.

use riskdec::analysis::{controlled_fit, global_fit, Column, ModelTable};

fn main() -> riskdec::Result<()> {
    // risk = 0.4 - 0.05 log(epochs) + architecture offset
    let archs = ["rn50", "vit", "rn50", "vit", "rn50", "vit", "rn50", "vit"];
    let epochs = [100.0, 100.0, 300.0, 300.0, 800.0, 800.0, 1000.0, 1000.0];
    let noise = [0.004, -0.003, 0.001, 0.002, -0.004, 0.0, 0.003, -0.002];
    let risk: Vec<Option<f64>> = (0..8)
        .map(|i| {
            let offset = if archs[i] == "vit" { -0.03 } else { 0.0 };
            Some(0.4 - 0.05 * f64::ln(epochs[i]) + offset + noise[i])
        })
        .collect();
    let table = ModelTable::new(
        vec![
            ("arch".into(), Column::Categorical(archs.iter().map(|a| Some(a.to_string())).collect())),
            ("epochs".into(), Column::Numeric(epochs.iter().map(|&e| Some(e)).collect())),
            ("total".into(), Column::Numeric(risk)),
        ],
        &["total"],
        None,
    )?;
    for a in [
        controlled_fit(&table, "epochs", "total", true, false)?,
        global_fit(&table, "epochs", &["arch"], "total", true, false)?,
    ] {
        let e = a.effect();
        println!("{}: {} = {:.4} +- {:.4}, p = {:.2e}", a.method, e.name, e.estimate, e.std_error, e.p_value);
    }
    Ok(())
}
