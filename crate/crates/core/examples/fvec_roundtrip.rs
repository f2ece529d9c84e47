//! Write a small featurized dataset to FVEC, read it back, and split it.

use riskdec::fvec_io::{load_fvec, make_split_plan, save_fvec, stratified_kshot, FeatureDataset, Partition};

fn main() -> riskdec::Result<()> {
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i) as f64 / 10.0]).collect();
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let train = FeatureDataset::from_rows("toy", &rows, &labels)?;

    let dir = tempfile::tempdir().map_err(|e| riskdec::Error::Format(e.to_string()))?;
    let path = dir.path().join("toy.fvec");
    save_fvec(&train.clone().into_f32(), &path)?;
    let back = load_fvec(&path)?;
    println!("{} rows x {} dims, {} classes, stored as {:?}", back.n(), back.d(), back.n_classes(), back.precision());

    let two_shot = stratified_kshot(&back, 2, 7)?;
    println!("2-shot subset: {:?}", two_shot.indices);

    let plan = make_split_plan(&train, &train, 3, 1)?;
    println!("S_sub = {:?}", plan.sub());
    println!("S_tr \\ S_sub has {} rows", plan.indices(Partition::TrainMinusSub).len());
    Ok(())
}
