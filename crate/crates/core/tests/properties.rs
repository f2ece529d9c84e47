use ndarray::Array2;
use proptest::prelude::*;
use riskdec::decomposition::{decompose, RiskEstimates};
use riskdec::fvec_io::{fvec, FeatureDataset};
use riskdec::report::{radar_normalize, MetricTable};
use riskdec::repstats;
use riskdec::scaling::predict_risk;

fn estimates() -> impl Strategy<Value = RiskEstimates> {
    (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b, c, d)| RiskEstimates::new(a, b, c, d))
}

proptest! {
    #[test]
    fn law_is_monotone_in_labels(
        ff in 0.1f64..0.4, du in 0.0f64..0.2, dp in 0.0f64..0.2, de in -0.1f64..0.1,
        alpha in 0.01f64..2.0, w in 0.0f64..=1.0, n in 1.0f64..1e5,
    ) {
        let est = RiskEstimates::new(ff, ff + du, ff + du + dp, ff + du + dp + de);
        let c = decompose(&est, 0.0).unwrap();
        let big = predict_risk(&c, 1e5, n, alpha, w);
        let small = predict_risk(&c, 1e5, n / 2.0, alpha, w);
        prop_assert!(small >= big);
    }

    #[test]
    fn telescoping(est in estimates(), bayes in 0.0f64..0.1) {
        let c = decompose(&est, bayes).unwrap();
        prop_assert!((c.component_sum() - est.hr_us).abs() < 1e-12);
    }

    #[test]
    fn fvec_roundtrip(n in 1usize..20, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = riskdec::rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rand::Rng::random::<f64>(&mut rng)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let ds = FeatureDataset::from_rows("p", &rows, &labels).unwrap();
        let back = fvec::decode(&fvec::encode(&ds).unwrap(), std::path::Path::new("p")).unwrap();
        prop_assert_eq!(back.features(), ds.features());
        prop_assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn uniformity_in_range(vals in prop::collection::vec(-5.0f64..5.0, 12)) {
        let z = Array2::from_shape_vec((4, 3), vals).unwrap();
        prop_assume!(z.rows().into_iter().all(|r| r.iter().any(|v| v.abs() > 1e-3)));
        let u = repstats::uniformity(z.view()).unwrap();
        prop_assert!((-8.0..=0.0).contains(&u));
    }

    #[test]
    fn alignment_symmetric(a in prop::collection::vec(-5.0f64..5.0, 6), b in prop::collection::vec(-5.0f64..5.0, 6)) {
        let (za, zb) = (Array2::from_shape_vec((3, 2), a).unwrap(), Array2::from_shape_vec((3, 2), b).unwrap());
        prop_assert_eq!(repstats::alignment(za.view(), zb.view()).unwrap(), repstats::alignment(zb.view(), za.view()).unwrap());
    }

    #[test]
    fn radar_best_is_one_worst_is_zero(vals in prop::collection::vec(0.0f64..1.0, 6)) {
        let table = MetricTable {
            models: vec!["a".into(), "b".into(), "c".into()],
            metrics: vec!["x".into(), "y".into()],
            values: vals.chunks(2).map(<[f64]>::to_vec).collect(),
        };
        let radar = radar_normalize(&table).unwrap();
        for (j, m) in radar.metrics.iter().enumerate() {
            let k = table.metrics.iter().position(|t| t == m).unwrap();
            let col: Vec<f64> = radar.values.iter().map(|r| r[j]).collect();
            let raw: Vec<f64> = table.values.iter().map(|r| r[k]).collect();
            let best = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let worst = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (v, r) in col.iter().zip(&raw) {
                prop_assert!((0.0..=1.0).contains(v));
                if *r == best { prop_assert_eq!(*v, 1.0); }
                if *r == worst { prop_assert_eq!(*v, 0.0); }
            }
        }
    }
}
