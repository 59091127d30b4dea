use proptest::prelude::*;

use super::*;

const TOY: [Outcome3; 4] = [(0.9, true, true), (0.8, false, true), (0.4, true, false), (0.2, false, true)];

/// Direct evaluation of every candidate, no sorting tricks.
fn brute_threshold(rows: &[Outcome3], a: f64) -> Option<f64> {
    let mut cands: Vec<f64> = rows.iter().map(|r| r.0).collect();
    cands.push(0.0);
    cands.push(ALL_BACKEND);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    cands.into_iter().find(|&t| {
        let mut ok = 0;
        for &(c, f, b) in rows {
            ok += if c >= t { f as usize } else { b as usize };
        }
        ok as f64 / rows.len() as f64 >= a
    })
}

#[test]
fn toy_trace() {
    assert_eq!(combined_accuracy(&TOY, 0.5).unwrap(), 0.5);
    assert_eq!(combined_accuracy(&TOY, 0.0).unwrap(), 0.5);
    assert_eq!(combined_accuracy(&TOY, ALL_BACKEND).unwrap(), 0.75);
    let curve = ThresholdCurve::new(&TOY).unwrap();
    assert_eq!(curve.candidates, vec![0.0, 0.2, 0.4, 0.8, 0.9, ALL_BACKEND]);
    let e = &calibrate_rows(&TOY, &[0.75]).unwrap()[0];
    assert_eq!(e.threshold, brute_threshold(&TOY, 0.75).unwrap());
    assert_eq!(e.threshold, 0.4);
    assert_eq!(e.predicted_accuracy, 0.75);
    assert_eq!(e.predicted_frontend_fraction, 0.75);
}

#[test]
fn boundaries() {
    assert_eq!(calibrate_rows(&TOY, &[0.5]).unwrap()[0].threshold, 0.0);
    let e = &calibrate_rows(&TOY, &[0.8]).unwrap()[0];
    assert!(!e.satisfiable);
    assert_eq!(e.threshold, ALL_BACKEND);
    assert_eq!(combined_accuracy(&[], 0.5), Err(ConfidenceError::EmptyTrace));
    assert_eq!(calibrate_rows(&TOY, &[1.2]), Err(ConfidenceError::BadRequirement(1.2)));
}

fn toy_table() -> CalibrationTable {
    CalibrationTable {
        provenance: String::new(),
        buckets: vec![
            BucketTable { loss_level: 0.0, rows: 4, entries: calibrate_rows(&TOY, &[0.5, 0.75, 0.8]).unwrap() },
            BucketTable { loss_level: 0.01, rows: 4, entries: calibrate_rows(&TOY, &[0.75]).unwrap() },
        ],
    }
}

#[test]
fn arbiter() {
    let t = toy_table();
    assert!(arbitrate(&t, 0.75, 0.0, 1.0, &[1]).unwrap().is_frontend());
    assert!(!arbitrate(&t, 0.75, 0.0, 0.3, &[1]).unwrap().is_frontend());
    // 0.6 resolves to the 0.75 entry
    assert!(!arbitrate(&t, 0.6, 0.0, 0.3, &[1]).unwrap().is_frontend());
    assert!(arbitrate(&t, 0.5, 0.0, 0.0, &[1]).unwrap().is_frontend());
    // loss between buckets uses the next one up; past the last, fall back
    assert!(arbitrate(&t, 0.75, 0.004, 0.95, &[1]).unwrap().is_frontend());
    assert_eq!(arbitrate(&t, 0.75, 0.02, 1.0, &[1]).unwrap(), ArbiterDecision::Fallback { threshold: None });
    assert_eq!(arbitrate(&t, 0.8, 0.0, 1.0, &[1]), Err(ConfidenceError::UnsatisfiableRequirement(0.8)));
    assert_eq!(arbitrate(&t, 0.9, 0.0, 1.0, &[1]), Err(ConfidenceError::NotCalibrated(0.9)));
    match arbitrate(&t, 0.75, 0.0, 0.95, &[4, 2]).unwrap() {
        ArbiterDecision::FrontendAnswer { labels, threshold, .. } => {
            assert_eq!(labels, vec![4, 2]);
            assert_eq!(threshold, 0.4);
        }
        d => panic!("{d:?}"),
    }
}

fn arb_rows() -> impl Strategy<Value = Vec<Outcome3>> {
    // coarse confidences so ties are common
    let conf = prop_oneof![(0u32..=20).prop_map(|k| k as f64 / 20.0), 0.0f64..=1.0];
    proptest::collection::vec((conf, any::<bool>(), any::<bool>()), 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn calibrate_matches_brute_force(rows in arb_rows(), a in 0.0f64..=1.0) {
        let e = &calibrate_rows(&rows, &[a]).unwrap()[0];
        match brute_threshold(&rows, a) {
            Some(t) => {
                prop_assert!(e.satisfiable);
                prop_assert_eq!(e.threshold, t);
                let replay = rows.iter().filter(|&&(c, f, b)| if c >= e.threshold { f } else { b }).count();
                prop_assert!(replay as f64 / rows.len() as f64 >= a);
                prop_assert_eq!(e.predicted_accuracy, replay as f64 / rows.len() as f64);
            }
            None => prop_assert!(!e.satisfiable),
        }
    }

    #[test]
    fn curve_agrees_with_direct_evaluation(rows in arb_rows()) {
        let curve = ThresholdCurve::new(&rows).unwrap();
        for (k, &t) in curve.candidates.iter().enumerate() {
            prop_assert_eq!(curve.accuracy(k), combined_accuracy(&rows, t).unwrap());
        }
        for w in curve.handled.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let front = rows.iter().filter(|r| r.1).count() as f64 / rows.len() as f64;
        let back = rows.iter().filter(|r| r.2).count() as f64 / rows.len() as f64;
        prop_assert_eq!(combined_accuracy(&rows, 0.0).unwrap(), front);
        prop_assert_eq!(combined_accuracy(&rows, ALL_BACKEND).unwrap(), back);
    }

    #[test]
    fn minimality(rows in arb_rows(), a in 0.0f64..=1.0) {
        let curve = ThresholdCurve::new(&rows).unwrap();
        if let Some(k) = curve.first_meeting(a) {
            if k > 0 {
                prop_assert!(curve.accuracy(k - 1) < a);
            }
        }
    }

    #[test]
    fn table_fraction_non_increasing_in_threshold(rows in arb_rows(),
                                                 reqs in proptest::collection::vec(0.0f64..=1.0, 1..8)) {
        let mut es = calibrate_rows(&rows, &reqs).unwrap();
        es.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
        for w in es.windows(2) {
            prop_assert!(w[0].predicted_frontend_fraction >= w[1].predicted_frontend_fraction);
        }
    }
}
