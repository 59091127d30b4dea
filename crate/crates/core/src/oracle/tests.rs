use super::synth::{generate, SynthParams};
use super::*;

fn pred(id: &str, level: f64, label: u32, top: &[(f64, u32)]) -> Prediction {
    Prediction { image_id: id.into(), loss_level: level, label, top: top.to_vec() }
}

#[test]
fn nth_confidence_and_correctness() {
    let top = [(0.7, 3), (0.2, 9), (0.1, 4)];
    assert_eq!(nth_confidence(&top, 1), Some(0.7));
    assert_eq!(nth_confidence(&top, 3), Some(0.1));
    assert_eq!(nth_confidence(&top, 4), None);
    assert!(top_n_correct(&top, 4, 3));
    assert!(!top_n_correct(&top, 4, 2));
}

#[test]
fn build_joins_dumps() {
    let front = PredictionDump {
        rows: vec![
            pred("a", 0.0, 1, &[(0.6, 1), (0.3, 2)]),
            pred("a", 0.01, 1, &[(0.5, 2), (0.4, 1)]),
            pred("b", 0.0, 7, &[(0.9, 8), (0.05, 7)]),
        ],
    };
    let back = PredictionDump { rows: vec![pred("a", 0.0, 1, &[(0.99, 1)]), pred("b", 0.0, 7, &[(0.8, 2)])] };
    let t = build_trace(&front, &back, 1).unwrap();
    let got: Vec<(f64, bool, bool)> = t.rows.iter().map(|r| (r.front_confidence, r.front_correct, r.back_correct)).collect();
    assert_eq!(got, vec![(0.6, true, true), (0.5, false, true), (0.9, false, false)]);
    assert!(matches!(build_trace(&front, &back, 2), Err(OracleError::ShortVector { .. })));
}

#[test]
fn build_rejects_mismatches() {
    let front = PredictionDump { rows: vec![pred("a", 0.0, 1, &[(0.6, 1)])] };
    let back = PredictionDump { rows: vec![pred("a", 0.0, 2, &[(0.6, 1)])] };
    assert!(matches!(build_trace(&front, &back, 1), Err(OracleError::IdMismatch { .. })));
    let back = PredictionDump { rows: vec![pred("z", 0.0, 1, &[(0.6, 1)])] };
    assert!(matches!(build_trace(&front, &back, 1), Err(OracleError::IdMismatch { .. })));
}

#[test]
fn dump_csv_round_trip_and_errors() {
    let d = PredictionDump {
        rows: vec![pred("a", 0.0, 1, &[(0.6, 1), (0.3, 2)]), pred("b", 0.005, 3, &[(0.25, 3)])],
    };
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    assert_eq!(PredictionDump::read_csv(&buf[..]).unwrap(), d);
    let bad = "image_id,loss_level,label,p1,l1,p2,l2\na,0,1,0.2,1,0.3,2\n";
    assert!(matches!(PredictionDump::read_csv(bad.as_bytes()), Err(OracleError::BadRow { row: 2, .. })));
    let odd = "image_id,loss_level,label,p1,l1\na,0,1,0.2\n";
    assert!(PredictionDump::read_csv(odd.as_bytes()).is_err());
}

#[test]
fn validation_flags_problems() {
    let mut t = ModelTrace::new(vec![
        TraceRow {
            image_id: "a".into(),
            loss_level: 0.0,
            front_confidence: 1.3,
            front_correct: true,
            back_correct: true,
            front_latency_ms: None,
            back_latency_ms: None,
        },
        TraceRow {
            image_id: "b".into(),
            loss_level: 0.01,
            front_confidence: 0.3,
            front_correct: false,
            back_correct: true,
            front_latency_ms: Some(-1.0),
            back_latency_ms: None,
        },
    ]);
    t.rows.push(t.rows[0].clone());
    let r = validate_trace(&t);
    let kinds: Vec<ViolationKind> = r.violations.iter().map(|v| v.kind).collect();
    for k in [
        ViolationKind::ConfidenceRange,
        ViolationKind::DuplicateKey,
        ViolationKind::NegativeLatency,
        ViolationKind::MissingLossZero,
        ViolationKind::MissingLossLevel,
    ] {
        assert!(kinds.contains(&k), "{k:?} missing from {kinds:?}");
    }
    assert!(!validate_trace(&ModelTrace::default()).is_clean());
}

#[test]
fn synthetic_trace_is_clean_and_matches_advertised_accuracy() {
    let p = SynthParams { images: 400, ..SynthParams::default() };
    let (front, back, meta) = generate(&p);
    let trace = build_trace(&front, &back, 1).unwrap();
    let report = validate_trace(&trace);
    assert!(report.is_clean(), "{:?}", &report.violations[..3.min(report.violations.len())]);
    assert_eq!(report.images, 400);
    assert_eq!(report.loss_levels, p.loss_levels);
    assert!(report.separation.unwrap().separated);
    // independent pass over the raw dump
    let zero: Vec<_> = front.rows.iter().filter(|r| r.loss_level == 0.0).collect();
    let acc = zero.iter().filter(|r| r.top[0].1 == r.label).count() as f64 / zero.len() as f64;
    assert!((acc - meta.front_accuracy_top1).abs() < 1e-9);
    let rows = trace.at_level(0.0);
    let mean = rows.iter().filter(|r| r.front_correct).count() as f64 / rows.len() as f64;
    assert!((mean - meta.front_accuracy_top1).abs() < 1e-9);
    // lossy levels hurt the frontend
    let lossy = trace.at_level(0.01);
    let lossy_acc = lossy.iter().filter(|r| r.front_correct).count() as f64 / lossy.len() as f64;
    assert!(lossy_acc < mean);
}

#[test]
fn synthetic_generation_is_deterministic() {
    let p = SynthParams { images: 50, ..SynthParams::default() };
    assert_eq!(generate(&p), generate(&p));
    let q = SynthParams { seed: 1, ..p.clone() };
    assert_ne!(generate(&p).0, generate(&q).0);
}
