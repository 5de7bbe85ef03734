use proptest::prelude::*;

use itdr::channel::{
    bounce_diagram, reflection_coefficient, synthesize_waveform, BounceLimits, Load, ProbePulse, Segment,
    SegmentedLine, Termination,
};

fn termination() -> impl Strategy<Value = Termination> {
    prop_oneof![
        Just(Termination::Open),
        Just(Termination::Short),
        Just(Termination::Matched),
        (1.0..500.0f64).prop_map(Termination::Resistive),
    ]
}

fn line() -> impl Strategy<Value = SegmentedLine> {
    let seg = (20.0..120.0f64, 0.02..1.5f64, 1.0e8..2.9e8f64).prop_map(|(z, l, v)| Segment::new(z, l, v));
    (1.0..200.0f64, prop::collection::vec(seg, 1..=4), termination())
        .prop_map(|(zs, segs, t)| SegmentedLine::new(zs, segs, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_antisymmetric_and_bounded(z1 in 1.0..1000.0f64, z2 in 1.0..1000.0f64) {
        let a = reflection_coefficient(z1, Load::Ohms(z2)).unwrap();
        let b = reflection_coefficient(z2, Load::Ohms(z1)).unwrap();
        prop_assert!((a + b).abs() < 1e-15);
        prop_assert!(a.abs() < 1.0);
    }

    #[test]
    fn passive_lines_never_amplify(line in line()) {
        for e in bounce_diagram(&line, BounceLimits::default()).unwrap() {
            prop_assert!(e.gain.abs() <= 1.0 + 1e-12, "{:?}", e);
        }
    }

    #[test]
    fn events_sorted_and_above_floor(line in line()) {
        let limits = BounceLimits::default();
        let ev = bounce_diagram(&line, limits).unwrap();
        prop_assert!(ev.windows(2).all(|w| w[0].arrival_time <= w[1].arrival_time));
        prop_assert!(ev.iter().all(|e| e.gain.abs() >= limits.min_gain && e.order <= limits.max_order));
    }

    #[test]
    fn waveform_linear_in_amplitude(line in line(), a in -1.0..1.0f64, k in -3.0..3.0f64, t in 0.0..30e-9f64) {
        let ev = bounce_diagram(&line, BounceLimits::default()).unwrap();
        let p1 = ProbePulse::new(a, 1e-9, 0.0).unwrap();
        let p2 = ProbePulse::new(k * a, 1e-9, 0.0).unwrap();
        let s1 = synthesize_waveform(&ev, &p1, t);
        let s2 = synthesize_waveform(&ev, &p2, t);
        prop_assert!((s2 - k * s1).abs() <= 1e-12 * (1.0 + s1.abs()));
    }

    #[test]
    fn matched_uniform_line_only_incident(z in 20.0..120.0f64, n in 1usize..4, len in 0.05..1.0f64) {
        let segs = (0..n).map(|_| Segment::new(z, len, 2e8)).collect();
        let line = SegmentedLine::new(z, segs, Termination::Matched).unwrap();
        let ev = bounce_diagram(&line, BounceLimits::default()).unwrap();
        prop_assert_eq!(ev.len(), 1);
        prop_assert_eq!(ev[0].arrival_time, 0.0);
        prop_assert_eq!(ev[0].gain, 1.0);
    }
}

#[test]
fn open_cable_peaks_separated() {
    let line = SegmentedLine::new(
        40.0,
        vec![Segment::new(50.0, 0.2175, 1.5e8), Segment::new(48.0, 1.80, 1.85e8)],
        Termination::Open,
    )
    .unwrap();
    let ev = bounce_diagram(&line, BounceLimits::default()).unwrap();
    let first = ev.iter().find(|e| e.order == 1).unwrap();
    let end = ev.iter().find(|e| e.order == 1 && e.gain > 0.5).unwrap();
    assert!((end.arrival_time - first.arrival_time - 19.459e-9).abs() < 1e-12);
}
