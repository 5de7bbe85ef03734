use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use itdr::channel::{ProbePulse, Segment, SegmentedLine, Termination};
use itdr::frontend::NoiseEnvironment;
use itdr::sampler::{average_probabilities, run_measurement, Dut, FrontendParams, MeasurementConfig, SampleTensor};

fn config() -> impl Strategy<Value = MeasurementConfig> {
    (2usize..6, 9usize..20, 8usize..80).prop_map(|(p, m, j)| MeasurementConfig::new(10e-9, p, m, j).unwrap())
}

fn dut(amplitude: f64, launch: f64) -> Dut {
    let line = SegmentedLine::new(40.0, vec![Segment::new(50.0, 0.2175, 1.5e8)], Termination::Open).unwrap();
    Dut::new(line, ProbePulse::new(amplitude, 1e-9, launch).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedule_is_injective_and_ordered(cfg in config()) {
        let mut prev = f64::NEG_INFINITY;
        for j in 0..cfg.phases {
            for m in 0..cfg.repetitions {
                for p in 0..cfg.sets {
                    let t = cfg.wall_time(j, m, p);
                    prop_assert!(t > prev);
                    prev = t;
                }
            }
        }
    }

    #[test]
    fn waveform_times_tile_the_window(cfg in config()) {
        let mut times: Vec<f64> = (0..cfg.phases)
            .flat_map(|j| (0..cfg.sets).map(move |p| (j, p)))
            .map(|(j, p)| cfg.waveform_time(j, p))
            .collect();
        times.sort_by(f64::total_cmp);
        prop_assert_eq!(times.len(), cfg.sets * cfg.phases);
        prop_assert_eq!(times[0], 0.0);
        for w in times.windows(2) {
            prop_assert!(((w[1] - w[0]) - cfg.tau_d).abs() < 1e-6 * cfg.tau_d);
        }
        prop_assert!(*times.last().unwrap() < cfg.sets as f64 * cfg.t_s);
        let mut idx: Vec<usize> = (0..cfg.phases)
            .flat_map(|j| (0..cfg.sets).map(move |p| (j, p)))
            .map(|(j, p)| cfg.ets_index(j, p))
            .collect();
        idx.sort();
        prop_assert!(idx.iter().enumerate().all(|(i, &k)| i == k));
    }

    #[test]
    fn blind_spot_width(cfg in config(), launch_cycles in 0usize..2, width in 0.2e-9..3e-9f64) {
        let launch = launch_cycles as f64 * cfg.t_s;
        let line = SegmentedLine::new(50.0, vec![Segment::new(50.0, 0.1, 2e8)], Termination::Matched).unwrap();
        let pulse = ProbePulse::new(0.5, width, launch).unwrap();
        let r = cfg.blind_spot(&pulse);
        let expected = (width / cfg.tau_d - 1e-9).ceil() as usize;
        prop_assert_eq!(r.len(), expected.min(cfg.ets_len() - r.start));
        let d = Dut::new(line, pulse);
        let env = NoiseEnvironment::quiet();
        let t = run_measurement(&cfg, &d, &FrontendParams::default(), &env, &mut ChaCha8Rng::seed_from_u64(1), true).unwrap();
        for (j, _, p, bit) in t.iter() {
            if r.contains(&cfg.ets_index(j, p)) {
                prop_assert!(!bit);
            }
        }
    }
}

#[test]
fn same_seed_same_tensor() {
    let cfg = MeasurementConfig::new(10e-9, 4, 30, 56).unwrap();
    let env = NoiseEnvironment::default();
    let d = dut(0.02, 0.0);
    let fe = FrontendParams::default();
    let a = run_measurement(&cfg, &d, &fe, &env, &mut ChaCha8Rng::seed_from_u64(3), true).unwrap();
    let b = run_measurement(&cfg, &d, &fe, &env, &mut ChaCha8Rng::seed_from_u64(3), true).unwrap();
    let c = run_measurement(&cfg, &d, &fe, &env, &mut ChaCha8Rng::seed_from_u64(4), true).unwrap();
    assert_eq!(a.bits(), b.bits());
    assert_ne!(a.bits(), c.bits());
}

#[test]
fn probe_off_ignores_the_line() {
    let cfg = MeasurementConfig::new(10e-9, 4, 30, 56).unwrap();
    let env = NoiseEnvironment::default();
    let fe = FrontendParams::default();
    let a = run_measurement(&cfg, &dut(0.6, 0.0), &fe, &env, &mut ChaCha8Rng::seed_from_u64(5), false).unwrap();
    let b = run_measurement(&cfg, &dut(-0.2, 3e-9), &fe, &env, &mut ChaCha8Rng::seed_from_u64(5), false).unwrap();
    assert_eq!(a.bits(), b.bits());
}

#[test]
fn averaging_fixtures() {
    let cfg = MeasurementConfig::new(10e-9, 2, 9, 8).unwrap();
    let ones = SampleTensor::from_bits(cfg.clone(), 0.0, vec![true; 2 * 9 * 8]).unwrap();
    assert!(average_probabilities(&ones).values().iter().all(|&v| v == 1.0));

    let mut t = SampleTensor::new(cfg.clone(), 0.0);
    for m in 0..4 {
        t.set(3, m, 1, m % 2 == 0);
    }
    assert!((average_probabilities(&t).get(3, 1) - 2.0 / 9.0).abs() < 1e-15);
}

#[test]
fn averaged_bernoulli_coverage() {
    let cfg = MeasurementConfig::new(10e-9, 2, 10_000, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let half = 1.96 * (0.21f64 / 1e4).sqrt();
    let trials = 1000;
    let mut inside = 0;
    for _ in 0..trials {
        let mut t = SampleTensor::new(cfg.clone(), 0.0);
        for m in 0..cfg.repetitions {
            t.set(0, m, 0, rng.random_bool(0.3));
        }
        if (average_probabilities(&t).get(0, 0) - 0.3).abs() <= half {
            inside += 1;
        }
    }
    assert!(inside as f64 / trials as f64 >= 0.94, "{inside}");
}
