//! Bias autocalibration: find the delay tap that puts the no-probe output
//! at p = 0.5 for several comparator offsets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use itdr::frontend::{ComparatorParams, JitterClock, NoiseEnvironment};
use itdr::sampler::{calibrate, FrontendParams, MeasurementConfig};

fn main() {
    let cfg = MeasurementConfig::reference();
    let env = NoiseEnvironment::default();
    println!("{:>11}  {:>10}  {:>4}  {:>11}  {:>9}", "offset (mV)", "hyst (mV)", "tap", "bias (mV)", "p - 0.5");
    for (offset, hyst) in [(0.0, 0.0), (3e-3, 2e-3), (-40e-3, 0.0), (0.25, 5e-3), (0.58, 0.0)] {
        let fe = FrontendParams::new(
            ComparatorParams {
                offset_voltage: offset,
                hysteresis_width: hyst,
                thermal_sigma: 1e-3,
            },
            JitterClock::default(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        match calibrate(&cfg, &fe, &env, 1000, &mut rng) {
            Ok(c) => println!(
                "{:>11.1}  {:>10.1}  {:>4}  {:>11.3}  {:>+9.4}",
                offset * 1e3,
                hyst * 1e3,
                c.selected_delay_taps,
                c.achieved_bias * 1e3,
                c.residual_probability_error
            ),
            Err(e) => println!("{:>11.1}  {:>10.1}  {e}", offset * 1e3, hyst * 1e3),
        }
    }
}
