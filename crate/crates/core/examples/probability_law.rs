//! Empirical comparator output probability against the Gaussian law
//! P(1) = Phi((Vb - v - offset) / sigma).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use itdr::frontend::{expected_probability, total_noise_sigma, Comparator, ComparatorParams, JitterClock};

fn main() {
    let clk = JitterClock::default();
    let params = ComparatorParams {
        offset_voltage: 2e-3,
        hysteresis_width: 0.0,
        thermal_sigma: 1e-3,
    };
    let sigma = total_noise_sigma(&params, &clk);
    let mut cmp = Comparator::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = 20_000;

    println!("sigma_total = {:.3} mV, {m} trials per point", sigma * 1e3);
    println!("{:>9}  {:>8}  {:>8}", "v (mV)", "measured", "law");
    for i in -6..=6 {
        let v = i as f64 * 0.5 * sigma;
        let ones = (0..m)
            .filter(|_| {
                let r = clk.draw(clk.mean_reference(0.0), &mut rng);
                cmp.sample_edge(v, r, clk.ramp_low, &mut rng)
            })
            .count();
        let law = expected_probability(v, clk.bias_vb, params.offset_voltage, sigma);
        println!("{:>9.2}  {:>8.4}  {:>8.4}", v * 1e3, ones as f64 / m as f64, law);
    }
}
