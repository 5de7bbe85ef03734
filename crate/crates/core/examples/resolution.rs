//! Probability and voltage resolution against the repetition count, and the
//! spatial resolution of a 1 ns probe.

use itdr::analysis::spatial_resolution;
use itdr::estimator::{delta_p, delta_v, PvmMode, PvmSpec};

fn main() -> itdr::Result<()> {
    let spec = PvmSpec {
        mode: PvmMode::Gaussian,
        sigma_total: 8.062e-3,
        bias_vb: 0.0,
        polarity: 1.0,
    };
    println!("{:>8}  {:>9}  {:>9}", "M", "dP", "dV (uV)");
    for m in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
        let dp = delta_p(0.5, m, 0.95)?;
        println!("{:>8}  {:>9.5}  {:>9.1}", m, dp, delta_v(dp, &spec)? * 1e6);
    }
    for (label, v) in [("pcb trace", 1.5e8), ("cable", 1.85e8)] {
        println!("1 ns probe on {label} at {v:.3e} m/s: {:.2} cm", spatial_resolution(1e-9, v)? * 100.0);
    }
    Ok(())
}
