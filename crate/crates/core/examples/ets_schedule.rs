//! Equivalent-time sampling schedule: how (phase, repetition, SET) map to
//! wall-clock and waveform time, and which positions the transmitter blinds.

use itdr::channel::ProbePulse;
use itdr::sampler::MeasurementConfig;

fn main() -> itdr::Result<()> {
    let cfg = MeasurementConfig::new(10e-9, 3, 9, 8)?;
    println!("tau_d = {:.1} ps, one phase step costs {:.0} ns", cfg.tau_d * 1e12, cfg.phase_shift_overhead() * 1e9);
    println!("{:>2} {:>2} {:>2}  {:>10}  {:>10}  {:>3}", "j", "m", "p", "wall (ns)", "wave (ns)", "k");
    for j in 0..2 {
        for m in 0..2 {
            for p in 0..cfg.sets {
                println!(
                    "{j:>2} {m:>2} {p:>2}  {:>10.3}  {:>10.3}  {:>3}",
                    cfg.wall_time(j, m, p) * 1e9,
                    cfg.waveform_time(j, p) * 1e9,
                    cfg.ets_index(j, p)
                );
            }
        }
    }

    let full = MeasurementConfig::reference();
    let pulse = ProbePulse::new(0.6, 1e-9, 10e-9)?;
    let blind = full.blind_spot(&pulse);
    println!(
        "\nreference grid: {} points over {:.0} ns, acquisition {:.2} ms",
        full.ets_len(),
        full.sets as f64 * full.t_s * 1e9,
        full.total_duration() * 1e3
    );
    println!(
        "1 ns probe at 10 ns blinds ETS positions {}..{} ({} points)",
        blind.start,
        blind.end,
        blind.len()
    );
    Ok(())
}
