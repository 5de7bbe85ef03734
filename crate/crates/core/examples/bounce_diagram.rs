//! Reflection events of a connector trace plus an open cable, and the
//! noiseless port waveform they produce.

use itdr::channel::{bounce_diagram, synthesize_waveform, BounceLimits, ProbePulse, Segment, SegmentedLine, Termination};

fn main() -> itdr::Result<()> {
    let line = SegmentedLine::new(
        40.0,
        vec![Segment::new(50.0, 0.2175, 1.5e8), Segment::new(48.0, 1.80, 1.85e8)],
        Termination::Open,
    )?;
    let events = bounce_diagram(&line, BounceLimits::default())?;

    println!("{:>10}  {:>9}  order", "time (ns)", "gain");
    for e in &events {
        println!("{:>10.3}  {:>9.5}  {}", e.arrival_time * 1e9, e.gain, e.order);
    }

    let pulse = ProbePulse::new(0.6, 1e-9, 0.0)?;
    println!("\nport voltage, 0.5 ns steps:");
    for k in 0..100 {
        let t = k as f64 * 0.5e-9;
        let v = synthesize_waveform(&events, &pulse, t);
        let bar = "#".repeat((v.abs() * 60.0).round() as usize);
        println!("{:>6.1} ns {:>8.4} V {}{}", t * 1e9, v, if v < 0.0 { "-" } else { "+" }, bar);
    }
    Ok(())
}
