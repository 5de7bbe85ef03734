//! Describe a line in TOML and run it without touching the disk.

use std::path::Path;

use itdr::pipeline::simulate;
use itdr::scenario::Scenario;

const SCENARIO: &str = r#"
name = "stub"
seed = 42

[line]
source_impedance = 50.0
termination = 75.0

[[line.segments]]
impedance = 50.0
length = 0.4
velocity = 1.6e8

[[line.segments]]
label = "stub"
impedance = 35.0
length = 0.1
velocity = 1.6e8

[[line.segments]]
impedance = 50.0
length = 0.8
velocity = 1.6e8

[pulse]
amplitude = 0.4
width = 1e-9
launch_time = 10e-9

[measurement]
t_s = 10e-9
sets = 10
repetitions = 2000
phases = 560

[processing]
pvm = "linear"
"#;

fn main() -> itdr::Result<()> {
    let s = Scenario::from_toml_str(SCENARIO, Path::new("stub.toml"))?;
    let out = simulate(&s)?;
    print!("{}", out.metrics.to_text(&s));
    for d in &out.report.discontinuities {
        println!(
            "{:>8.3} ns  {:>6.3} m  {}  {:.2} mV",
            d.round_trip_time * 1e9,
            d.distance,
            d.polarity,
            d.magnitude * 1e3
        );
    }
    Ok(())
}
