//! Run the four built-in cable presets and write their artifacts under
//! `out/`. Pass preset names to run a subset.

use std::path::Path;

use itdr::pipeline::{run_scenario, RunOptions};
use itdr::scenario::{preset_names, Scenario};

fn main() -> itdr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<String> = if args.is_empty() {
        preset_names().map(str::to_owned).collect()
    } else {
        args
    };
    for name in names {
        let s = Scenario::preset(&name)?;
        let a = run_scenario(&s, Path::new("out"), RunOptions::default())?;
        print!("{}", a.summary(&s));
    }
    Ok(())
}
