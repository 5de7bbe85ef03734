use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use itdr::pipeline::{run_scenario, RunOptions};
use itdr::scenario::{preset_names, Scenario};

/// Run reflectometry scenarios and write CSV, text and SVG artifacts.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Preset name or path to a scenario TOML file. Repeatable.
    #[arg(long, required_unless_present = "list")]
    scenario: Vec<String>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario field, e.g. `measurement.repetitions=200`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Noise reduction: none, background or setref.
    #[arg(long)]
    denoise: Option<String>,
    /// Probability-to-voltage map: probability, linear or gaussian.
    #[arg(long)]
    pvm: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
    /// Run up to N scenarios at once.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Also write the raw bit tensor (hundreds of MB at full size).
    #[arg(long)]
    raw_tensor: bool,
    /// List the built-in presets and exit.
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if args.quiet { "error" } else { "warn" }))
        .init();

    if args.list {
        for name in preset_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }

    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(d) = &args.denoise {
        overrides.push(format!("processing.denoise=\"{d}\""));
    }
    if let Some(p) = &args.pvm {
        overrides.push(format!("processing.pvm=\"{p}\""));
    }

    let mut scenarios = Vec::new();
    for name in &args.scenario {
        match Scenario::load(name, &overrides) {
            Ok(s) => scenarios.push(s),
            Err(e) => {
                eprintln!("error: [config] {e}");
                return ExitCode::FAILURE;
            }
        }
    }

    let opts = RunOptions {
        raw_tensor: args.raw_tensor,
    };
    let mut failed = false;
    for chunk in scenarios.chunks(args.parallel.max(1)) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|sc| {
                    let out_dir = &args.out_dir;
                    s.spawn(move || (sc, run_scenario(sc, out_dir, opts)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
        });
        for (sc, r) in results {
            match r {
                Ok(a) if !args.quiet => print!("{}", a.summary(sc)),
                Ok(_) => {}
                Err(e) => {
                    eprintln!("error: {}: {e}", sc.name);
                    failed = true;
                }
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
