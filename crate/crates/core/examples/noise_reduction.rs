//! Residual noise on a probe-free line after each noise reduction mode,
//! under supply tones and low-frequency drift.

use itdr::denoise::DenoiseMode;
use itdr::pipeline::simulate;
use itdr::scenario::Scenario;

fn main() -> itdr::Result<()> {
    println!("{:>10}  {:>12}  {:>10}", "denoise", "residual uV", "features");
    for mode in [DenoiseMode::None, DenoiseMode::Background, DenoiseMode::SetRef] {
        let s = Scenario::load(
            "matched-termination",
            &[
                "pulse.amplitude=0.0".into(),
                "environment.low_freq_rms=3e-3".into(),
                "environment.correlation_time=2e-6".into(),
                format!("processing.denoise=\"{mode}\""),
                // Strong drift also trips the reference check, which judges
                // the reference SET against a second run.
                "processing.force_reference=true".into(),
            ],
        )?;
        let out = simulate(&s)?;
        // Without subtraction the baseline is the calibrated bias; report
        // the spread around the mean instead.
        let vals: Vec<f64> = out.waveform.values().collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let rms = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        println!("{:>10}  {:>12.1}  {:>10}", mode.to_string(), rms * 1e6, out.report.discontinuities.len());
    }
    Ok(())
}
