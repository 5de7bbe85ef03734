//! End-to-end run of one scenario: calibrate, acquire a probe-free and a
//! probe run, denoise, reconstruct and extract the IIP, then write the
//! artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{extract_iip, reconstruct_waveform, IipReport, ReconstructedWaveform};
use crate::denoise::{
    default_noise_floor, subtract_background, subtract_set_reference, validate_reference_set, DenoiseMode,
    ProbabilityWaveform,
};
use crate::error::{Error, Result};
use crate::estimator::delta_v;
use crate::export;
use crate::sampler::{average_probabilities, calibrate, run_measurement, CalibrationResult, SampleTensor};
use crate::scenario::Scenario;

/// Summary numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub delta_p: f64,
    /// Voltage resolution through the Gaussian PVM slope.
    pub delta_v: f64,
    pub sigma_total: f64,
    pub threshold: f64,
    pub calibration: CalibrationResult,
    /// Simulated duration of one acquisition, PLL dead time included.
    pub acquisition_time: f64,
    pub samples_per_run: usize,
    pub reconstructed_samples: usize,
    /// RMS of the reconstructed waveform after the transmit window.
    pub residual_rms: f64,
    pub discontinuities: usize,
    pub reference_check: String,
}

impl Metrics {
    pub fn to_text(&self, scenario: &Scenario) -> String {
        let mut s = String::new();
        let c = &self.calibration;
        let m = &scenario.measurement;
        let _ = writeln!(s, "scenario = {}", scenario.name);
        let _ = writeln!(s, "seed = {}", scenario.seed);
        let _ = writeln!(s, "denoise = {}", scenario.processing.denoise);
        let _ = writeln!(s, "pvm = {}", scenario.processing.pvm);
        let _ = writeln!(s, "t_s_s = {}", m.t_s);
        let _ = writeln!(s, "sets = {}", m.sets);
        let _ = writeln!(s, "repetitions = {}", m.repetitions);
        let _ = writeln!(s, "phases = {}", m.phases);
        let _ = writeln!(s, "tau_d_s = {}", m.tau_d);
        let _ = writeln!(s, "sigma_total_v = {}", self.sigma_total);
        let _ = writeln!(s, "delta_p = {}", self.delta_p);
        let _ = writeln!(s, "delta_v_v = {}", self.delta_v);
        let _ = writeln!(s, "iip_threshold = {}", self.threshold);
        let _ = writeln!(s, "calibration_tap = {}", c.selected_delay_taps);
        let _ = writeln!(s, "calibration_bias_v = {}", c.achieved_bias);
        let _ = writeln!(s, "calibration_residual_p = {}", c.residual_probability_error);
        let _ = writeln!(s, "acquisition_time_s = {}", self.acquisition_time);
        let _ = writeln!(s, "samples_per_run = {}", self.samples_per_run);
        let _ = writeln!(s, "reconstructed_samples = {}", self.reconstructed_samples);
        let _ = writeln!(s, "residual_rms = {}", self.residual_rms);
        let _ = writeln!(s, "discontinuities = {}", self.discontinuities);
        let _ = writeln!(s, "reference_check = {}", self.reference_check);
        s
    }
}

/// In-memory result of [`simulate`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub calibration: CalibrationResult,
    pub tensor: SampleTensor,
    pub measured: ProbabilityWaveform,
    pub background: ProbabilityWaveform,
    pub denoised: ProbabilityWaveform,
    pub waveform: ReconstructedWaveform,
    pub report: IipReport,
    pub metrics: Metrics,
}

/// Run the whole chain without touching the file system.
pub fn simulate(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate().map_err(|e| e.at("config"))?;
    let cfg = &scenario.measurement;
    let env = &scenario.environment;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let calibration = calibrate(cfg, &scenario.frontend, env, scenario.calibration_repetitions, &mut rng)
        .map_err(|e| e.at("calibrate"))?;
    let frontend = scenario.frontend.with_calibration(&calibration);

    let bg_tensor = run_measurement(cfg, &scenario.dut, &frontend, env, &mut rng, false)
        .map_err(|e| e.at("background"))?;
    let background = average_probabilities(&bg_tensor);
    drop(bg_tensor);
    let tensor = run_measurement(cfg, &scenario.dut, &frontend, env, &mut rng, scenario.probe_enabled)
        .map_err(|e| e.at("measure"))?;
    let measured = average_probabilities(&tensor);

    let proc = &scenario.processing;
    let (denoised, exclude, reference_check) = (|| -> Result<_> {
        Ok(match proc.denoise {
            DenoiseMode::None => (measured.clone(), None, "not run".to_owned()),
            DenoiseMode::Background => (subtract_background(&measured, &background)?, None, "not run".to_owned()),
            DenoiseMode::SetRef => {
                // Judge the reference SET with the ripple removed; the
                // difference of two runs carries sqrt(2) times the noise.
                let diff = subtract_background(&measured, &background)?;
                let floor = default_noise_floor(cfg.repetitions)? * std::f64::consts::SQRT_2;
                let check = match validate_reference_set(&diff, proc.reference_set, floor) {
                    Ok(()) => "pass".to_owned(),
                    Err(e) if proc.force_reference => {
                        log::warn!("{e}; continuing because the reference is forced");
                        format!("forced ({e})")
                    }
                    Err(e) => return Err(e),
                };
                (subtract_set_reference(&measured, proc.reference_set)?, Some(proc.reference_set), check)
            }
        })
    })()
    .map_err(|e| e.at("denoise"))?;

    let spec = scenario.pvm_spec();
    let waveform = reconstruct_waveform(&denoised, &spec, exclude).map_err(|e| e.at("reconstruct"))?;
    let opts = scenario.iip_options().map_err(|e| e.at("iip"))?;
    let report = extract_iip(&waveform, &proc.velocity_map, &opts).map_err(|e| e.at("iip"))?;

    let delta_p = scenario.delta_p().map_err(|e| e.at("metrics"))?;
    let gauss = crate::estimator::PvmSpec {
        mode: crate::estimator::PvmMode::Gaussian,
        ..spec
    };
    let metrics = Metrics {
        delta_p,
        delta_v: delta_v(delta_p, &gauss).map_err(|e| e.at("metrics"))?,
        sigma_total: scenario.sigma_total(),
        threshold: opts.threshold,
        calibration,
        acquisition_time: cfg.total_duration(),
        samples_per_run: cfg.sets * cfg.repetitions * cfg.phases,
        reconstructed_samples: waveform.len(),
        residual_rms: waveform.rms_after(opts.ignore_before),
        discontinuities: report.discontinuities.len(),
        reference_check,
    };
    Ok(RunOutput {
        calibration,
        tensor,
        measured,
        background,
        denoised,
        waveform,
        report,
        metrics,
    })
}

/// Output options of [`run_scenario`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Also write the full `[j][m][p]` bit tensor (large).
    pub raw_tensor: bool,
}

/// Files written by [`run_scenario`], all inside one directory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub raw_tensor: Option<PathBuf>,
    pub measured_probability: PathBuf,
    pub background_probability: PathBuf,
    pub probability: PathBuf,
    pub reconstructed: PathBuf,
    pub iip_csv: PathBuf,
    pub iip_table: PathBuf,
    pub metrics_path: PathBuf,
    pub svg: PathBuf,
    pub metrics: Metrics,
    pub report: IipReport,
}

impl RunArtifacts {
    pub fn summary(&self, scenario: &Scenario) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}: {} samples/run, {} reconstructed, dP = {:.5}, dV = {:.2} uV, {} discontinuities",
            scenario.name,
            m.samples_per_run,
            m.reconstructed_samples,
            m.delta_p,
            m.delta_v * 1e6,
            m.discontinuities
        );
        for d in &self.report.discontinuities {
            let _ = writeln!(
                s,
                "  {:>8.3} ns  {:>7.4} m  {}{}",
                d.round_trip_time * 1e9,
                d.distance,
                d.polarity,
                if d.saturated { "  saturated" } else { "" }
            );
        }
        let _ = writeln!(s, "  -> {}", self.dir.display());
        s
    }
}

/// Simulate `scenario` and write its artifacts to `out_dir/<name>/`.
/// On failure, files already written by this call are removed.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path, opts: RunOptions) -> Result<RunArtifacts> {
    let out = simulate(scenario)?;
    let dir = out_dir.join(&scenario.name);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e).at("export"))?;

    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<RunArtifacts> {
        let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<PathBuf> {
            let path = dir.join(name);
            f(&path)?;
            written.push(path.clone());
            Ok(path)
        };
        let raw_tensor = if opts.raw_tensor {
            Some(put("tensor.csv", &|p| export::write_tensor_csv(&out.tensor, p))?)
        } else {
            None
        };
        let measured_probability = put("measured_probability.csv", &|p| export::write_probability_csv(&out.measured, p))?;
        let background_probability =
            put("background_probability.csv", &|p| export::write_probability_csv(&out.background, p))?;
        let probability = put("probability.csv", &|p| export::write_probability_csv(&out.denoised, p))?;
        let reconstructed = put("reconstructed.csv", &|p| export::write_reconstructed_csv(&out.waveform, p))?;
        let iip_csv = put("iip.csv", &|p| export::write_iip_csv(&out.report, p))?;
        let iip_table = put("iip.txt", &|p| export::write_text(p, &export::iip_table(&out.report, out.waveform.units)))?;
        let metrics_path = put("metrics.txt", &|p| export::write_text(p, &out.metrics.to_text(scenario)))?;
        let svg = put("waveform.svg", &|p| {
            let title = format!("{} ({}, {})", scenario.name, scenario.processing.denoise, scenario.processing.pvm);
            export::write_text(p, &export::render_svg(&out.waveform, &title))
        })?;
        Ok(RunArtifacts {
            dir: dir.clone(),
            raw_tensor,
            measured_probability,
            background_probability,
            probability,
            reconstructed,
            iip_csv,
            iip_table,
            metrics_path,
            svg,
            metrics: out.metrics.clone(),
            report: out.report.clone(),
        })
    })();
    result.map_err(|e| {
        export::remove_all(&written);
        e.at("export")
    })
}
