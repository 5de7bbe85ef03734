//! Scenario files: one TOML document describing the line, probe, front end,
//! noise environment, schedule and processing of one run.
//!
//! ```toml
//! name = "open-connector"
//! seed = 1
//!
//! [line]
//! source_impedance = 40.0
//! termination = "open"          # "open", "short", "matched" or ohms
//! [[line.segments]]
//! impedance = 50.0
//! length = 0.2175
//! velocity = 1.5e8
//!
//! [pulse]
//! amplitude = 0.6               # 0 disables the probe
//! width = 1e-9
//! rise_time = 0.2e-9            # default width / 5, 0 for rectangular
//! launch_time = 10e-9
//!
//! [measurement]
//! t_s = 10e-9
//! sets = 10
//! repetitions = 1000
//! phases = 560
//! ```
//!
//! Optional sections `[bounce]`, `[comparator]`, `[clock]`, `[environment]`
//! (with `[[environment.tones]]`) and `[processing]` fall back to the
//! library defaults field by field. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{IipOptions, VelocityMap};
use crate::channel::{BounceLimits, ProbePulse, PulseShape, Segment, SegmentedLine, Termination};
use crate::denoise::DenoiseMode;
use crate::error::{Error, Result};
use crate::estimator::{delta_p, PvmMode, PvmSpec};
use crate::frontend::{total_noise_sigma, ComparatorParams, JitterClock, LowFrequencyNoise, NoiseEnvironment, SystemTone};
use crate::sampler::{Dut, FrontendParams, MeasurementConfig};

/// Built-in scenarios: the four cable experiments.
pub const PRESETS: &[(&str, &str)] = &[
    ("open-connector", include_str!("../scenarios/open-connector.toml")),
    ("open-end", include_str!("../scenarios/open-end.toml")),
    ("matched-termination", include_str!("../scenarios/matched-termination.toml")),
    ("curved-cable", include_str!("../scenarios/curved-cable.toml")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    seed: u64,
    #[serde(default)]
    description: Option<String>,
    line: LineSpec,
    pulse: PulseSpec,
    #[serde(default)]
    bounce: BounceSpec,
    #[serde(default)]
    comparator: ComparatorSpec,
    #[serde(default)]
    clock: ClockSpec,
    #[serde(default)]
    environment: EnvironmentSpec,
    measurement: MeasurementSpec,
    #[serde(default)]
    processing: ProcessingSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineSpec {
    source_impedance: f64,
    segments: Vec<SegmentSpec>,
    termination: TerminationSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentSpec {
    impedance: f64,
    length: f64,
    velocity: f64,
    #[serde(default = "one")]
    attenuation: f64,
    #[serde(default)]
    #[allow(dead_code)]
    label: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TerminationSpec {
    Named(String),
    Ohms(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseSpec {
    amplitude: f64,
    width: f64,
    #[serde(default)]
    rise_time: Option<f64>,
    #[serde(default)]
    launch_time: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BounceSpec {
    max_order: u32,
    min_gain: f64,
}

impl Default for BounceSpec {
    fn default() -> Self {
        let d = BounceLimits::default();
        BounceSpec {
            max_order: d.max_order,
            min_gain: d.min_gain,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ComparatorSpec {
    offset_voltage: f64,
    hysteresis_width: f64,
    thermal_sigma: f64,
}

impl Default for ComparatorSpec {
    fn default() -> Self {
        let d = ComparatorParams::default();
        ComparatorSpec {
            offset_voltage: d.offset_voltage,
            hysteresis_width: d.hysteresis_width,
            thermal_sigma: d.thermal_sigma,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ClockSpec {
    slope_k: f64,
    jitter_sigma: f64,
    bias_vb: f64,
    ramp_low: f64,
    ramp_high: f64,
    period: f64,
}

impl Default for ClockSpec {
    fn default() -> Self {
        let d = JitterClock::default();
        ClockSpec {
            slope_k: d.slope_k,
            jitter_sigma: d.jitter_sigma,
            bias_vb: d.bias_vb,
            ramp_low: d.ramp_low,
            ramp_high: d.ramp_high,
            period: d.period,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EnvironmentSpec {
    low_freq_rms: f64,
    correlation_time: f64,
    hold_per_cycle: bool,
    cutoff_fc: f64,
    tones: Vec<ToneSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToneSpec {
    harmonic: u32,
    amplitude: f64,
    #[serde(default)]
    phase: f64,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        let d = NoiseEnvironment::default();
        EnvironmentSpec {
            low_freq_rms: d.low_freq.rms,
            correlation_time: d.low_freq.correlation_time,
            hold_per_cycle: d.low_freq.hold_per_cycle,
            cutoff_fc: d.cutoff_fc,
            tones: d
                .tones
                .iter()
                .map(|t| ToneSpec {
                    harmonic: t.harmonic,
                    amplitude: t.amplitude,
                    phase: t.phase,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementSpec {
    t_s: f64,
    sets: usize,
    repetitions: usize,
    phases: usize,
    #[serde(default)]
    tau_d: Option<f64>,
    #[serde(default)]
    phase_shift_overhead_cycles: Option<u32>,
    #[serde(default)]
    delay_tap: Option<f64>,
    #[serde(default)]
    delay_tap_count: Option<u32>,
    #[serde(default)]
    pll_min_shift: Option<f64>,
    #[serde(default = "default_calibration_repetitions")]
    calibration_repetitions: usize,
}

fn default_calibration_repetitions() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProcessingSpec {
    denoise: String,
    reference_set: usize,
    force_reference: bool,
    pvm: String,
    gamma: f64,
    iip_threshold: Option<f64>,
    velocity_map: Option<Vec<VelocitySection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VelocitySection {
    from_distance: f64,
    velocity: f64,
}

impl Default for ProcessingSpec {
    fn default() -> Self {
        ProcessingSpec {
            denoise: "setref".into(),
            reference_set: 0,
            force_reference: false,
            pvm: "gaussian".into(),
            gamma: 0.95,
            iip_threshold: None,
            velocity_map: None,
        }
    }
}

/// Post-processing choices.
#[derive(Debug, Clone, PartialEq)]
pub struct Processing {
    pub denoise: DenoiseMode,
    pub reference_set: usize,
    /// Run SET-reference subtraction even if the reference SET fails the
    /// signal-free check.
    pub force_reference: bool,
    pub pvm: PvmMode,
    pub gamma: f64,
    /// Feature threshold in output units; default two probability
    /// resolutions.
    pub iip_threshold: Option<f64>,
    pub velocity_map: VelocityMap,
}

/// A fully resolved, validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub seed: u64,
    pub dut: Dut,
    /// False when the configured amplitude is zero.
    pub probe_enabled: bool,
    pub frontend: FrontendParams,
    pub environment: NoiseEnvironment,
    pub measurement: MeasurementConfig,
    pub calibration_repetitions: usize,
    pub processing: Processing,
}

impl Scenario {
    /// Parse a scenario document. `origin` names the source in errors.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        Scenario::from_table(parse_table(text, origin)?, origin)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_toml_str(&text, path)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name)?;
        Scenario::from_toml_str(text, &preset_origin(name))
    }

    /// Load a preset by name or a scenario file by path and apply
    /// `key.path=value` overrides before validation.
    pub fn load(name_or_path: &str, overrides: &[String]) -> Result<Self> {
        let path = Path::new(name_or_path);
        let (mut table, origin) = if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            (parse_table(&text, path)?, path.to_path_buf())
        } else {
            let origin = preset_origin(name_or_path);
            (parse_table(preset_text(name_or_path)?, &origin)?, origin)
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Scenario::from_table(table, &origin)
    }

    fn from_table(table: toml::Table, origin: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("{}: {}", origin.display(), e.message())))?;
        file.resolve()
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", origin.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.dut.line.validate()?;
        self.dut.pulse.validate()?;
        self.frontend.validate()?;
        self.environment.validate()?;
        self.measurement.validate()?;
        if self.processing.reference_set >= self.measurement.sets {
            return Err(Error::InvalidConfig(format!(
                "reference SET {} outside 0..{}",
                self.processing.reference_set, self.measurement.sets
            )));
        }
        if !(self.processing.gamma > 0.0 && self.processing.gamma < 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1)".into()));
        }
        if let Some(t) = self.processing.iip_threshold {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig("iip_threshold must be positive".into()));
            }
        }
        if self.calibration_repetitions == 0 {
            return Err(Error::InvalidConfig("calibration_repetitions must be positive".into()));
        }
        self.processing.velocity_map.validate()
    }

    /// Equivalent input noise of the front end.
    pub fn sigma_total(&self) -> f64 {
        total_noise_sigma(&self.frontend.comparator, &self.frontend.clock)
    }

    /// PVM used for reconstruction. After calibration a line voltage of zero
    /// reads p = 0.5, so the map is centred on zero.
    pub fn pvm_spec(&self) -> PvmSpec {
        PvmSpec {
            mode: self.processing.pvm,
            sigma_total: self.sigma_total(),
            bias_vb: 0.0,
            polarity: 1.0,
        }
    }

    pub fn delta_p(&self) -> Result<f64> {
        delta_p(0.5, self.measurement.repetitions as u64, self.processing.gamma)
    }

    /// IIP threshold in output units.
    pub fn iip_threshold(&self) -> Result<f64> {
        if let Some(t) = self.processing.iip_threshold {
            return Ok(t);
        }
        let dp = 2.0 * self.delta_p()?;
        Ok(match self.processing.pvm {
            PvmMode::Probability => dp,
            _ => dp * self.pvm_spec().slope(),
        })
    }

    pub fn iip_options(&self) -> Result<IipOptions> {
        let pulse = &self.dut.pulse;
        Ok(IipOptions {
            threshold: self.iip_threshold()?,
            launch_time: pulse.launch_time,
            rise_time: pulse.rise_time(),
            ignore_before: pulse.launch_time + pulse.width,
            merge_window: pulse.width,
        })
    }
}

impl ScenarioFile {
    fn resolve(self) -> Result<Scenario> {
        let termination = match self.line.termination {
            TerminationSpec::Named(s) => match s.as_str() {
                "open" => Termination::Open,
                "short" => Termination::Short,
                "matched" => Termination::Matched,
                other => return Err(Error::InvalidConfig(format!("unknown termination {other:?}"))),
            },
            TerminationSpec::Ohms(r) => Termination::Resistive(r),
        };
        let segments = self
            .line
            .segments
            .iter()
            .map(|s| Segment {
                attenuation: s.attenuation,
                ..Segment::new(s.impedance, s.length, s.velocity)
            })
            .collect();
        let line = SegmentedLine::new(self.line.source_impedance, segments, termination)?;

        let p = &self.pulse;
        let probe_enabled = p.amplitude != 0.0;
        // A disabled probe keeps a nominal amplitude so the pulse stays a
        // valid value; it is never transmitted.
        let amplitude = if probe_enabled { p.amplitude } else { 1.0 };
        let shape = match p.rise_time {
            None => PulseShape::Trapezoidal { rise_time: p.width / 5.0 },
            Some(0.0) => PulseShape::Rectangular,
            Some(r) => PulseShape::Trapezoidal { rise_time: r },
        };
        let pulse = ProbePulse {
            amplitude,
            width: p.width,
            shape,
            launch_time: p.launch_time,
        };
        pulse.validate()?;

        let velocity_map = match &self.processing.velocity_map {
            Some(v) => VelocityMap::new(v.iter().map(|s| (s.from_distance, s.velocity)).collect())?,
            None => VelocityMap::from_line(&line),
        };
        let dut = Dut {
            line,
            pulse,
            limits: BounceLimits {
                max_order: self.bounce.max_order,
                min_gain: self.bounce.min_gain,
            },
        };

        let c = &self.comparator;
        let k = &self.clock;
        let frontend = FrontendParams::new(
            ComparatorParams {
                offset_voltage: c.offset_voltage,
                hysteresis_width: c.hysteresis_width,
                thermal_sigma: c.thermal_sigma,
            },
            JitterClock {
                slope_k: k.slope_k,
                jitter_sigma: k.jitter_sigma,
                bias_vb: k.bias_vb,
                ramp_low: k.ramp_low,
                ramp_high: k.ramp_high,
                period: k.period,
            },
        );

        let e = &self.environment;
        let environment = NoiseEnvironment {
            low_freq: LowFrequencyNoise {
                rms: e.low_freq_rms,
                correlation_time: e.correlation_time,
                hold_per_cycle: e.hold_per_cycle,
            },
            tones: e
                .tones
                .iter()
                .map(|t| SystemTone {
                    harmonic: t.harmonic,
                    amplitude: t.amplitude,
                    phase: t.phase,
                })
                .collect(),
            cutoff_fc: e.cutoff_fc,
        };

        let m = &self.measurement;
        let mut measurement = MeasurementConfig {
            tau_d: m.t_s / m.phases.max(1) as f64,
            ..MeasurementConfig::new(m.t_s, m.sets, m.repetitions, m.phases)?
        };
        if let Some(t) = m.tau_d {
            measurement.tau_d = t;
        }
        if let Some(c) = m.phase_shift_overhead_cycles {
            measurement.phase_shift_overhead_cycles = c;
        }
        if let Some(t) = m.delay_tap {
            measurement.delay_tap = t;
        }
        if let Some(n) = m.delay_tap_count {
            measurement.delay_tap_count = n;
        }
        if let Some(s) = m.pll_min_shift {
            measurement.pll_min_shift = s;
        }

        let processing = Processing {
            denoise: self.processing.denoise.parse()?,
            reference_set: self.processing.reference_set,
            force_reference: self.processing.force_reference,
            pvm: self.processing.pvm.parse()?,
            gamma: self.processing.gamma,
            iip_threshold: self.processing.iip_threshold,
            velocity_map,
        };

        let scenario = Scenario {
            name: self.name,
            description: self.description,
            seed: self.seed,
            dut,
            probe_enabled,
            frontend,
            environment,
            measurement,
            calibration_repetitions: m.calibration_repetitions,
            processing,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| {
            let known: Vec<_> = preset_names().collect();
            Error::InvalidConfig(format!(
                "{name:?} is neither a scenario file nor a preset ({})",
                known.join(", ")
            ))
        })
}

fn preset_origin(name: &str) -> PathBuf {
    PathBuf::from(format!("<preset {name}>"))
}

fn parse_table(text: &str, origin: &Path) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.message().to_owned(),
        }
    })
}

/// Apply one `a.b.c=value` override. The value is read as a TOML value and
/// falls back to a plain string. Numeric path components index arrays.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {spec:?} is not key=value")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let bad = |why: &str| Error::InvalidConfig(format!("override {key:?}: {why}"));
    let (last, path) = parts.split_last().ok_or_else(|| bad("empty key"))?;

    let mut cur: &mut toml::Value = table
        .entry(path.first().copied().unwrap_or(last).to_owned())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if path.is_empty() {
        *cur = value;
        return Ok(());
    }
    for part in &path[1..] {
        cur = match cur {
            toml::Value::Table(t) => t
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = part.parse().map_err(|_| bad("array index expected"))?;
                let n = a.len();
                a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of 0..{n}")))?
            }
            _ => return Err(bad(&format!("{part:?} is not a section"))),
        };
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad("array index expected"))?;
            let n = a.len();
            *a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of 0..{n}")))? = value;
        }
        _ => return Err(bad("parent is not a section")),
    }
    Ok(())
}
