//! Noise reduction on averaged probability waveforms.
//!
//! Two techniques are provided. Background subtraction removes anything that
//! repeats identically between a probe run and a probe-free run, which is the
//! supply ripple locked to the system clock. SET-reference subtraction uses
//! one probing-cycle sample index (a SET) that carries no reflection as the
//! noise reference: low-frequency noise is nearly constant over one probing
//! cycle, so at every phase it is common to all SETs and drops out of the
//! difference. Ripple with period `T_s` is common to all SETs as well.

use crate::error::{Error, Result};
use crate::estimator::delta_p;
use crate::sampler::MeasurementConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Probability,
    Volts,
}

/// Which noise reduction the pipeline applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiseMode {
    None,
    Background,
    SetRef,
}

impl std::str::FromStr for DenoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DenoiseMode::None),
            "background" => Ok(DenoiseMode::Background),
            "setref" => Ok(DenoiseMode::SetRef),
            other => Err(Error::InvalidConfig(format!("unknown denoise mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for DenoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DenoiseMode::None => "none",
            DenoiseMode::Background => "background",
            DenoiseMode::SetRef => "setref",
        })
    }
}

/// Values on the `[j][p]` grid of one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityWaveform {
    values: Vec<f64>,
    clip: Vec<i8>,
    pub config: MeasurementConfig,
    pub units: Units,
    /// Set once a subtraction has been applied; values are then differences
    /// and may be negative.
    pub relative: bool,
}

impl ProbabilityWaveform {
    pub fn zeros(config: MeasurementConfig, units: Units) -> Self {
        ProbabilityWaveform {
            values: vec![0.0; config.phases * config.sets],
            clip: vec![0; config.phases * config.sets],
            config,
            units,
            relative: false,
        }
    }

    /// Build from values laid out `[j][p]`.
    pub fn from_values(config: MeasurementConfig, units: Units, values: Vec<f64>) -> Result<Self> {
        let n = config.phases * config.sets;
        if values.len() != n {
            return Err(Error::Dimension(format!("{} values for a {n}-point grid", values.len())));
        }
        Ok(ProbabilityWaveform {
            values,
            clip: vec![0; n],
            config,
            units,
            relative: false,
        })
    }

    /// Flag every estimate that sits at 0 or 1. Only meaningful on absolute
    /// probabilities.
    pub fn mark_clipped(&mut self) {
        for (c, &v) in self.clip.iter_mut().zip(&self.values) {
            *c = if v <= 0.0 {
                -1
            } else if v >= 1.0 {
                1
            } else {
                0
            };
        }
    }

    /// -1 if the estimate at `(j, p)` was 0, +1 if it was 1, else 0. The
    /// flag survives subtraction, so a difference still knows that the
    /// measurement behind it was out of range.
    pub fn clip(&self, j: usize, p: usize) -> i8 {
        self.clip[j * self.config.sets + p]
    }

    pub fn phases(&self) -> usize {
        self.config.phases
    }

    pub fn sets(&self) -> usize {
        self.config.sets
    }

    pub fn get(&self, j: usize, p: usize) -> f64 {
        self.values[j * self.config.sets + p]
    }

    pub fn set(&mut self, j: usize, p: usize, v: f64) {
        self.values[j * self.config.sets + p] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All phases of one SET.
    pub fn set_series(&self, p: usize) -> Vec<f64> {
        (0..self.phases()).map(|j| self.get(j, p)).collect()
    }

    pub fn waveform_time(&self, j: usize, p: usize) -> f64 {
        self.config.waveform_time(j, p)
    }

    /// Element-wise combination with a waveform of the same shape.
    pub fn zip_with(&self, other: &ProbabilityWaveform, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_compatible(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ProbabilityWaveform {
            values,
            clip: self.clip.clone(),
            config: self.config.clone(),
            units: self.units,
            relative: self.relative || other.relative,
        })
    }

    /// Root-mean-square over the given SETs.
    pub fn rms_over_sets(&self, sets: impl IntoIterator<Item = usize> + Clone) -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for j in 0..self.phases() {
            for p in sets.clone() {
                acc += self.get(j, p).powi(2);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            (acc / n as f64).sqrt()
        }
    }
}

fn check_compatible(a: &ProbabilityWaveform, b: &ProbabilityWaveform) -> Result<()> {
    if a.config != b.config {
        return Err(Error::Dimension(format!(
            "grids differ: {}x{} at T_s {:e} vs {}x{} at T_s {:e}",
            a.phases(),
            a.sets(),
            a.config.t_s,
            b.phases(),
            b.sets(),
            b.config.t_s
        )));
    }
    if a.units != b.units {
        return Err(Error::Dimension("cannot combine probability and voltage waveforms".into()));
    }
    Ok(())
}

/// Probe run minus probe-free run.
pub fn subtract_background(meas: &ProbabilityWaveform, background: &ProbabilityWaveform) -> Result<ProbabilityWaveform> {
    let mut out = meas.zip_with(background, |a, b| a - b)?;
    out.relative = true;
    Ok(out)
}

/// Subtract SET `reference_set` from every SET at the same phase. The
/// reference SET itself becomes zero.
pub fn subtract_set_reference(meas: &ProbabilityWaveform, reference_set: usize) -> Result<ProbabilityWaveform> {
    if reference_set >= meas.sets() {
        return Err(Error::IndexOutOfRange {
            index: reference_set,
            len: meas.sets(),
        });
    }
    let mut out = meas.clone();
    for j in 0..meas.phases() {
        let r = meas.get(j, reference_set);
        for p in 0..meas.sets() {
            out.set(j, p, if p == reference_set { 0.0 } else { meas.get(j, p) - r });
        }
        out.clip[j * meas.sets() + reference_set] = 0;
    }
    out.relative = true;
    Ok(out)
}

/// Default reference-SET noise floor, `3 * delta_p(0.5, M) / 2`.
pub fn default_noise_floor(repetitions: usize) -> Result<f64> {
    Ok(1.5 * delta_p(0.5, repetitions as u64, 0.95)?)
}

/// Check that the reference SET looks like noise only: no sample may sit
/// further than `noise_floor` from the SET's median.
pub fn validate_reference_set(meas: &ProbabilityWaveform, reference_set: usize, noise_floor: f64) -> Result<()> {
    if reference_set >= meas.sets() {
        return Err(Error::IndexOutOfRange {
            index: reference_set,
            len: meas.sets(),
        });
    }
    let series = meas.set_series(reference_set);
    let mut sorted = series.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let worst = series
        .iter()
        .enumerate()
        .map(|(j, &v)| (j, (v - median).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    match worst {
        Some((j, dev)) if dev > noise_floor => Err(Error::ReferenceNotClean {
            set: reference_set,
            diagnostic: format!(
                "deviation {dev:.4} from median {median:.4} at j = {j} (t = {:.4e} s) exceeds floor {noise_floor:.4}",
                meas.waveform_time(j, reference_set)
            ),
        }),
        _ => Ok(()),
    }
}
