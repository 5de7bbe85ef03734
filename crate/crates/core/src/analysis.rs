//! Waveform reconstruction and impedance inhomogeneity pattern (IIP)
//! extraction.

use crate::channel::SegmentedLine;
use crate::denoise::{ProbabilityWaveform, Units};
use crate::error::{Error, Result};
use crate::estimator::{pvm, PvmMode, PvmSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformSample {
    pub waveform_time: f64,
    pub value: f64,
    pub saturated: bool,
}

/// Samples of one measurement on a single equivalent-time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedWaveform {
    pub samples: Vec<WaveformSample>,
    pub units: Units,
    /// Level that means "no reflection": 0.5 for absolute probabilities,
    /// the bias for absolute voltages, 0 for differences.
    pub baseline: f64,
    /// Sign relating `value - baseline` to the line voltage: -1 for
    /// probabilities (a rising line voltage lowers the probability of a 1).
    pub polarity: f64,
    pub tau_d: f64,
}

impl ReconstructedWaveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.waveform_time)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.value)
    }

    /// RMS of `value - baseline` over samples at or after `from_time`.
    pub fn rms_after(&self, from_time: f64) -> f64 {
        let (acc, n) = self
            .samples
            .iter()
            .filter(|s| s.waveform_time >= from_time)
            .fold((0.0, 0usize), |(a, n), s| (a + (s.value - self.baseline).powi(2), n + 1));
        if n == 0 {
            0.0
        } else {
            (acc / n as f64).sqrt()
        }
    }
}

/// Flatten the `[j][p]` grid onto `p*T_s + j*tau_d` and apply the PVM.
///
/// Waveforms that are differences (after any subtraction) are mapped as
/// `pvm(0.5 + d) - bias`, so that zero difference reads zero volts. Where
/// the underlying measurement was stuck at 0 or 1 the sample is reported at
/// the PVM clamp instead.
/// `exclude_set` drops one SET, normally the noise reference.
pub fn reconstruct_waveform(
    meas: &ProbabilityWaveform,
    spec: &PvmSpec,
    exclude_set: Option<usize>,
) -> Result<ReconstructedWaveform> {
    spec.validate()?;
    if let Some(r) = exclude_set {
        if r >= meas.sets() {
            return Err(Error::IndexOutOfRange {
                index: r,
                len: meas.sets(),
            });
        }
    }
    let volts_in = meas.units == Units::Volts;
    let to_volts = !volts_in && spec.mode != PvmMode::Probability;
    let mut samples = Vec::with_capacity(meas.sets() * meas.phases());
    for p in (0..meas.sets()).filter(|&p| Some(p) != exclude_set) {
        for j in 0..meas.phases() {
            let raw = meas.get(j, p);
            let sample = if volts_in {
                WaveformSample {
                    waveform_time: meas.waveform_time(j, p),
                    value: raw,
                    saturated: false,
                }
            } else {
                let p_abs = match (meas.relative, meas.clip(j, p)) {
                    (true, 0) => 0.5 + raw,
                    (true, c) => f64::from(c.max(0)),
                    (false, _) => raw,
                };
                let out = pvm(p_abs, spec);
                let value = match (to_volts, meas.relative) {
                    (false, _) => raw,
                    (true, false) => out.value,
                    (true, true) => out.value - spec.bias_vb,
                };
                WaveformSample {
                    waveform_time: meas.waveform_time(j, p),
                    value,
                    saturated: out.saturated,
                }
            };
            samples.push(sample);
        }
    }
    let (baseline, polarity) = match (to_volts || volts_in, meas.relative) {
        (_, true) => (0.0, if to_volts || volts_in { 1.0 } else { -spec.polarity }),
        (false, false) => (0.5, -spec.polarity),
        (true, false) => (if volts_in { 0.0 } else { spec.bias_vb }, 1.0),
    };
    Ok(ReconstructedWaveform {
        samples,
        units: if to_volts || volts_in { Units::Volts } else { Units::Probability },
        baseline,
        polarity,
        tau_d: meas.config.tau_d,
    })
}

/// Piecewise-constant propagation velocity along the line.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMap {
    /// `(from_distance, velocity)`, sorted by distance, first entry at 0.
    pub sections: Vec<(f64, f64)>,
}

impl VelocityMap {
    pub fn uniform(velocity: f64) -> Self {
        VelocityMap {
            sections: vec![(0.0, velocity)],
        }
    }

    pub fn new(sections: Vec<(f64, f64)>) -> Result<Self> {
        let map = VelocityMap { sections };
        map.validate()?;
        Ok(map)
    }

    /// One section per line segment.
    pub fn from_line(line: &SegmentedLine) -> Self {
        let mut at = 0.0;
        let sections = line
            .segments
            .iter()
            .map(|s| {
                let entry = (at, s.velocity);
                at += s.length;
                entry
            })
            .collect();
        VelocityMap { sections }
    }

    pub fn validate(&self) -> Result<()> {
        match self.sections.first() {
            Some(&(0.0, _)) => {}
            _ => return Err(Error::InvalidConfig("velocity map must start at distance 0".into())),
        }
        if self.sections.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidConfig("velocity map distances must increase".into()));
        }
        if self.sections.iter().any(|&(_, v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("velocities must be positive".into()));
        }
        Ok(())
    }

    /// Distance whose round trip takes `round_trip_time`.
    pub fn distance(&self, round_trip_time: f64) -> f64 {
        let mut remaining = 0.5 * round_trip_time.max(0.0);
        for (i, &(from, v)) in self.sections.iter().enumerate() {
            match self.sections.get(i + 1) {
                Some(&(to, _)) => {
                    let t = (to - from) / v;
                    if remaining <= t {
                        return from + remaining * v;
                    }
                    remaining -= t;
                }
                None => return from + remaining * v,
            }
        }
        0.0
    }

    /// Round-trip time to `distance`.
    pub fn round_trip_time(&self, distance: f64) -> f64 {
        let mut t = 0.0;
        for (i, &(from, v)) in self.sections.iter().enumerate() {
            let to = self.sections.get(i + 1).map_or(f64::INFINITY, |s| s.0);
            if distance <= to {
                return 2.0 * (t + (distance - from) / v);
            }
            t += (to - from) / v;
        }
        2.0 * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "+",
            Polarity::Negative => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discontinuity {
    pub round_trip_time: f64,
    pub distance: f64,
    /// Peak |value - baseline| in waveform units.
    pub magnitude: f64,
    /// Sign of the reflected line voltage.
    pub polarity: Polarity,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IipReport {
    pub discontinuities: Vec<Discontinuity>,
    pub velocity_map: VelocityMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IipOptions {
    /// Minimum |value - baseline| of a feature, in waveform units.
    pub threshold: f64,
    /// Waveform time of round-trip zero.
    pub launch_time: f64,
    /// Probe rise time. An unclipped echo crosses half its peak half a
    /// rise time after it arrives; a clipped one crosses half the clamp
    /// level almost as soon as it arrives.
    pub rise_time: f64,
    /// Samples earlier than this are ignored (transmit window).
    pub ignore_before: f64,
    /// Same-sign features whose leading edges are closer than this merge.
    pub merge_window: f64,
}

struct Feature {
    start: usize,
    peak: usize,
    sign: f64,
    saturated: bool,
}

/// Locate reflections in a reconstructed waveform.
///
/// A feature starts where `|value - baseline|` reaches the threshold and
/// ends where it falls below the larger of half the threshold and half the
/// feature's running peak, or changes sign.
pub fn extract_iip(w: &ReconstructedWaveform, map: &VelocityMap, opts: &IipOptions) -> Result<IipReport> {
    if w.is_empty() {
        return Err(Error::Domain("cannot extract an IIP from an empty waveform".into()));
    }
    if !(opts.threshold > 0.0) {
        return Err(Error::Domain("IIP threshold must be positive".into()));
    }
    map.validate()?;
    let dev = |i: usize| w.samples[i].value - w.baseline;
    let gap = 1.5 * w.tau_d;

    let mut features: Vec<Feature> = Vec::new();
    let mut open: Option<Feature> = None;
    // After a feature closes, a new one may only start once the value has
    // dropped into the hysteresis band, changed sign, or risen again by the
    // band width from its lowest point; otherwise the tail of one echo would
    // restart it.
    let band = 0.5 * opts.threshold;
    let mut armed = true;
    let mut exit_sign = 0.0;
    let mut low = f64::INFINITY;
    for i in 0..w.len() {
        let s = w.samples[i];
        if s.waveform_time < opts.ignore_before {
            continue;
        }
        let d = dev(i);
        let contiguous = i > 0 && s.waveform_time - w.samples[i - 1].waveform_time <= gap;
        if let Some(f) = open.as_mut() {
            let peak = dev(f.peak).abs();
            let floor = band.max(0.5 * peak);
            if contiguous && d * f.sign >= floor {
                if d.abs() > peak {
                    f.peak = i;
                }
                f.saturated |= s.saturated;
                continue;
            }
            exit_sign = f.sign;
            armed = !contiguous;
            low = f64::INFINITY;
            features.extend(open.take());
        }
        if !armed {
            low = low.min(d * exit_sign);
            armed = d * exit_sign < band || d * exit_sign >= low + band;
        }
        if armed && d.abs() >= opts.threshold {
            open = Some(Feature {
                start: i,
                peak: i,
                sign: d.signum(),
                saturated: s.saturated,
            });
        }
    }
    features.extend(open);

    // Unclipped echoes are timed at their half-peak crossing, which trails
    // the arrival by half a rise time. A clipped echo has no usable peak, so
    // it is timed where it crosses the threshold, close to its arrival.
    let leading_edge = |f: &Feature| {
        let level = if f.saturated {
            opts.threshold
        } else {
            0.5 * dev(f.peak).abs()
        };
        let mut i = f.peak;
        while i > f.start && dev(i - 1) * f.sign >= level {
            i -= 1;
        }
        let (t1, v1) = (w.samples[i].waveform_time, dev(i) * f.sign);
        if i == 0 || t1 - w.samples[i - 1].waveform_time > gap {
            return t1;
        }
        let (t0, v0) = (w.samples[i - 1].waveform_time, dev(i - 1) * f.sign);
        if v1 > v0 && v0 < level {
            t0 + (level - v0) / (v1 - v0) * (t1 - t0)
        } else {
            t1
        }
    };

    let mut merged: Vec<(f64, Feature)> = Vec::new();
    for f in features {
        let lag = if f.saturated { 0.0 } else { 0.5 * opts.rise_time };
        let t = leading_edge(&f) - lag;
        if let Some((t_prev, prev)) = merged.last_mut() {
            // The relative slack keeps echoes exactly one window apart
            // distinct despite rounding in the edge interpolation.
            if prev.sign == f.sign && t - *t_prev < opts.merge_window * (1.0 - 1e-6) {
                if dev(f.peak).abs() > dev(prev.peak).abs() {
                    prev.peak = f.peak;
                }
                prev.saturated |= f.saturated;
                continue;
            }
        }
        merged.push((t, f));
    }

    let discontinuities = merged
        .into_iter()
        .map(|(t, f)| {
            let round_trip_time = (t - opts.launch_time).max(0.0);
            Discontinuity {
                round_trip_time,
                distance: map.distance(round_trip_time),
                magnitude: dev(f.peak).abs(),
                polarity: if f.sign * w.polarity > 0.0 {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
                saturated: f.saturated,
            }
        })
        .collect();
    Ok(IipReport {
        discontinuities,
        velocity_map: map.clone(),
    })
}

/// Two reflections closer than this cannot be told apart with a probe of
/// width `pulse_width`.
pub fn spatial_resolution(pulse_width: f64, velocity: f64) -> Result<f64> {
    if !(pulse_width >= 0.0) || !(velocity > 0.0) {
        return Err(Error::Domain("pulse width must be >= 0 and velocity > 0".into()));
    }
    Ok(velocity * pulse_width / 2.0)
}
