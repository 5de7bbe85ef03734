//! Measurement schedule: real-time sampling, repetition, phase stepping.
//!
//! One probing cycle launches the probe and takes `P` real-time samples at
//! interval `T_s`. The cycle is repeated `M` times at the same PLL phase, then
//! the sampling phase is stepped by `tau_d = T_s / J` and the whole block is
//! repeated, `J` times in total. Loops nest phase-outer, repetition-middle,
//! sample-inner, so the sample `(j, m, p)` is taken at
//!
//! ```text
//! wall_time = P*M*j*T_s + P*m*T_s + p*T_s
//! ```
//!
//! and sees the waveform at `p*T_s + j*tau_d`. The PLL needs
//! `phase_shift_overhead_cycles` clock cycles to move between phase blocks;
//! that dead time is added to the physical clock that drives the drift
//! process ([`MeasurementConfig::elapsed_time`]) but not to the nominal
//! schedule time.

use std::ops::Range;

use rand::Rng;

use crate::channel::{bounce_diagram, synthesize_waveform, BounceLimits, ProbePulse, ReflectionEvent, SegmentedLine};
use crate::denoise::{ProbabilityWaveform, Units};
use crate::error::{Error, Result};
use crate::estimator::{delta_p, min_trials_for_normal_approx};
use crate::frontend::{system_tone, Comparator, ComparatorParams, DriftProcess, JitterClock, NoiseEnvironment};

/// PLL phase-step granularity of the reference FPGA family.
pub const PLL_MIN_SHIFT: f64 = 11.12e-12;
/// One delay-line unit spans 1.1 ns in 512 taps.
pub const DELAY_TAP: f64 = 1.1e-9 / 512.0;
pub const DELAY_TAP_COUNT: u32 = 512;
pub const PHASE_SHIFT_OVERHEAD_CYCLES: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementConfig {
    /// Real-time sampling interval `T_s`.
    pub t_s: f64,
    /// Samples per probing cycle, `P`. Also the number of SETs.
    pub sets: usize,
    /// Repetitions per phase, `M`.
    pub repetitions: usize,
    /// Phase steps per real-time interval, `J`.
    pub phases: usize,
    /// Equivalent-time interval `tau_d`.
    pub tau_d: f64,
    pub phase_shift_overhead_cycles: u32,
    /// Delay-line tap used by calibration.
    pub delay_tap: f64,
    pub delay_tap_count: u32,
    pub pll_min_shift: f64,
}

impl MeasurementConfig {
    /// Schedule with `tau_d = t_s / phases` and the reference hardware
    /// granularities.
    pub fn new(t_s: f64, sets: usize, repetitions: usize, phases: usize) -> Result<Self> {
        let cfg = MeasurementConfig {
            t_s,
            sets,
            repetitions,
            phases,
            tau_d: t_s / phases.max(1) as f64,
            phase_shift_overhead_cycles: PHASE_SHIFT_OVERHEAD_CYCLES,
            delay_tap: DELAY_TAP,
            delay_tap_count: DELAY_TAP_COUNT,
            pll_min_shift: PLL_MIN_SHIFT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 100 MSPS real-time rate, 10 SETs, 560 phases (56 GSPS), M = 1000.
    pub fn reference() -> Self {
        MeasurementConfig::new(10e-9, 10, 1000, 560).expect("reference schedule is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return Err(Error::InvalidConfig("T_s must be positive".into()));
        }
        if self.phases == 0 {
            return Err(Error::InvalidConfig("J must be at least 1".into()));
        }
        if self.sets < 2 {
            return Err(Error::InvalidConfig(
                "P must be at least 2 so one SET can serve as noise reference".into(),
            ));
        }
        let min_m = min_trials_for_normal_approx(0.5)? as usize;
        if self.repetitions < min_m {
            return Err(Error::InvalidConfig(format!(
                "M = {} is below the binomial-validity minimum {min_m}",
                self.repetitions
            )));
        }
        let span = self.phases as f64 * self.tau_d;
        if (span - self.t_s).abs() > self.t_s * f64::EPSILON {
            return Err(Error::InvalidConfig(format!(
                "J * tau_d = {span:e} does not equal T_s = {:e}",
                self.t_s
            )));
        }
        if self.tau_d < self.pll_min_shift {
            return Err(Error::InvalidConfig(format!(
                "tau_d = {:e} is finer than the PLL step {:e}",
                self.tau_d, self.pll_min_shift
            )));
        }
        if !(self.delay_tap > 0.0) || self.delay_tap_count == 0 {
            return Err(Error::InvalidConfig("delay line needs a positive tap and tap count".into()));
        }
        Ok(())
    }

    /// Number of reconstructed samples, `P * J`.
    pub fn ets_len(&self) -> usize {
        self.sets * self.phases
    }

    /// Position of `(j, p)` on the reconstructed time axis.
    pub fn ets_index(&self, j: usize, p: usize) -> usize {
        p * self.phases + j
    }

    pub fn waveform_time(&self, j: usize, p: usize) -> f64 {
        p as f64 * self.t_s + j as f64 * self.tau_d
    }

    /// Nominal schedule time of sample `(j, m, p)`.
    pub fn wall_time(&self, j: usize, m: usize, p: usize) -> f64 {
        let (pp, mm) = (self.sets as f64, self.repetitions as f64);
        pp * mm * j as f64 * self.t_s + pp * m as f64 * self.t_s + p as f64 * self.t_s
    }

    /// Dead time spent moving the PLL to the next phase.
    pub fn phase_shift_overhead(&self) -> f64 {
        f64::from(self.phase_shift_overhead_cycles) * self.t_s
    }

    /// Physical time of sample `(j, m, p)`, including the PLL dead time of
    /// the `j` phase steps that precede it.
    pub fn elapsed_time(&self, j: usize, m: usize, p: usize) -> f64 {
        self.wall_time(j, m, p) + j as f64 * self.phase_shift_overhead()
    }

    /// `P*M*J*T_s + J*overhead*T_s`.
    pub fn total_duration(&self) -> f64 {
        let n = (self.sets * self.repetitions * self.phases) as f64;
        n * self.t_s + self.phases as f64 * self.phase_shift_overhead()
    }

    /// Length of one probing cycle, `P * T_s`.
    pub fn cycle_duration(&self) -> f64 {
        self.sets as f64 * self.t_s
    }

    /// Reconstructed-axis indices that fall inside the transmit window.
    pub fn blind_spot(&self, pulse: &ProbePulse) -> Range<usize> {
        let ceil = |x: f64| (x - 1e-9).ceil().max(0.0) as usize;
        let n = self.ets_len();
        let start = ceil(pulse.launch_time / self.tau_d).min(n);
        let end = ceil((pulse.launch_time + pulse.width) / self.tau_d).min(n);
        start..end.max(start)
    }
}

/// Comparator and jitter clock together with the calibrated sampling phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrontendParams {
    pub comparator: ComparatorParams,
    pub clock: JitterClock,
    /// Phase between the jitter-clock crossing and the sampling instant.
    pub phase_offset: f64,
}

impl FrontendParams {
    pub fn new(comparator: ComparatorParams, clock: JitterClock) -> Self {
        FrontendParams {
            comparator,
            clock,
            phase_offset: 0.0,
        }
    }

    pub fn with_calibration(mut self, cal: &CalibrationResult) -> Self {
        self.phase_offset = cal.phase_offset;
        self
    }

    pub fn bias(&self) -> f64 {
        self.clock.mean_reference(self.phase_offset)
    }

    pub fn validate(&self) -> Result<()> {
        self.comparator.validate()?;
        self.clock.validate()
    }
}

/// Line under test plus the probe that excites it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dut {
    pub line: SegmentedLine,
    pub pulse: ProbePulse,
    pub limits: BounceLimits,
}

impl Dut {
    pub fn new(line: SegmentedLine, pulse: ProbePulse) -> Self {
        Dut {
            line,
            pulse,
            limits: BounceLimits::default(),
        }
    }

    pub fn events(&self) -> Result<Vec<ReflectionEvent>> {
        bounce_diagram(&self.line, self.limits)
    }

    /// Clean waveform on the reconstructed axis, indexed by
    /// [`MeasurementConfig::ets_index`]. Probes from earlier cycles whose
    /// echoes are still ringing are superposed.
    pub fn clean_samples(&self, config: &MeasurementConfig) -> Result<Vec<f64>> {
        let events = self.events()?;
        let last = events.last().map_or(0.0, |e| e.arrival_time);
        let cycle = config.cycle_duration();
        let tail = self.pulse.launch_time + last + self.pulse.width;
        let earlier_cycles = (tail / cycle).ceil().max(0.0) as usize;
        let mut out = vec![0.0; config.ets_len()];
        for p in 0..config.sets {
            for j in 0..config.phases {
                let t = config.waveform_time(j, p);
                out[config.ets_index(j, p)] = (0..=earlier_cycles)
                    .map(|k| synthesize_waveform(&events, &self.pulse, t + k as f64 * cycle))
                    .sum();
            }
        }
        Ok(out)
    }
}

/// Raw comparator decisions of one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTensor {
    bits: Vec<bool>,
    pub config: MeasurementConfig,
    pub calibrated_bias: f64,
}

impl SampleTensor {
    pub fn new(config: MeasurementConfig, calibrated_bias: f64) -> Self {
        let n = config.phases * config.repetitions * config.sets;
        SampleTensor {
            bits: vec![false; n],
            config,
            calibrated_bias,
        }
    }

    /// Build from bits laid out `[j][m][p]`.
    pub fn from_bits(config: MeasurementConfig, calibrated_bias: f64, bits: Vec<bool>) -> Result<Self> {
        let n = config.phases * config.repetitions * config.sets;
        if bits.len() != n {
            return Err(Error::Dimension(format!("{} bits for a {n}-sample schedule", bits.len())));
        }
        Ok(SampleTensor {
            bits,
            config,
            calibrated_bias,
        })
    }

    fn index(&self, j: usize, m: usize, p: usize) -> usize {
        (j * self.config.repetitions + m) * self.config.sets + p
    }

    pub fn get(&self, j: usize, m: usize, p: usize) -> bool {
        self.bits[self.index(j, m, p)]
    }

    pub fn set(&mut self, j: usize, m: usize, p: usize, bit: bool) {
        let i = self.index(j, m, p);
        self.bits[i] = bit;
    }

    /// Bits in schedule order.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Iterate `(j, m, p, bit)` in schedule order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, bool)> + '_ {
        let (mm, pp) = (self.config.repetitions, self.config.sets);
        self.bits.iter().enumerate().map(move |(i, &b)| {
            let p = i % pp;
            let m = (i / pp) % mm;
            let j = i / (pp * mm);
            (j, m, p, b)
        })
    }
}

/// Average over repetitions: entry `(j, p)` is the fraction of ones.
pub fn average_probabilities(tensor: &SampleTensor) -> ProbabilityWaveform {
    let cfg = &tensor.config;
    let mut out = ProbabilityWaveform::zeros(cfg.clone(), Units::Probability);
    let mut counts = vec![0u32; cfg.sets];
    for j in 0..cfg.phases {
        counts.iter_mut().for_each(|c| *c = 0);
        let block = &tensor.bits[j * cfg.repetitions * cfg.sets..(j + 1) * cfg.repetitions * cfg.sets];
        for row in block.chunks_exact(cfg.sets) {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += u32::from(b);
            }
        }
        for (p, &c) in counts.iter().enumerate() {
            out.set(j, p, f64::from(c) / cfg.repetitions as f64);
        }
    }
    out.mark_clipped();
    out
}

/// Outcome of the bias autocalibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub selected_delay_taps: u32,
    pub phase_offset: f64,
    pub achieved_bias: f64,
    /// Measured no-probe probability minus 0.5 at the selected tap.
    pub residual_probability_error: f64,
}

/// Measured no-probe probability of a 1 at one delay setting.
fn probe_free_probability<R: Rng + ?Sized>(
    config: &MeasurementConfig,
    frontend: &FrontendParams,
    env: &NoiseEnvironment,
    phase_offset: f64,
    trials: usize,
    clock_start: f64,
    rng: &mut R,
) -> f64 {
    let clk = &frontend.clock;
    let mean = clk.mean_reference(phase_offset);
    let mut cmp = Comparator::new(frontend.comparator);
    let mut drift = DriftProcess::new(env.low_freq);
    let tone = system_tone(env, 0.0, config.t_s);
    let mut ones = 0usize;
    for k in 0..trials {
        let t = clock_start + k as f64 * config.t_s;
        let v_inv = tone + drift.sample(t, rng);
        let v_ref = clk.draw(mean, rng);
        ones += usize::from(cmp.sample_edge(v_inv, v_ref, clk.ramp_low, rng));
    }
    ones as f64 / trials as f64
}

/// Align the jitter-clock crossing with the comparator threshold.
///
/// Sweeps the calibration delay line with the probe off, coarse first and
/// then tap by tap around the best coarse point, and keeps the tap whose
/// measured probability is closest to 0.5. Taps that would push the
/// sampling point off the linear part of the edge are not used.
pub fn calibrate<R: Rng + ?Sized>(
    config: &MeasurementConfig,
    frontend: &FrontendParams,
    env: &NoiseEnvironment,
    m_cal: usize,
    rng: &mut R,
) -> Result<CalibrationResult> {
    config.validate()?;
    frontend.validate()?;
    if m_cal == 0 {
        return Err(Error::Domain("calibration needs at least one trial per tap".into()));
    }
    let clk = &frontend.clock;
    let center = config.delay_tap_count / 2;
    let phase_of = |tap: u32| (f64::from(tap) - f64::from(center)) * config.delay_tap;
    let usable: Vec<u32> = (0..=config.delay_tap_count)
        .filter(|&t| clk.check_linear(phase_of(t)).is_ok())
        .collect();
    let (&lo, &hi) = match (usable.first(), usable.last()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            return Err(Error::CalibrationRange(
                "no delay tap keeps the sampling point on the linear edge".into(),
            ))
        }
    };

    let mut clock_start = 0.0;
    let mut measure = |tap: u32, rng: &mut R| {
        let p = probe_free_probability(config, frontend, env, phase_of(tap), m_cal, clock_start, rng);
        clock_start += m_cal as f64 * config.t_s;
        p
    };

    let step = ((hi - lo) / 32).max(1);
    let mut coarse: Vec<(u32, f64)> = (lo..=hi).step_by(step as usize).map(|t| (t, measure(t, rng))).collect();
    if coarse.last().map(|c| c.0) != Some(hi) {
        coarse.push((hi, measure(hi, rng)));
    }
    let tol = 2.0 * delta_p(0.5, m_cal as u64, 0.95)?;
    let (p_lo, p_hi) = (coarse[0].1, coarse[coarse.len() - 1].1);
    if p_lo > 0.5 + tol || p_hi < 0.5 - tol {
        return Err(Error::CalibrationRange(format!(
            "probability spans [{p_lo:.3}, {p_hi:.3}] over the usable taps; offset {:.4} V is out of reach",
            frontend.comparator.offset_voltage
        )));
    }
    let best_coarse = coarse
        .iter()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map(|c| c.0)
        .unwrap_or(center);

    let from = best_coarse.saturating_sub(step).max(lo);
    let to = (best_coarse + step).min(hi);
    let mut best = (best_coarse, f64::INFINITY);
    for tap in from..=to {
        let p = measure(tap, rng);
        if (p - 0.5).abs() < (best.1 - 0.5).abs() {
            best = (tap, p);
        }
    }

    let residual = best.1 - 0.5;
    if residual.abs() > tol {
        return Err(Error::CalibrationRange(format!(
            "best tap {} still reads p = {:.3}",
            best.0, best.1
        )));
    }
    let phase_offset = phase_of(best.0);
    Ok(CalibrationResult {
        selected_delay_taps: best.0,
        phase_offset,
        achieved_bias: clk.mean_reference(phase_offset),
        residual_probability_error: residual,
    })
}

/// Acquire one full `[j][m][p]` tensor.
///
/// Each decision compares the line voltage (clean reflection when
/// `probe_enabled`, plus ripple and drift) against one jitter-clock edge.
/// While the transmitter drives the pin the comparator reads 0.
pub fn run_measurement<R: Rng + ?Sized>(
    config: &MeasurementConfig,
    dut: &Dut,
    frontend: &FrontendParams,
    env: &NoiseEnvironment,
    rng: &mut R,
    probe_enabled: bool,
) -> Result<SampleTensor> {
    config.validate()?;
    frontend.validate()?;
    env.validate()?;
    let clk = &frontend.clock;
    clk.check_linear(frontend.phase_offset)?;
    if !env.samples_independent(config.t_s) {
        log::warn!(
            "sampling interval {:e} s is shorter than the wideband noise correlation time",
            config.t_s
        );
    }

    let (clean, blind) = if probe_enabled {
        (dut.clean_samples(config)?, config.blind_spot(&dut.pulse))
    } else {
        (vec![0.0; config.ets_len()], 0..0)
    };

    let mean = frontend.bias();
    let mut tensor = SampleTensor::new(config.clone(), mean);
    let mut cmp = Comparator::new(frontend.comparator);
    let mut drift = DriftProcess::new(env.low_freq);
    let hold = env.low_freq.hold_per_cycle;
    let mut held = 0.0;

    let mut i = 0;
    for j in 0..config.phases {
        let tone = system_tone(env, j as f64 * config.tau_d, config.t_s);
        for m in 0..config.repetitions {
            for p in 0..config.sets {
                if !hold || p == 0 {
                    held = drift.sample(config.elapsed_time(j, m, p), rng);
                }
                let idx = config.ets_index(j, p);
                let v_inv = clean[idx] + tone + held;
                let v_ref = clk.draw(mean, rng);
                let mut bit = cmp.sample_edge(v_inv, v_ref, clk.ramp_low, rng);
                if blind.contains(&idx) {
                    bit = false;
                    cmp.state.last_output = false;
                }
                tensor.bits[i] = bit;
                i += 1;
            }
        }
    }
    Ok(tensor)
}

/// Drift averaged over repetitions at each `(j, p)`, in volts: the noise
/// content a measurement with this schedule picks up from the environment's
/// low-frequency process. Uses the same clock as [`run_measurement`].
pub fn drift_profile<R: Rng + ?Sized>(
    config: &MeasurementConfig,
    env: &NoiseEnvironment,
    rng: &mut R,
) -> Result<ProbabilityWaveform> {
    config.validate()?;
    env.validate()?;
    let mut out = ProbabilityWaveform::zeros(config.clone(), Units::Volts);
    let mut drift = DriftProcess::new(env.low_freq);
    let hold = env.low_freq.hold_per_cycle;
    let mut held = 0.0;
    let mut acc = vec![0.0; config.sets];
    for j in 0..config.phases {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for m in 0..config.repetitions {
            for (p, a) in acc.iter_mut().enumerate() {
                if !hold || p == 0 {
                    held = drift.sample(config.elapsed_time(j, m, p), rng);
                }
                *a += held;
            }
        }
        for (p, a) in acc.iter().enumerate() {
            out.set(j, p, a / config.repetitions as f64);
        }
    }
    Ok(out)
}

/// Ripple seen at each `(j, p)`, in volts.
pub fn tone_profile(config: &MeasurementConfig, env: &NoiseEnvironment) -> ProbabilityWaveform {
    let mut out = ProbabilityWaveform::zeros(config.clone(), Units::Volts);
    for j in 0..config.phases {
        let v = system_tone(env, j as f64 * config.tau_d, config.t_s);
        for p in 0..config.sets {
            out.set(j, p, v);
        }
    }
    out
}

/// Clean reflection waveform on the `(j, p)` grid, in volts.
pub fn clean_profile(config: &MeasurementConfig, dut: &Dut) -> Result<ProbabilityWaveform> {
    let clean = dut.clean_samples(config)?;
    let mut out = ProbabilityWaveform::zeros(config.clone(), Units::Volts);
    for j in 0..config.phases {
        for p in 0..config.sets {
            out.set(j, p, clean[config.ets_index(j, p)]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Segment, Termination};
    use crate::frontend::{compare, jitter_reference_voltage, ComparatorState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> MeasurementConfig {
        MeasurementConfig::new(10e-9, 3, 9, 2).unwrap()
    }

    #[test]
    fn reference_schedule() {
        let c = MeasurementConfig::reference();
        assert_eq!(c.ets_len(), 5600);
        assert!((c.tau_d - 17.857e-12).abs() < 1e-15);
        assert!((1.0 / c.tau_d - 56e9).abs() < 1.0);
    }

    #[test]
    fn config_invariants() {
        assert!(MeasurementConfig::new(10e-9, 1, 1000, 560).is_err());
        assert!(MeasurementConfig::new(10e-9, 10, 5, 560).is_err());
        assert!(MeasurementConfig::new(10e-9, 10, 1000, 1000).is_err());
        let mut c = MeasurementConfig::reference();
        c.tau_d = 17.8e-12;
        assert!(c.validate().is_err());
    }

    #[test]
    fn wall_clock_example() {
        let c = MeasurementConfig::new(10e-9, 3, 9, 2).unwrap();
        let c = MeasurementConfig { repetitions: 5, ..c };
        assert!((c.wall_time(1, 2, 0) - 210e-9).abs() < 1e-21);
        assert!((c.elapsed_time(1, 2, 0) - 330e-9).abs() < 1e-21);
    }

    #[test]
    fn total_duration_includes_overhead() {
        let c = small();
        let expected = 3.0 * 9.0 * 2.0 * 10e-9 + 2.0 * 12.0 * 10e-9;
        assert!((c.total_duration() - expected).abs() < 1e-21);
    }

    #[test]
    fn schedule_is_lexicographic() {
        let c = MeasurementConfig::new(10e-9, 4, 9, 3).unwrap();
        let mut prev = -1.0;
        for j in 0..3 {
            for m in 0..9 {
                for p in 0..4 {
                    let t = c.wall_time(j, m, p);
                    assert!(t > prev);
                    prev = t;
                }
            }
        }
    }

    #[test]
    fn blind_spot_count() {
        let c = MeasurementConfig::reference();
        let pulse = ProbePulse::new(0.6, 1e-9, 0.0).unwrap();
        assert_eq!(c.blind_spot(&pulse).len(), 56);
        let later = ProbePulse::new(0.6, 1e-9, 10e-9).unwrap();
        assert_eq!(c.blind_spot(&later), 560..616);
    }

    #[test]
    fn average_example() {
        let c = MeasurementConfig::new(10e-9, 2, 9, 1).unwrap();
        let mut t = SampleTensor::new(c, 0.0);
        for m in 0..9 {
            t.set(0, m, 0, true);
            t.set(0, m, 1, m % 2 == 0);
        }
        let w = average_probabilities(&t);
        assert_eq!(w.get(0, 0), 1.0);
        assert!((w.get(0, 1) - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn iter_matches_get() {
        let c = MeasurementConfig::new(10e-9, 3, 9, 2).unwrap();
        let mut t = SampleTensor::new(c, 0.0);
        t.set(1, 4, 2, true);
        let hits: Vec<_> = t.iter().filter(|x| x.3).collect();
        assert_eq!(hits, vec![(1, 4, 2, true)]);
    }

    #[test]
    fn noiseless_run_matches_direct_threshold() {
        // Oracle: evaluate every sample directly against a noiseless reference.
        let cfg = MeasurementConfig::new(10e-9, 3, 9, 2).unwrap();
        let line = SegmentedLine::new(
            50.0,
            vec![Segment::new(50.0, 0.75, 1.5e8)],
            Termination::Open,
        )
        .unwrap();
        let pulse = ProbePulse::rectangular(0.6, 1e-9, 0.0).unwrap();
        let dut = Dut::new(line, pulse);
        let clk = JitterClock {
            jitter_sigma: 0.0,
            bias_vb: 0.3,
            ..JitterClock::default()
        };
        let cmp = ComparatorParams {
            thermal_sigma: 0.0,
            ..ComparatorParams::default()
        };
        let fe = FrontendParams::new(cmp, clk);
        let env = NoiseEnvironment::quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = run_measurement(&cfg, &dut, &fe, &env, &mut rng, true).unwrap();

        let events = dut.events().unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(0);
        for (j, m, p, bit) in t.iter() {
            let tw = cfg.waveform_time(j, p);
            let s = synthesize_waveform(&events, &pulse, tw);
            let v_ref = jitter_reference_voltage(&clk, 0.0, &mut r2).unwrap();
            let mut st = ComparatorState::default();
            let mut expect = compare(s, v_ref, &cmp, &mut st, &mut r2);
            if tw < pulse.width {
                expect = false;
            }
            assert_eq!(bit, expect, "j={j} m={m} p={p}");
        }
        // Reflection of 0.6 V at 10 ns (p = 1, j = 0) sits above the 0.3 V bias.
        assert!(!t.get(0, 0, 1));
        assert!(t.get(1, 0, 1));
    }

    #[test]
    fn calibration_symmetric() {
        let cfg = MeasurementConfig::reference();
        let fe = FrontendParams::new(ComparatorParams::default(), JitterClock::default());
        let env = NoiseEnvironment::quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cal = calibrate(&cfg, &fe, &env, 1000, &mut rng).unwrap();
        let tol = 2.0 * delta_p(0.5, 1000, 0.95).unwrap();
        assert!(cal.residual_probability_error.abs() <= tol);
        assert!(cal.achieved_bias.abs() <= fe.clock.slope_k * cfg.delay_tap);
    }

    #[test]
    fn calibration_compensates_offset_and_hysteresis() {
        let cfg = MeasurementConfig::reference();
        let cmp = ComparatorParams {
            offset_voltage: 3e-3,
            hysteresis_width: 2e-3,
            thermal_sigma: 1e-3,
        };
        let fe = FrontendParams::new(cmp, JitterClock::default());
        let env = NoiseEnvironment::quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cal = calibrate(&cfg, &fe, &env, 1000, &mut rng).unwrap();
        let step = fe.clock.slope_k * cfg.delay_tap;
        assert!((step - 2.148e-3).abs() < 1e-6);
        assert!((cal.achieved_bias - 4e-3).abs() <= step, "{}", cal.achieved_bias);
    }

    #[test]
    fn calibration_out_of_range() {
        let cfg = MeasurementConfig::reference();
        let cmp = ComparatorParams {
            offset_voltage: 0.7,
            ..ComparatorParams::default()
        };
        let fe = FrontendParams::new(cmp, JitterClock::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = calibrate(&cfg, &fe, &NoiseEnvironment::quiet(), 200, &mut rng).unwrap_err();
        assert!(matches!(err, Error::CalibrationRange(_)));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = MeasurementConfig::new(10e-9, 3, 20, 4).unwrap();
        let dut = Dut::new(
            SegmentedLine::new(40.0, vec![Segment::new(50.0, 0.3, 1.5e8)], Termination::Open).unwrap(),
            ProbePulse::new(0.05, 1e-9, 0.0).unwrap(),
        );
        let fe = FrontendParams::default();
        let mut env = NoiseEnvironment::default();
        env.low_freq.rms = 1e-3;
        let a = run_measurement(&cfg, &dut, &fe, &env, &mut ChaCha8Rng::seed_from_u64(3), true).unwrap();
        let b = run_measurement(&cfg, &dut, &fe, &env, &mut ChaCha8Rng::seed_from_u64(3), true).unwrap();
        assert_eq!(a, b);
    }
}
