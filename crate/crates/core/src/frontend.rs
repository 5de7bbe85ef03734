//! Receiver front end: a noisy differential comparator whose reference input
//! is driven by the rising edge of a jittery clock.
//!
//! Wiring follows the single-pin reflectometer: the line under test (and the
//! transmitter) sit on the inverting input, the jitter clock on the
//! non-inverting input. The comparator therefore reads 1 when the reference
//! edge is above the line voltage, and the probability of a 1 falls as the
//! reflected signal rises.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorParams {
    /// Input-referred offset, volts. Positive values raise the threshold.
    pub offset_voltage: f64,
    /// Full hysteresis width, volts.
    pub hysteresis_width: f64,
    /// Lumped thermal noise of both inputs, volts RMS.
    pub thermal_sigma: f64,
}

impl Default for ComparatorParams {
    fn default() -> Self {
        ComparatorParams {
            offset_voltage: 0.0,
            hysteresis_width: 0.0,
            thermal_sigma: 1e-3,
        }
    }
}

impl ComparatorParams {
    pub fn validate(&self) -> Result<()> {
        if !self.offset_voltage.is_finite() {
            return Err(Error::InvalidConfig("comparator offset must be finite".into()));
        }
        if !(self.hysteresis_width >= 0.0 && self.hysteresis_width.is_finite()) {
            return Err(Error::InvalidConfig("hysteresis width must be >= 0".into()));
        }
        if !(self.thermal_sigma >= 0.0 && self.thermal_sigma.is_finite()) {
            return Err(Error::InvalidConfig("thermal sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Jitter clock used as the dithered comparator reference.
///
/// Voltages are relative to the line's common mode, so the default ramp is
/// centred on zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterClock {
    /// Edge slew rate, V/s.
    pub slope_k: f64,
    /// Edge timing jitter, seconds RMS.
    pub jitter_sigma: f64,
    /// Edge voltage at the nominal sampling instant.
    pub bias_vb: f64,
    pub ramp_low: f64,
    pub ramp_high: f64,
    pub period: f64,
}

impl Default for JitterClock {
    fn default() -> Self {
        JitterClock {
            slope_k: 1e9,
            jitter_sigma: 8e-12,
            bias_vb: 0.0,
            ramp_low: -0.6,
            ramp_high: 0.6,
            period: 10e-9,
        }
    }
}

impl JitterClock {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope_k > 0.0 && self.slope_k.is_finite()) {
            return Err(Error::InvalidConfig("clock slope must be positive".into()));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidConfig("jitter sigma must be >= 0".into()));
        }
        if !(self.ramp_low < self.bias_vb && self.bias_vb < self.ramp_high) {
            return Err(Error::InvalidConfig(format!(
                "bias {} must lie strictly inside the ramp [{}, {}]",
                self.bias_vb, self.ramp_low, self.ramp_high
            )));
        }
        if !(self.period > 0.0) {
            return Err(Error::InvalidConfig("clock period must be positive".into()));
        }
        Ok(())
    }

    /// Timing jitter expressed as voltage noise on the edge, `K * sigma_j`.
    pub fn jitter_voltage_sigma(&self) -> f64 {
        self.slope_k * self.jitter_sigma
    }

    pub fn half_range(&self) -> f64 {
        0.5 * (self.ramp_high - self.ramp_low)
    }

    /// Check that sampling `phase_offset` away from the nominal crossing
    /// stays on the linear part of the edge.
    pub fn check_linear(&self, phase_offset: f64) -> Result<()> {
        let excursion = phase_offset.abs() * self.slope_k + 4.0 * self.jitter_voltage_sigma();
        let half_range = self.half_range();
        if excursion < half_range {
            Ok(())
        } else {
            Err(Error::RampSaturation {
                excursion,
                half_range,
            })
        }
    }

    /// Mean reference voltage when sampling `phase_offset` after the
    /// nominal crossing.
    pub fn mean_reference(&self, phase_offset: f64) -> f64 {
        self.bias_vb + self.slope_k * phase_offset
    }

    /// One jittered edge voltage around `mean`, clamped to the ramp.
    pub fn draw<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (mean + self.jitter_voltage_sigma() * z).clamp(self.ramp_low, self.ramp_high)
    }
}

/// Total equivalent input noise, `sqrt(sigma_J^2 + sigma_T^2)`.
pub fn total_noise_sigma(cmp: &ComparatorParams, clk: &JitterClock) -> f64 {
    clk.jitter_voltage_sigma().hypot(cmp.thermal_sigma)
}

/// One draw of the jitter-clock voltage at the sampling instant.
pub fn jitter_reference_voltage<R: Rng + ?Sized>(
    clk: &JitterClock,
    phase_offset: f64,
    rng: &mut R,
) -> Result<f64> {
    clk.check_linear(phase_offset)?;
    Ok(clk.draw(clk.mean_reference(phase_offset), rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComparatorState {
    pub last_output: bool,
}

/// One comparator decision.
///
/// The threshold moves up by half the hysteresis width while the output is
/// low and down by half while it is high.
pub fn compare<R: Rng + ?Sized>(
    v_inverting: f64,
    v_noninverting: f64,
    cmp: &ComparatorParams,
    state: &mut ComparatorState,
    rng: &mut R,
) -> bool {
    let z: f64 = rng.sample(StandardNormal);
    let half = 0.5 * cmp.hysteresis_width;
    let h_eff = if state.last_output { -half } else { half };
    // Offset and hysteresis are summed first so that (h, c) and (0, c + h/2)
    // produce bit-identical thresholds.
    let threshold = v_inverting + (cmp.offset_voltage + h_eff);
    let out = v_noninverting + cmp.thermal_sigma * z > threshold;
    state.last_output = out;
    out
}

/// Comparator driven by a rising reference edge.
#[derive(Debug, Clone)]
pub struct Comparator {
    pub params: ComparatorParams,
    pub state: ComparatorState,
}

impl Comparator {
    pub fn new(params: ComparatorParams) -> Self {
        Comparator {
            params,
            state: ComparatorState::default(),
        }
    }

    pub fn compare<R: Rng + ?Sized>(&mut self, v_inverting: f64, v_noninverting: f64, rng: &mut R) -> bool {
        compare(v_inverting, v_noninverting, &self.params, &mut self.state, rng)
    }

    /// Decision at the sampling instant of one rising clock edge. The edge
    /// starts from `ramp_low`, which settles the comparator low before the
    /// reference crosses the signal.
    pub fn sample_edge<R: Rng + ?Sized>(&mut self, v_inverting: f64, v_reference: f64, ramp_low: f64, rng: &mut R) -> bool {
        self.compare(v_inverting, ramp_low, rng);
        self.compare(v_inverting, v_reference, rng)
    }
}

/// Probability of a 1 for a noiseless input `v` on the inverting pin, given
/// Gaussian reference noise around `bias_vb`.
pub fn expected_probability(v: f64, bias_vb: f64, offset: f64, sigma_total: f64) -> f64 {
    crate::normal::cdf((bias_vb - v - offset) / sigma_total)
}

/// Supply ripple component synchronous with the system clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemTone {
    /// Harmonic index of the system clock frequency.
    pub harmonic: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// Slowly varying drift, modeled as a stationary Gauss-Markov process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowFrequencyNoise {
    pub rms: f64,
    pub correlation_time: f64,
    /// Hold one value for each probing cycle instead of evolving per sample.
    pub hold_per_cycle: bool,
}

impl Default for LowFrequencyNoise {
    fn default() -> Self {
        LowFrequencyNoise {
            rms: 0.0,
            correlation_time: 1e-6,
            hold_per_cycle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEnvironment {
    pub low_freq: LowFrequencyNoise,
    pub tones: Vec<SystemTone>,
    /// Bandwidth of the wideband (thermal and jitter) noise, Hz.
    pub cutoff_fc: f64,
}

impl Default for NoiseEnvironment {
    /// Fundamental and second harmonic ripple, no drift.
    fn default() -> Self {
        NoiseEnvironment {
            low_freq: LowFrequencyNoise::default(),
            tones: vec![
                SystemTone {
                    harmonic: 1,
                    amplitude: 2e-3,
                    phase: 0.0,
                },
                SystemTone {
                    harmonic: 2,
                    amplitude: 0.5e-3,
                    phase: 0.0,
                },
            ],
            cutoff_fc: 1e9,
        }
    }
}

impl NoiseEnvironment {
    pub fn quiet() -> Self {
        NoiseEnvironment {
            low_freq: LowFrequencyNoise::default(),
            tones: Vec::new(),
            cutoff_fc: 1e9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low_freq.rms >= 0.0) {
            return Err(Error::InvalidConfig("low-frequency rms must be >= 0".into()));
        }
        if !(self.low_freq.correlation_time > 0.0) {
            return Err(Error::InvalidConfig("correlation time must be positive".into()));
        }
        if self.tones.iter().any(|t| !(t.amplitude >= 0.0)) {
            return Err(Error::InvalidConfig("tone amplitudes must be >= 0".into()));
        }
        if !(self.cutoff_fc > 0.0) {
            return Err(Error::InvalidConfig("cutoff frequency must be positive".into()));
        }
        Ok(())
    }

    /// Wideband noise decorrelates after `1 / (4 f_c)`; slower sampling sees
    /// independent draws.
    pub fn samples_independent(&self, t_s: f64) -> bool {
        t_s >= 1.0 / (4.0 * self.cutoff_fc)
    }
}

/// Deterministic ripple at `t`. Depends on `t` only modulo `t_s`.
pub fn system_tone(env: &NoiseEnvironment, t: f64, t_s: f64) -> f64 {
    let frac = t.rem_euclid(t_s) / t_s;
    env.tones
        .iter()
        .map(|tone| tone.amplitude * (TAU * f64::from(tone.harmonic) * frac + tone.phase).sin())
        .sum()
}

/// Gauss-Markov drift sampled exactly at arbitrary, non-decreasing times.
#[derive(Debug, Clone)]
pub struct DriftProcess {
    params: LowFrequencyNoise,
    last: Option<(f64, f64)>,
    cached_dt: f64,
    cached_rho: f64,
}

impl DriftProcess {
    pub fn new(params: LowFrequencyNoise) -> Self {
        DriftProcess {
            params,
            last: None,
            cached_dt: f64::NAN,
            cached_rho: 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> f64 {
        if self.params.rms == 0.0 {
            return 0.0;
        }
        let z: f64 = rng.sample(StandardNormal);
        let value = match self.last {
            None => self.params.rms * z,
            Some((t0, x0)) => {
                let dt = (t - t0).abs();
                if dt != self.cached_dt {
                    self.cached_dt = dt;
                    self.cached_rho = (-dt / self.params.correlation_time).exp();
                }
                let rho = self.cached_rho;
                rho * x0 + self.params.rms * (1.0 - rho * rho).sqrt() * z
            }
        };
        self.last = Some((t, value));
        value
    }
}

/// Environment noise source: ripple plus drift.
#[derive(Debug, Clone)]
pub struct EnvironmentNoise {
    env: NoiseEnvironment,
    t_s: f64,
    drift: DriftProcess,
}

impl EnvironmentNoise {
    pub fn new(env: &NoiseEnvironment, t_s: f64) -> Self {
        EnvironmentNoise {
            env: env.clone(),
            t_s,
            drift: DriftProcess::new(env.low_freq),
        }
    }

    pub fn tone(&self, t: f64) -> f64 {
        system_tone(&self.env, t, self.t_s)
    }

    pub fn drift<R: Rng + ?Sized>(&mut self, wall_time: f64, rng: &mut R) -> f64 {
        self.drift.sample(wall_time, rng)
    }

    /// `tone(t) + n_L(t)`. Calls must come in non-decreasing time order.
    pub fn sample<R: Rng + ?Sized>(&mut self, wall_time: f64, rng: &mut R) -> f64 {
        self.tone(wall_time) + self.drift(wall_time, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn total_noise_examples() {
        let clk = JitterClock {
            jitter_sigma: 0.0,
            ..JitterClock::default()
        };
        let cmp = ComparatorParams {
            thermal_sigma: 1e-3,
            ..ComparatorParams::default()
        };
        assert!((total_noise_sigma(&cmp, &clk) - 1e-3).abs() < 1e-18);

        let clk = JitterClock::default();
        let quiet = ComparatorParams {
            thermal_sigma: 0.0,
            ..ComparatorParams::default()
        };
        assert!((total_noise_sigma(&quiet, &clk) - 8e-3).abs() < 1e-15);
        assert!((total_noise_sigma(&cmp, &clk) - 65e-6f64.sqrt()).abs() < 1e-15);
        assert!((total_noise_sigma(&cmp, &clk) - 8.062e-3).abs() < 1e-6);
    }

    #[test]
    fn noiseless_reference_is_bias() {
        let clk = JitterClock {
            jitter_sigma: 0.0,
            bias_vb: 0.1,
            ..JitterClock::default()
        };
        assert_eq!(jitter_reference_voltage(&clk, 0.0, &mut rng(1)).unwrap(), 0.1);
    }

    #[test]
    fn phase_offset_shifts_mean_linearly() {
        let clk = JitterClock::default();
        assert!((clk.mean_reference(10e-12) - 10e-3).abs() < 1e-15);
    }

    #[test]
    fn reference_moments() {
        let clk = JitterClock::default();
        let mut r = rng(7);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = jitter_reference_voltage(&clk, 0.0, &mut r).unwrap();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        let sigma = clk.jitter_voltage_sigma();
        assert!((mean - clk.bias_vb).abs() < 3.0 * sigma / 1000.0);
        assert!((std / sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn ramp_saturation() {
        let clk = JitterClock::default();
        // 0.6 V half range: 0.57 ns * 1 V/ns + 32 mV crosses it.
        assert!(matches!(
            jitter_reference_voltage(&clk, 0.57e-9, &mut rng(1)),
            Err(Error::RampSaturation { .. })
        ));
        assert!(jitter_reference_voltage(&clk, 0.5e-9, &mut rng(1)).is_ok());
    }

    #[test]
    fn noiseless_compare() {
        let cmp = ComparatorParams {
            thermal_sigma: 0.0,
            ..ComparatorParams::default()
        };
        let mut st = ComparatorState::default();
        assert!(compare(0.0, 0.001, &cmp, &mut st, &mut rng(1)));
        assert!(st.last_output);
        assert!(!compare(0.0, -0.001, &cmp, &mut st, &mut rng(1)));
    }

    #[test]
    fn symmetric_probability_half() {
        let clk = JitterClock::default();
        let cmp = ComparatorParams {
            thermal_sigma: 0.0,
            ..ComparatorParams::default()
        };
        let mut c = Comparator::new(cmp);
        let mut r = rng(3);
        let m = 100_000;
        let ones = (0..m)
            .filter(|_| {
                let v_ref = jitter_reference_voltage(&clk, 0.0, &mut r).unwrap();
                c.sample_edge(clk.bias_vb, v_ref, clk.ramp_low, &mut r)
            })
            .count();
        let p = ones as f64 / m as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / m as f64).sqrt());
    }

    #[test]
    fn rising_sweep_hysteresis_is_offset() {
        let cmp = ComparatorParams {
            offset_voltage: 0.0,
            hysteresis_width: 2e-3,
            thermal_sigma: 0.0,
        };
        let mut c = Comparator::new(cmp);
        let mut r = rng(1);
        // Sweep the reference up in 10 uV steps from the ramp bottom.
        let mut flip = None;
        c.compare(0.0, -0.6, &mut r);
        for i in 0..1000 {
            let v_ref = -5e-3 + i as f64 * 10e-6;
            if c.compare(0.0, v_ref, &mut r) {
                flip = Some(v_ref);
                break;
            }
        }
        let flip = flip.unwrap();
        assert!((flip - 1e-3).abs() <= 10e-6 + 1e-12, "flip at {flip}");
    }

    #[test]
    fn tones_are_periodic_and_deterministic() {
        let env = NoiseEnvironment::default();
        let t_s = 10e-9;
        let a = system_tone(&env, 3.3e-9, t_s);
        assert!((a - system_tone(&env, 3.3e-9 + t_s, t_s)).abs() < 1e-12);
        assert_eq!(a, system_tone(&env, 3.3e-9, t_s));
        let silent = NoiseEnvironment::quiet();
        let mut en = EnvironmentNoise::new(&silent, t_s);
        assert_eq!(en.sample(1e-6, &mut rng(1)), 0.0);
    }

    #[test]
    fn drift_autocorrelation() {
        let params = LowFrequencyNoise {
            rms: 1.0,
            correlation_time: 1e-6,
            hold_per_cycle: false,
        };
        let mut r = rng(11);
        let lag = 100e-9;
        let n = 200_000;
        let mut p = DriftProcess::new(params);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        let mut prev = p.sample(0.0, &mut r);
        for i in 1..=n {
            let x = p.sample(i as f64 * lag, &mut r);
            sxy += prev * x;
            sxx += prev * prev;
            prev = x;
        }
        let rho = sxy / sxx;
        assert!(rho >= 0.90, "rho = {rho}");
        assert!((rho - (-0.1f64).exp()).abs() < 0.01);
    }

    #[test]
    fn independence_rule() {
        let env = NoiseEnvironment::quiet();
        assert!(env.samples_independent(10e-9));
        assert!(!env.samples_independent(0.1e-9));
    }
}
