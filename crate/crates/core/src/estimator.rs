//! Binomial statistics of the comparator output and the probability-to-voltage
//! map (PVM).
//!
//! Averaging `M` comparator decisions at one sampling point gives `p_hat`,
//! which for large `M` is normally distributed around the true probability
//! `p0` with variance `p0 (1 - p0) / M`. The width of the `gamma` confidence
//! interval is the probability resolution `delta_p`; pushing it through the
//! slope of the PVM at `p = 0.5` gives the voltage resolution.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::normal;

/// Two-sided standard score for confidence level `gamma`.
///
/// At 0.95 this returns the customary 1.96 so that the interval width
/// constant is exactly 3.92; other levels use the exact normal quantile.
pub fn z_score(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("confidence level {gamma} outside (0, 1)")));
    }
    if gamma == 0.95 {
        return Ok(1.96);
    }
    Ok(normal::inverse_cdf(0.5 * (1.0 + gamma)))
}

/// Smallest trial count for which the normal approximation of the binomial
/// average is considered valid: `ceil(9 * max(p0/(1-p0), (1-p0)/p0))`.
pub fn min_trials_for_normal_approx(p0: f64) -> Result<u64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Domain(format!("p0 = {p0} must lie strictly inside (0, 1)")));
    }
    let odds = p0 / (1.0 - p0);
    let bound = 9.0 * odds.max(1.0 / odds);
    // 0.9 / 0.1 evaluates to 9.000000000000002; keep such rounding noise
    // from bumping the ceiling.
    Ok((bound * (1.0 - 1e-12)).ceil() as u64)
}

/// Confidence-interval width `2 z(gamma) sqrt(p0 (1 - p0) / M)`.
pub fn delta_p(p0: f64, m: u64, gamma: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::Domain(format!("p0 = {p0} outside [0, 1]")));
    }
    let z = z_score(gamma)?;
    if p0 > 0.0 && p0 < 1.0 {
        let needed = min_trials_for_normal_approx(p0)?;
        if m < needed {
            log::warn!("M = {m} is below the normal-approximation minimum {needed} for p0 = {p0}");
        }
    }
    Ok(2.0 * z * (p0 * (1.0 - p0) / m as f64).sqrt())
}

/// Averaged comparator output at one sampling point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub p_hat: f64,
    pub m: u64,
    pub gamma: f64,
    pub delta_p: f64,
}

impl ProbabilityEstimate {
    pub fn from_counts(ones: u64, m: u64, gamma: f64) -> Result<Self> {
        if ones > m {
            return Err(Error::Domain(format!("{ones} ones out of {m} trials")));
        }
        let p_hat = if m == 0 { 0.0 } else { ones as f64 / m as f64 };
        Ok(ProbabilityEstimate {
            p_hat,
            m,
            gamma,
            delta_p: delta_p(p_hat, m, gamma)?,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        let half = 0.5 * self.delta_p;
        (self.p_hat - half, self.p_hat + half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvmMode {
    /// Report probabilities as they are.
    Probability,
    /// Tangent of the Gaussian map at `p = 0.5`.
    Linear,
    /// Exact inverse of the Gaussian probability law.
    Gaussian,
}

impl std::str::FromStr for PvmMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probability" => Ok(PvmMode::Probability),
            "linear" => Ok(PvmMode::Linear),
            "gaussian" => Ok(PvmMode::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown PVM mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for PvmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PvmMode::Probability => "probability",
            PvmMode::Linear => "linear",
            PvmMode::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvmSpec {
    pub mode: PvmMode,
    pub sigma_total: f64,
    pub bias_vb: f64,
    /// +1 when the signal drives the inverting input, so probability falls
    /// as the signal rises.
    pub polarity: f64,
}

impl PvmSpec {
    pub fn probability() -> Self {
        PvmSpec {
            mode: PvmMode::Probability,
            sigma_total: 1.0,
            bias_vb: 0.0,
            polarity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != PvmMode::Probability && !(self.sigma_total > 0.0) {
            return Err(Error::InvalidConfig("PVM needs sigma_total > 0".into()));
        }
        if self.polarity != 1.0 && self.polarity != -1.0 {
            return Err(Error::InvalidConfig("PVM polarity must be +1 or -1".into()));
        }
        Ok(())
    }

    /// Volts per unit probability at `p = 0.5`.
    pub fn slope(&self) -> f64 {
        self.sigma_total * (2.0 * PI).sqrt()
    }
}

/// Output of [`pvm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvmValue {
    pub value: f64,
    /// The estimate sat at 0 or 1, so the value is a clamp, not a measurement.
    pub saturated: bool,
    /// `value` is in volts (false in probability mode).
    pub volts: bool,
}

/// Largest |z| reported by the Gaussian map.
pub const SATURATION_SIGMAS: f64 = 4.0;

/// Map an estimated probability back to the input voltage.
pub fn pvm(p_hat: f64, spec: &PvmSpec) -> PvmValue {
    let p = p_hat.clamp(0.0, 1.0);
    let saturated = p <= 0.0 || p >= 1.0;
    match spec.mode {
        PvmMode::Probability => PvmValue {
            value: p_hat,
            saturated,
            volts: false,
        },
        PvmMode::Linear => PvmValue {
            value: spec.bias_vb - spec.polarity * (p - 0.5) * spec.slope(),
            saturated,
            volts: true,
        },
        PvmMode::Gaussian => {
            let z = normal::inverse_cdf(p).clamp(-SATURATION_SIGMAS, SATURATION_SIGMAS);
            PvmValue {
                value: spec.bias_vb - spec.polarity * spec.sigma_total * z,
                saturated,
                volts: true,
            }
        }
    }
}

/// Voltage resolution for a probability resolution `delta_p_val`.
pub fn delta_v(delta_p_val: f64, spec: &PvmSpec) -> Result<f64> {
    match spec.mode {
        PvmMode::Probability => Err(Error::NotApplicable(
            "voltage resolution needs a linear or gaussian PVM".into(),
        )),
        _ => Ok(delta_p_val * spec.slope()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(sigma: f64) -> PvmSpec {
        PvmSpec {
            mode: PvmMode::Gaussian,
            sigma_total: sigma,
            bias_vb: 0.0,
            polarity: 1.0,
        }
    }

    #[test]
    fn min_trials_examples() {
        assert_eq!(min_trials_for_normal_approx(0.5).unwrap(), 9);
        assert_eq!(min_trials_for_normal_approx(0.9).unwrap(), 81);
        assert_eq!(min_trials_for_normal_approx(0.1).unwrap(), 81);
        assert!(min_trials_for_normal_approx(0.0).is_err());
        assert!(min_trials_for_normal_approx(1.0).is_err());
    }

    #[test]
    fn delta_p_examples() {
        assert!((delta_p(0.5, 1000, 0.95).unwrap() - 0.06198).abs() < 5e-6);
        assert!((delta_p(0.5, 100_000, 0.95).unwrap() - 0.00620).abs() < 5e-6);
        assert!(delta_p(0.5, 1_000_000_000_000, 0.95).unwrap() < 1e-5);
        assert!(delta_p(0.5, 0, 0.95).is_err());
        assert_eq!(delta_p(0.0, 10, 0.95).unwrap(), 0.0);
        // 3.92 constant at gamma = 0.95
        assert_eq!(2.0 * z_score(0.95).unwrap(), 3.92);
    }

    #[test]
    fn delta_p_monotone_in_m() {
        let mut prev = f64::INFINITY;
        for m in [10u64, 100, 1_000, 10_000, 1_000_000] {
            let d = delta_p(0.5, m, 0.95).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn other_confidence_levels() {
        assert!((z_score(0.99).unwrap() - 2.575_829_303_548_901).abs() < 1e-12);
        assert!(z_score(1.0).is_err());
    }

    #[test]
    fn pvm_midpoint() {
        for mode in [PvmMode::Linear, PvmMode::Gaussian] {
            let spec = PvmSpec { mode, bias_vb: 0.25, ..gauss(8e-3) };
            let out = pvm(0.5, &spec);
            assert!((out.value - 0.25).abs() < 1e-15);
            assert!(!out.saturated);
        }
        assert_eq!(pvm(0.5, &PvmSpec::probability()).value, 0.5);
    }

    #[test]
    fn pvm_gaussian_one_sigma() {
        let spec = gauss(8.06e-3);
        let out = pvm(0.8413, &spec);
        assert!((out.value + 8.06e-3).abs() < 5e-6);
    }

    #[test]
    fn pvm_saturation() {
        let spec = gauss(8.06e-3);
        let hi = pvm(1.0, &spec);
        assert!(hi.saturated);
        assert!((hi.value + 4.0 * 8.06e-3).abs() < 1e-15);
        let lo = pvm(0.0, &spec);
        assert!(lo.saturated);
        assert!((lo.value - 4.0 * 8.06e-3).abs() < 1e-15);
        assert!(pvm(1.0, &PvmSpec::probability()).saturated);
    }

    #[test]
    fn linear_tracks_gaussian_near_midpoint() {
        let g = gauss(8e-3);
        let l = PvmSpec { mode: PvmMode::Linear, ..g };
        for i in 0..=100 {
            let p = 0.45 + 0.1 * i as f64 / 100.0;
            assert!((pvm(p, &g).value - pvm(p, &l).value).abs() <= 0.01 * 8e-3);
        }
    }

    #[test]
    fn delta_v_examples() {
        let spec = gauss(8.06e-3);
        assert_eq!(delta_v(0.0, &spec).unwrap(), 0.0);
        let dv = delta_v(0.0062, &spec).unwrap();
        assert!((dv - 125.26e-6).abs() < 0.1e-6, "{dv}");
        assert!(matches!(delta_v(0.1, &PvmSpec::probability()), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn estimate_from_counts() {
        let e = ProbabilityEstimate::from_counts(2, 4, 0.95).unwrap();
        assert_eq!(e.p_hat, 0.5);
        let (lo, hi) = e.interval();
        assert!((hi - lo - e.delta_p).abs() < 1e-15);
        assert!(ProbabilityEstimate::from_counts(5, 4, 0.95).is_err());
    }
}
