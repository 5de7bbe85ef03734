//! Segmented transmission line model and reflection waveform synthesis.
//!
//! The device under test is a cascade of lossless (optionally attenuating)
//! uniform segments between a source impedance and a termination. A probe
//! wave launched into the first segment scatters at every impedance step;
//! [`bounce_diagram`] lists every wave that makes it back to the source port
//! and [`synthesize_waveform`] superposes the probe pulse at those arrivals.
//!
//! Event gains are products of interface coefficients for the wave amplitude
//! arriving at the port. The extra `1 + Γ_source` factor that turns an
//! incident wave into a port voltage is not applied; with a matched source it
//! is one, and leaving it out keeps every gain bounded by one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Upper bound on propagation velocity accepted by the model.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Impedance seen looking into the next element of the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Load {
    Ohms(f64),
    Open,
    Short,
}

/// Far-end termination of a [`SegmentedLine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Open,
    Short,
    /// Terminated in the impedance of the last segment.
    Matched,
    Resistive(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Characteristic impedance, ohms.
    pub impedance: f64,
    /// Physical length, meters.
    pub length: f64,
    /// Propagation velocity, m/s.
    pub velocity: f64,
    /// Amplitude factor applied each time a wave traverses the segment.
    pub attenuation: f64,
}

impl Segment {
    pub fn new(impedance: f64, length: f64, velocity: f64) -> Self {
        Segment {
            impedance,
            length,
            velocity,
            attenuation: 1.0,
        }
    }

    /// One-way propagation delay.
    pub fn delay(&self) -> f64 {
        self.length / self.velocity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedLine {
    pub source_impedance: f64,
    pub segments: Vec<Segment>,
    pub termination: Termination,
}

impl SegmentedLine {
    pub fn new(source_impedance: f64, segments: Vec<Segment>, termination: Termination) -> Result<Self> {
        let line = SegmentedLine {
            source_impedance,
            segments,
            termination,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.source_impedance) {
            return Err(Error::Domain(format!(
                "source impedance must be positive, got {}",
                self.source_impedance
            )));
        }
        if self.segments.is_empty() {
            return Err(Error::Domain("line needs at least one segment".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !positive(s.impedance) || !positive(s.length) {
                return Err(Error::Domain(format!(
                    "segment {i}: impedance and length must be positive"
                )));
            }
            if !positive(s.velocity) || s.velocity > SPEED_OF_LIGHT {
                return Err(Error::Domain(format!(
                    "segment {i}: velocity {} outside (0, 3e8]",
                    s.velocity
                )));
            }
            if !(s.attenuation.is_finite() && s.attenuation > 0.0 && s.attenuation <= 1.0) {
                return Err(Error::Domain(format!(
                    "segment {i}: attenuation {} outside (0, 1]",
                    s.attenuation
                )));
            }
        }
        if let Termination::Resistive(r) = self.termination {
            if !positive(r) {
                return Err(Error::Domain(format!("termination resistance must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Load presented by the termination to the last segment.
    pub fn termination_load(&self) -> Load {
        match self.termination {
            Termination::Open => Load::Open,
            Termination::Short => Load::Short,
            Termination::Matched => Load::Ohms(self.segments.last().map_or(0.0, |s| s.impedance)),
            Termination::Resistive(r) => Load::Ohms(r),
        }
    }

    /// Round-trip delay from the source port to the far end.
    pub fn round_trip_delay(&self) -> f64 {
        2.0 * self.segments.iter().map(Segment::delay).sum::<f64>()
    }
}

/// Reflection coefficient for a wave travelling in `z_from` and meeting `z_to`.
pub fn reflection_coefficient(z_from: f64, z_to: Load) -> Result<f64> {
    if !(z_from.is_finite() && z_from > 0.0) {
        return Err(Error::Domain(format!("impedance must be positive, got {z_from}")));
    }
    match z_to {
        Load::Open => Ok(1.0),
        Load::Short => Ok(-1.0),
        Load::Ohms(z) if z.is_finite() && z > 0.0 => Ok((z - z_from) / (z + z_from)),
        Load::Ohms(z) => Err(Error::Domain(format!("impedance must be positive, got {z}"))),
    }
}

/// Pulse shape of the transmitted probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    Rectangular,
    /// Linear rise and fall edges of `rise_time`, flat top in between. The
    /// base of the trapezoid spans the full pulse width.
    Trapezoidal { rise_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePulse {
    pub amplitude: f64,
    /// Duration the transmitter is enabled, seconds.
    pub width: f64,
    pub shape: PulseShape,
    pub launch_time: f64,
}

impl ProbePulse {
    /// Trapezoidal pulse with `rise_time = width / 5`.
    pub fn new(amplitude: f64, width: f64, launch_time: f64) -> Result<Self> {
        let pulse = ProbePulse {
            amplitude,
            width,
            shape: PulseShape::Trapezoidal { rise_time: width / 5.0 },
            launch_time,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn rectangular(amplitude: f64, width: f64, launch_time: f64) -> Result<Self> {
        let pulse = ProbePulse {
            amplitude,
            width,
            shape: PulseShape::Rectangular,
            launch_time,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || self.amplitude == 0.0 {
            return Err(Error::Domain("pulse amplitude must be finite and non-zero".into()));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::Domain("pulse width must be positive".into()));
        }
        if let PulseShape::Trapezoidal { rise_time } = self.shape {
            if !(rise_time > 0.0 && rise_time < self.width) {
                return Err(Error::Domain(format!(
                    "rise time {rise_time} must lie in (0, width)"
                )));
            }
        }
        if !self.launch_time.is_finite() {
            return Err(Error::Domain("launch time must be finite".into()));
        }
        Ok(())
    }

    pub fn rise_time(&self) -> f64 {
        match self.shape {
            PulseShape::Rectangular => 0.0,
            PulseShape::Trapezoidal { rise_time } => rise_time,
        }
    }

    /// Unit-amplitude shape evaluated `dt` seconds after the pulse starts.
    pub fn unit_shape(&self, dt: f64) -> f64 {
        if dt < 0.0 || dt >= self.width {
            return 0.0;
        }
        match self.shape {
            PulseShape::Rectangular => 1.0,
            PulseShape::Trapezoidal { rise_time } => {
                // Edges overlap when rise_time > width / 2; the result is a
                // triangle that never reaches full amplitude.
                let up = dt / rise_time;
                let down = (self.width - dt) / rise_time;
                up.min(down).min(1.0)
            }
        }
    }

    /// Voltage of the probe `dt` seconds after it starts.
    pub fn shape_at(&self, dt: f64) -> f64 {
        self.amplitude * self.unit_shape(dt)
    }
}

/// One wave returning to the source port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionEvent {
    /// Delay after launch, seconds.
    pub arrival_time: f64,
    pub gain: f64,
    /// Number of reflections along the path. The incident launch has order 0.
    pub order: u32,
}

/// Truncation limits for [`bounce_diagram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceLimits {
    pub max_order: u32,
    pub min_gain: f64,
}

impl Default for BounceLimits {
    fn default() -> Self {
        BounceLimits {
            max_order: 8,
            min_gain: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    /// Toward the termination.
    Forward,
    /// Toward the source port.
    Backward,
}

#[derive(Debug, Clone, Copy)]
struct Wavefront {
    /// Time the front reaches the end of `segment` it is heading for.
    time: f64,
    segment: usize,
    heading: Heading,
    gain: f64,
    order: u32,
    seq: u64,
}

impl PartialEq for Wavefront {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Wavefront {}
impl PartialOrd for Wavefront {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Wavefront {
    // Min-heap on time, insertion order breaks ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Interface coefficients of a line, precomputed once.
struct Interfaces {
    /// Γ at the right end of segment k for a forward wave.
    fwd_reflect: Vec<f64>,
    /// Γ at the left end of segment k for a backward wave (k = 0 is the source).
    back_reflect: Vec<f64>,
    /// Largest gain a wave in segment k can pick up on its way back to the port.
    amplification: Vec<f64>,
}

impl Interfaces {
    fn new(line: &SegmentedLine) -> Result<Self> {
        let segs = &line.segments;
        let n = segs.len();
        let mut fwd_reflect = Vec::with_capacity(n);
        let mut back_reflect = Vec::with_capacity(n);
        for k in 0..n {
            let next = if k + 1 < n {
                Load::Ohms(segs[k + 1].impedance)
            } else {
                line.termination_load()
            };
            fwd_reflect.push(reflection_coefficient(segs[k].impedance, next)?);
            let prev = if k == 0 {
                line.source_impedance
            } else {
                segs[k - 1].impedance
            };
            back_reflect.push(reflection_coefficient(segs[k].impedance, Load::Ohms(prev))?);
        }
        // Each extra excursion through an interface contributes
        // (1 + Γ)(1 - Γ) <= 1, so only the net leftward crossings can amplify.
        let mut amplification = vec![1.0; n];
        for k in 1..n {
            amplification[k] = amplification[k - 1] * (1.0 + back_reflect[k]).abs().max(1.0);
        }
        Ok(Interfaces {
            fwd_reflect,
            back_reflect,
            amplification,
        })
    }
}

/// Enumerate every wave returning to the source port.
///
/// A path is kept when it has at most `limits.max_order` reflections and its
/// final gain satisfies `|gain| >= limits.min_gain`. Paths that pick up an
/// exactly zero coefficient carry no energy and are dropped. The incident
/// launch is reported as an order-0 event with gain 1 at time 0. Events are
/// sorted by arrival time; simultaneous arrivals keep one entry per path.
pub fn bounce_diagram(line: &SegmentedLine, limits: BounceLimits) -> Result<Vec<ReflectionEvent>> {
    line.validate()?;
    if limits.max_order < 1 {
        return Err(Error::Domain("max_order must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&limits.min_gain) {
        return Err(Error::Domain(format!(
            "min_gain {} outside [0, 1)",
            limits.min_gain
        )));
    }

    let segs = &line.segments;
    let n = segs.len();
    let ifaces = Interfaces::new(line)?;

    let mut events = vec![ReflectionEvent {
        arrival_time: 0.0,
        gain: 1.0,
        order: 0,
    }];

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Wavefront>, mut front: Wavefront| {
        if front.gain == 0.0 || front.order > limits.max_order {
            return;
        }
        let seg = &segs[front.segment];
        front.time += seg.delay();
        front.gain *= seg.attenuation;
        if front.gain.abs() * ifaces.amplification[front.segment] < limits.min_gain {
            return;
        }
        front.seq = seq;
        seq += 1;
        heap.push(front);
    };

    push(
        &mut heap,
        Wavefront {
            time: 0.0,
            segment: 0,
            heading: Heading::Forward,
            gain: 1.0,
            order: 0,
            seq: 0,
        },
    );

    while let Some(front) = heap.pop() {
        let k = front.segment;
        match front.heading {
            Heading::Forward => {
                let gamma = ifaces.fwd_reflect[k];
                push(
                    &mut heap,
                    Wavefront {
                        heading: Heading::Backward,
                        gain: front.gain * gamma,
                        order: front.order + 1,
                        ..front
                    },
                );
                if k + 1 < n {
                    push(
                        &mut heap,
                        Wavefront {
                            segment: k + 1,
                            gain: front.gain * (1.0 + gamma),
                            ..front
                        },
                    );
                }
            }
            Heading::Backward => {
                let gamma = ifaces.back_reflect[k];
                if k == 0 && front.gain.abs() >= limits.min_gain {
                    events.push(ReflectionEvent {
                        arrival_time: front.time,
                        gain: front.gain,
                        order: front.order,
                    });
                }
                push(
                    &mut heap,
                    Wavefront {
                        heading: Heading::Forward,
                        gain: front.gain * gamma,
                        order: front.order + 1,
                        ..front
                    },
                );
                if k > 0 {
                    push(
                        &mut heap,
                        Wavefront {
                            segment: k - 1,
                            gain: front.gain * (1.0 + gamma),
                            ..front
                        },
                    );
                }
            }
        }
    }

    // The heap already yields arrivals in time order; the sort only guards
    // the incident event and keeps ties stable.
    events.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time));
    Ok(events)
}

/// Clean reflection waveform `s(t)`: the probe pulse replicated at every event.
pub fn synthesize_waveform(events: &[ReflectionEvent], pulse: &ProbePulse, t: f64) -> f64 {
    let dt = t - pulse.launch_time;
    let mut v = 0.0;
    for e in events {
        let local = dt - e.arrival_time;
        if local < 0.0 {
            // Sorted: every later event starts even later.
            break;
        }
        v += e.gain * pulse.shape_at(local);
    }
    v
}
