use nalgebra::DVector;

use crate::error::{Error, Result};

/// Closed-form signal on one channel of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelForm {
    Zero,
    Constant(f64),
    /// `offset + slope·t`
    Ramp {
        offset: f64,
        slope: f64,
    },
    /// `offset + amplitude·sin(omega·t + phase)`
    Sine {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `offset + amplitude·cos(omega·t + phase)`
    Cosine {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

impl ChannelForm {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ChannelForm::Zero => 0.0,
            ChannelForm::Constant(c) => c,
            ChannelForm::Ramp { offset, slope } => offset + slope * t,
            ChannelForm::Sine { offset, amplitude, omega, phase } => offset + amplitude * (omega * t + phase).sin(),
            ChannelForm::Cosine { offset, amplitude, omega, phase } => offset + amplitude * (omega * t + phase).cos(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            ChannelForm::Zero | ChannelForm::Constant(_) => 0.0,
            ChannelForm::Ramp { slope, .. } => slope,
            ChannelForm::Sine { amplitude, omega, phase, .. } => amplitude * omega * (omega * t + phase).cos(),
            ChannelForm::Cosine { amplitude, omega, phase, .. } => -amplitude * omega * (omega * t + phase).sin(),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            ChannelForm::Zero | ChannelForm::Constant(_) | ChannelForm::Ramp { .. } => 0.0,
            ChannelForm::Sine { amplitude, omega, phase, .. } => -amplitude * omega * omega * (omega * t + phase).sin(),
            ChannelForm::Cosine { amplitude, omega, phase, .. } => {
                -amplitude * omega * omega * (omega * t + phase).cos()
            }
        }
    }

    /// Upper bound of |f′| over any interval.
    pub fn derivative_bound(&self) -> f64 {
        match *self {
            ChannelForm::Zero | ChannelForm::Constant(_) => 0.0,
            ChannelForm::Ramp { slope, .. } => slope.abs(),
            ChannelForm::Sine { amplitude, omega, .. } | ChannelForm::Cosine { amplitude, omega, .. } => {
                (amplitude * omega).abs()
            }
        }
    }

    /// Upper bound of |f″| over any interval.
    pub fn second_derivative_bound(&self) -> f64 {
        match *self {
            ChannelForm::Zero | ChannelForm::Constant(_) | ChannelForm::Ramp { .. } => 0.0,
            ChannelForm::Sine { amplitude, omega, .. } | ChannelForm::Cosine { amplitude, omega, .. } => {
                (amplitude * omega * omega).abs()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ChannelForm::Zero)
    }
}

/// One piece of a disturbance, active on `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub channels: Vec<ChannelForm>,
}

impl Segment {
    pub fn new(start: f64, end: f64, channels: Vec<ChannelForm>) -> Self {
        Self { start, end, channels }
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.value(t)))
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.derivative(t)))
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(ChannelForm::is_zero)
    }

    /// `V`: bound on ‖f′‖₂ over the segment.
    pub fn derivative_bound(&self) -> f64 {
        self.channels.iter().map(|c| c.derivative_bound().powi(2)).sum::<f64>().sqrt()
    }

    /// `W`: bound on ‖f″‖₂ over the segment.
    pub fn second_derivative_bound(&self) -> f64 {
        self.channels.iter().map(|c| c.second_derivative_bound().powi(2)).sum::<f64>().sqrt()
    }
}

/// Piecewise closed-form disturbance `f(t) ∈ ℝᵐ` on `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSignal {
    m: usize,
    segments: Vec<Segment>,
}

impl DisturbanceSignal {
    /// Segments must start at 0, be contiguous and non-empty, and carry `m`
    /// channels each. The last segment may end at `f64::INFINITY`.
    pub fn new(m: usize, segments: Vec<Segment>) -> Result<Self> {
        let first =
            segments.first().ok_or_else(|| Error::InvalidArgument("disturbance needs at least one segment".into()))?;
        if first.start != 0.0 {
            return Err(Error::InvalidArgument(format!("first segment must start at 0, starts at {}", first.start)));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.channels.len() != m {
                return Err(Error::Dimension(format!("segment {i} has {} channels, expected {m}", seg.channels.len())));
            }
            if !(seg.end > seg.start) || seg.start.is_nan() {
                return Err(Error::InvalidArgument(format!("segment {i} is empty: [{}, {})", seg.start, seg.end)));
            }
            if let Some(next) = segments.get(i + 1) {
                if next.start != seg.end {
                    return Err(Error::InvalidArgument(format!(
                        "segments {i} and {} are not contiguous: {} ≠ {}",
                        i + 1,
                        seg.end,
                        next.start
                    )));
                }
            }
        }
        Ok(Self { m, segments })
    }

    /// `f ≡ 0` on `[0, ∞)`.
    pub fn zero(m: usize) -> Self {
        Self { m, segments: vec![Segment::new(0.0, f64::INFINITY, vec![ChannelForm::Zero; m])] }
    }

    pub fn constant(values: &[f64]) -> Self {
        let channels = values.iter().map(|&c| ChannelForm::Constant(c)).collect();
        Self { m: values.len(), segments: vec![Segment::new(0.0, f64::INFINITY, channels)] }
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.segments.last().map(|s| s.end).unwrap_or(0.0)
    }

    pub fn segment_index(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) || t >= self.horizon() {
            return None;
        }
        // segments are few; a linear scan is fine
        self.segments.iter().position(|s| t >= s.start && t < s.end)
    }

    pub fn evaluate(&self, t: f64) -> Result<DVector<f64>> {
        let i = self.segment_index(t).ok_or(Error::OutOfRange { t, horizon: self.horizon() })?;
        Ok(self.segments[i].value(t))
    }

    /// Segment boundaries strictly inside `(lo, hi)`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start).filter(|&b| b > lo && b < hi).collect()
    }

    /// True when `[lo, hi]` lies inside a single segment's closure.
    pub fn is_smooth_on(&self, lo: f64, hi: f64) -> bool {
        self.breakpoints_in(lo, hi).is_empty()
    }
}
