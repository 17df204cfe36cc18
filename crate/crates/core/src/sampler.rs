//! Seeded Born-rule detection events.
//!
//! Each event picks a channel with its post-selection probability and then a
//! coordinate from that channel's normalized density, by rejection:
//!
//! - position: proposals from the two-Gaussian mixture at `±η`, envelope
//!   `2|A|²Φ²(z−d) + 2|B|²Φ²(z+d)`, which dominates `|AΦ(z−d) + BΦ(z+d)|²`;
//! - momentum: proposals from the bare momentum Gaussian, envelope factor
//!   `(|A| + |B|)²`.
//!
//! Values are dimensionless (units of `w` or `w_p`). A `(seed, stream)` pair
//! selects an independent ChaCha8 stream, so batches are bit-reproducible
//! and parallel workers never share random numbers.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::complex::ComplexAmp;
use crate::error::{Error, Result};
use crate::model::{channel_amplitudes, postselection_probability};
use crate::state::{Channel, MeasurementSetup};

/// Proposals beyond this many widths (plus `η`) are rejected outright.
pub const EVENT_WINDOW_SIGMAS: f64 = 12.0;

/// Consecutive rejections after which sampling gives up.
pub const STALL_WINDOW: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Space {
    Position,
    Momentum,
}

impl Space {
    pub fn as_str(&self) -> &'static str {
        match self {
            Space::Position => "position",
            Space::Momentum => "momentum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Event {
    pub channel: Channel,
    pub value: f64,
    pub space: Space,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EventBatch {
    pub events: Vec<Event>,
    pub setup: MeasurementSetup,
    pub rng: RngSpec,
    pub n_requested: usize,
}

impl EventBatch {
    pub fn values(&self, ch: Channel) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter(move |e| e.channel == ch).map(|e| e.value)
    }
}

/// Rejection sampler for one channel's coordinate distribution.
#[derive(Clone, Copy, Debug)]
struct ChannelDraw {
    channel: Channel,
    space: Space,
    a: ComplexAmp,
    b: ComplexAmp,
    eta: f64,
    /// `|A|² + |B|²`
    mass: f64,
    /// `(|A| + |B|)²`
    momentum_bound: f64,
}

impl ChannelDraw {
    fn new(setup: &MeasurementSetup, channel: Channel, space: Space) -> Self {
        let (a, b) = channel_amplitudes(setup, channel);
        let sum = a.abs() + b.abs();
        Self { channel, space, a, b, eta: setup.eta(), mass: a.norm_sqr() + b.norm_sqr(), momentum_bound: sum * sum }
    }

    /// Returns `(proposal, target / envelope)`.
    fn propose<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let eta = self.eta;
        match self.space {
            Space::Position => {
                let centre = if rng.random::<f64>() * self.mass < self.a.norm_sqr() { eta } else { -eta };
                let x = centre + rng.sample::<f64, _>(StandardNormal);
                let s1 = libm::exp(-0.25 * (x - eta) * (x - eta));
                let s2 = libm::exp(-0.25 * (x + eta) * (x + eta));
                let target = (self.a.scale(s1) + self.b.scale(s2)).norm_sqr();
                let envelope = 2.0 * (self.a.norm_sqr() * s1 * s1 + self.b.norm_sqr() * s2 * s2);
                debug_assert!(target <= envelope * (1.0 + 1e-12) + f64::MIN_POSITIVE);
                let ratio = if envelope > 0.0 { target / envelope } else { 0.0 };
                (x, ratio)
            }
            Space::Momentum => {
                let u = rng.sample::<f64, _>(StandardNormal);
                let cross = self.a * self.b.conj();
                let (s, c) = libm::sincos(u * eta);
                let target = (self.mass + 2.0 * (cross.re * c + cross.im * s)).max(0.0);
                debug_assert!(target <= self.momentum_bound * (1.0 + 1e-12));
                (u, target / self.momentum_bound)
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        if self.mass == 0.0 {
            return Err(Error::RejectionStall(0));
        }
        let window = match self.space {
            Space::Position => EVENT_WINDOW_SIGMAS + self.eta,
            Space::Momentum => EVENT_WINDOW_SIGMAS,
        };
        for _ in 0..STALL_WINDOW {
            let (x, ratio) = self.propose(rng);
            let u = rng.random::<f64>();
            if u < ratio && x.abs() <= window {
                return Ok(x);
            }
        }
        Err(Error::RejectionStall(STALL_WINDOW))
    }

    fn event<R: Rng>(&self, rng: &mut R) -> Result<Event> {
        Ok(Event { channel: self.channel, value: self.draw(rng)?, space: self.space })
    }
}

fn require_events(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("at least one event must be requested"))
    } else {
        Ok(())
    }
}

/// Draws `n` detection events: channel by Born's rule, then the coordinate.
pub fn sample_events(setup: &MeasurementSetup, n: usize, rng: RngSpec, space: Space) -> Result<EventBatch> {
    require_events(n)?;
    let p_retained = postselection_probability(Channel::Retained, setup);
    let retained = ChannelDraw::new(setup, Channel::Retained, space);
    let complement = ChannelDraw::new(setup, Channel::Complement, space);
    let mut gen = rng.rng();
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let draw = if gen.random::<f64>() < p_retained { &retained } else { &complement };
        events.push(draw.event(&mut gen)?);
    }
    Ok(EventBatch { events, setup: *setup, rng, n_requested: n })
}

/// Draws `n` events conditioned on landing in `channel`, i.e. the
/// post-selected data set only.
pub fn sample_postselected(
    setup: &MeasurementSetup,
    channel: Channel,
    n: usize,
    rng: RngSpec,
    space: Space,
) -> Result<EventBatch> {
    require_events(n)?;
    let draw = ChannelDraw::new(setup, channel, space);
    let mut gen = rng.rng();
    let events = (0..n).map(|_| draw.event(&mut gen)).collect::<Result<Vec<_>>>()?;
    Ok(EventBatch { events, setup: *setup, rng, n_requested: n })
}

/// Sample statistics of one channel.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ChannelSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero for a single event.
    pub variance: f64,
    /// `√(variance / count)`
    pub stderr: f64,
}

impl ChannelSummary {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Option<Self> {
        // Welford
        let (mut count, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in values {
            count += 1;
            let delta = x - mean;
            mean += delta / count as f64;
            m2 += delta * (x - mean);
        }
        if count == 0 {
            return None;
        }
        let variance = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
        Some(Self { count, mean, variance, stderr: libm::sqrt(variance / count as f64) })
    }
}

/// Per-channel summaries; a channel without events is `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EmpiricalSummary {
    pub retained: Option<ChannelSummary>,
    pub complement: Option<ChannelSummary>,
}

impl EmpiricalSummary {
    pub fn channel(&self, ch: Channel) -> Option<&ChannelSummary> {
        match ch {
            Channel::Retained => self.retained.as_ref(),
            Channel::Complement => self.complement.as_ref(),
        }
    }
}

pub fn empirical_summary(batch: &EventBatch) -> EmpiricalSummary {
    EmpiricalSummary {
        retained: ChannelSummary::from_values(batch.values(Channel::Retained)),
        complement: ChannelSummary::from_values(batch.values(Channel::Complement)),
    }
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `values` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::SpinState;

    #[test]
    fn summary_of_constant_values() {
        let s = ChannelSummary::from_values([2.5; 7]).unwrap();
        assert_eq!(s.count, 7);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.stderr, 0.0);
    }

    #[test]
    fn summary_of_two_values() {
        let s = ChannelSummary::from_values([0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.variance, 2.0);
        assert_eq!(s.stderr, 1.0);
        assert!(ChannelSummary::from_values(core::iter::empty()).is_none());
    }

    #[test]
    fn absent_channel_is_none() {
        let up = SpinState::up();
        let setup = MeasurementSetup::dimensionless(up, up, 0.3).unwrap();
        let batch = sample_events(&setup, 100, RngSpec::new(1, 0), Space::Position).unwrap();
        let summary = empirical_summary(&batch);
        assert_eq!(summary.retained.unwrap().count, 100);
        assert!(summary.complement.is_none());
    }

    #[test]
    fn streams_differ_and_repeat() {
        let setup = MeasurementSetup::dimensionless(
            SpinState::from_real(1.0, 1.0).unwrap(),
            SpinState::from_probability(0.3, 1.0).unwrap(),
            0.2,
        )
        .unwrap();
        let a = sample_events(&setup, 50, RngSpec::new(9, 0), Space::Momentum).unwrap();
        let b = sample_events(&setup, 50, RngSpec::new(9, 0), Space::Momentum).unwrap();
        let c = sample_events(&setup, 50, RngSpec::new(9, 1), Space::Momentum).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.events, c.events);
        assert_eq!(a.events.len(), a.n_requested);
    }

    #[test]
    fn ks_against_uniform() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert_eq!(ks_distance(&[0.5], uniform), 0.5);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_distance(&grid, uniform) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn zero_requested_is_an_error() {
        let up = SpinState::up();
        let setup = MeasurementSetup::dimensionless(up, up, 0.0).unwrap();
        assert!(sample_events(&setup, 0, RngSpec::default(), Space::Position).is_err());
    }

    #[test]
    fn empty_channel_stalls() {
        let up = SpinState::up();
        let down = up.orthogonal();
        let setup = MeasurementSetup::dimensionless(up, down, 0.1).unwrap();
        let r = sample_postselected(&setup, Channel::Retained, 1, RngSpec::default(), Space::Position);
        assert!(matches!(r, Err(Error::RejectionStall(_))));
    }
}
