//! Domain types: spin states, beam geometry, measurement setups, detunings.

use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::complex::ComplexAmp;
use crate::error::{Error, Result};

/// Normalized two-component internal state `(upper, lower)`.
///
/// Used both for the pre-selected state `(α, β)` and the post-selected state
/// `(γ, δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SpinState {
    a: ComplexAmp,
    b: ComplexAmp,
}

impl SpinState {
    /// Normalizes `(a, b)`. Fails on a zero or non-finite vector.
    pub fn new(a: ComplexAmp, b: ComplexAmp) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite);
        }
        let norm = libm::sqrt(a.norm_sqr() + b.norm_sqr());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        Ok(Self { a: a.scale(1.0 / norm), b: b.scale(1.0 / norm) })
    }

    pub fn from_real(a: f64, b: f64) -> Result<Self> {
        Self::new(ComplexAmp::real(a), ComplexAmp::real(b))
    }

    /// State with `|upper|² = p_upper` and lower amplitude carrying the
    /// relative phase.
    pub fn from_probability(p_upper: f64, relative_phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_upper) || !relative_phase.is_finite() {
            return Err(Error::InvalidArgument("upper probability must lie in [0, 1]"));
        }
        Self::new(
            ComplexAmp::real(libm::sqrt(p_upper)),
            ComplexAmp::from_polar(libm::sqrt(1.0 - p_upper), relative_phase),
        )
    }

    /// Spin up, `(1, 0)`.
    pub fn up() -> Self {
        Self { a: ComplexAmp::ONE, b: ComplexAmp::ZERO }
    }

    #[inline]
    pub fn upper(&self) -> ComplexAmp {
        self.a
    }

    #[inline]
    pub fn lower(&self) -> ComplexAmp {
        self.b
    }

    /// The state `(b*, −a*)`, orthogonal to this one.
    pub fn orthogonal(&self) -> Self {
        Self { a: self.b.conj(), b: -self.a.conj() }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> ComplexAmp {
        self.a.conj() * other.a + self.b.conj() * other.b
    }

    /// Multiplies both amplitudes by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let u = ComplexAmp::cis(theta);
        Self { a: self.a * u, b: self.b * u }
    }

    /// Swaps the two components.
    pub fn swapped(&self) -> Self {
        Self { a: self.b, b: self.a }
    }
}

/// Transverse beam width at the detector plane and the action unit.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BeamGeometry {
    w: f64,
    hbar: f64,
}

impl BeamGeometry {
    pub fn new(w: f64, hbar: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() || !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidBeam);
        }
        Ok(Self { w, hbar })
    }

    /// `w = 1`, `ħ = 1`.
    pub const fn unit() -> Self {
        Self { w: 1.0, hbar: 1.0 }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Width `w_p = ħ/(2w)` of the Gaussian momentum distribution.
    #[inline]
    pub fn momentum_width(&self) -> f64 {
        self.hbar / (2.0 * self.w)
    }
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self::unit()
    }
}

/// Pre-state, post-state, beam and the half-separation `d` of the weak step.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MeasurementSetup {
    pub pre: SpinState,
    pub post: SpinState,
    pub beam: BeamGeometry,
    d: f64,
}

impl MeasurementSetup {
    pub fn new(pre: SpinState, post: SpinState, beam: BeamGeometry, d: f64) -> Result<Self> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::InvalidDisplacement);
        }
        Ok(Self { pre, post, beam, d })
    }

    /// Setup on the unit beam with `d = η`.
    pub fn dimensionless(pre: SpinState, post: SpinState, eta: f64) -> Result<Self> {
        Self::new(pre, post, BeamGeometry::unit(), eta)
    }

    #[inline]
    pub fn displacement(&self) -> f64 {
        self.d
    }

    /// Weakness ratio `η = d/w`.
    #[inline]
    pub fn eta(&self) -> f64 {
        self.d / self.beam.width()
    }

    pub fn with_post(&self, post: SpinState) -> Self {
        Self { post, ..*self }
    }

    pub fn with_displacement(&self, d: f64) -> Result<Self> {
        Self::new(self.pre, self.post, self.beam, d)
    }
}

/// Deviation of the post-state from the one orthogonal to the pre-state.
///
/// `epsilon` shifts `|γ|²` up and `|δ|²` down; `delta` is the phase detuning,
/// stored reduced mod π into `(−π/2, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetuningParams {
    pub epsilon: f64,
    delta: f64,
}

impl DetuningParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !epsilon.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidArgument("detuning must be finite"));
        }
        Ok(Self { epsilon, delta: reduce_half_turn(delta) })
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Reduces an angle mod π into `(−π/2, π/2]`.
pub fn reduce_half_turn(x: f64) -> f64 {
    let r = x - PI * libm::ceil((x - PI / 2.0) / PI);
    // ceil can land one period off when x sits within rounding of a boundary
    if r <= -PI / 2.0 {
        r + PI
    } else {
        r
    }
}

/// The two post-selection outcome bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Channel {
    /// Projection onto `(γ, δ)`.
    Retained,
    /// Projection onto `(δ*, −γ*)`.
    Complement,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Retained, Channel::Complement];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Retained => "retained",
            Channel::Complement => "complement",
        }
    }
}

/// Which post-selected mean a measurement reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Observable {
    MeanZ,
    MeanPz,
}

impl Observable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::MeanZ => "MeanZ",
            Observable::MeanPz => "MeanPz",
        }
    }
}
