//! Closed-form measurement statistics.
//!
//! The retained channel projects onto `(γ, δ)`. Its density is
//!
//! ```text
//! q(z) = |αγ* Φ(z−d) + βδ* Φ(z+d)|²
//!      = |α|²|γ|² Φ²(z−d) + |β|²|δ|² Φ²(z+d) + 2 Re(αβ*γ*δ) e^{−d²/2w²} Φ²(z)
//! ```
//!
//! The complement channel is obtained everywhere by substituting
//! `(γ, δ) → (δ*, −γ*)`.
//!
//! Means are returned in units of `w` (position) and `w_p` (momentum).

use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::complex::ComplexAmp;
use crate::error::{Error, Result};
use crate::state::{BeamGeometry, Channel, MeasurementSetup, SpinState};
use crate::{TAU_ORTH, TAU_PROB};

/// Normalized transverse amplitude `Φ(z) = exp(−z²/4w²) / √(w√(2π))`.
pub fn gaussian_envelope(z: f64, beam: &BeamGeometry) -> f64 {
    let w = beam.width();
    libm::exp(-z * z / (4.0 * w * w)) / libm::sqrt(w * libm::sqrt(2.0 * PI))
}

/// `Φ²(z)`, the normal density with standard deviation `w`.
fn envelope_sqr(z: f64, beam: &BeamGeometry) -> f64 {
    let w = beam.width();
    libm::exp(-z * z / (2.0 * w * w)) / (w * libm::sqrt(2.0 * PI))
}

/// Post-state seen by a channel: `(γ, δ)` or `(δ*, −γ*)`.
pub fn channel_post(post: &SpinState, ch: Channel) -> SpinState {
    match ch {
        Channel::Retained => *post,
        Channel::Complement => post.orthogonal(),
    }
}

/// Coefficients `(A, B)` of the channel amplitude `A Φ(z−d) + B Φ(z+d)`.
pub fn channel_amplitudes(setup: &MeasurementSetup, ch: Channel) -> (ComplexAmp, ComplexAmp) {
    let post = channel_post(&setup.post, ch);
    (setup.pre.upper() * post.upper().conj(), setup.pre.lower() * post.lower().conj())
}

/// The four scalars every closed form is built from.
#[derive(Clone, Copy, Debug)]
struct Terms {
    /// `|α|²|γ|²`
    upper: f64,
    /// `|β|²|δ|²`
    lower: f64,
    /// `αβ*γ*δ`
    cross: ComplexAmp,
    /// `|αγ* + βδ*|²`, the probability at `d = 0`
    overlap: f64,
}

impl Terms {
    fn of(setup: &MeasurementSetup, ch: Channel) -> Self {
        let (a, b) = channel_amplitudes(setup, ch);
        Self { upper: a.norm_sqr(), lower: b.norm_sqr(), cross: a * b.conj(), overlap: (a + b).norm_sqr() }
    }

    /// `|α|²|γ|² + |β|²|δ|² + 2 Re(αβ*γ*δ) e^{−η²/2}`, written around the
    /// `η = 0` overlap so that near-orthogonal setups keep their digits.
    fn probability(&self, eta: f64) -> f64 {
        let p = self.overlap + 2.0 * self.cross.re * libm::expm1(-0.5 * eta * eta);
        p.clamp(0.0, 1.0)
    }

    fn checked_probability(&self, eta: f64) -> Result<f64> {
        let p = self.probability(eta);
        if p <= TAU_PROB {
            Err(Error::ZeroPostselection)
        } else {
            Ok(p)
        }
    }

    /// Denominator of the first-order-in-η² expansions.
    fn expanded_denominator(&self, eta: f64) -> Result<f64> {
        let den = self.overlap - self.cross.re * eta * eta;
        if den <= TAU_PROB {
            Err(Error::ZeroPostselection)
        } else {
            Ok(den)
        }
    }
}

/// Weak value of `σ_z`: `(αγ* − βδ*) / (αγ* + βδ*)`.
///
/// Multiply by `d` for the length-valued weak value of `σ_z d`.
pub fn weak_value(pre: &SpinState, post: &SpinState) -> Result<ComplexAmp> {
    let a = pre.upper() * post.upper().conj();
    let b = pre.lower() * post.lower().conj();
    let overlap = a + b;
    if overlap.abs() <= TAU_ORTH {
        return Err(Error::OrthogonalPostselection);
    }
    Ok((a - b) / overlap)
}

/// Density without post-selection: `|α|² Φ²(z−d) + |β|² Φ²(z+d)`.
pub fn preselected_pdf(z: f64, setup: &MeasurementSetup) -> f64 {
    let d = setup.displacement();
    setup.pre.upper().norm_sqr() * envelope_sqr(z - d, &setup.beam)
        + setup.pre.lower().norm_sqr() * envelope_sqr(z + d, &setup.beam)
}

/// `(|α|² − |β|²) η`, in units of `w`.
pub fn preselected_mean(setup: &MeasurementSetup) -> f64 {
    (setup.pre.upper().norm_sqr() - setup.pre.lower().norm_sqr()) * setup.eta()
}

/// Unnormalized density of particles detected in `ch` at `z`, per incoming
/// particle. The two channels add up to [`preselected_pdf`].
pub fn channel_density(z: f64, ch: Channel, setup: &MeasurementSetup) -> f64 {
    let t = Terms::of(setup, ch);
    let d = setup.displacement();
    let eta = setup.eta();
    t.upper * envelope_sqr(z - d, &setup.beam)
        + t.lower * envelope_sqr(z + d, &setup.beam)
        + 2.0 * t.cross.re * libm::exp(-0.5 * eta * eta) * envelope_sqr(z, &setup.beam)
}

/// Fraction of all particles that end up in `ch`.
pub fn postselection_probability(ch: Channel, setup: &MeasurementSetup) -> f64 {
    Terms::of(setup, ch).probability(setup.eta())
}

/// Normalized density of the particles detected in `ch`.
pub fn postselected_pdf(z: f64, ch: Channel, setup: &MeasurementSetup) -> Result<f64> {
    let p = Terms::of(setup, ch).checked_probability(setup.eta())?;
    Ok(channel_density(z, ch, setup) / p)
}

/// Exact post-selected mean position, in units of `w`.
pub fn mean_z_exact(setup: &MeasurementSetup, ch: Channel) -> Result<f64> {
    let t = Terms::of(setup, ch);
    let eta = setup.eta();
    let p = t.checked_probability(eta)?;
    Ok((t.upper - t.lower) * eta / p)
}

/// Exact post-selected mean momentum, in units of `w_p`.
pub fn mean_pz_exact(setup: &MeasurementSetup, ch: Channel) -> Result<f64> {
    let t = Terms::of(setup, ch);
    let eta = setup.eta();
    let p = t.checked_probability(eta)?;
    Ok(2.0 * eta * t.cross.im * libm::exp(-0.5 * eta * eta) / p)
}

/// Mean position with the exponential expanded to first order in `η²`:
/// `(|α|²|γ|² − |β|²|δ|²) η / (|αγ* + βδ*|² − Re(αβ*γ*δ) η²)`.
pub fn mean_z_small_eta(setup: &MeasurementSetup, ch: Channel) -> Result<f64> {
    let t = Terms::of(setup, ch);
    let eta = setup.eta();
    t.checked_probability(eta)?;
    Ok((t.upper - t.lower) * eta / t.expanded_denominator(eta)?)
}

/// Mean momentum with the exponential expanded to first order in `η²`:
/// `2 Im(αβ*γ*δ) η / (|αγ* + βδ*|² − Re(αβ*γ*δ) η²)`.
pub fn mean_pz_small_eta(setup: &MeasurementSetup, ch: Channel) -> Result<f64> {
    let t = Terms::of(setup, ch);
    let eta = setup.eta();
    t.checked_probability(eta)?;
    Ok(2.0 * t.cross.im * eta / t.expanded_denominator(eta)?)
}

/// Weak-value limit of the mean position, `Re(A_w) η`, in units of `w`.
pub fn mean_z_weak_limit(setup: &MeasurementSetup) -> Result<f64> {
    Ok(weak_value(&setup.pre, &setup.post)?.re * setup.eta())
}

/// Weak-value limit of the mean momentum, `Im(A_w) η`, in units of `w_p`.
pub fn mean_pz_weak_limit(setup: &MeasurementSetup) -> Result<f64> {
    Ok(weak_value(&setup.pre, &setup.post)?.im * setup.eta())
}

/// How far a setup sits inside the weak-value regime.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum ValidityMargin {
    /// `[|αγ* + βδ*|² / |Re(αβ*γ*δ)|] / η²`; values `≫ 1` mean the weak-value
    /// limit applies.
    Finite(f64),
    /// `Re(αβ*γ*δ) = 0` or `η = 0`.
    Unbounded,
}

impl ValidityMargin {
    pub fn value(&self) -> f64 {
        match *self {
            ValidityMargin::Finite(m) => m,
            ValidityMargin::Unbounded => f64::INFINITY,
        }
    }
}

/// Ratio of the two sides of the weakness condition for the retained channel.
pub fn aav_validity_margin(setup: &MeasurementSetup) -> ValidityMargin {
    let t = Terms::of(setup, Channel::Retained);
    let eta = setup.eta();
    if t.cross.re == 0.0 || eta == 0.0 {
        return ValidityMargin::Unbounded;
    }
    ValidityMargin::Finite(t.overlap / t.cross.re.abs() / (eta * eta))
}
