//! Post-states near orthogonality to the pre-state.
//!
//! The reference post-state is `γ = iβ*`, `δ = −iα*`. A detuned post-state has
//! `|γ|² = |β|² + ε`, `|δ|² = |α|² − ε` and phase detuning
//! `Δ = (π − φ_α + φ_β + φ_γ − φ_δ)/2`. Only the combination `φ_γ − φ_δ` is
//! observable; construction keeps `φ_δ = −π/2 − φ_α` and puts all of `2Δ`
//! into `φ_γ`.
//!
//! The small-detuning response formulas below are evaluated exactly as
//! written and are not corrected against the exact means in [`crate::model`].

use core::f64::consts::{FRAC_PI_2, PI};

use crate::complex::ComplexAmp;
use crate::error::{Error, Result};
use crate::state::{reduce_half_turn, DetuningParams, SpinState};
use crate::TAU_ORTH;

fn require_amplitudes(pre: &SpinState) -> Result<(f64, f64)> {
    let pa = pre.upper().norm_sqr();
    let pb = pre.lower().norm_sqr();
    if libm::sqrt(pa) <= TAU_ORTH || libm::sqrt(pb) <= TAU_ORTH {
        return Err(Error::AmplitudeVanishes);
    }
    Ok((pa, pb))
}

/// Builds the post-state with the requested amplitude and phase detuning.
pub fn construct_detuned_postselection(pre: &SpinState, det: &DetuningParams) -> Result<SpinState> {
    let (pa, pb) = require_amplitudes(pre)?;
    let eps = det.epsilon;
    if eps < -pb - TAU_ORTH || eps > pa + TAU_ORTH {
        return Err(Error::DetuningOutOfRange { epsilon: eps, min: -pb, max: pa });
    }
    let phi_a = pre.upper().arg();
    let phi_b = pre.lower().arg();
    let gamma = ComplexAmp::from_polar(libm::sqrt((pb + eps).max(0.0)), FRAC_PI_2 - phi_b + 2.0 * det.delta());
    let delta = ComplexAmp::from_polar(libm::sqrt((pa - eps).max(0.0)), -FRAC_PI_2 - phi_a);
    SpinState::new(gamma, delta)
}

/// Reads `(ε, Δ)` back off a pre/post pair.
pub fn extract_detuning(pre: &SpinState, post: &SpinState) -> Result<DetuningParams> {
    let amps = [pre.upper(), pre.lower(), post.upper(), post.lower()];
    if amps.iter().any(|a| a.abs() <= TAU_ORTH) {
        return Err(Error::AmplitudeVanishes);
    }
    let [a, b, g, d] = amps.map(ComplexAmp::arg);
    let eps = post.upper().norm_sqr() - pre.lower().norm_sqr();
    DetuningParams::new(eps, reduce_half_turn((PI - a + b + g - d) / 2.0))
}

/// `(|α|⁻⁴ + |β|⁻⁴)/8`, the coefficient of `ε²` in the response width.
fn epsilon_coefficient(pa: f64, pb: f64) -> f64 {
    (1.0 / (pa * pa) + 1.0 / (pb * pb)) / 8.0
}

fn response_denominator(pa: f64, pb: f64, det: &DetuningParams, eta: f64) -> f64 {
    let d = det.delta();
    4.0 * d * d + epsilon_coefficient(pa, pb) * det.epsilon * det.epsilon + eta * eta
}

/// Small-detuning mean position, in units of `w`:
///
/// ```text
/// 2ε / (2|α|²|β|² + ε(|α|² − |β|²)) · η / (4Δ² + (|α|⁻⁴ + |β|⁻⁴) ε²/8 + η²)
/// ```
pub fn mean_z_paper_expansion(pre: &SpinState, det: &DetuningParams, eta: f64) -> Result<f64> {
    let (pa, pb) = require_amplitudes(pre)?;
    if eta == 0.0 || det.epsilon == 0.0 {
        return Ok(0.0);
    }
    let eps = det.epsilon;
    let prefactor = 2.0 * eps / (2.0 * pa * pb + eps * (pa - pb));
    Ok(prefactor * eta / response_denominator(pa, pb, det, eta))
}

/// Small-detuning mean momentum, in units of `w_p`:
///
/// ```text
/// 2Δη / (4Δ² + (|α|⁻⁴ + |β|⁻⁴) ε²/8 + η²)
/// ```
pub fn mean_pz_paper_expansion(pre: &SpinState, det: &DetuningParams, eta: f64) -> Result<f64> {
    let (pa, pb) = require_amplitudes(pre)?;
    if eta == 0.0 || det.delta() == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * det.delta() * eta / response_denominator(pa, pb, det, eta))
}

/// Turning point `η₀ = [4Δ² + (|α|⁻⁴ + |β|⁻⁴) ε²/8]^{1/2}` beyond which
/// amplification stops being linear in `η`.
pub fn eta_zero(pre: &SpinState, det: &DetuningParams) -> Result<f64> {
    let (pa, pb) = require_amplitudes(pre)?;
    Ok(libm::sqrt(response_denominator(pa, pb, det, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> SpinState {
        SpinState::from_real(1.0, 1.0).unwrap()
    }

    fn det(eps: f64, delta: f64) -> DetuningParams {
        DetuningParams::new(eps, delta).unwrap()
    }

    fn close(a: ComplexAmp, b: ComplexAmp) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn orthogonal_reference() {
        let post = construct_detuned_postselection(&plus(), &det(0.0, 0.0)).unwrap();
        assert!(close(post.upper(), ComplexAmp::new(0.0, FRAC_1_SQRT_2)));
        assert!(close(post.lower(), ComplexAmp::new(0.0, -FRAC_1_SQRT_2)));
        assert!(plus().inner(&post).abs() < 1e-15);
        let back = extract_detuning(&plus(), &post).unwrap();
        assert!(back.epsilon.abs() < 1e-15 && back.delta().abs() < 1e-15);
    }

    #[test]
    fn amplitude_detuning() {
        let post = construct_detuned_postselection(&plus(), &det(0.1, 0.0)).unwrap();
        assert!(close(post.upper(), ComplexAmp::new(0.0, libm::sqrt(0.6))));
        assert!(close(post.lower(), ComplexAmp::new(0.0, -libm::sqrt(0.4))));
    }

    #[test]
    fn out_of_range_epsilon() {
        assert!(matches!(
            construct_detuned_postselection(&plus(), &det(1.0, 0.0)),
            Err(Error::DetuningOutOfRange { .. })
        ));
        assert!(construct_detuned_postselection(&plus(), &det(0.5, 0.0)).is_ok());
        assert!(construct_detuned_postselection(&plus(), &det(-0.5, 0.0)).is_ok());
    }

    #[test]
    fn degenerate_pre_state() {
        let post = SpinState::from_real(1.0, 1.0).unwrap();
        assert_eq!(extract_detuning(&SpinState::up(), &post), Err(Error::AmplitudeVanishes));
        assert_eq!(construct_detuned_postselection(&SpinState::up(), &det(0.0, 0.1)), Err(Error::AmplitudeVanishes));
        assert_eq!(eta_zero(&SpinState::up(), &det(0.0, 0.1)), Err(Error::AmplitudeVanishes));
    }

    #[test]
    fn round_trip_with_phases() {
        let pre = SpinState::from_probability(0.35, 2.4).unwrap().with_global_phase(-1.3);
        for &(e, d) in &[(0.0, 0.0), (0.1, -0.2), (-0.2, 0.3), (0.05, 1.2)] {
            let post = construct_detuned_postselection(&pre, &det(e, d)).unwrap();
            let back = extract_detuning(&pre, &post).unwrap();
            assert!((back.epsilon - e).abs() < 1e-12);
            assert!((back.delta() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(mean_z_paper_expansion(&plus(), &det(0.0, 0.3), 0.1).unwrap(), 0.0);
        assert_eq!(mean_pz_paper_expansion(&plus(), &det(0.2, 0.0), 0.1).unwrap(), 0.0);
        let p = mean_pz_paper_expansion(&plus(), &det(0.0, 0.05), 0.05).unwrap();
        assert!((p - 0.4).abs() < 1e-15);
        // hand evaluation: 2·0.1/(0.5) · 0.1/(0.01 + 0.01 + 0.01)
        let z = mean_z_paper_expansion(&plus(), &det(0.1, 0.05), 0.1).unwrap();
        assert!((z - 0.4 * 0.1 / 0.03).abs() < 1e-14);
    }

    #[test]
    fn eta_zero_examples() {
        assert!((eta_zero(&plus(), &det(0.0, 0.05)).unwrap() - 0.1).abs() < 1e-15);
        assert!((eta_zero(&plus(), &det(0.1, 0.0)).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(eta_zero(&plus(), &det(0.0, 0.0)).unwrap(), 0.0);
    }
}
