//! Brute-force quadrature checks of the closed forms.
//!
//! Nothing here calls into [`crate::model`]'s expanded formulas: densities
//! are built as squared amplitudes, in position space directly from the
//! channel projections and in momentum space from the analytic Fourier
//! transform `ψ̃(p) = Φ̃(p)·[A e^{−ipd/ħ} + B e^{ipd/ħ}]`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::complex::ComplexAmp;
use crate::detuning;
use crate::error::{Error, Result};
use crate::model;
use crate::quadrature::{integrate, QuadratureSpec};
use crate::state::{Channel, DetuningParams, MeasurementSetup, Observable, SpinState};
use crate::TAU_PROB;

/// Coefficients of `Φ(z−d)` and `Φ(z+d)` after projecting onto the channel's
/// spin state: `(αγ*, βδ*)` or `(αδ, −βγ)`.
fn projected_amplitudes(setup: &MeasurementSetup, ch: Channel) -> (ComplexAmp, ComplexAmp) {
    let (alpha, beta) = (setup.pre.upper(), setup.pre.lower());
    let (gamma, delta) = (setup.post.upper(), setup.post.lower());
    match ch {
        Channel::Retained => (alpha * gamma.conj(), beta * delta.conj()),
        Channel::Complement => (alpha * delta, -(beta * gamma)),
    }
}

fn phi(z: f64, w: f64) -> f64 {
    libm::exp(-z * z / (4.0 * w * w)) / libm::sqrt(w * libm::sqrt(2.0 * PI))
}

/// Squared channel amplitude `|A Φ(z−d) + B Φ(z+d)|²` at physical `z`.
pub fn projected_density(z: f64, ch: Channel, setup: &MeasurementSetup) -> f64 {
    let (a, b) = projected_amplitudes(setup, ch);
    let w = setup.beam.width();
    let d = setup.displacement();
    (a * phi(z - d, w) + b * phi(z + d, w)).norm_sqr()
}

/// Channel wavefunction in momentum space, with momentum in units of `w_p`.
#[derive(Clone, Copy, Debug)]
pub struct MomentumWavefunction {
    pub setup: MeasurementSetup,
    pub channel: Channel,
}

impl MomentumWavefunction {
    pub fn new(setup: MeasurementSetup, channel: Channel) -> Self {
        Self { setup, channel }
    }

    /// `ψ̃(u)` normalized so that `∫|ψ̃|² du` is the channel probability.
    pub fn amplitude(&self, u: f64) -> ComplexAmp {
        let (a, b) = projected_amplitudes(&self.setup, self.channel);
        // p d / ħ = u η / 2 when p = u w_p
        let half_phase = 0.5 * u * self.setup.eta();
        let envelope = libm::exp(-0.25 * u * u) / libm::sqrt(libm::sqrt(2.0 * PI));
        (a * ComplexAmp::cis(-half_phase) + b * ComplexAmp::cis(half_phase)).scale(envelope)
    }

    pub fn density(&self, u: f64) -> f64 {
        self.amplitude(u).norm_sqr()
    }
}

fn position_window(setup: &MeasurementSetup, spec: &QuadratureSpec) -> (f64, f64) {
    let half = spec.half_width_sigmas * setup.beam.width() + setup.displacement();
    (-half, half)
}

/// `∫ q dz` over the position window.
pub fn oracle_postselection_probability(setup: &MeasurementSetup, ch: Channel, spec: &QuadratureSpec) -> Result<f64> {
    let (lo, hi) = position_window(setup, spec);
    integrate(|z| projected_density(z, ch, setup), lo, hi, spec)
}

/// `∫|ψ̃|² du` over the momentum window; equals the position-space
/// probability by Parseval.
pub fn oracle_momentum_norm(setup: &MeasurementSetup, ch: Channel, spec: &QuadratureSpec) -> Result<f64> {
    let psi = MomentumWavefunction::new(*setup, ch);
    let h = spec.half_width_sigmas;
    integrate(|u| psi.density(u), -h, h, spec)
}

/// `∫ z q dz / ∫ q dz`, in units of `w`.
pub fn oracle_mean_z(setup: &MeasurementSetup, ch: Channel, spec: &QuadratureSpec) -> Result<f64> {
    let norm = oracle_postselection_probability(setup, ch, spec)?;
    if norm <= TAU_PROB {
        return Err(Error::ZeroPostselection);
    }
    let (lo, hi) = position_window(setup, spec);
    let first = integrate(|z| z * projected_density(z, ch, setup), lo, hi, spec)?;
    Ok(first / norm / setup.beam.width())
}

/// `∫ u |ψ̃|² du / ∫ |ψ̃|² du`, in units of `w_p`.
pub fn oracle_mean_pz(setup: &MeasurementSetup, ch: Channel, spec: &QuadratureSpec) -> Result<f64> {
    let norm = oracle_momentum_norm(setup, ch, spec)?;
    if norm <= TAU_PROB {
        return Err(Error::ZeroPostselection);
    }
    let psi = MomentumWavefunction::new(*setup, ch);
    let h = spec.half_width_sigmas;
    let first = integrate(|u| u * psi.density(u), -h, h, spec)?;
    Ok(first / norm)
}

/// Cumulative distribution of one channel's normalized density, tabulated
/// by quadrature on a uniform grid and interpolated linearly.
#[derive(Clone, Debug)]
pub struct CdfTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl CdfTable {
    fn tabulate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cells: usize, spec: &QuadratureSpec) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidArgument("a CDF table needs at least one cell"));
        }
        let step = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..cells {
            let a = lo + step * i as f64;
            acc += integrate(&f, a, a + step, spec)?;
            values.push(acc);
        }
        if acc <= TAU_PROB {
            return Err(Error::ZeroPostselection);
        }
        for v in &mut values {
            *v /= acc;
        }
        Ok(Self { lo, step, values })
    }

    /// Position CDF, in units of `w`, over `±(half_width_sigmas + η)`.
    pub fn position(setup: &MeasurementSetup, ch: Channel, cells: usize, spec: &QuadratureSpec) -> Result<Self> {
        let w = setup.beam.width();
        let half = spec.half_width_sigmas + setup.eta();
        Self::tabulate(|x| projected_density(x * w, ch, setup), -half, half, cells, spec)
    }

    /// Momentum CDF, in units of `w_p`, over `±half_width_sigmas`.
    pub fn momentum(setup: &MeasurementSetup, ch: Channel, cells: usize, spec: &QuadratureSpec) -> Result<Self> {
        let psi = MomentumWavefunction::new(*setup, ch);
        let half = spec.half_width_sigmas;
        Self::tabulate(|u| psi.density(u), -half, half, cells, spec)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if !(t > 0.0) {
            return 0.0;
        }
        let i = t as usize;
        if i + 1 >= self.values.len() {
            return 1.0;
        }
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// One `(ε, Δ, η)` point of a comparison grid.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VerifyPoint {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum RowFlag {
    Ok,
    ZeroPostselection,
}

/// Exact, small-detuning and quadrature values of one observable at one
/// grid point (retained channel).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VerifyRow {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub observable: Observable,
    pub exact: Option<f64>,
    pub paper_expansion: f64,
    pub oracle: Option<f64>,
    pub weak_limit: Option<f64>,
    pub ratio_expansion_to_exact: Option<f64>,
    pub flag: RowFlag,
}

impl VerifyRow {
    /// `|exact − oracle| / |exact|`, or the absolute difference when the
    /// exact value is below `1e−6`.
    pub fn oracle_discrepancy(&self) -> Option<f64> {
        let (e, o) = (self.exact?, self.oracle?);
        Some(if e.abs() < 1e-6 { (e - o).abs() } else { (e - o).abs() / e.abs() })
    }
}

/// Builds the comparison table for detuned post-states of `pre`.
pub fn verify_report(pre: &SpinState, grid: &[VerifyPoint], spec: &QuadratureSpec) -> Result<Vec<VerifyRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("verification grid is empty"));
    }
    let mut rows = Vec::with_capacity(2 * grid.len());
    for point in grid {
        let det = DetuningParams::new(point.epsilon, point.delta)?;
        let post = detuning::construct_detuned_postselection(pre, &det)?;
        let setup = MeasurementSetup::dimensionless(*pre, post, point.eta)?;
        for observable in [Observable::MeanZ, Observable::MeanPz] {
            let (exact, expansion, oracle, weak_limit) = match observable {
                Observable::MeanZ => (
                    model::mean_z_exact(&setup, Channel::Retained),
                    detuning::mean_z_paper_expansion(pre, &det, point.eta)?,
                    oracle_mean_z(&setup, Channel::Retained, spec),
                    model::mean_z_weak_limit(&setup),
                ),
                Observable::MeanPz => (
                    model::mean_pz_exact(&setup, Channel::Retained),
                    detuning::mean_pz_paper_expansion(pre, &det, point.eta)?,
                    oracle_mean_pz(&setup, Channel::Retained, spec),
                    model::mean_pz_weak_limit(&setup),
                ),
            };
            let flag = match exact {
                Err(Error::ZeroPostselection) => RowFlag::ZeroPostselection,
                Err(e) => return Err(e),
                Ok(_) => RowFlag::Ok,
            };
            let oracle = match oracle {
                Ok(v) => Some(v),
                Err(Error::ZeroPostselection) => None,
                Err(e) => return Err(e),
            };
            let exact = exact.ok();
            rows.push(VerifyRow {
                epsilon: det.epsilon,
                delta: det.delta(),
                eta: point.eta,
                observable,
                exact,
                paper_expansion: expansion,
                oracle,
                weak_limit: weak_limit.ok(),
                ratio_expansion_to_exact: exact.filter(|e| *e != 0.0).map(|e| expansion / e),
                flag,
            });
        }
    }
    Ok(rows)
}
