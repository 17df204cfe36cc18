//! Recovering the weakness ratio `η = d/w` from measured response curves.
//!
//! An experiment fixes the amplitude detuning `ε`, sweeps the phase detuning
//! `Δ` and records a post-selected mean at each setting. Two estimators are
//! provided: pointwise inversion of the weak-value limit, which is biased
//! once `η` is comparable to the detuning scale, and a weighted least-squares
//! fit of the whole response shape.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::detuning::{construct_detuned_postselection, mean_pz_paper_expansion, mean_z_paper_expansion};
use crate::error::{Error, Result};
use crate::model::{mean_pz_exact, mean_z_exact, weak_value};
use crate::sampler::{empirical_summary, sample_events, sample_postselected, RngSpec, Space};
use crate::state::{Channel, DetuningParams, MeasurementSetup, Observable, SpinState};
use crate::TAU_ORTH;

/// One measured point of a `Δ` sweep. `measured` and `stderr` are in units
/// of `w` (MeanZ) or `w_p` (MeanPz).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SweepPoint {
    pub delta: f64,
    pub observable: Observable,
    pub measured: f64,
    pub stderr: f64,
    pub n_events: u64,
}

impl SweepPoint {
    pub fn new(delta: f64, observable: Observable, measured: f64, stderr: f64, n_events: u64) -> Result<Self> {
        if !delta.is_finite() || !measured.is_finite() {
            return Err(Error::InvalidArgument("sweep point values must be finite"));
        }
        if !(stderr > 0.0) || !stderr.is_finite() {
            return Err(Error::InvalidArgument("sweep point stderr must be positive"));
        }
        if n_events == 0 {
            return Err(Error::InvalidArgument("sweep point needs at least one event"));
        }
        Ok(Self { delta, observable, measured, stderr, n_events })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum FitModel {
    /// Small-detuning response formulas.
    PaperExpansion,
    /// Exact post-selected means with post-states rebuilt per point.
    ExactClosedForm,
    /// Generic `A·Δ/(s² + Δ²)`; MeanPz points only.
    DerivativeLorentzian,
}

impl FitModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitModel::PaperExpansion => "PaperExpansion",
            FitModel::ExactClosedForm => "ExactClosedForm",
            FitModel::DerivativeLorentzian => "DerivativeLorentzian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FitOptions {
    /// Fit an overall amplitude next to `η` (physical models only; the
    /// Lorentzian always has one).
    pub free_amplitude: bool,
    pub grid_points: usize,
    pub scan_min: f64,
    pub scan_max: f64,
    pub max_iterations: usize,
    /// Relative parameter step below which the refinement has converged.
    pub step_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            free_amplitude: false,
            grid_points: 64,
            scan_min: 1e-4,
            scan_max: 1.0,
            max_iterations: 200,
            step_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FitReport {
    pub model: FitModel,
    pub params: BTreeMap<String, f64>,
    pub stderrs: BTreeMap<String, f64>,
    pub chi2: f64,
    pub ndf: usize,
    pub converged: bool,
}

impl FitReport {
    pub fn eta_hat(&self) -> Option<f64> {
        self.params.get("eta_hat").copied()
    }
}

/// Inverts the weak-value limit at a single point: `measured / Re A_w` for
/// MeanZ, `measured / Im A_w` for MeanPz. No validity range is enforced.
pub fn estimate_eta_linear(point: &SweepPoint, pre: &SpinState, post: &SpinState) -> Result<f64> {
    let aw = weak_value(pre, post)?;
    let sensitivity = match point.observable {
        Observable::MeanZ => aw.re,
        Observable::MeanPz => aw.im,
    };
    if sensitivity.abs() < TAU_ORTH {
        return Err(Error::VanishingSensitivity);
    }
    Ok(point.measured / sensitivity)
}

/// Post-selected mean deflection per unit displacement: `(⟨z⟩/η, ⟨p_z⟩/η)`
/// in units of `w` and `w_p`; `(0, 0)` at `η = 0`.
pub fn amplification_gain(setup: &MeasurementSetup, ch: Channel) -> Result<(f64, f64)> {
    let mz = mean_z_exact(setup, ch)?;
    let mp = mean_pz_exact(setup, ch)?;
    let eta = setup.eta();
    if eta == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((mz / eta, mp / eta))
}

/// Exact retained-channel mean at `η`, extended as an odd function to
/// negative `η`.
fn exact_response(pre: &SpinState, post: &SpinState, observable: Observable, eta: f64) -> Option<f64> {
    let setup = MeasurementSetup::dimensionless(*pre, *post, eta.abs()).ok()?;
    let v = match observable {
        Observable::MeanZ => mean_z_exact(&setup, Channel::Retained),
        Observable::MeanPz => mean_pz_exact(&setup, Channel::Retained),
    }
    .ok()?;
    Some(if eta < 0.0 { -v } else { v })
}

/// A response curve `shape(x, i)` scaled by an optional amplitude.
struct Curve<'a> {
    points: &'a [SweepPoint],
    shape: &'a dyn Fn(f64, usize) -> Option<f64>,
}

impl Curve<'_> {
    fn prediction(&self, params: &[f64], i: usize) -> Option<f64> {
        let s = (self.shape)(params[0], i)?;
        Some(if params.len() > 1 { params[1] * s } else { s })
    }

    fn chi2(&self, params: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            match self.prediction(params, i) {
                Some(m) if m.is_finite() => {
                    let r = (p.measured - m) / p.stderr;
                    sum += r * r;
                }
                _ => return f64::INFINITY,
            }
        }
        sum
    }

    /// Best `(x, amplitude)` on a log grid, with the amplitude solved
    /// linearly at each node when it is free.
    fn scan(&self, opts: &FitOptions, free_amplitude: bool) -> Option<(Vec<f64>, f64)> {
        let n = opts.grid_points.max(2);
        let ratio = libm::log(opts.scan_max / opts.scan_min);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for k in 0..n {
            let x = opts.scan_min * libm::exp(ratio * k as f64 / (n - 1) as f64);
            let params = if free_amplitude {
                let (mut sy, mut ss) = (0.0, 0.0);
                for (i, p) in self.points.iter().enumerate() {
                    let Some(s) = (self.shape)(x, i) else { continue };
                    let w = 1.0 / (p.stderr * p.stderr);
                    sy += w * s * p.measured;
                    ss += w * s * s;
                }
                if !(ss > 0.0) {
                    continue;
                }
                vec![x, sy / ss]
            } else {
                vec![x]
            };
            let c = self.chi2(&params);
            if c.is_finite() && best.as_ref().map_or(true, |(_, b)| c < *b) {
                best = Some((params, c));
            }
        }
        best
    }

    /// Jacobian of the predictions divided by the point errors, by central
    /// differences.
    fn jacobian(&self, params: &[f64]) -> Option<Vec<Vec<f64>>> {
        let k = params.len();
        let mut jac = vec![vec![0.0; k]; self.points.len()];
        for j in 0..k {
            let h = 1e-6 * params[j].abs().max(1e-6);
            let mut up = params.to_vec();
            let mut down = params.to_vec();
            up[j] += h;
            down[j] -= h;
            for (i, p) in self.points.iter().enumerate() {
                let d = (self.prediction(&up, i)? - self.prediction(&down, i)?) / (2.0 * h);
                jac[i][j] = d / p.stderr;
            }
        }
        Some(jac)
    }

    fn normal_equations(&self, params: &[f64], jac: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        let k = params.len();
        let mut jtj = vec![vec![0.0; k]; k];
        let mut jtr = vec![0.0; k];
        for (i, p) in self.points.iter().enumerate() {
            let r = (p.measured - self.prediction(params, i)?) / p.stderr;
            for a in 0..k {
                jtr[a] += jac[i][a] * r;
                for b in 0..k {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        Some((jtj, jtr))
    }

    /// Damped Gauss–Newton from `start`. Returns the parameters, `χ²`,
    /// parameter standard errors and the convergence flag.
    fn refine(&self, start: Vec<f64>, opts: &FitOptions) -> (Vec<f64>, f64, Vec<f64>, bool) {
        let mut params = start;
        let mut chi2 = self.chi2(&params);
        let mut lambda = 1e-3;
        let mut converged = false;
        'outer: for _ in 0..opts.max_iterations {
            let Some(jac) = self.jacobian(&params) else { break };
            let Some((jtj, jtr)) = self.normal_equations(&params, &jac) else { break };
            loop {
                let mut damped = jtj.clone();
                for (a, row) in damped.iter_mut().enumerate() {
                    row[a] += lambda * jtj[a][a].max(f64::MIN_POSITIVE);
                }
                let Some(step) = solve(damped, jtr.clone()) else { break 'outer };
                let small =
                    step.iter().zip(&params).all(|(s, p)| s.abs() <= opts.step_tol * p.abs().max(f64::MIN_POSITIVE));
                if small {
                    converged = true;
                    break 'outer;
                }
                let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
                let c = self.chi2(&trial);
                if c <= chi2 {
                    params = trial;
                    chi2 = c;
                    lambda = (lambda * 0.1).max(1e-15);
                    break;
                }
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
            }
        }
        let stderrs = self
            .jacobian(&params)
            .and_then(|jac| self.normal_equations(&params, &jac))
            .and_then(|(jtj, _)| invert(jtj))
            .map(|cov| (0..params.len()).map(|j| libm::sqrt(cov[j][j].max(0.0))).collect())
            .unwrap_or_else(|| vec![f64::NAN; params.len()]);
        (params, chi2, stderrs, converged)
    }
}

/// Gaussian elimination with partial pivoting for the tiny normal equations.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, y) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * y;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert(a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a.clone(), e)?;
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Fits the response curve of a `Δ` sweep at known `ε` and returns the
/// recovered `η̂` with its uncertainty.
///
/// The optimizer scans 64 log-spaced values in `[1e−4, 1]`, then refines
/// with damped Gauss–Newton on numeric derivatives. A report with
/// `converged = false` is returned when the refinement stalls or runs out of
/// iterations.
pub fn fit_response_curve(
    points: &[SweepPoint],
    pre: &SpinState,
    epsilon: f64,
    model: FitModel,
    opts: &FitOptions,
) -> Result<FitReport> {
    let mut deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    if points.len() < 3 || deltas.len() < 3 {
        return Err(Error::InsufficientPoints { got: deltas.len().min(points.len()), need: 3 });
    }

    let dets = points.iter().map(|p| DetuningParams::new(epsilon, p.delta)).collect::<Result<Vec<_>>>()?;

    let (params, chi2, stderrs, converged, free) = match model {
        FitModel::ExactClosedForm => {
            let posts = dets.iter().map(|d| construct_detuned_postselection(pre, d)).collect::<Result<Vec<_>>>()?;
            let shape = |eta: f64, i: usize| exact_response(pre, &posts[i], points[i].observable, eta);
            let curve = Curve { points, shape: &shape };
            let (start, _) = curve.scan(opts, opts.free_amplitude).ok_or(Error::ZeroPostselection)?;
            let (p, c, s, ok) = curve.refine(start, opts);
            (p, c, s, ok, opts.free_amplitude)
        }
        FitModel::PaperExpansion => {
            construct_detuned_postselection(pre, &dets[0])?;
            let shape = |eta: f64, i: usize| match points[i].observable {
                Observable::MeanZ => mean_z_paper_expansion(pre, &dets[i], eta).ok(),
                Observable::MeanPz => mean_pz_paper_expansion(pre, &dets[i], eta).ok(),
            };
            let curve = Curve { points, shape: &shape };
            let (start, _) = curve
                .scan(opts, opts.free_amplitude)
                .ok_or(Error::InvalidArgument("response model undefined on the scan grid"))?;
            let (p, c, s, ok) = curve.refine(start, opts);
            (p, c, s, ok, opts.free_amplitude)
        }
        FitModel::DerivativeLorentzian => {
            if points.iter().any(|p| p.observable != Observable::MeanPz) {
                return Err(Error::ModelObservableMismatch);
            }
            let pa = pre.upper().norm_sqr();
            let pb = pre.lower().norm_sqr();
            if libm::sqrt(pa) <= TAU_ORTH || libm::sqrt(pb) <= TAU_ORTH {
                return Err(Error::AmplitudeVanishes);
            }
            let shape = |s: f64, i: usize| {
                let x = points[i].delta;
                Some(x / (s * s + x * x))
            };
            let curve = Curve { points, shape: &shape };
            let (start, _) =
                curve.scan(opts, true).ok_or(Error::InvalidArgument("response model undefined on the scan grid"))?;
            let (p, c, s, ok) = curve.refine(start, opts);

            // s² = (η² + (|α|⁻⁴ + |β|⁻⁴) ε²/8) / 4
            let scale = p[0].abs();
            let k = (1.0 / (pa * pa) + 1.0 / (pb * pb)) / 8.0;
            let eta_hat = libm::sqrt((4.0 * scale * scale - k * epsilon * epsilon).max(0.0));
            let eta_err = if eta_hat > 0.0 { 4.0 * scale / eta_hat * s[0] } else { f64::NAN };

            let mut params = BTreeMap::new();
            let mut stderrs = BTreeMap::new();
            params.insert("scale".to_string(), scale);
            params.insert("amplitude".to_string(), p[1]);
            params.insert("eta_hat".to_string(), eta_hat);
            stderrs.insert("scale".to_string(), s[0]);
            stderrs.insert("amplitude".to_string(), s[1]);
            stderrs.insert("eta_hat".to_string(), eta_err);
            return Ok(FitReport { model, params, stderrs, chi2: c, ndf: points.len() - 2, converged: ok });
        }
    };

    let mut names = vec!["eta_hat"];
    if free {
        names.push("amplitude");
    }
    let mut values = params;
    values[0] = values[0].abs();
    Ok(FitReport {
        model,
        params: names.iter().map(|n| n.to_string()).zip(values.iter().copied()).collect(),
        stderrs: names.iter().map(|n| n.to_string()).zip(stderrs.iter().copied()).collect(),
        chi2,
        ndf: points.len() - names.len(),
        converged,
    })
}

/// How synthetic sweep points are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SweepSampling {
    /// `n` events in the retained channel.
    Postselected,
    /// `n` detection events over both channels; the retained ones are used.
    AllEvents,
}

/// Simulates one sweep point at phase detuning `delta` and summarizes the
/// retained-channel events. `None` when fewer than two retained events were
/// detected (the point would carry no usable error bar).
#[allow(clippy::too_many_arguments)]
pub fn simulate_sweep_point(
    pre: &SpinState,
    epsilon: f64,
    delta: f64,
    eta: f64,
    observable: Observable,
    n: usize,
    rng: RngSpec,
    sampling: SweepSampling,
) -> Result<Option<SweepPoint>> {
    let det = DetuningParams::new(epsilon, delta)?;
    let post = construct_detuned_postselection(pre, &det)?;
    let setup = MeasurementSetup::dimensionless(*pre, post, eta)?;
    let space = match observable {
        Observable::MeanZ => Space::Position,
        Observable::MeanPz => Space::Momentum,
    };
    let batch = match sampling {
        SweepSampling::Postselected => sample_postselected(&setup, Channel::Retained, n, rng, space)?,
        SweepSampling::AllEvents => sample_events(&setup, n, rng, space)?,
    };
    let Some(summary) = empirical_summary(&batch).retained else { return Ok(None) };
    if !(summary.stderr > 0.0) {
        return Ok(None);
    }
    Ok(Some(SweepPoint::new(delta, observable, summary.mean, summary.stderr, summary.count as u64)?))
}

/// Simulates a whole sweep; point `i` uses stream `i` of `seed`. Points
/// without a usable error bar are left out.
#[allow(clippy::too_many_arguments)]
pub fn simulate_sweep(
    pre: &SpinState,
    epsilon: f64,
    deltas: &[f64],
    eta: f64,
    observable: Observable,
    n: usize,
    seed: u64,
    sampling: SweepSampling,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(deltas.len());
    for (i, &delta) in deltas.iter().enumerate() {
        let rng = RngSpec::new(seed, i as u64);
        if let Some(p) = simulate_sweep_point(pre, epsilon, delta, eta, observable, n, rng, sampling)? {
            points.push(p);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mean_pz_weak_limit, postselection_probability};

    fn plus() -> SpinState {
        SpinState::from_real(1.0, 1.0).unwrap()
    }

    fn detuned(eps: f64, delta: f64) -> SpinState {
        construct_detuned_postselection(&plus(), &DetuningParams::new(eps, delta).unwrap()).unwrap()
    }

    #[test]
    fn linear_inversion_identity() {
        let post = SpinState::from_probability(0.8, 0.3).unwrap();
        let aw = weak_value(&plus(), &post).unwrap();
        let p = SweepPoint::new(0.0, Observable::MeanZ, aw.re * 0.037, 0.01, 10).unwrap();
        assert!((estimate_eta_linear(&p, &plus(), &post).unwrap() - 0.037).abs() < 1e-15);
        let p = SweepPoint::new(0.0, Observable::MeanPz, 0.0, 0.01, 10).unwrap();
        assert_eq!(estimate_eta_linear(&p, &plus(), &post).unwrap(), 0.0);
    }

    #[test]
    fn linear_inversion_errors() {
        let p = SweepPoint::new(0.0, Observable::MeanPz, 0.1, 0.01, 10).unwrap();
        let real = SpinState::from_real(0.9, 0.1).unwrap();
        assert_eq!(estimate_eta_linear(&p, &plus(), &real), Err(Error::VanishingSensitivity));
        assert_eq!(estimate_eta_linear(&p, &plus(), &detuned(0.0, 0.0)), Err(Error::OrthogonalPostselection));
    }

    #[test]
    fn linear_inversion_is_biased_far_from_weak_regime() {
        let post = detuned(0.0, 0.05);
        let setup = MeasurementSetup::dimensionless(plus(), post, 0.05).unwrap();
        let measured = mean_pz_exact(&setup, Channel::Retained).unwrap();
        let p = SweepPoint::new(0.05, Observable::MeanPz, measured, 1e-3, 1000).unwrap();
        let eta_hat = estimate_eta_linear(&p, &plus(), &post).unwrap();
        assert!(((eta_hat - 0.05) / 0.05).abs() > 0.2);
        assert!(mean_pz_weak_limit(&setup).unwrap() > measured);
    }

    #[test]
    fn gain_examples() {
        let up = SpinState::up();
        let s = MeasurementSetup::dimensionless(up, up, 0.3).unwrap();
        assert!((amplification_gain(&s, Channel::Retained).unwrap().0 - 1.0).abs() < 1e-15);

        let s = MeasurementSetup::dimensionless(plus(), detuned(0.1, 0.0), 0.1).unwrap();
        let (gz, _) = amplification_gain(&s, Channel::Retained).unwrap();
        assert!((gz - 7.97).abs() < 0.005);

        let s = MeasurementSetup::dimensionless(plus(), detuned(0.0, 0.05), 0.05).unwrap();
        let (_, gp) = amplification_gain(&s, Channel::Retained).unwrap();
        assert!((gp - 15.982).abs() < 0.001);

        let s = MeasurementSetup::dimensionless(plus(), detuned(0.1, 0.2), 0.0).unwrap();
        assert_eq!(amplification_gain(&s, Channel::Retained).unwrap(), (0.0, 0.0));
        let s = MeasurementSetup::dimensionless(plus(), detuned(0.0, 0.0), 0.0).unwrap();
        assert_eq!(amplification_gain(&s, Channel::Retained), Err(Error::ZeroPostselection));
    }

    fn noiseless(model: FitModel, eta: f64, eps: f64, obs: Observable) -> Vec<SweepPoint> {
        [-0.3, -0.16, -0.08, -0.04, -0.02, -0.01, 0.01, 0.02, 0.04, 0.08, 0.16, 0.3]
            .iter()
            .map(|&d| {
                let det = DetuningParams::new(eps, d).unwrap();
                let v = match (model, obs) {
                    (FitModel::ExactClosedForm, _) => exact_response(&plus(), &detuned(eps, d), obs, eta).unwrap(),
                    (_, Observable::MeanZ) => mean_z_paper_expansion(&plus(), &det, eta).unwrap(),
                    (_, Observable::MeanPz) => mean_pz_paper_expansion(&plus(), &det, eta).unwrap(),
                };
                SweepPoint::new(d, obs, v, 0.01 + 0.01 * v.abs(), 1000).unwrap()
            })
            .collect()
    }

    #[test]
    fn noiseless_self_consistency() {
        let opts = FitOptions::default();
        for model in [FitModel::ExactClosedForm, FitModel::PaperExpansion] {
            for (eta, eps, obs) in [(0.02, 0.0, Observable::MeanPz), (0.07, 0.05, Observable::MeanZ)] {
                let pts = noiseless(model, eta, eps, obs);
                let r = fit_response_curve(&pts, &plus(), eps, model, &opts).unwrap();
                assert!(r.converged, "{model:?}");
                let got = r.eta_hat().unwrap();
                assert!(((got - eta) / eta).abs() < 1e-8, "{model:?} {got}");
                assert_eq!(r.ndf, pts.len() - 1);
                assert!(r.chi2 < 1e-12);
            }
        }
    }

    #[test]
    fn free_amplitude_recovers_unit_scale() {
        let pts = noiseless(FitModel::ExactClosedForm, 0.03, 0.0, Observable::MeanPz);
        let opts = FitOptions { free_amplitude: true, ..FitOptions::default() };
        let r = fit_response_curve(&pts, &plus(), 0.0, FitModel::ExactClosedForm, &opts).unwrap();
        assert!(r.converged);
        assert!((r.params["amplitude"] - 1.0).abs() < 1e-8);
        assert!((r.eta_hat().unwrap() - 0.03).abs() < 1e-9);
        assert_eq!(r.ndf, pts.len() - 2);
    }

    #[test]
    fn lorentzian_scale_tracks_eta() {
        let pts = noiseless(FitModel::PaperExpansion, 0.04, 0.0, Observable::MeanPz);
        let r = fit_response_curve(&pts, &plus(), 0.0, FitModel::DerivativeLorentzian, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.eta_hat().unwrap() - 0.04).abs() < 1e-9);
        assert!((r.params["amplitude"] - 0.02).abs() < 1e-9);

        let z = noiseless(FitModel::PaperExpansion, 0.04, 0.1, Observable::MeanZ);
        assert_eq!(
            fit_response_curve(&z, &plus(), 0.1, FitModel::DerivativeLorentzian, &FitOptions::default()),
            Err(Error::ModelObservableMismatch)
        );
    }

    #[test]
    fn too_few_points() {
        let pts = &noiseless(FitModel::ExactClosedForm, 0.02, 0.0, Observable::MeanPz)[..2];
        assert!(matches!(
            fit_response_curve(pts, &plus(), 0.0, FitModel::ExactClosedForm, &FitOptions::default()),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn iteration_budget_exhaustion_is_reported() {
        let pts = noiseless(FitModel::ExactClosedForm, 0.02, 0.0, Observable::MeanPz);
        let opts = FitOptions { max_iterations: 0, ..FitOptions::default() };
        let r = fit_response_curve(&pts, &plus(), 0.0, FitModel::ExactClosedForm, &opts).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn all_events_sampling_uses_retained_channel() {
        let pt = simulate_sweep_point(
            &plus(),
            0.1,
            0.0,
            0.1,
            Observable::MeanZ,
            20_000,
            RngSpec::new(5, 0),
            SweepSampling::AllEvents,
        )
        .unwrap()
        .unwrap();
        let setup = MeasurementSetup::dimensionless(plus(), detuned(0.1, 0.0), 0.1).unwrap();
        let expected = postselection_probability(Channel::Retained, &setup) * 20_000.0;
        assert!((pt.n_events as f64 - expected).abs() < 5.0 * libm::sqrt(expected));
    }
}
