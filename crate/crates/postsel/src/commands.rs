use std::io::{self, Write};
use std::path::Path;

use postsel_core::detuning::{
    construct_detuned_postselection, extract_detuning, mean_pz_paper_expansion, mean_z_paper_expansion,
};
use postsel_core::estimation::{fit_response_curve, FitModel, FitOptions, FitReport, SweepSampling};
use postsel_core::model::{
    aav_validity_margin, mean_pz_exact, mean_pz_weak_limit, mean_z_exact, mean_z_weak_limit, postselection_probability,
    weak_value, ValidityMargin,
};
use postsel_core::oracle::{verify_report, VerifyPoint};
use postsel_core::quadrature::QuadratureSpec;
use postsel_core::sampler::{empirical_summary, sample_events, sample_postselected, RngSpec, Space};
use postsel_core::{Channel, Error, MeasurementSetup, Observable, SpinState};
use serde::Serialize;

use crate::cli::{Cli, Command};
use crate::config::{detuning, parse_model, parse_observable, PostSpec, RunConfig, Settings, SweepVar, DEFAULT_EVENTS};
use crate::error::CliError;
use crate::output::{self, fmt_f64, fmt_opt, MeansRow};
use crate::parallel::simulate_sweep_parallel;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (common, settings) = match &cli.command {
        Command::WeakValue(a) | Command::Means(a) | Command::Verify(a) => (a, a.settings()),
        Command::Sample(a) => (&a.common, a.settings()),
        Command::Fit(a) => (&a.common, a.settings()),
        Command::Simulate(a) => (&a.common, a.settings()),
    };
    let settings = match &common.config {
        Some(path) => Settings::from_file(path)?.overlay(settings),
        None => settings,
    };
    let cfg = RunConfig::resolve(&settings)?;
    let out = common.out.as_deref();
    let json = common.json;
    match cli.command {
        Command::WeakValue(_) => cmd_weak_value(&cfg, json, out),
        Command::Means(_) => cmd_means(&cfg, json, out),
        Command::Sample(_) => cmd_sample(&cfg, settings.postselect.unwrap_or(false), json, out),
        Command::Verify(_) => cmd_verify(&cfg, json, out),
        Command::Fit(_) => cmd_fit(&cfg, &settings, json, out),
        Command::Simulate(_) => cmd_simulate(&cfg, &settings, json, out),
    }
}

fn post_state(pre: &SpinState, post: PostSpec) -> Result<SpinState, CliError> {
    match post {
        PostSpec::Explicit(s) => Ok(s),
        PostSpec::Detuned { epsilon, delta } => Ok(construct_detuned_postselection(pre, &detuning(epsilon, delta)?)?),
    }
}

fn margin(setup: &MeasurementSetup) -> Option<f64> {
    match aav_validity_margin(setup) {
        ValidityMargin::Finite(m) => Some(m),
        ValidityMargin::Unbounded => None,
    }
}

#[derive(Serialize)]
struct WeakValueReport {
    re: f64,
    im: f64,
    margin: Option<f64>,
}

pub fn cmd_weak_value(cfg: &RunConfig, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    let post = post_state(&cfg.pre, cfg.require_post()?)?;
    let aw = weak_value(&cfg.pre, &post)?;
    let margin = match cfg.eta {
        Some(eta) => margin(&MeasurementSetup::dimensionless(cfg.pre, post, eta)?),
        None => None,
    };
    let report = WeakValueReport { re: aw.re, im: aw.im, margin };
    let mut w = output::sink(out)?;
    if json {
        return output::write_json(w, &report);
    }
    writeln!(w, "re {}", fmt_f64(report.re))?;
    writeln!(w, "im {}", fmt_f64(report.im))?;
    match (cfg.eta, margin) {
        (None, _) => writeln!(w, "margin (needs --eta)")?,
        (Some(_), Some(m)) => writeln!(w, "margin {}", fmt_f64(m))?,
        (Some(_), None) => writeln!(w, "margin unbounded")?,
    }
    w.flush()?;
    Ok(())
}

fn optional<T>(r: Result<T, Error>, absent: Error) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e == absent => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn means_row(cfg: &RunConfig, eta: f64, post: PostSpec) -> Result<MeansRow, CliError> {
    let post_state = post_state(&cfg.pre, post)?;
    let setup = MeasurementSetup::dimensionless(cfg.pre, post_state, eta)?;
    let det = match post {
        PostSpec::Detuned { epsilon, delta } => Some(detuning(epsilon, delta)?),
        PostSpec::Explicit(s) => extract_detuning(&cfg.pre, &s).ok(),
    };
    let (zs, ps) = (cfg.units.z_scale(), cfg.units.p_scale());
    let mz = optional(mean_z_exact(&setup, cfg.channel), Error::ZeroPostselection)?;
    let mp = optional(mean_pz_exact(&setup, cfg.channel), Error::ZeroPostselection)?;
    let ez = det.map(|d| mean_z_paper_expansion(&cfg.pre, &d, eta)).transpose();
    let ep = det.map(|d| mean_pz_paper_expansion(&cfg.pre, &d, eta)).transpose();
    Ok(MeansRow {
        eta,
        epsilon: det.map(|d| d.epsilon),
        delta: det.map(|d| d.delta()),
        mean_z_exact: mz.map(|v| v * zs),
        mean_pz_exact: mp.map(|v| v * ps),
        mean_z_expansion: optional(ez, Error::AmplitudeVanishes)?.flatten().map(|v| v * zs),
        mean_pz_expansion: optional(ep, Error::AmplitudeVanishes)?.flatten().map(|v| v * ps),
        weak_limit_z: optional(mean_z_weak_limit(&setup), Error::OrthogonalPostselection)?.map(|v| v * zs),
        weak_limit_p: optional(mean_pz_weak_limit(&setup), Error::OrthogonalPostselection)?.map(|v| v * ps),
        post_prob: postselection_probability(cfg.channel, &setup),
        margin: margin(&setup),
        flag: if mz.is_some() { "ok" } else { "zero_postselection" },
    })
}

pub fn cmd_means(cfg: &RunConfig, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    let rows = cfg.points()?.into_iter().map(|(eta, post)| means_row(cfg, eta, post)).collect::<Result<Vec<_>, _>>()?;
    let w = output::sink(out)?;
    if json {
        output::write_json(w, &rows)
    } else {
        output::write_means(w, &rows, &cfg.units)
    }
}

#[derive(Serialize)]
struct ChannelReport {
    channel: &'static str,
    count: usize,
    fraction: f64,
    mean: Option<f64>,
    stderr: Option<f64>,
    expected_fraction: f64,
    exact_mean: Option<f64>,
}

#[derive(Serialize)]
struct SampleSummary {
    n_requested: usize,
    seed: u64,
    stream: u64,
    space: &'static str,
    postselected: bool,
    eta: f64,
    channels: Vec<ChannelReport>,
}

pub fn cmd_sample(cfg: &RunConfig, postselect: bool, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    if cfg.sweep.is_some() {
        return Err(CliError::config("sample does not take --sweep"));
    }
    let eta = cfg.require_eta()?;
    let post = post_state(&cfg.pre, cfg.require_post()?)?;
    let setup = MeasurementSetup::dimensionless(cfg.pre, post, eta)?;
    let rng = RngSpec::new(cfg.seed, cfg.stream);
    let batch = if postselect {
        sample_postselected(&setup, cfg.channel, cfg.n_events, rng, cfg.space)?
    } else {
        sample_events(&setup, cfg.n_events, rng, cfg.space)?
    };

    let scale = match cfg.space {
        Space::Position => cfg.units.z_scale(),
        Space::Momentum => cfg.units.p_scale(),
    };
    let summary = empirical_summary(&batch);
    let channels: Vec<Channel> = if postselect { vec![cfg.channel] } else { Channel::ALL.to_vec() };
    let reports = channels
        .into_iter()
        .map(|ch| {
            let s = summary.channel(ch);
            let exact = match cfg.space {
                Space::Position => mean_z_exact(&setup, ch),
                Space::Momentum => mean_pz_exact(&setup, ch),
            };
            let count = s.map_or(0, |s| s.count);
            Ok(ChannelReport {
                channel: ch.as_str(),
                count,
                fraction: count as f64 / batch.events.len() as f64,
                mean: s.map(|s| s.mean * scale),
                stderr: s.map(|s| s.stderr * scale),
                expected_fraction: if postselect { 1.0 } else { postselection_probability(ch, &setup) },
                exact_mean: optional(exact, Error::ZeroPostselection)?.map(|v| v * scale),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = SampleSummary {
        n_requested: batch.n_requested,
        seed: cfg.seed,
        stream: cfg.stream,
        space: cfg.space.as_str(),
        postselected: postselect,
        eta,
        channels: reports,
    };

    output::write_events(output::sink(out)?, &batch, &cfg.units)?;
    // the summary goes wherever the events do not
    let mut w: Box<dyn Write> =
        if out.is_some() { Box::new(io::stdout().lock()) } else { Box::new(io::stderr().lock()) };
    if json {
        return output::write_json(w, &report);
    }
    for c in &report.channels {
        writeln!(
            w,
            "{:<10} count {:>9}  mean {}  stderr {}  exact {}",
            c.channel,
            c.count,
            fmt_opt(c.mean),
            fmt_opt(c.stderr),
            fmt_opt(c.exact_mean)
        )?;
    }
    w.flush()?;
    Ok(())
}

const DEFAULT_EPSILONS: [f64; 3] = [0.0, 0.05, 0.1];
const DEFAULT_DELTAS: [f64; 4] = [0.0, 0.02, 0.05, 0.1];
const DEFAULT_ETAS: [f64; 5] = [1e-3, 1e-2, 0.05, 0.1, 0.3];

/// Cartesian grid: each axis is the swept values, the fixed flag value, or
/// a default list.
pub fn verify_grid(cfg: &RunConfig) -> Result<Vec<VerifyPoint>, CliError> {
    if matches!(cfg.post, Some(PostSpec::Explicit(_))) {
        return Err(CliError::config("verify builds its own post-states; use --epsilon/--delta instead of --post"));
    }
    let swept = |var| cfg.sweep.filter(|s| s.var == var).map(|s| s.values());
    let (eps, del) = match cfg.post {
        Some(PostSpec::Detuned { epsilon, delta }) => (vec![epsilon], vec![delta]),
        _ => (DEFAULT_EPSILONS.to_vec(), DEFAULT_DELTAS.to_vec()),
    };
    let epsilons = swept(SweepVar::Epsilon).unwrap_or(eps);
    let deltas = swept(SweepVar::Delta).unwrap_or(del);
    let etas = swept(SweepVar::Eta).unwrap_or_else(|| cfg.eta.map_or(DEFAULT_ETAS.to_vec(), |e| vec![e]));
    let mut grid = Vec::with_capacity(epsilons.len() * deltas.len() * etas.len());
    for &epsilon in &epsilons {
        for &delta in &deltas {
            for &eta in &etas {
                grid.push(VerifyPoint { epsilon, delta, eta });
            }
        }
    }
    Ok(grid)
}

pub fn cmd_verify(cfg: &RunConfig, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    let grid = verify_grid(cfg)?;
    let rows = verify_report(&cfg.pre, &grid, &QuadratureSpec::default())?;
    let w = output::sink(out)?;
    if json {
        output::write_json(w, &rows)
    } else {
        output::write_verify(w, &rows)
    }
}

pub fn cmd_fit(cfg: &RunConfig, settings: &Settings, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    let path = settings.input.as_deref().ok_or_else(|| CliError::config("fit needs --input"))?;
    let file =
        std::fs::File::open(path).map_err(|e| CliError::config(format!("cannot open {}: {e}", path.display())))?;
    let points = output::read_sweep(io::BufReader::new(file))?;
    let model = settings.model.as_deref().map(parse_model).transpose()?.unwrap_or(FitModel::ExactClosedForm);
    let epsilon = match cfg.post {
        Some(PostSpec::Detuned { epsilon, .. }) => epsilon,
        Some(PostSpec::Explicit(_)) => return Err(CliError::config("fit takes the sweep's --epsilon, not --post")),
        None => 0.0,
    };
    let defaults = FitOptions::default();
    let opts = FitOptions {
        free_amplitude: settings.free_amplitude.unwrap_or(false),
        max_iterations: settings.max_iterations.unwrap_or(defaults.max_iterations),
        ..defaults
    };
    let report = fit_response_curve(&points, &cfg.pre, epsilon, model, &opts)?;
    write_fit(output::sink(out)?, &report, json)?;
    if report.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn write_fit<W: Write>(mut w: W, report: &FitReport, json: bool) -> Result<(), CliError> {
    if json {
        return output::write_json(w, report);
    }
    writeln!(w, "model {}", report.model.as_str())?;
    for (k, v) in &report.params {
        let err = report.stderrs.get(k).copied();
        writeln!(w, "{k} {} ± {}", fmt_f64(*v), fmt_opt(err))?;
    }
    writeln!(w, "chi2 {} ndf {}", fmt_f64(report.chi2), report.ndf)?;
    writeln!(w, "converged {}", report.converged)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, settings: &Settings, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    let eta = cfg.require_eta()?;
    let deltas = match (&settings.deltas, cfg.sweep) {
        (Some(_), Some(_)) => return Err(CliError::config("give --deltas or --sweep, not both")),
        (Some(d), None) => d.clone(),
        (None, Some(s)) if s.var == SweepVar::Delta => s.values(),
        _ => return Err(CliError::config("simulate needs --deltas or --sweep delta:...")),
    };
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return Err(CliError::config("--deltas must be finite numbers"));
    }
    let epsilon = match cfg.post {
        Some(PostSpec::Detuned { epsilon, .. }) => epsilon,
        Some(PostSpec::Explicit(_)) => return Err(CliError::config("simulate takes --epsilon, not --post")),
        None => 0.0,
    };
    let observable = match (&settings.observable, &settings.space) {
        (Some(o), _) => parse_observable(o)?,
        (None, Some(_)) if cfg.space == Space::Position => Observable::MeanZ,
        _ => Observable::MeanPz,
    };
    let sampling =
        if settings.all_events.unwrap_or(false) { SweepSampling::AllEvents } else { SweepSampling::Postselected };
    let n = settings.n.unwrap_or(DEFAULT_EVENTS);
    let run = simulate_sweep_parallel(
        &cfg.pre,
        epsilon,
        &deltas,
        eta,
        observable,
        n,
        RngSpec::new(cfg.seed, cfg.stream),
        sampling,
    )?;
    for d in &run.dropped {
        eprintln!("warning: dropped Δ = {} (fewer than two retained events)", fmt_f64(*d));
    }
    let w = output::sink(out)?;
    if json {
        return output::write_json(w, &run.points);
    }
    let comment = format!(
        "eta = {}, epsilon = {}, n = {n}, seed = {}, stream = {}",
        fmt_f64(eta),
        fmt_f64(epsilon),
        cfg.seed,
        cfg.stream
    );
    output::write_sweep(w, &run.points, &comment)
}
