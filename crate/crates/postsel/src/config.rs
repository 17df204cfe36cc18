//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use postsel_core::estimation::FitModel;
use postsel_core::sampler::Space;
use postsel_core::{BeamGeometry, Channel, ComplexAmp, DetuningParams, Observable, SpinState};
use serde::Deserialize;

use crate::error::CliError;

/// Every setting that can come from a config file or a flag. Unset fields
/// fall back to the file, then to built-in defaults.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub pre: Option<Vec<f64>>,
    pub post: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub eta: Option<f64>,
    pub w: Option<f64>,
    pub hbar: Option<f64>,
    pub channel: Option<String>,
    pub space: Option<String>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub n: Option<usize>,
    pub sweep: Option<String>,
    pub model: Option<String>,
    pub free_amplitude: Option<bool>,
    pub postselect: Option<bool>,
    pub input: Option<PathBuf>,
    pub deltas: Option<Vec<f64>>,
    pub observable: Option<String>,
    pub all_events: Option<bool>,
    pub max_iterations: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay!(base, top; pre, post, epsilon, delta, eta, w, hbar, channel, space, seed, stream, n,
            sweep, model, free_amplitude, postselect, input, deltas, observable, all_events, max_iterations)
    }
}

/// Parses a state from four numbers `re α, im α, re β, im β` or two numbers
/// `|α|², relative phase`.
pub fn parse_state(values: &[f64], what: &str) -> Result<SpinState, CliError> {
    let state = match *values {
        [ar, ai, br, bi] => SpinState::new(ComplexAmp::new(ar, ai), ComplexAmp::new(br, bi)),
        [p, phase] => {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::config(format!("{what}: |α|² must lie in [0, 1]")));
            }
            SpinState::from_probability(p, phase)
        }
        _ => return Err(CliError::config(format!("{what}: expected 4 amplitudes or 2 values, got {}", values.len()))),
    };
    state.map_err(|e| CliError::config(format!("{what}: {e}")))
}

pub fn parse_channel(s: &str) -> Result<Channel, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "retained" => Ok(Channel::Retained),
        "complement" => Ok(Channel::Complement),
        _ => Err(CliError::config(format!("unknown channel '{s}' (retained|complement)"))),
    }
}

pub fn parse_space(s: &str) -> Result<Space, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "position" | "z" => Ok(Space::Position),
        "momentum" | "p" | "pz" => Ok(Space::Momentum),
        _ => Err(CliError::config(format!("unknown space '{s}' (position|momentum)"))),
    }
}

pub fn parse_observable(s: &str) -> Result<Observable, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "meanz" | "mean_z" => Ok(Observable::MeanZ),
        "meanpz" | "mean_pz" => Ok(Observable::MeanPz),
        _ => Err(CliError::config(format!("unknown observable '{s}' (MeanZ|MeanPz)"))),
    }
}

pub fn parse_model(s: &str) -> Result<FitModel, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "exact" | "exactclosedform" => Ok(FitModel::ExactClosedForm),
        "paper" | "expansion" | "paperexpansion" => Ok(FitModel::PaperExpansion),
        "lorentzian" | "derivativelorentzian" => Ok(FitModel::DerivativeLorentzian),
        _ => Err(CliError::config(format!("unknown model '{s}' (exact|expansion|lorentzian)"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    Eta,
    Delta,
    Epsilon,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl Sweep {
    /// Parses `var:start:stop:count[:log]`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = |msg: &str| CliError::config(format!("--sweep '{s}': {msg}"));
        let parts: Vec<&str> = s.split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(bad("expected var:start:stop:count[:log]"));
        }
        let var = match parts[0] {
            "eta" => SweepVar::Eta,
            "delta" => SweepVar::Delta,
            "epsilon" => SweepVar::Epsilon,
            _ => return Err(bad("variable must be eta, delta or epsilon")),
        };
        let num = |t: &str| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad("bad number"));
        let start = num(parts[1])?;
        let stop = num(parts[2])?;
        let count: usize = parts[3].trim().parse().map_err(|_| bad("bad count"))?;
        if count == 0 {
            return Err(bad("count must be at least 1"));
        }
        let log = match parts.get(4).map(|t| t.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(_) => return Err(bad("scale must be lin or log")),
        };
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(bad("log sweeps need positive bounds"));
        }
        Ok(Self { var, start, stop, count, log })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                if i + 1 == self.count {
                    self.stop
                } else if self.log {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + (self.stop - self.start) * t
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PostSpec {
    Explicit(SpinState),
    Detuned { epsilon: f64, delta: f64 },
}

/// Output scaling. Dimensionless unless `--w` or `--hbar` is given.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Units {
    pub beam: BeamGeometry,
    pub physical: bool,
}

impl Units {
    pub fn z_scale(&self) -> f64 {
        if self.physical {
            self.beam.width()
        } else {
            1.0
        }
    }

    pub fn p_scale(&self) -> f64 {
        if self.physical {
            self.beam.momentum_width()
        } else {
            1.0
        }
    }

    pub fn comment(&self) -> String {
        if self.physical {
            format!(
                "# units: z in length units (w = {}), p_z in momentum units (hbar = {}, w_p = {}); eta = d/w",
                self.beam.width(),
                self.beam.hbar(),
                self.beam.momentum_width()
            )
        } else {
            "# units: z in w, p_z in w_p = hbar/(2w); eta = d/w".to_string()
        }
    }
}

/// Settings shared by all subcommands, validated.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub pre: SpinState,
    pub post: Option<PostSpec>,
    pub eta: Option<f64>,
    pub units: Units,
    pub channel: Channel,
    pub space: Space,
    pub seed: u64,
    pub stream: u64,
    pub n_events: usize,
    pub sweep: Option<Sweep>,
}

pub const DEFAULT_EVENTS: usize = 10_000;

fn finite(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !x.is_finite() => Err(CliError::config(format!("--{name} must be finite"))),
        v => Ok(v),
    }
}

impl RunConfig {
    pub fn resolve(s: &Settings) -> Result<Self, CliError> {
        let pre = match &s.pre {
            Some(v) => parse_state(v, "--pre")?,
            None => SpinState::from_real(1.0, 1.0)?,
        };
        let epsilon = finite("epsilon", s.epsilon)?;
        let delta = finite("delta", s.delta)?;
        let sweep = s.sweep.as_deref().map(Sweep::parse).transpose()?;
        let detuned = epsilon.is_some()
            || delta.is_some()
            || matches!(sweep, Some(Sweep { var: SweepVar::Delta | SweepVar::Epsilon, .. }));
        let post = match (&s.post, detuned) {
            (Some(_), true) => {
                return Err(CliError::config("give either --post or --epsilon/--delta, not both"));
            }
            (Some(v), false) => Some(PostSpec::Explicit(parse_state(v, "--post")?)),
            (None, true) => Some(PostSpec::Detuned { epsilon: epsilon.unwrap_or(0.0), delta: delta.unwrap_or(0.0) }),
            (None, false) => None,
        };
        if let Some(sw) = &sweep {
            let clash = match sw.var {
                SweepVar::Eta => s.eta.is_some(),
                SweepVar::Delta => delta.is_some(),
                SweepVar::Epsilon => epsilon.is_some(),
            };
            if clash {
                return Err(CliError::config("the swept variable must not also be fixed by a flag"));
            }
            if sw.var == SweepVar::Eta && sw.start.min(sw.stop) < 0.0 {
                return Err(CliError::config("eta must be non-negative"));
            }
        }
        let eta = finite("eta", s.eta)?;
        if eta.is_some_and(|e| e < 0.0) {
            return Err(CliError::config("eta must be non-negative"));
        }
        let beam = BeamGeometry::new(s.w.unwrap_or(1.0), s.hbar.unwrap_or(1.0))
            .map_err(|e| CliError::config(format!("--w/--hbar: {e}")))?;
        let n_events = s.n.unwrap_or(DEFAULT_EVENTS);
        if n_events == 0 {
            return Err(CliError::config("--n must be at least 1"));
        }
        Ok(Self {
            pre,
            post,
            eta,
            units: Units { beam, physical: s.w.is_some() || s.hbar.is_some() },
            channel: s.channel.as_deref().map(parse_channel).transpose()?.unwrap_or(Channel::Retained),
            space: s.space.as_deref().map(parse_space).transpose()?.unwrap_or(Space::Position),
            seed: s.seed.unwrap_or(0),
            stream: s.stream.unwrap_or(0),
            n_events,
            sweep,
        })
    }

    pub fn require_post(&self) -> Result<PostSpec, CliError> {
        self.post.ok_or_else(|| CliError::config("a post-state is required: --post or --epsilon/--delta"))
    }

    pub fn require_eta(&self) -> Result<f64, CliError> {
        self.eta.ok_or_else(|| CliError::config("--eta is required"))
    }

    /// `(η, post)` for every sweep value, or the single configured point.
    pub fn points(&self) -> Result<Vec<(f64, PostSpec)>, CliError> {
        let post = self.require_post()?;
        let Some(sweep) = self.sweep else {
            return Ok(vec![(self.require_eta()?, post)]);
        };
        let values = sweep.values();
        if sweep.var == SweepVar::Eta {
            return Ok(values.into_iter().map(|eta| (eta, post)).collect());
        }
        let eta = self.require_eta()?;
        let PostSpec::Detuned { epsilon, delta } = post else {
            unreachable!("detuning sweeps always resolve to a detuned post-state")
        };
        Ok(values
            .into_iter()
            .map(|v| {
                let p = match sweep.var {
                    SweepVar::Delta => PostSpec::Detuned { epsilon, delta: v },
                    _ => PostSpec::Detuned { epsilon: v, delta },
                };
                (eta, p)
            })
            .collect())
    }
}

pub fn detuning(epsilon: f64, delta: f64) -> Result<DetuningParams, CliError> {
    DetuningParams::new(epsilon, delta).map_err(|e| CliError::config(format!("detuning: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> Settings {
        Settings::default()
    }

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("delta:-0.3:0.3:61").unwrap();
        assert_eq!(s.var, SweepVar::Delta);
        let v = s.values();
        assert_eq!(v.len(), 61);
        assert_eq!(v[0], -0.3);
        assert_eq!(v[60], 0.3);
        assert!(v[30].abs() < 1e-15);

        let s = Sweep::parse("eta:1e-3:1e-1:3:log").unwrap();
        let v = s.values();
        assert!((v[1] - 1e-2).abs() < 1e-15);

        for bad in ["delta:0:1", "x:0:1:3", "eta:0:1:0", "eta:0:1:3:log", "eta:a:1:3", "eta:0:1:3:cubic"] {
            assert!(Sweep::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn state_parsing() {
        let s = parse_state(&[1.0, 0.0, 0.0, 0.0], "pre").unwrap();
        assert_eq!(s, SpinState::up());
        let s = parse_state(&[0.5, 0.0], "pre").unwrap();
        assert!((s.upper().re - s.lower().re).abs() < 1e-15);
        assert!(parse_state(&[1.0, 2.0, 3.0], "pre").is_err());
        assert!(parse_state(&[0.0; 4], "pre").is_err());
        assert!(parse_state(&[1.5, 0.0], "pre").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: Settings = serde_json::from_str(r#"{"eta": 0.1, "seed": 3, "channel": "complement"}"#).unwrap();
        let flags = Settings { eta: Some(0.2), ..settings() };
        let merged = file.overlay(flags);
        assert_eq!(merged.eta, Some(0.2));
        assert_eq!(merged.seed, Some(3));
        let cfg = RunConfig::resolve(&merged).unwrap();
        assert_eq!(cfg.channel, Channel::Complement);
        assert!(serde_json::from_str::<Settings>(r#"{"etaa": 1}"#).is_err());
    }

    #[test]
    fn one_post_mode() {
        let both = Settings { post: Some(vec![1.0, 0.0]), epsilon: Some(0.1), ..settings() };
        assert!(RunConfig::resolve(&both).is_err());
        let swept = Settings { post: Some(vec![1.0, 0.0]), sweep: Some("delta:0:1:3".into()), ..settings() };
        assert!(RunConfig::resolve(&swept).is_err());
        let cfg = RunConfig::resolve(&Settings { delta: Some(0.05), ..settings() }).unwrap();
        assert_eq!(cfg.post, Some(PostSpec::Detuned { epsilon: 0.0, delta: 0.05 }));
        assert!(RunConfig::resolve(&settings()).unwrap().post.is_none());
    }

    #[test]
    fn sweep_points() {
        let cfg = RunConfig::resolve(&Settings {
            epsilon: Some(0.1),
            eta: Some(0.05),
            sweep: Some("delta:-0.1:0.1:3".into()),
            ..settings()
        })
        .unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2], (0.05, PostSpec::Detuned { epsilon: 0.1, delta: 0.1 }));

        let clash = Settings { delta: Some(0.1), sweep: Some("delta:0:1:3".into()), ..settings() };
        assert!(RunConfig::resolve(&clash).is_err());
    }

    #[test]
    fn invalid_values() {
        assert!(RunConfig::resolve(&Settings { w: Some(-1.0), ..settings() }).is_err());
        assert!(RunConfig::resolve(&Settings { eta: Some(-0.1), ..settings() }).is_err());
        assert!(RunConfig::resolve(&Settings { n: Some(0), ..settings() }).is_err());
        assert!(RunConfig::resolve(&Settings { channel: Some("both".into()), ..settings() }).is_err());
    }
}
