use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(name = "postsel", version, about = "Post-selected weak measurement of a two-level system on a Gaussian beam")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weak value of σ_z and how deep the setup sits in the weak regime.
    WeakValue(CommonArgs),
    /// Exact, small-detuning and weak-limit post-selected means.
    Means(CommonArgs),
    /// Seeded detection events.
    Sample(SampleArgs),
    /// Compare closed forms and response formulas against quadrature.
    Verify(CommonArgs),
    /// Fit a measured Δ sweep and report η̂.
    Fit(FitArgs),
    /// Generate a synthetic Δ sweep in the format `fit` reads.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Pre-state: `re α,im α,re β,im β` or `|α|²,phase`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pre: Option<Vec<f64>>,
    /// Post-state, same forms as --pre.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub post: Option<Vec<f64>>,
    /// Amplitude detuning of the post-state.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Phase detuning of the post-state, radians.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Displacement over beam width, d/w.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Beam width; switches outputs to physical units.
    #[arg(long)]
    pub w: Option<f64>,
    /// Reduced Planck constant; switches outputs to physical units.
    #[arg(long)]
    pub hbar: Option<f64>,
    /// retained | complement
    #[arg(long)]
    pub channel: Option<String>,
    /// position | momentum
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stream: Option<u64>,
    /// Number of events.
    #[arg(long)]
    pub n: Option<usize>,
    /// `var:start:stop:count[:log]` with var one of eta, delta, epsilon.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Option<String>,
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long)]
    pub json: bool,
    /// Write the main output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Keep only events of --channel (conditioned sampling).
    #[arg(long)]
    pub postselect: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sweep CSV with columns delta,observable,measured,stderr,n_events.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// exact | expansion | lorentzian
    #[arg(long)]
    pub model: Option<String>,
    /// Fit an overall amplitude together with η.
    #[arg(long)]
    pub free_amplitude: bool,
    /// Gauss–Newton iteration budget.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Explicit Δ values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltas: Option<Vec<f64>>,
    /// MeanZ | MeanPz (defaults from --space, else MeanPz).
    #[arg(long)]
    pub observable: Option<String>,
    /// Draw events over both channels instead of conditioning on the retained one.
    #[arg(long)]
    pub all_events: bool,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl CommonArgs {
    pub fn settings(&self) -> Settings {
        Settings {
            pre: self.pre.clone(),
            post: self.post.clone(),
            epsilon: self.epsilon,
            delta: self.delta,
            eta: self.eta,
            w: self.w,
            hbar: self.hbar,
            channel: self.channel.clone(),
            space: self.space.clone(),
            seed: self.seed,
            stream: self.stream,
            n: self.n,
            sweep: self.sweep.clone(),
            ..Settings::default()
        }
    }
}

impl SampleArgs {
    pub fn settings(&self) -> Settings {
        Settings { postselect: flag(self.postselect), ..self.common.settings() }
    }
}

impl FitArgs {
    pub fn settings(&self) -> Settings {
        Settings {
            input: self.input.clone(),
            model: self.model.clone(),
            free_amplitude: flag(self.free_amplitude),
            max_iterations: self.max_iterations,
            ..self.common.settings()
        }
    }
}

impl SimulateArgs {
    pub fn settings(&self) -> Settings {
        Settings {
            deltas: self.deltas.clone(),
            observable: self.observable.clone(),
            all_events: flag(self.all_events),
            ..self.common.settings()
        }
    }
}
