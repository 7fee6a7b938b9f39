mod commands;
mod context;
mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ledstripe_core::harness::{Preset, SweepAxis};
use ledstripe_core::optimizer::ParamKind;
use ledstripe_core::oracle::OracleKind;

/// Rolling-shutter LED trigger simulation, search and evaluation.
#[derive(Parser)]
#[command(name = "ledstripe", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for the run config. Anything not given comes from `--config`
/// or the built-in defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct Global {
    /// TOML run config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `paper-mono` or `paper-color`.
    #[arg(long, global = true)]
    pub preset: Option<Preset>,
    /// `surrogate` or `external:<command>`.
    #[arg(long, global = true)]
    pub oracle: Option<OracleKind>,
    /// Decision threshold; skips calibration.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub attempts: Option<usize>,
    /// Bootstrap repeats for rate means and standard deviations.
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Ambient intensity as a fraction of the LED peak.
    #[arg(long, global = true)]
    pub ambient: Option<f64>,
    /// `pairs.csv` or a directory with one subdirectory per identity.
    /// Defaults to the fixture set under the output directory.
    #[arg(long, global = true)]
    pub pairs: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Render a stripe field and optionally inject it into an image.
    Simulate {
        /// Image to inject into.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Foreground mask for the injection.
        #[arg(long, requires = "image")]
        mask: Option<PathBuf>,
        /// Global phase in red-channel periods.
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
    },
    /// Generate a procedural fixture set.
    Fixtures {
        /// Number of identities.
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Calibrate the oracle threshold on the impostor pairs.
    Calibrate {
        /// Target false accept rate.
        #[arg(long)]
        far: Option<f64>,
    },
    /// Search LED parameters with CMA-ES.
    Optimize {
        /// `mono` or `color`.
        #[arg(long)]
        kind: Option<ParamKind>,
        /// Objective evaluations.
        #[arg(long)]
        budget: Option<usize>,
        /// Impostor pairs used by the objective.
        #[arg(long)]
        max_pairs: Option<usize>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Run the verification protocol.
    Attack,
    /// Run the protocol once per value of one parameter.
    Sweep {
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Comma-separated values: numbers, `a;b` phase pairs, or `row`/`column`.
        #[arg(long)]
        values: Option<String>,
    },
    /// Compare rates on raw and destriped injected images.
    Defend {
        /// Skip destriping (both arms identical).
        #[arg(long)]
        disabled: bool,
    },
    /// Merge the CSV outputs and plot sweep curves.
    Report,
    /// Serve the surrogate over the external oracle line protocol on stdin/stdout.
    #[command(hide = true)]
    ServeOracle {
        #[arg(long)]
        threshold: f64,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Command::ServeOracle { threshold } = cli.command {
        return serve::run(threshold);
    }
    let ctx = context::Context::new(&cli.global)?;
    match cli.command {
        Command::Simulate { image, mask, phase } => commands::simulate(&ctx, image, mask, phase),
        Command::Fixtures { count } => commands::fixtures(&ctx, count),
        Command::Calibrate { far } => commands::calibrate(&ctx, far),
        Command::Optimize {
            kind,
            budget,
            max_pairs,
            resume,
        } => commands::optimize(&ctx, kind, budget, max_pairs, resume),
        Command::Attack => commands::attack(&ctx),
        Command::Sweep { axis, values } => commands::sweep(&ctx, axis, values),
        Command::Defend { disabled } => commands::defend(&ctx, disabled),
        Command::Report => commands::report(&ctx),
        Command::ServeOracle { .. } => unreachable!(),
    }
}
