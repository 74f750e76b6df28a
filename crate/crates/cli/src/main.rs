//! `olsr`: synthesize features, train the detector, score, evaluate, sweep λ
//! and verify the affine reconstruction bound.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use olsr_core::data::OodKind;
use olsr_core::nn::ReconLoss;
use olsr_core::scoring::{Distance, Framework};

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "olsr",
    version,
    about = "Layerwise semantic reconstruction OoD detector"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic AVF1 feature file.
    Synth(SynthArgs),
    /// Train encoder and decoders, calibrate on validation features.
    Train(TrainArgs),
    /// Score a feature file with a trained model.
    Score(ScoreArgs),
    /// Compute OoD metrics from two score files.
    Eval(EvalArgs),
    /// Train one model per λ and compare layerwise vs basic AUROC.
    Sweep(SweepArgs),
    /// Check the piecewise-affine decomposition and reconstruction bound.
    VerifyAffine(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Id,
    Shifted,
    ScaledNorm,
    Uniform,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "id")]
    kind: SynthKind,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    mean_scale: Option<f64>,
    #[arg(long)]
    within_sigma: Option<f64>,
    /// Seed of the class-mean geometry; shared by ID and OoD sets.
    #[arg(long)]
    cluster_seed: Option<u64>,
    /// Seed of the sample draws.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    multiplier: Option<f64>,
    #[arg(long)]
    shift: Option<f64>,
}

/// Training hyperparameter overrides.
#[derive(Debug, Args, Default)]
struct TrainOverrides {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    detach_l2_target: bool,
    /// ε = k·σ multiplier for every factor.
    #[arg(long)]
    epsilon_multiplier: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Norm,
    Squared,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labeled ID training features (AVF1, or CSV with a .csv extension).
    #[arg(long)]
    train: PathBuf,
    /// Held-out ID validation features; split from --train when absent.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Initial encoder weights as JSON {"rows": C, "cols": H, "data": [...]}.
    #[arg(long)]
    init_encoder: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Training log; defaults to `<model>.json`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    overrides: TrainOverrides,
}

/// Scoring ablation switches.
#[derive(Debug, Args, Default)]
struct ScoringFlags {
    #[arg(long, value_enum)]
    distance: Option<DistanceArg>,
    /// Score combination; `basic` uses the feature residual factor alone.
    #[arg(long, value_enum, alias = "score")]
    framework: Option<FrameworkArg>,
    /// Score with every ε set to zero.
    #[arg(long)]
    no_epsilon: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistanceArg {
    Nl2,
    L2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FrameworkArg {
    Layerwise,
    Basic,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Decision threshold; read from the training log when absent.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    train_log: Option<PathBuf>,
    /// ID validation features used to refit the Gaussians (needed for --distance l2).
    #[arg(long)]
    recalibrate: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Scores of ID samples (score CSV or JSON).
    #[arg(long)]
    id: PathBuf,
    /// Scores of OoD samples.
    #[arg(long)]
    ood: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    /// ID test features.
    #[arg(long)]
    id_test: PathBuf,
    /// One or more OoD feature files.
    #[arg(long, required = true, num_args = 1..)]
    ood: Vec<PathBuf>,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Spectral,
    Frobenius,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Features whose samples are decomposed along v ↦ D1(Wv).
    #[arg(long)]
    features: PathBuf,
    /// At most this many samples are checked.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "spectral")]
    norm: NormArg,
    /// Comma-separated input norms for the norm-bias table.
    #[arg(long, value_delimiter = ',')]
    norms: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { t.$field = v; }
            )*};
        }
        set!(
            lambda,
            temperature,
            lr,
            batch_size,
            epochs,
            seed,
            epsilon_multiplier,
            val_fraction
        );
        if let Some(w) = self.hidden_width {
            t.hidden_width = Some(w);
        }
        if let Some(l) = self.loss {
            t.loss = match l {
                LossArg::Norm => ReconLoss::Norm,
                LossArg::Squared => ReconLoss::Squared,
            };
        }
        if self.detach_l2_target {
            t.detach_l2_target = true;
        }
        if self.epsilon_multiplier.is_some() {
            t.epsilon_multipliers = None;
        }
    }
}

impl ScoringFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = self.distance {
            cfg.scoring.distance = match d {
                DistanceArg::Nl2 => Distance::Nl2,
                DistanceArg::L2 => Distance::L2,
            };
        }
        if let Some(f) = self.framework {
            cfg.scoring.framework = match f {
                FrameworkArg::Layerwise => Framework::Layerwise,
                FrameworkArg::Basic => Framework::Basic,
            };
        }
        if self.no_epsilon {
            cfg.scoring.epsilon = false;
        }
    }
}

impl SynthArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Option<OodKind> {
        let s = &mut cfg.synth;
        macro_rules! set {
            ($($arg:ident => $field:ident),*) => {$(
                if let Some(v) = self.$arg { s.$field = v; }
            )*};
        }
        set!(classes => classes, dim => dim, samples => samples, mean_scale => mean_scale,
             within_sigma => within_sigma, cluster_seed => cluster_seed, seed => seed,
             multiplier => ood_norm_multiplier, shift => ood_shift);
        let kind = match self.kind {
            SynthKind::Id => None,
            SynthKind::Shifted => Some(OodKind::Shifted),
            SynthKind::ScaledNorm => Some(OodKind::ScaledNorm),
            SynthKind::Uniform => Some(OodKind::Uniform),
        };
        if let Some(k) = kind {
            s.ood_kind = k;
        }
        kind
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => {
            let kind = args.apply(&mut cfg);
            commands::synth::run(&cfg, kind, &args.out)
        }
        Command::Train(args) => {
            args.overrides.apply(&mut cfg);
            commands::train::run(
                &cfg,
                &commands::train::Paths {
                    train: args.train,
                    val: args.val,
                    init_encoder: args.init_encoder,
                    log: args
                        .log
                        .unwrap_or_else(|| output::sibling(&args.model, "json")),
                    model: args.model,
                },
            )
        }
        Command::Score(args) => {
            args.scoring.apply(&mut cfg);
            commands::score::run(
                &cfg,
                &commands::score::Request {
                    model: args.model,
                    features: args.features,
                    out: args.out,
                    json: args.format == FormatArg::Json,
                    threshold: args.threshold,
                    train_log: args.train_log,
                    recalibrate: args.recalibrate,
                },
            )
        }
        Command::Eval(args) => commands::eval::run(&args.id, &args.ood, args.out.as_deref()),
        Command::Sweep(args) => {
            args.overrides.apply(&mut cfg);
            if let Some(l) = args.lambdas {
                cfg.lambdas = l;
            }
            commands::sweep::run(
                &cfg,
                &commands::sweep::Request {
                    train: args.train,
                    val: args.val,
                    id_test: args.id_test,
                    ood: args.ood,
                    out: args.out,
                },
            )
        }
        Command::VerifyAffine(args) => commands::verify::run(&commands::verify::Request {
            model: args.model,
            features: args.features,
            samples: args.samples,
            frobenius: matches!(args.norm, NormArg::Frobenius),
            norms: args.norms,
            out: args.out,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OLSR_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("olsr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
