use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use costregime_cli::commands::{self, Preset, Source};
use costregime_cli::io::read_json;
use costregime_cli::{CliError, Result, RunConfig};

#[derive(Parser)]
#[command(name = "costregime", version, about = "Learn cost-effective treatment regimes as decision lists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset with known potential outcomes.
    GenSynthetic {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "asthma")]
        preset: PresetArg,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Binary features for the random preset.
        #[arg(long, default_value_t = 6)]
        features: usize,
        /// Treatments for the random preset.
        #[arg(long, default_value_t = 2)]
        treatments: usize,
    },
    /// Mine frequent patterns.
    MinePatterns(RunArgs),
    /// Fit the propensity and outcome models.
    FitModels(RunArgs),
    /// Learn a decision list.
    Learn(RunArgs),
    /// Evaluate a saved decision list.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        list: PathBuf,
        /// Models from `fit-models` or `learn`; refitted on the data when absent.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Ground truth from `gen-synthetic`.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "predicted")]
        source: SourceArg,
    },
    /// Tune the weights by coordinate ascent on a validation split.
    Tune(RunArgs),
    /// K-fold cross-validation of the learning pipeline.
    CrossValidate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "predicted")]
        source: SourceArg,
    },
    /// Check the library against independent recomputations.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Asthma,
    Misspecified,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Predicted,
    Factual,
    Potential,
}

/// Options shared by every subcommand. Unset options keep the value from
/// `--config`, or the built-in default.
#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration JSON, as echoed in every report.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda_outcome: Option<f64>,
    #[arg(long)]
    lambda_assess: Option<f64>,
    #[arg(long)]
    lambda_treat: Option<f64>,
    #[arg(long)]
    min_support: Option<usize>,
    #[arg(long)]
    max_pattern_len: Option<usize>,
    #[arg(long)]
    max_patterns: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    exploration: Option<f64>,
    #[arg(long)]
    max_list_len: Option<usize>,
    #[arg(long)]
    no_prune: bool,
    #[arg(long)]
    clip_floor: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    pooled_outcome: bool,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    max_assess_cost: Option<f64>,
    #[arg(long)]
    max_treat_cost: Option<f64>,
    #[arg(long)]
    max_cycles: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => read_json::<RunConfig>(p)?.0,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v.into(); })*
            };
        }
        set!(
            data => data, costs => costs, out => out, seed => seed,
            lambda_outcome => lambdas.outcome, lambda_assess => lambdas.assessment,
            lambda_treat => lambdas.treatment, min_support => mining.min_support,
            max_pattern_len => mining.max_pattern_len, iterations => search.iterations,
            exploration => search.exploration, max_list_len => search.max_list_len,
            clip_floor => clip_floor, ridge => ridge, l2 => l2,
            validation_fraction => validation_fraction, folds => folds,
            max_cycles => tuning.max_cycles,
        );
        if let Some(k) = self.max_patterns {
            c.max_patterns = Some(k);
        }
        if let Some(v) = self.max_assess_cost {
            c.constraints.max_avg_assess_cost = Some(v);
        }
        if let Some(v) = self.max_treat_cost {
            c.constraints.max_avg_treat_cost = Some(v);
        }
        if self.no_prune {
            c.search.prune = false;
        }
        if self.pooled_outcome {
            c.pooled_outcome = true;
        }
        c.validate()?;
        Ok(c)
    }
}

fn source(s: SourceArg) -> Source {
    match s {
        SourceArg::Predicted => Source::Predicted,
        SourceArg::Factual => Source::Factual,
        SourceArg::Potential => Source::Potential,
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenSynthetic { run, preset, n, features, treatments } => {
            let preset = match preset {
                PresetArg::Asthma => Preset::Asthma,
                PresetArg::Misspecified => Preset::Misspecified,
                PresetArg::Random => Preset::RandomBinary { features, treatments },
            };
            commands::gen_synthetic(&run.resolve()?, preset, n)
        }
        Command::MinePatterns(run) => commands::mine(&run.resolve()?),
        Command::FitModels(run) => commands::fit(&run.resolve()?),
        Command::Learn(run) => commands::run_learn(&run.resolve()?),
        Command::Evaluate { run, list, models, truth, source: s } => {
            commands::evaluate(&run.resolve()?, &list, models.as_deref(), truth.as_deref(), source(s))
        }
        Command::Tune(run) => commands::tune(&run.resolve()?),
        Command::CrossValidate { run, source: s } => {
            commands::cross_validate_cmd(&run.resolve()?, matches!(s, SourceArg::Factual))
        }
        Command::Verify { run, cases } => commands::verify_cmd(&run.resolve()?, cases),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            match &e {
                CliError::Failed(text) => eprintln!("{text}"),
                _ => eprintln!("error: {e}"),
            }
            log::debug!("exit code {code}");
            ExitCode::from(code as u8)
        }
    }
}
