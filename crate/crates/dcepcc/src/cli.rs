//! Argument parsing and dispatch. Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 failed check.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::commands::{self, DataSource, Generator};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::gradcheck::Fault;
use crate::grid::{GridSpec, Space};

/// Environment variable holding the log filter (`error` … `trace`).
pub const LOG_ENV: &str = "DCEPCC_LOG";

#[derive(Debug, Parser)]
#[command(name = "dcepcc", version, about = "Deep compact polyhedral conic classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat TOML file with training, model and protocol keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides a config key, e.g. `--set kappa=0.7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Seed for training, splits and generators; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeneratorArg {
    Blobs,
    Arc,
    FarCluster,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "generator")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Synthetic data instead of a file.
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorArg>,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Samples per class (positives for `arc`).
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Generator seed; defaults to the run seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
}

impl DataArgs {
    fn source(&self, seed: u64) -> CliResult<DataSource> {
        match (&self.data, self.generator) {
            (Some(path), None) => Ok(DataSource::Csv { path: path.clone(), label_column: self.label_column.clone() }),
            (None, Some(g)) => Ok(DataSource::Generated {
                generator: match g {
                    GeneratorArg::Blobs => Generator::Blobs,
                    GeneratorArg::Arc => Generator::Arc,
                    GeneratorArg::FarCluster => Generator::FarCluster,
                },
                classes: self.classes,
                per_class: self.per_class,
                dim: self.dim,
                spread: self.spread,
                seed: self.data_seed.unwrap_or(seed),
            }),
            _ => Err(CliError::Usage("give exactly one of --data or --generator".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint and per-epoch metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Metrics CSV; defaults to the checkpoint path with `.metrics.csv`.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Closed-set accuracy and one-vs-rest average precision.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Classes scored one-vs-rest; all classes when given without values.
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        one_vs_rest: Option<Vec<usize>>,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Known/unknown protocol for the conic head and the soft-max baseline.
    Openset {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        known: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Comparison table CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conic scores of one class over a regular 2D grid.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        class: usize,
        /// `xmin,xmax,ymin,ymax`.
        #[arg(long, default_value = "-3,3,-3,3", value_delimiter = ',', allow_hyphen_values = true)]
        bounds: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = SpaceArg::Feature)]
        space: SpaceArg,
        /// Two coordinates spanned by the grid, e.g. `0,3`.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<usize>>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
        classes: Vec<usize>,
        #[arg(long, hide = true)]
        inject_fault: bool,
        /// Report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    Feature,
    Input,
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut config = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => commands::write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Train { common, data, out, metrics } => {
            let config = load_config(&common)?;
            let dataset = data.source(config.seed)?.load()?;
            let outcome = commands::train(&dataset, &config)?;
            let metrics = metrics.unwrap_or_else(|| out.with_extension("metrics.csv"));
            outcome.checkpoint.save(&out)?;
            commands::write_file(&metrics, &commands::metrics_csv(&outcome.history))?;
            let last = outcome.history.last().expect("at least one epoch");
            println!("epochs {}", outcome.history.len());
            println!("final_loss {}", last.loss.total);
            println!("train_accuracy {}", outcome.final_accuracy);
            println!("checkpoint {}", out.display());
            println!("metrics {}", metrics.display());
        }
        Command::Eval { common, data, checkpoint, one_vs_rest, out } => {
            let config = load_config(&common)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let dataset = data.source(config.seed)?.load()?;
            let classes = match one_vs_rest {
                Some(list) if list.is_empty() => (0..ckpt.model()?.num_classes()).collect(),
                Some(list) => list,
                None => Vec::new(),
            };
            let record = commands::evaluate(&ckpt, &dataset, &classes)?;
            println!("samples {}", record.samples);
            println!("accuracy {}", record.accuracy);
            for ap in &record.one_vs_rest_ap {
                match &ap.name {
                    Some(name) => println!("ap class {} ({name}) {}", ap.class, ap.ap),
                    None => println!("ap class {} {}", ap.class, ap.ap),
                }
            }
            if let Some(path) = out {
                let mut text = serde_json::to_string_pretty(&record).expect("finite report");
                text.push('\n');
                commands::write_file(&path, &text)?;
            }
        }
        Command::Openset { common, data, known, repeats, out } => {
            let mut config = load_config(&common)?;
            config.known = known.unwrap_or(config.known);
            config.repeats = repeats.unwrap_or(config.repeats);
            config.validate()?;
            let dataset = data.source(config.seed)?.load()?;
            let rows = commands::openset(&dataset, &config)?;
            let mut mismatch = false;
            for r in &rows {
                println!(
                    "run {} known {:?} split_hash dcepcc {:016x} softmax {:016x} auroc dcepcc {:.4} softmax {:.4} closed_acc dcepcc {:.4} softmax {:.4}",
                    r.run, r.known, r.split_hash_dcepcc, r.split_hash_softmax, r.auroc_dcepcc, r.auroc_softmax, r.closed_acc_dcepcc, r.closed_acc_softmax
                );
                mismatch |= r.split_hash_dcepcc != r.split_hash_softmax;
            }
            let table = commands::openset_table(&rows);
            print!("{}", table.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
            if let Some(path) = out {
                commands::write_file(&path, &table)?;
            }
            if mismatch {
                return Err(CliError::Check("the two pipelines saw different splits".into()));
            }
        }
        Command::Grid { common, checkpoint, class, bounds, resolution, space, axes, out } => {
            load_config(&common)?;
            if bounds.len() != 4 {
                return Err(CliError::Usage("--bounds takes xmin,xmax,ymin,ymax".into()));
            }
            if axes.as_ref().is_some_and(|a| a.len() != 2) {
                return Err(CliError::Usage("--axes takes two coordinates".into()));
            }
            let ckpt = Checkpoint::load(&checkpoint)?;
            let spec = GridSpec {
                class,
                bounds: [bounds[0], bounds[1], bounds[2], bounds[3]],
                resolution,
                space: match space {
                    SpaceArg::Feature => Space::Feature,
                    SpaceArg::Input => Space::Input,
                },
                axes: axes.map(|a| (a[0], a[1])),
            };
            emit(&commands::grid(&ckpt, &spec)?, out.as_ref())?;
        }
        Command::Gradcheck { common, dims, classes, inject_fault, out } => {
            let fault = if inject_fault { Fault::ScaleOffsets } else { Fault::None };
            let result = commands::gradcheck(&dims, &classes, common.seed.unwrap_or(0), fault);
            let text = match &result {
                Ok(text) | Err(CliError::Check(text)) => text.clone(),
                Err(_) => String::new(),
            };
            if !text.is_empty() {
                emit(&text, out.as_ref())?;
                if out.is_some() {
                    print!("{}", text.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
                }
            }
            if let Err(CliError::Check(_)) = result {
                return Err(CliError::Check("gradient check failed".into()));
            }
            result?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
