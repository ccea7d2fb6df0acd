//! Argument parsing and exit codes for the `ttfs` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{cmd_eval, cmd_gradcheck, cmd_raster, cmd_sweep, cmd_train};

/// Exit status for usage errors (unknown subcommand or flag).
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;
pub const EXIT_DATA: i32 = 5;
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "ttfs", version, about = "Train and analyse time-to-first-spike networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed (overrides `train.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Training-set size (overrides `data.train_subset`).
    #[arg(long)]
    pub subset: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network; writes metrics.csv and model.ttfs.
    Train(Common),
    /// Train over a list of regularization strengths and seeds.
    Sweep(Common),
    /// Compare integral-form and limit-form membrane gradients.
    Gradcheck(Common),
    /// Export spike times of every layer for a few test inputs.
    Raster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Accuracy and sparsity of a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
            if let Some(s) = cfg.sweep.as_mut() {
                s.seeds = vec![seed];
            }
        }
        if let Some(n) = self.subset {
            cfg.data.train_subset = Some(n);
        }
        if let Some(w) = self.workers {
            // Ignore the error if a global pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Architecture { .. } => EXIT_CONFIG,
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
        Error::WrongMagic { .. }
        | Error::Truncated { .. }
        | Error::CountMismatch { .. }
        | Error::Dataset(_)
        | Error::Io { .. } => EXIT_DATA,
        Error::Contract(_) | Error::Csv(_) => EXIT_OTHER,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            cmd_train(&c.resolve()?)?;
        }
        Command::Sweep(c) => {
            let workers = c.workers.unwrap_or(1);
            let points = cmd_sweep(&c.resolve()?, workers)?;
            for p in points {
                println!(
                    "value {:e} seed {}: accuracy {:.4} mean sparsity {:.4}",
                    p.value, p.seed, p.accuracy, p.mean_sparsity
                );
            }
        }
        Command::Gradcheck(c) => {
            for r in cmd_gradcheck(&c.resolve()?)? {
                println!(
                    "n_steps {:e} v_hat {} layer {}: error {:.3e} ({} weights, {} excluded)",
                    r.n_steps as f64, r.v_hat, r.layer, r.error, r.included, r.excluded
                );
            }
        }
        Command::Raster {
            common,
            checkpoint,
            samples,
        } => {
            let path = cmd_raster(&common.resolve()?, checkpoint.as_deref(), samples)?;
            println!("{}", path.display());
        }
        Command::Eval { common, checkpoint } => {
            let e = cmd_eval(&common.resolve()?, &checkpoint)?;
            println!(
                "accuracy {:.4} sparsity {:?} mean {:.4}",
                e.accuracy, e.layer_sparsity, e.mean_sparsity
            );
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
