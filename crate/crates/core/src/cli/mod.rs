//! Command-line front end: phantom generation, dose thinning, training,
//! synthesis and evaluation.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::score::{InputCombo, Scheme};

pub use commands::{
    cmd_evaluate, cmd_phantom, cmd_sample, cmd_thin, cmd_train, default_sampler, net_config, subject_dirs, synthesize, synthesize_from,
};
pub use config::{
    load, EvalPair, EvaluateRunConfig, NetSettings, PhantomRunConfig, SampleRunConfig, ThinRunConfig, TrainRunConfig,
};
pub use manifest::{sha256_file, Manifest};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pet-sgm", version, about = "Conditional score-based PET synthesis and evaluation")]
pub struct Cli {
    /// TOML configuration of the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one phantom or a cohort.
    Phantom {
        /// Cohort size; writes sub-XXX directories.
        #[arg(long)]
        n_subjects: Option<usize>,
    },
    /// Simulate a low-dose PET by count thinning.
    Thin {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Train the patch denoiser.
    Train {
        #[arg(long, num_args = 1..)]
        subjects: Vec<PathBuf>,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        inputs: Option<InputCombo>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Synthesize full-dose PET volumes.
    Sample {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        subjects: Vec<PathBuf>,
        #[arg(long)]
        inputs: Option<InputCombo>,
    },
    /// Compare synthetic against acquired PET.
    Evaluate {
        #[arg(long, num_args = 1..)]
        subjects: Vec<PathBuf>,
        #[arg(long)]
        synth_root: Option<PathBuf>,
    },
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli.config.as_deref();
    match &cli.command {
        Command::Phantom { n_subjects } => {
            let mut cfg: PhantomRunConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.phantom.seed = s;
            }
            if let Some(n) = *n_subjects {
                cfg.cohort.get_or_insert_with(Default::default).n_subjects = n;
            }
            cmd_phantom(&cfg, &out_dir(cli)).map(drop)
        }
        Command::Thin { input, fraction } => {
            let mut cfg: ThinRunConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(i) = input {
                cfg.input = i.clone();
            }
            if let Some(f) = *fraction {
                cfg.fraction = f;
            }
            cmd_thin(&cfg, cli.out.as_deref()).map(drop)
        }
        Command::Train {
            subjects,
            scheme,
            inputs,
            steps,
        } => {
            let mut cfg: TrainRunConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.train.seed = s;
            }
            if !subjects.is_empty() {
                cfg.subjects = subjects.clone();
            }
            if let Some(s) = *scheme {
                cfg.scheme = s;
            }
            if let Some(i) = *inputs {
                cfg.inputs = i;
            }
            if let Some(n) = *steps {
                cfg.train.steps = n;
            }
            cmd_train(&cfg, &out_dir(cli)).map(drop)
        }
        Command::Sample {
            model,
            subjects,
            inputs,
        } => {
            let mut cfg: SampleRunConfig = load(path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(m) = model {
                cfg.model = m.clone();
            }
            if !subjects.is_empty() {
                cfg.subjects = subjects.clone();
            }
            if let Some(i) = *inputs {
                cfg.inputs = i;
            }
            cmd_sample(&cfg, &out_dir(cli)).map(drop)
        }
        Command::Evaluate { subjects, synth_root } => {
            let mut cfg: EvaluateRunConfig = load(path)?;
            if !subjects.is_empty() {
                cfg.subjects = subjects.clone();
            }
            if let Some(r) = synth_root {
                cfg.synth_root = Some(r.clone());
            }
            let (_, report) = cmd_evaluate(&cfg, &out_dir(cli))?;
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
