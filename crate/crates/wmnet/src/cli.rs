//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::commands;
use crate::config::{parse_overrides, RunConfig};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "wmnet", version, about = "Wavelet-masked LDR to HDR video reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired LDR/HDR dataset.
    Synth(RunArgs),
    /// Apply wavelet-domain masking to a dataset and report gamut and band statistics.
    Mask(RunArgs),
    /// Masked self-reconstruction pretraining.
    Pretrain(RunArgs),
    /// Supervised fine-tuning from a pretraining checkpoint.
    Finetune(RunArgs),
    /// Score predictions (a directory or a checkpoint) against ground truth.
    Eval(RunArgs),
    /// Finite-difference gradient audit of every op and parameter.
    Gradcheck(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides of any configuration key, as `--key value` (dashes or
    /// underscores).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    pub overrides: Vec<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut overrides = parse_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            overrides.insert("seed".into(), Value::from(seed));
        }
        if let Some(out) = &self.out {
            overrides.insert("out".into(), Value::from(out.to_string_lossy().into_owned()));
        }
        RunConfig::resolve(self.config.as_deref(), overrides)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let (args, cmd): (&RunArgs, fn(&RunConfig) -> Result<()>) = match &cli.command {
        Command::Synth(a) => (a, commands::cmd_synth),
        Command::Mask(a) => (a, commands::cmd_mask),
        Command::Pretrain(a) => (a, commands::cmd_pretrain),
        Command::Finetune(a) => (a, commands::cmd_finetune),
        Command::Eval(a) => (a, commands::cmd_eval),
        Command::Gradcheck(a) => (a, commands::cmd_gradcheck),
    };
    cmd(&args.resolve()?)
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
