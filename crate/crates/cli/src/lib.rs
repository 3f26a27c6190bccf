//! The `td` workbench: argument parsing, config resolution and the
//! experiment drivers. Every command writes CSV tables and a
//! `manifest.json` (resolved config, versions, wall-clock) into `--out`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "td", version, about = "Patterson-Sullivan workbench for discrete subgroups of SL(d,R)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Named preset (see `td presets`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Generator file (see the grammar in the config module docs).
    #[arg(long, global = true, value_name = "FILE")]
    pub generators: Option<PathBuf>,
    /// Root subset, e.g. `1,2`.
    #[arg(long, global = true)]
    pub theta: Option<String>,
    /// Functional as ω-coefficients, e.g. `1:1,2:0.5`.
    #[arg(long, global = true)]
    pub functional: Option<String>,
    #[arg(long, global = true)]
    pub radius: Option<usize>,
    /// Comma separated radii for exponent estimates.
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tol_det: Option<f64>,
    #[arg(long, global = true)]
    pub tol_word: Option<f64>,
    #[arg(long, global = true)]
    pub tol_gap: Option<f64>,
    #[arg(long, global = true)]
    pub tol_transverse: Option<f64>,
    #[arg(long, global = true)]
    pub tol_dedup: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in presets.
    Presets,
    /// Enumerate a word ball and tabulate its spheres.
    Ball,
    /// Cartan projection, weight coordinates and lengths per element.
    Kappa {
        /// A single matrix, row-major, instead of a preset ball.
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Critical exponent estimate with partial sums and counts.
    Delta,
    /// Atomic Patterson measure and its conformality residuals.
    Patterson {
        /// Exponent; defaults to the estimated critical exponent.
        #[arg(long)]
        s: Option<f64>,
        /// Keep only the outer spheres; 0 keeps the whole ball.
        #[arg(long, default_value_t = 1)]
        shell: usize,
    },
    /// Shadow-lemma ratios with a calibrated shadow radius.
    ShadowCheck {
        /// Shadow radius; defaults to the calibrated radius plus one.
        #[arg(long)]
        shadow_radius: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        declared_c: f64,
    },
    /// Manhattan curve of two functionals.
    Manhattan {
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        lambdas: Vec<f64>,
        /// Second functional; defaults to ω_k for the largest k in θ.
        #[arg(long)]
        functional2: Option<String>,
        #[arg(long, default_value_t = 200)]
        probe_words: usize,
    },
    /// Critical exponent of a subgroup against the whole group.
    EntropyDrop {
        /// Named subgroup of the preset, or comma separated words.
        #[arg(long)]
        subgroup: String,
    },
    /// BMS invariance residuals and recurrence diagnostics.
    Flow {
        #[arg(long, default_value_t = 40)]
        horizon: usize,
        #[arg(long, default_value_t = 60)]
        samples: usize,
    },
}

impl CommonArgs {
    /// Config file (if any) with the flags applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.generators {
            c.read_generators(p)?;
        }
        if let Some(v) = &self.preset {
            c.preset = Some(v.clone());
            if self.generators.is_none() {
                c.generators = None;
            }
        }
        if let Some(v) = &self.theta {
            c.theta = Some(v.clone());
        }
        if let Some(v) = &self.functional {
            c.functional = Some(v.clone());
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = &self.radii {
            c.radii = Some(v.clone());
        }
        if let Some(v) = self.budget {
            c.budget = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        let t = &mut c.tolerances;
        for (flag, slot) in [
            (self.tol_det, &mut t.det),
            (self.tol_word, &mut t.word),
            (self.tol_gap, &mut t.gap_min),
            (self.tol_transverse, &mut t.transverse),
            (self.tol_dedup, &mut t.dedup),
        ] {
            if let Some(v) = flag {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("tolerance {v} must be positive")));
                }
                *slot = v;
            }
        }
        Ok(c)
    }
}

/// Parses `args` and runs the command; stdout receives the main table.
pub fn run<I, S>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                e.print()?;
                return Ok(());
            }
            _ => return Err(CliError::Config(e.to_string())),
        },
    };
    run_parsed(&cli)
}

pub fn run_parsed(cli: &Cli) -> Result<(), CliError> {
    let config = cli.common.resolve()?;
    commands::dispatch(&cli.command, &config)
}
