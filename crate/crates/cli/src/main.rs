mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use cdp_core::error::{CdpError, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Method;
use crate::config::{DataConfig, Format, Grid, RunConfig};
use crate::report::{write_atomic, Metadata};

/// Compound Dirichlet process laws, simulation and mixture fitting.
#[derive(Parser, Debug)]
#[command(name = "cdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate replicate paths on [0, horizon].
    Simulate(#[command(flatten)] Common),
    /// Density of S_n (with --n) or of the continuous part of S_t.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t)]
        method: Method,
    },
    /// Distribution function of S_n (with --n) or S_t.
    Cdf {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t)]
        method: Method,
    },
    /// First three raw moments of S_n or S_t.
    Moments(#[command(flatten)] Common),
    /// Moment generating function of S_n on the grid.
    Mgf(#[command(flatten)] Common),
    /// Conjugate posterior model from (interarrival, mark) data, written as a config.
    Posterior {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        time_col: Option<String>,
        #[arg(long)]
        mark_col: Option<String>,
    },
    /// Fit Dirichlet process mixtures to dated (and located) event records.
    FitDpm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        date_col: Option<String>,
        #[arg(long)]
        x_col: Option<String>,
        #[arg(long)]
        y_col: Option<String>,
        #[arg(long)]
        delimiter: Option<char>,
        /// Drop malformed rows instead of failing.
        #[arg(long)]
        skip_invalid: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output file, or directory for several CSV tables; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "CDP_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Fixed number of summands.
    #[arg(long)]
    n: Option<usize>,
    /// start:stop:points or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    epsilon0: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.output {
            cfg.output.path = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = Some(t);
        }
        if let Some(n) = self.n {
            cfg.n = Some(n);
        }
        if let Some(g) = &self.grid {
            cfg.grid = Some(Grid::parse(g)?);
        }
        if let Some(p) = self.paths {
            cfg.simulation.paths = p;
        }
        if let Some(m) = self.max_n {
            cfg.truncation.max_n = m;
        }
        if let Some(e) = self.epsilon0 {
            cfg.truncation.epsilon0 = e;
        }
        cfg.truncation.validate()?;
        Ok(cfg)
    }

    fn init_threads(&self) -> Result<()> {
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(CdpError::Config("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| CdpError::Resource(format!("cannot start {t} threads: {e}")))?;
        }
        Ok(())
    }
}

fn data_section<'a>(cfg: &'a mut RunConfig, path: &Option<PathBuf>) -> &'a mut DataConfig {
    if let Some(p) = path {
        match &mut cfg.data {
            Some(d) => d.path = p.clone(),
            None => cfg.data = Some(DataConfig::new(p.clone())),
        }
    }
    // a placeholder path fails later with a data error naming it
    cfg.data.get_or_insert_with(|| DataConfig::new(PathBuf::new()))
}

fn run(cli: Cli) -> Result<()> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Density { common, .. } => ("density", common),
        Command::Cdf { common, .. } => ("cdf", common),
        Command::Moments(c) => ("moments", c),
        Command::Mgf(c) => ("mgf", c),
        Command::Posterior { common, .. } => ("posterior", common),
        Command::FitDpm { common, .. } => ("fit-dpm", common),
    };
    common.init_threads()?;
    let mut cfg = common.resolve()?;

    match &cli.command {
        Command::Posterior {
            data,
            time_col,
            mark_col,
            ..
        } => {
            if data.is_none() && cfg.data.is_none() {
                return Err(CdpError::Config("posterior needs --data or a 'data' section".into()));
            }
            let d = data_section(&mut cfg, data);
            if let Some(c) = time_col {
                d.time_col = c.clone();
            }
            if let Some(c) = mark_col {
                d.mark_col = c.clone();
            }
        }
        Command::FitDpm {
            data,
            chains,
            date_col,
            x_col,
            y_col,
            delimiter,
            skip_invalid,
            ..
        } => {
            if data.is_none() && cfg.data.is_none() {
                return Err(CdpError::Config("fit-dpm needs --data or a 'data' section".into()));
            }
            let d = data_section(&mut cfg, data);
            if let Some(c) = date_col {
                d.date_col = c.clone();
            }
            if let Some(c) = x_col {
                d.x_col = c.clone();
            }
            if let Some(c) = y_col {
                d.y_col = c.clone();
            }
            if let Some(c) = delimiter {
                d.delimiter = *c;
            }
            d.skip_invalid |= *skip_invalid;
            if let Some(c) = chains {
                cfg.dpm.get_or_insert_with(Default::default).chains = *c;
            }
        }
        _ => {}
    }

    let meta = Metadata::new(name, &cfg.hash());
    log::info!("{name}: config sha256 {}", cfg.hash());
    let out = cfg.output.path.clone();
    let format = cfg.output.format;
    let report = match &cli.command {
        Command::Simulate(_) => commands::simulate(&cfg, meta)?,
        Command::Density { method, .. } => commands::density(&cfg, *method, meta)?,
        Command::Cdf { method, .. } => commands::cdf(&cfg, *method, meta)?,
        Command::Moments(_) => commands::moments(&cfg, meta)?,
        Command::Mgf(_) => commands::mgf(&cfg, meta)?,
        Command::FitDpm { .. } => commands::fit_dpm(&cfg, meta)?,
        Command::Posterior { .. } => {
            let post = commands::posterior(&cfg, meta)?;
            let mut text = serde_json::to_string_pretty(&post).expect("config serializes");
            text.push('\n');
            match &out {
                Some(p) => write_atomic(p, text.as_bytes())?,
                None => print!("{text}"),
            }
            return Ok(());
        }
    };
    report.write(out.as_deref(), format)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
