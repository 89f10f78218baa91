//! Command-line front end for `inducer-core`: configuration, artifact files
//! and the `inducer` binary.
//!
//! Exit codes: `0` success, `1` domain error, `2` usage or configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::commands::CmdResult;
use crate::config::{ConfigError, RunConfig};
use crate::output::{sha256_hex, Artifacts, Manifest, Versions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "inducer", version, about = "Inducing schemes and statistical stability for interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` and $INDUCER_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the expansion, recurrence and preimage hypotheses.
    Hypotheses(Common),
    /// Build the critical partition and binding periods.
    Partition(Common),
    /// Build the induced map with per-branch diagnostics and the tail.
    Induce(Common),
    /// Return-time tail and its exponential fit.
    Tail(Common),
    /// Invariant density by the configured method.
    Density(Common),
    /// Distance between the configured map and its comparison map.
    Distance(Common),
    /// Density L1 against map distance along a parameter axis.
    Stability(Common),
    /// Level-set overlap of two nearby induced maps.
    Overlap(Common),
    /// Agreement of Birkhoff densities from disjoint seed clouds.
    Uniqueness(Common),
    /// Hypotheses, induced map and density in one directory.
    Report(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common, fn(&RunConfig, &mut Artifacts) -> CmdResult) {
        match self {
            Command::Hypotheses(c) => ("hypotheses", c, commands::hypotheses),
            Command::Partition(c) => ("partition", c, commands::partition),
            Command::Induce(c) => ("induce", c, commands::induce),
            Command::Tail(c) => ("tail", c, commands::tail),
            Command::Density(c) => ("density", c, commands::density),
            Command::Distance(c) => ("distance", c, commands::distance),
            Command::Stability(c) => ("stability", c, commands::stability),
            Command::Overlap(c) => ("overlap", c, commands::overlap),
            Command::Uniqueness(c) => ("uniqueness", c, commands::uniqueness),
            Command::Report(c) => ("report", c, commands::report),
        }
    }
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (name, common, cmd) = cli.command.parts();
    let started = Instant::now();

    let raw = match std::fs::read(&common.config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return EXIT_USAGE;
        }
    };
    let cfg = match std::str::from_utf8(&raw)
        .map_err(|e| ConfigError::Parse { line: 0, column: 0, message: e.to_string() })
        .and_then(RunConfig::from_json)
    {
        Ok(c) => c,
        Err(ConfigError::Domain(e)) => {
            eprintln!("error: {}: {e}", common.config.display());
            return EXIT_DOMAIN;
        }
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return EXIT_USAGE;
        }
    };
    if common.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return EXIT_USAGE;
    }

    let dir = common.out.clone().unwrap_or_else(|| cfg.output_dir());
    let mut out = match Artifacts::create(&dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_DOMAIN;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return EXIT_DOMAIN;
        }
    };
    let workers = pool.current_num_threads();
    let result = pool.install(|| cmd(&cfg, &mut out));
    let summary = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DOMAIN;
        }
    };

    let records = out.records().to_vec();
    let manifest = Manifest {
        subcommand: name,
        config_sha256: sha256_hex(&raw),
        config: &cfg,
        seed: cfg.seed,
        workers,
        versions: Versions::current(),
        wall_time_s: started.elapsed().as_secs_f64(),
        artifacts: &records,
    };
    if let Err(e) = out.write_json("manifest.json", &manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_DOMAIN;
    }
    println!("{summary}");
    println!("artifacts in {}", dir.display());
    EXIT_OK
}
