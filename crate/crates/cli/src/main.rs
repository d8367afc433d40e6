//! `permadyn` batch front end.

mod commands;
mod config;
mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Report};
use crate::config::{Command, Overrides};

#[derive(Parser)]
#[command(name = "permadyn", version, about = "Mutual information sweeps for the driven-dissipative LMG model")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Large-N mutual information from the mean-field attractor.
    LmgTheory(Overrides),
    /// Exact finite-N steady states.
    LmgFinite(Overrides),
    /// Ground states of the ferromagnetic Hamiltonian.
    Ground(Overrides),
    /// Floquet multipliers of the limit cycle.
    Floquet(Overrides),
    /// Sector solver against the brute-force reference.
    OracleCheck(Overrides),
}

const CONFIG_ERROR: u8 = 2;
const ROW_FAILURE: u8 = 1;

fn mem_cap() -> Result<Option<usize>, String> {
    match std::env::var("PERMADYN_MEM_CAP_MB") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("PERMADYN_MEM_CAP_MB must be a whole number of megabytes, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, overrides) = match cli.command {
        Sub::LmgTheory(o) => (Command::LmgTheory, o),
        Sub::LmgFinite(o) => (Command::LmgFinite, o),
        Sub::Ground(o) => (Command::Ground, o),
        Sub::Floquet(o) => (Command::Floquet, o),
        Sub::OracleCheck(o) => (Command::OracleCheck, o),
    };
    let setup = config::resolve(command, &overrides).and_then(|c| mem_cap().map(|m| (c, m)));
    let (cfg, mem_cap_mb) = match setup {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if overrides.resume.is_some() && command != Command::LmgFinite {
        eprintln!("error: --resume applies to lmg-finite only");
        return ExitCode::from(CONFIG_ERROR);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cfg.threads {
        pool = pool.num_threads(k);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let ctx = Context {
        mem_cap_mb,
        resume: overrides.resume.clone(),
    };
    let out = pool.install(|| commands::run(command, &cfg, &ctx));

    let written = (|| -> std::io::Result<()> {
        let mut w: Box<dyn Write> = match &cfg.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(std::io::stdout().lock()),
        };
        match &out.report {
            Report::Table(rows) => table::write_table(&mut w, &cfg, rows)?,
            Report::Document(doc) => writeln!(w, "{}", serde_json::to_string_pretty(doc).expect("serializable"))?,
        }
        w.flush()
    })();
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    if out.failures > 0 {
        eprintln!("{} row(s) failed", out.failures);
        return ExitCode::from(ROW_FAILURE);
    }
    ExitCode::SUCCESS
}
