//! `anosov`: batch runner for the transfer-operator experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anosov_core::io::{self, Provenance};
use anosov_core::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::Resolved;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hyperbolicity constants of the map
    Constants,
    /// Leaf covers of T^{-n}W and their partitions of unity
    Leafcover,
    /// Anisotropic norm estimates of the observables
    Norm,
    /// Lasota-Yorke table for the first observable
    Ly,
    /// Leading Galerkin eigenvalues
    Spectrum,
    /// SRB density on a grid
    Srb,
    /// Correlation sequence of the first two observables
    Correlations,
    /// Operator difference against map distance
    Mapdist,
    /// Norm growth under a random kernel
    RandomLy,
    /// Projector stability along a calibrated kernel ladder
    Stability,
    /// Resolvent expansion order on the synthetic scale
    ResolventOrder,
    /// Linear response of the SRB measure
    Response,
    /// CLT variance by formula and Monte Carlo
    Variance,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Leafcover => "leafcover",
            Command::Norm => "norm",
            Command::Ly => "ly",
            Command::Spectrum => "spectrum",
            Command::Srb => "srb",
            Command::Correlations => "correlations",
            Command::Mapdist => "mapdist",
            Command::RandomLy => "random-ly",
            Command::Stability => "stability",
            Command::ResolventOrder => "resolvent-order",
            Command::Response => "response",
            Command::Variance => "variance",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "anosov", version, about = "Transfer-operator experiments for perturbed cat maps")]
struct Cli {
    /// Experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config, which overrides $ANOSOV_OUT
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output formats; repeatable
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    #[command(subcommand)]
    command: Command,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn default_out() -> PathBuf {
    std::env::var_os("ANOSOV_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

fn execute(cli: &Cli, out: &mut PathBuf) -> anosov_core::Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::InvalidParams("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::InvalidParams(e.to_string()))?;
    }
    let cfg = Resolved::load(cli.config.as_deref(), cli.seed)?;
    if cli.out.is_none() {
        if let Some(o) = &cfg.rest.out {
            *out = o.clone();
        }
    }
    let out = out.as_path();
    let formats = if cli.format.is_empty() { vec![Format::Csv, Format::Json] } else { cli.format.clone() };
    let name = cli.command.name();
    let prov = Provenance {
        tool: "anosov".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        command: name.into(),
    };
    let result = commands::run(name, &cfg, &prov, formats.contains(&Format::Svg))?;
    for f in &formats {
        match f {
            Format::Csv => {
                for t in &result.tables {
                    io::write(out, &format!("{}.csv", t.name), &t.to_csv(&prov)?)?;
                }
            }
            Format::Json => {
                let tables: serde_json::Map<String, serde_json::Value> =
                    result.tables.iter().map(|t| (t.name.clone(), commands::cells_to_json(t))).collect();
                let body = json!({ "report": result.report, "tables": tables, "seed": cfg.seed });
                io::write(out, &format!("{}.json", name.replace('-', "_")), &io::to_json(&body, &prov)?)?;
            }
            Format::Svg => {
                for (stem, svg) in &result.figures {
                    io::write(out, &format!("{stem}.svg"), svg)?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = cli.out.clone().unwrap_or_else(default_out);
    match execute(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let body = json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code, "command": cli.command.name() });
            eprintln!("{body}");
            let _ = io::write(&out, "error.json", &format!("{body}\n"));
            ExitCode::from(code)
        }
    }
}
