use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use prefpcp_core::embed::DEFAULT_GRID;
use prefpcp_core::ingest::{generate_synthetic, SyntheticSpec};
use prefpcp_core::pcpmodel::{render_svg, DEFAULT_TOP_K};
use prefpcp_core::pipeline::{Analysis, Selection};
use prefpcp_core::{fit_front, pareto_front, parse_auto, Dataset, EmbedMethod, EmbedOptions, Error, ErrorKind};
use prefpcp_service::{ServiceConfig, DEFAULT_ADDR, DEFAULT_SESSION_CAP};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;
pub const EXIT_SELECTION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "prefpcp", version, about = "Preference-weighted parallel coordinates for multi-metric evaluations")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the product-form front to the Pareto set and write the model.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Embed the Pareto set, partition it into a lattice and write the radar grid.
    Radar {
        input: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(long, default_value = "grid.json")]
        out: PathBuf,
    },
    /// Derive optimal weights for a cell or point and render the colored plot.
    Render(RenderArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = EmbedMethod::Pca, value_parser = parse_method)]
    method: EmbedMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EmbedArgs {
    fn options(&self) -> EmbedOptions {
        EmbedOptions { method: self.method, seed: self.seed, grid: self.grid }
    }
}

#[derive(Debug, Args)]
struct RenderArgs {
    input: PathBuf,
    /// Lattice cell `I,J` whose mean Pareto solution is the reference.
    #[arg(long, value_parser = parse_cell, conflicts_with = "point", required_unless_present = "point")]
    cell: Option<(usize, usize)>,
    /// Reference point `f1,...,fM` in metric space.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    point: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, default_value_t = 960)]
    width: u32,
    #[arg(long, default_value_t = 540)]
    height: u32,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "PREFPCP_ADDR", default_value = DEFAULT_ADDR)]
    addr: SocketAddr,
    #[arg(long, env = "PREFPCP_SESSION_CAP", default_value_t = DEFAULT_SESSION_CAP)]
    session_cap: usize,
    #[arg(long, env = "PREFPCP_GRID", default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, env = "PREFPCP_METHOD", default_value_t = EmbedMethod::Pca, value_parser = parse_method)]
    method: EmbedMethod,
    #[arg(long, env = "PREFPCP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "PREFPCP_TOP_K", default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    params: usize,
    #[arg(long, default_value_t = 3)]
    metrics: usize,
    #[arg(long, default_value_t = 1000)]
    records: usize,
    /// Product level of the underlying front.
    #[arg(long, default_value_t = 1.0)]
    level: f64,
    /// Scale of the slack added above the front; 0 puts every record on it.
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<EmbedMethod, String> {
    s.parse().map_err(|e: prefpcp_core::embed::EmbedError| e.to_string())
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or_else(|| format!("expected `I,J`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(i)?, parse(j)?))
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Input => EXIT_INPUT,
            ErrorKind::Numeric => EXIT_NUMERIC,
            ErrorKind::Selection => EXIT_SELECTION,
        };
        Self { code, message: format!("{}: {e}", e.name()) }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit { input, out } => fit(&input, &out),
        Command::Radar { input, embed, out } => radar(&input, &embed, &out),
        Command::Render(args) => render(&args),
        Command::Serve(args) => serve(args),
        Command::Synth(args) => synth(&args),
    }
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(parse_auto(&text).map_err(Error::from)?)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("output types serialize");
    s.push('\n');
    s
}

fn fit(input: &Path, out: &Path) -> Result<(), Failure> {
    let dataset = load(input)?;
    let pareto = pareto_front(&dataset);
    let model = fit_front(&pareto).map_err(Error::from)?;
    write(out, &to_json(&model))?;
    let summary = serde_json::json!({"n": dataset.len(), "n_pareto": pareto.len(), "fit_rms": model.fit_rms()});
    println!("{summary}");
    Ok(())
}

fn radar(input: &Path, embed: &EmbedArgs, out: &Path) -> Result<(), Failure> {
    let analysis = Analysis::build(load(input)?, embed.options())?;
    write(out, &to_json(analysis.grid()))?;
    let grid = analysis.grid();
    let summary = serde_json::json!({"grid": grid.grid, "cells": grid.cells.len(), "n_pareto": analysis.pareto().len()});
    println!("{summary}");
    Ok(())
}

fn render(args: &RenderArgs) -> Result<(), Failure> {
    let selection = match (&args.cell, &args.point) {
        (Some((i, j)), None) => Selection::Cell(*i, *j),
        (None, Some(point)) => Selection::Point(point.clone()),
        _ => return Err(Failure::input("exactly one of --cell or --point is required")),
    };
    let analysis = Analysis::build(load(&args.input)?, args.embed.options())?;
    let outcome = analysis.respond(&selection, args.top_k)?;
    if let Some(path) = &args.svg {
        let svg = render_svg(&outcome.pcp, args.width, args.height).map_err(Error::from)?;
        write(path, &svg)?;
    }
    if let Some(path) = &args.json {
        write(path, &to_json(&outcome.pcp))?;
    }
    print!("{}", to_json(&outcome.weights));
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let config = ServiceConfig {
        addr: args.addr,
        session_cap: args.session_cap,
        embed: EmbedOptions { method: args.method, seed: args.seed, grid: args.grid },
        top_k: args.top_k,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::input(e.to_string()))?;
    eprintln!("listening on http://{}", config.addr);
    runtime
        .block_on(prefpcp_service::serve(config))
        .map_err(|e| Failure::input(format!("{}: {e}", args.addr)))
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        n_params: args.params,
        n_metrics: args.metrics,
        n_records: args.records,
        offsets: vec![0.0; args.metrics],
        level: args.level,
        noise: args.noise,
        seed: args.seed,
    };
    let csv = generate_synthetic(&spec).map_err(Error::from)?.to_csv();
    match &args.out {
        Some(path) => write(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
