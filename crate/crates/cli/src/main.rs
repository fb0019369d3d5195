//! `elastic-eig`: run eigenvalue convergence studies and export meshes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use elastic_eig::mesh::DirichletSpec;
use elastic_eig::study::{render, run_study, Domain, Format, RunOptions, StudyConfig};
use elastic_eig::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "elastic-eig", version, about = "Eigenvalue studies for 2D linear elasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the format named in the config.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Cap on worker threads.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "lanczos")]
        eigensolver: String,
    },
    /// Write a mesh in the plain-text mesh format.
    Mesh {
        #[arg(long, value_enum)]
        domain: DomainArg,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "all")]
        dirichlet: DirichletArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum DomainArg {
    UnitSquare,
    LShape,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirichletArg {
    All,
    Bottom,
}

fn config_error(e: &Error) -> ExitCode {
    eprintln!("elastic-eig: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(config: PathBuf, out: Option<PathBuf>, format: Option<FormatArg>, threads: Option<usize>, eigensolver: String) -> ExitCode {
    let config = match StudyConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    let options = RunOptions { threads, eigensolver, ..Default::default() };
    let result = match run_study(&config, &options) {
        Ok(r) => r,
        Err(e) if e.is_config_error() => return config_error(&e),
        Err(e) => {
            eprintln!("elastic-eig: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    };
    let format = match format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Markdown) => Format::Markdown,
        None => config.format,
    };
    let text = render(&result, format);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("elastic-eig: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{text}"),
    }
    for (nu, rec, msg) in result.failures() {
        eprintln!("elastic-eig: nu = {nu}, level {} failed: {msg}", rec.index + 1);
    }
    if result.has_failures() {
        ExitCode::from(EXIT_SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn mesh(domain: DomainArg, n: usize, dirichlet: DirichletArg, out: PathBuf) -> ExitCode {
    let domain = match domain {
        DomainArg::UnitSquare => Domain::UnitSquare,
        DomainArg::LShape => Domain::LShape,
    };
    let dirichlet = match dirichlet {
        DirichletArg::All => DirichletSpec::All,
        DirichletArg::Bottom => DirichletSpec::Bottom,
    };
    if domain == Domain::LShape && dirichlet != DirichletSpec::All {
        eprintln!("elastic-eig: the L-shape is clamped on the whole boundary");
        return ExitCode::from(EXIT_CONFIG);
    }
    let mesh = match domain.build(n, dirichlet) {
        Ok(m) => m,
        Err(e) => return config_error(&e),
    };
    if let Err(e) = mesh.write_text(&out) {
        eprintln!("elastic-eig: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, format, threads, eigensolver } => run(config, out, format, threads, eigensolver),
        Command::Mesh { domain, n, dirichlet, out } => mesh(domain, n, dirichlet, out),
    }
}
