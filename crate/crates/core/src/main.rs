use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pairflow::gallery::{self, report, Command, RunFlags, Scenario};

#[derive(Parser)]
#[command(name = "pairflow", version, about = "Run geometric structure scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the defining conditions of the structure.
    Validate(Args),
    /// Solve for Reeb fields and check their commutation.
    Reeb(Args),
    /// Periods, basic primitives, basic cohomology and monodromy.
    Cohomology(Args),
    /// Necessity check and Moser/Gray isotopy.
    Moser(Args),
    /// Every task of the scenario.
    All(Args),
    /// List builtin scenario names.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file, or `builtin:<name>`.
    #[arg(long)]
    scenario: String,
    /// Grid points per coordinate.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of t samples in [0, 1].
    #[arg(long)]
    t_samples: Option<usize>,
    /// Integrator steps over [0, 1].
    #[arg(long)]
    t_steps: Option<usize>,
    /// Number of seed points for the isotopy.
    #[arg(long)]
    seeds: Option<usize>,
    /// Fourier order of the spectral basis.
    #[arg(long)]
    fourier_order: Option<usize>,
    /// Local error tolerance of the integrator.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "table")]
    report: Format,
    /// Also write the JSON report into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(spec: &str) -> pairflow::Result<Scenario> {
    match spec.strip_prefix("builtin:") {
        Some(name) => gallery::builtin(name),
        None => gallery::load_scenario(Path::new(spec)),
    }
}

fn execute(command: Command, args: &Args) -> pairflow::Result<bool> {
    let scenario = load(&args.scenario)?;
    let flags = RunFlags {
        grid: args.grid,
        t_samples: args.t_samples,
        t_steps: args.t_steps,
        seeds: args.seeds,
        fourier_order: args.fourier_order,
        tol: args.tol,
    };
    let rep = gallery::run(&scenario, command, &flags)?;
    let json = report::to_json(&rep);
    match args.report {
        Format::Json => println!("{json}"),
        Format::Table => print!("{}", report::to_table(&rep)),
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let file = dir.join(format!("{}-{}.json", rep.scenario.replace('~', "_"), command.name()));
        std::fs::write(file, json + "\n")?;
    }
    Ok(rep.matched)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Reeb(a) => (Command::Reeb, a),
        Cmd::Cohomology(a) => (Command::Cohomology, a),
        Cmd::Moser(a) => (Command::Moser, a),
        Cmd::All(a) => (Command::All, a),
        Cmd::List => {
            for name in gallery::builtin::all_names() {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match execute(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
