use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kdvfd_cli::{
    apply_overrides, auto_record_every, emit_convergence_table, fmt17, parse_config,
    run_experiment, DtRuleName, ExperimentPreset, Overrides, PresetName,
};

/// Implicit finite-difference solver for the KdV equation.
#[derive(Debug, Parser)]
#[command(name = "kdvfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write snapshots, diagnostics and a summary.
    Run(RunArgs),
    /// Run a preset at several resolutions and print the error table.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Cfl,
    K2,
    Courant,
}

impl From<RuleArg> for DtRuleName {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Cfl => DtRuleName::Cfl,
            RuleArg::K2 => DtRuleName::K2,
            RuleArg::Courant => DtRuleName::Courant,
        }
    }
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// soliton1, soliton2, l2data or custom
    #[arg(long)]
    preset: Option<String>,
    /// Number of grid cells.
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration file; command-line options take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    dt_rule: Option<RuleArg>,
    /// K in dt = K dx^2.
    #[arg(long)]
    k: Option<f64>,
    /// nu in dt = nu dx / max|u0|.
    #[arg(long)]
    courant: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Keep every m-th step (default: about 20 snapshots).
    #[arg(long)]
    record_every: Option<usize>,
}

#[derive(Debug, clap::Args)]
struct TableArgs {
    #[arg(long, default_value = "soliton1")]
    preset: String,
    /// Comma-separated cell counts.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,4000")]
    n: Vec<usize>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the numerical solution by exact samples.
    #[arg(long)]
    oracle: bool,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => run_cmd(args),
        Command::Table(args) => table_cmd(args),
    }
}

fn run_cmd(args: RunArgs) -> Result<bool> {
    let base = match (&args.config, &args.preset) {
        (Some(path), _) => {
            parse_config(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, Some(name)) => {
            let name: PresetName = name.parse()?;
            ExperimentPreset::builtin(name, args.n.unwrap_or(kdvfd_cli::config::DEFAULT_CELLS))?
        }
        (None, None) => bail!("give --preset or --config"),
    };
    if let (Some(path), Some(name)) = (&args.config, &args.preset) {
        let name: PresetName = name.parse()?;
        if name != base.name {
            bail!("--preset {name} disagrees with preset {} in {}", base.name, path.display());
        }
    }
    let overrides = Overrides {
        n_cells: args.n,
        dt_rule: args.dt_rule.map(Into::into),
        k: args.k,
        courant: args.courant,
        delta: args.delta,
        record_every: args.record_every,
    };
    let mut preset = apply_overrides(base, &overrides)?;
    if args.record_every.is_none() && args.config.is_none() {
        preset.config.record_every = auto_record_every(&preset, 20)?;
    }

    let report = run_experiment(&preset, &args.out)?;
    let s = &report.summary;
    println!("preset      {}", s.preset);
    println!("n_cells     {}", s.n_cells);
    println!("steps       {}", s.steps);
    println!("dt          {}", fmt17(s.dt));
    println!("lambda      {}", fmt17(s.lambda));
    if let Some(e) = s.e_percent {
        println!("E_percent   {} (t = {})", fmt17(e), fmt17(s.compare_time));
    }
    println!(
        "ledger      {} checked, {} L2, {} entropy, {} monotonicity, {} time-difference failures",
        s.steps_checked, s.l2_failures, s.entropy_failures, s.monotonicity_failures, s.alpha_failures
    );
    println!("output      {}", report.output_dir.display());
    Ok(report.exit_ok())
}

fn table_cmd(args: TableArgs) -> Result<bool> {
    let name: PresetName = args.preset.parse()?;
    let first = *args.n.first().context("--n needs at least one cell count")?;
    let base = ExperimentPreset::builtin(name, first)?;
    let report = emit_convergence_table(&base, &args.n, args.out.as_deref(), args.oracle)?;
    if !report.ledger_ok {
        eprintln!("warning: an inequality check failed during the sweep");
    }
    Ok(report.ledger_ok)
}
