use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vll_cli::config::{parse_config_file, parse_eps_list, Command, Overrides, Parsed, Plot, RunConfig};
use vll_cli::{dispatch, write_error_record, CliError};
use vll_core::fields::BcVariant;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    SolveInviscid,
    SolveViscous,
    SolveLinearized,
    BuildBlayer,
    Residual,
    Converge,
    Linstab,
    Diagnose,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Bc {
    Navier,
    Impermeable,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlotArg {
    Svg,
    None,
}

/// Zero-viscosity limit laboratory for the partially viscous Boussinesq system.
#[derive(Debug, Parser)]
#[command(name = "vll", version)]
struct Args {
    /// Command to run; defaults to the config's `command` key.
    #[arg(value_enum)]
    command: Option<Cmd>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run directory read by `diagnose`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated sweep, e.g. 0.2,0.1,0.05
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    bc: Option<Bc>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long, value_enum)]
    plot: Option<PlotArg>,
    /// Reject unknown config keys even when the file sets `strict = false`.
    #[arg(long)]
    strict: bool,
    /// Exit with status 4 when fitted rates leave their bands.
    #[arg(long)]
    assert: bool,
}

fn command_of(c: Cmd) -> Command {
    match c {
        Cmd::SolveInviscid => Command::SolveInviscid,
        Cmd::SolveViscous => Command::SolveViscous,
        Cmd::SolveLinearized => Command::SolveLinearized,
        Cmd::BuildBlayer => Command::BuildBlayer,
        Cmd::Residual => Command::Residual,
        Cmd::Converge => Command::Converge,
        Cmd::Linstab => Command::Linstab,
        Cmd::Diagnose => Command::Diagnose,
    }
}

fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let parsed = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => Parsed {
            config: RunConfig::default(),
            unknown: vec![],
        },
    };
    if args.strict {
        if let Some(k) = parsed.unknown.first() {
            return Err(vll_cli::ConfigError::new(Some(k), "unknown key").into());
        }
    }
    for k in &parsed.unknown {
        eprintln!("warning: ignoring unknown config key `{k}`");
    }
    let o = Overrides {
        command: args.command.map(command_of),
        out: args.out.clone(),
        input: args.input.clone(),
        eps: args.eps.as_deref().map(parse_eps_list).transpose()?,
        order: args.order,
        alpha: args.alpha,
        bc: args.bc.map(|b| match b {
            Bc::Navier => BcVariant::Navier,
            Bc::Impermeable => BcVariant::ImpermeableOnly,
        }),
        t_end: args.t_end,
        nx: args.nx,
        ny: args.ny,
        plot: args.plot.map(|p| match p {
            PlotArg::Svg => Plot::Svg,
            PlotArg::None => Plot::None,
        }),
        strict: args.strict,
        assert: args.assert,
    };
    Ok(parsed.config.apply(&o))
}

fn set_threads() {
    let Ok(v) = std::env::var("VLL_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring VLL_THREADS={v} (expected a positive integer)"),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    set_threads();
    let command = args.command.map(command_of);
    let (cfg, result) = match resolve(&args) {
        Ok(cfg) => {
            let r = dispatch(&cfg);
            (Some(cfg), r.map(|_| ()))
        }
        Err(e) => (None, Err(e)),
    };
    let Err(e) = result else {
        return ExitCode::SUCCESS;
    };
    let name = cfg
        .as_ref()
        .map(|c| c.command)
        .or(command)
        .map_or("unknown", |c| c.name());
    let record = e.record(name);
    let out = cfg.map(|c| c.io.out).or(args.out);
    if let Some(dir) = out {
        write_error_record(&dir, &record);
    }
    eprintln!("{record}");
    ExitCode::from(e.exit_code() as u8)
}
