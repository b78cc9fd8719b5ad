use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctwork::config::RunConfig;

mod commands;

use commands::Failure;

/// Contact triad and contact instanton workbench.
#[derive(Parser, Debug)]
#[command(name = "ctwork", version, about)]
struct Cli {
    /// Run configuration (`key = value` lines)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overrides `out`
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run seed, overrides `seed`
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads, overrides `threads`
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Override one configuration key; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Triad invariants and connection axioms at sampled points
    TriadInfo,
    /// Solve the instanton equations with Dirichlet loops
    Solve,
    /// Locate a closed Reeb orbit and test nondegeneracy
    Orbits,
    /// Spectrum of A_z along the closed orbit
    Spectrum,
    /// Decay analysis of a solved instanton
    Decay,
    /// Identity suite under mesh refinement
    Verify,
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE (got `{s}`)")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let ctx = commands::Context::new(cfg)?;
    match cli.cmd {
        Cmd::TriadInfo => commands::triad_info(&ctx),
        Cmd::Solve => commands::solve(&ctx).map(|_| ()),
        Cmd::Orbits => commands::orbits(&ctx),
        Cmd::Spectrum => commands::spectrum(&ctx),
        Cmd::Decay => commands::decay(&ctx),
        Cmd::Verify => commands::verify(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ctwork: {f}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_override_config() {
        let cli = Cli::parse_from(["ctwork", "solve", "--seed", "5", "--set", "grid.nt=16", "--out", "x"]);
        let cfg = load(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.grid_nt), (5, 16));
        assert_eq!(cfg.out, PathBuf::from("x"));
        let bad = Cli::parse_from(["ctwork", "solve", "--set", "grid.nt"]);
        assert_eq!(load(&bad).unwrap_err().code(), 2);
    }
}
