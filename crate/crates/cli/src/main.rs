//! `wavehom` command-line driver: runs one experiment, writes CSV tables to
//! `out.dir`, and exits non-zero if any enforced check fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use wavehom::expansion::ExpansionKind;
use wavehom::harness::{self, Context, ExperimentConfig, Report, Table};

#[derive(Parser)]
#[command(name = "wavehom", version, about = "Long-time homogenization experiments for the periodic wave equation")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `out.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Spectral,
    Hyperbolic,
}

#[derive(Subcommand)]
enum Cmd {
    /// Corrector hierarchy and effective coefficients.
    Correctors {
        #[arg(long)]
        hyperbolic: bool,
    },
    /// Bloch eigenvalue against its Taylor polynomials.
    Bloch,
    /// Heterogeneous fine-scale solve with snapshots.
    SolveFine {
        #[arg(long)]
        eps: f64,
        #[arg(long = "T")]
        t_end: f64,
        /// Comma-separated snapshot times.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
    },
    /// Per-mode solutions of the effective equation.
    SolveEffective {
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// One two-scale expansion against the reference solution.
    Expand {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        t: f64,
    },
    /// Error rates in ε for both expansions.
    Converge,
    /// Error growth in time and the naive-cascade exhibit.
    Growth,
    /// Sup-in-time errors as ℓ increases.
    Summability,
    /// Structural and solver cross-checks.
    Crosscheck,
}

fn write_table(dir: &Path, table: &Table) -> Result<()> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out.dir = out.to_string_lossy().into_owned();
    }
    if let Cmd::SolveEffective { variant, ell, eps } = &cli.cmd {
        if let Some(v) = variant {
            cfg.variant = v.clone();
        }
        if let Some(l) = ell {
            cfg.ell = vec![*l];
        }
        if let Some(e) = eps {
            cfg.eps_list = vec![*e];
        }
    }
    if let Cmd::Expand { ell, .. } = &cli.cmd {
        cfg.ell = vec![*ell];
    }
    cfg.validate()?;
    let ctx = Context::new(cfg)?;
    let dir = PathBuf::from(&ctx.cfg.out.dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), ctx.cfg.to_toml_string())?;

    let report: Report = match cli.cmd {
        Cmd::Correctors { hyperbolic } => harness::run_correctors(&ctx, hyperbolic)?,
        Cmd::Bloch => harness::run_bloch(&ctx)?,
        Cmd::SolveFine { eps, t_end, snapshots } => {
            let (rep, traj) = harness::run_solve_fine(&ctx, eps, t_end, &snapshots)?;
            let path = dir.join("trajectory.json");
            fs::write(&path, serde_json::to_vec(&traj)?).with_context(|| format!("writing {}", path.display()))?;
            rep
        }
        Cmd::SolveEffective { .. } => harness::run_solve_effective(&ctx)?,
        Cmd::Expand { kind, ell, eps, t } => {
            let kind = match kind {
                Kind::Spectral => ExpansionKind::Spectral,
                Kind::Hyperbolic => ExpansionKind::Hyperbolic,
            };
            harness::run_expand(&ctx, kind, ell, eps, t)?
        }
        Cmd::Converge => harness::run_convergence(&ctx)?,
        Cmd::Growth => harness::run_time_growth(&ctx)?,
        Cmd::Summability => harness::run_summability(&ctx)?,
        Cmd::Crosscheck => harness::run_crosschecks(&ctx)?,
    };

    for t in &report.tables {
        write_table(&dir, t)?;
    }
    write_table(&dir, &report.checks_table())?;
    for c in &report.checks {
        let tag = match (c.passed, c.diagnostic) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "NOTE",
        };
        eprintln!("{tag} {}: {:.3e} ({})", c.name, c.value, c.target);
    }
    eprintln!("config {} -> {}", ctx.hash, dir.display());
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
