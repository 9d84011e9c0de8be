use std::fs;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};

use asphdg::asp::{AuxKind, SmootherKind};
use asphdg::assembly::BiharmonicBc;
use asphdg::bench::{reproduce_table_rows, rows_to_csv, rows_to_json, run_experiment, ExperimentConfig, Problem};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    ScalarRd,
    VectorRd,
    Biharmonic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SmootherArg {
    Jacobi,
    Bgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AuxArg {
    Direct,
    Asp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BcArg {
    SimplySupported,
    Clamped,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Run preconditioned CG experiments on statically condensed HDG systems.
#[derive(Parser, Debug)]
#[command(name = "asphdg-bench", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "scalar-rd")]
    problem: ProblemArg,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// polynomial degree; a comma separated list with --table
    #[arg(long, default_value = "1")]
    k: String,
    /// elements per side; the largest N with --table
    #[arg(long = "N", default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    tau1: f64,
    #[arg(long, default_value_t = 1.0)]
    tau2: f64,
    #[arg(long, value_enum, default_value = "bgs")]
    smoother: SmootherArg,
    #[arg(long, value_enum, default_value = "direct")]
    aux: AuxArg,
    #[arg(long, value_enum, default_value = "simply-supported")]
    bc: BcArg,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    maxit: usize,
    /// reproduce table 1, 2, 3 or 4
    #[arg(long)]
    table: Option<u32>,
    /// output file; stdout when absent
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// write zero timings so output is reproducible byte for byte
    #[arg(long)]
    no_timings: bool,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let ks: Vec<u32> = cli
        .k
        .split(',')
        .map(|s| s.trim().parse::<u32>().with_context(|| format!("bad degree {s:?}")))
        .collect::<anyhow::Result<_>>()?;
    if ks.is_empty() {
        bail!("no degree given");
    }
    let problem = match cli.problem {
        ProblemArg::ScalarRd => Problem::ScalarRd,
        ProblemArg::VectorRd => Problem::VectorRd,
        ProblemArg::Biharmonic => Problem::Biharmonic,
    };
    let base = ExperimentConfig {
        problem,
        dim: cli.dim,
        k: ks[0],
        n: cli.n,
        tau1: cli.tau1,
        tau2: cli.tau2,
        smoother: match cli.smoother {
            SmootherArg::Jacobi => SmootherKind::Jacobi,
            SmootherArg::Bgs => SmootherKind::Bgs,
        },
        aux: match cli.aux {
            AuxArg::Direct => AuxKind::Direct,
            AuxArg::Asp => AuxKind::Asp,
        },
        bc: (problem == Problem::Biharmonic).then_some(match cli.bc {
            BcArg::SimplySupported => BiharmonicBc::SimplySupported,
            BcArg::Clamped => BiharmonicBc::Clamped,
        }),
        alpha: cli.alpha,
        tol: cli.tol,
        seed: cli.seed,
        maxit: cli.maxit,
        timings: !cli.no_timings,
    };
    let rows = match cli.table {
        Some(t) => reproduce_table_rows(t, cli.n, &ks, &base)?,
        None => {
            if ks.len() != 1 {
                bail!("a list of degrees needs --table");
            }
            vec![run_experiment(&base)?]
        }
    };
    let text = match cli.format {
        Format::Csv => rows_to_csv(&rows)?,
        Format::Json => rows_to_json(&rows)?,
    };
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {p}"))?,
        None => print!("{text}"),
    }
    Ok(rows.iter().all(|r| r.converged))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some solves did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
