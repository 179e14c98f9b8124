use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use deltapinn::kernel::KernelFamily;
use deltapinn::reference::fdtd::Boundary;
use deltapinn_cli::commands::{
    cmd_eval, cmd_reference, cmd_train, load_config, print_eval, print_train_summary, EvalArgs, ReferenceArgs,
    ReferenceKind,
};
use deltapinn_cli::config::{default_output_root, parse_time, parse_times};

#[derive(Parser)]
#[command(name = "deltapinn", version, about = "PINN solver for PDEs with point sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOptions {
    /// Config file of `section.key = value` lines (a run manifest works too).
    #[arg(long)]
    config: Option<PathBuf>,
    /// poisson, maxwell or barry-mercer.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $DELTAPINN_OUT/<problem> or runs/<problem>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, applied after the config file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write metrics, checkpoints and a manifest.
    Train(RunOptions),
    /// Evaluate a checkpoint against a reference field.
    Eval {
        #[command(flatten)]
        run: RunOptions,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reference field CSV; generated from the config when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Evaluation mesh nodes per side.
        #[arg(long)]
        mesh: Option<usize>,
        /// Snapshot times for Maxwell, e.g. `2.4ns` or `0.7195`.
        #[arg(long)]
        snapshots: Option<String>,
    },
    /// Generate a reference field.
    Reference {
        /// fdtd, poisson-series or barry-mercer-series.
        kind: String,
        #[arg(long, default_value_t = 400)]
        terms: usize,
        #[arg(long)]
        mesh: Option<usize>,
        #[arg(long, default_value_t = 64)]
        modes: usize,
        /// Number of time slices for the Barry-Mercer series.
        #[arg(long, default_value_t = 8)]
        times: usize,
        #[arg(long, default_value_t = 0.005)]
        resolution: f64,
        #[arg(long, default_value_t = 0.5)]
        courant: f64,
        #[arg(long)]
        t_end: Option<String>,
        /// Comma-separated snapshot times.
        #[arg(long)]
        snapshots: Option<String>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value = "gaussian")]
        kernel: String,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// mur or pec.
        #[arg(long, default_value = "mur")]
        boundary: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(o) => {
            let cfg = load_config(o.config.as_deref(), o.problem.as_deref(), o.seed, o.out.as_deref(), &o.overrides, &[])?;
            print_train_summary(&cmd_train(&cfg)?);
        }
        Command::Eval {
            run: o,
            checkpoint,
            reference,
            mesh,
            snapshots,
        } => {
            let mut overrides = o.overrides.clone();
            if let Some(m) = mesh {
                overrides.push(format!("reference.mesh={m}"));
            }
            if let Some(s) = snapshots {
                let times = parse_times(&s)?;
                let list: Vec<String> = times.iter().map(|t| format!("{t:?}")).collect();
                overrides.push(format!("reference.snapshots={}", list.join(",")));
            }
            let out = o.out.clone().unwrap_or_else(|| default_output_root().join("eval"));
            let cfg = load_config(
                o.config.as_deref(),
                o.problem.as_deref(),
                o.seed,
                Some(&out),
                &overrides,
                &[("weighting.mode", "fixed")],
            )?;
            let err = cmd_eval(
                &cfg,
                &EvalArgs {
                    checkpoint: &checkpoint,
                    reference: reference.as_deref(),
                },
            )?;
            print_eval(&err);
        }
        Command::Reference {
            kind,
            terms,
            mesh,
            modes,
            times,
            resolution,
            courant,
            t_end,
            snapshots,
            stride,
            kernel,
            alpha,
            boundary,
            out,
        } => {
            let args = ReferenceArgs {
                kind: ReferenceKind::parse(&kind).ok_or_else(|| anyhow!("unknown reference kind `{kind}`"))?,
                terms,
                mesh,
                modes,
                times,
                resolution,
                courant,
                t_end: t_end.as_deref().map(parse_time).transpose()?,
                snapshots: snapshots.as_deref().map(parse_times).transpose()?,
                stride,
                kernel: KernelFamily::parse(&kernel).ok_or_else(|| anyhow!("unknown kernel `{kernel}`"))?,
                alpha,
                boundary: match boundary.as_str() {
                    "mur" => Boundary::Mur,
                    "pec" => Boundary::Pec,
                    b => return Err(anyhow!("unknown boundary `{b}`")),
                },
                out: out.unwrap_or_else(|| default_output_root().join("reference")),
            };
            for p in cmd_reference(&args)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
