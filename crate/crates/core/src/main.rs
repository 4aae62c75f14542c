use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use eaptop::driver::{emit_outputs, run, ProblemConfig, RunOptions, StopReason};
use eaptop::mesh::build_mesh;

#[derive(Parser)]
#[command(name = "eaptop", version, about = "Topology optimization of EAP actuators with explicit electrodes")]
struct Cli {
    /// Worker threads for element loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization. Exit code 0: converged, 2: iteration cap, 1: error.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Run the built-in self-checks.
    Verify,
    /// Write the mesh of a configuration (defaults without one) as VTK.
    ExportMesh {
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn execute(cli: Cli) -> eaptop::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| eaptop::Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run {
            config,
            out_dir,
            max_iters,
            checkpoint_every,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let opts = RunOptions {
                max_iters,
                checkpoint_every,
                out_dir: Some(out_dir.clone()),
            };
            let outcome = run(&cfg, &opts)?;
            let summary = emit_outputs(&outcome, cfg.phi_p, &out_dir)?;
            println!(
                "{:?} after {} iterations: g0 = {:.6e} mm, g1 = {:.4e}, g2 = {:.4e}",
                summary.stop, summary.iterations, summary.g0, summary.g1, summary.g2
            );
            Ok(match outcome.stop {
                StopReason::Converged => ExitCode::SUCCESS,
                StopReason::IterationCap => ExitCode::from(2),
            })
        }
        Command::Verify => {
            let checks = eaptop::verify::run_all();
            let mut ok = true;
            for c in &checks {
                println!("{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::ExportMesh { config, out_dir } => {
            let cfg = match config {
                Some(p) => ProblemConfig::load(&p)?,
                None => ProblemConfig::default(),
            };
            let mesh = build_mesh(&cfg.mesh)?;
            let grid = mesh.to_vtk();
            let path = out_dir.join("mesh.vtk");
            std::fs::create_dir_all(&out_dir).map_err(|e| eaptop::Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            grid.write(&path)?;
            println!(
                "{} nodes, {} elements ({} design) -> {}",
                mesh.nodes.len(),
                mesh.elements.len(),
                mesh.n_design(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
