use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use star_pdd::experiments::{convergence_csv, run_convergence, run_single, run_sweep, sweep_csv, write_output};
use star_pdd::{load_config, ExperimentConfig, SchemeId};

/// Coupled phase-shift STAR-RIS beamforming experiments.
#[derive(Parser)]
#[command(name = "star-pdd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization and print a summary per scheme.
    Run(Common),
    /// Write per-iteration PDD traces for every K in `k_values`.
    Converge(Common),
    /// Write mean throughput versus element count.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; realization r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme names, e.g. coupled_pdd,independent_star.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeId>>,
    #[arg(long)]
    realizations: Option<usize>,
}

impl Common {
    fn load(&self) -> star_pdd::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.system.seed = s;
        }
        if let Some(s) = &self.schemes {
            cfg.experiment.schemes = s.clone();
        }
        if let Some(r) = self.realizations {
            cfg.experiment.realizations = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self, cfg: &ExperimentConfig, default_name: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| cfg.experiment.output.join(default_name))
    }
}

fn execute(cli: Cli) -> star_pdd::Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let runs = run_single(&cfg)?;
            println!("N={} K={} seed={}", cfg.system.n, cfg.system.k, cfg.system.seed);
            println!(
                "{:<18} {:>10} {:>9} {:>6} {:>10} {:>10} {:>10}",
                "scheme", "rate", "converged", "outer", "delta", "energy", "phase"
            );
            for r in &runs {
                println!(
                    "{:<18} {:>10.4} {:>9} {:>6} {:>10.2e} {:>10.2e} {:>10.2e}",
                    r.scheme.name(),
                    r.rate,
                    r.converged,
                    r.outer_iterations,
                    r.final_delta,
                    r.max_energy_residual,
                    r.max_phase_residual
                );
            }
            Ok(runs.iter().all(|r| r.converged))
        }
        Command::Converge(args) => {
            let mut cfg = args.load()?;
            // the default scheme list includes non-PDD schemes; trace the coupled solver instead
            if args.schemes.is_none() && cfg.experiment.schemes == SchemeId::ALL.to_vec() {
                cfg.experiment.schemes = vec![SchemeId::CoupledPdd];
            }
            let run = run_convergence(&cfg)?;
            let path = args.out(&cfg, "convergence.csv");
            write_output(&path, &convergence_csv(&run.rows))?;
            println!("wrote {} rows to {}", run.rows.len(), path.display());
            Ok(run.summaries.iter().all(|r| r.converged))
        }
        Command::Sweep(args) => {
            let cfg = args.load()?;
            let res = run_sweep(&cfg)?;
            let path = args.out(&cfg, "sweep.csv");
            write_output(&path, &sweep_csv(&res.rows))?;
            for r in &res.rows {
                println!("N={:<3} {:<18} mean {:.4} std {:.4}", r.n, r.scheme.name(), r.mean_rate, r.std_rate);
            }
            println!("wrote {}", path.display());
            let bad = res.unconverged();
            if bad > 0 {
                eprintln!("{bad} solve(s) did not reach the violation threshold");
            }
            Ok(bad == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
