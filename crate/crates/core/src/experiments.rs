//! Single runs, convergence traces and the throughput-versus-N sweep.
//!
//! CSV output uses a header row, '.' decimals, shortest round-trip float
//! formatting and LF line endings. Rows are assembled in a fixed order, so
//! the same config and seed always give the same bytes.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::baselines::{solve_scheme, validate_solution, SchemeId, SchemeSolution};
use crate::channel::{generate_channels, SystemConfig};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Outcome of one scheme on one channel realization.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scheme: SchemeId,
    pub n: usize,
    pub k: usize,
    pub realization: u64,
    pub rate: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub final_delta: f64,
    pub max_energy_residual: f64,
    pub max_phase_residual: f64,
    pub power: f64,
}

impl RunSummary {
    fn new(sol: &SchemeSolution, n: usize, k: usize, realization: u64) -> Self {
        let res = sol.coeffs.residuals();
        let (outer_iterations, final_delta) = sol
            .outcome
            .as_ref()
            .map_or((0, 0.0), |o| (o.outer_iterations, o.final_delta));
        Self {
            scheme: sol.scheme,
            n,
            k,
            realization,
            rate: sol.rate,
            converged: sol.converged,
            outer_iterations,
            final_delta,
            max_energy_residual: res.max_energy(),
            max_phase_residual: res.max_phase(),
            power: sol.state.power(),
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))
}

fn solve_validated(
    cfg: &ExperimentConfig,
    system: &SystemConfig,
    scheme: SchemeId,
    realization: u64,
) -> Result<SchemeSolution> {
    let channels = generate_channels(system, realization)?;
    let solver = cfg.solver(realization);
    let sol = solve_scheme(scheme, &channels, &solver)?;
    validate_solution(&sol, solver.pt)?;
    Ok(sol)
}

/// Solves every configured scheme on realization 0 at the configured N and K.
pub fn run_single(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let pool = pool(cfg.experiment.workers)?;
    pool.install(|| {
        cfg.experiment
            .schemes
            .par_iter()
            .map(|&s| {
                let sol = solve_validated(cfg, &cfg.system, s, 0)?;
                Ok(RunSummary::new(&sol, cfg.system.n, cfg.system.k, 0))
            })
            .collect()
    })
}

/// One row of the convergence CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub scheme: SchemeId,
    pub k: usize,
    pub throughput: f64,
    pub al_objective: f64,
    pub delta: f64,
    pub rho: f64,
    /// |φ_t,n − φ_r,n| of the auxiliary coefficients.
    pub phase_gaps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub rows: Vec<ConvergenceRow>,
    pub summaries: Vec<RunSummary>,
}

/// Inner-iteration traces of the PDD-based schemes at N = `system.n` for
/// every K in `k_values`, on realization 0.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceRun> {
    cfg.validate()?;
    if let Some(s) = cfg.experiment.schemes.iter().find(|s| !s.is_pdd()) {
        return Err(Error::Config(format!(
            "scheme {s} has no PDD trace; convergence runs accept coupled_pdd, independent_star, conventional_ris"
        )));
    }
    let jobs: Vec<(usize, SchemeId)> = cfg
        .experiment
        .k_values
        .iter()
        .flat_map(|&k| cfg.experiment.schemes.iter().map(move |&s| (k, s)))
        .collect();
    let pool = pool(cfg.experiment.workers)?;
    let results: Vec<Result<(Vec<ConvergenceRow>, RunSummary)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, scheme)| {
                let system = SystemConfig { k, ..cfg.system.clone() };
                let sol = solve_validated(cfg, &system, scheme, 0)?;
                let outcome = sol
                    .outcome
                    .as_ref()
                    .ok_or_else(|| Error::Internal(format!("{scheme} returned no trace")))?;
                let rows = outcome
                    .trace
                    .records
                    .iter()
                    .map(|r| ConvergenceRow {
                        outer_iter: r.outer,
                        inner_iter: r.inner,
                        scheme,
                        k,
                        throughput: r.performance,
                        al_objective: r.al_objective,
                        delta: r.delta,
                        rho: r.rho,
                        phase_gaps: r.phase_gaps.clone(),
                    })
                    .collect();
                Ok((rows, RunSummary::new(&sol, system.n, k, 0)))
            })
            .collect()
    });
    let mut run = ConvergenceRun {
        rows: Vec::new(),
        summaries: Vec::new(),
    };
    for r in results {
        let (rows, summary) = r?;
        run.rows.extend(rows);
        run.summaries.push(summary);
    }
    Ok(run)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let n = rows.iter().map(|r| r.phase_gaps.len()).max().unwrap_or(0);
    let mut out = String::from("outer_iter,inner_iter,scheme,K,throughput,al_objective,delta,rho");
    for i in 1..=n {
        let _ = write!(out, ",dphi_{i}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.outer_iter, r.inner_iter, r.scheme, r.k, r.throughput, r.al_objective, r.delta, r.rho
        );
        for g in &r.phase_gaps {
            let _ = write!(out, ",{g}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub scheme: SchemeId,
    pub mean_rate: f64,
    /// Population standard deviation over realizations.
    pub std_rate: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Every individual solve, in (N, scheme, realization) order.
    pub runs: Vec<RunSummary>,
}

impl SweepResult {
    pub fn unconverged(&self) -> usize {
        self.runs.iter().filter(|r| !r.converged).count()
    }
}

/// Mean sum rate per (N, scheme) at K = `system.k`; all schemes see the
/// same channel draw for a given (N, realization).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let jobs: Vec<(usize, SchemeId, u64)> = e
        .n_values
        .iter()
        .flat_map(|&n| {
            e.schemes
                .iter()
                .flat_map(move |&s| (0..e.realizations as u64).map(move |r| (n, s, r)))
        })
        .collect();
    let pool = pool(e.workers)?;
    let results: Vec<Result<RunSummary>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, scheme, r)| {
                let system = SystemConfig { n, ..cfg.system.clone() };
                let sol = solve_validated(cfg, &system, scheme, r)?;
                Ok(RunSummary::new(&sol, n, system.k, r))
            })
            .collect()
    });
    let runs: Vec<RunSummary> = results.into_iter().collect::<Result<_>>()?;
    let rows = runs
        .chunks(e.realizations)
        .map(|chunk| {
            let rates: Vec<f64> = chunk.iter().map(|r| r.rate).collect();
            let (mean_rate, std_rate) = mean_std(&rates);
            SweepRow {
                n: chunk[0].n,
                scheme: chunk[0].scheme,
                mean_rate,
                std_rate,
                realizations: rates.len(),
            }
        })
        .collect();
    Ok(SweepResult { rows, runs })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("N,scheme,mean_rate,std_rate,realizations\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.n, r.scheme, r.mean_rate, r.std_rate, r.realizations);
    }
    out
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn tiny() -> ExperimentConfig {
        parse_config(
            "[system]\nN = 4\nK = 2\nM = 2\n[experiment]\nrealizations = 2\nn_values = [4, 6]\nk_values = [2]\nschemes = [\"coupled_pdd\", \"independent_star\"]\nworkers = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn sweep_rows_in_order() {
        let cfg = tiny();
        let res = run_sweep(&cfg).unwrap();
        let keys: Vec<(usize, SchemeId)> = res.rows.iter().map(|r| (r.n, r.scheme)).collect();
        assert_eq!(
            keys,
            vec![
                (4, SchemeId::CoupledPdd),
                (4, SchemeId::IndependentStar),
                (6, SchemeId::CoupledPdd),
                (6, SchemeId::IndependentStar)
            ]
        );
        let csv = sweep_csv(&res.rows);
        assert!(csv.starts_with("N,scheme,mean_rate,std_rate,realizations\n"));
        assert!(!csv.contains('\r'));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn single_realization_has_zero_std() {
        let mut cfg = tiny();
        cfg.experiment.realizations = 1;
        let res = run_sweep(&cfg).unwrap();
        assert!(res.rows.iter().all(|r| r.std_rate == 0.0 && r.realizations == 1));
    }

    #[test]
    fn convergence_rejects_non_pdd_and_empty() {
        let mut cfg = tiny();
        cfg.experiment.schemes = vec![SchemeId::CoupledAo];
        assert!(matches!(run_convergence(&cfg), Err(Error::Config(_))));
        cfg.experiment.schemes.clear();
        assert!(run_convergence(&cfg).is_err());
    }

    #[test]
    fn convergence_csv_columns() {
        let cfg = tiny();
        let run = run_convergence(&cfg).unwrap();
        let csv = convergence_csv(&run.rows);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "outer_iter,inner_iter,scheme,K,throughput,al_objective,delta,rho,dphi_1,dphi_2,dphi_3,dphi_4"
        );
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 12));
    }

    #[test]
    fn write_output_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_output(&blocker.join("sub/out.csv"), "a").unwrap_err();
        assert!(err.to_string().contains("file"));
        let ok = dir.path().join("nested/out.csv");
        write_output(&ok, "a\n").unwrap();
        assert_eq!(std::fs::read_to_string(ok).unwrap(), "a\n");
    }
}
