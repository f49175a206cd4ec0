//! Experiment configuration: a TOML file with `[system]`, `[pdd]` and
//! `[experiment]` tables. Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! [system]
//! N = 20            # also M, K, Pt_dbm, noise_dbm, rician_db, seed, ...
//!
//! [pdd]
//! rho0 = 100.0
//!
//! [experiment]
//! realizations = 20
//! n_values = [10, 20, 30, 40]
//! k_values = [2, 4, 6]
//! schemes = ["coupled_pdd", "independent_star"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{AoLevels, SchemeId, SolverConfig};
use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::pdd::PddConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    /// Channel realizations per sweep point.
    pub realizations: usize,
    /// Element counts of the throughput sweep.
    pub n_values: Vec<usize>,
    /// User counts of the convergence run.
    pub k_values: Vec<usize>,
    pub schemes: Vec<SchemeId>,
    pub ao_amplitude_levels: usize,
    pub ao_phase_levels: usize,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub output: PathBuf,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        let ao = AoLevels::default();
        Self {
            realizations: 20,
            n_values: vec![10, 20, 30, 40],
            k_values: vec![2, 4, 6],
            schemes: SchemeId::ALL.to_vec(),
            ao_amplitude_levels: ao.amplitude,
            ao_phase_levels: ao.phase,
            workers: 0,
            output: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub pdd: PddConfig,
    pub experiment: ExperimentSettings,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.pdd.validate()?;
        let e = &self.experiment;
        let bad = |msg: String| Err(Error::Config(msg));
        if e.realizations == 0 {
            return bad("experiment.realizations must be at least 1".into());
        }
        if e.n_values.is_empty() {
            return bad("experiment.n_values must not be empty".into());
        }
        if let Some(n) = e.n_values.iter().find(|&&n| n == 0) {
            return bad(format!("experiment.n_values contains {n}"));
        }
        if e.k_values.is_empty() {
            return bad("experiment.k_values must not be empty".into());
        }
        if let Some(k) = e.k_values.iter().find(|&&k| k == 0 || k % 2 != 0) {
            return bad(format!("experiment.k_values entries must be positive and even, got {k}"));
        }
        if e.schemes.is_empty() {
            return bad("experiment.schemes must not be empty".into());
        }
        if e.ao_amplitude_levels < 2 || e.ao_phase_levels < 2 {
            return bad("AO codebooks need at least two levels".into());
        }
        Ok(())
    }

    pub fn ao_levels(&self) -> AoLevels {
        AoLevels {
            amplitude: self.experiment.ao_amplitude_levels,
            phase: self.experiment.ao_phase_levels,
        }
    }

    /// Solver settings for one channel realization.
    pub fn solver(&self, realization: u64) -> SolverConfig {
        let mut s = SolverConfig::new(
            self.system.pt_watts(),
            self.pdd.clone(),
            self.system.seed.wrapping_add(realization),
        );
        s.ao = self.ao_levels();
        s
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| format!("line {}: ", text[..s.start.min(text.len())].lines().count().max(1)))
            .unwrap_or_default();
        Error::Config(format!("{line}{}", e.message()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.system.m, 8);
        assert_eq!(cfg.system.pt_dbm, 20.0);
        assert_eq!(cfg.system.noise_dbm, -110.0);
        assert_eq!(cfg.system.rician_db, 3.0);
        assert_eq!(cfg.system.path_loss_exponent, 2.2);
        assert_eq!(cfg.experiment.realizations, 20);
    }

    #[test]
    fn overrides_are_applied() {
        let cfg = parse_config("[system]\nN = 40\nPt_dbm = 10.0\n[experiment]\nschemes = [\"coupled_pdd\"]\n").unwrap();
        assert_eq!(cfg.system.n, 40);
        assert_eq!(cfg.system.pt_dbm, 10.0);
        assert_eq!(cfg.experiment.schemes, vec![SchemeId::CoupledPdd]);
    }

    #[test]
    fn typed_parse_error_with_line() {
        let err = parse_config("[system]\n\nPt_dbm = \"abc\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("invalid type"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config("[system]\nbogus = 1\n").is_err());
        assert!(parse_config("[nonsense]\n").is_err());
        assert!(parse_config("[experiment]\nschemes = [\"magic\"]\n").is_err());
    }

    #[test]
    fn validation_errors() {
        assert!(parse_config("[experiment]\nrealizations = 0\n").is_err());
        assert!(parse_config("[experiment]\nn_values = []\n").is_err());
        assert!(parse_config("[experiment]\nschemes = []\n").is_err());
        assert!(parse_config("[experiment]\nk_values = [3]\n").is_err());
        assert!(parse_config("[pdd]\nc = 1.5\n").is_err());
        assert!(parse_config("[system]\nK = 5\n").is_err());
    }

    #[test]
    fn load_reports_missing_file() {
        let err = load_config(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.toml"));
    }

    #[test]
    fn load_from_disk() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "[system]\nseed = 7").unwrap();
        let cfg = load_config(f.path()).unwrap();
        assert_eq!(cfg.system.seed, 7);
        assert_eq!(cfg.solver(3).init_seed, 10);
    }

    #[test]
    fn scheme_names_round_trip_through_toml() {
        let list: Vec<String> = SchemeId::ALL.iter().map(|s| format!("\"{}\"", s.name())).collect();
        let cfg = parse_config(&format!("[experiment]\nschemes = [{}]", list.join(", "))).unwrap();
        assert_eq!(cfg.experiment.schemes, SchemeId::ALL.to_vec());
    }
}
