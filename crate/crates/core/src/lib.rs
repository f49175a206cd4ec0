//! Coupled phase-shift STAR-RIS beamforming via penalty dual decomposition.
//!
//! The solver alternates exact convex block updates of a weighted-MSE
//! reformulation with closed-form updates of an auxiliary copy of the
//! surface coefficients that carries the amplitude and coupled-phase
//! constraints. See `baselines` for the comparison schemes and
//! `experiments` for the CSV-producing drivers.

// NaN-rejecting guards read `!(x > 0.0)` on purpose; index loops mirror the matrix algebra
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod channel;
pub mod closed_form;
pub mod config;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod pdd;
pub mod star;
pub mod wmmse;

pub use baselines::{solve_scheme, SchemeId, SchemeSolution, SolverConfig};
pub use channel::{generate_channels, ChannelSet, SystemConfig};
pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::{Error, Result};
pub use pdd::PddConfig;
pub use star::{Side, StarCoefficients, Theta};
