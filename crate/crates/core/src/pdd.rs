//! Penalty dual decomposition driver.
//!
//! The primal problem is split into the caller's blocks (anything that sees
//! θ = (θ_t, θ_r) through a convex objective) and the auxiliary copy θ̃ that
//! carries the nonconvex surface constraints. The two are tied together by
//! the augmented Lagrangian
//!
//! ```text
//! L = F(x, θ) + 1/(2ρ) Σ_i ‖θ̃_i − θ_i + ρλ_i‖²
//! ```
//!
//! The inner loop cycles exact block minimizers of L, so L never increases.
//! The outer loop either updates the duals (when the violation shrank enough)
//! or shrinks ρ, until `δ = max_i ‖θ̃_i − θ_i‖_∞` drops below a threshold.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::closed_form::{project_independent, project_unit_modulus, update_amplitudes, update_phases};
use crate::error::{Error, Result};
use crate::numerics::norm_inf_diff;
use crate::star::{StarCoefficients, Theta};

/// Largest increase of the augmented Lagrangian tolerated across one block step.
pub const MONOTONICITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PddConfig {
    pub rho0: f64,
    /// Penalty shrink factor, 0 < c < 1.
    pub c: f64,
    pub eta0: f64,
    /// Outer loop stops once δ falls below this.
    pub threshold: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_max: usize,
}

impl Default for PddConfig {
    fn default() -> Self {
        Self {
            rho0: 100.0,
            c: 0.8,
            eta0: 1e-3,
            threshold: 1e-6,
            inner_tol: 1e-4,
            inner_max: 50,
            outer_max: 200,
        }
    }
}

impl PddConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidInput(format!("rho0 must be positive, got {}", self.rho0)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidInput(format!("c must lie in (0, 1), got {}", self.c)));
        }
        if !(self.eta0 >= 0.0) || !(self.threshold > 0.0) || !(self.inner_tol >= 0.0) {
            return Err(Error::InvalidInput("eta0, threshold and inner_tol must be nonnegative (threshold positive)".into()));
        }
        if self.inner_max == 0 || self.outer_max == 0 {
            return Err(Error::InvalidInput("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Penalty factor, duals and violation bookkeeping of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PddState {
    pub rho: f64,
    pub lambda_t: Vec<C64>,
    pub lambda_r: Vec<C64>,
    pub eta: f64,
    pub c: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterAction {
    DualUpdate,
    PenaltyShrink,
}

impl PddState {
    pub fn new(n: usize, config: &PddConfig) -> Self {
        Self {
            rho: config.rho0,
            lambda_t: vec![C64::new(0.0, 0.0); n],
            lambda_r: vec![C64::new(0.0, 0.0); n],
            eta: config.eta0,
            c: config.c,
            delta: f64::INFINITY,
        }
    }

    /// θ̃_i + ρλ_i, the point the primal θ is pulled toward.
    pub fn target(&self, aux: &Theta) -> Theta {
        let f = |a: &[C64], l: &[C64]| a.iter().zip(l).map(|(x, y)| x + y * self.rho).collect();
        Theta {
            t: f(&aux.t, &self.lambda_t),
            r: f(&aux.r, &self.lambda_r),
        }
    }

    /// ϑ_i = −θ_i + ρλ_i, the data of the auxiliary subproblem.
    pub fn vartheta(&self, theta: &Theta) -> Theta {
        let f = |a: &[C64], l: &[C64]| a.iter().zip(l).map(|(x, y)| -x + y * self.rho).collect();
        Theta {
            t: f(&theta.t, &self.lambda_t),
            r: f(&theta.r, &self.lambda_r),
        }
    }

    /// 1/(2ρ) Σ_i ‖θ̃_i − θ_i + ρλ_i‖²
    pub fn penalty(&self, theta: &Theta, aux: &Theta) -> f64 {
        let target = self.target(aux);
        let gap = |a: &[C64], b: &[C64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum() };
        (gap(&target.t, &theta.t) + gap(&target.r, &theta.r)) / (2.0 * self.rho)
    }
}

/// δ = max(‖θ̃_t − θ_t‖_∞, ‖θ̃_r − θ_r‖_∞)
pub fn constraint_violation(theta: &Theta, theta_tilde: &Theta) -> f64 {
    norm_inf_diff(&theta.t, &theta_tilde.t).max(norm_inf_diff(&theta.r, &theta_tilde.r))
}

/// Dual update if δ ≤ η, penalty shrink otherwise; then η ← 0.9 δ.
pub fn outer_step(state: &mut PddState, theta: &Theta, theta_tilde: &Theta) -> OuterAction {
    let delta = constraint_violation(theta, theta_tilde);
    state.delta = delta;
    let action = if delta <= state.eta {
        let inv = 1.0 / state.rho;
        for (l, (a, b)) in state.lambda_t.iter_mut().zip(theta_tilde.t.iter().zip(&theta.t)) {
            *l += (a - b) * inv;
        }
        for (l, (a, b)) in state.lambda_r.iter_mut().zip(theta_tilde.r.iter().zip(&theta.r)) {
            *l += (a - b) * inv;
        }
        OuterAction::DualUpdate
    } else {
        state.rho *= state.c;
        OuterAction::PenaltyShrink
    };
    state.eta = 0.9 * delta;
    action
}

/// A problem whose variables see the surface only through θ.
///
/// Every block update must be an exact minimizer of
/// `objective() + 1/(2ρ) Σ_i ‖target_i − θ_i‖²` over its own variables.
pub trait ProblemAdapter {
    fn block_names(&self) -> &[&'static str];

    /// `target` is θ̃ + ρλ.
    fn update_block(&mut self, block: usize, rho: f64, target: &Theta) -> Result<()>;

    /// F(x, θ) at the current iterate.
    fn objective(&self) -> f64;

    fn theta(&self) -> &Theta;

    fn set_theta(&mut self, theta: Theta);

    /// The figure of merit reported in traces (e.g. sum rate).
    fn performance(&self) -> f64;

    /// Called once after θ has been replaced by the feasible auxiliary copy.
    fn finalize(&mut self) -> Result<()>;
}

/// Which constraint set the auxiliary copy θ̃ lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxiliaryPolicy {
    /// Energy split plus coupled phases; alternating closed-form phase and amplitude updates.
    Coupled,
    /// Energy split only, phases free.
    Independent,
    /// First N/2 elements transmit-only, the rest reflect-only; phases free.
    Conventional,
}

impl AuxiliaryPolicy {
    /// A feasible starting point with the given transmission phases.
    pub fn initial(self, phi_t: &[f64]) -> Result<StarCoefficients> {
        let n = phi_t.len();
        match self {
            AuxiliaryPolicy::Coupled | AuxiliaryPolicy::Independent => Ok(StarCoefficients::equal_split(phi_t)),
            AuxiliaryPolicy::Conventional => {
                if !n.is_multiple_of(2) {
                    return Err(Error::InvalidInput(format!(
                        "conventional surface needs an even element count, got {n}"
                    )));
                }
                let half = n / 2;
                let bt: Vec<f64> = (0..n).map(|i| if i < half { 1.0 } else { 0.0 }).collect();
                let br = bt.iter().map(|b| 1.0 - b).collect();
                let pt = (0..n).map(|i| if i < half { phi_t[i] } else { 0.0 }).collect();
                let pr = (0..n).map(|i| if i < half { 0.0 } else { phi_t[i] }).collect();
                StarCoefficients::new(bt, br, pt, pr)
            }
        }
    }

    fn sub_steps(self) -> &'static [&'static str] {
        match self {
            AuxiliaryPolicy::Coupled => &["aux_phases", "aux_amplitudes"],
            AuxiliaryPolicy::Independent => &["aux_independent"],
            AuxiliaryPolicy::Conventional => &["aux_conventional"],
        }
    }

    fn apply(self, step: usize, coeffs: &mut StarCoefficients, vartheta: &Theta) -> Result<()> {
        match (self, step) {
            (AuxiliaryPolicy::Coupled, 0) => {
                let up = update_phases(&coeffs.beta_t, &coeffs.beta_r, &vartheta.t, &vartheta.r)?;
                coeffs.phi_t = up.phi_t;
                coeffs.phi_r = up.phi_r;
            }
            (AuxiliaryPolicy::Coupled, _) => {
                let up = update_amplitudes(&coeffs.phi_t, &coeffs.phi_r, &vartheta.t, &vartheta.r)?;
                coeffs.beta_t = up.beta_t;
                coeffs.beta_r = up.beta_r;
            }
            (AuxiliaryPolicy::Independent, _) => {
                *coeffs = project_independent(&vartheta.t, &vartheta.r)?.coeffs;
            }
            (AuxiliaryPolicy::Conventional, _) => {
                let half = coeffs.len() / 2;
                let pt = project_unit_modulus(&vartheta.t[..half]);
                let pr = project_unit_modulus(&vartheta.r[half..]);
                coeffs.phi_t[..half].copy_from_slice(&pt);
                coeffs.phi_r[half..].copy_from_slice(&pr);
            }
        }
        Ok(())
    }
}

/// One inner iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub outer: usize,
    pub inner: usize,
    pub al_objective: f64,
    pub performance: f64,
    pub delta: f64,
    pub rho: f64,
    /// |φ̃_t,n − φ̃_r,n| of the auxiliary copy.
    pub phase_gaps: Vec<f64>,
    /// Augmented Lagrangian before the iteration, then after each block step.
    pub block_objectives: Vec<f64>,
}

impl TraceRecord {
    /// Largest increase between consecutive block steps.
    pub fn max_increase(&self) -> f64 {
        self.block_objectives
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn max_increase(&self) -> f64 {
        self.records
            .iter()
            .map(TraceRecord::max_increase)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Last record of every outer iteration.
    pub fn outer_records(&self) -> Vec<&TraceRecord> {
        let mut out: Vec<&TraceRecord> = Vec::new();
        for r in &self.records {
            match out.last() {
                Some(last) if last.outer == r.outer => *out.last_mut().unwrap() = r,
                _ => out.push(r),
            }
        }
        out
    }
}

/// Primal problem plus the auxiliary copy under a fixed policy.
pub struct PddProblem<A> {
    pub adapter: A,
    pub policy: AuxiliaryPolicy,
    pub aux: StarCoefficients,
    aux_theta: Theta,
}

impl<A: ProblemAdapter> PddProblem<A> {
    pub fn new(adapter: A, policy: AuxiliaryPolicy, aux: StarCoefficients) -> Result<Self> {
        if aux.len() != adapter.theta().len() {
            return Err(Error::InvalidInput(format!(
                "auxiliary length {} does not match theta length {}",
                aux.len(),
                adapter.theta().len()
            )));
        }
        let aux_theta = Theta::from(&aux);
        Ok(Self {
            adapter,
            policy,
            aux,
            aux_theta,
        })
    }

    pub fn aux_theta(&self) -> &Theta {
        &self.aux_theta
    }

    pub fn al_objective(&self, state: &PddState) -> f64 {
        self.adapter.objective() + state.penalty(self.adapter.theta(), &self.aux_theta)
    }

    pub fn violation(&self) -> f64 {
        constraint_violation(self.adapter.theta(), &self.aux_theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSummary {
    pub iterations: usize,
    pub initial: f64,
    pub final_value: f64,
}

/// Block coordinate descent on the augmented Lagrangian for fixed (ρ, λ).
///
/// Block order: the adapter's blocks, then the auxiliary sub-steps. Stops
/// once the relative decrease over a full sweep drops below `tol`.
pub fn inner_bcd<A: ProblemAdapter>(
    problem: &mut PddProblem<A>,
    state: &PddState,
    tol: f64,
    max_iter: usize,
    outer: usize,
    trace: &mut RunTrace,
) -> Result<InnerSummary> {
    let initial = problem.al_objective(state);
    let mut prev = initial;
    let mut iterations = 0;
    let n_blocks = problem.adapter.block_names().len();
    for inner in 1..=max_iter.max(1) {
        iterations = inner;
        let mut values = Vec::with_capacity(n_blocks + 3);
        values.push(prev);
        let check = |name: &str, values: &mut Vec<f64>, v: f64| -> Result<()> {
            let last = *values.last().unwrap();
            if !v.is_finite() || v > last + MONOTONICITY_SLACK {
                return Err(Error::Internal(format!(
                    "block `{name}` increased the augmented Lagrangian from {last:e} to {v:e}"
                )));
            }
            values.push(v);
            Ok(())
        };

        let target = state.target(&problem.aux_theta);
        for b in 0..n_blocks {
            problem.adapter.update_block(b, state.rho, &target)?;
            let v = problem.al_objective(state);
            let name = problem.adapter.block_names()[b];
            check(name, &mut values, v)?;
        }
        let vartheta = state.vartheta(problem.adapter.theta());
        for (s, name) in problem.policy.sub_steps().iter().enumerate() {
            problem.policy.apply(s, &mut problem.aux, &vartheta)?;
            problem.aux_theta = Theta::from(&problem.aux);
            let v = problem.al_objective(state);
            check(name, &mut values, v)?;
        }

        let cur = *values.last().unwrap();
        trace.push(TraceRecord {
            outer,
            inner,
            al_objective: cur,
            performance: problem.adapter.performance(),
            delta: problem.violation(),
            rho: state.rho,
            phase_gaps: problem.aux.phase_gaps(),
            block_objectives: values,
        });
        let decrease = prev - cur;
        prev = cur;
        if decrease <= tol * cur.abs().max(1.0) {
            break;
        }
    }
    Ok(InnerSummary {
        iterations,
        initial,
        final_value: prev,
    })
}

#[derive(Debug, Clone)]
pub struct PddOutcome {
    /// Auxiliary (constraint-satisfying) coefficients; θ was set to these before finalizing.
    pub coeffs: StarCoefficients,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Violation before θ was replaced by θ̃.
    pub final_delta: f64,
    pub state: PddState,
    pub trace: RunTrace,
}

/// Runs the outer penalty/dual loop until δ < threshold or the outer cap.
///
/// The returned problem has θ = θ̃ and has been finalized. When the cap is
/// hit, the iterate with the smallest violation is used and the outcome is
/// flagged as not converged.
pub fn solve<A: ProblemAdapter>(problem: &mut PddProblem<A>, config: &PddConfig) -> Result<PddOutcome> {
    config.validate()?;
    let mut state = PddState::new(problem.aux.len(), config);
    let mut trace = RunTrace::default();
    let mut converged = false;
    let mut best: Option<(f64, StarCoefficients)> = None;
    let mut outer_iterations = 0;
    for outer in 1..=config.outer_max {
        outer_iterations = outer;
        inner_bcd(problem, &state, config.inner_tol, config.inner_max, outer, &mut trace)?;
        let delta = problem.violation();
        state.delta = delta;
        if best.as_ref().is_none_or(|(d, _)| delta < *d) {
            best = Some((delta, problem.aux.clone()));
        }
        if delta < config.threshold {
            converged = true;
            break;
        }
        outer_step(&mut state, problem.adapter.theta(), &problem.aux_theta);
    }
    let final_delta = state.delta;
    if !converged {
        if let Some((_, coeffs)) = best {
            problem.aux = coeffs;
            problem.aux_theta = Theta::from(&problem.aux);
        }
    }
    problem.adapter.set_theta(problem.aux_theta.clone());
    problem.adapter.finalize()?;
    Ok(PddOutcome {
        coeffs: problem.aux.clone(),
        converged,
        outer_iterations,
        final_delta,
        state,
        trace,
    })
}
