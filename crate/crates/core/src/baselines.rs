//! The coupled PDD solver and the comparison schemes.
//!
//! Every scheme works on the noise-normalized copy of the channels it is
//! given, so identical `ChannelSet`s give paired comparisons.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::{dot_t, Mat};
use crate::pdd::{self, AuxiliaryPolicy, PddConfig, PddOutcome, PddProblem};
use crate::star::{wrap_phase, Side, StarCoefficients, Theta};
use crate::wmmse::{optimize_beamformer, EffectiveChannels, PowerRecord, WmmseProblem, WmmseState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    CoupledPdd,
    CoupledAo,
    #[serde(rename = "pspsc_t", alias = "ps_psc_t")]
    PsPscT,
    #[serde(rename = "pspsc_r", alias = "ps_psc_r")]
    PsPscR,
    IndependentStar,
    ConventionalRis,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::CoupledPdd,
        SchemeId::CoupledAo,
        SchemeId::PsPscT,
        SchemeId::PsPscR,
        SchemeId::IndependentStar,
        SchemeId::ConventionalRis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::CoupledPdd => "coupled_pdd",
            SchemeId::CoupledAo => "coupled_ao",
            SchemeId::PsPscT => "pspsc_t",
            SchemeId::PsPscR => "pspsc_r",
            SchemeId::IndependentStar => "independent_star",
            SchemeId::ConventionalRis => "conventional_ris",
        }
    }

    /// Runs the PDD loop directly (and so has a convergence trace).
    pub fn is_pdd(self) -> bool {
        matches!(
            self,
            SchemeId::CoupledPdd | SchemeId::IndependentStar | SchemeId::ConventionalRis
        )
    }

    /// Stand-in heuristics whose reference algorithms are only approximated.
    pub fn is_approximate(self) -> bool {
        matches!(self, SchemeId::CoupledAo | SchemeId::PsPscT | SchemeId::PsPscR)
    }

    /// Output must satisfy the coupled phase-shift constraint.
    pub fn is_coupled(self) -> bool {
        matches!(
            self,
            SchemeId::CoupledPdd | SchemeId::CoupledAo | SchemeId::PsPscT | SchemeId::PsPscR
        )
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let found = match key.as_str() {
            "coupled_pdd" | "coupled" | "pdd" => SchemeId::CoupledPdd,
            "coupled_ao" | "ao" => SchemeId::CoupledAo,
            "pspsc_t" => SchemeId::PsPscT,
            "pspsc_r" => SchemeId::PsPscR,
            "independent_star" | "independent" => SchemeId::IndependentStar,
            "conventional_ris" | "conventional" => SchemeId::ConventionalRis,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown scheme '{s}' (expected one of {})",
                    SchemeId::ALL.map(|s| s.name()).join(", ")
                )))
            }
        };
        Ok(found)
    }
}

/// Codebook sizes of the discrete AO search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AoLevels {
    pub amplitude: usize,
    pub phase: usize,
}

impl Default for AoLevels {
    fn default() -> Self {
        Self {
            amplitude: 11,
            phase: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Transmit power budget in watts.
    pub pt: f64,
    pub pdd: PddConfig,
    /// Seeds the random initial phases.
    pub init_seed: u64,
    pub ao: AoLevels,
    /// Relative sum-rate tolerance of the fixed-θ WMMSE refinements.
    pub wmmse_tol: f64,
    pub wmmse_max_iter: usize,
    /// Cap on AO side passes.
    pub ao_max_passes: usize,
}

impl SolverConfig {
    pub fn new(pt: f64, pdd: PddConfig, init_seed: u64) -> Self {
        Self {
            pt,
            pdd,
            init_seed,
            ao: AoLevels::default(),
            wmmse_tol: 1e-9,
            wmmse_max_iter: 1000,
            ao_max_passes: 40,
        }
    }

    fn initial_phases(&self, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        (0..n).map(|_| rng.random::<f64>() * TAU).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub scheme: SchemeId,
    pub coeffs: StarCoefficients,
    /// Beamformer, weights and receivers matched to `coeffs`.
    pub state: WmmseState,
    pub rate: f64,
    /// PDD reached its threshold, or AO stopped on a no-improvement pass.
    pub converged: bool,
    /// Present for schemes that run the PDD loop.
    pub outcome: Option<PddOutcome>,
    pub power_log: Vec<PowerRecord>,
}

fn run_pdd(
    scheme: SchemeId,
    channels: &ChannelSet,
    config: &SolverConfig,
    policy: AuxiliaryPolicy,
) -> Result<SchemeSolution> {
    let ch = channels.normalized();
    let aux = policy.initial(&config.initial_phases(ch.num_elements()))?;
    let adapter = WmmseProblem::new(&ch, config.pt, Theta::from(&aux))?;
    let mut problem = PddProblem::new(adapter, policy, aux)?;
    let outcome = pdd::solve(&mut problem, &config.pdd)?;
    let rate = problem.adapter.sum_rate();
    let power_log = problem.adapter.power_log().to_vec();
    Ok(SchemeSolution {
        scheme,
        coeffs: outcome.coeffs.clone(),
        state: problem.adapter.into_state(),
        rate,
        converged: outcome.converged,
        outcome: Some(outcome),
        power_log,
    })
}

/// PDD with the coupled phase-shift constraint.
pub fn solve_coupled(channels: &ChannelSet, config: &SolverConfig) -> Result<SchemeSolution> {
    run_pdd(SchemeId::CoupledPdd, channels, config, AuxiliaryPolicy::Coupled)
}

/// PDD with only the energy split enforced.
pub fn solve_independent(channels: &ChannelSet, config: &SolverConfig) -> Result<SchemeSolution> {
    run_pdd(SchemeId::IndependentStar, channels, config, AuxiliaryPolicy::Independent)
}

/// Two adjacent half-size surfaces, transmit-only then reflect-only.
pub fn solve_conventional(channels: &ChannelSet, config: &SolverConfig) -> Result<SchemeSolution> {
    if !channels.num_elements().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "conventional surface needs an even element count, got {}",
            channels.num_elements()
        )));
    }
    run_pdd(SchemeId::ConventionalRis, channels, config, AuxiliaryPolicy::Conventional)
}

/// Fixed-θ beamformer refinement, reported as a solution.
fn finish_fixed(
    scheme: SchemeId,
    ch: &ChannelSet,
    config: &SolverConfig,
    coeffs: StarCoefficients,
    start: Option<Mat>,
) -> Result<SchemeSolution> {
    let theta = Theta::from(&coeffs);
    let (state, rate) = optimize_beamformer(&theta, ch, config.pt, start, config.wmmse_tol, config.wmmse_max_iter)?;
    let power_log = vec![PowerRecord {
        power: state.power(),
        bisection: false,
    }];
    Ok(SchemeSolution {
        scheme,
        coeffs,
        state,
        rate,
        converged: true,
        outcome: None,
        power_log,
    })
}

/// Primary-secondary heuristic: keep the primary side of the independent
/// solution and force the secondary side onto the coupled set.
///
/// Three secondary sign patterns are tried and the best sum rate is kept:
/// a greedy per-element choice that grows the secondary side's strongest
/// user's combined amplitude, all `+π/2`, and all `−π/2`.
pub fn solve_pspsc(channels: &ChannelSet, config: &SolverConfig, primary: Side) -> Result<SchemeSolution> {
    let scheme = match primary {
        Side::T => SchemeId::PsPscT,
        Side::R => SchemeId::PsPscR,
    };
    let independent = solve_independent(channels, config)?;
    let ch = channels.normalized();
    let n = ch.num_elements();
    let base = &independent.coeffs;
    let beta_p = base.beta(primary).to_vec();
    let phi_p = base.phi(primary).to_vec();
    let beta_s: Vec<f64> = beta_p.iter().map(|b| (1.0 - b * b).max(0.0).sqrt()).collect();

    let build = |signs: &[f64]| -> Result<StarCoefficients> {
        let phi_s: Vec<f64> = phi_p.iter().zip(signs).map(|(p, s)| p + s * FRAC_PI_2).collect();
        match primary {
            Side::T => StarCoefficients::new(beta_p.clone(), beta_s.clone(), phi_p.clone(), phi_s),
            Side::R => StarCoefficients::new(beta_s.clone(), beta_p.clone(), phi_s, phi_p.clone()),
        }
    };

    let mut candidates = vec![greedy_signs(&ch, &independent, primary), vec![1.0; n], vec![-1.0; n]];
    candidates.dedup();
    let mut best: Option<SchemeSolution> = None;
    for signs in candidates {
        let coeffs = build(&signs)?;
        let sol = finish_fixed(scheme, &ch, config, coeffs, Some(independent.state.w.clone()))?;
        if best.as_ref().is_none_or(|b| sol.rate > b.rate) {
            best = Some(sol);
        }
    }
    best.ok_or_else(|| Error::Internal("no PS-PSC candidate".into()))
}

fn greedy_signs(ch: &ChannelSet, independent: &SchemeSolution, primary: Side) -> Vec<f64> {
    let n = ch.num_elements();
    let secondary = primary.other();
    let theta = Theta::from(&independent.coeffs);
    let eff = EffectiveChannels::new(&theta, ch);
    let w = &independent.state.w;
    let strongest = ch.users_on(secondary).max_by(|&a, &b| {
        let ga = dot_t(eff.row(a), &w.column(a)).norm_sqr();
        let gb = dot_t(eff.row(b), &w.column(b)).norm_sqr();
        ga.total_cmp(&gb)
    });
    let Some(u) = strongest else {
        return vec![1.0; n];
    };
    // element n contributes θ_s[n] · (V_u w_u)[n] to ĥ_u w_u
    let q = ch.cascade(u).mul_vec(&w.column(u));
    let beta_p = independent.coeffs.beta(primary);
    let phi_p = independent.coeffs.phi(primary);
    let mut acc = C64::new(0.0, 0.0);
    let mut signs = Vec::with_capacity(n);
    for i in 0..n {
        let amp = (1.0 - beta_p[i] * beta_p[i]).max(0.0).sqrt();
        let term = |s: f64| C64::from_polar(amp, phi_p[i] + s * FRAC_PI_2) * q[i];
        let plus = acc + term(1.0);
        let minus = acc + term(-1.0);
        if plus.norm() >= minus.norm() {
            signs.push(1.0);
            acc = plus;
        } else {
            signs.push(-1.0);
            acc = minus;
        }
    }
    signs
}

/// Per-user received amplitudes `ĥ_k w_ℓ` with rank-one element edits.
struct RateTracker<'a> {
    ch: &'a ChannelSet,
    /// s[k][ℓ] = ĥ_k w_ℓ
    s: Vec<Vec<C64>>,
    /// q[k][n][ℓ] = (V_k w_ℓ)[n]
    q: Vec<Vec<Vec<C64>>>,
}

impl<'a> RateTracker<'a> {
    fn new(ch: &'a ChannelSet, theta: &Theta, w: &Mat) -> Self {
        let eff = EffectiveChannels::new(theta, ch);
        let cols: Vec<Vec<C64>> = (0..w.cols()).map(|l| w.column(l)).collect();
        let q = (0..ch.num_users())
            .map(|k| {
                let per_l: Vec<Vec<C64>> = cols.iter().map(|c| ch.cascade(k).mul_vec(c)).collect();
                (0..ch.num_elements())
                    .map(|n| per_l.iter().map(|v| v[n]).collect())
                    .collect()
            })
            .collect();
        Self {
            ch,
            s: eff.received(w),
            q,
        }
    }

    /// Sum rate after changing element n by (dt, dr) on the two sides.
    fn rate_with(&self, n: usize, dt: C64, dr: C64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.s.len() {
            let d = if self.ch.side[k] == Side::T { dt } else { dr };
            let mut sig = 0.0;
            let mut all = self.ch.sigma2[k];
            for (l, (s, q)) in self.s[k].iter().zip(&self.q[k][n]).enumerate() {
                let p = (s + d * q).norm_sqr();
                all += p;
                if l == k {
                    sig = p;
                }
            }
            total += (1.0 + sig / (all - sig)).log2();
        }
        total
    }

    fn apply(&mut self, n: usize, dt: C64, dr: C64) {
        for k in 0..self.s.len() {
            let d = if self.ch.side[k] == Side::T { dt } else { dr };
            for (s, q) in self.s[k].iter_mut().zip(&self.q[k][n]) {
                *s += d * q;
            }
        }
    }
}

/// Discrete alternating optimization under the coupled constraint.
///
/// Each pass fixes one side as the searched side and, element by element,
/// picks the codebook entry `(β, φ, ±π/2)` with the best sum rate for the
/// current beamformer; the partner element gets `√(1−β²)` and `φ ± π/2`.
/// The beamformer is re-optimized after every pass. Stops after two
/// consecutive passes (one per side) without improvement.
pub fn solve_ao(channels: &ChannelSet, config: &SolverConfig) -> Result<SchemeSolution> {
    let AoLevels { amplitude, phase } = config.ao;
    if amplitude < 2 || phase < 2 {
        return Err(Error::InvalidInput(format!(
            "AO codebooks need at least two levels, got amplitude {amplitude}, phase {phase}"
        )));
    }
    let ch = channels.normalized();
    let n = ch.num_elements();
    let amps: Vec<f64> = (0..amplitude).map(|i| i as f64 / (amplitude - 1) as f64).collect();
    let phases: Vec<f64> = (0..phase).map(|i| TAU * i as f64 / phase as f64).collect();

    // start on the codebook: nearest phase to the shared random start, amplitude nearest 1/√2
    let half = amps
        .iter()
        .copied()
        .min_by(|a, b| (a - FRAC_1_SQRT_2).abs().total_cmp(&(b - FRAC_1_SQRT_2).abs()))
        .unwrap_or(FRAC_1_SQRT_2);
    let start_phi: Vec<f64> = config
        .initial_phases(n)
        .iter()
        .map(|p| {
            let step = TAU / phase as f64;
            ((p / step).round() * step).rem_euclid(TAU)
        })
        .collect();
    let mut coeffs = StarCoefficients::new(
        vec![half; n],
        vec![(1.0 - half * half).sqrt(); n],
        start_phi.clone(),
        start_phi.iter().map(|p| p + FRAC_PI_2).collect(),
    )?;

    let theta = Theta::from(&coeffs);
    let (mut state, mut rate) = optimize_beamformer(&theta, &ch, config.pt, None, config.wmmse_tol, config.wmmse_max_iter)?;
    let mut stale = 0;
    let mut converged = false;
    let mut power_log = vec![PowerRecord {
        power: state.power(),
        bisection: false,
    }];
    for pass in 0..config.ao_max_passes {
        let side = if pass % 2 == 0 { Side::T } else { Side::R };
        let mut theta = Theta::from(&coeffs);
        let mut tracker = RateTracker::new(&ch, &theta, &state.w);
        for e in 0..n {
            let mut best = (tracker.rate_with(e, C64::new(0.0, 0.0), C64::new(0.0, 0.0)), None);
            for &b in &amps {
                let partner = (1.0 - b * b).max(0.0).sqrt();
                for &p in &phases {
                    for sign in [1.0, -1.0] {
                        let (bt, br, pt, pr) = match side {
                            Side::T => (b, partner, p, p + sign * FRAC_PI_2),
                            Side::R => (partner, b, p + sign * FRAC_PI_2, p),
                        };
                        let dt = C64::from_polar(bt, pt) - theta.t[e];
                        let dr = C64::from_polar(br, pr) - theta.r[e];
                        let r = tracker.rate_with(e, dt, dr);
                        if r > best.0 {
                            best = (r, Some((bt, br, pt, pr)));
                        }
                    }
                }
            }
            if let Some((bt, br, pt, pr)) = best.1 {
                let nt = C64::from_polar(bt, pt);
                let nr = C64::from_polar(br, pr);
                tracker.apply(e, nt - theta.t[e], nr - theta.r[e]);
                theta.t[e] = nt;
                theta.r[e] = nr;
                coeffs.beta_t[e] = bt;
                coeffs.beta_r[e] = br;
                coeffs.phi_t[e] = wrap_phase(pt);
                coeffs.phi_r[e] = wrap_phase(pr);
            }
        }
        let theta = Theta::from(&coeffs);
        let (next_state, next_rate) = optimize_beamformer(
            &theta,
            &ch,
            config.pt,
            Some(state.w.clone()),
            config.wmmse_tol,
            config.wmmse_max_iter,
        )?;
        power_log.push(PowerRecord {
            power: next_state.power(),
            bisection: false,
        });
        // the pass never lowers the rate for the old W, and WMMSE from that W never lowers it either
        let improved = next_rate > rate + 1e-9 * rate.abs().max(1.0);
        state = next_state;
        rate = next_rate;
        stale = if improved { 0 } else { stale + 1 };
        if stale >= 2 {
            converged = true;
            break;
        }
    }
    Ok(SchemeSolution {
        scheme: SchemeId::CoupledAo,
        coeffs,
        state,
        rate,
        converged,
        outcome: None,
        power_log,
    })
}

pub fn solve_scheme(scheme: SchemeId, channels: &ChannelSet, config: &SolverConfig) -> Result<SchemeSolution> {
    match scheme {
        SchemeId::CoupledPdd => solve_coupled(channels, config),
        SchemeId::CoupledAo => solve_ao(channels, config),
        SchemeId::PsPscT => solve_pspsc(channels, config, Side::T),
        SchemeId::PsPscR => solve_pspsc(channels, config, Side::R),
        SchemeId::IndependentStar => solve_independent(channels, config),
        SchemeId::ConventionalRis => solve_conventional(channels, config),
    }
}

/// Energy residual limit used when validating scheme outputs.
pub const ENERGY_TOL: f64 = 1e-8;
/// Limit on |cos(φ_t − φ_r)| for coupled outputs.
pub const PHASE_TOL: f64 = 1e-6;

/// Checks a solution against its own constraint set and the power budget.
pub fn validate_solution(sol: &SchemeSolution, pt: f64) -> Result<()> {
    let res = sol.coeffs.residuals();
    let fail = |what: String| Err(Error::Internal(format!("{} output infeasible: {what}", sol.scheme)));
    if !res.is_energy_feasible(ENERGY_TOL) {
        return fail(format!("energy residual {:e}", res.max_energy()));
    }
    if sol.scheme.is_coupled() && res.max_phase() > PHASE_TOL {
        return fail(format!("phase residual {:e}", res.max_phase()));
    }
    if sol.scheme == SchemeId::ConventionalRis {
        let half = sol.coeffs.len() / 2;
        let pattern_ok = (0..sol.coeffs.len()).all(|i| {
            let (t, r) = if i < half { (1.0, 0.0) } else { (0.0, 1.0) };
            sol.coeffs.beta_t[i] == t && sol.coeffs.beta_r[i] == r
        });
        if !pattern_ok {
            return fail("transmit-only/reflect-only pattern broken".into());
        }
    }
    let power = sol.state.power();
    if power > pt + 1e-8 {
        return fail(format!("power {power} exceeds budget {pt}"));
    }
    if !sol.rate.is_finite() || sol.rate < 0.0 {
        return fail(format!("rate {}", sol.rate));
    }
    Ok(())
}

/// Distance of a phase gap from the nearest of π/2 and 3π/2.
pub fn phase_gap_distance_to_quarter(gap: f64) -> f64 {
    let g = gap.rem_euclid(TAU);
    (g - FRAC_PI_2).abs().min((g - 3.0 * FRAC_PI_2).abs()).min(PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, SystemConfig};

    fn quick_pdd() -> PddConfig {
        PddConfig::default()
    }

    fn instance(n: usize, k: usize, seed: u64) -> (ChannelSet, SolverConfig) {
        let cfg = SystemConfig {
            n,
            k,
            seed,
            ..Default::default()
        };
        let ch = generate_channels(&cfg, 0).unwrap();
        (ch, SolverConfig::new(cfg.pt_watts(), quick_pdd(), seed))
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
        }
        assert!("bogus".parse::<SchemeId>().is_err());
        assert_eq!("Independent".parse::<SchemeId>().unwrap(), SchemeId::IndependentStar);
    }

    #[test]
    fn conventional_rejects_odd_n() {
        let (ch, cfg) = instance(5, 2, 1);
        assert!(matches!(solve_conventional(&ch, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn conventional_two_elements() {
        let (ch, cfg) = instance(2, 2, 1);
        let sol = solve_conventional(&ch, &cfg).unwrap();
        assert_eq!(sol.coeffs.beta_t, vec![1.0, 0.0]);
        assert_eq!(sol.coeffs.beta_r, vec![0.0, 1.0]);
        validate_solution(&sol, cfg.pt).unwrap();
        assert!(sol.rate > 0.0);
    }

    #[test]
    fn pspsc_is_feasible_and_keeps_primary() {
        let (ch, cfg) = instance(8, 4, 2);
        let ind = solve_independent(&ch, &cfg).unwrap();
        for side in Side::BOTH {
            let sol = solve_pspsc(&ch, &cfg, side).unwrap();
            let res = sol.coeffs.residuals();
            assert!(res.max_energy() <= 1e-12);
            assert!(res.max_phase() <= 1e-12);
            assert_eq!(sol.coeffs.beta(side), ind.coeffs.beta(side));
            assert_eq!(sol.coeffs.phi(side), ind.coeffs.phi(side));
            validate_solution(&sol, cfg.pt).unwrap();
        }
    }

    #[test]
    fn ao_iterates_are_coupled_and_on_codebook() {
        let (ch, mut cfg) = instance(6, 4, 3);
        cfg.ao = AoLevels { amplitude: 5, phase: 8 };
        let sol = solve_ao(&ch, &cfg).unwrap();
        validate_solution(&sol, cfg.pt).unwrap();
        let res = sol.coeffs.residuals();
        assert!(res.max_phase() <= 1e-12);
        assert!(res.max_energy() <= 1e-12);
        for i in 0..6 {
            let on_grid = |b: f64| ((b * 4.0).round() - b * 4.0).abs() < 1e-12;
            assert!(on_grid(sol.coeffs.beta_t[i]) || on_grid(sol.coeffs.beta_r[i]));
        }
    }

    #[test]
    fn ao_rejects_tiny_codebooks() {
        let (ch, mut cfg) = instance(4, 2, 3);
        cfg.ao = AoLevels { amplitude: 1, phase: 8 };
        assert!(solve_ao(&ch, &cfg).is_err());
    }

    #[test]
    fn rate_tracker_matches_full_evaluation() {
        let (ch, cfg) = instance(6, 4, 4);
        let ch = ch.normalized();
        let coeffs = StarCoefficients::equal_split(&cfg.initial_phases(6));
        let theta = Theta::from(&coeffs);
        let (state, _) = optimize_beamformer(&theta, &ch, cfg.pt, None, 1e-9, 100).unwrap();
        let mut tracker = RateTracker::new(&ch, &theta, &state.w);
        let dt = C64::new(0.1, -0.2);
        let dr = C64::new(-0.3, 0.05);
        let mut moved = theta.clone();
        moved.t[2] += dt;
        moved.r[2] += dr;
        let eff = EffectiveChannels::new(&moved, &ch);
        let full = crate::wmmse::sum_rate(&state.w, &eff, &ch);
        assert!((tracker.rate_with(2, dt, dr) - full).abs() < 1e-10);
        tracker.apply(2, dt, dr);
        assert!((tracker.rate_with(0, C64::new(0.0, 0.0), C64::new(0.0, 0.0)) - full).abs() < 1e-10);
    }

    #[test]
    fn quarter_distance() {
        assert!(phase_gap_distance_to_quarter(FRAC_PI_2) < 1e-15);
        assert!(phase_gap_distance_to_quarter(3.0 * FRAC_PI_2) < 1e-15);
        assert!((phase_gap_distance_to_quarter(0.0) - FRAC_PI_2).abs() < 1e-15);
    }
}
