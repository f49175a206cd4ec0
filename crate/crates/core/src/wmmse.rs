//! Throughput maximization through the weighted-MSE equivalence.
//!
//! For user k on side i the effective channel is the row vector
//! `ĥ_k = θ_iᵀ diag(h_kᴴ) G`, so every received amplitude is `ĥ_k w_ℓ`.
//! The block objective minimized here is `Σ_k (ϖ_k e_k − ln ϖ_k)`; the
//! `−ln ϖ_k` term makes `ϖ_k = 1/e_k = 1 + γ_k` an exact block minimizer
//! and does not depend on W or θ.

use num_complex::Complex64 as C64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::{
    all_finite, bisect_decreasing, dot_h, dot_t, norm_sq, orthonormal_basis, solve_hpd, Cholesky, HermitianMatrix, Mat,
};
use crate::pdd::ProblemAdapter;
use crate::star::{Side, Theta};

/// Bisection tolerance on the relative power mismatch `P(μ)/P_t − 1`.
pub const POWER_BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    /// M × K, column k is w_k.
    pub w: Mat,
    pub varpi: Vec<f64>,
    pub upsilon: Vec<C64>,
}

impl WmmseState {
    /// Unit weights and zero receivers around the given beamformer.
    pub fn new(w: Mat) -> Self {
        let k = w.cols();
        Self {
            w,
            varpi: vec![1.0; k],
            upsilon: vec![C64::new(0.0, 0.0); k],
        }
    }

    /// tr(W Wᴴ)
    pub fn power(&self) -> f64 {
        self.w.frobenius_sq()
    }
}

/// Cached `ĥ_k` rows; must be rebuilt whenever θ changes.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    hhat: Vec<Vec<C64>>,
}

impl EffectiveChannels {
    pub fn new(theta: &Theta, channels: &ChannelSet) -> Self {
        let hhat = (0..channels.num_users())
            .map(|k| {
                let v = channels.cascade(k);
                let th = theta.side(channels.side[k]);
                (0..v.cols())
                    .map(|m| (0..v.rows()).map(|n| th[n] * v[(n, m)]).sum())
                    .collect()
            })
            .collect();
        Self { hhat }
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.hhat[k]
    }

    pub fn num_users(&self) -> usize {
        self.hhat.len()
    }

    /// ĥ_k w_ℓ for all (k, ℓ).
    pub fn received(&self, w: &Mat) -> Vec<Vec<C64>> {
        let cols: Vec<Vec<C64>> = (0..w.cols()).map(|l| w.column(l)).collect();
        self.hhat
            .iter()
            .map(|h| cols.iter().map(|c| dot_t(h, c)).collect())
            .collect()
    }
}

fn sinr_from_row(k: usize, row: &[C64], sigma2: f64) -> f64 {
    let signal = row[k].norm_sqr();
    let interference: f64 = row
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    signal / (interference + sigma2)
}

/// γ_k = |ĥ_k w_k|² / (Σ_{ℓ≠k} |ĥ_k w_ℓ|² + σ_k²)
pub fn sinr(k: usize, w: &Mat, eff: &EffectiveChannels, channels: &ChannelSet) -> f64 {
    let row: Vec<C64> = (0..w.cols()).map(|l| dot_t(eff.row(k), &w.column(l))).collect();
    sinr_from_row(k, &row, channels.sigma2[k])
}

pub fn sinrs(w: &Mat, eff: &EffectiveChannels, channels: &ChannelSet) -> Vec<f64> {
    eff.received(w)
        .iter()
        .enumerate()
        .map(|(k, row)| sinr_from_row(k, row, channels.sigma2[k]))
        .collect()
}

/// Σ_k log2(1 + γ_k) in bit/s/Hz.
pub fn sum_rate(w: &Mat, eff: &EffectiveChannels, channels: &ChannelSet) -> f64 {
    sinrs(w, eff, channels).iter().map(|g| (1.0 + g).log2()).sum()
}

fn mse_from_row(k: usize, row: &[C64], sigma2: f64, upsilon: C64) -> f64 {
    let total: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() + sigma2;
    upsilon.norm_sqr() * total - 2.0 * (upsilon.conj() * row[k]).re + 1.0
}

/// e_k = |υ_k|²(Σ_ℓ |ĥ_k w_ℓ|² + σ_k²) − 2 Re(υ_k* ĥ_k w_k) + 1
pub fn mse(k: usize, state: &WmmseState, eff: &EffectiveChannels, channels: &ChannelSet) -> f64 {
    let row: Vec<C64> = (0..state.w.cols())
        .map(|l| dot_t(eff.row(k), &state.w.column(l)))
        .collect();
    mse_from_row(k, &row, channels.sigma2[k], state.upsilon[k])
}

/// Σ_k (ϖ_k e_k − ln ϖ_k)
pub fn wmmse_objective(state: &WmmseState, eff: &EffectiveChannels, channels: &ChannelSet) -> f64 {
    eff.received(&state.w)
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let e = mse_from_row(k, row, channels.sigma2[k], state.upsilon[k]);
            state.varpi[k] * e - state.varpi[k].ln()
        })
        .sum()
}

/// ϖ_k = 1 + γ_k and the MMSE receiver υ_k = ĥ_k w_k / (Σ_ℓ |ĥ_k w_ℓ|² + σ_k²).
pub fn update_weights_receivers(
    w: &Mat,
    eff: &EffectiveChannels,
    channels: &ChannelSet,
) -> (Vec<f64>, Vec<C64>) {
    eff.received(w)
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let total: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() + channels.sigma2[k];
            (1.0 + sinr_from_row(k, row, channels.sigma2[k]), row[k] / total)
        })
        .unzip()
}

#[derive(Debug, Clone)]
pub struct BeamformerUpdate {
    pub w: Mat,
    /// Multiplier of the power constraint (0 when inactive).
    pub mu: f64,
    /// True when the power constraint was active and μ came from bisection.
    pub bisection: bool,
    /// All right-hand sides vanished (no useful effective channel); W = 0.
    pub zero_channel: bool,
}

/// The W block restricted to the span of the active effective channels.
///
/// With `B = Σ_j d_j g_j g_jᴴ` (`d_j = ϖ_j|υ_j|²`, `g_j = ĥ_jᴴ`) and every
/// right-hand side `r_k = ϖ_k υ_k g_k` inside span{g_j : d_j > 0} = range(Q),
/// `(B + μI)⁻¹ r_k = Q (QᴴBQ + μI)⁻¹ Qᴴ r_k` for every μ ≥ 0 (the μ = 0
/// case being the minimum-norm solution), and `QᴴBQ` is positive definite.
struct BeamformerSystem {
    m: usize,
    /// Orthonormal basis vectors, each of length M.
    q: Vec<Vec<C64>>,
    /// QᴴBQ
    reduced: Mat,
    /// Qᴴ r_k
    rhs: Vec<Vec<C64>>,
}

impl BeamformerSystem {
    fn new(state: &WmmseState, eff: &EffectiveChannels) -> Self {
        let m = state.w.rows();
        let k = eff.num_users();
        let g: Vec<Vec<C64>> = (0..k).map(|u| eff.row(u).iter().map(|z| z.conj()).collect()).collect();
        let d: Vec<f64> = state
            .varpi
            .iter()
            .zip(&state.upsilon)
            .map(|(w, u)| w * u.norm_sqr())
            .collect();
        let active: Vec<Vec<C64>> = (0..k).filter(|&u| d[u] > 0.0).map(|u| g[u].clone()).collect();
        let q = orthonormal_basis(&active, 1e-12);
        let p: Vec<Vec<C64>> = g.iter().map(|gk| q.iter().map(|qi| dot_h(qi, gk)).collect()).collect();
        let mut reduced = Mat::zeros(q.len(), q.len());
        for (pk, &dk) in p.iter().zip(&d) {
            if dk > 0.0 {
                reduced.add_outer(dk, pk);
            }
        }
        let rhs = p
            .iter()
            .enumerate()
            .map(|(u, pk)| {
                let s = state.upsilon[u] * state.varpi[u];
                pk.iter().map(|z| z * s).collect()
            })
            .collect();
        Self { m, q, reduced, rhs }
    }

    /// Coordinates of every w_k in the basis.
    fn solve(&self, mu: f64) -> Result<Vec<Vec<C64>>> {
        let mut a = self.reduced.clone();
        a.add_diagonal(mu);
        let chol = Cholesky::factor(&HermitianMatrix::from_parts_unchecked(a)).map_err(|e| e.in_block("beamformer"))?;
        Ok(self.rhs.iter().map(|r| chol.solve(r)).collect())
    }

    fn power(coords: &[Vec<C64>]) -> f64 {
        coords.iter().map(|a| norm_sq(a)).sum()
    }

    fn beamformer(&self, coords: &[Vec<C64>]) -> Mat {
        let cols: Vec<Vec<C64>> = coords
            .iter()
            .map(|a| {
                let mut w = vec![C64::new(0.0, 0.0); self.m];
                for (ai, qi) in a.iter().zip(&self.q) {
                    for (x, y) in w.iter_mut().zip(qi) {
                        *x += y * ai;
                    }
                }
                w
            })
            .collect();
        Mat::from_columns(self.m, &cols)
    }
}

/// Exact minimizer of `Σ_k ϖ_k e_k` over W subject to `tr(WWᴴ) ≤ P_t`.
///
/// `w_k = (Σ_j ϖ_j|υ_j|² ĥ_jᴴĥ_j + μI)⁻¹ ϖ_k υ_k ĥ_kᴴ`, with μ = 0 (minimum
/// norm) if that is already feasible and otherwise the root of `P(μ) = P_t`.
pub fn update_beamformer(
    state: &WmmseState,
    eff: &EffectiveChannels,
    pt: f64,
) -> Result<BeamformerUpdate> {
    if !(pt > 0.0 && pt.is_finite()) {
        return Err(Error::InvalidInput(format!("transmit power must be positive, got {pt}")));
    }
    let (m, k) = (state.w.rows(), state.w.cols());
    let sys = BeamformerSystem::new(state, eff);
    if sys.q.is_empty() || sys.rhs.iter().all(|r| norm_sq(r) == 0.0) {
        return Ok(BeamformerUpdate {
            w: Mat::zeros(m, k),
            mu: 0.0,
            bisection: false,
            zero_channel: true,
        });
    }

    let unshifted = sys.solve(0.0).ok().filter(|c| c.iter().all(|a| all_finite(a)));
    if let Some(coords) = &unshifted {
        if BeamformerSystem::power(coords) <= pt {
            return Ok(BeamformerUpdate {
                w: sys.beamformer(coords),
                mu: 0.0,
                bisection: false,
                zero_channel: false,
            });
        }
    }

    let mismatch = |mu: f64| -> f64 {
        if mu == 0.0 {
            if let Some(c) = &unshifted {
                return BeamformerSystem::power(c) / pt - 1.0;
            }
        }
        sys.solve(mu)
            .map(|c| BeamformerSystem::power(&c) / pt - 1.0)
            .unwrap_or(f64::INFINITY)
    };
    let lo = if unshifted.is_some() {
        0.0
    } else {
        // the reduced matrix is numerically singular; start just above zero
        1e-12 * (sys.reduced.trace_re() / sys.q.len() as f64).max(f64::MIN_POSITIVE)
    };
    let mut hi = 1.0f64.max(lo);
    while mismatch(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Internal("power bracket diverged".into()));
        }
    }
    let mu = if mismatch(lo) <= 0.0 {
        lo
    } else {
        bisect_decreasing(mismatch, lo, hi, POWER_BISECTION_TOL)?
    };
    let mut w = sys.beamformer(&sys.solve(mu)?);
    let p = w.frobenius_sq();
    if p > pt {
        w.scale((pt / p).sqrt());
    }
    Ok(BeamformerUpdate {
        w,
        mu,
        bisection: true,
        zero_channel: false,
    })
}

/// Exact minimizer over θ_i of `Σ_{k∈K_i} ϖ_k e_k + 1/(2ρ)‖θ_i − target_i‖²`
/// where `target_i = θ̃_i + ρλ_i`.
pub fn update_theta_side(
    state: &WmmseState,
    channels: &ChannelSet,
    side: Side,
    rho: f64,
    target: &[C64],
) -> Result<Vec<C64>> {
    let n = channels.num_elements();
    if target.len() != n {
        return Err(Error::InvalidInput(format!(
            "penalty target length {} does not match N = {n}",
            target.len()
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!("penalty factor must be positive, got {rho}")));
    }
    let cols: Vec<Vec<C64>> = (0..state.w.cols()).map(|l| state.w.column(l)).collect();
    let mut a = Mat::zeros(n, n);
    let mut b = vec![C64::new(0.0, 0.0); n];
    for k in channels.users_on(side) {
        let quad = state.varpi[k] * state.upsilon[k].norm_sqr();
        let lin = state.upsilon[k] * state.varpi[k];
        let v = channels.cascade(k);
        for (l, col) in cols.iter().enumerate() {
            // ĥ_k w_ℓ = cᵀθ = dᴴθ with d = conj(c)
            let d: Vec<C64> = v.mul_vec(col).iter().map(|z| z.conj()).collect();
            if quad > 0.0 {
                a.add_outer(quad, &d);
            }
            if l == k {
                for (bi, di) in b.iter_mut().zip(&d) {
                    *bi += di * lin;
                }
            }
        }
    }
    // (A + I/(2ρ)) θ = b + target/(2ρ), scaled by 2ρ
    let s = 2.0 * rho;
    a.scale(s);
    a.add_diagonal(1.0);
    let rhs: Vec<C64> = b.iter().zip(target).map(|(bi, z)| bi * s + z).collect();
    solve_hpd(&HermitianMatrix::from_parts_unchecked(a), &rhs)
        .map_err(|e| e.in_block(&format!("theta_{}", side.label())))
}

/// Both sides of the θ block.
pub fn update_theta(
    state: &WmmseState,
    channels: &ChannelSet,
    rho: f64,
    lambda: &Theta,
    theta_tilde: &Theta,
) -> Result<Theta> {
    let shift = |a: &[C64], l: &[C64]| -> Vec<C64> { a.iter().zip(l).map(|(x, y)| x + y * rho).collect() };
    Ok(Theta {
        t: update_theta_side(state, channels, Side::T, rho, &shift(&theta_tilde.t, &lambda.t))?,
        r: update_theta_side(state, channels, Side::R, rho, &shift(&theta_tilde.r, &lambda.r))?,
    })
}

/// Beamformer pointing along each effective channel, scaled to use the full power.
pub fn matched_filter(eff: &EffectiveChannels, m: usize, pt: f64) -> Mat {
    let k = eff.num_users();
    let cols: Vec<Vec<C64>> = (0..k)
        .map(|u| eff.row(u).iter().map(|z| z.conj()).collect())
        .collect();
    let mut w = Mat::from_columns(m, &cols);
    let p = w.frobenius_sq();
    if p > 0.0 {
        w.scale((pt / p).sqrt());
    } else {
        // no effective channel at all: spread power evenly
        w = Mat::from_fn(m, k, |_, _| C64::new((pt / (m * k) as f64).sqrt(), 0.0));
    }
    w
}

/// Classic WMMSE on (ϖ, υ, W) with θ held fixed, run until the sum rate
/// settles to a relative change below `tol`. The final state has ϖ and υ
/// matched to the final W.
pub fn optimize_beamformer(
    theta: &Theta,
    channels: &ChannelSet,
    pt: f64,
    start: Option<Mat>,
    tol: f64,
    max_iter: usize,
) -> Result<(WmmseState, f64)> {
    let eff = EffectiveChannels::new(theta, channels);
    let w0 = start.unwrap_or_else(|| matched_filter(&eff, channels.num_antennas(), pt));
    let mut state = WmmseState::new(w0);
    let mut rate = sum_rate(&state.w, &eff, channels);
    for _ in 0..max_iter {
        let (varpi, upsilon) = update_weights_receivers(&state.w, &eff, channels);
        state.varpi = varpi;
        state.upsilon = upsilon;
        state.w = update_beamformer(&state, &eff, pt)?.w;
        let next = sum_rate(&state.w, &eff, channels);
        let change = (next - rate).abs();
        rate = next;
        if change <= tol * rate.abs().max(1.0) {
            break;
        }
    }
    let (varpi, upsilon) = update_weights_receivers(&state.w, &eff, channels);
    state.varpi = varpi;
    state.upsilon = upsilon;
    Ok((state, rate))
}

/// Power of one emitted beamformer and whether μ came from bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRecord {
    pub power: f64,
    pub bisection: bool,
}

/// The throughput problem as seen by the PDD driver.
/// Blocks: {ϖ, υ} → W → {θ_t, θ_r}.
pub struct WmmseProblem<'a> {
    channels: &'a ChannelSet,
    pt: f64,
    state: WmmseState,
    theta: Theta,
    eff: EffectiveChannels,
    power_log: Vec<PowerRecord>,
}

impl<'a> WmmseProblem<'a> {
    /// Starts from a matched-filter beamformer at full power for the given θ.
    pub fn new(channels: &'a ChannelSet, pt: f64, theta: Theta) -> Result<Self> {
        if theta.len() != channels.num_elements() {
            return Err(Error::InvalidInput(format!(
                "theta length {} does not match N = {}",
                theta.len(),
                channels.num_elements()
            )));
        }
        let eff = EffectiveChannels::new(&theta, channels);
        let w = matched_filter(&eff, channels.num_antennas(), pt);
        Ok(Self {
            channels,
            pt,
            state: WmmseState::new(w),
            theta,
            eff,
            power_log: Vec::new(),
        })
    }

    pub fn state(&self) -> &WmmseState {
        &self.state
    }

    pub fn effective(&self) -> &EffectiveChannels {
        &self.eff
    }

    pub fn channels(&self) -> &ChannelSet {
        self.channels
    }

    pub fn power_log(&self) -> &[PowerRecord] {
        &self.power_log
    }

    pub fn sum_rate(&self) -> f64 {
        sum_rate(&self.state.w, &self.eff, self.channels)
    }

    fn refresh_weights(&mut self) {
        let (varpi, upsilon) = update_weights_receivers(&self.state.w, &self.eff, self.channels);
        self.state.varpi = varpi;
        self.state.upsilon = upsilon;
    }

    fn refresh_beamformer(&mut self) -> Result<()> {
        let up = update_beamformer(&self.state, &self.eff, self.pt)?;
        self.power_log.push(PowerRecord {
            power: up.w.frobenius_sq(),
            bisection: up.bisection,
        });
        self.state.w = up.w;
        Ok(())
    }

    pub fn into_state(self) -> WmmseState {
        self.state
    }
}

impl ProblemAdapter for WmmseProblem<'_> {
    fn block_names(&self) -> &[&'static str] {
        &["weights_receivers", "beamformer", "theta"]
    }

    fn update_block(&mut self, block: usize, rho: f64, target: &Theta) -> Result<()> {
        match block {
            0 => self.refresh_weights(),
            1 => self.refresh_beamformer()?,
            2 => {
                self.theta = Theta {
                    t: update_theta_side(&self.state, self.channels, Side::T, rho, &target.t)?,
                    r: update_theta_side(&self.state, self.channels, Side::R, rho, &target.r)?,
                };
                self.eff = EffectiveChannels::new(&self.theta, self.channels);
            }
            _ => return Err(Error::InvalidInput(format!("no block {block}"))),
        }
        Ok(())
    }

    fn objective(&self) -> f64 {
        wmmse_objective(&self.state, &self.eff, self.channels)
    }

    fn theta(&self) -> &Theta {
        &self.theta
    }

    fn set_theta(&mut self, theta: Theta) {
        self.theta = theta;
        self.eff = EffectiveChannels::new(&self.theta, self.channels);
    }

    fn performance(&self) -> f64 {
        self.sum_rate()
    }

    fn finalize(&mut self) -> Result<()> {
        self.refresh_weights();
        self.refresh_beamformer()?;
        self.refresh_weights();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, SystemConfig};
    use crate::star::StarCoefficients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// K = 1, M = 1, N = 1 chain where ĥ = 1.
    fn scalar_chain() -> (ChannelSet, Theta) {
        let mut g = Mat::zeros(1, 1);
        g[(0, 0)] = c(1.0, 0.0);
        let ch = ChannelSet::new(g, vec![vec![c(1.0, 0.0)]], vec![1.0], vec![Side::T]).unwrap();
        (ch, Theta::new(vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]).unwrap())
    }

    fn small_instance(seed: u64, m: usize, n: usize, k: usize) -> (ChannelSet, Theta, WmmseState) {
        let cfg = SystemConfig {
            m,
            n,
            k,
            seed,
            ..Default::default()
        };
        let ch = generate_channels(&cfg, 0).unwrap().normalized();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let phases: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let theta = Theta::from(&StarCoefficients::equal_split(&phases));
        let eff = EffectiveChannels::new(&theta, &ch);
        let mut state = WmmseState::new(matched_filter(&eff, m, cfg.pt_watts()));
        let (v, u) = update_weights_receivers(&state.w, &eff, &ch);
        state.varpi = v;
        state.upsilon = u;
        (ch, theta, state)
    }

    #[test]
    fn scalar_chain_values() {
        let (ch, theta) = scalar_chain();
        let eff = EffectiveChannels::new(&theta, &ch);
        let mut w = Mat::zeros(1, 1);
        w[(0, 0)] = c(1.0, 0.0);
        assert!((sinr(0, &w, &eff, &ch) - 1.0).abs() < 1e-15);
        let (varpi, upsilon) = update_weights_receivers(&w, &eff, &ch);
        assert!((varpi[0] - 2.0).abs() < 1e-15);
        assert!((upsilon[0] - c(0.5, 0.0)).norm() < 1e-15);

        let zero = Mat::zeros(1, 1);
        assert_eq!(sinr(0, &zero, &eff, &ch), 0.0);
        assert_eq!(sum_rate(&zero, &eff, &ch), 0.0);
        let (varpi, upsilon) = update_weights_receivers(&zero, &eff, &ch);
        assert_eq!((varpi[0], upsilon[0]), (1.0, c(0.0, 0.0)));

        let mut state = WmmseState::new(zero);
        assert_eq!(mse(0, &state, &eff, &ch), 1.0);
        state.upsilon[0] = c(1.0, 0.0);
        assert!((mse(0, &state, &eff, &ch) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sum_rate_of_unit_sinrs() {
        // six decoupled scalar users, each with γ = 1
        let k = 6;
        let g = Mat::identity(k);
        let h: Vec<Vec<C64>> = (0..k)
            .map(|u| (0..k).map(|n| if n == u { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
            .collect();
        let side = (0..k).map(|u| if u < 3 { Side::T } else { Side::R }).collect();
        let ch = ChannelSet::new(g, h, vec![1.0; k], side).unwrap();
        let theta = Theta::new(vec![c(1.0, 0.0); k], vec![c(1.0, 0.0); k]).unwrap();
        let eff = EffectiveChannels::new(&theta, &ch);
        let w = Mat::identity(k);
        assert!((sum_rate(&w, &eff, &ch) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_matches_signal_model() {
        // recompute γ_k from y_k = h_kᴴ Θ_i G Σ w_ℓ s_ℓ directly
        let (ch, theta, state) = small_instance(3, 4, 6, 4);
        let eff = EffectiveChannels::new(&theta, &ch);
        for k in 0..4 {
            let th = theta.side(ch.side[k]);
            let amp = |l: usize| -> C64 {
                let gw = ch.g.mul_vec(&state.w.column(l));
                (0..6).map(|n| ch.h[k][n].conj() * th[n] * gw[n]).sum()
            };
            let sig = amp(k).norm_sqr();
            let intf: f64 = (0..4).filter(|&l| l != k).map(|l| amp(l).norm_sqr()).sum();
            let expect = sig / (intf + ch.sigma2[k]);
            let got = sinr(k, &state.w, &eff, &ch);
            assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn weights_identities() {
        let (ch, theta, state) = small_instance(5, 4, 8, 4);
        let eff = EffectiveChannels::new(&theta, &ch);
        // e_k = 1/ϖ_k = 1/(1+γ_k) at the MMSE receiver
        for k in 0..4 {
            let e = mse(k, &state, &eff, &ch);
            assert!((e - 1.0 / state.varpi[k]).abs() < 1e-10);
            let g = sinr(k, &state.w, &eff, &ch);
            assert!((e - 1.0 / (1.0 + g)).abs() < 1e-10);
        }
        let rate = sum_rate(&state.w, &eff, &ch);
        let from_weights: f64 = state.varpi.iter().map(|v| v.log2()).sum();
        assert!((rate - from_weights).abs() < 1e-10);
    }

    #[test]
    fn weights_block_is_a_minimizer() {
        let (ch, theta, mut state) = small_instance(6, 4, 8, 4);
        let eff = EffectiveChannels::new(&theta, &ch);
        let best = wmmse_objective(&state, &eff, &ch);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let k = rng.random_range(0..4);
            let saved = (state.varpi[k], state.upsilon[k]);
            state.varpi[k] *= 1.0 + 0.1 * (rng.random::<f64>() - 0.5);
            state.upsilon[k] += c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.01 * saved.1.norm();
            assert!(wmmse_objective(&state, &eff, &ch) >= best - 1e-12);
            state.varpi[k] = saved.0;
            state.upsilon[k] = saved.1;
        }
    }

    /// Σ ϖ_k e_k as a function of W only.
    fn w_objective(state: &WmmseState, w: &Mat, eff: &EffectiveChannels, ch: &ChannelSet) -> f64 {
        let s = WmmseState {
            w: w.clone(),
            ..state.clone()
        };
        wmmse_objective(&s, eff, ch)
    }

    #[test]
    fn inactive_power_constraint_gives_stationary_point() {
        let (ch, theta, state) = small_instance(8, 4, 8, 4);
        let eff = EffectiveChannels::new(&theta, &ch);
        let up = update_beamformer(&state, &eff, 1e9).unwrap();
        assert_eq!(up.mu, 0.0);
        assert!(!up.bisection);
        let h = 1e-6;
        let f0 = w_objective(&state, &up.w, &eff, &ch);
        for i in 0..4 {
            for j in 0..4 {
                for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                    let mut wp = up.w.clone();
                    wp[(i, j)] += dir * h;
                    let mut wm = up.w.clone();
                    wm[(i, j)] -= dir * h;
                    let grad = (w_objective(&state, &wp, &eff, &ch) - w_objective(&state, &wm, &eff, &ch)) / (2.0 * h);
                    assert!(grad.abs() < 1e-5 * f0.abs().max(1.0), "grad {grad}");
                }
            }
        }
    }

    #[test]
    fn tight_power_constraint_is_met_with_equality() {
        for seed in 0..10 {
            let (ch, theta, state) = small_instance(seed, 8, 20, 6);
            let eff = EffectiveChannels::new(&theta, &ch);
            let pt = 0.1;
            let up = update_beamformer(&state, &eff, pt).unwrap();
            let p = up.w.frobenius_sq();
            assert!(p <= pt + 1e-8);
            if up.bisection {
                assert!((p - pt).abs() <= 1e-8, "power {p}");
                assert!(up.mu > 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_channels() {
        // one element: every effective channel is parallel to the same row of G
        for (seed, pt) in [(0, 0.1), (1, 0.1), (2, 1e12)] {
            let (ch, theta, state) = small_instance(seed, 8, 1, 2);
            let eff = EffectiveChannels::new(&theta, &ch);
            let before = w_objective(&state, &state.w, &eff, &ch);
            let up = update_beamformer(&state, &eff, pt).unwrap();
            let after = w_objective(&state, &up.w, &eff, &ch);
            assert!(after <= before + 1e-12, "{before} -> {after}");
            assert!(up.w.frobenius_sq() <= pt * (1.0 + 1e-12));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let mut w = up.w.clone();
                let (i, j) = (rng.random_range(0..8), rng.random_range(0..2));
                w[(i, j)] += c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 1e-4 * up.w.frobenius_sq().sqrt();
                let p = w.frobenius_sq();
                if p > pt {
                    w.scale((pt / p).sqrt());
                }
                assert!(w_objective(&state, &w, &eff, &ch) >= after - 1e-10 * after.abs().max(1.0));
            }
        }
    }

    #[test]
    fn beamformer_zero_channel() {
        let (ch, theta) = scalar_chain();
        let eff = EffectiveChannels::new(&theta, &ch);
        let state = WmmseState::new(Mat::zeros(1, 1));
        let up = update_beamformer(&state, &eff, 1.0).unwrap();
        assert!(up.zero_channel);
        assert_eq!(up.w.frobenius_sq(), 0.0);
    }

    #[test]
    fn beamformer_beats_perturbations() {
        let (ch, theta, state) = small_instance(12, 4, 8, 4);
        let eff = EffectiveChannels::new(&theta, &ch);
        let pt = 0.1;
        let up = update_beamformer(&state, &eff, pt).unwrap();
        let best = w_objective(&state, &up.w, &eff, &ch);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mut w = up.w.clone();
            let i = rng.random_range(0..4);
            let j = rng.random_range(0..4);
            w[(i, j)] += c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 1e-3;
            let p = w.frobenius_sq();
            if p > pt {
                w.scale((pt / p).sqrt());
            }
            assert!(w_objective(&state, &w, &eff, &ch) >= best - 1e-10);
        }
    }

    fn theta_block_objective(state: &WmmseState, ch: &ChannelSet, side: Side, x: &[C64], other: &Theta, rho: f64, z: &[C64]) -> f64 {
        let mut theta = other.clone();
        *theta.side_mut(side) = x.to_vec();
        let eff = EffectiveChannels::new(&theta, ch);
        let f: f64 = ch
            .users_on(side)
            .map(|k| state.varpi[k] * mse(k, state, &eff, ch))
            .sum();
        let pen: f64 = x.iter().zip(z).map(|(a, b)| (a - b).norm_sqr()).sum();
        f + pen / (2.0 * rho)
    }

    #[test]
    fn theta_update_with_zero_beamformer_is_penalty_minimizer() {
        let (ch, _, mut state) = small_instance(2, 4, 8, 4);
        state.w = Mat::zeros(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z: Vec<C64> = (0..8).map(|_| c(rng.random(), rng.random())).collect();
        let x = update_theta_side(&state, &ch, Side::T, 0.7, &z).unwrap();
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn theta_update_is_stationary() {
        let (ch, theta, state) = small_instance(4, 4, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for side in Side::BOTH {
            let rho = 0.05;
            let z: Vec<C64> = theta.side(side).iter().map(|t| t + c(rng.random::<f64>() - 0.5, 0.0) * 0.1).collect();
            let x = update_theta_side(&state, &ch, side, rho, &z).unwrap();
            let f0 = theta_block_objective(&state, &ch, side, &x, &theta, rho, &z);
            let h = 1e-5;
            let mut gnorm = 0.0f64;
            for n in 0..8 {
                for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                    let mut xp = x.clone();
                    xp[n] += dir * h;
                    let mut xm = x.clone();
                    xm[n] -= dir * h;
                    let g = (theta_block_objective(&state, &ch, side, &xp, &theta, rho, &z)
                        - theta_block_objective(&state, &ch, side, &xm, &theta, rho, &z))
                        / (2.0 * h);
                    gnorm = gnorm.max(g.abs());
                }
            }
            assert!(gnorm < 1e-4 * f0.abs().max(1.0), "gradient {gnorm}");
        }
    }

    #[test]
    fn theta_tends_to_target_as_rho_shrinks() {
        let (ch, theta, state) = small_instance(7, 4, 8, 4);
        let z = theta.t.clone();
        let mut last = f64::INFINITY;
        for rho in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let x = update_theta_side(&state, &ch, Side::T, rho, &z).unwrap();
            let gap = crate::numerics::norm_inf_diff(&x, &z);
            assert!(gap <= last);
            last = gap;
        }
        // O(ρ): the last step is ~10x smaller than the one before
        let x4 = update_theta_side(&state, &ch, Side::T, 1e-4, &z).unwrap();
        let x5 = update_theta_side(&state, &ch, Side::T, 1e-5, &z).unwrap();
        let r = crate::numerics::norm_inf_diff(&x5, &z) / crate::numerics::norm_inf_diff(&x4, &z);
        assert!(r < 0.15, "ratio {r}");
    }

    #[test]
    fn optimize_beamformer_power_and_identity() {
        let (ch, theta, _) = small_instance(9, 8, 20, 6);
        let (state, rate) = optimize_beamformer(&theta, &ch, 0.1, None, 1e-10, 500).unwrap();
        assert!(state.power() <= 0.1 + 1e-8);
        let eff = EffectiveChannels::new(&theta, &ch);
        assert!((sum_rate(&state.w, &eff, &ch) - rate).abs() < 1e-12);
        let from_weights: f64 = state.varpi.iter().map(|v| v.log2()).sum();
        assert!((rate - from_weights).abs() < 1e-9);
    }
}
