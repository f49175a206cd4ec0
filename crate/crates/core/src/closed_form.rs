//! Element-wise closed-form minimizers for the auxiliary coefficient block.
//!
//! The auxiliary block minimizes `Σ_i ‖θ̃_i + ϑ_i‖²` where `ϑ_i = −θ_i + ρλ_i`.
//! Under the energy constraint this reduces to minimizing
//! `Σ_i Re(ϑ_iᴴ θ̃_i)`, which separates across elements. Phases (for fixed
//! amplitudes) and amplitudes (for fixed phases) are each solved exactly.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::star::{wrap_phase, StarCoefficients};

/// Angle of a complex number with `∠0 := 0`.
fn angle(z: C64) -> f64 {
    if z.norm_sqr() == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

fn check_len(what: &str, lens: &[usize]) -> Result<()> {
    if lens.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvalidInput(format!("{what}: length mismatch {lens:?}")));
    }
    Ok(())
}

/// Phase subproblem of one element for fixed amplitudes.
#[derive(Debug, Clone, Copy)]
pub struct ElementPhaseProblem {
    /// β̃_t ϑ_t
    pub vt: C64,
    /// β̃_r ϑ_r
    pub vr: C64,
    /// vt* + j vr*  (pairs with ψ_r = j ψ_t)
    pub phi_plus: C64,
    /// vt* − j vr*  (pairs with ψ_r = −j ψ_t)
    pub phi_minus: C64,
}

impl ElementPhaseProblem {
    pub fn new(vt: C64, vr: C64) -> Self {
        let j = C64::i();
        Self {
            vt,
            vr,
            phi_plus: vt.conj() + j * vr.conj(),
            phi_minus: vt.conj() - j * vr.conj(),
        }
    }

    pub fn objective(&self, phi_t: f64, phi_r: f64) -> f64 {
        (self.vt.conj() * C64::from_polar(1.0, phi_t)).re
            + (self.vr.conj() * C64::from_polar(1.0, phi_r)).re
    }

    /// Returns `(φ_t, φ_r, objective)` for the better of the two candidates.
    /// Ties go to the `φ⁺` candidate.
    pub fn solve(&self) -> (f64, f64, f64) {
        // candidate objective is −|φ±|
        if self.phi_plus.norm() >= self.phi_minus.norm() {
            let pt = PI - angle(self.phi_plus);
            (wrap_phase(pt), wrap_phase(pt + FRAC_PI_2), -self.phi_plus.norm())
        } else {
            let pt = PI - angle(self.phi_minus);
            (wrap_phase(pt), wrap_phase(pt - FRAC_PI_2), -self.phi_minus.norm())
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseUpdate {
    pub phi_t: Vec<f64>,
    pub phi_r: Vec<f64>,
    /// Σ_n Re(ϑ̃_t* ψ_t) + Re(ϑ̃_r* ψ_r) at the returned phases.
    pub objective: f64,
}

/// Optimal coupled phases for fixed amplitudes. The returned phases satisfy
/// `|φ_t − φ_r| ∈ {π/2, 3π/2}` by construction.
pub fn update_phases(
    beta_t: &[f64],
    beta_r: &[f64],
    vartheta_t: &[C64],
    vartheta_r: &[C64],
) -> Result<PhaseUpdate> {
    check_len(
        "update_phases",
        &[beta_t.len(), beta_r.len(), vartheta_t.len(), vartheta_r.len()],
    )?;
    let n = beta_t.len();
    let mut out = PhaseUpdate {
        phi_t: Vec::with_capacity(n),
        phi_r: Vec::with_capacity(n),
        objective: 0.0,
    };
    for i in 0..n {
        let p = ElementPhaseProblem::new(vartheta_t[i] * beta_t[i], vartheta_r[i] * beta_r[i]);
        let (pt, pr, obj) = p.solve();
        out.phi_t.push(pt);
        out.phi_r.push(pr);
        out.objective += obj;
    }
    Ok(out)
}

/// Amplitude subproblem of one element for fixed phases.
#[derive(Debug, Clone, Copy)]
pub struct ElementAmplitudeProblem {
    /// e^{−jφ_t} ϑ_t
    pub vt: C64,
    /// e^{−jφ_r} ϑ_r
    pub vr: C64,
    pub a: f64,
    pub b: f64,
    pub xi: f64,
    /// β_t = sin ω, β_r = cos ω
    pub omega: f64,
}

impl ElementAmplitudeProblem {
    pub fn new(vt: C64, vr: C64) -> Self {
        let a = vt.re;
        // sgn(0) := +1, so a zero b maps to ξ ∈ [0, π]
        let b = vr.re + 0.0;
        let xi = b.atan2(a);
        let omega = if a == 0.0 && b == 0.0 {
            0.0
        } else if xi < -FRAC_PI_2 {
            -FRAC_PI_2 - xi
        } else if xi < FRAC_PI_4 {
            0.0
        } else {
            FRAC_PI_2
        };
        Self {
            vt,
            vr,
            a,
            b,
            xi,
            omega,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }

    pub fn objective_at(&self, omega: f64) -> f64 {
        self.a * omega.sin() + self.b * omega.cos()
    }

    pub fn objective(&self) -> f64 {
        self.objective_at(self.omega)
    }
}

#[derive(Debug, Clone)]
pub struct AmplitudeUpdate {
    pub beta_t: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub objective: f64,
    /// Elements where `a_n = b_n = 0`; these get `ω = 0`.
    pub degenerate: Vec<usize>,
}

/// Optimal amplitudes for fixed phases, parameterized as `(sin ω, cos ω)`.
pub fn update_amplitudes(
    phi_t: &[f64],
    phi_r: &[f64],
    vartheta_t: &[C64],
    vartheta_r: &[C64],
) -> Result<AmplitudeUpdate> {
    check_len(
        "update_amplitudes",
        &[phi_t.len(), phi_r.len(), vartheta_t.len(), vartheta_r.len()],
    )?;
    let n = phi_t.len();
    let mut out = AmplitudeUpdate {
        beta_t: Vec::with_capacity(n),
        beta_r: Vec::with_capacity(n),
        objective: 0.0,
        degenerate: Vec::new(),
    };
    for i in 0..n {
        let p = ElementAmplitudeProblem::new(
            C64::from_polar(1.0, -phi_t[i]) * vartheta_t[i],
            C64::from_polar(1.0, -phi_r[i]) * vartheta_r[i],
        );
        if p.is_degenerate() {
            out.degenerate.push(i);
        }
        out.beta_t.push(p.omega.sin());
        out.beta_r.push(p.omega.cos());
        out.objective += p.objective();
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: StarCoefficients,
    pub objective: f64,
    pub degenerate: Vec<usize>,
}

/// Auxiliary-block minimizer when transmission and reflection phases are
/// independent: only `β_t² + β_r² = 1` is enforced.
pub fn project_independent(vartheta_t: &[C64], vartheta_r: &[C64]) -> Result<Projection> {
    check_len("project_independent", &[vartheta_t.len(), vartheta_r.len()])?;
    let n = vartheta_t.len();
    let (mut bt, mut br, mut pt, mut pr) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut objective = 0.0;
    let mut degenerate = Vec::new();
    for (&vt, &vr) in vartheta_t.iter().zip(vartheta_r) {
        let (mt, mr) = (vt.norm(), vr.norm());
        let s = mt.hypot(mr);
        if s == 0.0 {
            degenerate.push(bt.len());
            bt.push(0.0);
            br.push(1.0);
            pt.push(0.0);
            pr.push(0.0);
            continue;
        }
        bt.push(mt / s);
        br.push(mr / s);
        pt.push(PI - angle(vt.conj()));
        pr.push(PI - angle(vr.conj()));
        objective -= s;
    }
    Ok(Projection {
        coeffs: StarCoefficients::new(bt, br, pt, pr)?,
        objective,
        degenerate,
    })
}

/// Phase-only minimizer of `Re(ϑ_n* ψ_n)` over `|ψ_n| = 1`, i.e. `ψ_n = −ϑ_n/|ϑ_n|`.
/// Returned as phases in `[0, 2π)`.
pub fn project_unit_modulus(vartheta: &[C64]) -> Vec<f64> {
    vartheta
        .iter()
        .map(|&v| wrap_phase(PI - angle(v.conj())))
        .collect()
}

/// `Σ_i Re(ϑ_iᴴ θ̃_i)`, the variable part of the auxiliary objective.
pub fn auxiliary_objective(coeffs: &StarCoefficients, vartheta_t: &[C64], vartheta_r: &[C64]) -> f64 {
    let (tt, tr) = coeffs.to_complex();
    let part = |v: &[C64], t: &[C64]| -> f64 { v.iter().zip(t).map(|(a, b)| (a.conj() * b).re).sum() };
    part(vartheta_t, &tt) + part(vartheta_r, &tr)
}
