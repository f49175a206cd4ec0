//! STAR-RIS coefficient vectors and the passive-lossless constraints.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for [`ConstraintResiduals::is_feasible`].
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Which half-space of the surface a user (or coefficient vector) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// Transmission (refraction) side.
    T,
    /// Reflection side.
    R,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::T, Side::R];

    pub fn other(self) -> Side {
        match self {
            Side::T => Side::R,
            Side::R => Side::T,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::T => "t",
            Side::R => "r",
        }
    }
}

/// Maps an angle into the canonical range `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Transmission and reflection amplitudes and phases of an N-element surface.
#[derive(Debug, Clone, PartialEq)]
pub struct StarCoefficients {
    pub beta_t: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub phi_r: Vec<f64>,
}

impl StarCoefficients {
    /// Validates lengths and amplitude range; phases are wrapped into `[0, 2π)`.
    pub fn new(beta_t: Vec<f64>, beta_r: Vec<f64>, phi_t: Vec<f64>, phi_r: Vec<f64>) -> Result<Self> {
        let n = beta_t.len();
        if beta_r.len() != n || phi_t.len() != n || phi_r.len() != n {
            return Err(Error::InvalidInput(format!(
                "coefficient length mismatch: beta_t={}, beta_r={}, phi_t={}, phi_r={}",
                n,
                beta_r.len(),
                phi_t.len(),
                phi_r.len()
            )));
        }
        for (i, &b) in beta_t.iter().chain(&beta_r).enumerate() {
            if !b.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&b) {
                return Err(Error::InvalidInput(format!(
                    "amplitude {} = {b} outside [0, 1]",
                    i % n.max(1)
                )));
            }
        }
        if phi_t.iter().chain(&phi_r).any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite phase".into()));
        }
        Ok(Self {
            beta_t: beta_t.into_iter().map(|b| b.clamp(0.0, 1.0)).collect(),
            beta_r: beta_r.into_iter().map(|b| b.clamp(0.0, 1.0)).collect(),
            phi_t: phi_t.into_iter().map(wrap_phase).collect(),
            phi_r: phi_r.into_iter().map(wrap_phase).collect(),
        })
    }

    /// Equal power split with `φ_r = φ_t + π/2`, which satisfies both constraints.
    pub fn equal_split(phi_t: &[f64]) -> Self {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let n = phi_t.len();
        Self {
            beta_t: vec![half; n],
            beta_r: vec![half; n],
            phi_t: phi_t.iter().map(|&p| wrap_phase(p)).collect(),
            phi_r: phi_t
                .iter()
                .map(|&p| wrap_phase(p + std::f64::consts::FRAC_PI_2))
                .collect(),
        }
    }

    /// Polar decomposition of complex coefficient vectors.
    pub fn from_complex(theta_t: &[C64], theta_r: &[C64]) -> Result<Self> {
        let split = |v: &[C64]| -> (Vec<f64>, Vec<f64>) {
            v.iter().map(|z| (z.norm(), wrap_phase(z.arg()))).unzip()
        };
        let (bt, pt) = split(theta_t);
        let (br, pr) = split(theta_r);
        Self::new(bt, br, pt, pr)
    }

    pub fn len(&self) -> usize {
        self.beta_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_t.is_empty()
    }

    pub fn beta(&self, side: Side) -> &[f64] {
        match side {
            Side::T => &self.beta_t,
            Side::R => &self.beta_r,
        }
    }

    pub fn phi(&self, side: Side) -> &[f64] {
        match side {
            Side::T => &self.phi_t,
            Side::R => &self.phi_r,
        }
    }

    /// θ_i = diag(β_i) e^{jφ_i} for one side.
    pub fn side_complex(&self, side: Side) -> Vec<C64> {
        self.beta(side)
            .iter()
            .zip(self.phi(side))
            .map(|(&b, &p)| C64::from_polar(b, p))
            .collect()
    }

    pub fn to_complex(&self) -> (Vec<C64>, Vec<C64>) {
        (self.side_complex(Side::T), self.side_complex(Side::R))
    }

    /// |φ_t,n − φ_r,n| with both phases in `[0, 2π)`.
    pub fn phase_gaps(&self) -> Vec<f64> {
        self.phi_t
            .iter()
            .zip(&self.phi_r)
            .map(|(t, r)| (t - r).abs())
            .collect()
    }

    pub fn residuals(&self) -> ConstraintResiduals {
        constraint_residuals(self)
    }
}

/// Complex coefficient vectors `(θ_t, θ_r)` without any constraint attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub t: Vec<C64>,
    pub r: Vec<C64>,
}

impl Theta {
    pub fn new(t: Vec<C64>, r: Vec<C64>) -> Result<Self> {
        if t.len() != r.len() {
            return Err(Error::InvalidInput(format!(
                "theta length mismatch: {} vs {}",
                t.len(),
                r.len()
            )));
        }
        Ok(Self { t, r })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn side(&self, side: Side) -> &[C64] {
        match side {
            Side::T => &self.t,
            Side::R => &self.r,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<C64> {
        match side {
            Side::T => &mut self.t,
            Side::R => &mut self.r,
        }
    }
}

impl From<&StarCoefficients> for Theta {
    fn from(c: &StarCoefficients) -> Self {
        let (t, r) = c.to_complex();
        Self { t, r }
    }
}

/// Element-wise violations of the energy and coupled phase-shift constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintResiduals {
    /// β_t² + β_r² − 1
    pub energy: Vec<f64>,
    /// cos(φ_t − φ_r)
    pub phase: Vec<f64>,
}

impl ConstraintResiduals {
    pub fn max_energy(&self) -> f64 {
        self.energy.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_phase(&self) -> f64 {
        self.phase.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_energy() <= tol && self.max_phase() <= tol
    }

    pub fn is_energy_feasible(&self, tol: f64) -> bool {
        self.max_energy() <= tol
    }
}

pub fn constraint_residuals(coeffs: &StarCoefficients) -> ConstraintResiduals {
    residuals_raw(&coeffs.beta_t, &coeffs.beta_r, &coeffs.phi_t, &coeffs.phi_r)
}

fn residuals_raw(beta_t: &[f64], beta_r: &[f64], phi_t: &[f64], phi_r: &[f64]) -> ConstraintResiduals {
    ConstraintResiduals {
        energy: beta_t
            .iter()
            .zip(beta_r)
            .map(|(t, r)| t * t + r * r - 1.0)
            .collect(),
        phase: phi_t.iter().zip(phi_r).map(|(t, r)| (t - r).cos()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    #[test]
    fn unit_amplitude_zero_phase() {
        let c = StarCoefficients::new(vec![1.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let (t, _) = c.to_complex();
        assert!((t[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn equal_split_quadrature() {
        let c = StarCoefficients::new(
            vec![FRAC_1_SQRT_2],
            vec![FRAC_1_SQRT_2],
            vec![0.0],
            vec![FRAC_PI_2],
        )
        .unwrap();
        let (t, r) = c.to_complex();
        assert!((t[0] - C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-8);
        assert!((r[0] - C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-8);
        let res = c.residuals();
        assert!(res.max_energy() < 1e-15 && res.max_phase() < 1e-15);
        assert!(res.is_feasible(FEASIBILITY_TOL));
    }

    #[test]
    fn full_amplitude_both_sides_violates_energy() {
        let c = StarCoefficients::new(vec![1.0], vec![1.0], vec![0.0], vec![FRAC_PI_2]).unwrap();
        assert!((c.residuals().energy[0] - 1.0).abs() < 1e-15);
        assert!(!c.residuals().is_feasible(FEASIBILITY_TOL));
    }

    #[test]
    fn three_half_pi_gap_is_admissible() {
        let c = StarCoefficients::new(
            vec![FRAC_1_SQRT_2],
            vec![FRAC_1_SQRT_2],
            vec![3.0 * FRAC_PI_2],
            vec![0.0],
        )
        .unwrap();
        assert!(c.residuals().max_phase() < 1e-15);
        assert!((c.phase_gaps()[0] - 3.0 * FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(StarCoefficients::new(vec![1.0], vec![0.0, 0.0], vec![0.0], vec![0.0]).is_err());
        assert!(StarCoefficients::new(vec![1.5], vec![0.0], vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn phases_are_wrapped() {
        let c = StarCoefficients::new(vec![1.0], vec![0.0], vec![-FRAC_PI_2], vec![5.0 * PI]).unwrap();
        assert!((c.phi_t[0] - 3.0 * FRAC_PI_2).abs() < 1e-12);
        assert!((c.phi_r[0] - PI).abs() < 1e-12);
        assert_eq!(wrap_phase(-1e-18), 0.0);
    }

    fn feasible_coeffs() -> impl Strategy<Value = StarCoefficients> {
        (1usize..24).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..FRAC_PI_2, n),
                proptest::collection::vec(0.0f64..TAU, n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(omega, phi, plus)| {
                    let phi_r = phi
                        .iter()
                        .zip(&plus)
                        .map(|(p, &s)| if s { p + FRAC_PI_2 } else { p - FRAC_PI_2 })
                        .collect();
                    StarCoefficients::new(
                        omega.iter().map(|w| w.sin()).collect(),
                        omega.iter().map(|w| w.cos()).collect(),
                        phi,
                        phi_r,
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn complex_round_trip(c in feasible_coeffs()) {
            let (t, r) = c.to_complex();
            let back = StarCoefficients::from_complex(&t, &r).unwrap();
            let (t2, r2) = back.to_complex();
            for (a, b) in t.iter().chain(&r).zip(t2.iter().chain(&r2)) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            // phases are only meaningful where the amplitude is nonzero
            for n in 0..c.len() {
                if c.beta_t[n] > 1e-9 {
                    let d = (c.phi_t[n] - back.phi_t[n]).sin().abs();
                    prop_assert!(d < 1e-9);
                }
            }
        }

        #[test]
        fn feasible_gaps_are_quarter_turns(c in feasible_coeffs()) {
            let res = c.residuals();
            prop_assert!(res.is_feasible(1e-12));
            for g in c.phase_gaps() {
                let g = g % TAU;
                let near = (g - FRAC_PI_2).abs().min((g - 3.0 * FRAC_PI_2).abs());
                prop_assert!(near < 1e-9, "gap {g}");
            }
        }

        #[test]
        fn sign_flip_symmetry(c in feasible_coeffs(), side_t in any::<bool>()) {
            // (β, φ) → (−β, φ + π) leaves θ unchanged; renormalizing back to β ≥ 0
            // and comparing residuals must give identical values.
            let (mut bt, mut pt) = (c.beta_t.clone(), c.phi_t.clone());
            let (mut br, mut pr) = (c.beta_r.clone(), c.phi_r.clone());
            let (b, p) = if side_t { (&mut bt, &mut pt) } else { (&mut br, &mut pr) };
            for (x, y) in b.iter_mut().zip(p.iter_mut()) {
                *x = -*x;
                *y += PI;
            }
            let flipped = residuals_raw(&bt, &br, &pt, &pr);
            prop_assert!(flipped.max_phase() < 1e-9);
            let (b, p) = if side_t { (&mut bt, &mut pt) } else { (&mut br, &mut pr) };
            for (x, y) in b.iter_mut().zip(p.iter_mut()) {
                *x = -*x;
                *y -= PI;
            }
            let renorm = StarCoefficients::new(bt, br, pt, pr).unwrap();
            let base = c.residuals();
            let again = renorm.residuals();
            for (a, b) in base.energy.iter().zip(&again.energy) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in base.phase.iter().zip(&again.phase) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in base.energy.iter().zip(&flipped.energy) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
