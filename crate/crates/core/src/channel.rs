//! Simulation environment: geometry, path loss and Rician fading.
//!
//! The surface is a half-wavelength ULA of N elements at the origin, lying on
//! the x-axis. The BS (an M-element half-wavelength ULA, also along x) sits
//! on the reflection half-plane (y > 0). Users are split evenly between the
//! two sides on half-circles around the surface, at equally spaced angles in
//! (15°, 165°) (mirrored into y < 0 for the transmission side).

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Mat;
use crate::star::Side;

/// Physical layer constants of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// BS antennas.
    #[serde(alias = "M")]
    pub m: usize,
    /// Surface elements.
    #[serde(alias = "N")]
    pub n: usize,
    /// Users, half per side.
    #[serde(alias = "K")]
    pub k: usize,
    #[serde(alias = "Pt_dbm")]
    pub pt_dbm: f64,
    pub noise_dbm: f64,
    pub rician_db: f64,
    pub path_loss_exponent: f64,
    /// Path loss at the 1 m reference distance.
    pub pl0_db: f64,
    pub bs_distance_m: f64,
    pub bs_angle_deg: f64,
    pub user_radius_m: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 8,
            n: 20,
            k: 6,
            pt_dbm: 20.0,
            noise_dbm: -110.0,
            rician_db: 3.0,
            path_loss_exponent: 2.2,
            pl0_db: 30.0,
            bs_distance_m: 50.0,
            bs_angle_deg: 20.0,
            user_radius_m: 3.0,
            seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::InvalidInput(format!(
                "M, N, K must be at least 1 (got M={}, N={}, K={})",
                self.m, self.n, self.k
            )));
        }
        if !self.k.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("K must be even, got {}", self.k)));
        }
        let finite = [
            ("pt_dbm", self.pt_dbm),
            ("noise_dbm", self.noise_dbm),
            ("path_loss_exponent", self.path_loss_exponent),
            ("pl0_db", self.pl0_db),
            ("bs_angle_deg", self.bs_angle_deg),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        // +inf is the pure line-of-sight limit
        if self.rician_db.is_nan() {
            return Err(Error::InvalidInput("rician_db is NaN".into()));
        }
        for (name, v) in [
            ("bs_distance_m", self.bs_distance_m),
            ("user_radius_m", self.user_radius_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn pt_watts(&self) -> f64 {
        dbm_to_watts(self.pt_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Linear Rician factor κ.
    pub fn kappa(&self) -> f64 {
        10f64.powf(self.rician_db / 10.0)
    }
}

/// Large-scale gain `10^(−PL0/10) · d^(−α)`.
pub fn pathloss_linear(d_m: f64, config: &SystemConfig) -> Result<f64> {
    if !(d_m > 0.0) {
        return Err(Error::InvalidInput(format!("distance must be positive, got {d_m}")));
    }
    Ok(10f64.powf(-config.pl0_db / 10.0) * d_m.powf(-config.path_loss_exponent))
}

/// Channel state of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → surface, N × M (row n holds element n's response to each antenna).
    pub g: Mat,
    /// Surface → user k, length N each.
    pub h: Vec<Vec<C64>>,
    /// Noise power per user (W).
    pub sigma2: Vec<f64>,
    pub side: Vec<Side>,
    cascade: Vec<Mat>,
}

impl ChannelSet {
    pub fn new(g: Mat, h: Vec<Vec<C64>>, sigma2: Vec<f64>, side: Vec<Side>) -> Result<Self> {
        let n = g.rows();
        if h.iter().any(|hk| hk.len() != n) {
            return Err(Error::InvalidInput("user channel length must equal N".into()));
        }
        if sigma2.len() != h.len() || side.len() != h.len() {
            return Err(Error::InvalidInput("sigma2/side length must equal K".into()));
        }
        if sigma2.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("noise power must be positive".into()));
        }
        if !g.is_finite() || h.iter().any(|hk| !crate::numerics::all_finite(hk)) {
            return Err(Error::InvalidInput("non-finite channel entries".into()));
        }
        let cascade = h
            .iter()
            .map(|hk| Mat::from_fn(n, g.cols(), |i, m| hk[i].conj() * g[(i, m)]))
            .collect();
        Ok(Self {
            g,
            h,
            sigma2,
            side,
            cascade,
        })
    }

    pub fn num_users(&self) -> usize {
        self.h.len()
    }

    pub fn num_elements(&self) -> usize {
        self.g.rows()
    }

    pub fn num_antennas(&self) -> usize {
        self.g.cols()
    }

    /// `diag(h_kᴴ) G`, the N × M cascaded channel of user k.
    pub fn cascade(&self, k: usize) -> &Mat {
        &self.cascade[k]
    }

    pub fn users_on(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.side
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == side)
            .map(|(k, _)| k)
    }

    /// Rescales every user channel by `1/σ_k` so that all noise powers become 1.
    /// SINRs and rates are unchanged.
    pub fn normalized(&self) -> ChannelSet {
        let h = self
            .h
            .iter()
            .zip(&self.sigma2)
            .map(|(hk, s)| {
                let f = 1.0 / s.sqrt();
                hk.iter().map(|z| z * f).collect()
            })
            .collect();
        ChannelSet::new(self.g.clone(), h, vec![1.0; self.sigma2.len()], self.side.clone())
            .expect("rescaling preserves validity")
    }
}

fn steering(len: usize, direction_cos: f64) -> Vec<C64> {
    (0..len)
        .map(|i| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * direction_cos))
        .collect()
}

/// Angles (radians, measured from the +x axis) of the users on one side.
pub fn user_angles(per_side: usize) -> Vec<f64> {
    let (lo, hi) = (15f64.to_radians(), 165f64.to_radians());
    let step = (hi - lo) / (per_side + 1) as f64;
    (1..=per_side).map(|j| lo + step * j as f64).collect()
}

struct Fading {
    los: f64,
    nlos: f64,
}

impl Fading {
    fn new(kappa: f64) -> Self {
        // written so that κ = ∞ yields (1, 0)
        Self {
            los: (1.0 / (1.0 + 1.0 / kappa)).sqrt(),
            nlos: (1.0 / (1.0 + kappa)).sqrt(),
        }
    }

    fn draw(&self, los: C64, rng: &mut ChaCha8Rng) -> C64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        los * self.los + C64::new(re, im) * (self.nlos * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Draws realization `realization` of the channel set; seeded by `config.seed + realization`.
pub fn generate_channels(config: &SystemConfig, realization: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(realization));
    let fading = Fading::new(config.kappa());
    let (n, m, k) = (config.n, config.m, config.k);

    let bs_angle = config.bs_angle_deg.to_radians();
    let a_ris = steering(n, bs_angle.cos());
    let a_bs = steering(m, -bs_angle.cos());
    let g_amp = pathloss_linear(config.bs_distance_m, config)?.sqrt();
    let mut g = Mat::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            g[(i, j)] = fading.draw(a_ris[i] * a_bs[j], &mut rng) * g_amp;
        }
    }

    let angles = user_angles(k / 2);
    let h_amp = pathloss_linear(config.user_radius_m, config)?.sqrt();
    let mut h = Vec::with_capacity(k);
    let mut side = Vec::with_capacity(k);
    for user in 0..k {
        let s = if user < k / 2 { Side::T } else { Side::R };
        // mirrored positions share cos(angle), only the side label differs
        let los = steering(n, angles[user % (k / 2)].cos());
        h.push(
            los.into_iter()
                .map(|l| fading.draw(l, &mut rng) * h_amp)
                .collect(),
        );
        side.push(s);
    }
    ChannelSet::new(g, h, vec![config.noise_watts(); k], side)
}
