//! User layouts, Rayleigh channels with imperfect CSI, and precoders.
//!
//! Channel matrices are stored in their small-scale (unit-variance) form.
//! The SINR expressions are noise-normalized and, like the closed forms they
//! are checked against, do not carry the per-user gains; the physical channel
//! `C G^{1/2}` is available through [`ChannelRealization::physical_channel`].

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cmatrix::CMatrix;
use crate::config::{GroupRule, Precoder, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::upsilon;

/// Cell-division group of a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Group {
    /// Close to the base station.
    Central,
    /// Near the cell edge.
    Edge,
}

/// User and eavesdropper positions with their large-scale gains.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserLayout {
    /// User coordinates in meters, BS at the origin.
    pub positions: Vec<(f64, f64)>,
    /// Eavesdropper coordinates in meters.
    pub eva_position: (f64, f64),
    /// BS-user distances in meters.
    pub distance: Vec<f64>,
    /// Noise-normalized large-scale gains.
    pub zeta: Vec<f64>,
    /// Noise-normalized eavesdropper gain.
    pub eve_gain: f64,
    /// Group label of every user.
    pub group: Vec<Group>,
}

impl UserLayout {
    /// Layout at fixed positions without shadowing.
    pub fn from_positions(
        cfg: &SystemConfig,
        positions: &[(f64, f64)],
        eva_position: (f64, f64),
    ) -> Self {
        let shadows = alloc::vec![1.0; positions.len()];
        Self::build(cfg, positions.to_vec(), eva_position, &shadows, 1.0)
    }

    fn build(
        cfg: &SystemConfig,
        positions: Vec<(f64, f64)>,
        eva_position: (f64, f64),
        shadows: &[f64],
        eva_shadow: f64,
    ) -> Self {
        let distance: Vec<f64> = positions
            .iter()
            .map(|&(x, y)| libm::hypot(x, y).max(cfg.min_distance))
            .collect();
        let zeta = distance
            .iter()
            .zip(shadows)
            .map(|(&d, &s)| cfg.large_scale_gain(d, s))
            .collect();
        let (ex, ey) = eva_position;
        let eve_gain = cfg.large_scale_gain(libm::hypot(ex, ey), eva_shadow);
        let group = assign_groups(&distance, cfg);
        UserLayout {
            positions,
            eva_position,
            distance,
            zeta,
            eve_gain,
            group,
        }
    }

    /// Number of users.
    pub fn users(&self) -> usize {
        self.distance.len()
    }

    /// Indices of the users in `group`.
    pub fn members(&self, group: Group) -> Vec<usize> {
        (0..self.users())
            .filter(|&k| self.group[k] == group)
            .collect()
    }
}

fn assign_groups(distance: &[f64], cfg: &SystemConfig) -> Vec<Group> {
    let threshold = match cfg.group_rule {
        GroupRule::HalfRadius => 0.5 * cfg.cell_radius,
        GroupRule::MedianDistance => {
            let mut sorted = distance.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            }
        }
    };
    distance
        .iter()
        .map(|&d| {
            if d <= threshold {
                Group::Central
            } else {
                Group::Edge
            }
        })
        .collect()
}

/// Uniform point in the annulus `min_distance <= r <= cell_radius`.
fn draw_point<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> (f64, f64) {
    let (lo, hi) = (cfg.min_distance, cfg.cell_radius);
    let u: f64 = rng.random();
    let r = libm::sqrt(lo * lo + u * (hi * hi - lo * lo));
    let phi = 2.0 * PI * rng.random::<f64>();
    (r * libm::cos(phi), r * libm::sin(phi))
}

fn draw_shadow<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> f64 {
    let n: f64 = StandardNormal.sample(rng);
    libm::pow(10.0, cfg.shadow_sigma_db * n / 10.0)
}

/// Draw `K` users and one eavesdropper uniformly over the cell, outside the
/// minimum distance, with log-normal shadowing.
pub fn generate_layout<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<UserLayout> {
    cfg.validate()?;
    let mut positions = Vec::with_capacity(cfg.users);
    let mut shadows = Vec::with_capacity(cfg.users);
    for _ in 0..cfg.users {
        positions.push(draw_point(cfg, rng));
        shadows.push(draw_shadow(cfg, rng));
    }
    let eva = draw_point(cfg, rng);
    let eva_shadow = draw_shadow(cfg, rng);
    Ok(UserLayout::build(cfg, positions, eva, &shadows, eva_shadow))
}

/// One channel draw with its estimate, estimation error and precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// True small-scale channel, `M x K`.
    pub c: CMatrix,
    /// Channel estimate.
    pub c_hat: CMatrix,
    /// Estimation error.
    pub x: CMatrix,
    /// Precoder, one column per user.
    pub precoder: CMatrix,
    /// Normalization `1 / E{tr(B^H B)}`.
    pub upsilon: f64,
    /// Precoder kind.
    pub scheme: Precoder,
}

impl ChannelRealization {
    /// `C G^{1/2}`: every column scaled by the square root of the user gain.
    pub fn physical_channel(&self, layout: &UserLayout) -> CMatrix {
        CMatrix::from_fn(self.c.rows(), self.c.cols(), |r, k| {
            self.c[(r, k)] * libm::sqrt(layout.zeta[k])
        })
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    })
}

/// Draw a channel for `layout` and build the precoder of `scheme`.
pub fn generate_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    layout: &UserLayout,
    scheme: Precoder,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let (m, k) = (cfg.antennas, cfg.users);
    if layout.users() != k {
        return Err(Error::InvalidDimension(format!(
            "layout has {} users, config has {k}",
            layout.users()
        )));
    }
    if scheme == Precoder::Zf && m <= k {
        return Err(Error::InvalidDimension(format!(
            "ZF needs M > K (M = {m}, K = {k})"
        )));
    }
    let c_hat = gaussian_matrix(m, k, rng);
    let x = gaussian_matrix(m, k, rng);
    let d = cfg.csi_accuracy;
    let e = libm::sqrt(1.0 - d * d);
    let c = CMatrix::from_fn(m, k, |r, col| c_hat[(r, col)] * d + x[(r, col)] * e);
    let precoder = match scheme {
        Precoder::Mrt => c_hat.clone(),
        Precoder::Zf => {
            let inv = c_hat.gram(&c_hat).hermitian_inverse().ok_or_else(|| {
                Error::InvalidDimension("channel estimate is rank deficient".into())
            })?;
            c_hat.mul(&inv)
        }
    };
    Ok(ChannelRealization {
        c,
        c_hat,
        x,
        precoder,
        upsilon: upsilon(scheme, m, k),
        scheme,
    })
}

/// Instantaneous SINR of user `k` evaluated from the matrices, with the
/// estimate, interference, estimation-error and unit-noise terms.
pub fn empirical_sinr(real: &ChannelRealization, p: &[f64], k: usize, cfg: &SystemConfig) -> f64 {
    let d2 = cfg.csi_accuracy * cfg.csi_accuracy;
    let ups = real.upsilon;
    let ck = real.c_hat.col(k);
    let xk = real.x.col(k);
    let mut interference = 0.0;
    let mut error = 0.0;
    let mut signal = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        let bj = real.precoder.col(j);
        let g = CMatrix::inner(ck, bj).norm_sqr();
        if j == k {
            signal = ups * pj * d2 * g;
        } else {
            interference += pj * g;
        }
        error += pj * CMatrix::inner(xk, bj).norm_sqr();
    }
    signal / (ups * d2 * interference + ups * (1.0 - d2) * error + 1.0)
}

/// Monte-Carlo estimate of `1 / E{tr(B^H B)}` over `draws` channels.
pub fn estimate_upsilon<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    layout: &UserLayout,
    scheme: Precoder,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidConfig("draws >= 1".into()));
    }
    let mut total = 0.0;
    for _ in 0..draws {
        total += generate_channel(cfg, layout, scheme, rng)?
            .precoder
            .frobenius_sq();
    }
    Ok(draws as f64 / total)
}
