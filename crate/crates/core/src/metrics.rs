//! Closed-form SINRs, lower-bound rates, eavesdropper rate, secure rate and
//! secure energy efficiency.
//!
//! All SINRs are noise-normalized: large-scale gains are divided by the
//! noise power when the layout is drawn, so the noise term is always 1.
//!
//! Both user SINRs share the shape `xi(p) = gain * p / (slope * p + intercept)`:
//!
//! | precoder | gain                 | slope                                  | intercept |
//! |----------|----------------------|----------------------------------------|-----------|
//! | MRT      | `delta * M`          | `K - delta^2`                          | `K`       |
//! | ZF       | `ups * delta^2`      | `ups * (1 - delta^2) / ((M-1)(M-2))`   | `1`       |
//!
//! with `ups = (M - K) / K`. [`SinrModel`] captures that shape so the power
//! updates can be written once for both precoders.

use alloc::format;
use alloc::vec::Vec;

use libm::log2;

use crate::config::{Precoder, SystemConfig};
use crate::error::{Error, Result};

/// Precoder normalization `1 / E{tr(B^H B)}` for unit-variance estimates.
///
/// MRT: `1 / (M K)`. ZF: `(M - K) / K` (inverse complex Wishart mean).
pub fn upsilon(scheme: Precoder, antennas: usize, users: usize) -> f64 {
    let (m, k) = (antennas as f64, users as f64);
    match scheme {
        Precoder::Mrt => 1.0 / (m * k),
        Precoder::Zf => (m - k) / k,
    }
}

/// Rational SINR model `gain * p / (slope * p + intercept)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrModel {
    /// Numerator coefficient.
    pub gain: f64,
    /// Power coefficient of the denominator.
    pub slope: f64,
    /// Constant of the denominator.
    pub intercept: f64,
}

impl SinrModel {
    /// Model of `scheme` with `antennas` active antennas and the rest of the
    /// parameters from `cfg`.
    pub fn new(cfg: &SystemConfig, scheme: Precoder, antennas: usize) -> Result<Self> {
        let k = cfg.users as f64;
        let d = cfg.csi_accuracy;
        match scheme {
            Precoder::Mrt => {
                if antennas < 1 {
                    return Err(Error::InvalidDimension(format!("M = {antennas}")));
                }
                let gain = if cfg.mrt_delta_squared { d * d } else { d } * antennas as f64;
                Ok(SinrModel {
                    gain,
                    slope: k - d * d,
                    intercept: k,
                })
            }
            Precoder::Zf => {
                if antennas < 3 || antennas <= cfg.users {
                    return Err(Error::InvalidDimension(format!(
                        "ZF closed form needs M >= 3 and M > K (M = {antennas}, K = {})",
                        cfg.users
                    )));
                }
                let ups = upsilon(Precoder::Zf, antennas, cfg.users);
                let m = antennas as f64;
                Ok(SinrModel {
                    gain: ups * d * d,
                    slope: ups * (1.0 - d * d) / ((m - 1.0) * (m - 2.0)),
                    intercept: 1.0,
                })
            }
        }
    }

    /// `xi(p)`.
    pub fn sinr(&self, p: f64) -> f64 {
        self.gain * p / (self.slope * p + self.intercept)
    }
}

/// MRT SINR `delta p M / ((K - delta^2) p + K)` at the configured array size.
pub fn sinr_mrt(p: f64, cfg: &SystemConfig) -> Result<f64> {
    let model = SinrModel::new(cfg, Precoder::Mrt, cfg.antennas)?;
    let den = model.slope * p + model.intercept;
    if den == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(model.gain * p / den)
}

/// ZF SINR `ups delta^2 p / (ups (1 - delta^2) p / ((M-1)(M-2)) + 1)`.
pub fn sinr_zf(p: f64, cfg: &SystemConfig) -> Result<f64> {
    if cfg.antennas < 3 {
        return Err(Error::InvalidDimension(format!(
            "ZF SINR needs M >= 3 (M = {})",
            cfg.antennas
        )));
    }
    Ok(SinrModel::new(cfg, Precoder::Zf, cfg.antennas)?.sinr(p))
}

/// Eavesdropper SINR on user `k`'s stream: `ze p_k / (ze sum_{i != k} p_i + 1)`.
pub fn sinr_eva(p: &[f64], k: usize, cfg: &SystemConfig) -> f64 {
    let ze = cfg.eve_gain;
    let others: f64 = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, v)| v)
        .sum();
    ze * p[k] / (ze * others + 1.0)
}

/// Secure rate of user `k` before the `[.]^+` clamp, in the simplified form
/// `log2(gain (I_k + 1/ze) / (slope p_k + intercept))`, `I_k` being the
/// power of the other users.
///
/// For `p_k > 0` this equals `log2 xi_k - log2 xi_{e,k}`; at `p_k = 0` it is
/// the continuous extension of that difference.
pub fn secure_rate_unclamped(model: &SinrModel, p: &[f64], k: usize, eve_gain: f64) -> f64 {
    let total: f64 = p.iter().sum();
    let others = total - p[k];
    log2(model.gain * (others + 1.0 / eve_gain) / (model.slope * p[k] + model.intercept))
}

/// Per-user rates and the resulting secure energy efficiency.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateReport {
    /// Closed-form user SINRs.
    pub sinr: Vec<f64>,
    /// Eavesdropper SINRs per stream.
    pub sinr_eva: Vec<f64>,
    /// Lower-bound rates `log2 xi_k`, bits/s/Hz (may be negative or `-inf`).
    pub rate_lb: Vec<f64>,
    /// Eavesdropper rates `log2 xi_{e,k}`, bits/s/Hz.
    pub rate_eva: Vec<f64>,
    /// Secure rates `[rate_lb - rate_eva]^+`, bits/s/Hz.
    pub rate_sec: Vec<f64>,
    /// Secure energy efficiency, bits/s/Hz per W.
    pub ee_sec: f64,
    /// Number of antennas the report was evaluated with.
    pub antennas: usize,
    /// Set when some user has `xi_k <= 1`, i.e. a non-positive lower-bound rate.
    pub low_sinr: bool,
}

impl RateReport {
    /// Sum of secure rates.
    pub fn sum_secure_rate(&self) -> f64 {
        self.rate_sec.iter().sum()
    }

    /// Number of users with a strictly positive secure rate.
    pub fn secure_users(&self) -> usize {
        self.rate_sec.iter().filter(|&&r| r > 0.0).count()
    }
}

/// Evaluate every rate for powers `p` at the configured array size.
pub fn report(p: &[f64], cfg: &SystemConfig, scheme: Precoder) -> Result<RateReport> {
    report_with_antennas(p, cfg, scheme, cfg.antennas)
}

/// [`report`] with an explicit number of active antennas.
pub fn report_with_antennas(
    p: &[f64],
    cfg: &SystemConfig,
    scheme: Precoder,
    antennas: usize,
) -> Result<RateReport> {
    if p.len() != cfg.users {
        return Err(Error::InvalidDimension(format!(
            "{} powers for {} users",
            p.len(),
            cfg.users
        )));
    }
    if let Some(bad) = p.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "powers must be >= 0 (got {bad})"
        )));
    }
    let model = SinrModel::new(cfg, scheme, antennas)?;
    let k = cfg.users;
    let mut out = RateReport {
        sinr: Vec::with_capacity(k),
        sinr_eva: Vec::with_capacity(k),
        rate_lb: Vec::with_capacity(k),
        rate_eva: Vec::with_capacity(k),
        rate_sec: Vec::with_capacity(k),
        ee_sec: 0.0,
        antennas,
        low_sinr: false,
    };
    for user in 0..k {
        let xi = model.sinr(p[user]);
        let xi_e = sinr_eva(p, user, cfg);
        let lb = log2(xi);
        let eva = log2(xi_e);
        let sec = if p[user] > 0.0 {
            (lb - eva).max(0.0)
        } else {
            secure_rate_unclamped(&model, p, user, cfg.eve_gain).max(0.0)
        };
        out.low_sinr |= xi <= 1.0;
        out.sinr.push(xi);
        out.sinr_eva.push(xi_e);
        out.rate_lb.push(lb);
        out.rate_eva.push(eva);
        out.rate_sec.push(sec);
    }
    let consumed: f64 = p.iter().sum::<f64>() + antennas as f64 * cfg.circuit_power;
    out.ee_sec = out.sum_secure_rate() / consumed;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn mrt_zero_power_is_zero() {
        assert_eq!(sinr_mrt(0.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn mrt_perfect_csi_value() {
        let c = SystemConfig {
            csi_accuracy: 1.0,
            antennas: 100,
            users: 10,
            ..cfg()
        };
        let v = sinr_mrt(1.0, &c).unwrap();
        assert!((v - 100.0 / 19.0).abs() < 1e-12);
        assert!((v - 5.26316).abs() < 1e-5);
    }

    #[test]
    fn mrt_is_increasing_in_power() {
        let c = cfg();
        assert!(sinr_mrt(2.0, &c).unwrap() > sinr_mrt(1.0, &c).unwrap());
    }

    #[test]
    fn mrt_delta_squared_switch() {
        let c = SystemConfig {
            mrt_delta_squared: true,
            ..cfg()
        };
        let plain = sinr_mrt(1.0, &cfg()).unwrap();
        assert!((sinr_mrt(1.0, &c).unwrap() - 0.9 * plain).abs() < 1e-12);
    }

    #[test]
    fn zf_limits() {
        let c = cfg();
        assert_eq!(sinr_zf(0.0, &c).unwrap(), 0.0);
        let perfect = SystemConfig {
            csi_accuracy: 1.0,
            ..c.clone()
        };
        let ups = upsilon(Precoder::Zf, 100, 10);
        assert!((sinr_zf(0.7, &perfect).unwrap() - ups * 0.7).abs() < 1e-12);
        let tiny = SystemConfig { antennas: 2, ..c };
        assert!(matches!(
            sinr_zf(1.0, &tiny),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn eve_single_user_and_symmetry() {
        let c = SystemConfig {
            users: 1,
            eve_gain: 3.0,
            ..cfg()
        };
        assert_eq!(sinr_eva(&[0.5], 0, &c), 1.5);

        let c = SystemConfig {
            users: 4,
            eve_gain: 2.0,
            ..cfg()
        };
        let p = vec![0.3; 4];
        let expect = 2.0 * 0.3 / (2.0 * 3.0 * 0.3 + 1.0);
        for k in 0..4 {
            assert!((sinr_eva(&p, k, &c) - expect).abs() < 1e-15);
        }
        assert_eq!(sinr_eva(&[0.0, 1.0, 1.0, 1.0], 0, &c), 0.0);
    }

    #[test]
    fn zero_powers_give_zero_efficiency() {
        let c = cfg();
        let r = report(&vec![0.0; c.users], &c, Precoder::Mrt).unwrap();
        assert_eq!(r.ee_sec, 0.0);
        assert!(r.rate_sec.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matched_eavesdropper_zeroes_secure_rate() {
        // Pick ze so that xi_e equals xi for equal powers.
        let mut c = SystemConfig {
            users: 3,
            antennas: 3,
            ..cfg()
        };
        let p = vec![0.5; 3];
        let xi = sinr_mrt(0.5, &c).unwrap();
        // xi = ze p / (ze 2p + 1)  =>  ze = xi / (p - 2 p xi)
        c.eve_gain = xi / (0.5 - 1.0 * xi);
        assert!(c.eve_gain > 0.0);
        let r = report(&p, &c, Precoder::Mrt).unwrap();
        for k in 0..3 {
            assert!((r.sinr[k] - r.sinr_eva[k]).abs() < 1e-12);
            assert!(r.rate_sec[k] < 1e-12);
        }
        assert!(r.ee_sec < 1e-12);
    }

    #[test]
    fn report_rejects_negative_power() {
        let c = SystemConfig { users: 2, ..cfg() };
        assert!(report(&[0.1, -0.1], &c, Precoder::Mrt).is_err());
    }
}
