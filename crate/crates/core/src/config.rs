//! System parameters shared by every module.
//!
//! Defaults reproduce the published simulation table (120 kHz bandwidth,
//! 10 dB log-normal shadowing, -174 dBm/Hz noise, 0.1 W per antenna, unit
//! multiplier steps of 0.01). Parameters the table leaves open (array size,
//! user count, cell radius, CSI accuracy, power budget, QoS floor) get
//! values typical of single-cell massive MIMO studies.

use alloc::format;

use crate::error::{invalid, Result};

/// Linear precoder used at the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Precoder {
    /// Maximum ratio transmission: the precoder is the channel estimate.
    Mrt,
    /// Zero forcing: the pseudo-inverse of the channel estimate.
    Zf,
}

impl Precoder {
    /// Both precoders, MRT first.
    pub const ALL: [Precoder; 2] = [Precoder::Mrt, Precoder::Zf];

    /// Lower-case label used in files and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            Precoder::Mrt => "mrt",
            Precoder::Zf => "zf",
        }
    }

    /// Smallest array size for which the closed forms of this precoder hold.
    pub fn min_antennas(self, users: usize) -> usize {
        match self {
            Precoder::Mrt => 3,
            Precoder::Zf => core::cmp::max(3, users + 1),
        }
    }
}

impl core::fmt::Display for Precoder {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

/// Order in which per-user power updates see each other within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateOrder {
    /// Each update uses the powers already refreshed in the same sweep.
    #[default]
    GaussSeidel,
    /// Every update in a sweep uses the powers from the previous sweep.
    Jacobi,
}

/// How users are split into central and edge groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GroupRule {
    /// Central when the BS distance is at most half the cell radius.
    #[default]
    HalfRadius,
    /// Central when the BS distance is at most the median user distance.
    MedianDistance,
}

/// How the antenna-count rule is fed with the current efficiency estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AntennaRule {
    /// Divide the efficiency by the number of users with a positive secure
    /// rate before applying the count formula. Every such user contributes a
    /// `log2 M` term, so this is where the summed objective is stationary.
    #[default]
    PerUser,
    /// Apply the count formula to the summed efficiency directly.
    Summed,
}

/// Scalar system and solver parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SystemConfig {
    /// Number of BS antennas `M`.
    pub antennas: usize,
    /// Number of single-antenna users `K`.
    pub users: usize,
    /// Cell radius `D` in meters.
    pub cell_radius: f64,
    /// Smallest BS-user distance in meters; also the path-loss reference.
    pub min_distance: f64,
    /// CSI estimation accuracy `delta` in `[0, 1]`.
    pub csi_accuracy: f64,
    /// Noise-normalized large-scale gain of the eavesdropper.
    pub eve_gain: f64,
    /// Total transmit power budget in W.
    pub max_power: f64,
    /// Circuit power per active antenna in W.
    pub circuit_power: f64,
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Minimum secure rate per user in bits/s/Hz.
    pub min_rate: f64,
    /// Noise spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Log-normal shadowing standard deviation in dB.
    pub shadow_sigma_db: f64,
    /// Path-loss exponent.
    pub pathloss_exponent: f64,
    /// Step size of the power-budget multiplier.
    pub budget_step: f64,
    /// Step size of the QoS multipliers.
    pub qos_step: f64,
    /// Stopping threshold on the Dinkelbach surplus, bits/s/Hz.
    pub surplus_tol: f64,
    /// Stopping threshold on the antenna-selection surplus, bits/s.
    pub antenna_surplus_tol: f64,
    /// Largest stationarity residual accepted at convergence.
    pub stationarity_tol: f64,
    /// Iteration cap for every solver loop.
    pub max_iters: usize,
    /// Seed of the random source.
    pub seed: u64,
    /// Use `delta^2` instead of `delta` in the MRT SINR numerator.
    pub mrt_delta_squared: bool,
    /// Per-user update order.
    pub update_order: UpdateOrder,
    /// Central/edge split rule.
    pub group_rule: GroupRule,
    /// Use the full budget in both group multiplier updates and caps,
    /// instead of the distance-weighted split.
    pub unsplit_group_budget: bool,
    /// Antenna-count rule input.
    pub antenna_rule: AntennaRule,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let mut cfg = SystemConfig {
            antennas: 100,
            users: 10,
            cell_radius: 500.0,
            min_distance: 35.0,
            csi_accuracy: 0.9,
            eve_gain: 1.0,
            max_power: 5.0,
            circuit_power: 0.1,
            bandwidth: 120e3,
            min_rate: 0.1,
            noise_psd_dbm_hz: -174.0,
            shadow_sigma_db: 10.0,
            pathloss_exponent: 3.8,
            budget_step: 0.01,
            qos_step: 0.01,
            surplus_tol: 1e-4,
            antenna_surplus_tol: 10.0,
            stationarity_tol: 1e-8,
            max_iters: 500,
            seed: 1,
            mrt_delta_squared: false,
            update_order: UpdateOrder::GaussSeidel,
            group_rule: GroupRule::HalfRadius,
            unsplit_group_budget: false,
            antenna_rule: AntennaRule::PerUser,
        };
        // Eavesdropper at half the cell radius without shadowing.
        cfg.eve_gain = cfg.large_scale_gain(0.5 * cfg.cell_radius, 1.0);
        cfg
    }
}

impl SystemConfig {
    /// Noise power over the whole band in W.
    pub fn noise_power(&self) -> f64 {
        libm::pow(10.0, (self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth
    }

    /// Noise-normalized large-scale gain at `distance` meters with linear
    /// shadowing factor `shadow`.
    pub fn large_scale_gain(&self, distance: f64, shadow: f64) -> f64 {
        let d = distance.max(self.min_distance);
        shadow * libm::pow(d / self.min_distance, -self.pathloss_exponent) / self.noise_power()
    }

    /// Check every invariant that holds regardless of the precoder.
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(invalid("K >= 1 (users must be positive)"));
        }
        if self.antennas < 3 {
            return Err(invalid(format!(
                "M >= 3 (antennas = {} is too small for the closed forms)",
                self.antennas
            )));
        }
        if !(0.0..=1.0).contains(&self.csi_accuracy) {
            return Err(invalid(format!(
                "0 <= delta <= 1 (csi_accuracy = {})",
                self.csi_accuracy
            )));
        }
        let positive = [
            ("cell_radius", self.cell_radius),
            ("min_distance", self.min_distance),
            ("eve_gain", self.eve_gain),
            ("max_power", self.max_power),
            ("circuit_power", self.circuit_power),
            ("bandwidth", self.bandwidth),
            ("shadow_sigma_db", self.shadow_sigma_db),
            ("pathloss_exponent", self.pathloss_exponent),
            ("budget_step", self.budget_step),
            ("qos_step", self.qos_step),
            ("surplus_tol", self.surplus_tol),
            ("antenna_surplus_tol", self.antenna_surplus_tol),
            ("stationarity_tol", self.stationarity_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("{name} > 0 (got {value})")));
            }
        }
        if self.min_distance >= self.cell_radius {
            return Err(invalid(format!(
                "min_distance < cell_radius ({} >= {})",
                self.min_distance, self.cell_radius
            )));
        }
        if !(self.min_rate >= 0.0 && self.min_rate.is_finite()) {
            return Err(invalid(format!("min_rate >= 0 (got {})", self.min_rate)));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(invalid("noise_psd_dbm_hz must be finite"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters >= 1"));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the dimension rules of `scheme`.
    pub fn validate_for(&self, scheme: Precoder) -> Result<()> {
        self.validate()?;
        if scheme == Precoder::Zf && self.antennas <= self.users {
            return Err(invalid(format!(
                "M > K for zero forcing (M = {}, K = {})",
                self.antennas, self.users
            )));
        }
        Ok(())
    }

    /// Copy with a different array size.
    pub fn with_antennas(&self, antennas: usize) -> Self {
        SystemConfig {
            antennas,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SystemConfig::default();
        cfg.validate_for(Precoder::Mrt).unwrap();
        cfg.validate_for(Precoder::Zf).unwrap();
        assert_eq!(cfg.bandwidth, 120e3);
        assert_eq!(cfg.circuit_power, 0.1);
        assert_eq!(cfg.budget_step, 0.01);
        assert_eq!(cfg.qos_step, 0.01);
    }

    #[test]
    fn noise_power_matches_table_values() {
        let cfg = SystemConfig::default();
        // -174 dBm/Hz over 120 kHz is -123.2 dBm.
        let dbm = 10.0 * libm::log10(cfg.noise_power()) + 30.0;
        assert!((dbm - (-174.0 + 10.0 * libm::log10(120e3))).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = SystemConfig::default();
        cfg.csi_accuracy = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.users = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.max_power = 0.0;
        let msg = alloc::string::ToString::to_string(&cfg.validate().unwrap_err());
        assert!(msg.contains("max_power"));

        let cfg = SystemConfig {
            antennas: 10,
            users: 10,
            ..SystemConfig::default()
        };
        assert!(cfg.validate_for(Precoder::Mrt).is_ok());
        assert!(cfg.validate_for(Precoder::Zf).is_err());
    }

    #[test]
    fn gain_is_floored_at_reference_distance() {
        let cfg = SystemConfig::default();
        let at_ref = cfg.large_scale_gain(cfg.min_distance, 1.0);
        assert_eq!(cfg.large_scale_gain(1.0, 1.0), at_ref);
        assert!((at_ref * cfg.noise_power() - 1.0).abs() < 1e-12);
        assert!(cfg.large_scale_gain(2.0 * cfg.min_distance, 1.0) < at_ref);
    }
}
