//! Antenna-count selection wrapped around the power allocation.
//!
//! The outer estimate `Theta` is in bits/s per W: `Omega_1 = B sum R_sec`
//! over `Omega_2 = sum p + M Pc`. Every iteration picks the array size from
//! the current estimate, runs one power sweep at that size with `Theta / B`
//! as the power price, and replaces `Theta` by `Omega_1 / Omega_2`.
//!
//! The count formulas are the stationary point of `Omega_1 - Theta Omega_2`
//! in `M` when a single `log2 M` term depends on `M`. Every user with a
//! positive secure rate carries such a term, so under
//! [`AntennaRule::PerUser`] the estimate is divided by that user count
//! before it enters the formula.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::channel::UserLayout;
use crate::config::{AntennaRule, Precoder, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::{report_with_antennas, SinrModel};
use crate::power_alloc::{
    is_kkt_point, solve_algorithm1, sweep, update_multipliers, Iterate, Partition, PowerSolution,
    TraceEntry,
};

/// Alternations between two counts after which the count is frozen.
pub const MAX_ALTERNATIONS: usize = 10;

/// Outer-loop state.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThetaState {
    /// Efficiency estimate, bits/s per W.
    pub theta: f64,
    /// Active antennas.
    pub m_active: usize,
    /// `Omega_1 - Theta Omega_2`, bits/s.
    pub mu: f64,
}

fn raw_count(theta: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTheta(theta));
    }
    let x = cfg.bandwidth / (theta * cfg.circuit_power * LN_2);
    // Treat values within round-off of an integer as that integer.
    let r = libm::round(x);
    Ok(if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        libm::ceil(x)
    })
}

fn clamp_count(x: f64, lo: usize, hi: usize) -> usize {
    if x >= hi as f64 {
        hi
    } else if x <= lo as f64 {
        lo
    } else {
        x as usize
    }
}

/// MRT count `clamp(ceil(B / (theta Pc ln 2)), 3, M)`.
pub fn m_opt_mrt(theta: f64, cfg: &SystemConfig) -> Result<usize> {
    let x = raw_count(theta, cfg)?;
    Ok(clamp_count(x, 3, cfg.antennas.max(3)))
}

/// ZF count `clamp(ceil(B / (theta Pc ln 2) + K), K + 1, M)`.
pub fn m_opt_zf(theta: f64, cfg: &SystemConfig) -> Result<usize> {
    let x = raw_count(theta, cfg)? + cfg.users as f64;
    let lo = Precoder::Zf.min_antennas(cfg.users);
    Ok(clamp_count(x, lo, cfg.antennas.max(lo)))
}

/// Count for `scheme`.
pub fn m_opt(theta: f64, cfg: &SystemConfig, scheme: Precoder) -> Result<usize> {
    match scheme {
        Precoder::Mrt => m_opt_mrt(theta, cfg),
        Precoder::Zf => m_opt_zf(theta, cfg),
    }
}

/// Antenna selection around the plain allocation.
pub fn solve_algorithm3(cfg: &SystemConfig, scheme: Precoder) -> Result<PowerSolution> {
    cfg.validate_for(scheme)?;
    run_selection(cfg, scheme, &Partition::single(cfg)).map(|(s, _)| s)
}

/// Antenna selection around cell division. Falls back to
/// [`solve_algorithm3`], with [`PowerSolution::fell_back`] set, when a group
/// is empty.
pub fn solve_algorithm4(
    cfg: &SystemConfig,
    layout: &UserLayout,
    scheme: Precoder,
) -> Result<PowerSolution> {
    cfg.validate_for(scheme)?;
    let Some((part, mut budget)) = crate::cell_division::partition(cfg, layout)? else {
        let mut sol = solve_algorithm3(cfg, scheme)?;
        sol.fell_back = true;
        return Ok(sol);
    };
    let (mut sol, psi) = run_selection(cfg, scheme, &part)?;
    budget.psi1 = psi[0];
    budget.psi2 = psi[1];
    sol.groups = Some(budget);
    Ok(sol)
}

/// Tracks alternation between two counts.
struct CountGuard {
    history: [Option<usize>; 2],
    alternations: usize,
    frozen: Option<usize>,
}

impl CountGuard {
    fn new() -> Self {
        CountGuard {
            history: [None, None],
            alternations: 0,
            frozen: None,
        }
    }

    fn admit(&mut self, m: usize) -> usize {
        if let Some(f) = self.frozen {
            return f;
        }
        let [older, last] = self.history;
        if let (Some(a), Some(b)) = (older, last) {
            if m == a && m != b {
                self.alternations += 1;
                if self.alternations > MAX_ALTERNATIONS {
                    let f = m.min(b);
                    self.frozen = Some(f);
                    return f;
                }
            }
        }
        self.history = [last, Some(m)];
        m
    }
}

fn run_selection(
    cfg: &SystemConfig,
    scheme: Precoder,
    partition: &Partition,
) -> Result<(PowerSolution, Vec<f64>)> {
    let mut it = Iterate::new(partition, cfg.users);
    let mut rep = report_with_antennas(&it.p, cfg, scheme, cfg.antennas)?;
    let mut theta = cfg.bandwidth * rep.ee_sec;
    let mut guard = CountGuard::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut infeasible = false;
    let mut prev_m = None;
    let mut iter = 0;
    let (used, m) = loop {
        iter += 1;
        let m = if theta > 0.0 {
            let per = match cfg.antenna_rule {
                AntennaRule::PerUser => theta / rep.secure_users().max(1) as f64,
                AntennaRule::Summed => theta,
            };
            guard.admit(m_opt(per, cfg, scheme)?)
        } else {
            guard.admit(cfg.antennas)
        };
        let model = SinrModel::new(cfg, scheme, m)?;
        let used = it.dual(theta / cfg.bandwidth, iter);
        let out = sweep(cfg, &model, partition, &mut it, theta / cfg.bandwidth);
        rep = report_with_antennas(&it.p, cfg, scheme, m)?;
        let omega1 = cfg.bandwidth * rep.sum_secure_rate();
        let omega2 = it.p.iter().sum::<f64>() + m as f64 * cfg.circuit_power;
        let mu = omega1 - theta * omega2;
        trace.push(TraceEntry {
            iter,
            q: theta / cfg.bandwidth,
            total_power: omega2 - m as f64 * cfg.circuit_power,
            surplus: mu / cfg.bandwidth,
            antennas: m,
            theta,
        });
        if mu.abs() <= cfg.antenna_surplus_tol && is_kkt_point(cfg, &out, &rep) && prev_m == Some(m) {
            converged = true;
            break (used, m);
        }
        if iter >= cfg.max_iters {
            break (used, m);
        }
        prev_m = Some(m);
        infeasible |= update_multipliers(cfg, partition, &mut it, &rep);
        theta = omega1 / omega2;
    };
    let sol = PowerSolution {
        p: it.p,
        dual: used,
        report: rep,
        converged,
        trace,
        scheme,
        antennas: m,
        groups: None,
        infeasible,
        fell_back: false,
        oscillation: guard.frozen.is_some(),
        theta: Some(theta),
    };
    Ok((sol, it.psi))
}

/// Outer state of a finished selection run.
pub fn theta_state(sol: &PowerSolution, cfg: &SystemConfig) -> Option<ThetaState> {
    let theta = sol.theta?;
    let omega2 = sol.p.iter().sum::<f64>() + sol.antennas as f64 * cfg.circuit_power;
    Some(ThetaState {
        theta,
        m_active: sol.antennas,
        mu: cfg.bandwidth * sol.report.sum_secure_rate() - theta * omega2,
    })
}

/// Plain allocation at every array size in `range`, best `B q_sec` first.
/// Brute-force reference for the selection loop.
pub fn scan_antennas(
    cfg: &SystemConfig,
    scheme: Precoder,
    range: core::ops::RangeInclusive<usize>,
) -> Result<(usize, f64)> {
    let mut best = (0, f64::NEG_INFINITY);
    for m in range {
        let sol = solve_algorithm1(&cfg.with_antennas(m), scheme)?;
        let v = cfg.bandwidth * sol.report.ee_sec;
        if v > best.1 {
            best = (m, v);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SystemConfig {
        SystemConfig {
            antennas: 300,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn count_examples() {
        let c = cfg();
        assert_eq!(m_opt_mrt(1e4, &c).unwrap(), 174);
        assert_eq!(m_opt_zf(1e4, &c).unwrap(), 184);
        assert_eq!(m_opt_mrt(1e9, &c).unwrap(), 3);
        assert_eq!(m_opt_zf(1e9, &c).unwrap(), 11);
        let theta = c.bandwidth / (150.0 * c.circuit_power * LN_2);
        assert_eq!(m_opt_mrt(theta, &c).unwrap(), 150);
        assert_eq!(m_opt_mrt(1e-3, &c).unwrap(), 300);
        assert_eq!(m_opt_mrt(0.0, &c), Err(Error::NonPositiveTheta(0.0)));
        assert!(matches!(
            m_opt_zf(-1.0, &c),
            Err(Error::NonPositiveTheta(_))
        ));
    }

    #[test]
    fn alternation_freezes_smaller_count() {
        let mut g = CountGuard::new();
        let mut last = 0;
        for i in 0..40 {
            last = g.admit(if i % 2 == 0 { 50 } else { 51 });
        }
        assert_eq!(g.frozen, Some(50));
        assert_eq!(last, 50);
    }
}
