//! Cell division: central and edge users get separate shares of the budget.
//!
//! The central share is `Lambda = sum_central d_k / sum_all d_k`. The group
//! updates have the same form as the plain ones with the group multiplier
//! in place of the common one. The MRT group offset is `K / (K - delta^2)`,
//! the same as in the plain update, since `ups` plays no role in the MRT
//! rate.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{Group, UserLayout};
use crate::config::{Precoder, SystemConfig};
use crate::error::{Error, Result};
use crate::power_alloc::{
    closed_form, group_residual, run_fixed_array, DualState, Partition, PowerSolution,
};

/// Budget split and group multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupBudget {
    /// Central share of the budget.
    pub lambda: f64,
    /// Central budget `Lambda * P_max`.
    pub p1: f64,
    /// Edge budget `(1 - Lambda) * P_max`.
    pub p2: f64,
    /// Central multiplier.
    pub psi1: f64,
    /// Edge multiplier.
    pub psi2: f64,
}

impl GroupBudget {
    /// Split of `max_power` for the central share `lambda`.
    pub fn split(lambda: f64, max_power: f64) -> Self {
        let p1 = lambda * max_power;
        GroupBudget {
            lambda,
            p1,
            p2: max_power - p1,
            psi1: 0.0,
            psi2: 0.0,
        }
    }
}

/// Distance share of the central group.
pub fn compute_lambda(layout: &UserLayout) -> Result<f64> {
    let mut central = 0.0;
    let mut total = 0.0;
    let mut counts = [0usize; 2];
    for (&d, &g) in layout.distance.iter().zip(&layout.group) {
        total += d;
        if g == Group::Central {
            central += d;
            counts[0] += 1;
        } else {
            counts[1] += 1;
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::EmptyGroup);
    }
    Ok(central / total)
}

/// Closed-form update of user `k` with its group multiplier `psi`, clamped
/// to `[0, group_budget]`.
pub fn power_update_group(
    p: &[f64],
    dual: &DualState,
    cfg: &SystemConfig,
    scheme: Precoder,
    k: usize,
    psi: f64,
    group_budget: f64,
) -> Result<f64> {
    closed_form(p, dual, psi, cfg, scheme, k, group_budget)
}

/// Stationarity residual of user `k` with its group multiplier `psi`.
pub fn group_stationarity_residual(
    p: &[f64],
    dual: &DualState,
    cfg: &SystemConfig,
    scheme: Precoder,
    k: usize,
    psi: f64,
) -> Result<f64> {
    group_residual(p, dual, psi, cfg, scheme, cfg.antennas, k)
}

/// Budget partition of `layout`, or `None` when a group is empty.
pub(crate) fn partition(
    cfg: &SystemConfig,
    layout: &UserLayout,
) -> Result<Option<(Partition, GroupBudget)>> {
    if layout.users() != cfg.users {
        return Err(Error::InvalidDimension(alloc::format!(
            "layout has {} users, config has {}",
            layout.users(),
            cfg.users
        )));
    }
    let lambda = match compute_lambda(layout) {
        Ok(l) => l,
        Err(Error::EmptyGroup) => return Ok(None),
        Err(e) => return Err(e),
    };
    let budget = GroupBudget::split(lambda, cfg.max_power);
    let budgets = if cfg.unsplit_group_budget {
        vec![cfg.max_power, cfg.max_power]
    } else {
        vec![budget.p1, budget.p2]
    };
    let members: Vec<Vec<usize>> =
        vec![layout.members(Group::Central), layout.members(Group::Edge)];
    let group_of = layout
        .group
        .iter()
        .map(|&g| if g == Group::Central { 0 } else { 1 })
        .collect();
    Ok(Some((
        Partition {
            members,
            budgets,
            group_of,
        },
        budget,
    )))
}

/// Cell-division allocation. Falls back to the plain solver, with
/// [`PowerSolution::fell_back`] set, when a group is empty.
///
/// The eavesdropper gain is read from `cfg`; callers drawing layouts copy
/// `layout.eve_gain` into it.
pub fn solve_algorithm2(
    cfg: &SystemConfig,
    layout: &UserLayout,
    scheme: Precoder,
) -> Result<PowerSolution> {
    cfg.validate_for(scheme)?;
    let Some((part, mut budget)) = partition(cfg, layout)? else {
        let mut sol = crate::power_alloc::solve_algorithm1(cfg, scheme)?;
        sol.fell_back = true;
        return Ok(sol);
    };
    let (mut sol, psi) = run_fixed_array(cfg, scheme, &part)?;
    budget.psi1 = psi[0];
    budget.psi2 = psi[1];
    sol.groups = Some(budget);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(cfg: &SystemConfig, xs: &[f64]) -> UserLayout {
        let pos: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
        UserLayout::from_positions(cfg, &pos, (200.0, 0.0))
    }

    #[test]
    fn lambda_examples() {
        let cfg = SystemConfig {
            users: 2,
            ..SystemConfig::default()
        };
        let l = layout(&cfg, &[100.0, 300.0]);
        assert_eq!(compute_lambda(&l).unwrap(), 0.25);

        let mut l = layout(&cfg, &[200.0, 300.0]);
        l.distance = vec![250.0, 250.0];
        l.group = vec![Group::Central, Group::Edge];
        assert_eq!(compute_lambda(&l).unwrap(), 0.5);

        let l = layout(&cfg, &[100.0, 120.0]);
        assert_eq!(compute_lambda(&l), Err(Error::EmptyGroup));
    }

    #[test]
    fn split_adds_up() {
        let b = GroupBudget::split(0.3, 7.0);
        assert_eq!(b.p1 + b.p2, 7.0);
    }

    #[test]
    fn empty_group_matches_plain_solver() {
        let cfg = SystemConfig {
            users: 3,
            antennas: 20,
            ..SystemConfig::default()
        };
        let l = layout(&cfg, &[60.0, 90.0, 120.0]);
        let a = solve_algorithm2(&cfg, &l, Precoder::Mrt).unwrap();
        let b = crate::power_alloc::solve_algorithm1(&cfg, Precoder::Mrt).unwrap();
        assert!(a.fell_back);
        assert_eq!(a.p, b.p);
        assert_eq!(a.report, b.report);
        assert_eq!(a.trace, b.trace);
    }
}
