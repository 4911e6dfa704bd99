//! Dual-ascent power allocation with a Dinkelbach efficiency update.
//!
//! Each iteration sweeps over the users and sets every power to the best
//! response of the Lagrangian for the current multipliers and efficiency
//! estimate, then moves the budget multiplier, the QoS multipliers and the
//! efficiency estimate. At a fixed point of the sweep every interior power
//! satisfies the stationarity condition exactly, which is the condition the
//! closed-form updates [`power_update_mrt`] and [`power_update_zf`] are
//! derived from. Those closed forms are exposed as is, but the solver does
//! not iterate them: freezing the interference sum makes the map expand
//! near its fixed point, so plain iteration oscillates.
//!
//! Every power is also capped by what is left of its group budget, so the
//! budget holds at every iterate and not only in the dual limit.

use alloc::vec;
use alloc::vec::Vec;

use crate::cell_division::GroupBudget;
use crate::config::{Precoder, SystemConfig, UpdateOrder};
use crate::error::{Error, Result};
use crate::metrics::{report, report_with_antennas, RateReport, SinrModel};
use crate::response::{clamped_explicit, JointProblem, UserProblem};

/// Initial value of every multiplier.
pub const INITIAL_MULTIPLIER: f64 = 0.01;
/// QoS multiplier above which the instance is flagged infeasible.
pub const INFEASIBLE_MULTIPLIER: f64 = 1e3;

/// Lagrange multipliers and efficiency estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DualState {
    /// Budget multiplier. With cell division the per-group multipliers live
    /// in [`GroupBudget`] and this field mirrors the first group's.
    pub psi: f64,
    /// QoS multipliers, one per user.
    pub gamma: Vec<f64>,
    /// Efficiency estimate `q`, bits/s/Hz per W.
    pub q: f64,
    /// Iteration counter.
    pub iter: usize,
}

impl DualState {
    /// Multipliers at their starting values and `q = 0`.
    pub fn initial(users: usize) -> Self {
        DualState {
            psi: INITIAL_MULTIPLIER,
            gamma: vec![INITIAL_MULTIPLIER; users],
            q: 0.0,
            iter: 0,
        }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceEntry {
    /// Iteration number, starting at 1.
    pub iter: usize,
    /// Efficiency estimate used in the sweep.
    pub q: f64,
    /// Total transmit power after the sweep.
    pub total_power: f64,
    /// `sum R_sec - q (sum p + M Pc)` after the sweep.
    pub surplus: f64,
    /// Active antennas during the sweep.
    pub antennas: usize,
    /// Antenna-selection estimate in bits/s per W, zero for fixed arrays.
    pub theta: f64,
}

/// Output of every solver.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerSolution {
    /// Per-user powers in W.
    pub p: Vec<f64>,
    /// Multipliers used in the last sweep.
    pub dual: DualState,
    /// Rates and efficiency at `p`.
    pub report: RateReport,
    /// Whether the stopping rule was met before the iteration cap.
    pub converged: bool,
    /// One entry per iteration.
    pub trace: Vec<TraceEntry>,
    /// Precoder.
    pub scheme: Precoder,
    /// Active antennas.
    pub antennas: usize,
    /// Group budgets and multipliers when cell division was used.
    pub groups: Option<GroupBudget>,
    /// Some QoS multiplier exceeded [`INFEASIBLE_MULTIPLIER`].
    pub infeasible: bool,
    /// Cell division found an empty group and ran the plain solver.
    pub fell_back: bool,
    /// The antenna count alternated and was frozen.
    pub oscillation: bool,
    /// Last antenna-selection estimate, bits/s per W.
    pub theta: Option<f64>,
}

impl PowerSolution {
    /// Number of iterations run.
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Closed-form MRT update of user `k`, clamped to `[0, P_max]`.
///
/// `p_k = (1+G_k) / ((S_k - q - Psi) ln 2) - K / (K - delta^2)` with
/// `S_k = sum_{j != k} (1+G_j) / ((sum_{i != j} p_i + 1/ze) ln 2)`.
pub fn power_update_mrt(p: &[f64], dual: &DualState, cfg: &SystemConfig, k: usize) -> Result<f64> {
    closed_form(p, dual, dual.psi, cfg, Precoder::Mrt, k, cfg.max_power)
}

/// Closed-form ZF update of user `k`, clamped to `[0, P_max]`.
///
/// Same as [`power_update_mrt`] with `(M-1)(M-2) / (ups (1 - delta^2))` as
/// the subtracted term. Undefined for `delta = 1`.
pub fn power_update_zf(p: &[f64], dual: &DualState, cfg: &SystemConfig, k: usize) -> Result<f64> {
    closed_form(p, dual, dual.psi, cfg, Precoder::Zf, k, cfg.max_power)
}

pub(crate) fn closed_form(
    p: &[f64],
    dual: &DualState,
    psi: f64,
    cfg: &SystemConfig,
    scheme: Precoder,
    k: usize,
    cap: f64,
) -> Result<f64> {
    check_inputs(p, dual, cfg, k)?;
    if scheme == Precoder::Zf && cfg.csi_accuracy >= 1.0 {
        return Err(Error::PerfectCsiUnsupported);
    }
    let model = SinrModel::new(cfg, scheme, cfg.antennas)?;
    let w = weights(&dual.gamma);
    clamped_explicit(&model, p, k, &w, dual.q + psi, 1.0 / cfg.eve_gain, cap)
}

fn check_inputs(p: &[f64], dual: &DualState, cfg: &SystemConfig, k: usize) -> Result<()> {
    if p.len() != cfg.users || dual.gamma.len() != cfg.users || k >= cfg.users {
        return Err(Error::InvalidDimension(alloc::format!(
            "{} powers, {} multipliers, user {k}, K = {}",
            p.len(),
            dual.gamma.len(),
            cfg.users
        )));
    }
    Ok(())
}

/// Stationarity residual of user `k`:
/// `(1+G_k) a / ((a p_k + b) ln 2) - S_k + q + Psi`, with `a, b` the slope and
/// intercept of the SINR denominator.
pub fn stationarity_residual(
    p: &[f64],
    dual: &DualState,
    cfg: &SystemConfig,
    scheme: Precoder,
    k: usize,
) -> Result<f64> {
    group_residual(p, dual, dual.psi, cfg, scheme, cfg.antennas, k)
}

pub(crate) fn group_residual(
    p: &[f64],
    dual: &DualState,
    psi: f64,
    cfg: &SystemConfig,
    scheme: Precoder,
    antennas: usize,
    k: usize,
) -> Result<f64> {
    check_inputs(p, dual, cfg, k)?;
    let model = SinrModel::new(cfg, scheme, antennas)?;
    let w = weights(&dual.gamma);
    let prob = UserProblem::new(&model, p, k, &w, dual.q + psi, 1.0 / cfg.eve_gain);
    Ok(prob.residual(p[k]))
}

fn weights(gamma: &[f64]) -> Vec<f64> {
    gamma.iter().map(|g| 1.0 + g).collect()
}

/// Every user at `P_max / K`, no iteration.
pub fn equal_power_baseline(cfg: &SystemConfig, scheme: Precoder) -> Result<PowerSolution> {
    cfg.validate_for(scheme)?;
    let p = vec![cfg.max_power / cfg.users as f64; cfg.users];
    let report = report(&p, cfg, scheme)?;
    Ok(PowerSolution {
        dual: DualState {
            psi: 0.0,
            gamma: vec![0.0; cfg.users],
            q: report.ee_sec,
            iter: 0,
        },
        p,
        report,
        converged: true,
        trace: Vec::new(),
        scheme,
        antennas: cfg.antennas,
        groups: None,
        infeasible: false,
        fell_back: false,
        oscillation: false,
        theta: None,
    })
}

/// Plain allocation: one budget shared by all users.
pub fn solve_algorithm1(cfg: &SystemConfig, scheme: Precoder) -> Result<PowerSolution> {
    cfg.validate_for(scheme)?;
    let (sol, _) = run_fixed_array(cfg, scheme, &Partition::single(cfg))?;
    Ok(sol)
}

/// Users split into budget groups.
#[derive(Debug, Clone)]
pub(crate) struct Partition {
    pub members: Vec<Vec<usize>>,
    pub budgets: Vec<f64>,
    pub group_of: Vec<usize>,
}

impl Partition {
    pub fn single(cfg: &SystemConfig) -> Self {
        Partition {
            members: vec![(0..cfg.users).collect()],
            budgets: vec![cfg.max_power],
            group_of: vec![0; cfg.users],
        }
    }

    pub fn initial_powers(&self, users: usize) -> Vec<f64> {
        let mut p = vec![0.0; users];
        for (members, &budget) in self.members.iter().zip(&self.budgets) {
            let share = budget / members.len() as f64;
            for &k in members {
                p[k] = share;
            }
        }
        p
    }
}

/// Mutable iterate shared by every solver loop.
#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub p: Vec<f64>,
    pub psi: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Iterate {
    pub fn new(partition: &Partition, users: usize) -> Self {
        Iterate {
            p: partition.initial_powers(users),
            psi: vec![INITIAL_MULTIPLIER; partition.budgets.len()],
            gamma: vec![INITIAL_MULTIPLIER; users],
        }
    }

    pub fn dual(&self, q: f64, iter: usize) -> DualState {
        DualState {
            psi: self.psi[0],
            gamma: self.gamma.clone(),
            q,
            iter,
        }
    }
}

/// Outcome of one sweep.
pub(crate) struct SweepOutcome {
    /// Largest violation of the first-order conditions, counting only the
    /// sign for users at zero or at their cap.
    pub max_residual: f64,
}

/// One pass of best responses at price `base + psi_g`.
pub(crate) fn sweep(
    cfg: &SystemConfig,
    model: &SinrModel,
    partition: &Partition,
    it: &mut Iterate,
    base_price: f64,
) -> SweepOutcome {
    let users = cfg.users;
    let w = weights(&it.gamma);
    let inv_eve = 1.0 / cfg.eve_gain;
    let prices: Vec<f64> = (0..users)
        .map(|k| base_price + it.psi[partition.group_of[k]])
        .collect();
    let price = |k: usize| prices[k];
    match cfg.update_order {
        UpdateOrder::GaussSeidel => {
            for k in 0..users {
                let cap = cap_for(cfg, partition, &it.p, k);
                let prob = UserProblem::new(model, &it.p, k, &w, price(k), inv_eve);
                it.p[k] = prob.best_response(cap);
            }
        }
        UpdateOrder::Jacobi => {
            // Simultaneous best responses all react to the same aggregate
            // and cycle, so each user moves a 1/K share of the way.
            let old = it.p.clone();
            let step = 1.0 / users as f64;
            let next: Vec<f64> = (0..users)
                .map(|k| {
                    let cap = cap_for(cfg, partition, &old, k);
                    let br =
                        UserProblem::new(model, &old, k, &w, price(k), inv_eve).best_response(cap);
                    old[k] + step * (br - old[k])
                })
                .collect();
            it.p = next;
            project_to_budgets(cfg, partition, &mut it.p);
        }
    }
    polish(cfg, model, partition, it, &w, &prices);
    let mut max_residual: f64 = 0.0;
    for k in 0..users {
        let cap = cap_for(cfg, partition, &it.p, k);
        let prob = UserProblem::new(model, &it.p, k, &w, price(k), inv_eve);
        let r = prob.residual(it.p[k]);
        // Interior powers need r = 0; a zero power needs r >= 0 and a
        // capped one r <= 0. A user pinned at both cannot move at all.
        let at_zero = it.p[k] <= 0.0;
        let at_cap = it.p[k] >= cap * (1.0 - 1e-12);
        let violation = match (at_zero, at_cap) {
            (true, true) => 0.0,
            (true, false) => (-r).max(0.0),
            (false, true) => r.max(0.0),
            (false, false) => r.abs(),
        };
        max_residual = max_residual.max(violation);
    }
    SweepOutcome { max_residual }
}

/// Newton step on the users strictly inside their caps. Coordinate-wise
/// best responses converge slowly along directions that move power between
/// users, since the objective is nearly flat there.
fn polish(
    cfg: &SystemConfig,
    model: &SinrModel,
    partition: &Partition,
    it: &mut Iterate,
    w: &[f64],
    prices: &[f64],
) {
    let users = cfg.users;
    let free: Vec<bool> = (0..users)
        .map(|k| it.p[k] > 0.0 && it.p[k] < cap_for(cfg, partition, &it.p, k) * (1.0 - 1e-12))
        .collect();
    let all: Vec<usize> = (0..users).collect();
    let mut limits: Vec<(&[usize], f64)> = partition
        .members
        .iter()
        .zip(&partition.budgets)
        .map(|(m, &b)| (m.as_slice(), b))
        .collect();
    limits.push((all.as_slice(), cfg.max_power));
    let joint = JointProblem {
        model,
        weights: w,
        prices,
        inv_eve: 1.0 / cfg.eve_gain,
    };
    joint.newton_step(&mut it.p, &free, &limits);
}

/// Largest power user `k` can take without breaking its group budget or
/// the total budget, given everybody else's power.
pub(crate) fn cap_for(cfg: &SystemConfig, partition: &Partition, p: &[f64], k: usize) -> f64 {
    let g = partition.group_of[k];
    let in_group: f64 = partition.members[g].iter().map(|&j| p[j]).sum();
    let total: f64 = p.iter().sum();
    let group_room = partition.budgets[g] - (in_group - p[k]);
    let total_room = cfg.max_power - (total - p[k]);
    group_room.min(total_room).max(0.0)
}

fn project_to_budgets(cfg: &SystemConfig, partition: &Partition, p: &mut [f64]) {
    for (members, &budget) in partition.members.iter().zip(&partition.budgets) {
        let sum: f64 = members.iter().map(|&j| p[j]).sum();
        if sum > budget {
            let scale = budget / sum;
            for &j in members {
                p[j] *= scale;
            }
        }
    }
    let total: f64 = p.iter().sum();
    if total > cfg.max_power {
        let scale = cfg.max_power / total;
        p.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Projected subgradient steps on every multiplier. Returns whether some QoS
/// multiplier crossed the infeasibility threshold.
pub(crate) fn update_multipliers(
    cfg: &SystemConfig,
    partition: &Partition,
    it: &mut Iterate,
    rep: &RateReport,
) -> bool {
    for (g, members) in partition.members.iter().enumerate() {
        let used: f64 = members.iter().map(|&j| it.p[j]).sum();
        let slack = partition.budgets[g] - used;
        it.psi[g] = (it.psi[g] - cfg.budget_step * slack).max(0.0);
    }
    let mut infeasible = false;
    for (g, r) in it.gamma.iter_mut().zip(&rep.rate_sec) {
        *g = (*g - cfg.qos_step * (r - cfg.min_rate)).max(0.0);
        infeasible |= *g > INFEASIBLE_MULTIPLIER;
    }
    infeasible
}

/// Slack allowed on the minimum-rate constraint at a stopping point, in
/// bit/s/Hz.
const QOS_SLACK: f64 = 1e-6;

/// Whether a sweep left the iterate at a first-order point that also meets
/// every minimum rate.
pub(crate) fn is_kkt_point(cfg: &SystemConfig, out: &SweepOutcome, rep: &RateReport) -> bool {
    out.max_residual <= cfg.stationarity_tol && rep.rate_sec.iter().all(|&r| r >= cfg.min_rate - QOS_SLACK)
}

/// Dinkelbach loop at a fixed array size. Also returns the group
/// multipliers used in the last sweep.
pub(crate) fn run_fixed_array(
    cfg: &SystemConfig,
    scheme: Precoder,
    partition: &Partition,
) -> Result<(PowerSolution, Vec<f64>)> {
    let antennas = cfg.antennas;
    let model = SinrModel::new(cfg, scheme, antennas)?;
    let mut it = Iterate::new(partition, cfg.users);
    let mut q = report_with_antennas(&it.p, cfg, scheme, antennas)?.ee_sec;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut infeasible = false;
    let mut used;
    let mut rep;
    let mut iter = 0;
    loop {
        iter += 1;
        used = it.dual(q, iter);
        let out = sweep(cfg, &model, partition, &mut it, q);
        rep = report_with_antennas(&it.p, cfg, scheme, antennas)?;
        let total: f64 = it.p.iter().sum();
        let surplus = rep.sum_secure_rate() - q * (total + antennas as f64 * cfg.circuit_power);
        trace.push(TraceEntry {
            iter,
            q,
            total_power: total,
            surplus,
            antennas,
            theta: 0.0,
        });
        if surplus.abs() <= cfg.surplus_tol && is_kkt_point(cfg, &out, &rep) {
            converged = true;
            break;
        }
        if iter >= cfg.max_iters {
            break;
        }
        infeasible |= update_multipliers(cfg, partition, &mut it, &rep);
        q = rep.ee_sec;
    }
    let sol = PowerSolution {
        p: it.p,
        dual: used,
        report: rep,
        converged,
        trace,
        scheme,
        antennas,
        groups: None,
        infeasible,
        fell_back: false,
        oscillation: false,
        theta: None,
    };
    Ok((sol, it.psi))
}
