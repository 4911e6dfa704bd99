use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use see_mimo_core::antenna_selection::{solve_algorithm3, solve_algorithm4, theta_state};
use see_mimo_core::cell_division::{group_stationarity_residual, solve_algorithm2};
use see_mimo_core::channel::{generate_layout, Group, UserLayout};
use see_mimo_core::metrics::report;
use see_mimo_core::power_alloc::{equal_power_baseline, solve_algorithm1, stationarity_residual};
use see_mimo_core::{PowerSolution, Precoder, SystemConfig, UpdateOrder};

fn instance(cfg: &SystemConfig, seed: u64) -> (SystemConfig, UserLayout) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = generate_layout(cfg, &mut rng).unwrap();
    let cfg = SystemConfig {
        eve_gain: layout.eve_gain,
        ..cfg.clone()
    };
    (cfg, layout)
}

fn grid_optimum(cfg: &SystemConfig, scheme: Precoder, n: usize) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = [
                cfg.max_power * i as f64 / (n - 1) as f64,
                cfg.max_power * j as f64 / (n - 1) as f64,
            ];
            if p[0] + p[1] > cfg.max_power {
                continue;
            }
            let r = report(&p, cfg, scheme).unwrap();
            if r.rate_sec.iter().all(|&v| v >= cfg.min_rate) {
                best = best.max(r.ee_sec);
            }
        }
    }
    best
}

fn interior(sol: &PowerSolution, cap: f64) -> impl Iterator<Item = usize> + '_ {
    (0..sol.p.len()).filter(move |&k| sol.p[k] > 0.0 && sol.p[k] < cap * (1.0 - 1e-9))
}

fn budget_left(sol: &PowerSolution, members: &[usize], budget: f64, total: f64) -> f64 {
    let used: f64 = members.iter().map(|&k| sol.p[k]).sum();
    let all: f64 = sol.p.iter().sum();
    (budget - used).min(total - all)
}

#[test]
fn two_user_grid_oracle() {
    let base = SystemConfig {
        users: 2,
        ..SystemConfig::default()
    };
    for seed in 0..3 {
        let (cfg, _) = instance(&base, seed);
        for scheme in Precoder::ALL {
            let sol = solve_algorithm1(&cfg, scheme).unwrap();
            let grid = grid_optimum(&cfg, scheme, 200);
            assert!(sol.converged);
            assert!(
                sol.report.ee_sec >= 0.95 * grid,
                "{scheme}: {} vs {grid}",
                sol.report.ee_sec
            );
        }
    }
}

#[test]
fn kkt_residuals_at_convergence() {
    let base = SystemConfig::default();
    for seed in 0..3 {
        let (cfg, layout) = instance(&base, seed);
        for scheme in Precoder::ALL {
            let sol = solve_algorithm1(&cfg, scheme).unwrap();
            assert!(sol.converged);
            let slack = cfg.max_power - sol.p.iter().sum::<f64>();
            for k in interior(&sol, sol.p.iter().copied().fold(0.0, f64::max) + slack) {
                let r = stationarity_residual(&sol.p, &sol.dual, &cfg, scheme, k).unwrap();
                assert!(r.abs() <= 1e-6, "alg1 {scheme} user {k}: {r}");
            }

            let sol = solve_algorithm2(&cfg, &layout, scheme).unwrap();
            assert!(sol.converged);
            let g = sol.groups.unwrap();
            for (group, budget, psi) in
                [(Group::Central, g.p1, g.psi1), (Group::Edge, g.p2, g.psi2)]
            {
                let members = layout.members(group);
                let room = budget_left(&sol, &members, budget, cfg.max_power);
                for &k in &members {
                    if sol.p[k] > 0.0 && room > 1e-9 * cfg.max_power {
                        let r =
                            group_stationarity_residual(&sol.p, &sol.dual, &cfg, scheme, k, psi)
                                .unwrap();
                        assert!(r.abs() <= 1e-6, "alg2 {scheme} user {k}: {r}");
                    }
                }
            }
        }
    }
}

#[test]
fn surplus_shrinks_over_the_trace() {
    let (cfg, _) = instance(&SystemConfig::default(), 5);
    for scheme in Precoder::ALL {
        let sol = solve_algorithm1(&cfg, scheme).unwrap();
        let first = sol.trace.first().unwrap().surplus.abs();
        let last = sol.trace.last().unwrap().surplus.abs();
        assert!(sol.converged && last <= first && last <= cfg.surplus_tol);
    }
}

#[test]
fn algorithm1_beats_equal_power_when_budget_is_loose() {
    let (cfg, _) = instance(&SystemConfig::default(), 2);
    for scheme in Precoder::ALL {
        let a = solve_algorithm1(&cfg, scheme).unwrap();
        let e = equal_power_baseline(&cfg, scheme).unwrap();
        assert!(a.report.ee_sec > e.report.ee_sec);
    }
}

#[test]
fn jacobi_order_reaches_same_efficiency() {
    let (cfg, _) = instance(&SystemConfig::default(), 4);
    let jacobi = SystemConfig {
        update_order: UpdateOrder::Jacobi,
        ..cfg.clone()
    };
    let a = solve_algorithm1(&cfg, Precoder::Zf).unwrap();
    let b = solve_algorithm1(&jacobi, Precoder::Zf).unwrap();
    assert!(b.converged);
    assert!((a.report.ee_sec - b.report.ee_sec).abs() < 1e-6);
}

#[test]
fn unreachable_qos_is_flagged() {
    let cfg = SystemConfig {
        min_rate: 50.0,
        max_iters: 500,
        qos_step: 1.0,
        ..SystemConfig::default()
    };
    let sol = solve_algorithm1(&cfg, Precoder::Mrt).unwrap();
    assert!(!sol.converged);
    assert!(sol.infeasible);
    assert!(sol.p.iter().sum::<f64>() <= cfg.max_power + 1e-9);
}

#[test]
fn perfect_csi_zf_still_solves() {
    let cfg = SystemConfig {
        csi_accuracy: 1.0,
        ..SystemConfig::default()
    };
    let sol = solve_algorithm1(&cfg, Precoder::Zf).unwrap();
    assert!(sol.converged);
    assert!(sol.report.ee_sec > 0.0);
}

#[test]
fn selection_fixed_point_and_bounds() {
    let (cfg, layout) = instance(&SystemConfig::default(), 8);
    for scheme in Precoder::ALL {
        for sol in [
            solve_algorithm3(&cfg, scheme).unwrap(),
            solve_algorithm4(&cfg, &layout, scheme).unwrap(),
        ] {
            assert!(sol.converged);
            let st = theta_state(&sol, &cfg).unwrap();
            let omega2 = sol.p.iter().sum::<f64>() + sol.antennas as f64 * cfg.circuit_power;
            let ratio = cfg.bandwidth * sol.report.sum_secure_rate() / omega2;
            assert!(
                (st.theta - ratio).abs() <= 1e-6 * ratio,
                "{} vs {ratio}",
                st.theta
            );
            assert!(sol.antennas >= scheme.min_antennas(cfg.users) && sol.antennas <= cfg.antennas);
            // Theta never drops after the first update.
            for w in sol.trace.windows(2).skip(1) {
                assert!(
                    w[1].theta >= w[0].theta * (1.0 - 1e-9),
                    "{} -> {}",
                    w[0].theta,
                    w[1].theta
                );
            }
        }
    }
}

#[test]
fn small_array_selection_keeps_all_antennas() {
    let (cfg, _) = instance(
        &SystemConfig {
            antennas: 20,
            ..SystemConfig::default()
        },
        1,
    );
    for scheme in Precoder::ALL {
        let a3 = solve_algorithm3(&cfg, scheme).unwrap();
        let a1 = solve_algorithm1(&cfg, scheme).unwrap();
        assert_eq!(a3.antennas, 20);
        assert!((a3.report.ee_sec - a1.report.ee_sec).abs() <= 1e-6 * a1.report.ee_sec);
    }
}

#[test]
fn one_group_layout_reduces_to_selection_without_division() {
    let cfg = SystemConfig {
        users: 4,
        ..SystemConfig::default()
    };
    let layout = UserLayout::from_positions(
        &cfg,
        &[(60.0, 0.0), (0.0, 80.0), (-90.0, 0.0), (0.0, -100.0)],
        (200.0, 0.0),
    );
    for scheme in Precoder::ALL {
        let a4 = solve_algorithm4(&cfg, &layout, scheme).unwrap();
        let a3 = solve_algorithm3(&cfg, scheme).unwrap();
        assert!(a4.fell_back);
        assert_eq!(a4.p, a3.p);
        assert_eq!(a4.antennas, a3.antennas);
    }
}

fn check_feasible(
    sol: &PowerSolution,
    cfg: &SystemConfig,
    layout: &UserLayout,
) -> Result<(), TestCaseError> {
    let total: f64 = sol.p.iter().sum();
    prop_assert!(sol.p.iter().all(|&v| v >= 0.0));
    prop_assert!(total <= cfg.max_power + 1e-9);
    if let Some(g) = sol.groups {
        prop_assert!((g.p1 + g.p2 - cfg.max_power).abs() <= 1e-12 * cfg.max_power);
        let central: f64 = layout
            .members(Group::Central)
            .iter()
            .map(|&k| sol.p[k])
            .sum();
        let edge: f64 = layout.members(Group::Edge).iter().map(|&k| sol.p[k]).sum();
        prop_assert!(central <= g.p1 + 1e-9 && edge <= g.p2 + 1e-9);
        prop_assert!(g.psi1 >= 0.0 && g.psi2 >= 0.0);
    }
    prop_assert!(sol.dual.psi >= 0.0 && sol.dual.gamma.iter().all(|&g| g >= 0.0));
    prop_assert!(
        sol.antennas <= cfg.antennas && sol.antennas >= sol.scheme.min_antennas(cfg.users)
    );
    prop_assert!(sol.report.ee_sec >= 0.0);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_solver_returns_feasible_powers(
        users in 1usize..7,
        extra in 1usize..60,
        max_power in 0.1..30.0f64,
        delta in 0.3..=1.0f64,
        min_rate in 0.0..2.0f64,
        seed in any::<u64>(),
        zf in any::<bool>(),
    ) {
        let base = SystemConfig {
            users,
            antennas: (users + extra).max(3),
            max_power,
            csi_accuracy: delta,
            min_rate,
            max_iters: 200,
            ..SystemConfig::default()
        };
        let (cfg, layout) = instance(&base, seed);
        let scheme = if zf { Precoder::Zf } else { Precoder::Mrt };
        check_feasible(&solve_algorithm1(&cfg, scheme).unwrap(), &cfg, &layout)?;
        check_feasible(&solve_algorithm2(&cfg, &layout, scheme).unwrap(), &cfg, &layout)?;
        check_feasible(&solve_algorithm3(&cfg, scheme).unwrap(), &cfg, &layout)?;
        check_feasible(&solve_algorithm4(&cfg, &layout, scheme).unwrap(), &cfg, &layout)?;
    }
}
