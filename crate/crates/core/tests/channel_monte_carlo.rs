use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use see_mimo_core::channel::{empirical_sinr, estimate_upsilon, generate_channel, generate_layout};
use see_mimo_core::cmatrix::CMatrix;
use see_mimo_core::metrics::{sinr_mrt, sinr_zf, upsilon};
use see_mimo_core::{Precoder, SystemConfig};

fn mean_empirical(cfg: &SystemConfig, scheme: Precoder, p: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = generate_layout(cfg, &mut rng).unwrap();
    let powers = vec![p; cfg.users];
    let mut total = 0.0;
    for _ in 0..draws {
        let real = generate_channel(cfg, &layout, scheme, &mut rng).unwrap();
        total += (0..cfg.users)
            .map(|k| empirical_sinr(&real, &powers, k, cfg))
            .sum::<f64>();
    }
    total / (draws * cfg.users) as f64
}

#[test]
fn mrt_precoder_trace_is_mk_on_average() {
    let cfg = SystemConfig {
        antennas: 64,
        users: 8,
        ..SystemConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let layout = generate_layout(&cfg, &mut rng).unwrap();
    let mean: f64 = (0..500)
        .map(|_| {
            generate_channel(&cfg, &layout, Precoder::Mrt, &mut rng)
                .unwrap()
                .precoder
                .frobenius_sq()
        })
        .sum::<f64>()
        / 500.0;
    assert!(
        (mean / (64.0 * 8.0) - 1.0).abs() < 0.03,
        "mean trace {mean}"
    );
}

#[test]
fn empirical_normalization_matches_analytic() {
    for (scheme, m, k) in [(Precoder::Mrt, 32, 4), (Precoder::Zf, 32, 4)] {
        let cfg = SystemConfig {
            antennas: m,
            users: k,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layout = generate_layout(&cfg, &mut rng).unwrap();
        let est = estimate_upsilon(&cfg, &layout, scheme, 2000, &mut rng).unwrap();
        let exact = upsilon(scheme, m, k);
        // E{tr((C^H C)^-1)} = K / (M - K) for complex Wishart matrices.
        assert!(
            (est / exact - 1.0).abs() < 0.03,
            "{scheme}: {est} vs {exact}"
        );
    }
}

#[test]
fn mrt_closed_form_tracks_monte_carlo() {
    let cfg = SystemConfig::default();
    let emp = mean_empirical(&cfg, Precoder::Mrt, 0.1, 2000, 3);
    let closed = sinr_mrt(0.1, &cfg).unwrap();
    let gap = (emp - closed).abs() / closed;
    assert!(gap <= 0.10, "empirical {emp}, closed {closed}, gap {gap}");
    // The empirical mean has delta^2 M p (1 + 1/M) on top; a plain delta in
    // the numerator overshoots it by about 1/delta.
    let squared = SystemConfig {
        mrt_delta_squared: true,
        ..cfg.clone()
    };
    let closer = sinr_mrt(0.1, &squared).unwrap();
    assert!((emp - closer).abs() / closer < 0.02);
}

#[test]
fn zf_closed_form_tracks_monte_carlo() {
    let cfg = SystemConfig::default();
    let emp = mean_empirical(&cfg, Precoder::Zf, 0.1, 2000, 4);
    let closed = sinr_zf(0.1, &cfg).unwrap();
    assert!((emp - closed).abs() / closed <= 0.10, "{emp} vs {closed}");
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..6).prop_flat_map(|k| (Just(k), (k + 1)..(k + 12)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimate_and_error_rebuild_channel((k, m) in dims(), delta in 0.0..=1.0f64, seed in any::<u64>()) {
        let cfg = SystemConfig { antennas: m.max(3), users: k, csi_accuracy: delta, ..SystemConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = generate_layout(&cfg, &mut rng).unwrap();
        let real = generate_channel(&cfg, &layout, Precoder::Mrt, &mut rng).unwrap();
        let e = (1.0 - delta * delta).sqrt();
        let rebuilt = CMatrix::from_fn(cfg.antennas, k, |r, c| real.c_hat[(r, c)] * delta + real.x[(r, c)] * e);
        prop_assert!(real.c.max_abs_diff(&rebuilt) <= 1e-12);
    }

    #[test]
    fn zf_precoder_is_orthogonal((k, m) in dims(), seed in any::<u64>()) {
        let cfg = SystemConfig { antennas: m.max(3), users: k, ..SystemConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = generate_layout(&cfg, &mut rng).unwrap();
        let real = generate_channel(&cfg, &layout, Precoder::Zf, &mut rng).unwrap();
        let g = real.c_hat.gram(&real.precoder);
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[(i, j)].re - target).abs() <= 1e-9 && g[(i, j)].im.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn same_seed_same_draws(seed in any::<u64>()) {
        let cfg = SystemConfig { antennas: 12, users: 4, ..SystemConfig::default() };
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layout = generate_layout(&cfg, &mut rng).unwrap();
            let real = generate_channel(&cfg, &layout, Precoder::Zf, &mut rng).unwrap();
            (layout, real)
        };
        prop_assert_eq!(draw(), draw());
    }
}
