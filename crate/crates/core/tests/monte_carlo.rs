use ftmux_core::schedule::schedule;
use ftmux_core::stream::StreamKey;
use ftmux_core::{
    brute_force_success, lossless_success, lossy_success, mc_estimate, mc_optimal_m, optimal_m,
    sample_grid, schedule_survival, McSettings, Objective, Occupancy, Preset, SetupConfig, Variant,
};

fn within(estimate: f64, truth: f64, stderr: f64, k: f64) -> bool {
    (estimate - truth).abs() <= k * stderr
}

#[test]
fn fixed_estimates_track_closed_forms_across_seeds() {
    let cfg = SetupConfig::preset(Preset::OneLoopDefault)
        .with_n(4)
        .with_m(10);
    let lossless = lossless_success(0.1, 10, 4).unwrap();
    let lossy = lossy_success(&cfg).unwrap();
    let mut hits = 0;
    for seed in 0..20 {
        let est = mc_estimate(&cfg, &McSettings::new(100_000, seed)).unwrap();
        if within(
            est.lossless.success_prob,
            lossless,
            est.lossless_success_stderr(),
            4.0,
        ) && within(
            est.lossy.success_prob,
            lossy,
            est.lossy_success_stderr(),
            4.0,
        ) {
            hits += 1;
        }
    }
    // each check fails with probability ~6e-5
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn stderr_shrinks_as_inverse_root() {
    let cfg = SetupConfig::preset(Preset::OneLoopDefault)
        .with_n(3)
        .with_m(8);
    let big = mc_estimate(&cfg, &McSettings::new(400_000, 5)).unwrap();
    let small = mc_estimate(&cfg, &McSettings::new(100_000, 5)).unwrap();
    let ratio = small.lossy.stderr / big.lossy.stderr;
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    let ratio = small.lossless.stderr / big.lossless.stderr;
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
}

#[test]
fn partial_estimates_match_enumeration() {
    let shapes = [(1, 2), (2, 1), (1, 3)];
    for preset in [
        Preset::Lossless,
        Preset::OneLoopDefault,
        Preset::ThreeLoopDefault,
    ] {
        for occupancy in [Occupancy::Unlimited, Occupancy::Single] {
            for (i, &(n, m)) in shapes.iter().enumerate() {
                let cfg = SetupConfig::preset(preset)
                    .with_variant(Variant::Partial)
                    .with_occupancy(occupancy)
                    .with_n(n)
                    .with_m(m)
                    .with_p(0.3);
                let exact = brute_force_success(&cfg).unwrap();
                let est = mc_estimate(&cfg, &McSettings::new(200_000, 40 + i as u64)).unwrap();
                assert!(
                    within(
                        est.lossless.success_prob,
                        exact.p_lossless,
                        est.lossless_success_stderr(),
                        4.5
                    ),
                    "{preset} {occupancy} n={n} m={m}: {} vs {}",
                    est.lossless.success_prob,
                    exact.p_lossless
                );
                assert!(
                    within(
                        est.lossy.success_prob,
                        exact.p_lossy,
                        est.lossy_success_stderr(),
                        4.5
                    ),
                    "{preset} {occupancy} n={n} m={m}: {} vs {}",
                    est.lossy.success_prob,
                    exact.p_lossy
                );
            }
        }
    }
}

/// Full-grid estimator: draw every cell, schedule, and average.
fn full_grid_estimate(cfg: &SetupConfig, samples: u64, seed: u64) -> (f64, f64, f64, f64) {
    let key = StreamKey::new(seed, "full-grid");
    let (mut ok, mut surv, mut surv_sq) = (0.0, 0.0, 0.0);
    for i in 0..samples {
        let grid = sample_grid(cfg, &mut key.rng(i));
        if let Some(s) = schedule(&grid, cfg).unwrap() {
            let v = schedule_survival(&s, cfg).unwrap();
            ok += 1.0;
            surv += v;
            surv_sq += v * v;
        }
    }
    let n = samples as f64;
    let p_ok = ok / n;
    let mean = surv / n;
    (
        p_ok,
        (p_ok * (1.0 - p_ok) / n).sqrt(),
        mean,
        ((surv_sq / n - mean * mean) / n).sqrt(),
    )
}

#[test]
fn geometric_sampler_agrees_with_full_grids() {
    for occupancy in [Occupancy::Unlimited, Occupancy::Single] {
        let cfg = SetupConfig::preset(Preset::ThreeLoopDefault)
            .with_variant(Variant::Partial)
            .with_occupancy(occupancy)
            .with_n(2)
            .with_m(7)
            .with_p(0.12);
        let (ok, ok_se, surv, surv_se) = full_grid_estimate(&cfg, 60_000, 1);
        let est = mc_estimate(&cfg, &McSettings::new(200_000, 2)).unwrap();
        let se = (ok_se.powi(2) + est.lossless_success_stderr().powi(2)).sqrt();
        assert!(
            within(est.lossless.success_prob, ok, se, 4.5),
            "{occupancy}: {} vs {ok}",
            est.lossless.success_prob
        );
        let se = (surv_se.powi(2) + est.lossy_success_stderr().powi(2)).sqrt();
        assert!(
            within(est.lossy.success_prob, surv, se, 4.5),
            "{occupancy}: {} vs {surv}",
            est.lossy.success_prob
        );
    }
}

#[test]
fn fixed_optimum_close_to_analytic() {
    let cfg = SetupConfig::preset(Preset::Lossless).with_n(4);
    let (analytic, _) = optimal_m(&cfg, 40, Objective::Lossless).unwrap();
    let (mc, _) = mc_optimal_m(&cfg, &McSettings::new(200_000, 17), 40).unwrap();
    assert!(mc.abs_diff(analytic) <= 2, "{mc} vs {analytic}");
}

#[test]
fn partial_at_least_matches_fixed() {
    let fixed = SetupConfig::preset(Preset::Lossless).with_n(4);
    let (_, best_fixed) = optimal_m(&fixed, 60, Objective::Lossless).unwrap();
    let partial = fixed.with_variant(Variant::Partial);
    let (_, est) = mc_optimal_m(&partial, &McSettings::new(100_000, 3), 60).unwrap();
    assert!(est.lossy.rate_per_bin >= best_fixed.rate_per_bin - 3.0 * est.lossy.stderr);
}

#[test]
fn single_occupancy_never_beats_unlimited_per_sample_stream() {
    // same seed, same grids: single-occupancy successes are a subset
    let base = SetupConfig::preset(Preset::OneLoopDefault)
        .with_variant(Variant::Partial)
        .with_n(3)
        .with_m(4);
    let settings = McSettings::new(50_000, 77);
    let u = mc_estimate(&base, &settings).unwrap();
    let s = mc_estimate(&base.with_occupancy(Occupancy::Single), &settings).unwrap();
    assert!(s.lossless.success_prob <= u.lossless.success_prob);
    assert!(s.lossy.success_prob <= u.lossy.success_prob);
}
