//! Slow cross-validation tests: the statistical agreements between the
//! simulator's realized quantities and their analytical counterparts that go
//! beyond the per-module unit tests.

use cellnet_core::montecarlo::{
    run_conditioned, run_experiment, run_samples, CsiMode, ExperimentConfig, Scheme,
};

const LAMBDA: f64 = 1e-6;

fn probe_config() -> ExperimentConfig {
    ExperimentConfig {
        lambda: LAMBDA,
        alpha: 4.0,
        pilot_reuse: 7,
        csi_mode: CsiMode::Perfect,
        theta_db: vec![0.0],
        seed: 77,
        kprime_hist_realizations: 200,
        ..ExperimentConfig::default()
    }
}

/// Realized out-of-cell interference at (nearly) fixed serving distance
/// matches the Campbell mean 2πλ t^{-(α-2)}/(α-2) within 5%.
#[test]
fn interference_mean_matches_campbell() {
    let config = ExperimentConfig {
        n_antennas: 4,
        k_served: 1,
        schemes: vec![Scheme::CeuZf],
        n_realizations: 100_000,
        exact_interferers: 3,
        ..probe_config()
    };
    let samples = run_samples(&config).unwrap();
    // Bin by serving distance around typical values.
    for t_center in [350.0, 500.0, 700.0] {
        let half = 25.0;
        let mut acc = 0.0;
        let mut count = 0usize;
        for s in &samples {
            if (s.t - t_center).abs() <= half {
                acc += s.sir[0].out_of_cell;
                count += 1;
            }
        }
        assert!(count > 2000, "thin bin at t = {t_center}: {count}");
        let mean = acc / count as f64;
        // Average the Campbell mean over the bin (convex in t, bins narrow).
        let expected = 2.0 * std::f64::consts::PI * LAMBDA * t_center.powf(-2.0) / 2.0;
        let rel = (mean - expected).abs() / expected;
        assert!(
            rel < 0.05,
            "t = {t_center}: realized mean {mean:e} vs Campbell {expected:e} (rel {rel:.3}, n = {count})"
        );
    }
}

/// Fast interference mode (Gamma fading beyond the exact set) agrees with a
/// much larger exact set on coverage within Monte Carlo resolution.
#[test]
fn fast_and_exact_interference_modes_agree() {
    let theta_db: Vec<f64> = vec![-5.0, 0.0, 5.0, 10.0];
    let run = |exact: usize, seed: u64| -> Vec<f64> {
        let config = ExperimentConfig {
            n_antennas: 64,
            k_served: 8,
            schemes: vec![Scheme::CeuZf],
            theta_db: theta_db.clone(),
            n_realizations: 100_000,
            exact_interferers: exact,
            seed,
            ..probe_config()
        };
        run_experiment(&config)
            .unwrap()
            .per_scheme[0]
            .coverage
            .iter()
            .map(|c| c.value)
            .collect()
    };
    let fast = run(2, 501);
    let default = run(10, 502);
    let exact = run(50, 503);
    for i in 0..theta_db.len() {
        assert!(
            (fast[i] - exact[i]).abs() < 0.01,
            "theta {} dB: exact-2 {} vs exact-50 {}",
            theta_db[i],
            fast[i],
            exact[i]
        );
        assert!(
            (default[i] - exact[i]).abs() < 0.01,
            "theta {} dB: exact-10 {} vs exact-50 {}",
            theta_db[i],
            default[i],
            exact[i]
        );
    }
}

/// The conditioned relative error of the deterministic equivalents halves
/// (or better) per antenna doubling at fixed load ratio beta = 1/8.
#[test]
fn deterministic_equivalent_error_shrinks_with_n() {
    let mut errors = Vec::new();
    for (n, k) in [(32usize, 4usize), (64, 8), (128, 16), (256, 32)] {
        let config = ExperimentConfig {
            n_antennas: n,
            k_served: k,
            n_realizations: 3000,
            window_radius: 12_000.0,
            exact_interferers: 2,
            ..probe_config()
        };
        let geometries = run_conditioned(&config, 4).unwrap();
        let mut rel_acc = 0.0;
        let mut count = 0;
        for g in &geometries {
            for m in &g.per_scheme {
                rel_acc += (m.sim_mean - m.det_mean).abs() / m.det_mean;
                count += 1;
            }
        }
        errors.push(rel_acc / count as f64);
    }
    // Total shrink across two doublings of at least 4x, and no growth
    // anywhere (individual steps fluctuate with the Monte Carlo noise
    // floor).
    assert!(
        errors[3] < errors[0] / 4.0,
        "errors did not shrink: {errors:?}"
    );
    assert!(errors[2] < errors[0] && errors[3] < errors[1], "{errors:?}");
}

/// Explicit-pilot CSI sampling agrees with the mean-field error model at
/// the coverage level.
#[test]
fn explicit_pilot_tracks_mean_field() {
    let run = |csi: CsiMode, seed: u64| -> Vec<f64> {
        let config = ExperimentConfig {
            n_antennas: 64,
            k_served: 8,
            csi_mode: csi,
            schemes: vec![Scheme::CeuZf, Scheme::CeaZf],
            theta_db: vec![-5.0, 0.0, 5.0],
            n_realizations: 30_000,
            seed,
            ..probe_config()
        };
        run_experiment(&config)
            .unwrap()
            .per_scheme
            .iter()
            .flat_map(|sm| sm.coverage.iter().map(|c| c.value))
            .collect()
    };
    let mean_field = run(CsiMode::MeanField, 601);
    let explicit = run(CsiMode::ExplicitPilot, 602);
    for (m, e) in mean_field.iter().zip(&explicit) {
        assert!((m - e).abs() < 0.02, "mean-field {m} vs explicit pilot {e}");
    }
}
