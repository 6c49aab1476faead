//! Fast invariant suite: the structural identities every build must satisfy,
//! runnable in well under a minute. Shared by the `validate` CLI verb and
//! the acceptance tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    coverage_cea, coverage_ceu, nearest_pdf, quad::adaptive_simpson, second_conditional_pdf, CsiAssumption,
    KprimeMode,
};
use crate::channel::FadingVector;
use crate::large_system::{lambda_fixed_point, zf_fixed_point};
use crate::montecarlo::{run_experiment, ExperimentConfig};
use crate::precoding::{cea_zf, ceu_zf, regularized_cea_zf, ExtendedChannelMatrix};

/// Outcome of one invariant check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn random_rows(m: usize, n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::zeros(m, n);
    for i in 0..m {
        let v = FadingVector::sample(n, &mut rng);
        for j in 0..n {
            h[(i, j)] = v.0[j].conj();
        }
    }
    h
}

/// Run every quick invariant and return the per-check outcomes.
pub fn run_quick_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let lambda = 1e-6;

    // Zero-forcing exactness and neighbor nulling.
    {
        let (k, kp, n) = (10, 8, 64);
        let h = random_rows(k + kp, n, 11);
        let ext = ExtendedChannelMatrix::new(h.clone(), k, kp).unwrap();
        let p = cea_zf(&ext).unwrap();
        let prod = &h * &p.columns;
        let mut worst: f64 = 0.0;
        for i in 0..k + kp {
            for j in 0..k {
                if i != j {
                    worst = worst.max(prod[(i, j)].norm());
                }
            }
        }
        out.push(check(
            "zero-forcing exactness",
            worst <= 1e-9,
            format!("max off-diagonal crosstalk {worst:.2e} (limit 1e-9)"),
        ));
    }

    // Unit transmit power for every scheme.
    {
        let h = random_rows(12, 48, 12);
        let ext = ExtendedChannelMatrix::new(h.clone(), 6, 6).unwrap();
        let own = h.rows(0, 6).into_owned();
        let worst = [
            ceu_zf(&own).unwrap().columns.norm_squared(),
            cea_zf(&ext).unwrap().columns.norm_squared(),
            regularized_cea_zf(&ext, 0.3).unwrap().columns.norm_squared(),
        ]
        .iter()
        .map(|p| (p - 1.0).abs())
        .fold(0.0f64, f64::max);
        out.push(check(
            "precoder power normalization",
            worst <= 1e-10,
            format!("max |power - 1| = {worst:.2e} (limit 1e-10)"),
        ));
    }

    // CEA-ZF with no neighbors is CEU-ZF.
    {
        let h = random_rows(9, 40, 13);
        let ext = ExtendedChannelMatrix::new(h.clone(), 9, 0).unwrap();
        let a = cea_zf(&ext).unwrap();
        let u = ceu_zf(&h).unwrap();
        let rel = (&a.columns - &u.columns).norm() / u.columns.norm();
        out.push(check(
            "cea reduces to ceu without neighbors",
            rel <= 1e-12,
            format!("relative difference {rel:.2e} (limit 1e-12)"),
        ));
    }

    // Distance densities integrate to one.
    {
        let lp = lambda * std::f64::consts::PI;
        let r_max = 6.0 / lp.sqrt();
        let total_c = adaptive_simpson(&mut |r| nearest_pdf(r, lambda), 0.0, r_max, 1e-11).unwrap();
        let t = 700.0;
        let s_max = (t * t + 28.0 / lp).sqrt();
        let total_s = adaptive_simpson(
            &mut |s| second_conditional_pdf(s, t, lambda).unwrap(),
            t,
            s_max,
            1e-11,
        )
        .unwrap();
        let worst = (total_c - 1.0).abs().max((total_s - 1.0).abs());
        out.push(check(
            "distance densities normalize",
            worst <= 1e-9,
            format!("max |integral - 1| = {worst:.2e} (limit 1e-9)"),
        ));
    }

    // Fixed-point residuals.
    {
        let mut worst: f64 = 0.0;
        for beta in [0.0, 0.1, 0.5, 0.9, 0.99] {
            let (phi, psi) = zf_fixed_point(beta).unwrap();
            worst = worst.max((phi - 1.0 / (1.0 + beta / phi)).abs());
            worst = worst.max((psi - 1.0 / (1.0 + beta / phi).powi(2)).abs());
        }
        let served: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
        let neighbors = [0.4, 0.9, 2.1];
        let n = 32;
        let rho = 0.02;
        let lam = lambda_fixed_point(rho, &served, &neighbors, n).unwrap();
        let mut acc = rho;
        for &g in served.iter().chain(&neighbors) {
            acc += g / (1.0 + lam * g) / n as f64;
        }
        worst = worst.max((lam - 1.0 / acc).abs());
        out.push(check(
            "fixed-point residuals",
            worst <= 1e-10,
            format!("max residual {worst:.2e} (limit 1e-10)"),
        ));
    }

    // Coverage curves decrease in the threshold.
    {
        let mut ok = true;
        let mut detail = String::from("both schemes non-increasing over the grid");
        let mut last_u = f64::INFINITY;
        let mut last_a = f64::INFINITY;
        for db in [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0] {
            let theta = 10f64.powf(db / 10.0);
            let u = coverage_ceu(theta, 100, 10, lambda, 4.0, 7, CsiAssumption::MeanField).unwrap();
            let a = coverage_cea(theta, 100, 10, lambda, 4.0, 7, CsiAssumption::MeanField, &KprimeMode::Mean).unwrap();
            if u > last_u + 1e-9 || a > last_a + 1e-9 {
                ok = false;
                detail = format!("violation at {db} dB");
            }
            last_u = u;
            last_a = a;
        }
        out.push(check("coverage monotone in threshold", ok, detail));
    }

    // Seed reproducibility across worker counts.
    {
        let config = ExperimentConfig {
            alpha: 4.0,
            n_antennas: 24,
            k_served: 3,
            theta_db: vec![0.0, 10.0],
            n_realizations: 40,
            window_radius: 11_000.0,
            exact_interferers: 3,
            kprime_hist_realizations: 120,
            seed: 5,
            ..ExperimentConfig::default()
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_experiment(&config)).unwrap();
        let b = pool4.install(|| run_experiment(&config)).unwrap();
        out.push(check(
            "deterministic across worker counts",
            a == b,
            if a == b {
                "identical reports with 1 and 4 workers".into()
            } else {
                "reports differ between 1 and 4 workers".into()
            },
        ));
    }

    out
}
