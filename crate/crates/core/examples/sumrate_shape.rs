use cellnet_core::montecarlo::{run_experiment, CsiMode, ExperimentConfig, Scheme};

fn main() {
    for &(n_real, seed) in &[(4000usize, 2024u64), (4000, 9)] {
        println!("n_real = {n_real}, seed = {seed}");
        for k in (2..=40).step_by(2) {
            let config = ExperimentConfig {
                lambda: 1e-6,
                alpha: 3.8,
                n_antennas: 100,
                k_served: k,
                csi_mode: CsiMode::MeanField,
                theta_db: vec![0.0],
                n_realizations: n_real,
                exact_interferers: 3,
                kprime_hist_realizations: 800,
                seed,
                ..ExperimentConfig::default()
            };
            let rep = run_experiment(&config).unwrap();
            let ceu = rep.per_scheme.iter().find(|m| m.scheme == Scheme::CeuZf).unwrap();
            let cea = rep.per_scheme.iter().find(|m| m.scheme == Scheme::CeaZf).unwrap();
            println!(
                "K={k:2}: ceu {:7.3} ± {:.3}   cea {:7.3} ± {:.3}",
                ceu.sum_rate, ceu.sum_rate_ci, cea.sum_rate, cea.sum_rate_ci
            );
        }
    }
}
