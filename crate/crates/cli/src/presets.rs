//! Named experiment presets: each reproduces one of the validation or
//! results scenarios as CSV tables plus an SVG chart.
//!
//! A preset fixes the scenario parameters (density, exponent, antennas,
//! users, CSI model); run-control keys from the command line (seed,
//! realizations, thresholds, ...) are applied on top.

use std::path::{Path, PathBuf};

use cellnet_core::analysis::{
    coverage_asymptotic, coverage_cea, coverage_ceu, genggamma_cdf, genggamma_fit, sample_rk_sum, AsymptoticScheme,
    CsiAssumption, KprimeMode,
};
use cellnet_core::montecarlo::{
    kprime_histogram, run_conditioned_representative, run_experiment, CsiMode, ExperimentConfig, Scheme,
};
use rand::SeedableRng;

use crate::config::config_metadata;
use crate::output::{write_outputs, ResultTable};
use crate::svg::Chart;
use crate::CliError;

/// Preset registry: name and a one-line description.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig3_sir_vs_n", "conditioned SIR vs antenna count, simulation against the deterministic equivalents"),
    ("fig4_rk_cdf", "CDF of the intra-cell distance sum against the fitted generalized gamma law"),
    ("fig5_coverage", "coverage vs threshold: simulation against the coverage integrals"),
    ("fig6_kprime_modes", "cell-edge-aware coverage: empirical neighbor distribution vs its mean"),
    ("fig7_coverage_vs_n", "coverage vs antenna count at 0 and 15 dB"),
    ("fig8_rate95_vs_n", "95%-likely rate vs antenna count"),
    ("fig9_sumrate_vs_k", "per-cell sum rate vs scheduled users"),
    ("fig10_11_csi_sweep", "coverage and 95%-likely rate vs CSI error at fixed error ratio"),
    ("asymptotic_scaling", "outage vs antenna count against the closed-form decay laws"),
];

/// Overrides applied by the caller after the preset scenario.
pub struct RunControls {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub overrides: Vec<(String, String)>,
}

impl RunControls {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.realizations {
            config.n_realizations = n;
        }
        for (key, value) in &self.overrides {
            crate::config::apply_override(config, key, value, 0)?;
        }
        crate::config::validate(config)?;
        Ok(())
    }
}

/// Run a named preset, writing its CSV and SVG files into `out_dir`.
pub fn run_preset(name: &str, base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    match name {
        "fig3_sir_vs_n" => fig3_sir_vs_n(base, controls, out_dir),
        "fig4_rk_cdf" => fig4_rk_cdf(base, controls, out_dir),
        "fig5_coverage" => fig5_coverage(base, controls, out_dir),
        "fig6_kprime_modes" => fig6_kprime_modes(base, controls, out_dir),
        "fig7_coverage_vs_n" => fig7_coverage_vs_n(base, controls, out_dir),
        "fig8_rate95_vs_n" => fig8_rate95_vs_n(base, controls, out_dir),
        "fig9_sumrate_vs_k" => fig9_sumrate_vs_k(base, controls, out_dir),
        "fig10_11_csi_sweep" => fig10_11_csi_sweep(base, controls, out_dir),
        "asymptotic_scaling" => asymptotic_scaling(base, controls, out_dir),
        other => Err(CliError::usage(format!(
            "unknown preset `{other}`; available presets:\n{}",
            PRESETS
                .iter()
                .map(|(n, d)| format!("  {n:<22} {d}"))
                .collect::<Vec<_>>()
                .join("\n")
        ))),
    }
}

fn validation_scenario(base: &ExperimentConfig, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        alpha: 4.0,
        k_served: k,
        n_antennas: 100,
        csi_mode: CsiMode::MeanField,
        schemes: vec![Scheme::CeuZf, Scheme::CeaZf],
        ..base.clone()
    }
}

fn fig3_sir_vs_n(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let antenna_counts = [32usize, 64, 128, 256, 512];
    let cases = [
        ("perfect", CsiMode::Perfect),
        ("tau2_0.1_0.2", CsiMode::Fixed { tau_sq: 0.1, tau_bar_sq: 0.2 }),
    ];
    let mut config = validation_scenario(base, 10);
    config.n_realizations = 2000;
    config.exact_interferers = 2;
    controls.apply(&mut config)?;

    let mut table = ResultTable::new(
        &["n_antennas", "case", "sir_sim_ceu", "sir_det_ceu", "sir_sim_cea", "sir_det_cea"],
        config_metadata(&config),
    );
    let mut chart = Chart::new("Conditioned SIR vs number of antennas", "antennas N", "SIR (linear)");
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (label, csi) in cases {
        let mut sim_curves = vec![Vec::new(), Vec::new()];
        let mut det_curves = vec![Vec::new(), Vec::new()];
        for &n in &antenna_counts {
            let mut c = config.clone();
            c.n_antennas = n;
            c.csi_mode = csi;
            let geometry = run_conditioned_representative(&c).map_err(CliError::numerical)?;
            let mut row = vec![n as f64, 0.0, 0.0, 0.0, 0.0, 0.0];
            for m in &geometry.per_scheme {
                let idx = m.scheme.index();
                row[2 + 2 * idx] = m.sim_mean;
                row[3 + 2 * idx] = m.det_mean;
                sim_curves[idx].push((n as f64, m.sim_mean));
                det_curves[idx].push((n as f64, m.det_mean));
            }
            table.push_mixed_row(vec![
                format!("{n}"),
                label.to_string(),
                format!("{}", row[2]),
                format!("{}", row[3]),
                format!("{}", row[4]),
                format!("{}", row[5]),
            ]);
        }
        for scheme in [Scheme::CeuZf, Scheme::CeaZf] {
            curves.push((format!("sim {} ({label})", scheme.label()), sim_curves[scheme.index()].clone()));
            curves.push((format!("det {} ({label})", scheme.label()), det_curves[scheme.index()].clone()));
        }
    }
    for (name, pts) in curves {
        chart.add_series(&name, pts);
    }
    write_outputs(out_dir, "fig3_sir_vs_n", &table, Some(chart.to_svg())).map_err(CliError::io)
}

fn fig4_rk_cdf(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = validation_scenario(base, 10);
    config.n_realizations = 100_000;
    controls.apply(&mut config)?;
    let draws = config.n_realizations;

    let mut chart = Chart::new("CDF of the intra-cell distance sum", "x (m^alpha)", "CDF");
    let mut written = Vec::new();
    for k in [10usize, 30, 50] {
        let params = genggamma_fit(k, config.lambda, config.alpha).map_err(CliError::numerical)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed ^ (k as u64));
        let mut samples: Vec<f64> = (0..draws)
            .map(|_| sample_rk_sum(k, config.lambda, config.alpha, &mut rng))
            .collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut c = config.clone();
        c.k_served = k;
        let mut table = ResultTable::new(&["x", "cdf_empirical", "cdf_fitted"], config_metadata(&c));
        let mut emp_pts = Vec::new();
        let mut fit_pts = Vec::new();
        for i in 0..200 {
            let q = (i as f64 + 0.5) / 200.0;
            let x = samples[(q * draws as f64) as usize];
            let fitted = genggamma_cdf(x, &params);
            table.push_row(&[x, q, fitted]);
            emp_pts.push((x, q));
            fit_pts.push((x, fitted));
        }
        chart.add_series(&format!("empirical K={k}"), emp_pts);
        chart.add_series(&format!("fitted K={k}"), fit_pts);
        written.extend(write_outputs(out_dir, &format!("fig4_rk_cdf_k{k}"), &table, None).map_err(CliError::io)?);
    }
    std::fs::create_dir_all(out_dir).map_err(CliError::io)?;
    let svg_path = out_dir.join("fig4_rk_cdf.svg");
    std::fs::write(&svg_path, chart.to_svg()).map_err(CliError::io)?;
    written.push(svg_path);
    Ok(written)
}

fn fig5_coverage(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = validation_scenario(base, 10);
    config.theta_db = (-10..=20).map(f64::from).collect();
    config.n_realizations = 20_000;
    controls.apply(&mut config)?;

    let report = run_experiment(&config).map_err(CliError::numerical)?;
    let mut table = ResultTable::new(
        &["theta_db", "cov_sim_ceu", "cov_ana_ceu", "cov_sim_cea", "cov_ana_cea", "ci_halfwidth"],
        config_metadata(&config),
    );
    let mut chart = Chart::new("Coverage probability vs SIR threshold", "threshold (dB)", "coverage probability");
    let mut series: Vec<(&str, Vec<(f64, f64)>)> = vec![
        ("sim ceu_zf", vec![]),
        ("analysis ceu_zf", vec![]),
        ("sim cea_zf", vec![]),
        ("analysis cea_zf", vec![]),
    ];
    for (i, &db) in config.theta_db.iter().enumerate() {
        let theta = 10f64.powf(db / 10.0);
        let ana_ceu = coverage_ceu(
            theta,
            config.n_antennas,
            config.k_served,
            config.lambda,
            config.alpha,
            config.pilot_reuse,
            CsiAssumption::MeanField,
        )
        .map_err(CliError::numerical)?;
        let ana_cea = coverage_cea(
            theta,
            config.n_antennas,
            config.k_served,
            config.lambda,
            config.alpha,
            config.pilot_reuse,
            CsiAssumption::MeanField,
            &KprimeMode::Mean,
        )
        .map_err(CliError::numerical)?;
        let sim_ceu = report.per_scheme[0].coverage[i];
        let sim_cea = report.per_scheme[1].coverage[i];
        let ci = sim_ceu.ci_halfwidth.max(sim_cea.ci_halfwidth);
        table.push_row(&[db, sim_ceu.value, ana_ceu, sim_cea.value, ana_cea, ci]);
        series[0].1.push((db, sim_ceu.value));
        series[1].1.push((db, ana_ceu));
        series[2].1.push((db, sim_cea.value));
        series[3].1.push((db, ana_cea));
    }
    for (name, pts) in series {
        chart.add_series(name, pts);
    }
    write_outputs(out_dir, "fig5_coverage", &table, Some(chart.to_svg())).map_err(CliError::io)
}

fn fig6_kprime_modes(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = validation_scenario(base, 10);
    config.theta_db = (-10..=20).step_by(2).map(|v| v as f64).collect();
    config.n_realizations = 4000; // histogram sample size here
    controls.apply(&mut config)?;

    let mut chart = Chart::new(
        "Cell-edge-aware coverage: empirical vs mean neighbor count",
        "threshold (dB)",
        "coverage probability",
    );
    let mut written = Vec::new();
    for k in [5usize, 10, 15] {
        let mut c = config.clone();
        c.k_served = k;
        let hist = kprime_histogram(&c, c.n_realizations.max(1000)).map_err(CliError::numerical)?;
        let mut table = ResultTable::new(&["theta_db", "cov_thm2_empirical", "cov_cor1_mean"], config_metadata(&c));
        let mut emp_pts = Vec::new();
        let mut mean_pts = Vec::new();
        for &db in &c.theta_db {
            let theta = 10f64.powf(db / 10.0);
            let empirical = coverage_cea(
                theta,
                c.n_antennas,
                k,
                c.lambda,
                c.alpha,
                c.pilot_reuse,
                CsiAssumption::MeanField,
                &KprimeMode::Empirical(hist.clone()),
            )
            .map_err(CliError::numerical)?;
            let mean = coverage_cea(
                theta,
                c.n_antennas,
                k,
                c.lambda,
                c.alpha,
                c.pilot_reuse,
                CsiAssumption::MeanField,
                &KprimeMode::Mean,
            )
            .map_err(CliError::numerical)?;
            table.push_row(&[db, empirical, mean]);
            emp_pts.push((db, empirical));
            mean_pts.push((db, mean));
        }
        chart.add_series(&format!("empirical K'={k}"), emp_pts);
        chart.add_series(&format!("mean K'={k}"), mean_pts);
        written.extend(write_outputs(out_dir, &format!("fig6_kprime_modes_k{k}"), &table, None).map_err(CliError::io)?);
    }
    std::fs::create_dir_all(out_dir).map_err(CliError::io)?;
    let svg_path = out_dir.join("fig6_kprime_modes.svg");
    std::fs::write(&svg_path, chart.to_svg()).map_err(CliError::io)?;
    written.push(svg_path);
    Ok(written)
}

fn fig7_coverage_vs_n(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = base.clone();
    config.theta_db = vec![0.0, 15.0];
    config.n_realizations = 5000;
    controls.apply(&mut config)?;

    let antenna_counts = [50usize, 100, 150, 200, 300, 400];
    let mut table = ResultTable::new(
        &["n_antennas", "theta_db", "cov_sim_ceu", "cov_ana_ceu", "cov_sim_cea", "cov_ana_cea"],
        config_metadata(&config),
    );
    let mut chart = Chart::new("Coverage vs number of antennas", "antennas N", "coverage probability");
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for &db in &config.theta_db.clone() {
        let theta = 10f64.powf(db / 10.0);
        let mut pts = vec![Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for &n in &antenna_counts {
            if 2 * config.k_served >= n {
                continue; // outside the mean-neighbor regime
            }
            let mut c = config.clone();
            c.n_antennas = n;
            c.theta_db = vec![db];
            let report = run_experiment(&c).map_err(CliError::numerical)?;
            let ana_ceu = coverage_ceu(theta, n, c.k_served, c.lambda, c.alpha, c.pilot_reuse, CsiAssumption::MeanField)
                .map_err(CliError::numerical)?;
            let ana_cea = coverage_cea(
                theta,
                n,
                c.k_served,
                c.lambda,
                c.alpha,
                c.pilot_reuse,
                CsiAssumption::MeanField,
                &KprimeMode::Mean,
            )
            .map_err(CliError::numerical)?;
            let sim_ceu = report.per_scheme[0].coverage[0].value;
            let sim_cea = report.per_scheme[1].coverage[0].value;
            table.push_row(&[n as f64, db, sim_ceu, ana_ceu, sim_cea, ana_cea]);
            pts[0].push((n as f64, sim_ceu));
            pts[1].push((n as f64, ana_ceu));
            pts[2].push((n as f64, sim_cea));
            pts[3].push((n as f64, ana_cea));
        }
        series.push((format!("sim ceu {db} dB"), pts[0].clone()));
        series.push((format!("ana ceu {db} dB"), pts[1].clone()));
        series.push((format!("sim cea {db} dB"), pts[2].clone()));
        series.push((format!("ana cea {db} dB"), pts[3].clone()));
    }
    for (name, pts) in series {
        chart.add_series(&name, pts);
    }
    write_outputs(out_dir, "fig7_coverage_vs_n", &table, Some(chart.to_svg())).map_err(CliError::io)
}

fn fig8_rate95_vs_n(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = base.clone();
    config.n_realizations = 5000;
    controls.apply(&mut config)?;

    let antenna_counts = [50usize, 100, 150, 200, 300];
    let mut table = ResultTable::new(
        &["n_antennas", "k_served", "rate95_ceu", "rate95_ceu_ci", "rate95_cea", "rate95_cea_ci"],
        config_metadata(&config),
    );
    let mut chart = Chart::new("95%-likely rate vs number of antennas", "antennas N", "rate (bit/s/Hz)");
    for k in [10usize, 20] {
        let mut pts = vec![Vec::new(), Vec::new()];
        for &n in &antenna_counts {
            if k >= n {
                continue;
            }
            let mut c = config.clone();
            c.k_served = k;
            c.n_antennas = n;
            c.theta_db = vec![0.0];
            let report = run_experiment(&c).map_err(CliError::numerical)?;
            let ceu = &report.per_scheme[0];
            let cea = &report.per_scheme[1];
            table.push_row(&[n as f64, k as f64, ceu.rate_95, ceu.rate_95_ci, cea.rate_95, cea.rate_95_ci]);
            pts[0].push((n as f64, ceu.rate_95));
            pts[1].push((n as f64, cea.rate_95));
        }
        chart.add_series(&format!("ceu K={k}"), pts[0].clone());
        chart.add_series(&format!("cea K={k}"), pts[1].clone());
    }
    write_outputs(out_dir, "fig8_rate95_vs_n", &table, Some(chart.to_svg())).map_err(CliError::io)
}

fn fig9_sumrate_vs_k(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = base.clone();
    config.n_realizations = 2500;
    controls.apply(&mut config)?;

    let mut table = ResultTable::new(
        &["k_served", "n_antennas", "sumrate_ceu", "sumrate_ceu_ci", "sumrate_cea", "sumrate_cea_ci"],
        config_metadata(&config),
    );
    let mut chart = Chart::new("Per-cell sum rate vs scheduled users", "users per cell K", "sum rate (bit/s/Hz)");
    for n in [100usize, 150] {
        let mut pts = vec![Vec::new(), Vec::new()];
        for k in (2..=40).step_by(2) {
            let mut c = config.clone();
            c.k_served = k;
            c.n_antennas = n;
            c.theta_db = vec![0.0];
            let report = run_experiment(&c).map_err(CliError::numerical)?;
            let ceu = &report.per_scheme[0];
            let cea = &report.per_scheme[1];
            table.push_row(&[k as f64, n as f64, ceu.sum_rate, ceu.sum_rate_ci, cea.sum_rate, cea.sum_rate_ci]);
            pts[0].push((k as f64, ceu.sum_rate));
            pts[1].push((k as f64, cea.sum_rate));
        }
        chart.add_series(&format!("ceu N={n}"), pts[0].clone());
        chart.add_series(&format!("cea N={n}"), pts[1].clone());
    }
    write_outputs(out_dir, "fig9_sumrate_vs_k", &table, Some(chart.to_svg())).map_err(CliError::io)
}

fn fig10_11_csi_sweep(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = base.clone();
    config.n_antennas = 100;
    config.n_realizations = 5000;
    controls.apply(&mut config)?;

    let mut table = ResultTable::new(
        &["tau_sq", "tau_bar_sq", "k_served", "cov_ceu", "cov_cea", "rate95_ceu", "rate95_cea"],
        config_metadata(&config),
    );
    let mut chart = Chart::new(
        "Coverage vs CSI error (error ratio 1.8, threshold 0 dB)",
        "serving-link error variance",
        "coverage probability",
    );
    for k in [10usize, 20] {
        let mut cov_pts = vec![Vec::new(), Vec::new()];
        for step in 0..10 {
            let tau_sq = 0.1 * step as f64;
            let tau_bar_sq = (1.8 * tau_sq).min(1.0);
            let mut c = config.clone();
            c.k_served = k;
            c.theta_db = vec![0.0];
            c.csi_mode = CsiMode::Fixed { tau_sq, tau_bar_sq };
            let report = run_experiment(&c).map_err(CliError::numerical)?;
            let ceu = &report.per_scheme[0];
            let cea = &report.per_scheme[1];
            table.push_row(&[
                tau_sq,
                tau_bar_sq,
                k as f64,
                ceu.coverage[0].value,
                cea.coverage[0].value,
                ceu.rate_95,
                cea.rate_95,
            ]);
            cov_pts[0].push((tau_sq, ceu.coverage[0].value));
            cov_pts[1].push((tau_sq, cea.coverage[0].value));
        }
        chart.add_series(&format!("ceu K={k}"), cov_pts[0].clone());
        chart.add_series(&format!("cea K={k}"), cov_pts[1].clone());
    }
    write_outputs(out_dir, "fig10_11_csi_sweep", &table, Some(chart.to_svg())).map_err(CliError::io)
}

fn asymptotic_scaling(base: &ExperimentConfig, controls: &RunControls, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut config = validation_scenario(base, 10);
    config.csi_mode = CsiMode::Perfect;
    config.theta_db = vec![0.0];
    config.n_realizations = 20_000;
    config.exact_interferers = 2;
    controls.apply(&mut config)?;

    let antenna_counts = [200usize, 400, 800];
    let mut outages = vec![Vec::new(), Vec::new()];
    let mut table = ResultTable::new(
        &["n_antennas", "outage_sim_ceu", "outage_asym_ceu", "outage_sim_cea", "outage_asym_cea"],
        config_metadata(&config),
    );
    for &n in &antenna_counts {
        let mut c = config.clone();
        c.n_antennas = n;
        let report = run_experiment(&c).map_err(CliError::numerical)?;
        let sim_ceu = 1.0 - report.per_scheme[0].coverage[0].value;
        let sim_cea = 1.0 - report.per_scheme[1].coverage[0].value;
        let asym_ceu = 1.0 - coverage_asymptotic(1.0, c.k_served, n, AsymptoticScheme::Ceu);
        let asym_cea = 1.0 - coverage_asymptotic(1.0, c.k_served, n, AsymptoticScheme::Cea);
        table.push_row(&[n as f64, sim_ceu, asym_ceu, sim_cea, asym_cea]);
        outages[0].push((n as f64, sim_ceu));
        outages[1].push((n as f64, sim_cea));
    }
    let slope = |pts: &[(f64, f64)]| -> f64 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.max(1e-12).ln()).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    };
    let mut table = {
        let mut meta = table.metadata.clone();
        meta.push(("outage_slope_ceu".into(), format!("{:.4}", slope(&outages[0]))));
        meta.push(("outage_slope_cea".into(), format!("{:.4}", slope(&outages[1]))));
        ResultTable {
            columns: table.columns.clone(),
            rows: table.rows.clone(),
            metadata: meta,
        }
    };
    table.metadata.dedup();

    let mut chart = Chart::new("Outage vs number of antennas (log-log)", "antennas N", "outage probability");
    chart.log_y = true;
    chart.add_series("sim ceu", outages[0].clone());
    chart.add_series("sim cea", outages[1].clone());
    write_outputs(out_dir, "asymptotic_scaling", &table, Some(chart.to_svg())).map_err(CliError::io)
}
