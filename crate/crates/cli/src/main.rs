//! `cellnet` — downlink massive-MIMO network simulation and analysis.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellnet_cli::config::{apply_override, config_metadata, parse_config, validate, KEY_REFERENCE};
use cellnet_cli::output::{write_outputs, ResultTable};
use cellnet_cli::presets::{run_preset, RunControls, PRESETS};
use cellnet_cli::svg::Chart;
use cellnet_cli::CliError;
use cellnet_core::analysis::{coverage_cea, coverage_ceu, genggamma_fit, CsiAssumption, KprimeMode};
use cellnet_core::montecarlo::{run_experiment, CsiMode, ExperimentConfig, Scheme};
use cellnet_core::validation::run_quick_suite;

#[derive(Parser)]
#[command(
    name = "cellnet",
    about = "Simulate and analyze downlink massive-MIMO cellular networks with cell-edge-aware precoding",
    after_help = preset_help(),
    version
)]
struct Cli {
    /// Worker thread cap (also via the CELLNET_WORKERS environment variable).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn preset_help() -> String {
    let mut s = String::from("PRESETS:\n");
    for (name, desc) in PRESETS {
        s.push_str(&format!("  {name:<22} {desc}\n"));
    }
    s.push_str("\nCONFIG KEYS (key = value per line; # comments; [sections] allowed):\n");
    for (key, desc) in KEY_REFERENCE {
        s.push_str(&format!("  {key:<28} {desc}\n"));
    }
    s
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (flat key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline overrides, e.g. --set k=10 --set alpha=4.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo realizations.
    #[arg(long)]
    realizations: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?,
            None => String::new(),
        };
        let mut config = parse_config(&text)?;
        self.finish(&mut config)?;
        Ok(config)
    }

    fn controls(&self) -> Result<RunControls, CliError> {
        Ok(RunControls {
            seed: self.seed,
            realizations: self.realizations,
            overrides: self.parsed_sets()?,
        })
    }

    fn parsed_sets(&self) -> Result<Vec<(String, String)>, CliError> {
        self.sets
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{s}`")))
            })
            .collect()
    }

    fn finish(&self, config: &mut ExperimentConfig) -> Result<(), CliError> {
        for (key, value) in self.parsed_sets()? {
            apply_override(config, &key, &value, 0)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.realizations {
            config.n_realizations = n;
        }
        validate(config)?;
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment preset and write CSV/SVG outputs.
    Run {
        /// Preset name (see the list under --help).
        preset: String,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Simulate (and analyze) a coverage curve for the configured scenario.
    Coverage {
        /// Thresholds in dB: start:step:stop or a comma list.
        #[arg(long = "theta-db", allow_hyphen_values = true)]
        theta_db: Option<String>,
        /// ceu_zf, cea_zf, or both.
        #[arg(long, default_value = "both")]
        scheme: String,
        /// Skip the simulation and emit the coverage integrals only.
        #[arg(long)]
        analysis_only: bool,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit the generalized gamma approximation of the intra-cell distance sum.
    FitGenggamma {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-6)]
        lambda: f64,
    },
    /// Run the fast invariant suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error too.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    let workers = cli
        .workers
        .or_else(|| std::env::var("CELLNET_WORKERS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cellnet: cannot configure {n} workers: {e}");
            return ExitCode::from(1);
        }
    }

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cellnet: {e}");
            ExitCode::from(e.exit_code.clamp(0, 255) as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { preset, out, config } => {
            let base = config.load()?;
            let controls = config.controls()?;
            let files = run_preset(&preset, &base, &controls, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Coverage {
            theta_db,
            scheme,
            analysis_only,
            out,
            config,
        } => {
            let mut cfg = config.load()?;
            if let Some(spec) = theta_db {
                apply_override(&mut cfg, "theta_db", &spec, 0)?;
            }
            match scheme.to_ascii_lowercase().as_str() {
                "both" => {}
                "ceu_zf" | "ceu" => cfg.schemes = vec![Scheme::CeuZf],
                "cea_zf" | "cea" => cfg.schemes = vec![Scheme::CeaZf],
                other => return Err(CliError::usage(format!("unknown scheme `{other}`"))),
            }
            validate(&cfg)?;
            coverage_command(&cfg, analysis_only, &out)
        }
        Command::FitGenggamma { k, alpha, lambda } => {
            let params = genggamma_fit(k, lambda, alpha).map_err(CliError::numerical)?;
            println!("mu = {}", params.mu);
            println!("eta = {}", params.eta);
            println!("omega = {}", params.omega);
            Ok(())
        }
        Command::Validate => {
            let results = run_quick_suite();
            let mut all_ok = true;
            for r in &results {
                println!("{} {} — {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                all_ok &= r.passed;
            }
            if all_ok {
                println!("all {} checks passed", results.len());
                Ok(())
            } else {
                Err(CliError::numerical("invariant suite failed"))
            }
        }
    }
}

fn coverage_command(cfg: &ExperimentConfig, analysis_only: bool, out: &std::path::Path) -> Result<(), CliError> {
    let csi = match cfg.csi_mode {
        CsiMode::Perfect => CsiAssumption::Perfect,
        CsiMode::MeanField | CsiMode::ExplicitPilot => CsiAssumption::MeanField,
        CsiMode::Fixed { tau_sq, tau_bar_sq } => CsiAssumption::Fixed { tau_sq, tau_bar_sq },
    };
    let report = if analysis_only {
        None
    } else {
        Some(run_experiment(cfg).map_err(CliError::numerical)?)
    };

    let mut columns = vec!["theta_db".to_string()];
    for scheme in &cfg.schemes {
        if report.is_some() {
            columns.push(format!("cov_sim_{}", scheme.label()));
            columns.push(format!("ci_{}", scheme.label()));
        }
        columns.push(format!("cov_ana_{}", scheme.label()));
    }
    let column_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut table = ResultTable::new(&column_refs, config_metadata(cfg));
    let mut chart = Chart::new("Coverage probability", "threshold (dB)", "coverage probability");
    let mut series: Vec<(String, Vec<(f64, f64)>)> =
        Vec::with_capacity(cfg.schemes.len() * if report.is_some() { 2 } else { 1 });

    for (i, &db) in cfg.theta_db.iter().enumerate() {
        let theta = 10f64.powf(db / 10.0);
        let mut row = vec![db];
        for (s_idx, &scheme) in cfg.schemes.iter().enumerate() {
            if let Some(rep) = &report {
                let sm = rep.per_scheme.iter().find(|m| m.scheme == scheme).unwrap();
                row.push(sm.coverage[i].value);
                row.push(sm.coverage[i].ci_halfwidth);
                if i == 0 {
                    series.push((format!("sim {}", scheme.label()), Vec::new()));
                }
                let slot = series
                    .iter_mut()
                    .find(|(name, _)| name == &format!("sim {}", scheme.label()))
                    .unwrap();
                slot.1.push((db, sm.coverage[i].value));
            }
            let ana = match scheme {
                Scheme::CeuZf => {
                    coverage_ceu(theta, cfg.n_antennas, cfg.k_served, cfg.lambda, cfg.alpha, cfg.pilot_reuse, csi)
                        .map_err(CliError::numerical)?
                }
                Scheme::CeaZf => coverage_cea(
                    theta,
                    cfg.n_antennas,
                    cfg.k_served,
                    cfg.lambda,
                    cfg.alpha,
                    cfg.pilot_reuse,
                    csi,
                    &KprimeMode::Mean,
                )
                .map_err(CliError::numerical)?,
            };
            row.push(ana);
            let name = format!("analysis {}", scheme.label());
            if !series.iter().any(|(n, _)| n == &name) {
                series.push((name.clone(), Vec::new()));
            }
            series.iter_mut().find(|(n, _)| n == &name).unwrap().1.push((db, ana));
            let _ = s_idx;
        }
        table.push_row(&row);
    }
    for (name, pts) in series {
        chart.add_series(&name, pts);
    }
    let files = write_outputs(out, "coverage", &table, Some(chart.to_svg())).map_err(CliError::io)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
