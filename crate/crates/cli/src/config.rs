//! Flat key=value experiment configuration.
//!
//! Lines hold `key = value` pairs; `#` starts a comment and `[section]`
//! headers are allowed as visual grouping (keys are global). Unknown keys
//! and malformed values are rejected with the key name and line number.

use cellnet_core::montecarlo::{CiMethod, CsiMode, ExperimentConfig, Scheme};

/// A configuration problem with enough context to fix the input.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: key `{}`: {}", self.line, self.key, self.message)
        } else {
            write!(f, "key `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

/// Every accepted key with a short description, for `--help` and docs.
pub const KEY_REFERENCE: &[(&str, &str)] = &[
    ("lambda", "base-station density per m² (default 1e-6)"),
    ("alpha", "path-loss exponent (default 3.8)"),
    ("pilot_reuse | f", "pilot reuse factor F (default 7)"),
    ("n_antennas | n", "antennas per station N (default 100)"),
    ("k_served | k", "scheduled users per cell K (default 20)"),
    ("schemes", "comma list of ceu_zf, cea_zf (default both)"),
    (
        "csi_mode",
        "perfect | mean_field | explicit_pilot | fixed (default mean_field)",
    ),
    ("tau_sq", "serving-link error variance for csi_mode = fixed"),
    ("tau_bar_sq", "second-link error variance for csi_mode = fixed"),
    ("theta_db", "thresholds: start:step:stop or comma list (default -10:1:20)"),
    ("n_realizations", "Monte Carlo realizations (default 1000)"),
    ("seed", "master RNG seed (default 1)"),
    ("window_radius", "simulated disk radius in m (default 30000)"),
    ("exact_interferers", "nearest stations with exact precoders (default 10)"),
    ("ue_density_factor", "candidate users per cell as multiple of K... of lambda (default 50)"),
    ("kprime_hist_realizations", "realizations behind neighbor statistics (default 2000)"),
    ("ci_method", "normal | wilson (default normal)"),
];

/// Parse a configuration file (empty text gives the defaults).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut config = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line_no, line, "expected `key = value`"));
        };
        apply_override(&mut config, key.trim(), value.trim(), line_no)?;
    }
    validate(&config)?;
    Ok(config)
}

/// Apply one `key=value` override (line 0 means a command-line `--set`).
pub fn apply_override(
    config: &mut ExperimentConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(line: usize, key: &str, value: &str, ty: &str) -> Result<T, ConfigError> {
        value
            .parse()
            .map_err(|_| err(line, key, format!("`{value}` is not a valid {ty}")))
    }
    match key.to_ascii_lowercase().as_str() {
        "lambda" => config.lambda = parse(line, key, value, "number")?,
        "alpha" => config.alpha = parse(line, key, value, "number")?,
        "pilot_reuse" | "f" => config.pilot_reuse = parse(line, key, value, "positive integer")?,
        "n_antennas" | "n" => config.n_antennas = parse(line, key, value, "positive integer")?,
        "k_served" | "k" => config.k_served = parse(line, key, value, "positive integer")?,
        "schemes" => {
            let mut schemes = Vec::new();
            for part in value.split(',') {
                match part.trim().to_ascii_lowercase().as_str() {
                    "ceu_zf" | "ceu" => schemes.push(Scheme::CeuZf),
                    "cea_zf" | "cea" => schemes.push(Scheme::CeaZf),
                    other => return Err(err(line, key, format!("unknown scheme `{other}`"))),
                }
            }
            config.schemes = schemes;
        }
        "csi_mode" => {
            config.csi_mode = match value.to_ascii_lowercase().as_str() {
                "perfect" => CsiMode::Perfect,
                "mean_field" => CsiMode::MeanField,
                "explicit_pilot" => CsiMode::ExplicitPilot,
                "fixed" => CsiMode::Fixed {
                    tau_sq: 0.0,
                    tau_bar_sq: 0.0,
                },
                other => return Err(err(line, key, format!("unknown CSI mode `{other}`"))),
            }
        }
        "tau_sq" => {
            let tau: f64 = parse(line, key, value, "number")?;
            config.csi_mode = match config.csi_mode {
                CsiMode::Fixed { tau_bar_sq, .. } => CsiMode::Fixed { tau_sq: tau, tau_bar_sq },
                _ => CsiMode::Fixed {
                    tau_sq: tau,
                    tau_bar_sq: tau,
                },
            };
        }
        "tau_bar_sq" => {
            let tau_bar: f64 = parse(line, key, value, "number")?;
            config.csi_mode = match config.csi_mode {
                CsiMode::Fixed { tau_sq, .. } => CsiMode::Fixed {
                    tau_sq,
                    tau_bar_sq: tau_bar,
                },
                _ => CsiMode::Fixed {
                    tau_sq: tau_bar,
                    tau_bar_sq: tau_bar,
                },
            };
        }
        "theta_db" => config.theta_db = parse_theta(line, value)?,
        "n_realizations" => config.n_realizations = parse(line, key, value, "positive integer")?,
        "seed" => config.seed = parse(line, key, value, "integer")?,
        "window_radius" => config.window_radius = parse(line, key, value, "number")?,
        "exact_interferers" => config.exact_interferers = parse(line, key, value, "positive integer")?,
        "ue_density_factor" => config.ue_density_factor = parse(line, key, value, "number")?,
        "kprime_hist_realizations" => config.kprime_hist_realizations = parse(line, key, value, "positive integer")?,
        "ci_method" => {
            config.ci_method = match value.to_ascii_lowercase().as_str() {
                "normal" => CiMethod::Normal,
                "wilson" => CiMethod::Wilson,
                other => return Err(err(line, key, format!("unknown CI method `{other}`"))),
            }
        }
        other => return Err(err(line, other, "unknown key")),
    }
    Ok(())
}

/// Thresholds in dB: either `start:step:stop` or a comma list.
fn parse_theta(line: usize, value: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |msg: &str| err(line, "theta_db", msg);
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:step:stop"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad start"))?;
        let step: f64 = parts[1].trim().parse().map_err(|_| bad("bad step"))?;
        let stop: f64 = parts[2].trim().parse().map_err(|_| bad("bad stop"))?;
        if !(step > 0.0) || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let mut out = Vec::new();
        let mut x = start;
        while x <= stop + 1e-9 {
            out.push(x);
            x += step;
        }
        Ok(out)
    } else {
        let mut out = Vec::new();
        for part in value.split(',') {
            out.push(part.trim().parse().map_err(|_| bad("bad threshold value"))?);
        }
        if out.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("thresholds must be ascending"));
        }
        Ok(out)
    }
}

/// Surface core-level constraint violations with the config vocabulary.
pub fn validate(config: &ExperimentConfig) -> Result<(), ConfigError> {
    config.validate().map_err(|e| err(0, "config", e.to_string()))
}

/// The full configuration as `key = value` metadata pairs, echoed into every
/// output file.
pub fn config_metadata(config: &ExperimentConfig) -> Vec<(String, String)> {
    let schemes = config
        .schemes
        .iter()
        .map(|s| s.label())
        .collect::<Vec<_>>()
        .join(",");
    let csi = match config.csi_mode {
        CsiMode::Perfect => "perfect".to_string(),
        CsiMode::MeanField => "mean_field".to_string(),
        CsiMode::ExplicitPilot => "explicit_pilot".to_string(),
        CsiMode::Fixed { tau_sq, tau_bar_sq } => format!("fixed tau_sq={tau_sq} tau_bar_sq={tau_bar_sq}"),
    };
    let theta = config
        .theta_db
        .iter()
        .map(|t| format!("{t}"))
        .collect::<Vec<_>>()
        .join(",");
    vec![
        ("lambda".into(), format!("{}", config.lambda)),
        ("alpha".into(), format!("{}", config.alpha)),
        ("pilot_reuse".into(), format!("{}", config.pilot_reuse)),
        ("n_antennas".into(), format!("{}", config.n_antennas)),
        ("k_served".into(), format!("{}", config.k_served)),
        ("schemes".into(), schemes),
        ("csi_mode".into(), csi),
        ("theta_db".into(), theta),
        ("n_realizations".into(), format!("{}", config.n_realizations)),
        ("seed".into(), format!("{}", config.seed)),
        ("window_radius".into(), format!("{}", config.window_radius)),
        ("exact_interferers".into(), format!("{}", config.exact_interferers)),
        ("ue_density_factor".into(), format!("{}", config.ue_density_factor)),
        (
            "kprime_hist_realizations".into(),
            format!("{}", config.kprime_hist_realizations),
        ),
        (
            "ci_method".into(),
            match config.ci_method {
                CiMethod::Normal => "normal".into(),
                CiMethod::Wilson => "wilson".into(),
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.k_served, 20);
        assert_eq!(c.alpha, 3.8);
        assert_eq!(c.pilot_reuse, 7);
        assert_eq!(c.lambda, 1e-6);
    }

    #[test]
    fn type_error_names_the_key_and_line() {
        let e = parse_config("n = abc").unwrap_err();
        assert_eq!(e.key, "n");
        assert_eq!(e.line, 1);
        let e = parse_config("lambda = 1e-6\nk = \"10\"").unwrap_err();
        assert_eq!(e.key, "k");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = parse_config("# comment\nbogus = 1").unwrap_err();
        assert_eq!(e.key, "bogus");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn sections_and_comments_are_ignored() {
        let text = "[network]\nlambda = 2e-6\n# a comment\nalpha = 4.0 # trailing\n[run]\nseed = 9\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.lambda, 2e-6);
        assert_eq!(c.alpha, 4.0);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn overrides_round_trip_into_metadata() {
        let mut c = parse_config("").unwrap();
        apply_override(&mut c, "alpha", "4", 0).unwrap();
        apply_override(&mut c, "k", "10", 0).unwrap();
        let meta = config_metadata(&c);
        assert!(meta.contains(&("alpha".to_string(), "4".to_string())));
        assert!(meta.contains(&("k_served".to_string(), "10".to_string())));
    }

    #[test]
    fn theta_range_and_list_forms() {
        let c = parse_config("theta_db = -10:5:20").unwrap();
        assert_eq!(c.theta_db, vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]);
        let c = parse_config("theta_db = -3, 0, 7.5").unwrap();
        assert_eq!(c.theta_db, vec![-3.0, 0.0, 7.5]);
        assert!(parse_config("theta_db = 5,3").is_err());
    }

    #[test]
    fn fixed_tau_assembles_from_parts() {
        let c = parse_config("csi_mode = fixed\ntau_sq = 0.1\ntau_bar_sq = 0.2").unwrap();
        assert_eq!(
            c.csi_mode,
            CsiMode::Fixed {
                tau_sq: 0.1,
                tau_bar_sq: 0.2
            }
        );
    }

    #[test]
    fn constraint_violations_are_config_errors() {
        assert!(parse_config("k = 50\nn = 20").is_err());
    }
}
