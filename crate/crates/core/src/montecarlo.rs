//! End-to-end Monte Carlo experiments: realization loop, scheme comparison,
//! coverage/rate aggregation, and neighbor-count statistics.
//!
//! Reproducibility contract: every realization draws from its own
//! counter-derived RNG stream, results are collected in realization order,
//! and aggregation is sequential, so a report depends only on the
//! configuration (including its seed) and never on the worker count.

mod engine;

use rayon::prelude::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::KprimeHistogram;
use crate::error::Error;
use crate::large_system::{cea_sir_det, ceu_sir_det, DetEquivInput};
use crate::precoding::PrecoderScheme;
use crate::Result;

// Stream id bases for the per-purpose RNGs derived from the master seed.
const STREAM_REALIZATION: u64 = 0;
const STREAM_RETRY: u64 = 1 << 63;
const STREAM_HISTOGRAM: u64 = 1 << 62;
const STREAM_BOOTSTRAP: u64 = 3 << 61;
const STREAM_GEOMETRY: u64 = 1 << 61;
const STREAM_FADING: u64 = 5 << 60;

/// Precoding scheme under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    CeuZf,
    CeaZf,
}

impl Scheme {
    /// Stable array slot of the scheme (CEU = 0, CEA = 1).
    pub fn index(self) -> usize {
        match self {
            Scheme::CeuZf => 0,
            Scheme::CeaZf => 1,
        }
    }

    pub(crate) fn precoder_scheme(self) -> PrecoderScheme {
        match self {
            Scheme::CeuZf => PrecoderScheme::CeuZf,
            Scheme::CeaZf => PrecoderScheme::CeaZf,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::CeuZf => "ceu_zf",
            Scheme::CeaZf => "cea_zf",
        }
    }
}

/// How the typical user's CSI error is produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CsiMode {
    Perfect,
    /// Distance-dependent error with the pilot interference at its mean.
    MeanField,
    /// Distance-dependent error with an explicitly sampled co-pilot process.
    ExplicitPilot,
    /// Fixed error variances for the serving and second-station links.
    Fixed { tau_sq: f64, tau_bar_sq: f64 },
}

/// Confidence-interval style for coverage estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CiMethod {
    Normal,
    Wilson,
}

/// Full description of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Base-station density (per m²).
    pub lambda: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Pilot reuse factor F.
    pub pilot_reuse: u32,
    /// Antennas per station N.
    pub n_antennas: usize,
    /// Scheduled users per cell K.
    pub k_served: usize,
    pub schemes: Vec<Scheme>,
    pub csi_mode: CsiMode,
    /// SIR thresholds of the coverage curve, in dB, ascending.
    pub theta_db: Vec<f64>,
    pub n_realizations: usize,
    pub seed: u64,
    /// Radius of the simulated disk (m).
    pub window_radius: f64,
    /// Number of nearest interferers with fully realized precoders; the
    /// rest use Gamma(K, 1/K) effective fading.
    pub exact_interferers: usize,
    /// Candidate-user density as a multiple of the station density, used by
    /// the neighbor-count statistics.
    pub ue_density_factor: f64,
    /// Realizations behind the neighbor-count histogram.
    pub kprime_hist_realizations: usize,
    pub ci_method: CiMethod,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lambda: 1e-6,
            alpha: 3.8,
            pilot_reuse: 7,
            n_antennas: 100,
            k_served: 20,
            schemes: vec![Scheme::CeuZf, Scheme::CeaZf],
            csi_mode: CsiMode::MeanField,
            theta_db: (-10..=20).map(f64::from).collect(),
            n_realizations: 1000,
            seed: 1,
            window_radius: 30_000.0,
            exact_interferers: 10,
            ue_density_factor: 50.0,
            kprime_hist_realizations: 2000,
            ci_method: CiMethod::Normal,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::parameter("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.alpha > 2.0) {
            return Err(Error::parameter("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        if self.pilot_reuse < 1 {
            return Err(Error::parameter("pilot_reuse", "must be at least 1"));
        }
        if self.k_served < 1 || self.n_antennas < self.k_served {
            return Err(Error::parameter(
                "k_served",
                format!("need N >= K >= 1, got N = {}, K = {}", self.n_antennas, self.k_served),
            ));
        }
        if self.schemes.is_empty() {
            return Err(Error::parameter("schemes", "at least one scheme required"));
        }
        let mut seen = [false; 2];
        for s in &self.schemes {
            if seen[s.index()] {
                return Err(Error::parameter("schemes", format!("duplicate scheme {s:?}")));
            }
            seen[s.index()] = true;
        }
        if self.theta_db.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::parameter("theta_db", "thresholds must be ascending"));
        }
        if self.n_realizations < 1 {
            return Err(Error::parameter("n_realizations", "must be at least 1"));
        }
        if self.exact_interferers < 1 {
            return Err(Error::parameter(
                "exact_interferers",
                "the second-nearest station must always be treated exactly",
            ));
        }
        let min_window = 16.0 / (self.lambda * std::f64::consts::PI).sqrt();
        if self.window_radius < min_window {
            return Err(Error::parameter(
                "window_radius",
                format!("must be at least {min_window:.0} m for this density"),
            ));
        }
        if !(self.ue_density_factor >= 1.0) {
            return Err(Error::parameter("ue_density_factor", "must be at least 1"));
        }
        if self.kprime_hist_realizations < 100 {
            return Err(Error::parameter("kprime_hist_realizations", "must be at least 100"));
        }
        if let CsiMode::Fixed { tau_sq, tau_bar_sq } = self.csi_mode {
            if !(0.0..=1.0).contains(&tau_sq) || !(0.0..=1.0).contains(&tau_bar_sq) {
                return Err(Error::parameter("csi_mode", "fixed error variances must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// One point of a simulated coverage curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageEstimate {
    pub theta_db: f64,
    /// Linear threshold.
    pub theta: f64,
    pub value: f64,
    pub ci_halfwidth: f64,
}

/// Aggregated results of one scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeMetrics {
    pub scheme: Scheme,
    pub coverage: Vec<CoverageEstimate>,
    /// Per-cell sum rate K E[log2(1 + γ)] (bit/s/Hz).
    pub sum_rate: f64,
    pub sum_rate_ci: f64,
    /// 95%-likely per-user rate: the 5th percentile of log2(1 + γ).
    pub rate_95: f64,
    pub rate_95_ci: f64,
    /// Realizations with no interference at all (flagged infinite SIR).
    pub n_infinite: usize,
}

/// Everything measured by one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub per_scheme: Vec<SchemeMetrics>,
    /// Mean neighbor count of a typical station and its CI half-width.
    pub mean_kprime: f64,
    pub mean_kprime_ci: f64,
    /// Failed realizations replaced from the reserved stream.
    pub n_failed_replaced: usize,
    /// Realizations where a station's neighbor list was truncated to fit the
    /// spatial degrees of freedom.
    pub n_truncated: usize,
}

/// Per-cell sum rate and 95%-likely rate from linear SIR samples.
///
/// The percentile uses linear interpolation of the order statistics.
pub fn rate_metrics(sir_samples: &[f64], k: usize) -> Result<(f64, f64)> {
    if sir_samples.is_empty() {
        return Err(Error::parameter("sir_samples", "must not be empty"));
    }
    let rates: Vec<f64> = sir_samples.iter().map(|&g| (1.0 + g).log2()).collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let mut sorted = rates;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((k as f64 * mean, percentile_sorted(&sorted, 0.05)))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// Empirical distribution of the neighbor count K' of a typical station,
/// from `n_realizations` independent network realizations with `K` users
/// scheduled per cell.
pub fn kprime_histogram(config: &ExperimentConfig, n_realizations: usize) -> Result<KprimeHistogram> {
    let samples = kprime_samples(config, n_realizations)?;
    let max = samples.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0u64; max + 1];
    for s in samples {
        counts[s] += 1;
    }
    KprimeHistogram::from_counts(&counts)
}

fn kprime_samples(config: &ExperimentConfig, n_realizations: usize) -> Result<Vec<usize>> {
    config.validate()?;
    if n_realizations < 100 {
        return Err(Error::parameter(
            "n_realizations",
            "neighbor statistics need at least 100 realizations",
        ));
    }
    let raw: Vec<Result<usize>> = (0..n_realizations)
        .into_par_iter()
        .map(|i| engine::sample_typical_kprime(config, STREAM_HISTOGRAM + i as u64))
        .collect();
    replace_failures(raw, n_realizations, |stream| {
        engine::sample_typical_kprime(config, STREAM_HISTOGRAM + STREAM_RETRY / 2 + stream)
    })
    .map(|(samples, _)| samples)
}

/// Sequentially replace failed slots with deterministic retry streams so the
/// final sample set is independent of scheduling.
fn replace_failures<T>(
    raw: Vec<Result<T>>,
    n: usize,
    mut retry: impl FnMut(u64) -> Result<T>,
) -> Result<(Vec<T>, usize)> {
    let mut out = Vec::with_capacity(n);
    let mut retries = 0u64;
    let mut failed = 0usize;
    let budget = 100 + n as u64;
    for slot in raw {
        match slot {
            Ok(v) => out.push(v),
            Err(first_err) => {
                failed += 1;
                loop {
                    if retries >= budget {
                        return Err(Error::Numerical {
                            context: "replace_failures",
                            reason: format!("retry budget exhausted; first failure: {first_err}"),
                        });
                    }
                    let attempt = retry(retries);
                    retries += 1;
                    if let Ok(v) = attempt {
                        out.push(v);
                        break;
                    }
                }
            }
        }
    }
    Ok((out, failed))
}

/// The raw per-realization measurements of one experiment, for callers that
/// want the sample-level view rather than the aggregated report.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationSample {
    /// Distance to the serving station.
    pub t: f64,
    /// Distance to the second nearest station.
    pub s: f64,
    /// Realized intra-cell distance sum.
    pub rk_sum: f64,
    /// Serving station's nulled neighbor count (cell-edge-aware runs).
    pub kprime_serving: usize,
    /// One SIR sample per configured scheme, in scheme order.
    pub sir: Vec<crate::sir::SirSample>,
}

/// Run the realization loop and return every per-realization sample.
pub fn run_samples(config: &ExperimentConfig) -> Result<Vec<RealizationSample>> {
    config.validate()?;
    let (results, _, _) = run_realizations(config)?;
    Ok(results
        .iter()
        .map(|r| RealizationSample {
            t: r.t,
            s: r.s,
            rk_sum: r.rk_sum,
            kprime_serving: r.kprime_serving,
            sir: config.schemes.iter().map(|s| r.sir[s.index()].unwrap()).collect(),
        })
        .collect())
}

/// Run the full experiment: per-realization SIR samples for every scheme,
/// aggregated into coverage curves, rate metrics, and neighbor statistics.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let (results, n_failed, hist_stats) = run_realizations(config)?;

    let mut per_scheme = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        let idx = scheme.index();
        let samples: Vec<f64> = results.iter().map(|r| r.sir[idx].unwrap().value).collect();
        per_scheme.push(aggregate_scheme(scheme, &samples, config));
    }

    let (mean_kprime, mean_kprime_ci) = hist_stats;
    Ok(MetricsReport {
        config: config.clone(),
        per_scheme,
        mean_kprime,
        mean_kprime_ci,
        n_failed_replaced: n_failed,
        n_truncated: results.iter().filter(|r| r.truncated).count(),
    })
}

/// Conditional means of one frozen geometry: the Monte Carlo mean SIR of a
/// scheme over the fading ensemble, next to the mean of its deterministic
/// equivalent (which varies only through the realized out-of-cell
/// interference).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionedMeans {
    pub scheme: Scheme,
    pub sim_mean: f64,
    pub det_mean: f64,
}

/// One frozen geometry's validation record.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedGeometry {
    pub t: f64,
    pub s: f64,
    pub kprime_serving: usize,
    pub per_scheme: Vec<ConditionedMeans>,
}

/// Validate the large-system SIR equivalents under their own conditioning:
/// freeze `n_geometries` independent geometries (distances, scheduled cells,
/// neighbor structure), Monte Carlo `config.n_realizations` fading draws on
/// each, and pair the realized SIR with the deterministic equivalent
/// evaluated on the same draw.
pub fn run_conditioned(config: &ExperimentConfig, n_geometries: usize) -> Result<Vec<ConditionedGeometry>> {
    config.validate()?;
    if n_geometries == 0 {
        return Err(Error::parameter("n_geometries", "must be positive"));
    }
    let hist = if config.schemes.contains(&Scheme::CeaZf) {
        Some(kprime_histogram(config, config.kprime_hist_realizations)?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(n_geometries);
    let mut geometry_stream = 0u64;
    for _ in 0..n_geometries {
        // Deterministic geometry draw with resampling on rejection.
        let skeleton = loop {
            let mut rng = engine::stream_rng(config.seed, STREAM_GEOMETRY + geometry_stream);
            geometry_stream += 1;
            if geometry_stream > 1000 + 10 * n_geometries as u64 {
                return Err(Error::Numerical {
                    context: "run_conditioned",
                    reason: "geometry resampling budget exhausted".into(),
                });
            }
            match engine::build_skeleton(config, hist.as_ref(), &mut rng) {
                Ok(s) => break s,
                Err(_) => continue,
            }
        };

        out.push(condition_on_skeleton(config, &skeleton, geometry_stream)?);
    }
    Ok(out)
}

/// As [`run_conditioned`] but on the deterministic *representative*
/// geometry: every conditioned quantity frozen at its distributional mean
/// (or evenly spaced quantiles), which is how a single simulated
/// SIR-versus-antennas point is produced.
pub fn run_conditioned_representative(config: &ExperimentConfig) -> Result<ConditionedGeometry> {
    config.validate()?;
    let skeleton = engine::representative_skeleton(config)?;
    condition_on_skeleton(config, &skeleton, 0)
}

fn condition_on_skeleton(
    config: &ExperimentConfig,
    skeleton: &engine::GeometrySkeleton,
    geometry_stream: u64,
) -> Result<ConditionedGeometry> {
    let fading_base = STREAM_FADING + (geometry_stream << 32);
    let raw: Vec<Result<engine::RealizationResult>> = (0..config.n_realizations)
        .into_par_iter()
        .map(|j| {
            let mut rng = engine::stream_rng(config.seed, fading_base + j as u64);
            engine::evaluate_skeleton(config, skeleton, &mut rng)
        })
        .collect();
    let (results, _) = replace_failures(raw, config.n_realizations, |retry| {
        let mut rng = engine::stream_rng(config.seed, fading_base + (1 << 31) + retry);
        engine::evaluate_skeleton(config, skeleton, &mut rng)
    })?;

    let mut per_scheme = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        let idx = scheme.index();
        let mut sim_acc = 0.0;
        let mut det_acc = 0.0;
        for r in &results {
            sim_acc += r.sir[idx].unwrap().value;
            det_acc += match scheme {
                Scheme::CeuZf => ceu_sir_det(&DetEquivInput {
                    n_antennas: config.n_antennas,
                    k_served: config.k_served,
                    k_neighbors: 0,
                    alpha: config.alpha,
                    t: r.t,
                    s: r.s,
                    rk_sum: r.rk_sum,
                    tau_sq: r.tau_sq,
                    tau_bar_sq: 0.0,
                    i_out: r.i_second[idx] + r.i_rest[idx],
                })?,
                Scheme::CeaZf => cea_sir_det(&DetEquivInput {
                    n_antennas: config.n_antennas,
                    k_served: config.k_served,
                    k_neighbors: r.kprime_serving,
                    alpha: config.alpha,
                    t: r.t,
                    s: r.s,
                    rk_sum: r.rk_sum,
                    tau_sq: r.tau_sq,
                    tau_bar_sq: r.tau_bar_sq,
                    i_out: r.i_rest[idx],
                })?,
            };
        }
        per_scheme.push(ConditionedMeans {
            scheme,
            sim_mean: sim_acc / results.len() as f64,
            det_mean: det_acc / results.len() as f64,
        });
    }
    Ok(ConditionedGeometry {
        t: skeleton.t,
        s: skeleton.s,
        kprime_serving: skeleton.kprime_serving,
        per_scheme,
    })
}

type HistStats = (f64, f64);

fn run_realizations(config: &ExperimentConfig) -> Result<(Vec<engine::RealizationResult>, usize, HistStats)> {
    // Neighbor-count statistics first: they feed the interferer model of
    // cell-edge-aware runs and the report's mean K'.
    let kp_samples = kprime_samples(config, config.kprime_hist_realizations)?;
    let n_kp = kp_samples.len() as f64;
    let kp_mean = kp_samples.iter().sum::<usize>() as f64 / n_kp;
    let kp_var = kp_samples.iter().map(|&s| (s as f64 - kp_mean).powi(2)).sum::<f64>() / (n_kp - 1.0);
    let kp_ci = 1.96 * (kp_var / n_kp).sqrt();
    let hist = if config.schemes.contains(&Scheme::CeaZf) {
        let max = kp_samples.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u64; max + 1];
        for s in &kp_samples {
            counts[*s] += 1;
        }
        Some(KprimeHistogram::from_counts(&counts)?)
    } else {
        None
    };

    let n = config.n_realizations;
    let raw: Vec<Result<engine::RealizationResult>> = (0..n)
        .into_par_iter()
        .map(|i| engine::simulate_realization(config, STREAM_REALIZATION + i as u64, hist.as_ref()))
        .collect();
    let (results, n_failed) = replace_failures(raw, n, |stream| {
        engine::simulate_realization(config, STREAM_RETRY + stream, hist.as_ref())
    })?;
    Ok((results, n_failed, (kp_mean, kp_ci)))
}

fn aggregate_scheme(scheme: Scheme, samples: &[f64], config: &ExperimentConfig) -> SchemeMetrics {
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let coverage = config
        .theta_db
        .iter()
        .map(|&theta_db| {
            let theta = 10f64.powf(theta_db / 10.0);
            let below = sorted.partition_point(|&v| v < theta);
            let p = (n - below) as f64 / n as f64;
            CoverageEstimate {
                theta_db,
                theta,
                value: p,
                ci_halfwidth: coverage_ci(p, n, config.ci_method),
            }
        })
        .collect();

    let rates: Vec<f64> = samples.iter().map(|&g| (1.0 + g).log2()).collect();
    let mean_rate = rates.iter().sum::<f64>() / n as f64;
    let rate_var = rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let sum_rate = config.k_served as f64 * mean_rate;
    let sum_rate_ci = 1.96 * config.k_served as f64 * (rate_var / n as f64).sqrt();

    let mut sorted_rates = rates.clone();
    sorted_rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rate_95 = percentile_sorted(&sorted_rates, 0.05);
    let rate_95_ci = bootstrap_percentile_ci(&rates, 0.05, config.seed, scheme);

    SchemeMetrics {
        scheme,
        coverage,
        sum_rate,
        sum_rate_ci,
        rate_95,
        rate_95_ci,
        n_infinite: samples.iter().filter(|v| v.is_infinite()).count(),
    }
}

fn coverage_ci(p: f64, n: usize, method: CiMethod) -> f64 {
    let z = 1.96;
    let n = n as f64;
    match method {
        CiMethod::Normal => z * (p * (1.0 - p) / n).sqrt(),
        CiMethod::Wilson => {
            let denom = 1.0 + z * z / n;
            z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / denom
        }
    }
}

/// Bootstrap half-width of a percentile estimate (200 resamples, normal
/// scale on the replicate spread).
fn bootstrap_percentile_ci(values: &[f64], p: f64, seed: u64, scheme: Scheme) -> f64 {
    const RESAMPLES: usize = 200;
    let n = values.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_BOOTSTRAP + scheme.index() as u64);
    let idx = (n - 1) as f64 * p;
    let lo = idx.floor() as usize;
    let frac = idx - lo as f64;
    let mut replicates = Vec::with_capacity(RESAMPLES);
    let mut buf = vec![0.0f64; n];
    for _ in 0..RESAMPLES {
        for b in buf.iter_mut() {
            *b = values[rng.gen_range(0..n)];
        }
        let (_, x_lo, rest) = buf.select_nth_unstable_by(lo, |a, b| a.partial_cmp(b).unwrap());
        let x_lo = *x_lo;
        let value = if frac > 0.0 && !rest.is_empty() {
            let x_hi = rest.iter().copied().fold(f64::INFINITY, f64::min);
            x_lo + frac * (x_hi - x_lo)
        } else {
            x_lo
        };
        replicates.push(value);
    }
    let mean = replicates.iter().sum::<f64>() / RESAMPLES as f64;
    let var = replicates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (RESAMPLES as f64 - 1.0);
    1.96 * var.sqrt()
}
