//! Channel model: i.i.d. Rayleigh small-scale fading, power-law path loss,
//! and the pilot-contamination CSI error model.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::Result;

/// Unit-variance circularly symmetric complex Gaussian fading vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FadingVector(pub DVector<Complex64>);

impl FadingVector {
    /// Draw an `n`-antenna fading vector with per-entry E|x|² = 1.
    pub fn sample(n: usize, rng: &mut impl Rng) -> Self {
        let mut v = DVector::zeros(n);
        sample_fading_into(v.as_mut_slice(), rng);
        FadingVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Fill `buf` with i.i.d. CN(0, 1) entries.
pub(crate) fn sample_fading_into(buf: &mut [Complex64], rng: &mut impl Rng) {
    for z in buf {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
    }
}

/// Corrupt a true fading vector with estimation noise of variance `tau_sq`:
/// `x̂ = sqrt(1 - τ²) x + τ q` with `q` a fresh unit fading vector, so the
/// estimate keeps unit per-entry variance.
pub fn estimate_fading(true_fading: &FadingVector, tau_sq: f64, rng: &mut impl Rng) -> Result<FadingVector> {
    if !(0.0..=1.0).contains(&tau_sq) {
        return Err(Error::parameter("tau_sq", format!("must be in [0, 1], got {tau_sq}")));
    }
    if tau_sq == 0.0 {
        return Ok(true_fading.clone());
    }
    let noise = FadingVector::sample(true_fading.len(), rng);
    let keep = (1.0 - tau_sq).sqrt();
    let mix = tau_sq.sqrt();
    Ok(FadingVector(&true_fading.0 * Complex64::from(keep) + noise.0 * Complex64::from(mix)))
}

/// Link key: (base station index, user id).
pub type LinkKey = (usize, usize);

/// User id of the typical user in a [`ChannelSet`].
pub const TYPICAL_UE: usize = 0;

/// The channels of one network realization, keyed by (base station, user).
/// Only links that enter an SIR computation need to be present.
#[derive(Clone, Debug, Default)]
pub struct ChannelSet {
    pub true_fading: HashMap<LinkKey, FadingVector>,
    pub estimated_fading: HashMap<LinkKey, FadingVector>,
    /// Path-loss gain r^{-α} of the link (dimensionless).
    pub path_loss: HashMap<LinkKey, f64>,
    pub tau_sq: HashMap<LinkKey, f64>,
}

impl ChannelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn true_fading(&self, key: LinkKey) -> Result<&FadingVector> {
        self.true_fading
            .get(&key)
            .ok_or_else(|| Error::Consistency(format!("missing true fading for link {key:?}")))
    }

    pub fn path_loss(&self, key: LinkKey) -> Result<f64> {
        self.path_loss
            .get(&key)
            .copied()
            .ok_or_else(|| Error::Consistency(format!("missing path loss for link {key:?}")))
    }
}

/// Pilot allocation parameters.
///
/// `coherence_symbols` (L) and `training_fraction` (κ) describe how many
/// orthogonal pilots M = κL a deployment could afford; they document the
/// numerology and are not used in any computation here.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotConfig {
    /// Pilot reuse factor F ≥ 1.
    pub reuse_factor: u32,
    /// Path-loss exponent α > 2.
    pub alpha: f64,
    /// Base-station density λ > 0.
    pub lambda: f64,
    pub coherence_symbols: Option<u64>,
    pub training_fraction: Option<f64>,
}

impl PilotConfig {
    pub fn new(reuse_factor: u32, alpha: f64, lambda: f64) -> Result<Self> {
        if reuse_factor < 1 {
            return Err(Error::parameter("reuse_factor", "must be at least 1"));
        }
        if !(alpha > 2.0) {
            return Err(Error::parameter("alpha", format!("must exceed 2, got {alpha}")));
        }
        if !(lambda > 0.0) {
            return Err(Error::parameter("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(PilotConfig {
            reuse_factor,
            alpha,
            lambda,
            coherence_symbols: None,
            training_fraction: None,
        })
    }
}

/// Mean pilot interference at a base station under reuse factor `f`:
/// contaminators form a PPP of density λ/F outside the exclusion disk of
/// radius sqrt(F/(λπ)), giving `2 (λπ/F)^{α/2} / (α - 2)` by Campbell's
/// theorem.
pub fn mean_pilot_interference(lambda: f64, f: u32, alpha: f64) -> Result<f64> {
    if alpha <= 2.0 {
        return Err(Error::DivergentIntegral(format!(
            "mean pilot interference diverges for alpha = {alpha} <= 2"
        )));
    }
    if f < 1 {
        return Err(Error::parameter("f", "pilot reuse factor must be at least 1"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::parameter("lambda", format!("must be positive, got {lambda}")));
    }
    let lp = lambda * std::f64::consts::PI / f as f64;
    Ok(2.0 * lp.powf(alpha / 2.0) / (alpha - 2.0))
}

/// Mean-field CSI error variance for a link of length `distance`:
/// `τ² = 1 / (1 + (α-2) F^{α/2} / (2 (λπ)^{α/2} d^α))`, the pilot
/// interference replaced by its mean.
pub fn csi_error_variance(distance: f64, lambda: f64, f: u32, alpha: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::parameter("distance", format!("must be positive, got {distance}")));
    }
    if alpha <= 2.0 {
        return Err(Error::DivergentIntegral(format!(
            "mean pilot interference diverges for alpha = {alpha} <= 2"
        )));
    }
    if f < 1 {
        return Err(Error::parameter("f", "pilot reuse factor must be at least 1"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::parameter("lambda", format!("must be positive, got {lambda}")));
    }
    let lp = lambda * std::f64::consts::PI;
    let ratio = (alpha - 2.0) * (f as f64).powf(alpha / 2.0) / (2.0 * lp.powf(alpha / 2.0) * distance.powf(alpha));
    Ok(1.0 / (1.0 + ratio))
}

/// Exact MMSE CSI error variance given the distances of the co-pilot
/// contaminators: `τ² = 1 - d^{-α} / (d^{-α} + Σ_l d_l^{-α})`.
pub fn exact_csi_error_variance(target_distance: f64, contaminator_distances: &[f64], alpha: f64) -> Result<f64> {
    if !(target_distance > 0.0) {
        return Err(Error::parameter(
            "target_distance",
            format!("must be positive, got {target_distance}"),
        ));
    }
    let mut interference = 0.0;
    for &d in contaminator_distances {
        if !(d > 0.0) {
            return Err(Error::parameter("contaminator_distances", format!("must be positive, got {d}")));
        }
        interference += d.powf(-alpha);
    }
    let signal = target_distance.powf(-alpha);
    Ok(interference / (signal + interference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 1e-6;

    #[test]
    fn mean_pilot_interference_value() {
        // lambda = 1e-6, F = 7, alpha = 4: 2 (lambda pi / 7)^2 / 2.
        let v = mean_pilot_interference(LAMBDA, 7, 4.0).unwrap();
        let expected = (LAMBDA * std::f64::consts::PI / 7.0).powi(2);
        assert!((v - expected).abs() < 1e-25);
        assert!((v - 2.0142e-13).abs() < 1e-17, "got {v:e}");
    }

    #[test]
    fn mean_pilot_interference_decreases_in_f() {
        let mut last = f64::INFINITY;
        for f in [1, 2, 4, 7, 20, 100, 10_000] {
            let v = mean_pilot_interference(LAMBDA, f, 4.0).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-19);
    }

    #[test]
    fn alpha_two_is_divergent() {
        assert!(matches!(
            mean_pilot_interference(LAMBDA, 7, 2.0),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(matches!(
            csi_error_variance(500.0, LAMBDA, 7, 2.0),
            Err(Error::DivergentIntegral(_))
        ));
    }

    #[test]
    fn csi_error_variance_value() {
        let v = csi_error_variance(500.0, LAMBDA, 7, 4.0).unwrap();
        assert!((v - 0.0124323).abs() < 1e-6, "got {v}");
        // Identical to the mean-interference route.
        let ip = mean_pilot_interference(LAMBDA, 7, 4.0).unwrap();
        let alt = ip / (ip + 500f64.powi(-4));
        assert!((v - alt).abs() < 1e-15);
    }

    #[test]
    fn csi_error_variance_limits() {
        // F -> infinity at fixed d: no contamination.
        assert!(csi_error_variance(500.0, LAMBDA, 100_000, 4.0).unwrap() < 1e-8);
        // d -> infinity: no useful signal.
        assert!(csi_error_variance(1e9, LAMBDA, 7, 4.0).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn csi_error_variance_monotone() {
        let mut last = 0.0;
        for d in [10.0, 100.0, 300.0, 1000.0, 5000.0] {
            let v = csi_error_variance(d, LAMBDA, 7, 4.0).unwrap();
            assert!(v > last);
            assert!((0.0..=1.0).contains(&v));
            last = v;
        }
        assert!(
            csi_error_variance(500.0, LAMBDA, 3, 4.0).unwrap()
                > csi_error_variance(500.0, LAMBDA, 7, 4.0).unwrap()
        );
    }

    #[test]
    fn exact_csi_error_no_contaminators() {
        assert_eq!(exact_csi_error_variance(500.0, &[], 4.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_csi_error_symmetric_contaminator() {
        let v = exact_csi_error_variance(500.0, &[500.0], 4.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_csi_error_rejects_bad_distances() {
        assert!(exact_csi_error_variance(0.0, &[1.0], 4.0).is_err());
        assert!(exact_csi_error_variance(1.0, &[0.0], 4.0).is_err());
    }

    #[test]
    fn estimate_fading_perfect_and_blind() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = FadingVector::sample(64, &mut rng);
        let perfect = estimate_fading(&x, 0.0, &mut rng).unwrap();
        assert_eq!(perfect, x);

        // tau^2 = 1: estimate statistically independent of the truth.
        let n = 100_000;
        let truth = FadingVector::sample(n, &mut rng);
        let blind = estimate_fading(&truth, 1.0, &mut rng).unwrap();
        let corr = (truth.0.dotc(&blind.0) / Complex64::from(n as f64)).norm();
        assert!(corr < 0.02, "correlation {corr}");
    }

    #[test]
    fn estimate_fading_partial_correlation() {
        // tau^2 = 0.1: E[x̂ᴴx]/N = sqrt(0.9).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let x = FadingVector::sample(n, &mut rng);
        let est = estimate_fading(&x, 0.1, &mut rng).unwrap();
        let corr = (est.0.dotc(&x.0) / Complex64::from(n as f64)).re;
        let expected = 0.9f64.sqrt();
        assert!((corr - expected).abs() < 0.02 * expected, "correlation {corr}");
    }

    #[test]
    fn estimate_fading_preserves_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 100_000;
        for tau_sq in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let x = FadingVector::sample(n, &mut rng);
            let est = estimate_fading(&x, tau_sq, &mut rng).unwrap();
            let mean_sq = est.0.norm_squared() / n as f64;
            assert!((mean_sq - 1.0).abs() < 0.02, "tau_sq {tau_sq}: E|x|^2 = {mean_sq}");
        }
    }

    #[test]
    fn estimate_fading_rejects_bad_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = FadingVector::sample(4, &mut rng);
        assert!(estimate_fading(&x, -0.1, &mut rng).is_err());
        assert!(estimate_fading(&x, 1.1, &mut rng).is_err());
    }

    #[test]
    fn fading_vector_unit_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = FadingVector::sample(200_000, &mut rng);
        let mean_sq = v.0.norm_squared() / v.len() as f64;
        assert!((mean_sq - 1.0).abs() < 0.01, "E|x|^2 = {mean_sq}");
    }

    #[test]
    fn sampled_contamination_matches_mean_field() {
        // Contaminators at density lambda/F outside the exclusion radius
        // R_e = sqrt(F/(lambda pi)); the average of the exact tau^2 should
        // approach the mean-field formula.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = 7u32;
        let alpha = 4.0;
        let d = 500.0;
        let lp = LAMBDA * std::f64::consts::PI;
        let r_e_sq = f as f64 / lp;
        let r_max_sq = r_e_sq * 1600.0; // truncation tail < 0.1% of the mean
        let rate = lp / f as f64; // squared-distance arrival rate of the contaminator PPP
        let n_sets = 20_000;
        let mut acc = 0.0;
        for _ in 0..n_sets {
            let mut dists = Vec::new();
            let mut r_sq = r_e_sq;
            loop {
                r_sq += -rng.gen::<f64>().ln() / rate;
                if r_sq > r_max_sq {
                    break;
                }
                dists.push(r_sq.sqrt());
            }
            acc += exact_csi_error_variance(d, &dists, alpha).unwrap();
        }
        let mean_exact = acc / n_sets as f64;
        let mean_field = csi_error_variance(d, LAMBDA, f, alpha).unwrap();
        let rel = (mean_exact - mean_field).abs() / mean_field;
        assert!(rel < 0.10, "exact {mean_exact} vs mean-field {mean_field} (rel {rel})");
    }
}
