//! Large-system deterministic equivalents of the downlink SIR and the fixed
//! points behind them.
//!
//! As the antenna count and user count grow at a fixed ratio, the random SIR
//! under either precoder concentrates on a closed-form value driven only by
//! the load ratios, the CSI error, the link distances, and the out-of-cell
//! interference. These are the per-realization ("conditioned") forms; the
//! coverage integrals in [`crate::analysis`] replace the conditioned
//! quantities with their distributions.

use crate::error::Error;
use crate::Result;

/// Inputs of the deterministic SIR equivalents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetEquivInput {
    /// Antennas per station N.
    pub n_antennas: usize,
    /// Served users per cell K.
    pub k_served: usize,
    /// Neighbor users nulled by the serving station K'.
    pub k_neighbors: usize,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Distance to the serving station (m).
    pub t: f64,
    /// Distance to the second closest station (m).
    pub s: f64,
    /// Realized intra-cell distance sum Σ_{l≠k} r_l^α (m^α).
    pub rk_sum: f64,
    /// CSI error variance of the serving link.
    pub tau_sq: f64,
    /// CSI error variance of the second station's estimate of the typical
    /// user (CEA only).
    pub tau_bar_sq: f64,
    /// Out-of-cell interference (m^-α units): all stations but the serving
    /// one for CEU, all but serving and second for CEA.
    pub i_out: f64,
}

impl DetEquivInput {
    fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 || self.k_served == 0 {
            return Err(Error::parameter("n_antennas/k_served", "must be positive"));
        }
        if !(self.t > 0.0) || !(self.s >= self.t) {
            return Err(Error::parameter("t/s", format!("need 0 < t <= s, got t = {}, s = {}", self.t, self.s)));
        }
        if self.rk_sum < 0.0 {
            return Err(Error::parameter("rk_sum", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.tau_sq) || !(0.0..=1.0).contains(&self.tau_bar_sq) {
            return Err(Error::parameter("tau_sq/tau_bar_sq", "must lie in [0, 1]"));
        }
        if self.i_out < 0.0 {
            return Err(Error::parameter("i_out", "must be nonnegative"));
        }
        Ok(())
    }

    fn beta(&self) -> f64 {
        self.k_served as f64 / self.n_antennas as f64
    }

    fn beta_prime(&self) -> f64 {
        self.k_neighbors as f64 / self.n_antennas as f64
    }
}

/// Solution (φ, ψ) of the zero-forcing fixed-point pair
/// `φ = 1/(1 + β/φ)`, `ψ = 1/(1 + β/φ)²`, which is `(1-β, (1-β)²)`.
/// The closed form is substituted back and verified to 1e-12.
pub fn zf_fixed_point(beta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::parameter("beta", format!("load ratio must be in [0, 1), got {beta}")));
    }
    let phi = 1.0 - beta;
    let psi = phi * phi;
    let phi_residual = (phi - 1.0 / (1.0 + beta / phi)).abs();
    let psi_residual = (psi - 1.0 / (1.0 + beta / phi).powi(2)).abs();
    if phi_residual > 1e-12 || psi_residual > 1e-12 {
        return Err(Error::Numerical {
            context: "zf_fixed_point",
            reason: format!("defining equations violated: {phi_residual:e}, {psi_residual:e}"),
        });
    }
    Ok((phi, psi))
}

/// Deterministic equivalent of the CEU-ZF SIR:
/// `γ = (1-τ²)(1-β) N / [ (τ² t^{-α} + I_out)(t^α + R_k) ]`.
pub fn ceu_sir_det(input: &DetEquivInput) -> Result<f64> {
    input.validate()?;
    let beta = input.beta();
    if beta >= 1.0 {
        return Err(Error::parameter("k_served", format!("load ratio {beta} must be below 1")));
    }
    let numerator = (1.0 - input.tau_sq) * (1.0 - beta) * input.n_antennas as f64;
    let t_pow = input.t.powf(input.alpha);
    let denominator = (input.tau_sq * t_pow.recip() + input.i_out) * (t_pow + input.rk_sum);
    if denominator <= 0.0 {
        return Err(Error::parameter(
            "i_out",
            "degenerate input: zero interference and perfect CSI give an unbounded SIR",
        ));
    }
    Ok(numerator / denominator)
}

/// Deterministic equivalent of the CEA-ZF SIR:
/// `γ = (1-τ²)(1-β-β') N / [ (τ² t^{-α} + τ̄² s^{-α} + I_out)(t^α + R_k) ]`.
pub fn cea_sir_det(input: &DetEquivInput) -> Result<f64> {
    input.validate()?;
    let load = input.beta() + input.beta_prime();
    if load >= 1.0 {
        return Err(Error::parameter(
            "k_neighbors",
            format!("combined load ratio {load} must be below 1"),
        ));
    }
    let numerator = (1.0 - input.tau_sq) * (1.0 - load) * input.n_antennas as f64;
    let t_pow = input.t.powf(input.alpha);
    let s_pow = input.s.powf(input.alpha);
    let denominator =
        (input.tau_sq * t_pow.recip() + input.tau_bar_sq * s_pow.recip() + input.i_out) * (t_pow + input.rk_sum);
    if denominator <= 0.0 {
        return Err(Error::parameter(
            "i_out",
            "degenerate input: zero interference and perfect CSI give an unbounded SIR",
        ));
    }
    Ok(numerator / denominator)
}

/// Solve the regularized-precoder fixed point
/// `Λ = 1 / (ρ + (1/N) Σ_l g_l / (1 + Λ g_l))` over the served and neighbor
/// gain lists, by damped iteration (factor 0.5, relative stop 1e-12).
pub fn lambda_fixed_point(rho: f64, served_gains: &[f64], neighbor_gains: &[f64], n_antennas: usize) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::parameter("rho", format!("must be nonnegative, got {rho}")));
    }
    if rho == 0.0 && served_gains.is_empty() && neighbor_gains.is_empty() {
        return Err(Error::parameter("rho", "rho = 0 with empty gain lists has no fixed point"));
    }
    for &g in served_gains.iter().chain(neighbor_gains) {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::parameter("gains", format!("must be positive and finite, got {g}")));
        }
    }
    let n = n_antennas as f64;
    let map = |lambda: f64| -> f64 {
        let mut acc = rho;
        for &g in served_gains.iter().chain(neighbor_gains) {
            acc += g / (1.0 + lambda * g) / n;
        }
        1.0 / acc
    };
    let mut lambda = map(0.0);
    const DAMPING: f64 = 0.5;
    const MAX_ITERS: usize = 10_000;
    for _ in 0..MAX_ITERS {
        let next = (1.0 - DAMPING) * lambda + DAMPING * map(lambda);
        let change = (next - lambda).abs() / next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if change < 1e-12 {
            let residual = (lambda - map(lambda)).abs() / lambda.abs().max(f64::MIN_POSITIVE);
            if residual > 1e-10 {
                return Err(Error::Numerical {
                    context: "lambda_fixed_point",
                    reason: format!("stalled with residual {residual:e}"),
                });
            }
            return Ok(lambda);
        }
    }
    Err(Error::Numerical {
        context: "lambda_fixed_point",
        reason: format!("no convergence after {MAX_ITERS} iterations (rho = {rho})"),
    })
}

/// `-∂Λ/∂ρ` at a solution of [`lambda_fixed_point`], by implicit
/// differentiation: `Λ² / (1 - Λ² S₂)` with
/// `S₂ = (1/N) Σ_l g_l² / (1 + Λ g_l)²`.
pub fn lambda_rho_derivative(lambda: f64, served_gains: &[f64], neighbor_gains: &[f64], n_antennas: usize) -> f64 {
    let n = n_antennas as f64;
    let s2: f64 = served_gains
        .iter()
        .chain(neighbor_gains)
        .map(|&g| {
            let q = g / (1.0 + lambda * g);
            q * q / n
        })
        .sum();
    lambda * lambda / (1.0 - lambda * lambda * s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_input() -> DetEquivInput {
        DetEquivInput {
            n_antennas: 100,
            k_served: 10,
            k_neighbors: 0,
            alpha: 4.0,
            t: 300.0,
            s: 450.0,
            rk_sum: 1.8237813765364553e12,
            tau_sq: 0.0,
            tau_bar_sq: 0.0,
            i_out: 3.490658503988659e-11,
        }
    }

    #[test]
    fn zf_fixed_point_no_load() {
        assert_eq!(zf_fixed_point(0.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn zf_fixed_point_half_load() {
        let (phi, psi) = zf_fixed_point(0.5).unwrap();
        assert!((phi - 0.5).abs() < 1e-15);
        assert!((psi - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zf_fixed_point_heavy_load_residuals() {
        let (phi, psi) = zf_fixed_point(0.9).unwrap();
        assert!((phi - 0.1).abs() < 1e-12);
        assert!((psi - 0.01).abs() < 1e-12);
        // Residuals of the defining equations.
        assert!((phi - 1.0 / (1.0 + 0.9 / phi)).abs() < 1e-12);
        assert!((psi - 1.0 / (1.0 + 0.9 / phi).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn zf_fixed_point_rejects_full_load() {
        assert!(zf_fixed_point(1.0).is_err());
        assert!(zf_fixed_point(-0.1).is_err());
    }

    #[test]
    fn ceu_det_reference_value() {
        // N = 100, K = 10, t = 300, alpha = 4, lambda = 1e-6, perfect CSI,
        // R_k and I_out at their means: gamma = 90 / (I_out (t^4 + R_k)).
        let input = base_input();
        let gamma = ceu_sir_det(&input).unwrap();
        let expected = 90.0 / (input.i_out * (300f64.powi(4) + input.rk_sum));
        assert!((gamma - expected).abs() < 1e-12 * expected);
        assert!((gamma - 1.4075).abs() < 2e-4, "gamma = {gamma}");
    }

    #[test]
    fn ceu_det_no_csi_gives_zero() {
        let input = DetEquivInput {
            tau_sq: 1.0,
            ..base_input()
        };
        assert_eq!(ceu_sir_det(&input).unwrap(), 0.0);
    }

    #[test]
    fn cea_reduces_to_ceu_without_neighbors() {
        let input = base_input();
        let ceu = ceu_sir_det(&input).unwrap();
        let cea = cea_sir_det(&input).unwrap();
        assert_eq!(ceu, cea);
    }

    #[test]
    fn cea_approaches_ceu_as_neighbor_terms_vanish() {
        let mut input = base_input();
        input.k_neighbors = 0;
        input.tau_bar_sq = 0.4;
        input.s = 1e9;
        let ratio = cea_sir_det(&input).unwrap() / ceu_sir_det(&input).unwrap();
        assert!((ratio - 1.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn cea_rejects_overload() {
        let input = DetEquivInput {
            k_neighbors: 95,
            ..base_input()
        };
        assert!(cea_sir_det(&input).is_err());
    }

    #[test]
    fn det_equivalents_monotonicity() {
        let base = base_input();
        let gamma = ceu_sir_det(&base).unwrap();
        for (mutate, increases) in [
            (DetEquivInput { n_antennas: 200, ..base }, true),
            (DetEquivInput { tau_sq: 0.2, ..base }, false),
            (DetEquivInput { rk_sum: base.rk_sum * 2.0, ..base }, false),
            (DetEquivInput { i_out: base.i_out * 2.0, ..base }, false),
        ] {
            let other = ceu_sir_det(&mutate).unwrap();
            assert_eq!(other > gamma, increases, "{mutate:?}");
            let mut cea_base = base;
            cea_base.k_neighbors = 10;
            let mut cea_mut = mutate;
            cea_mut.k_neighbors = 10;
            let a = cea_sir_det(&cea_base).unwrap();
            let b = cea_sir_det(&cea_mut).unwrap();
            assert_eq!(b > a, increases);
        }
    }

    #[test]
    fn lambda_fixed_point_no_gains() {
        assert!((lambda_fixed_point(1.0, &[], &[], 64).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_fixed_point_rho_dominated() {
        let gains = [0.2, 0.5, 0.9, 1.3];
        let lambda = lambda_fixed_point(100.0, &gains, &[], 16).unwrap();
        assert!((lambda - 0.01).abs() < 1e-4, "lambda {lambda}");
    }

    #[test]
    fn lambda_fixed_point_residual() {
        let served: Vec<f64> = (1..=8).map(|i| 0.3 * i as f64).collect();
        let neighbors: Vec<f64> = (1..=5).map(|i| 0.7 / i as f64).collect();
        let n = 32;
        let rho = 0.05;
        let lambda = lambda_fixed_point(rho, &served, &neighbors, n).unwrap();
        let mut acc = rho;
        for &g in served.iter().chain(&neighbors) {
            acc += g / (1.0 + lambda * g) / n as f64;
        }
        let residual = (lambda - 1.0 / acc).abs();
        assert!(residual < 1e-10, "residual {residual:e}");
    }

    #[test]
    fn lambda_fixed_point_rejects_bad_inputs() {
        assert!(lambda_fixed_point(-1.0, &[1.0], &[], 8).is_err());
        assert!(lambda_fixed_point(0.0, &[], &[], 8).is_err());
        assert!(lambda_fixed_point(1.0, &[0.0], &[], 8).is_err());
    }

    #[test]
    fn lambda_derivative_matches_finite_difference() {
        let served: Vec<f64> = (1..=6).map(|i| 0.4 * i as f64).collect();
        let neighbors = [0.9, 1.7];
        let n = 24;
        let rho = 0.3;
        let lambda = lambda_fixed_point(rho, &served, &neighbors, n).unwrap();
        let analytic = lambda_rho_derivative(lambda, &served, &neighbors, n);
        let h = 1e-6;
        let up = lambda_fixed_point(rho + h, &served, &neighbors, n).unwrap();
        let down = lambda_fixed_point(rho - h, &served, &neighbors, n).unwrap();
        let numeric = -(up - down) / (2.0 * h);
        assert!(
            (analytic - numeric).abs() < 1e-4 * analytic.abs(),
            "analytic {analytic} vs numeric {numeric}"
        );
    }

    /// The three vanishing-regularization limits behind the CEA-ZF
    /// deterministic equivalent, checked at rho = 1e-8 with unit-scale
    /// gains: the signal factor tends to 1, the leakage factor to 0, and
    /// the normalization factor to (1-β-β') N / Σ r^α.
    #[test]
    fn vanishing_rho_limits() {
        let n = 64;
        let alpha = 4.0;
        let served_r: Vec<f64> = (0..8).map(|i| 0.6 + 0.15 * i as f64).collect();
        let neighbor_r: Vec<f64> = (0..6).map(|i| 1.0 + 0.2 * i as f64).collect();
        let served: Vec<f64> = served_r.iter().map(|r| r.powf(-alpha)).collect();
        let neighbors: Vec<f64> = neighbor_r.iter().map(|r| r.powf(-alpha)).collect();
        let rho = 1e-8;
        let lambda = lambda_fixed_point(rho, &served, &neighbors, n).unwrap();

        let g_t = served[0];
        let signal_factor = (g_t * lambda / (1.0 + g_t * lambda)).powi(2);
        assert!((signal_factor - 1.0).abs() < 1e-3, "signal factor {signal_factor}");

        let leakage = g_t / (1.0 + g_t * lambda).powi(2);
        assert!(leakage < 1e-3, "leakage {leakage}");

        let d_lambda = lambda_rho_derivative(lambda, &served, &neighbors, n);
        let norm: f64 = served
            .iter()
            .map(|&g| g * d_lambda / (1.0 + g * lambda).powi(2) / n as f64)
            .sum();
        let normalization = norm.recip();
        let beta = served.len() as f64 / n as f64;
        let beta_prime = neighbors.len() as f64 / n as f64;
        let expected = (1.0 - beta - beta_prime) * n as f64 / served_r.iter().map(|r| r.powf(alpha)).sum::<f64>();
        assert!(
            (normalization - expected).abs() < 1e-3 * expected,
            "normalization {normalization} vs {expected}"
        );
    }
}
