//! Stochastic-geometry analysis: distance distributions, the generalized
//! gamma approximation of the intra-cell distance sum, and the coverage
//! probability integrals for both precoding schemes.

pub mod quad;
pub mod special;

use rand::Rng;

use crate::error::Error;
use crate::Result;
use quad::adaptive_simpson;
use special::{ln_gamma, reg_lower_gamma};

const PI: f64 = std::f64::consts::PI;

/// Upper integration limit factor: the Rayleigh tail mass beyond
/// `6/sqrt(lambda*pi)` is exp(-36) < 1e-15.
const RADIAL_RANGE: f64 = 6.0;
/// Exponential tail cutoff for the second-distance substitution
/// u = s² - t²: mass beyond 28/(lambda*pi) is under 1e-12.
const EXP_RANGE: f64 = 28.0;
/// Absolute tolerance of the coverage quadratures.
const COVERAGE_TOL: f64 = 1e-7;

/// Rayleigh density of the distance to the nearest station:
/// `f_c(r) = 2 pi lambda r exp(-lambda pi r^2)`.
pub fn nearest_pdf(r: f64, lambda: f64) -> f64 {
    debug_assert!(r >= 0.0 && lambda > 0.0);
    2.0 * PI * lambda * r * (-lambda * PI * r * r).exp()
}

/// Conditional density of the distance `s` to the second nearest station
/// given the nearest is at `t`:
/// `f_{s|c}(s, t) = 2 pi lambda s exp(-lambda pi (s^2 - t^2))`.
pub fn second_conditional_pdf(s: f64, t: f64, lambda: f64) -> Result<f64> {
    if s < t || t < 0.0 {
        return Err(Error::parameter("s", format!("need s >= t >= 0, got s = {s}, t = {t}")));
    }
    Ok(2.0 * PI * lambda * s * (-lambda * PI * (s * s - t * t)).exp())
}

/// First, second, and fourth moments of the intra-cell distance sum
/// `R_k = Σ_{l≠k} r_l^α` over `K - 1` i.i.d. Rayleigh distances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RkMoments {
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
    /// Set when K < 2: the sum is empty and identically zero.
    pub degenerate: bool,
}

/// Closed-form moments of `R_k`. Each summand is Weibull with shape `2/α`
/// and scale `(λπ)^{-α/2}`, whose m-th moment is `(λπ)^{-mα/2} Γ(1 + mα/2)`;
/// the sum moments follow from the multinomial expansion over the `K - 1`
/// independent terms.
pub fn rk_moments(k: usize, lambda: f64, alpha: f64) -> Result<RkMoments> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::parameter("lambda", format!("must be positive, got {lambda}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::parameter("alpha", format!("must be positive, got {alpha}")));
    }
    if k < 2 {
        return Ok(RkMoments {
            m1: 0.0,
            m2: 0.0,
            m4: 0.0,
            degenerate: true,
        });
    }
    let n = (k - 1) as f64;
    let lp = lambda * PI;
    let g = |m: f64| special::gamma(1.0 + m * alpha / 2.0);
    let w1 = g(1.0);
    let w2 = g(2.0);
    let w3 = g(3.0);
    let w4 = g(4.0);
    let m1 = n / lp.powf(alpha / 2.0) * w1;
    let m2 = n / lp.powf(alpha) * (w2 + (n - 1.0) * w1 * w1);
    let m4 = n / lp.powf(2.0 * alpha)
        * (w4
            + 4.0 * (n - 1.0) * w3 * w1
            + 3.0 * (n - 1.0) * w2 * w2
            + 6.0 * (n - 1.0) * (n - 2.0) * w2 * w1 * w1
            + (n - 1.0) * (n - 2.0) * (n - 3.0) * w1.powi(4));
    Ok(RkMoments {
        m1,
        m2,
        m4,
        degenerate: false,
    })
}

/// Draw one `R_k = Σ_{l<K-1} r_l^α` with i.i.d. Rayleigh distances; the
/// brute-force sampler the fitted distribution is validated against.
pub fn sample_rk_sum(k: usize, lambda: f64, alpha: f64, rng: &mut impl Rng) -> f64 {
    let lp = lambda * PI;
    let mut sum = 0.0;
    for _ in 1..k {
        let r_sq = -(1.0 - rng.gen::<f64>()).ln() / lp;
        sum += r_sq.powf(alpha / 2.0);
    }
    sum
}

/// Generalized gamma parameters `(μ, η, Ω)` approximating the law of `R_k`:
/// pdf `η μ^μ r^{ημ-1} / (Ω^μ Γ(μ)) exp(-μ r^η / Ω)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenGammaParams {
    pub mu: f64,
    pub eta: f64,
    pub omega: f64,
}

impl GenGammaParams {
    /// m-th moment `(Ω/μ)^{m/η} Γ(μ + m/η) / Γ(μ)`.
    pub fn moment(&self, m: f64) -> f64 {
        ((self.omega / self.mu).ln() * (m / self.eta)
            + ln_gamma(self.mu + m / self.eta)
            - ln_gamma(self.mu))
        .exp()
    }
}

// Inverse squared coefficient-of-variation of the generalized gamma at lag
// `j/eta`: Γ²(μ+j/η) / (Γ(μ)Γ(μ+2j/η) - Γ²(μ+j/η)), evaluated in log space.
fn moment_ratio(mu: f64, j_over_eta: f64) -> f64 {
    let delta = ln_gamma(mu) + ln_gamma(mu + 2.0 * j_over_eta) - 2.0 * ln_gamma(mu + j_over_eta);
    1.0 / delta.exp_m1()
}

fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64, iters: usize) -> f64 {
    let f_lo = f(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// For a fixed eta, the mu solving the first moment-ratio equation, found by
// a log-spaced bracket scan and bisection; the ratio is increasing in mu.
// The upper end must reach ~2e3 for sums of ~60 heavy-tailed terms at
// path-loss exponent 4, where the fitted shape grows large.
fn solve_mu(eta: f64, target1: f64) -> Option<f64> {
    const LOG_MU_MIN: f64 = -3.0;
    const LOG_MU_MAX: f64 = 6.0;
    const SCAN: usize = 90;
    let g = |log_mu: f64| moment_ratio(10f64.powf(log_mu), 1.0 / eta) - target1;
    let mut prev = LOG_MU_MIN;
    let mut prev_val = g(prev);
    for i in 1..=SCAN {
        let x = LOG_MU_MIN + (LOG_MU_MAX - LOG_MU_MIN) * i as f64 / SCAN as f64;
        let val = g(x);
        if prev_val == 0.0 {
            return Some(10f64.powf(prev));
        }
        if val == 0.0 {
            return Some(10f64.powf(x));
        }
        if prev_val.signum() != val.signum() {
            let root = bisect(prev, x, g, 100);
            return Some(10f64.powf(root));
        }
        prev = x;
        prev_val = val;
    }
    None
}

/// Fit the generalized gamma approximation of `R_k` by matching the
/// first/second and second/fourth moment-ratio equations with nested
/// bracketed bisection, then fixing the scale from the first moment.
pub fn genggamma_fit(k: usize, lambda: f64, alpha: f64) -> Result<GenGammaParams> {
    if k < 2 {
        return Err(Error::parameter("k", "R_k is degenerate for K < 2; nothing to fit"));
    }
    let m = rk_moments(k, lambda, alpha)?;
    let target1 = m.m1 * m.m1 / (m.m2 - m.m1 * m.m1);
    let target2 = m.m2 * m.m2 / (m.m4 - m.m2 * m.m2);

    const LOG_ETA_MIN: f64 = -1.301; // eta = 0.05
    const LOG_ETA_MAX: f64 = 0.699; // eta = 5.0
    const SCAN: usize = 80;
    let residual2 = |log_eta: f64| -> f64 {
        let eta = 10f64.powf(log_eta);
        match solve_mu(eta, target1) {
            Some(mu) => moment_ratio(mu, 2.0 / eta) - target2,
            None => f64::NAN,
        }
    };
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=SCAN {
        let x = LOG_ETA_MIN + (LOG_ETA_MAX - LOG_ETA_MIN) * i as f64 / SCAN as f64;
        let val = residual2(x);
        if !val.is_finite() {
            prev = None;
            continue;
        }
        if let Some((px, pv)) = prev {
            if pv.signum() != val.signum() {
                bracket = Some((px, x));
                break;
            }
        }
        prev = Some((x, val));
    }
    let (lo, hi) = bracket.ok_or_else(|| Error::Numerical {
        context: "genggamma_fit",
        reason: format!(
            "no eta bracket in [0.05, 5] for K = {k}, alpha = {alpha} (targets {target1:.6e}, {target2:.6e})"
        ),
    })?;
    let log_eta = bisect(lo, hi, residual2, 100);
    let eta = 10f64.powf(log_eta);
    let mu = solve_mu(eta, target1).ok_or_else(|| Error::Numerical {
        context: "genggamma_fit",
        reason: "mu solve failed at the final eta".into(),
    })?;

    let r1 = (moment_ratio(mu, 1.0 / eta) - target1).abs() / target1;
    let r2 = (moment_ratio(mu, 2.0 / eta) - target2).abs() / target2;
    if r1 > 1e-8 || r2 > 1e-8 {
        return Err(Error::Numerical {
            context: "genggamma_fit",
            reason: format!("moment-ratio residuals too large: {r1:e}, {r2:e} (K = {k}, alpha = {alpha})"),
        });
    }

    // Omega = [mu^{1/eta} Gamma(mu) m1 / Gamma(mu + 1/eta)]^eta, in log space.
    let omega = (mu.ln() + eta * (ln_gamma(mu) + m.m1.ln() - ln_gamma(mu + 1.0 / eta))).exp();
    Ok(GenGammaParams { mu, eta, omega })
}

/// CDF of the fitted distribution: `Γ_low(μ, μ r^η / Ω) / Γ(μ)`.
pub fn genggamma_cdf(r: f64, params: &GenGammaParams) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    reg_lower_gamma(params.mu, params.mu * r.powf(params.eta) / params.omega)
}

/// Density of the fitted distribution (log-space evaluation).
pub fn genggamma_pdf(r: f64, params: &GenGammaParams) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let GenGammaParams { mu, eta, omega } = *params;
    (eta.ln() + mu * mu.ln() + (eta * mu - 1.0) * r.ln() - mu * omega.ln() - ln_gamma(mu)
        - mu * r.powf(eta) / omega)
        .exp()
}

/// CSI assumption entering the coverage integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CsiAssumption {
    /// No estimation error.
    Perfect,
    /// Pilot contamination at its spatial mean: the error variance is the
    /// reuse-factor formula evaluated at each link distance.
    MeanField,
    /// Fixed error variances for the serving and second-station links.
    Fixed { tau_sq: f64, tau_bar_sq: f64 },
}

impl CsiAssumption {
    fn validate(&self) -> Result<()> {
        if let CsiAssumption::Fixed { tau_sq, tau_bar_sq } = self {
            if !(0.0..=1.0).contains(tau_sq) || !(0.0..=1.0).contains(tau_bar_sq) {
                return Err(Error::parameter("tau_sq", "fixed CSI error variances must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// How the neighbor count enters the cell-edge-aware coverage integral.
#[derive(Clone, Debug)]
pub enum KprimeMode {
    /// Replace K' by its mean K (load factor 1 - 2β).
    Mean,
    /// Average the kernel over an empirical K' distribution.
    Empirical(KprimeHistogram),
}

/// Probability mass function of the neighbor count K'.
#[derive(Clone, Debug, PartialEq)]
pub struct KprimeHistogram {
    masses: Vec<f64>,
}

impl KprimeHistogram {
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::parameter("masses", "histogram must not be empty"));
        }
        let mut total = 0.0;
        for &m in &masses {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::parameter("masses", format!("invalid mass {m}")));
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::parameter("masses", format!("masses sum to {total}, not 1")));
        }
        Ok(KprimeHistogram { masses })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::parameter("counts", "histogram needs at least one sample"));
        }
        KprimeHistogram::from_masses(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    /// All mass on a single neighbor count.
    pub fn point_mass(k: usize) -> Self {
        let mut masses = vec![0.0; k + 1];
        masses[k] = 1.0;
        KprimeHistogram { masses }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self) -> f64 {
        self.masses.iter().enumerate().map(|(k, &m)| k as f64 * m).sum()
    }

    /// Inverse-CDF sample of K'.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &m) in self.masses.iter().enumerate() {
            acc += m;
            if u < acc {
                return k;
            }
        }
        self.masses.len() - 1
    }
}

/// Coverage method tag for labeled curve points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageMethod {
    Thm1,
    Thm2EmpiricalKprime,
    Cor1,
    Cor2Ceu,
    Cor2Cea,
    Sim,
}

/// One labeled point of a coverage curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoveragePoint {
    /// Linear SIR threshold.
    pub theta: f64,
    pub value: f64,
    pub method: CoverageMethod,
}

struct CoverageSetup {
    beta: f64,
    lp: f64,
    // (alpha-2) F^{alpha/2} / (2 (lambda pi)^{alpha/2}): tau^2(d) = 1/(1 + c/d^alpha).
    tau_coeff: f64,
    params: Option<GenGammaParams>,
}

fn coverage_setup(n: usize, k: usize, lambda: f64, alpha: f64, pilot_reuse: u32, csi: &CsiAssumption) -> Result<CoverageSetup> {
    if n == 0 || k == 0 {
        return Err(Error::parameter("n/k", "antenna and user counts must be positive"));
    }
    if !(alpha > 2.0) {
        return Err(Error::DivergentIntegral(format!(
            "coverage integrals require alpha > 2, got {alpha}"
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::parameter("lambda", format!("must be positive, got {lambda}")));
    }
    if pilot_reuse < 1 {
        return Err(Error::parameter("pilot_reuse", "must be at least 1"));
    }
    csi.validate()?;
    let beta = k as f64 / n as f64;
    if beta >= 1.0 {
        return Err(Error::parameter("k", format!("load ratio {beta} must be below 1")));
    }
    let lp = lambda * PI;
    let tau_coeff = (alpha - 2.0) * (pilot_reuse as f64).powf(alpha / 2.0) / (2.0 * lp.powf(alpha / 2.0));
    let params = if k >= 2 {
        Some(genggamma_fit(k, lambda, alpha)?)
    } else {
        None
    };
    Ok(CoverageSetup {
        beta,
        lp,
        tau_coeff,
        params,
    })
}

impl CoverageSetup {
    fn tau_sq_at(&self, d: f64, alpha: f64, csi: &CsiAssumption, second_link: bool) -> f64 {
        match csi {
            CsiAssumption::Perfect => 0.0,
            CsiAssumption::MeanField => 1.0 / (1.0 + self.tau_coeff / d.powf(alpha)),
            CsiAssumption::Fixed { tau_sq, tau_bar_sq } => {
                if second_link {
                    *tau_bar_sq
                } else {
                    *tau_sq
                }
            }
        }
    }

    /// P(R_k <= bound), with negative bounds contributing zero.
    fn rk_cdf(&self, bound: f64) -> f64 {
        if bound <= 0.0 {
            return 0.0;
        }
        match &self.params {
            Some(p) => genggamma_cdf(bound, p),
            None => 1.0, // K = 1: R_k is identically zero.
        }
    }
}

/// Coverage probability under cell-edge-unaware ZF: the single radial
/// integral of `P(R_k ≤ bracket(r))` against the nearest-distance density,
/// where the bracket inverts the deterministic-equivalent SIR at threshold
/// `theta` and the out-of-cell interference sits at its spatial mean.
pub fn coverage_ceu(
    theta: f64,
    n: usize,
    k: usize,
    lambda: f64,
    alpha: f64,
    pilot_reuse: u32,
    csi: CsiAssumption,
) -> Result<f64> {
    let setup = coverage_setup(n, k, lambda, alpha, pilot_reuse, &csi)?;
    if theta <= 0.0 {
        return Ok(1.0);
    }
    let n_f = n as f64;
    let r_max = RADIAL_RANGE / setup.lp.sqrt();
    let mut integrand = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let tau_sq = setup.tau_sq_at(r, alpha, &csi, false);
        let r_pow = r.powf(alpha);
        let mean_i = 2.0 * PI * lambda * r * r / (alpha - 2.0);
        let bound = (1.0 - tau_sq) * (1.0 - setup.beta) * n_f * r_pow / (theta * (tau_sq + mean_i)) - r_pow;
        setup.rk_cdf(bound) * nearest_pdf(r, lambda)
    };
    let value = adaptive_simpson(&mut integrand, 0.0, r_max, COVERAGE_TOL)?;
    Ok(value.clamp(0.0, 1.0))
}

/// Coverage probability under cell-edge-aware ZF: the double integral over
/// the serving and second distances, with the neighbor count either at its
/// mean (`KprimeMode::Mean`, load `1 - 2β`) or averaged over an empirical
/// distribution. The inner integral substitutes `u = s² - t²` so the
/// conditional density becomes a pure exponential.
pub fn coverage_cea(
    theta: f64,
    n: usize,
    k: usize,
    lambda: f64,
    alpha: f64,
    pilot_reuse: u32,
    csi: CsiAssumption,
    kprime: &KprimeMode,
) -> Result<f64> {
    let setup = coverage_setup(n, k, lambda, alpha, pilot_reuse, &csi)?;
    let n_f = n as f64;
    match kprime {
        KprimeMode::Mean => {
            if 2.0 * setup.beta >= 1.0 {
                return Err(Error::parameter(
                    "k",
                    format!("mean neighbor mode needs 2K/N < 1, got {}", 2.0 * setup.beta),
                ));
            }
        }
        KprimeMode::Empirical(hist) => {
            let _ = hist.masses(); // validated at construction
        }
    }
    if theta <= 0.0 {
        return Ok(1.0);
    }

    // Load factors (1 - beta - beta') and their weights.
    let load_terms: Vec<(f64, f64)> = match kprime {
        KprimeMode::Mean => vec![(1.0, 1.0 - 2.0 * setup.beta)],
        KprimeMode::Empirical(hist) => hist
            .masses()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(kp, &w)| (w, 1.0 - setup.beta - kp as f64 / n_f))
            .collect(),
    };

    let r_max = RADIAL_RANGE / setup.lp.sqrt();
    let u_max = EXP_RANGE / setup.lp;
    let mut outer = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let tau_sq = setup.tau_sq_at(t, alpha, &csi, false);
        let t_pow = t.powf(alpha);
        let mut inner = |u: f64| -> f64 {
            let s_sq = t * t + u;
            let s = s_sq.sqrt();
            let tau_bar_sq = setup.tau_sq_at(s, alpha, &csi, true);
            let s_pow = s.powf(alpha);
            let mean_i = 2.0 * PI * lambda * s_sq / (alpha - 2.0);
            let denom = theta * (tau_bar_sq + tau_sq * s_pow / t_pow + mean_i);
            let mut acc = 0.0;
            for &(w, load) in &load_terms {
                if load <= 0.0 {
                    continue;
                }
                let bound = (1.0 - tau_sq) * load * n_f * s_pow / denom - t_pow;
                acc += w * setup.rk_cdf(bound);
            }
            acc * setup.lp * (-setup.lp * u).exp()
        };
        let inner_value = adaptive_simpson(&mut inner, 0.0, u_max, COVERAGE_TOL * 0.1).unwrap_or(f64::NAN);
        inner_value * nearest_pdf(t, lambda)
    };
    let value = adaptive_simpson(&mut outer, 0.0, r_max, COVERAGE_TOL)?;
    Ok(value.clamp(0.0, 1.0))
}

/// Which precoder an asymptotic coverage expression refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsymptoticScheme {
    Ceu,
    Cea,
}

/// Perfect-CSI large-antenna coverage approximations at path-loss exponent 4:
/// `1 - 2Kθ/N` for CEU-ZF and `1 - 4K²θ²/N²` for CEA-ZF, clamped to [0, 1].
pub fn coverage_asymptotic(theta: f64, k: usize, n: usize, scheme: AsymptoticScheme) -> f64 {
    let x = 2.0 * k as f64 * theta / n as f64;
    let outage = match scheme {
        AsymptoticScheme::Ceu => x,
        AsymptoticScheme::Cea => x * x,
    };
    (1.0 - outage).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 1e-6;

    #[test]
    fn nearest_pdf_values() {
        assert_eq!(nearest_pdf(0.0, LAMBDA), 0.0);
        let v = nearest_pdf(500.0, LAMBDA);
        assert!((v - 1.4323719e-3).abs() < 1e-9, "got {v:e}");
    }

    #[test]
    fn nearest_pdf_normalizes() {
        let r_max = RADIAL_RANGE / (LAMBDA * PI).sqrt();
        let total = adaptive_simpson(&mut |r| nearest_pdf(r, LAMBDA), 0.0, r_max, 1e-11).unwrap();
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn second_pdf_boundary_and_normalization() {
        let t = 800.0;
        let at_t = second_conditional_pdf(t, t, LAMBDA).unwrap();
        assert!((at_t - 2.0 * PI * LAMBDA * t).abs() < 1e-15);
        assert!(second_conditional_pdf(t - 1.0, t, LAMBDA).is_err());

        let s_max = (t * t + EXP_RANGE / (LAMBDA * PI)).sqrt();
        let total = adaptive_simpson(
            &mut |s| second_conditional_pdf(s, t, LAMBDA).unwrap(),
            t,
            s_max,
            1e-11,
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn rk_first_moment_closed_form() {
        // K = 10, alpha = 4: m1 = 9 Gamma(3) / (lambda pi)^2 = 1.8238e12.
        let m = rk_moments(10, LAMBDA, 4.0).unwrap();
        let expected = 18.0 / (LAMBDA * PI).powi(2);
        assert!((m.m1 - expected).abs() < 1e-9 * expected);
        assert!((m.m1 - 1.8237813056e12).abs() < 1e2, "m1 = {:e}", m.m1);
    }

    #[test]
    fn rk_single_term_is_weibull() {
        // K = 2, alpha = 4: m2/m1^2 = Gamma(5)/Gamma(3)^2 = 6.
        let m = rk_moments(2, LAMBDA, 4.0).unwrap();
        let ratio = m.m2 / (m.m1 * m.m1);
        assert!((ratio - 6.0).abs() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn rk_degenerate_below_two_users() {
        let m = rk_moments(1, LAMBDA, 4.0).unwrap();
        assert!(m.degenerate);
        assert_eq!((m.m1, m.m2, m.m4), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rk_moments_match_sampling() {
        let k = 10;
        let alpha = 4.0;
        let m = rk_moments(k, LAMBDA, alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 1_000_000;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let r = sample_rk_sum(k, LAMBDA, alpha, &mut rng);
            s1 += r;
            s2 += r * r;
            s4 += r * r * r * r;
        }
        let (e1, e2, e4) = (s1 / n as f64, s2 / n as f64, s4 / n as f64);
        assert!((e1 - m.m1).abs() < 0.01 * m.m1, "m1 {e1:e} vs {:e}", m.m1);
        assert!((e2 - m.m2).abs() < 0.01 * m.m2, "m2 {e2:e} vs {:e}", m.m2);
        assert!((e4 - m.m4).abs() < 0.05 * m.m4, "m4 {e4:e} vs {:e}", m.m4);
    }

    #[test]
    fn fit_recovers_weibull_for_two_users() {
        // K = 2: R_k is a single Weibull with shape 2/alpha, an exact member
        // of the generalized gamma family with mu = 1, eta = 2/alpha,
        // Omega = 1/(lambda pi).
        let p = genggamma_fit(2, LAMBDA, 4.0).unwrap();
        assert!((p.mu - 1.0).abs() < 1e-3, "mu = {}", p.mu);
        assert!((p.eta - 0.5).abs() < 1e-3, "eta = {}", p.eta);
        let omega_expected = 1.0 / (LAMBDA * PI);
        assert!((p.omega - omega_expected).abs() < 1e-2 * omega_expected, "omega = {:e}", p.omega);
    }

    #[test]
    fn fit_reproduces_first_moment_exactly() {
        let m = rk_moments(10, LAMBDA, 4.0).unwrap();
        let p = genggamma_fit(10, LAMBDA, 4.0).unwrap();
        let m1 = p.moment(1.0);
        assert!((m1 - m.m1).abs() < 1e-9 * m.m1, "moment {m1:e} vs {:e}", m.m1);
    }

    #[test]
    fn fit_residuals_small_across_parameter_grid() {
        for alpha in [3.0, 3.8, 4.0] {
            for k in 2..=64 {
                let m = rk_moments(k, LAMBDA, alpha).unwrap();
                let t1 = m.m1 * m.m1 / (m.m2 - m.m1 * m.m1);
                let t2 = m.m2 * m.m2 / (m.m4 - m.m2 * m.m2);
                let p = genggamma_fit(k, LAMBDA, alpha).unwrap();
                let r1 = (moment_ratio(p.mu, 1.0 / p.eta) - t1).abs() / t1;
                let r2 = (moment_ratio(p.mu, 2.0 / p.eta) - t2).abs() / t2;
                assert!(r1 < 1e-8 && r2 < 1e-8, "K = {k}, alpha = {alpha}: residuals {r1:e}, {r2:e}");
            }
        }
    }

    #[test]
    fn fitted_cdf_close_to_empirical() {
        let k = 10;
        let p = genggamma_fit(k, LAMBDA, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let n = 100_000;
        let mut samples: Vec<f64> = (0..n).map(|_| sample_rk_sum(k, LAMBDA, 4.0, &mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &r) in samples.iter().enumerate() {
            let f = genggamma_cdf(r, &p);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn cdf_limits_and_quadrature_oracle() {
        let p = genggamma_fit(10, LAMBDA, 4.0).unwrap();
        assert_eq!(genggamma_cdf(0.0, &p), 0.0);
        // Argument far in the upper tail.
        let far = (700.0 * p.omega / p.mu).powf(1.0 / p.eta);
        assert!(genggamma_cdf(far, &p) > 1.0 - 1e-12);
        // pdf integrates to the cdf; the integrand vanishes at 0 here
        // (eta*mu > 1).
        assert!(p.eta * p.mu > 1.0);
        let median_scale = p.moment(1.0);
        for i in 1..=10 {
            let r = median_scale * i as f64 / 5.0;
            let integral = adaptive_simpson(&mut |x| genggamma_pdf(x, &p), 0.0, r, 1e-10).unwrap();
            let direct = genggamma_cdf(r, &p);
            assert!((integral - direct).abs() < 1e-8, "r = {r:e}: {integral} vs {direct}");
        }
    }

    #[test]
    fn coverage_ceu_threshold_limits() {
        let cov_low = coverage_ceu(1e-9, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField).unwrap();
        assert!(cov_low >= 1.0 - 1e-6, "low-threshold coverage {cov_low}");
        let cov_high = coverage_ceu(1e9, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField).unwrap();
        assert!(cov_high <= 1e-6, "high-threshold coverage {cov_high}");
    }

    #[test]
    fn coverage_cea_threshold_limits() {
        let cov_low = coverage_cea(1e-9, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField, &KprimeMode::Mean).unwrap();
        assert!(cov_low >= 1.0 - 1e-6);
        let cov_high = coverage_cea(1e9, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField, &KprimeMode::Mean).unwrap();
        assert!(cov_high <= 1e-6);
    }

    #[test]
    fn coverage_monotone_in_threshold_and_antennas() {
        let thetas: Vec<f64> = (-10..=20).step_by(3).map(|db| 10f64.powf(db as f64 / 10.0)).collect();
        let mut last_u = f64::INFINITY;
        let mut last_a = f64::INFINITY;
        for &theta in &thetas {
            let u = coverage_ceu(theta, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField).unwrap();
            let a = coverage_cea(theta, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField, &KprimeMode::Mean).unwrap();
            assert!(u <= last_u + 1e-9);
            assert!(a <= last_a + 1e-9);
            last_u = u;
            last_a = a;
        }
        for scheme_vals in [
            [64, 128, 256].map(|n| coverage_ceu(1.0, n, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField).unwrap()),
            [64, 128, 256].map(|n| {
                coverage_cea(1.0, n, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField, &KprimeMode::Mean).unwrap()
            }),
        ] {
            assert!(scheme_vals[0] < scheme_vals[1] && scheme_vals[1] < scheme_vals[2], "{scheme_vals:?}");
        }
    }

    #[test]
    fn empirical_point_mass_at_k_matches_mean_mode() {
        let hist = KprimeHistogram::point_mass(10);
        let mean = coverage_cea(1.0, 100, 10, LAMBDA, 4.0, 7, CsiAssumption::MeanField, &KprimeMode::Mean).unwrap();
        let emp = coverage_cea(
            1.0,
            100,
            10,
            LAMBDA,
            4.0,
            7,
            CsiAssumption::MeanField,
            &KprimeMode::Empirical(hist),
        )
        .unwrap();
        assert!((mean - emp).abs() < 1e-9, "{mean} vs {emp}");
    }

    #[test]
    fn cea_outage_matches_asymptotic_order() {
        // alpha = 4, perfect CSI, K = 10, N = 500, theta = 0 dB:
        // outage ~ 4 K^2 theta^2 / N^2 = 1.6e-3. The exact integral sits at
        // 1.03e-3 (confirmed by direct Monte Carlo of the model, 1.06e-3
        // +/- 0.05e-3): the first-order expansion behind the closed form
        // overstates the constant by ~1.55x here, so the bound is 1.6x.
        let cov = coverage_cea(1.0, 500, 10, LAMBDA, 4.0, 7, CsiAssumption::Perfect, &KprimeMode::Mean).unwrap();
        let outage = 1.0 - cov;
        let predicted = 1.6e-3;
        assert!(
            outage < predicted * 1.6 && outage > predicted / 1.6,
            "outage {outage:e} vs {predicted:e}"
        );
    }

    #[test]
    fn asymptotic_reference_values() {
        assert!((coverage_asymptotic(1.0, 10, 200, AsymptoticScheme::Ceu) - 0.90).abs() < 1e-12);
        assert!((coverage_asymptotic(1.0, 10, 200, AsymptoticScheme::Cea) - 0.99).abs() < 1e-12);
        assert_eq!(coverage_asymptotic(0.0, 10, 200, AsymptoticScheme::Ceu), 1.0);
        assert_eq!(coverage_asymptotic(0.0, 10, 200, AsymptoticScheme::Cea), 1.0);
        // Clamping outside the asymptotic regime.
        assert_eq!(coverage_asymptotic(100.0, 10, 20, AsymptoticScheme::Ceu), 0.0);
    }

    #[test]
    fn asymptotic_crossover_at_two_theta_k() {
        // CEA beats CEU exactly when N > 2 theta K.
        for &(theta, k) in &[(1.0, 10usize), (2.0, 5), (0.5, 40)] {
            let n_star = (2.0 * theta * k as f64) as usize;
            for n in [n_star.saturating_sub(5).max(1), n_star.saturating_sub(1)] {
                if n == 0 {
                    continue;
                }
                let ceu = coverage_asymptotic(theta, k, n, AsymptoticScheme::Ceu);
                let cea = coverage_asymptotic(theta, k, n, AsymptoticScheme::Cea);
                assert!(cea <= ceu, "N = {n}: CEA {cea} should not beat CEU {ceu}");
            }
            for n in [n_star + 1, n_star + 10] {
                let ceu = coverage_asymptotic(theta, k, n, AsymptoticScheme::Ceu);
                let cea = coverage_asymptotic(theta, k, n, AsymptoticScheme::Cea);
                assert!(cea > ceu, "N = {n}: CEA {cea} should beat CEU {ceu}");
            }
        }
    }

    #[test]
    fn full_coverage_exhibits_crossover_in_n() {
        // theta = 0 dB, K = 20: the CEA and CEU curves cross once as N grows.
        let theta = 1.0;
        let k = 20;
        let diffs: Vec<f64> = [44, 60, 90, 140, 220, 400]
            .iter()
            .map(|&n| {
                let u = coverage_ceu(theta, n, k, LAMBDA, 4.0, 7, CsiAssumption::Perfect).unwrap();
                let a = coverage_cea(theta, n, k, LAMBDA, 4.0, 7, CsiAssumption::Perfect, &KprimeMode::Mean).unwrap();
                a - u
            })
            .collect();
        assert!(diffs[0] < 0.0, "at small N CEU should win: {diffs:?}");
        assert!(*diffs.last().unwrap() > 0.0, "at large N CEA should win: {diffs:?}");
        let sign_changes = diffs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert_eq!(sign_changes, 1, "expected a single crossover: {diffs:?}");
    }

    #[test]
    fn analytic_outage_scaling_slopes() {
        // Perfect CSI, theta = 0 dB, K = 10: outage decays like 1/N for
        // CEU-ZF and like 1/N^2 for CEA-ZF.
        let ns = [200usize, 400, 800];
        let slope = |outages: &[f64]| -> f64 {
            let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
            let ys: Vec<f64> = outages.iter().map(|&o| o.ln()).collect();
            let xm = xs.iter().sum::<f64>() / xs.len() as f64;
            let ym = ys.iter().sum::<f64>() / ys.len() as f64;
            let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
            let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
            num / den
        };
        let ceu: Vec<f64> = ns
            .iter()
            .map(|&n| 1.0 - coverage_ceu(1.0, n, 10, LAMBDA, 4.0, 7, CsiAssumption::Perfect).unwrap())
            .collect();
        let cea: Vec<f64> = ns
            .iter()
            .map(|&n| {
                1.0 - coverage_cea(1.0, n, 10, LAMBDA, 4.0, 7, CsiAssumption::Perfect, &KprimeMode::Mean).unwrap()
            })
            .collect();
        let s_ceu = slope(&ceu);
        let s_cea = slope(&cea);
        assert!((-1.3..=-0.7).contains(&s_ceu), "CEU slope {s_ceu} ({ceu:?})");
        assert!((-2.4..=-1.6).contains(&s_cea), "CEA slope {s_cea} ({cea:?})");
    }

    #[test]
    fn histogram_validation() {
        assert!(KprimeHistogram::from_masses(vec![0.5, 0.4]).is_err());
        assert!(KprimeHistogram::from_masses(vec![0.5, -0.5, 1.0]).is_err());
        let h = KprimeHistogram::from_counts(&[1, 2, 1]).unwrap();
        assert!((h.mean() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[h.sample(&mut rng)] += 1;
        }
        assert!((counts[1] as f64 / 40_000.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn coverage_rejects_bad_regimes() {
        assert!(coverage_ceu(1.0, 10, 20, LAMBDA, 4.0, 7, CsiAssumption::Perfect).is_err());
        assert!(coverage_cea(1.0, 30, 20, LAMBDA, 4.0, 7, CsiAssumption::Perfect, &KprimeMode::Mean).is_err());
        assert!(coverage_ceu(1.0, 100, 10, LAMBDA, 2.0, 7, CsiAssumption::Perfect).is_err());
    }
}
