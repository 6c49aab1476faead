//! Per-realization simulation pipeline.
//!
//! A realization splits in two stages that draw from the same stream:
//!
//! 1. [`build_skeleton`] — the geometry: station process ranked around the
//!    typical user at the origin, the serving cell's scheduled users, the
//!    neighbor structure of the serving and second stations, the exact
//!    interferers' cell geometry, and the far-station distances.
//! 2. [`evaluate_skeleton`] — the fading: estimated-channel rows, the
//!    zero-forcing powers toward the typical user for each scheme, and the
//!    hybrid interference sum.
//!
//! The split lets the conditioned validation freeze one skeleton and Monte
//! Carlo the fading alone, which is exactly the conditioning under which the
//! large-system SIR limits are stated.
//!
//! Interference is hybrid: the nearest `exact_interferers` stations (always
//! including the second nearest) get fully realized precoders and crosstalk;
//! stations beyond that contribute Gamma(K, 1/K) effective fading on their
//! path loss, which is statistically indistinguishable at that range.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::analysis::KprimeHistogram;
use crate::channel::{csi_error_variance, exact_csi_error_variance, sample_fading_into};
use crate::error::Error;
use crate::geometry::{sample_ppp_with, GridIndex, Point, Window};
use crate::precoding::{zf_column_powers, RowMatrix};
use crate::sir::SirSample;
use crate::Result;

use super::{CsiMode, ExperimentConfig, Scheme};

// Neighbor-collection radius around a station, in units of 1/sqrt(lambda pi):
// hosts of neighbor users beyond this are vanishingly rare.
const ADJ_RADIUS_SIR: f64 = 4.5;
// Tighter-tolerance radius for the unconditioned neighbor-count statistics.
const ADJ_RADIUS_HIST: f64 = 6.0;
// Window radius of the dedicated neighbor-count realizations.
const HIST_WINDOW: f64 = 14.0;
// Explicit-pilot contaminators are truncated at this multiple of the
// exclusion radius (tail of the mean below 0.1%).
const PILOT_TRUNCATION: f64 = 40.0;

pub(crate) struct RealizationResult {
    /// Indexed by [`Scheme::index`]; only configured schemes are filled.
    pub sir: [Option<SirSample>; 2],
    /// Out-of-cell interference excluding the second station, per scheme.
    pub i_rest: [f64; 2],
    /// Second station's crosstalk, per scheme.
    pub i_second: [f64; 2],
    pub t: f64,
    pub s: f64,
    /// Realized intra-cell distance sum of the serving cell.
    pub rk_sum: f64,
    pub tau_sq: f64,
    pub tau_bar_sq: f64,
    /// Serving station's neighbor count actually nulled (after any
    /// degrees-of-freedom truncation).
    pub kprime_serving: usize,
    pub truncated: bool,
}

/// A neighbor-user row of some station's extended cell; the typical user's
/// row must stay correlated with its true fading.
struct NeighborRow {
    dist: f64,
    is_typical: bool,
}

struct InterfererSkeleton {
    /// Distance from the typical user.
    dist: f64,
    /// Distances of its served users.
    served: Vec<f64>,
    /// Its neighbor rows (only under cell-edge-aware precoding).
    neighbors: Vec<NeighborRow>,
}

/// Everything about one realization that is fixed by geometry (and pilot
/// positions), before any data-phase fading is drawn.
pub(crate) struct GeometrySkeleton {
    pub t: f64,
    pub s: f64,
    mates: Vec<f64>,
    pub rk_sum: f64,
    /// Serving station's neighbor rows (degrees-of-freedom truncation
    /// already applied).
    serving_neighbors: Vec<f64>,
    pub kprime_serving: usize,
    /// Exact interferers in rank order; index 0 is the second station.
    interferers: Vec<InterfererSkeleton>,
    /// Distances of the far stations beyond the exact set.
    far_dists: Vec<f64>,
    pub tau_sq: f64,
    pub tau_bar_sq: f64,
    truncated: bool,
}

pub(crate) fn simulate_realization(
    cfg: &ExperimentConfig,
    seed_stream: u64,
    hist: Option<&KprimeHistogram>,
) -> Result<RealizationResult> {
    let mut rng = stream_rng(cfg.seed, seed_stream);
    let skeleton = build_skeleton(cfg, hist, &mut rng)?;
    evaluate_skeleton(cfg, &skeleton, &mut rng)
}

/// Draw the geometry stage of one realization.
pub(crate) fn build_skeleton(
    cfg: &ExperimentConfig,
    hist: Option<&KprimeHistogram>,
    rng: &mut impl Rng,
) -> Result<GeometrySkeleton> {
    let lp = cfg.lambda * std::f64::consts::PI;
    let unit = 1.0 / lp.sqrt();
    let window = Window::centered(cfg.window_radius)?;

    // Station process, ranked by distance from the typical user.
    let bs = sample_ppp_with(cfg.lambda, window, rng)?;
    if bs.len() < cfg.exact_interferers + 2 {
        return Err(Error::Geometry(format!(
            "only {} stations in the window, need {}",
            bs.len(),
            cfg.exact_interferers + 2
        )));
    }
    let grid = GridIndex::build(&bs, window, (1.0 / cfg.lambda).sqrt());
    let mut order: Vec<(usize, f64)> = bs.iter().map(|p| p.dist(Point::ORIGIN)).enumerate().collect();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let (serving, t) = order[0];
    let (second, s) = order[1];
    if s > window.radius / 3.0 {
        return Err(Error::Geometry(format!("typical cell touches the window boundary (s = {s:.0} m)")));
    }

    let use_cea = cfg.schemes.contains(&Scheme::CeaZf);
    let k = cfg.k_served;
    let n = cfg.n_antennas;

    // Scheduled users of the cells around the serving (and, for CEA-ZF,
    // second) station: the typical user plus K-1 mates in the serving cell,
    // K uniform users in each other local cell. Plain ZF runs need only the
    // serving cell.
    let proposal = 3.5 * unit;
    let adj = ADJ_RADIUS_SIR * unit;
    let local_cells = if use_cea {
        let mut cells = grid.within_radius(bs[serving], adj);
        for idx in grid.within_radius(bs[second], adj) {
            if !cells.contains(&idx) {
                cells.push(idx);
            }
        }
        cells.sort_unstable();
        cells
    } else {
        vec![serving]
    };

    // Per local cell: scheduled users as (own distance, second index,
    // second distance).
    let mut mates: Vec<f64> = Vec::with_capacity(k - 1);
    let mut per_cell_served: Vec<Vec<f64>> = Vec::with_capacity(local_cells.len());
    let mut serving_neighbors: Vec<f64> = Vec::new();
    let mut second_neighbors: Vec<NeighborRow> = vec![NeighborRow {
        dist: s,
        is_typical: true,
    }];
    for &cell in &local_cells {
        let want = if cell == serving { k - 1 } else { k };
        let mut served = Vec::with_capacity(k);
        if cell == serving {
            served.push(t); // the typical user itself
        }
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < want {
            attempts += 1;
            if attempts > 4000 * want {
                return Err(Error::Geometry(format!("cell {cell} rejection sampling stalled")));
            }
            let p = crate::geometry::uniform_in_disk(bs[cell], proposal, rng);
            let Some([first, second_hit]) = grid.two_nearest(p) else {
                return Err(Error::Geometry("fewer than two stations in the grid".into()));
            };
            if first.0 != cell {
                continue;
            }
            accepted += 1;
            served.push(first.1);
            if cell == serving {
                mates.push(first.1);
            }
            if second_hit.0 == serving {
                serving_neighbors.push(second_hit.1);
            } else if second_hit.0 == second {
                second_neighbors.push(NeighborRow {
                    dist: second_hit.1,
                    is_typical: false,
                });
            }
        }
        per_cell_served.push(served);
    }
    let rk_sum: f64 = mates.iter().map(|d| d.powf(cfg.alpha)).sum();

    // CSI error variances of the typical user's two estimated links.
    let (tau_sq, tau_bar_sq) = match cfg.csi_mode {
        CsiMode::Perfect => (0.0, 0.0),
        CsiMode::MeanField => (
            csi_error_variance(t, cfg.lambda, cfg.pilot_reuse, cfg.alpha)?,
            csi_error_variance(s, cfg.lambda, cfg.pilot_reuse, cfg.alpha)?,
        ),
        CsiMode::Fixed { tau_sq, tau_bar_sq } => (tau_sq, tau_bar_sq),
        CsiMode::ExplicitPilot => (sample_pilot_tau(t, cfg, rng)?, sample_pilot_tau(s, cfg, rng)?),
    };

    let mut truncated = false;
    let kprime_serving = if use_cea {
        truncate_neighbor_dists(&mut serving_neighbors, k, n, &mut truncated);
        serving_neighbors.len()
    } else {
        serving_neighbors.len()
    };

    // Exact interferers, nearest first (rank 1 is the second station).
    let exact_n = cfg.exact_interferers.min(order.len() - 1);
    let mut interferers = Vec::with_capacity(exact_n);
    for &(bs_idx, dist) in &order[1..=exact_n] {
        let served = match local_cells.binary_search(&bs_idx) {
            Ok(slot) => per_cell_served[slot].clone(),
            Err(_) => sample_cell_distances(&grid, bs[bs_idx], bs_idx, k, proposal, rng)?,
        };
        let mut neighbors: Vec<NeighborRow> = if !use_cea {
            Vec::new()
        } else if bs_idx == second {
            std::mem::take(&mut second_neighbors)
        } else {
            // Other interferers: neighbor count from the empirical
            // distribution, distances from the second-nearest law.
            let hist = hist
                .ok_or_else(|| Error::Consistency("cell-edge-aware run without a neighbor-count histogram".into()))?;
            let kp = hist.sample(rng);
            (0..kp)
                .map(|_| {
                    let e: f64 = -rng.gen::<f64>().ln() - rng.gen::<f64>().ln();
                    NeighborRow {
                        dist: (e / lp).sqrt(),
                        is_typical: false,
                    }
                })
                .collect()
        };
        if use_cea {
            truncate_neighbor_rows(&mut neighbors, k, n, &mut truncated);
        }
        interferers.push(InterfererSkeleton {
            dist,
            served,
            neighbors,
        });
    }

    let far_dists: Vec<f64> = order[exact_n + 1..].iter().map(|&(_, d)| d).collect();

    Ok(GeometrySkeleton {
        t,
        s,
        mates,
        rk_sum,
        serving_neighbors,
        kprime_serving,
        interferers,
        far_dists,
        tau_sq,
        tau_bar_sq,
        truncated,
    })
}

/// Draw the fading stage and assemble the SIR of every configured scheme.
pub(crate) fn evaluate_skeleton(
    cfg: &ExperimentConfig,
    skel: &GeometrySkeleton,
    rng: &mut impl Rng,
) -> Result<RealizationResult> {
    let use_cea = cfg.schemes.contains(&Scheme::CeaZf);
    let use_ceu = cfg.schemes.contains(&Scheme::CeuZf);
    let k = cfg.k_served;
    let n = cfg.n_antennas;

    // Serving station: true typical fading, correlated estimate, mate and
    // neighbor rows; both schemes share the rows.
    let mut x_typ = vec![Complex64::new(0.0, 0.0); n];
    sample_fading_into(&mut x_typ, rng);
    let mut serving_rows = RowMatrix::with_capacity(n, k + skel.serving_neighbors.len());
    push_estimated_row(&mut serving_rows, &x_typ, skel.tau_sq, skel.t, cfg.alpha, rng);
    for &d in &skel.mates {
        push_iid_row(&mut serving_rows, d, cfg.alpha, rng);
    }
    if use_cea {
        for &d in &skel.serving_neighbors {
            push_iid_row(&mut serving_rows, d, cfg.alpha, rng);
        }
    }

    let t_pl = skel.t.powf(-cfg.alpha);
    let mut signal = [0.0f64; 2];
    let mut intra = [0.0f64; 2];
    if use_ceu {
        let powers = zf_column_powers(&serving_rows, k, k, &x_typ)?;
        signal[Scheme::CeuZf.index()] = t_pl * powers[0];
        intra[Scheme::CeuZf.index()] = t_pl * powers[1..].iter().sum::<f64>();
    }
    if use_cea {
        let m = k + skel.serving_neighbors.len();
        let powers = zf_column_powers(&serving_rows, m, k, &x_typ)?;
        signal[Scheme::CeaZf.index()] = t_pl * powers[0];
        intra[Scheme::CeaZf.index()] = t_pl * powers[1..].iter().sum::<f64>();
    }

    // Exact interferers.
    let mut i_second = [0.0f64; 2];
    let mut i_rest = [0.0f64; 2];
    for (rank, interferer) in skel.interferers.iter().enumerate() {
        let mut x_typ_b = vec![Complex64::new(0.0, 0.0); n];
        sample_fading_into(&mut x_typ_b, rng);

        let mut rows = RowMatrix::with_capacity(n, k + interferer.neighbors.len());
        for &d in &interferer.served {
            push_iid_row(&mut rows, d, cfg.alpha, rng);
        }
        if use_cea {
            for row in &interferer.neighbors {
                if row.is_typical {
                    push_estimated_row(&mut rows, &x_typ_b, skel.tau_bar_sq, row.dist, cfg.alpha, rng);
                } else {
                    push_iid_row(&mut rows, row.dist, cfg.alpha, rng);
                }
            }
        }

        let pl = interferer.dist.powf(-cfg.alpha);
        if use_ceu {
            let g: f64 = zf_column_powers(&rows, k, k, &x_typ_b)?.iter().sum();
            let idx = Scheme::CeuZf.index();
            if rank == 0 {
                i_second[idx] = pl * g;
            } else {
                i_rest[idx] += pl * g;
            }
        }
        if use_cea {
            let m = k + interferer.neighbors.len();
            let g: f64 = zf_column_powers(&rows, m, k, &x_typ_b)?.iter().sum();
            let idx = Scheme::CeaZf.index();
            if rank == 0 {
                i_second[idx] = pl * g;
            } else {
                i_rest[idx] += pl * g;
            }
        }
    }

    // Far stations: Gamma(K, 1/K) effective fading, shared across schemes.
    let gamma = Gamma::new(k as f64, 1.0 / k as f64)
        .map_err(|e| Error::parameter("k_served", format!("invalid Gamma parameters: {e}")))?;
    let mut i_far = 0.0;
    for &dist in &skel.far_dists {
        i_far += dist.powf(-cfg.alpha) * gamma.sample(rng);
    }
    for rest in i_rest.iter_mut() {
        *rest += i_far;
    }

    let mut sir = [None, None];
    for &scheme in &cfg.schemes {
        let idx = scheme.index();
        sir[idx] = Some(SirSample::assemble(
            scheme.precoder_scheme(),
            signal[idx],
            intra[idx],
            i_second[idx] + i_rest[idx],
        ));
    }

    Ok(RealizationResult {
        sir,
        i_rest,
        i_second,
        t: skel.t,
        s: skel.s,
        rk_sum: skel.rk_sum,
        tau_sq: skel.tau_sq,
        tau_bar_sq: skel.tau_bar_sq,
        kprime_serving: skel.kprime_serving,
        truncated: skel.truncated,
    })
}

/// One unconditioned neighbor-count sample: a uniformly chosen interior
/// station of a fresh realization, with `K` users scheduled per surrounding
/// cell from a candidate user process of density `ue_density_factor * λ`.
pub(crate) fn sample_typical_kprime(cfg: &ExperimentConfig, seed_stream: u64) -> Result<usize> {
    let mut rng = stream_rng(cfg.seed, seed_stream);
    let lp = cfg.lambda * std::f64::consts::PI;
    let unit = 1.0 / lp.sqrt();
    let window = Window::centered(HIST_WINDOW * unit)?;
    let bs = sample_ppp_with(cfg.lambda, window, &mut rng)?;
    if bs.len() < 10 {
        return Err(Error::Geometry("too few stations for a neighbor-count sample".into()));
    }
    let grid = GridIndex::build(&bs, window, (1.0 / cfg.lambda).sqrt());

    let interior_radius = (HIST_WINDOW - ADJ_RADIUS_HIST - 3.5) * unit;
    let interior: Vec<usize> = (0..bs.len())
        .filter(|&i| bs[i].dist(Point::ORIGIN) <= interior_radius)
        .collect();
    if interior.is_empty() {
        return Err(Error::Geometry("no interior station for a neighbor-count sample".into()));
    }
    let target = interior[rng.gen_range(0..interior.len())];

    // Candidate users near the target, assigned to their nearest stations;
    // only the second-nearest index of each scheduled user matters here.
    let relevant = (ADJ_RADIUS_HIST + 3.5 + 0.5) * unit;
    let ue_density = cfg.ue_density_factor * cfg.lambda;
    let candidate_window = Window::new(relevant, bs[target])?;
    let candidates = sample_ppp_with(ue_density, candidate_window, &mut rng)?;
    let cells = grid.within_radius(bs[target], ADJ_RADIUS_HIST * unit);
    let mut per_cell: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    for ue in candidates {
        let Some([first, second]) = grid.two_nearest(ue) else { continue };
        if let Ok(slot) = cells.binary_search(&first.0) {
            per_cell[slot].push(second.0);
        }
    }

    let k = cfg.k_served;
    let proposal = 3.5 * unit;
    let mut count = 0;
    for (slot, &cell) in cells.iter().enumerate() {
        if cell == target {
            continue; // own users can never see their serving station as second
        }
        let list = &mut per_cell[slot];
        if list.len() > k {
            for i in 0..k {
                let j = rng.gen_range(i..list.len());
                list.swap(i, j);
            }
            list.truncate(k);
        } else if list.len() < k {
            let missing = k - list.len();
            let mut accepted = 0;
            let mut attempts = 0;
            while accepted < missing {
                attempts += 1;
                if attempts > 4000 * missing {
                    return Err(Error::Geometry("candidate top-up stalled".into()));
                }
                let p = crate::geometry::uniform_in_disk(bs[cell], proposal, &mut rng);
                let Some([first, second]) = grid.two_nearest(p) else { continue };
                if first.0 != cell {
                    continue;
                }
                list.push(second.0);
                accepted += 1;
            }
        }
        count += list.iter().filter(|&&second| second == target).count();
    }
    Ok(count)
}

/// Deterministic representative conditioning: every distance sits at its
/// distributional mean or evenly spaced quantiles, the neighbor counts at
/// their mean K. Freezing this geometry and Monte Carlo averaging the fading
/// reproduces the single plotted point of an SIR-versus-antennas comparison.
pub(crate) fn representative_skeleton(cfg: &ExperimentConfig) -> Result<GeometrySkeleton> {
    let lp = cfg.lambda * std::f64::consts::PI;
    let k = cfg.k_served;
    let n = cfg.n_antennas;
    let use_cea = cfg.schemes.contains(&Scheme::CeaZf);

    // E[r_1] and a representative second distance sqrt(t^2 + E[s^2 - t^2]).
    let t = crate::analysis::special::gamma(1.5) / lp.sqrt();
    let s = (t * t + 1.0 / lp).sqrt();

    // Mates at evenly spaced Rayleigh quantiles.
    let rayleigh_q = |q: f64| (-(1.0 - q).ln() / lp).sqrt();
    let mates: Vec<f64> = (0..k - 1)
        .map(|i| rayleigh_q((i as f64 + 0.5) / (k - 1) as f64))
        .collect();
    let rk_sum: f64 = mates.iter().map(|d| d.powf(cfg.alpha)).sum();

    // Second-nearest-law quantiles for neighbor rows: invert
    // F(x) = 1 - (1 + x) e^{-x} for x = lp * d^2 by bisection.
    let second_law_q = |q: f64| -> f64 {
        let (mut lo, mut hi) = (0.0f64, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - (1.0 + mid) * (-mid).exp() < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi) / lp).sqrt()
    };
    let neighbor_quantiles = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|i| second_law_q((i as f64 + 0.5) / count as f64))
            .collect()
    };

    let mut truncated = false;
    let mut serving_neighbors = if use_cea { neighbor_quantiles(k) } else { Vec::new() };
    if use_cea {
        truncate_neighbor_dists(&mut serving_neighbors, k, n, &mut truncated);
    }
    let kprime_serving = serving_neighbors.len();

    let (tau_sq, tau_bar_sq) = match cfg.csi_mode {
        CsiMode::Perfect => (0.0, 0.0),
        // Explicit pilot sampling has no deterministic representative; its
        // mean is the mean-field value.
        CsiMode::MeanField | CsiMode::ExplicitPilot => (
            csi_error_variance(t, cfg.lambda, cfg.pilot_reuse, cfg.alpha)?,
            csi_error_variance(s, cfg.lambda, cfg.pilot_reuse, cfg.alpha)?,
        ),
        CsiMode::Fixed { tau_sq, tau_bar_sq } => (tau_sq, tau_bar_sq),
    };

    // Exact interferers: rank-j distance at its mean Gamma(j+1/2)/Gamma(j),
    // served users at Rayleigh quantiles, neighbors at their mean count.
    let served_quantiles: Vec<f64> = (0..k).map(|i| rayleigh_q((i as f64 + 0.5) / k as f64)).collect();
    let mut interferers = Vec::with_capacity(cfg.exact_interferers);
    for rank in 1..=cfg.exact_interferers {
        let dist = if rank == 1 {
            s
        } else {
            (crate::analysis::special::ln_gamma(rank as f64 + 0.5) - crate::analysis::special::ln_gamma(rank as f64))
                .exp()
                / lp.sqrt()
        };
        let mut neighbors: Vec<NeighborRow> = Vec::new();
        if use_cea {
            if rank == 1 {
                neighbors.push(NeighborRow {
                    dist: s,
                    is_typical: true,
                });
                for d in neighbor_quantiles(k - 1) {
                    neighbors.push(NeighborRow {
                        dist: d,
                        is_typical: false,
                    });
                }
            } else {
                for d in neighbor_quantiles(k) {
                    neighbors.push(NeighborRow {
                        dist: d,
                        is_typical: false,
                    });
                }
            }
            truncate_neighbor_rows(&mut neighbors, k, n, &mut truncated);
        }
        interferers.push(InterfererSkeleton {
            dist,
            served: served_quantiles.clone(),
            neighbors,
        });
    }

    // Far field: rank-j distances at sqrt(j/(lambda pi)) out to the window.
    let total = (lp * cfg.window_radius * cfg.window_radius).round() as usize;
    let far_dists: Vec<f64> = (cfg.exact_interferers + 1..=total.max(cfg.exact_interferers + 1))
        .map(|j| (j as f64 / lp).sqrt())
        .collect();

    Ok(GeometrySkeleton {
        t,
        s,
        mates,
        rk_sum,
        serving_neighbors,
        kprime_serving,
        interferers,
        far_dists,
        tau_sq,
        tau_bar_sq,
        truncated,
    })
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Drop the farthest neighbors until K + K' fits under N - 1.
fn truncate_neighbor_dists(neighbors: &mut Vec<f64>, k: usize, n: usize, truncated: &mut bool) {
    let budget = n.saturating_sub(1).saturating_sub(k);
    if neighbors.len() > budget {
        *truncated = true;
        neighbors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        neighbors.truncate(budget);
    }
}

fn truncate_neighbor_rows(neighbors: &mut Vec<NeighborRow>, k: usize, n: usize, truncated: &mut bool) {
    let budget = n.saturating_sub(1).saturating_sub(k);
    if neighbors.len() > budget {
        *truncated = true;
        // The typical user's row is the nearest concern of the second
        // station and sorts by distance like the rest.
        neighbors.sort_by(|a, b| a.dist.partial_cmp(&b.dist).unwrap());
        neighbors.truncate(budget);
    }
}

/// Estimated-channel row of the *typical* user at gain d^{-α}:
/// `sqrt(1-τ²) x + τ q`, scaled by the amplitude gain.
fn push_estimated_row(
    rows: &mut RowMatrix,
    x_true: &[Complex64],
    tau_sq: f64,
    dist: f64,
    alpha: f64,
    rng: &mut impl Rng,
) {
    let amp = dist.powf(-alpha / 2.0);
    let keep = (1.0 - tau_sq).sqrt() * amp;
    let mix = tau_sq.sqrt() * amp;
    let row = rows.push_row();
    sample_fading_into(row, rng);
    for (r, x) in row.iter_mut().zip(x_true) {
        *r = x * keep + *r * mix;
    }
}

/// Estimated-channel row of any other user: its marginal law is a unit
/// fading vector regardless of the estimation error, and nothing else in the
/// typical user's SIR correlates with it.
fn push_iid_row(rows: &mut RowMatrix, dist: f64, alpha: f64, rng: &mut impl Rng) {
    let amp = dist.powf(-alpha / 2.0);
    let row = rows.push_row();
    sample_fading_into(row, rng);
    for r in row.iter_mut() {
        *r *= amp;
    }
}

/// K uniform-in-cell distances for a station outside the local pool.
fn sample_cell_distances(
    grid: &GridIndex,
    center: Point,
    cell: usize,
    k: usize,
    proposal: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(k);
    let mut attempts = 0;
    while out.len() < k {
        attempts += 1;
        if attempts > 4000 * k {
            return Err(Error::Geometry(format!("cell {cell} rejection sampling stalled")));
        }
        let p = crate::geometry::uniform_in_disk(center, proposal, rng);
        match grid.nearest(p) {
            Some((idx, d)) if idx == cell => out.push(d),
            Some(_) => {}
            None => return Err(Error::Geometry("empty grid".into())),
        }
    }
    Ok(out)
}

/// Draw the pilot-contamination error variance of one link by sampling the
/// co-pilot stations as a thinned process of density λ/F outside the
/// exclusion radius sqrt(F/(λπ)).
fn sample_pilot_tau(link_dist: f64, cfg: &ExperimentConfig, rng: &mut impl Rng) -> Result<f64> {
    let lp = cfg.lambda * std::f64::consts::PI;
    let f = cfg.pilot_reuse as f64;
    let r_e_sq = f / lp;
    let r_max_sq = r_e_sq * PILOT_TRUNCATION * PILOT_TRUNCATION;
    let rate = lp / f;
    let mut dists = Vec::new();
    let mut r_sq = r_e_sq;
    loop {
        r_sq += -rng.gen::<f64>().ln() / rate;
        if r_sq > r_max_sq {
            break;
        }
        dists.push(r_sq.sqrt());
    }
    exact_csi_error_variance(link_dist, &dists, cfg.alpha)
}
