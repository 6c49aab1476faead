//! Poisson network geometry: base-station/user point processes, distance
//! association, second-order neighbor structure, and the typical-user
//! construction.
//!
//! All sampling is deterministic given the seed. Distances are in meters,
//! densities in points per square meter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::Error;
use crate::Result;

/// A point in the plane, meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

/// Finite circular observation window.
///
/// The infinite plane of the model is truncated to a disk large enough that
/// the interference lost beyond the boundary is negligible (default radius
/// 30 km for a path-loss exponent of 4 and one base station per km²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub center: Point,
    pub radius: f64,
}

impl Window {
    pub fn new(radius: f64, center: Point) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::parameter("radius", format!("must be positive, got {radius}")));
        }
        Ok(Window { center, radius })
    }

    /// Disk centered at the origin.
    pub fn centered(radius: f64) -> Result<Self> {
        Window::new(radius, Point::ORIGIN)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    pub fn contains(&self, p: Point) -> bool {
        self.center.dist_sq(p) <= self.radius * self.radius
    }
}

/// One sampled network: base stations and (optionally) candidate users in a
/// window, plus the densities and seed they were drawn with.
#[derive(Clone, Debug)]
pub struct NetworkRealization {
    pub bs_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub bs_density: f64,
    pub ue_density: f64,
    pub window: Window,
    pub seed: u64,
}

// Stream ids for the per-purpose RNGs derived from a realization seed.
const STREAM_BS: u64 = 0;
const STREAM_UE: u64 = 1;
const STREAM_CONTEXT: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl NetworkRealization {
    /// Sample base stations at `bs_density` and users at `ue_density`
    /// (either may be zero) in `window`.
    pub fn sample(bs_density: f64, ue_density: f64, window: Window, seed: u64) -> Result<Self> {
        if !(bs_density > 0.0) || !bs_density.is_finite() {
            return Err(Error::parameter("bs_density", format!("must be positive, got {bs_density}")));
        }
        let bs_positions = sample_ppp_with(bs_density, window, &mut stream_rng(seed, STREAM_BS))?;
        let ue_positions = sample_ppp_with(ue_density, window, &mut stream_rng(seed, STREAM_UE))?;
        Ok(NetworkRealization {
            bs_positions,
            ue_positions,
            bs_density,
            ue_density,
            window,
            seed,
        })
    }
}

/// Draw one Poisson point process realization in a disk window.
///
/// The point count is Poisson with mean `density * window.area()` and the
/// points are independently uniform in the window. Deterministic given the
/// seed.
pub fn sample_ppp(density: f64, window: Window, seed: u64) -> Result<Vec<Point>> {
    sample_ppp_with(density, window, &mut stream_rng(seed, STREAM_BS))
}

/// As [`sample_ppp`] but driven by a caller-supplied RNG.
pub fn sample_ppp_with(density: f64, window: Window, rng: &mut impl Rng) -> Result<Vec<Point>> {
    if !density.is_finite() || density < 0.0 {
        return Err(Error::parameter("density", format!("must be finite and nonnegative, got {density}")));
    }
    let mean = density * window.area();
    let count = if mean == 0.0 {
        0
    } else {
        Poisson::new(mean)
            .map_err(|e| Error::parameter("density", format!("invalid Poisson mean {mean}: {e}")))?
            .sample(rng) as usize
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        points.push(uniform_in_disk(window.center, window.radius, rng));
    }
    Ok(points)
}

/// Uniform point in a disk via the inverse-CDF radius transform.
pub(crate) fn uniform_in_disk(center: Point, radius: f64, rng: &mut impl Rng) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Distance-based association of one user: indices and distances of the two
/// closest base stations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Association {
    pub nearest: usize,
    pub t: f64,
    pub second: usize,
    pub s: f64,
}

/// Nearest and second-nearest base station of `ue_position`, ties broken by
/// lower index. Errors with fewer than two base stations.
pub fn associate(bs_positions: &[Point], ue_position: Point) -> Result<Association> {
    if bs_positions.len() < 2 {
        return Err(Error::Geometry(format!(
            "association needs at least 2 base stations, got {}",
            bs_positions.len()
        )));
    }
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (i, bs) in bs_positions.iter().enumerate() {
        let d = ue_position.dist_sq(*bs);
        if d < best.1 {
            second = best;
            best = (i, d);
        } else if d < second.1 {
            second = (i, d);
        }
    }
    Ok(Association {
        nearest: best.0,
        t: best.1.sqrt(),
        second: second.0,
        s: second.1.sqrt(),
    })
}

/// Number of users whose *second* nearest base station is `bs_index`, i.e.
/// the size of that station's cell neighborhood.
pub fn neighbor_count(bs_positions: &[Point], ue_positions: &[Point], bs_index: usize) -> Result<usize> {
    if bs_index >= bs_positions.len() {
        return Err(Error::parameter(
            "bs_index",
            format!("index {bs_index} out of range for {} base stations", bs_positions.len()),
        ));
    }
    if ue_positions.is_empty() {
        return Ok(0);
    }
    if bs_positions.len() < 2 {
        return Err(Error::Geometry("neighbor_count needs at least 2 base stations".into()));
    }
    let mut count = 0;
    for ue in ue_positions {
        if associate(bs_positions, *ue)?.second == bs_index {
            count += 1;
        }
    }
    Ok(count)
}

/// Rejection-sample `n` points uniform in the Voronoi cell identified by
/// `is_in_cell`, proposing uniformly in a disk of `proposal_radius` around
/// `center`. The proposal disk must (essentially) cover the cell; see
/// [`cell_proposal_radius`].
pub fn rejection_sample_in_cell(
    center: Point,
    proposal_radius: f64,
    n: usize,
    mut is_in_cell: impl FnMut(Point) -> bool,
    rng: &mut impl Rng,
) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(n);
    let max_attempts = 2000 * n.max(1);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Geometry(format!(
                "rejection sampling exceeded {max_attempts} attempts ({}/{n} accepted)",
                out.len()
            )));
        }
        let p = uniform_in_disk(center, proposal_radius, rng);
        if is_in_cell(p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Proposal radius that covers a typical Voronoi cell of density `lambda`:
/// the cell mass beyond radius `c / sqrt(lambda*pi)` is about `exp(-c²)`,
/// so `c = 3.5` leaves under 1e-5 uncovered.
pub fn cell_proposal_radius(lambda: f64) -> f64 {
    3.5 / (lambda * std::f64::consts::PI).sqrt()
}

/// Everything about the typical user the downstream SIR machinery needs:
/// serving and second stations, their distances, the co-scheduled in-cell
/// user distances, and the serving station's neighbor count.
#[derive(Clone, Debug)]
pub struct TypicalUserContext {
    /// Position of the typical user (the window center by convention).
    pub position: Point,
    pub serving_bs: usize,
    pub second_bs: usize,
    /// Distance to the serving (nearest) base station.
    pub t: f64,
    /// Distance to the second nearest base station.
    pub s: f64,
    /// Distances from the serving station to the K-1 co-scheduled users.
    pub cell_mates: Vec<f64>,
    /// Number of scheduled users for which the serving station is second
    /// nearest.
    pub kprime_serving: usize,
}

/// Build the typical-user context of a realization: the typical user sits at
/// the window center, `K - 1` cell mates are drawn uniformly in the serving
/// cell, and the serving station's neighbor count is taken over a scheduled
/// set of `K` users per cell drawn from the realization's user process.
///
/// Realizations whose typical cell reaches toward the window boundary
/// (second station beyond a third of the window radius) are rejected so that
/// censored cells never enter the statistics; callers resample with a fresh
/// seed.
pub fn build_typical_context(realization: &NetworkRealization, k: usize) -> Result<TypicalUserContext> {
    if k < 1 {
        return Err(Error::parameter("k", "must be at least 1"));
    }
    let bs = &realization.bs_positions;
    let position = realization.window.center;
    let assoc = associate(bs, position)?;
    if assoc.s > realization.window.radius / 3.0 {
        return Err(Error::Geometry(format!(
            "typical cell touches the window boundary (s = {:.1} m)",
            assoc.s
        )));
    }
    let mut rng = stream_rng(realization.seed, STREAM_CONTEXT);
    let proposal = cell_proposal_radius(realization.bs_density);
    let serving = assoc.nearest;
    let mates = rejection_sample_in_cell(
        bs[serving],
        proposal,
        k - 1,
        |p| associate(bs, p).map(|a| a.nearest == serving).unwrap_or(false),
        &mut rng,
    )?;
    let cell_mates = mates.iter().map(|p| p.dist(bs[serving])).collect();

    let kprime_serving = if realization.ue_positions.is_empty() {
        0
    } else {
        let scheduled = schedule_ues(bs, &realization.ue_positions, k, &mut rng)?;
        neighbor_count(bs, &scheduled, serving)?
    };

    Ok(TypicalUserContext {
        position,
        serving_bs: serving,
        second_bs: assoc.second,
        t: assoc.t,
        s: assoc.s,
        cell_mates,
        kprime_serving,
    })
}

/// Pick `k` scheduled users per cell from the candidate users: each cell
/// keeps a uniform subset of its own candidates and is topped up with fresh
/// uniform points of the cell when it holds fewer than `k`.
pub fn schedule_ues(
    bs_positions: &[Point],
    ue_candidates: &[Point],
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Point>> {
    if bs_positions.len() < 2 {
        return Err(Error::Geometry("scheduling needs at least 2 base stations".into()));
    }
    let mut per_cell: Vec<Vec<Point>> = vec![Vec::new(); bs_positions.len()];
    for ue in ue_candidates {
        per_cell[associate(bs_positions, *ue)?.nearest].push(*ue);
    }
    let mut scheduled = Vec::with_capacity(bs_positions.len() * k);
    for (cell, candidates) in per_cell.iter_mut().enumerate() {
        if candidates.len() > k {
            // Partial Fisher-Yates: the first k entries become a uniform subset.
            for i in 0..k {
                let j = rng.gen_range(i..candidates.len());
                candidates.swap(i, j);
            }
            candidates.truncate(k);
        } else if candidates.len() < k {
            let missing = k - candidates.len();
            let proposal = dense_cell_proposal_radius(bs_positions, cell);
            let extra = rejection_sample_in_cell(
                bs_positions[cell],
                proposal,
                missing,
                |p| associate(bs_positions, p).map(|a| a.nearest == cell).unwrap_or(false),
                rng,
            )?;
            candidates.extend(extra);
        }
        scheduled.extend_from_slice(candidates);
    }
    Ok(scheduled)
}

// Proposal radius for an arbitrary cell when the density is not known:
// three times the distance to the nearest other station bounds the cell
// generously in non-degenerate configurations.
fn dense_cell_proposal_radius(bs_positions: &[Point], cell: usize) -> f64 {
    let z = bs_positions[cell];
    let mut nearest_other = f64::INFINITY;
    for (i, p) in bs_positions.iter().enumerate() {
        if i != cell {
            nearest_other = nearest_other.min(z.dist(*p));
        }
    }
    3.0 * nearest_other
}

/// Uniform-grid spatial index over a point set for nearest and range queries.
#[derive(Clone, Debug)]
pub(crate) struct GridIndex {
    points: Vec<Point>,
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl GridIndex {
    /// Build over `points` covering `window`, with grid pitch `cell`.
    pub fn build(points: &[Point], window: Window, cell: f64) -> Self {
        let x0 = window.center.x - window.radius;
        let y0 = window.center.y - window.radius;
        let span = 2.0 * window.radius;
        let nx = ((span / cell).ceil() as usize).max(1);
        let ny = nx;
        let ncells = nx * ny;
        let mut counts = vec![0u32; ncells + 1];
        let cell_of = |p: &Point| -> usize {
            let cx = (((p.x - x0) / cell) as usize).min(nx - 1);
            let cy = (((p.y - y0) / cell) as usize).min(ny - 1);
            cy * nx + cx
        };
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let starts = counts;
        let mut cursor = starts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        GridIndex {
            points: points.to_vec(),
            x0,
            y0,
            cell,
            nx,
            ny,
            starts,
            items,
        }
    }

    fn cell_coords(&self, p: Point) -> (isize, isize) {
        let cx = ((p.x - self.x0) / self.cell).floor() as isize;
        let cy = ((p.y - self.y0) / self.cell).floor() as isize;
        (cx.clamp(0, self.nx as isize - 1), cy.clamp(0, self.ny as isize - 1))
    }

    fn scan_cell(&self, cx: isize, cy: isize, p: Point, best: &mut [(usize, f64); 2]) {
        if cx < 0 || cy < 0 || cx >= self.nx as isize || cy >= self.ny as isize {
            return;
        }
        let c = cy as usize * self.nx + cx as usize;
        let (a, b) = (self.starts[c] as usize, self.starts[c + 1] as usize);
        for &i in &self.items[a..b] {
            let d = p.dist_sq(self.points[i as usize]);
            if d < best[0].1 || (d == best[0].1 && (i as usize) < best[0].0) {
                if best[0].0 != i as usize {
                    best[1] = best[0];
                }
                best[0] = (i as usize, d);
            } else if d < best[1].1 || (d == best[1].1 && (i as usize) < best[1].0) {
                best[1] = (i as usize, d);
            }
        }
    }

    /// Index and distance of the nearest point, or `None` for an empty set.
    pub fn nearest(&self, p: Point) -> Option<(usize, f64)> {
        self.two_nearest_impl(p, 1).map(|b| b[0])
    }

    /// The two nearest points (by index, with distances), or `None` when the
    /// set has fewer than two points.
    pub fn two_nearest(&self, p: Point) -> Option<[(usize, f64); 2]> {
        self.two_nearest_impl(p, 2)
    }

    fn two_nearest_impl(&self, p: Point, need: usize) -> Option<[(usize, f64); 2]> {
        if self.points.len() < need {
            return None;
        }
        let mut best = [(usize::MAX, f64::INFINITY); 2];
        let (cx, cy) = self.cell_coords(p);
        let max_ring = self.nx.max(self.ny) as isize;
        for ring in 0..=max_ring {
            // Cells in ring r are at least (r-1)*cell away from p.
            if ring > 1 {
                let min_d = (ring - 1) as f64 * self.cell;
                if min_d * min_d > best[need - 1].1 {
                    break;
                }
            }
            if ring == 0 {
                self.scan_cell(cx, cy, p, &mut best);
            } else {
                for dx in -ring..=ring {
                    self.scan_cell(cx + dx, cy - ring, p, &mut best);
                    self.scan_cell(cx + dx, cy + ring, p, &mut best);
                }
                for dy in (1 - ring)..ring {
                    self.scan_cell(cx - ring, cy + dy, p, &mut best);
                    self.scan_cell(cx + ring, cy + dy, p, &mut best);
                }
            }
        }
        if best[need - 1].0 == usize::MAX {
            return None;
        }
        Some([(best[0].0, best[0].1.sqrt()), (best[1].0, best[1].1.sqrt())])
    }

    /// Indices of all points within `radius` of `p`, in ascending index
    /// order.
    pub fn within_radius(&self, p: Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let r_sq = radius * radius;
        let (cx0, cy0) = self.cell_coords(Point::new(p.x - radius, p.y - radius));
        let (cx1, cy1) = self.cell_coords(Point::new(p.x + radius, p.y + radius));
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let c = cy as usize * self.nx + cx as usize;
                let (a, b) = (self.starts[c] as usize, self.starts[c + 1] as usize);
                for &i in &self.items[a..b] {
                    if p.dist_sq(self.points[i as usize]) <= r_sq {
                        out.push(i as usize);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}
