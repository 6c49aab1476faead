//! Zero-forcing precoders.
//!
//! * [`ceu_zf`]: conventional cell-edge-unaware ZF, the pseudo-inverse of the
//!   own-cell estimated channel matrix.
//! * [`cea_zf`]: cell-edge-aware ZF, the pseudo-inverse of the *extended*
//!   channel matrix (own users stacked with the neighbor users for which the
//!   station is second closest), keeping only the columns that carry data so
//!   the neighbor directions are nulled without being served.
//! * [`regularized_cea_zf`]: the MMSE-style variant with a ridge term, which
//!   recovers CEA-ZF as the regularization vanishes.
//!
//! All schemes normalize the full precoding matrix to unit total transmit
//! power (squared Frobenius norm 1).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

/// Relative singular-value threshold below which a channel matrix is treated
/// as rank deficient. Complex Gaussian channels are almost surely far from
/// this; hitting it means degenerate geometry and the realization should be
/// resampled.
const SINGULARITY_RTOL: f64 = 1e-12;

/// Precoding scheme tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrecoderScheme {
    CeuZf,
    CeaZf,
    RegCeaZf,
}

/// A normalized per-station precoding matrix: one column per served user,
/// squared Frobenius norm 1.
#[derive(Clone, Debug)]
pub struct Precoder {
    /// N x K matrix of precoding vectors.
    pub columns: DMatrix<Complex64>,
    /// Power normalization constant the unnormalized matrix was divided by
    /// (its squared Frobenius norm).
    pub zeta: f64,
    pub scheme: PrecoderScheme,
}

impl Precoder {
    pub fn n_antennas(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k_served(&self) -> usize {
        self.columns.ncols()
    }

    /// Precoding vector of served user `k`.
    pub fn column(&self, k: usize) -> DVector<Complex64> {
        self.columns.column(k).into_owned()
    }
}

/// Estimated channels of a station's extended cell: the `k_served` own-user
/// rows first, then the `k_neighbors` neighbor-user rows. Row `l` is the
/// conjugate-transposed channel vector of user `l`.
#[derive(Clone, Debug)]
pub struct ExtendedChannelMatrix {
    pub rows: DMatrix<Complex64>,
    pub k_served: usize,
    pub k_neighbors: usize,
}

impl ExtendedChannelMatrix {
    pub fn new(rows: DMatrix<Complex64>, k_served: usize, k_neighbors: usize) -> Result<Self> {
        let n = rows.ncols();
        if rows.nrows() != k_served + k_neighbors {
            return Err(Error::Consistency(format!(
                "extended matrix has {} rows but k_served + k_neighbors = {}",
                rows.nrows(),
                k_served + k_neighbors
            )));
        }
        if k_served + k_neighbors > n {
            return Err(Error::DegreesOfFreedom {
                served: k_served,
                neighbors: k_neighbors,
                antennas: n,
            });
        }
        if k_served == 0 {
            return Err(Error::parameter("k_served", "must be positive"));
        }
        Ok(ExtendedChannelMatrix {
            rows,
            k_served,
            k_neighbors,
        })
    }
}

/// Cell-edge-unaware zero forcing: `W ∝ Ĥᴴ (Ĥ Ĥᴴ)⁻¹`, normalized to unit
/// total power. Satisfies `Ĥ W = ζ^{-1/2} I`.
pub fn ceu_zf(est_channels: &DMatrix<Complex64>) -> Result<Precoder> {
    let (k, n) = est_channels.shape();
    if k == 0 {
        return Err(Error::parameter("est_channels", "needs at least one row"));
    }
    if k > n {
        return Err(Error::DegreesOfFreedom {
            served: k,
            neighbors: 0,
            antennas: n,
        });
    }
    let unnormalized = right_pseudo_inverse_columns(est_channels, k)?;
    Ok(normalize(unnormalized, PrecoderScheme::CeuZf))
}

/// Cell-edge-aware zero forcing: the first `k_served` columns of
/// `Ĥ_Eᴴ (Ĥ_E Ĥ_Eᴴ)⁻¹`, normalized to unit total power. Own users see a
/// scaled identity, neighbor users are nulled.
pub fn cea_zf(ext: &ExtendedChannelMatrix) -> Result<Precoder> {
    let unnormalized = right_pseudo_inverse_columns(&ext.rows, ext.k_served)?;
    Ok(normalize(unnormalized, PrecoderScheme::CeaZf))
}

/// Regularized cell-edge-aware precoder: column `k` is proportional to
/// `(ρN I + Σ_l ĥ_l ĥ_lᴴ)⁻¹ ĥ_k` over all extended-cell users `l`, jointly
/// normalized to unit total power. By the matrix inversion lemma this equals
/// the CEA-ZF construction with the Gram matrix shifted by `ρN`, and it
/// converges to [`cea_zf`] as `ρ → 0`.
pub fn regularized_cea_zf(ext: &ExtendedChannelMatrix, rho: f64) -> Result<Precoder> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::parameter("rho", format!("must be nonnegative, got {rho}")));
    }
    if rho == 0.0 {
        let mut p = cea_zf(ext)?;
        p.scheme = PrecoderScheme::RegCeaZf;
        return Ok(p);
    }
    let h = &ext.rows;
    let n = h.ncols();
    let mut gram = h * h.adjoint();
    let shift = Complex64::from(rho * n as f64);
    for i in 0..gram.nrows() {
        gram[(i, i)] += shift;
    }
    let chol = nalgebra::linalg::Cholesky::new(gram).ok_or_else(|| {
        Error::SingularChannel("regularized Gram matrix is not positive definite".into())
    })?;
    let rhs = leading_identity(h.nrows(), ext.k_served);
    let unnormalized = h.adjoint() * chol.solve(&rhs);
    Ok(normalize(unnormalized, PrecoderScheme::RegCeaZf))
}

/// Cheap conditioning probe of a Cholesky factor: the diagonal ratio bounds
/// how close the Gram matrix is to singular. Rounding can let the
/// factorization of an exactly singular matrix "succeed" with a pivot near
/// sqrt(machine epsilon) times the scale, so a plain success check is not
/// enough and the threshold must sit well above 1e-8.
fn cholesky_well_conditioned(chol: &nalgebra::linalg::Cholesky<Complex64, nalgebra::Dyn>) -> bool {
    let l = chol.l_dirty();
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        min = min.min(d);
        max = max.max(d);
    }
    min > 1e-7 * max
}

/// First `k` columns of `Hᴴ (H Hᴴ)⁻¹` via a Cholesky solve of the Gram
/// matrix, falling back to a rank-revealing SVD pseudo-inverse when the Gram
/// matrix is not comfortably positive definite.
fn right_pseudo_inverse_columns(h: &DMatrix<Complex64>, k: usize) -> Result<DMatrix<Complex64>> {
    let m = h.nrows();
    let gram = h * h.adjoint();
    if let Some(chol) = nalgebra::linalg::Cholesky::new(gram) {
        if cholesky_well_conditioned(&chol) {
            let rhs = leading_identity(m, k);
            return Ok(h.adjoint() * chol.solve(&rhs));
        }
    }
    // Rank-revealing fallback.
    let svd = nalgebra::linalg::SVD::new(h.clone(), true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > SINGULARITY_RTOL * s_max) {
        return Err(Error::SingularChannel(format!(
            "channel matrix is rank deficient (sigma_min/sigma_max = {:e})",
            s_min / s_max
        )));
    }
    let pinv = svd
        .pseudo_inverse(SINGULARITY_RTOL * s_max)
        .map_err(|e| Error::SingularChannel(e.to_string()))?;
    Ok(pinv.columns(0, k).into_owned())
}

/// m x k matrix holding the first k columns of the identity.
fn leading_identity(m: usize, k: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, k, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn normalize(unnormalized: DMatrix<Complex64>, scheme: PrecoderScheme) -> Precoder {
    let zeta = unnormalized.norm_squared();
    let columns = unnormalized / Complex64::from(zeta.sqrt());
    Precoder {
        columns,
        zeta,
        scheme,
    }
}

// ---------------------------------------------------------------------------
// Matrix-free fast path used by the Monte Carlo engine.
// ---------------------------------------------------------------------------

/// Row-major complex matrix whose row `l` is the estimated channel *vector*
/// ĥ_l (not conjugated). Rows are contiguous so Gram products stream well.
#[derive(Clone, Debug)]
pub(crate) struct RowMatrix {
    pub n_cols: usize,
    pub data: Vec<Complex64>,
}

impl RowMatrix {
    pub fn with_capacity(n_cols: usize, rows: usize) -> Self {
        RowMatrix {
            n_cols,
            data: Vec::with_capacity(n_cols * rows),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Append a row and return a mutable view of it.
    pub fn push_row(&mut self) -> &mut [Complex64] {
        let start = self.data.len();
        self.data.resize(start + self.n_cols, Complex64::new(0.0, 0.0));
        &mut self.data[start..]
    }

    /// View as a channel matrix Ĥ (row l = ĥ_lᴴ).
    #[cfg(test)]
    pub fn to_channel_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n_rows(), self.n_cols, |i, j| self.row(i)[j].conj())
    }
}

#[inline]
fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Zero-forcing received powers at a receiver with true fading `x`, without
/// forming the precoder columns.
///
/// Uses the first `m_rows` rows of the channel matrix Ĥ (rows ĥ_lᴴ; the
/// `k_served` data-bearing users first, nulled-only users after) and returns
/// `|xᴴ w_l|²` for every served column of the normalized ZF precoder, via
/// `xᴴ w_l = (Ĥx)ᴴ G⁻¹ e_l / √ζ` with `G = ĤĤᴴ` and
/// `ζ = Σ_{l<k_served} (G⁻¹)_{ll}`.
pub(crate) fn zf_column_powers(
    rows: &RowMatrix,
    m_rows: usize,
    k_served: usize,
    x: &[Complex64],
) -> Result<Vec<f64>> {
    let m = m_rows;
    debug_assert!(k_served <= m && m <= rows.n_rows());
    debug_assert_eq!(rows.n_cols, x.len());
    // G_ij = ĥ_iᴴ ĥ_j = conj(row_i) . row_j
    let mut gram = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        let ri = rows.row(i);
        gram[(i, i)] = Complex64::from(ri.iter().map(|z| z.norm_sqr()).sum::<f64>());
        for j in (i + 1)..m {
            let g = dotc(ri, rows.row(j));
            gram[(i, j)] = g;
            gram[(j, i)] = g.conj();
        }
    }
    let chol = nalgebra::linalg::Cholesky::new(gram)
        .ok_or_else(|| Error::SingularChannel("Gram matrix not positive definite".into()))?;
    if !cholesky_well_conditioned(&chol) {
        return Err(Error::SingularChannel("Gram matrix nearly singular".into()));
    }
    // v = Ĥ x, entries ĥ_lᴴ x.
    let v = DVector::from_fn(m, |i, _| dotc(rows.row(i), x));
    let u = chol.solve(&v);
    let g_inv = chol.inverse();
    let zeta: f64 = (0..k_served).map(|l| g_inv[(l, l)].re).sum();
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(Error::SingularChannel(format!("non-positive normalization {zeta}")));
    }
    Ok((0..k_served).map(|l| u[l].norm_sqr() / zeta).collect())
}
