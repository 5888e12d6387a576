//! Linear subspaces of ℝⁿ carried as orthonormal bases.
//!
//! Every rank decision goes through singular values compared against
//! `rank_tol · max(σ_max, scale)`, where `scale` is the size of the operator
//! before any projection was applied. The `scale` floor keeps products such as
//! `(I − Π)·M`, which may be pure rounding noise, from being promoted to full
//! rank by a purely relative test.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::svd;

/// Default numerical rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Containment tolerance derived from a rank tolerance.
pub fn containment_tol(rank_tol: f64) -> f64 {
    100.0 * rank_tol
}

/// A linear subspace of ℝⁿ with an orthonormal basis (n × k, k may be 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        Self {
            basis: DMatrix::zeros(n, 0),
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            basis: DMatrix::identity(n, n),
        }
    }

    /// Span of the listed standard basis vectors (0-based indices).
    pub fn coordinate(n: usize, axes: &[usize]) -> Self {
        let mut basis = DMatrix::zeros(n, axes.len());
        for (j, &i) in axes.iter().enumerate() {
            basis[(i, j)] = 1.0;
        }
        Self { basis }
    }

    /// Wraps a basis that is already orthonormal. Callers must guarantee it.
    pub(crate) fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector `basis · basisᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Projector onto the orthogonal complement.
    pub fn complement_projector(&self) -> DMatrix<f64> {
        let n = self.ambient_dim();
        DMatrix::identity(n, n) - self.projector()
    }

    pub fn complement(&self, rank_tol: f64) -> Subspace {
        kernel(&self.basis.transpose(), rank_tol)
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * x);
        (x - proj).norm()
    }

    /// `‖(I − Π_self)·basis_other‖ ≤ tol`.
    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        if other.is_zero() {
            return true;
        }
        let residual = &other.basis - &self.basis * (self.basis.transpose() * &other.basis);
        residual.norm() <= tol
    }

    pub fn contains_vector(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.distance(x) <= tol * x.norm().max(1.0)
    }

    /// Equality as mutual containment.
    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.contains(other, tol) && other.contains(self, tol)
    }

    /// A deterministic basis for display: Gram-Schmidt on the projector's
    /// columns in coordinate order, so `span(e₂)` prints as `[e₂]`.
    pub fn canonical_basis(&self) -> Vec<Vec<f64>> {
        let n = self.ambient_dim();
        let p = self.projector();
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(self.dim());
        for j in 0..n {
            if out.len() == self.dim() {
                break;
            }
            let mut v = p.column(j).into_owned();
            for q in &out {
                let c = q.dot(&v);
                v -= q * c;
            }
            let norm = v.norm();
            if norm > 1e-6 {
                out.push(v / norm);
            }
        }
        out.into_iter().map(|v| v.iter().copied().collect()).collect()
    }
}

/// Threshold-based numerical rank from singular values.
fn keep_threshold(singular_values: &[f64], scale: f64, rank_tol: f64) -> f64 {
    let smax = singular_values.iter().fold(0.0f64, |a, s| a.max(*s));
    rank_tol * smax.max(scale)
}

/// Orthonormal basis for the span of the columns of `m`.
pub fn image(m: &DMatrix<f64>, rank_tol: f64) -> Subspace {
    image_scaled(m, 0.0, rank_tol)
}

pub(crate) fn image_scaled(m: &DMatrix<f64>, scale: f64, rank_tol: f64) -> Subspace {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return Subspace::zero(n);
    }
    let svd = svd(m);
    let u = svd.u;
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let thr = keep_threshold(&sv, scale, rank_tol);
    let cols: Vec<usize> = sv
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > thr)
        .map(|(i, _)| i)
        .collect();
    Subspace::from_orthonormal(u.select_columns(cols.iter()))
}

/// Span of a list of vectors; numerical rank decided by σᵢ > rank_tol·σ_max.
pub fn orthonormalize(vectors: &[DVector<f64>], n: usize, rank_tol: f64) -> Subspace {
    if vectors.is_empty() {
        return Subspace::zero(n);
    }
    image(&DMatrix::from_columns(vectors), rank_tol)
}

/// `{x : M x = 0}` computed from a full right-singular basis.
pub fn kernel(m: &DMatrix<f64>, rank_tol: f64) -> Subspace {
    kernel_scaled(m, 0.0, rank_tol)
}

pub(crate) fn kernel_scaled(m: &DMatrix<f64>, scale: f64, rank_tol: f64) -> Subspace {
    let n = m.ncols();
    if n == 0 {
        return Subspace::zero(0);
    }
    if m.nrows() == 0 {
        return Subspace::full(n);
    }
    // Pad to at least n rows so the SVD returns a complete n × n V.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = svd(&padded);
    let v_t = svd.v_t;
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let thr = keep_threshold(&sv, scale, rank_tol);
    let cols: Vec<DVector<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= thr)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Subspace::zero(n)
    } else {
        Subspace::from_orthonormal(DMatrix::from_columns(&cols))
    }
}

fn check_ambient(v: &Subspace, w: &Subspace) -> Result<()> {
    if v.ambient_dim() != w.ambient_dim() {
        return Err(Error::AmbientMismatch(v.ambient_dim(), w.ambient_dim()));
    }
    Ok(())
}

/// `V ∩ W` as `{B_V c : (I − Π_W) B_V c = 0}`.
pub fn intersect(v: &Subspace, w: &Subspace, rank_tol: f64) -> Result<Subspace> {
    check_ambient(v, w)?;
    if v.is_zero() || w.is_zero() {
        return Ok(Subspace::zero(v.ambient_dim()));
    }
    let m = w.complement_projector() * v.basis();
    let coords = kernel_scaled(&m, 1.0, rank_tol);
    Ok(Subspace::from_orthonormal(v.basis() * coords.basis()))
}

/// `V + W`.
pub fn sum(v: &Subspace, w: &Subspace, rank_tol: f64) -> Result<Subspace> {
    check_ambient(v, w)?;
    let n = v.ambient_dim();
    let mut stacked = DMatrix::zeros(n, v.dim() + w.dim());
    stacked.view_mut((0, 0), (n, v.dim())).copy_from(v.basis());
    stacked.view_mut((0, v.dim()), (n, w.dim())).copy_from(w.basis());
    Ok(image_scaled(&stacked, 1.0, rank_tol))
}

/// Orthogonal projector onto `V`.
pub fn projector(v: &Subspace) -> DMatrix<f64> {
    v.projector()
}

/// Moore–Penrose pseudoinverse via a truncated SVD.
pub fn pseudoinverse(m: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = svd(m);
    let u = svd.u;
    let v_t = svd.v_t;
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let thr = keep_threshold(&sv, 0.0, rank_tol);
    let mut out = DMatrix::zeros(cols, rows);
    for (i, s) in sv.iter().enumerate() {
        if *s > thr && *s > 0.0 {
            out += v_t.row(i).transpose() * u.column(i).transpose() / *s;
        }
    }
    out
}

/// `{x : M x ∈ V}` = `Ker((I − Π_V) M)`.
pub fn preimage(m: &DMatrix<f64>, v: &Subspace, rank_tol: f64) -> Result<Subspace> {
    if m.nrows() != v.ambient_dim() {
        return Err(Error::AmbientMismatch(m.nrows(), v.ambient_dim()));
    }
    let scale = m.norm();
    Ok(kernel_scaled(&(v.complement_projector() * m), scale, rank_tol))
}

/// Numerical rank of a matrix (σᵢ > rank_tol·σ_max).
pub fn rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = svd(m).singular_values;
    let v: Vec<f64> = sv.iter().copied().collect();
    let thr = keep_threshold(&v, 0.0, rank_tol);
    v.iter().filter(|s| **s > thr).count()
}

/// JSON view of a subspace used in reports.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SubspaceView {
    pub dim: usize,
    pub basis: Vec<Vec<f64>>,
}

impl From<&Subspace> for SubspaceView {
    fn from(s: &Subspace) -> Self {
        let basis = s
            .canonical_basis()
            .into_iter()
            .map(|col| col.into_iter().map(round12).collect())
            .collect();
        SubspaceView { dim: s.dim(), basis }
    }
}

impl Serialize for Subspace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SubspaceView::from(self).serialize(serializer)
    }
}

/// `{v ∈ V : M v ∈ S}`.
pub fn restricted_preimage(v: &Subspace, m: &DMatrix<f64>, s: &Subspace, rank_tol: f64) -> Subspace {
    restricted_preimage_all(v, &[(m.clone(), s.clone())], rank_tol)
}

/// `{v ∈ V : Mᵢ v ∈ Sᵢ for every i}`, solved in the coordinates of `V`.
pub fn restricted_preimage_all(v: &Subspace, conditions: &[(DMatrix<f64>, Subspace)], rank_tol: f64) -> Subspace {
    if v.is_zero() || conditions.is_empty() {
        return v.clone();
    }
    let k = v.dim();
    let n = v.ambient_dim();
    let mut rows = DMatrix::zeros(n * conditions.len(), k);
    let mut scale = 0.0f64;
    for (i, (m, s)) in conditions.iter().enumerate() {
        let block = s.complement_projector() * m * v.basis();
        rows.view_mut((i * n, 0), (n, k)).copy_from(&block);
        scale = scale.max(m.norm());
    }
    let coords = kernel_scaled(&rows, scale.max(f64::MIN_POSITIVE), rank_tol);
    Subspace::from_orthonormal(v.basis() * coords.basis())
}

/// Rounds to 12 decimal places and normalizes `-0.0`; basis entries are
/// bounded by 1 in magnitude so this hides only rounding noise.
pub(crate) fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
