//! Dense order-3 tensors and the spectral primitives shared by the
//! initializers.
//!
//! A [`Tensor3`] of dims `(d1, d2, d3)` stores entry `(i, j, k)` (0-based) at
//! linear offset `i + d1 * (j + d2 * k)`: the first index runs fastest, so each
//! frontal slice `T(:, :, k)` is a contiguous column-major `d1 x d2` block.
//! For a multilayer network the slices are the layer adjacency matrices.
//!
//! Mode-k matricization follows the Kolda–Bader convention. Row `i_k` of
//! `M_k(T)` holds every entry with that mode-k index; the column index
//! enumerates the remaining indices in increasing mode order with the lower
//! mode running fastest:
//!
//! * mode 1: column `j + d2 * k`
//! * mode 2: column `i + d1 * k`
//! * mode 3: column `i + d1 * j`

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold below which a singular value counts as zero.
pub const SVD_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Tensor3 { dims: [d1, d2, d3], values: vec![0.0; d1 * d2 * d3] }
    }

    pub fn from_vec(dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let expected = dims.iter().product::<usize>();
        if values.len() != expected {
            return Err(Error::shape(format!("tensor of dims {dims:?} needs {expected} values, got {}", values.len())));
        }
        Ok(Tensor3 { dims, values })
    }

    /// Stacks equally sized matrices as frontal slices.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::arg("at least one slice is required"));
        };
        let (d1, d2) = first.shape();
        let mut values = Vec::with_capacity(d1 * d2 * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (d1, d2) {
                return Err(Error::shape(format!("slice {k} has shape {:?}, expected {:?}", s.shape(), (d1, d2))));
            }
            values.extend_from_slice(s.as_slice());
        }
        Ok(Tensor3 { dims: [d1, d2, slices.len()], values })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dims[0], dims[1], dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let off = t.offset(i, j, k);
                    t.values[off] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let off = self.offset(i, j, k);
        self.values[off] = v;
    }

    /// Number of frontal slices (layers).
    pub fn layers(&self) -> usize {
        self.dims[2]
    }

    fn slice_values(&self, k: usize) -> &[f64] {
        let len = self.dims[0] * self.dims[1];
        &self.values[k * len..(k + 1) * len]
    }

    /// Frontal slice `T(:, :, k)` as a matrix.
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dims[0], self.dims[1], self.slice_values(k))
    }

    pub fn is_slice_symmetric(&self, k: usize) -> bool {
        let d = self.dims[0];
        if d != self.dims[1] {
            return false;
        }
        (0..d).all(|i| (0..i).all(|j| self.get(i, j, k) == self.get(j, i, k)))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.layers()).all(|k| self.is_slice_symmetric(k))
    }

    /// Sum of the selected frontal slices.
    pub fn slice_sum<I: IntoIterator<Item = usize>>(&self, layers: I) -> DMatrix<f64> {
        let len = self.dims[0] * self.dims[1];
        let mut acc = vec![0.0; len];
        for k in layers {
            for (a, v) in acc.iter_mut().zip(self.slice_values(k)) {
                *a += v;
            }
        }
        DMatrix::from_vec(self.dims[0], self.dims[1], acc)
    }

    /// Sub-tensor keeping the listed layers (mode 3) in the given order.
    pub fn select_layers(&self, layers: &[usize]) -> Tensor3 {
        let mut values = Vec::with_capacity(self.dims[0] * self.dims[1] * layers.len());
        for &k in layers {
            values.extend_from_slice(self.slice_values(k));
        }
        Tensor3 { dims: [self.dims[0], self.dims[1], layers.len()], values }
    }

    /// Sub-tensor keeping the listed nodes on modes 1 and 2 and the listed
    /// layers on mode 3.
    pub fn select(&self, nodes: &[usize], layers: &[usize]) -> Tensor3 {
        let m = nodes.len();
        Tensor3::from_fn([m, m, layers.len()], |a, b, c| self.get(nodes[a], nodes[b], layers[c]))
    }
}

/// Mode-k unfolding; see the module docs for the column index map.
pub fn matricize(t: &Tensor3, mode: Mode) -> DMatrix<f64> {
    let [d1, d2, d3] = t.dims;
    match mode {
        Mode::One => DMatrix::from_fn(d1, d2 * d3, |i, c| t.get(i, c % d2, c / d2)),
        Mode::Two => DMatrix::from_fn(d2, d1 * d3, |j, c| t.get(c % d1, j, c / d1)),
        // Each row is one contiguous slice.
        Mode::Three => DMatrix::from_fn(d3, d1 * d2, |k, c| t.values[c + d1 * d2 * k]),
    }
}

/// Inverse of [`matricize`].
pub fn fold(m: &DMatrix<f64>, mode: Mode, dims: [usize; 3]) -> Result<Tensor3> {
    let [d1, d2, _] = dims;
    let axis = mode.axis();
    let rest: usize = dims.iter().enumerate().filter(|(a, _)| *a != axis).map(|(_, d)| d).product();
    if m.shape() != (dims[axis], rest) {
        return Err(Error::shape(format!(
            "mode-{} unfolding of {dims:?} must be {}x{rest}, got {:?}",
            axis + 1,
            dims[axis],
            m.shape()
        )));
    }
    Ok(Tensor3::from_fn(dims, |i, j, k| match mode {
        Mode::One => m[(i, j + d2 * k)],
        Mode::Two => m[(j, i + d1 * k)],
        Mode::Three => m[(k, i + d1 * j)],
    }))
}

/// `result(a, b, c) = sum_{i,j,m} t(i, j, m) u1(i, a) u2(j, b) u3(m, c)`,
/// i.e. each factor is applied as a transposed contraction along its mode.
pub fn multilinear_product(t: &Tensor3, u1: &DMatrix<f64>, u2: &DMatrix<f64>, u3: &DMatrix<f64>) -> Result<Tensor3> {
    let factors = [u1, u2, u3];
    for (axis, u) in factors.iter().enumerate() {
        if u.nrows() != t.dims[axis] {
            return Err(Error::shape(format!(
                "mode-{} factor has {} rows, tensor dim is {}",
                axis + 1,
                u.nrows(),
                t.dims[axis]
            )));
        }
    }
    let mut cur = t.clone();
    for (mode, u) in Mode::ALL.into_iter().zip(factors) {
        let mut dims = cur.dims;
        dims[mode.axis()] = u.ncols();
        let unfolded = u.transpose() * matricize(&cur, mode);
        cur = fold(&unfolded, mode, dims)?;
    }
    Ok(cur)
}

/// `t x_1 u x_2 u`, leaving mode 3 untouched: slice k becomes `uᵀ T_k u`.
pub fn contract_nodes(t: &Tensor3, u: &DMatrix<f64>) -> Result<Tensor3> {
    let [d1, d2, n] = t.dims;
    if u.nrows() != d1 || u.nrows() != d2 {
        return Err(Error::shape(format!("node factor has {} rows, tensor slices are {d1}x{d2}", u.nrows())));
    }
    let ut = u.transpose();
    let slices: Vec<DMatrix<f64>> = (0..n).map(|k| &ut * t.slice(k) * u).collect();
    if slices.is_empty() {
        return Ok(Tensor3::zeros(u.ncols(), u.ncols(), 0));
    }
    Tensor3::from_slices(&slices)
}

/// Matrix with orthonormal columns (a truncated singular basis).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoFactor(DMatrix<f64>);

impl OrthoFactor {
    /// Wraps `m` after checking `‖mᵀm − I‖_F < 1e-8`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let err = orthonormality_error(&m);
        if err >= 1e-8 {
            return Err(Error::numeric(format!("columns not orthonormal (Gram error {err:e})")));
        }
        Ok(OrthoFactor(m))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }

    /// Largest row norm (the `2,∞` norm).
    pub fn max_row_norm(&self) -> f64 {
        max_row_norm(&self.0)
    }
}

pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    (gram - DMatrix::identity(m.ncols(), m.ncols())).norm()
}

pub fn max_row_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Top left singular vectors together with the full descending spectrum.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub factor: OrthoFactor,
    pub singular_values: Vec<f64>,
}

impl TruncatedSvd {
    /// `σ_r − σ_{r+1}` (with `σ_{r+1} = 0` past the end of the spectrum).
    pub fn gap(&self) -> f64 {
        let r = self.factor.cols();
        let next = self.singular_values.get(r).copied().unwrap_or(0.0);
        self.singular_values[r - 1] - next
    }

    /// Number of singular values above `SVD_RANK_TOL` relative to the largest.
    pub fn numerical_rank(&self) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > SVD_RANK_TOL * top && s > 0.0).count()
    }
}

/// Top-`r` left singular vectors with a deterministic sign: each column's
/// largest-magnitude entry (lowest index on ties) is non-negative.
pub fn top_left_singular_vectors(m: &DMatrix<f64>, r: usize) -> Result<OrthoFactor> {
    truncated_svd(m, r).map(|s| s.factor)
}

pub fn truncated_svd(m: &DMatrix<f64>, r: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::arg(format!("rank {r} must be in 1..={} for a {rows}x{cols} matrix", rows.min(cols))));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("matrix has non-finite entries"));
    }
    let svd = m.clone().try_svd(true, false, f64::EPSILON, 0).ok_or_else(|| Error::numeric("SVD did not converge"))?;
    let u = svd.u.ok_or_else(|| Error::numeric("SVD returned no left vectors"))?;
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let mut out = DMatrix::zeros(rows, r);
    for (c, &src) in order.iter().take(r).enumerate() {
        let mut col = u.column(src).clone_owned();
        let mut pivot = 0;
        for i in 1..rows {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        out.set_column(c, &col);
    }
    Ok(TruncatedSvd { factor: OrthoFactor(out), singular_values: order.iter().map(|&i| sv[i]).collect() })
}

/// Row clipping `U_*(i,:) = U(i,:) · min(δ, ‖U(i,:)‖) / ‖U(i,:)‖`; zero rows
/// are left as they are.
pub fn clip_rows(u: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let mut out = u.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > delta {
            row *= delta / norm;
        }
    }
    out
}

/// Incoherence regularization: top-r left singular vectors of the
/// row-clipped factor.
pub fn regularize(u: &OrthoFactor, delta: f64) -> Result<OrthoFactor> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::arg(format!("regularization delta must be positive, got {delta}")));
    }
    let r = u.cols();
    let clipped = clip_rows(u.matrix(), delta);
    let svd = truncated_svd(&clipped, r)?;
    let achieved = svd.numerical_rank();
    if achieved < r {
        return Err(Error::numeric(format!("clipped factor has rank {achieved}, below the requested {r}")));
    }
    Ok(svd.factor)
}
