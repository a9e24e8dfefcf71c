//! Symmetric forms, p-planes and finite-difference differentiation.
//!
//! A [`SymForm`] is an element of Sym²(ℝⁿ); a [`Plane`] is a p-dimensional
//! subspace carried both as an orthonormal frame and as its orthogonal
//! projection P_W. The W-trace of a form is the pairing ⟨A, P_W⟩ = tr(A·P_W).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default finite-difference step, in coordinate units.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Relative residual below which a frame column is treated as dependent.
const RANK_TOL: f64 = 1e-10;

/// Deterministic generator used everywhere a seed is accepted.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An n×n real symmetric matrix, viewed as a quadratic form.
#[derive(Clone, PartialEq)]
pub struct SymForm {
    m: DMatrix<f64>,
}

impl SymForm {
    /// Wraps a square matrix, replacing it by its symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dim {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("empty form".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("form has non-finite entries".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymForm { m: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty form".into()));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::Dim {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        SymForm {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SymForm {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SymForm {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// c·I
    pub fn scalar(n: usize, c: f64) -> Self {
        Self::identity(n) * c
    }

    /// The square v∘v = v·vᵀ.
    pub fn outer(v: &DVector<f64>) -> Self {
        SymForm { m: v * v.transpose() }
    }

    /// The symmetric product v∘w = ½(v·wᵀ + w·vᵀ).
    pub fn sym_product(v: &DVector<f64>, w: &DVector<f64>) -> Self {
        SymForm {
            m: (v * w.transpose() + w * v.transpose()) * 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.m.row(i).iter().copied().collect())
            .collect()
    }

    /// Trace inner product ⟨A, B⟩ = tr(A·B).
    pub fn inner(&self, other: &SymForm) -> f64 {
        self.m.component_mul(&other.m).sum()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// vᵀ·A·v
    pub fn quadratic(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }

    /// vᵀ·A·w
    pub fn quadratic_pair(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * w))
    }

    /// Eigen-decomposition with eigenvalues in nondecreasing order.
    pub fn spectrum(&self) -> Spectrum {
        let eig = self.m.clone().symmetric_eigen();
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum { values, vectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().values.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().values[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let s = self.spectrum();
        s.values[s.values.len() - 1]
    }

    /// Pulls the form back along a frame: Fᵀ·A·F.
    pub fn restrict(&self, frame: &DMatrix<f64>) -> Result<SymForm> {
        if frame.nrows() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                found: frame.nrows(),
            });
        }
        SymForm::new(frame.transpose() * &self.m * frame)
    }

    /// Pushes a form forward along a frame: F·A·Fᵀ.
    pub fn conjugate(&self, frame: &DMatrix<f64>) -> Result<SymForm> {
        if frame.ncols() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                found: frame.ncols(),
            });
        }
        SymForm::new(frame * &self.m * frame.transpose())
    }

    pub fn max_abs_diff(&self, other: &SymForm) -> f64 {
        (&self.m - &other.m).amax()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).amax()
    }
}

impl fmt::Debug for SymForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymForm{:?}", self.rows())
    }
}

impl Add for &SymForm {
    type Output = SymForm;
    fn add(self, rhs: &SymForm) -> SymForm {
        SymForm { m: &self.m + &rhs.m }
    }
}

impl Add for SymForm {
    type Output = SymForm;
    fn add(self, rhs: SymForm) -> SymForm {
        &self + &rhs
    }
}

impl Sub for &SymForm {
    type Output = SymForm;
    fn sub(self, rhs: &SymForm) -> SymForm {
        SymForm { m: &self.m - &rhs.m }
    }
}

impl Sub for SymForm {
    type Output = SymForm;
    fn sub(self, rhs: SymForm) -> SymForm {
        &self - &rhs
    }
}

impl Neg for &SymForm {
    type Output = SymForm;
    fn neg(self) -> SymForm {
        SymForm { m: -&self.m }
    }
}

impl Neg for SymForm {
    type Output = SymForm;
    fn neg(self) -> SymForm {
        -&self
    }
}

impl Mul<f64> for &SymForm {
    type Output = SymForm;
    fn mul(self, c: f64) -> SymForm {
        SymForm { m: &self.m * c }
    }
}

impl Mul<f64> for SymForm {
    type Output = SymForm;
    fn mul(self, c: f64) -> SymForm {
        &self * c
    }
}

#[derive(Serialize, Deserialize)]
struct SymFormWire {
    dim: usize,
    entries: Vec<Vec<f64>>,
}

impl Serialize for SymForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SymFormWire {
            dim: self.dim(),
            entries: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = SymFormWire::deserialize(d)?;
        if w.entries.len() != w.dim {
            return Err(serde::de::Error::custom(format!(
                "dim {} but {} rows",
                w.dim,
                w.entries.len()
            )));
        }
        let form = SymForm::from_rows(&w.entries).map_err(serde::de::Error::custom)?;
        let raw = DMatrix::from_fn(w.dim, w.dim, |i, j| w.entries[i][j]);
        if (&raw - raw.transpose()).amax() > 1e-12 * (1.0 + raw.amax()) {
            return Err(serde::de::Error::custom("entries are not symmetric"));
        }
        Ok(form)
    }
}

/// Eigenvalues (ascending) with matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// A p-dimensional subspace of ℝⁿ.
#[derive(Clone)]
pub struct Plane {
    frame: DMatrix<f64>,
    projection: SymForm,
}

impl Plane {
    /// Orthonormalizes the columns of `frame` (Gram–Schmidt with one
    /// re-orthogonalization pass) and builds the projection P_W = F·Fᵀ.
    pub fn from_frame(frame: DMatrix<f64>) -> Result<Plane> {
        let (n, p) = frame.shape();
        if p == 0 || p > n {
            return Err(Error::InvalidArgument(format!(
                "plane dimension {p} not in 1..={n}"
            )));
        }
        let mut q = DMatrix::<f64>::zeros(n, p);
        for j in 0..p {
            let original = frame.column(j).into_owned();
            let scale = original.norm();
            if !scale.is_finite() || scale == 0.0 {
                return Err(Error::Rank {
                    column: j,
                    residual: 0.0,
                });
            }
            let mut v = original.clone();
            for _ in 0..2 {
                for k in 0..j {
                    let qk = q.column(k);
                    let c = qk.dot(&v);
                    v -= qk * c;
                }
            }
            let r = v.norm();
            if r <= RANK_TOL * scale {
                return Err(Error::Rank {
                    column: j,
                    residual: r / scale,
                });
            }
            q.set_column(j, &(v / r));
        }
        let projection = SymForm::new(&q * q.transpose())?;
        Ok(Plane {
            frame: q,
            projection,
        })
    }

    pub fn from_columns(n: usize, columns: &[Vec<f64>]) -> Result<Plane> {
        for c in columns {
            if c.len() != n {
                return Err(Error::Dim {
                    expected: n,
                    found: c.len(),
                });
            }
        }
        Self::from_frame(DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]))
    }

    /// span{e_k : k ∈ axes}
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Plane> {
        let mut f = DMatrix::zeros(n, axes.len());
        for (j, &k) in axes.iter().enumerate() {
            if k >= n {
                return Err(Error::InvalidArgument(format!("axis {k} >= {n}")));
            }
            f[(k, j)] = 1.0;
        }
        Self::from_frame(f)
    }

    pub fn line(v: &[f64]) -> Result<Plane> {
        Self::from_columns(v.len(), &[v.to_vec()])
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn projection(&self) -> &SymForm {
        &self.projection
    }

    /// P_{W⊥} = I − P_W
    pub fn complement_projection(&self) -> SymForm {
        &SymForm::identity(self.ambient_dim()) - &self.projection
    }

    /// ‖P_W − P_V‖_F
    pub fn distance(&self, other: &Plane) -> f64 {
        if self.ambient_dim() != other.ambient_dim() {
            return f64::INFINITY;
        }
        (&self.projection - &other.projection).frobenius_norm()
    }

    pub fn same_plane(&self, other: &Plane) -> bool {
        self.dim() == other.dim() && self.distance(other) <= 1e-8
    }

    /// Largest principal angle to a plane of the same dimension, in radians.
    pub fn max_principal_angle(&self, other: &Plane) -> f64 {
        let c = self.frame.transpose() * &other.frame;
        let sv = c.singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
        smin.acos()
    }

    /// Length of the component of v inside W.
    pub fn component_norm(&self, v: &DVector<f64>) -> f64 {
        (self.frame.transpose() * v).norm()
    }
}

impl fmt::Debug for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<Vec<f64>> = (0..self.dim())
            .map(|j| self.frame.column(j).iter().copied().collect())
            .collect();
        write!(f, "Plane(n={}, p={}, {:?})", self.ambient_dim(), self.dim(), cols)
    }
}

#[derive(Serialize, Deserialize)]
struct PlaneWire {
    n: usize,
    p: usize,
    frame: Vec<Vec<f64>>,
}

impl Plane {
    /// Frame rows, row-major n×p.
    pub fn frame_rows(&self) -> Vec<Vec<f64>> {
        (0..self.ambient_dim())
            .map(|i| self.frame.row(i).iter().copied().collect())
            .collect()
    }

    pub fn from_frame_rows(n: usize, p: usize, rows: &[Vec<f64>]) -> Result<Plane> {
        if rows.len() != n {
            return Err(Error::Dim {
                expected: n,
                found: rows.len(),
            });
        }
        for r in rows {
            if r.len() != p {
                return Err(Error::Dim {
                    expected: p,
                    found: r.len(),
                });
            }
        }
        Plane::from_frame(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }
}

impl Serialize for Plane {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlaneWire {
            n: self.ambient_dim(),
            p: self.dim(),
            frame: self.frame_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Plane {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = PlaneWire::deserialize(d)?;
        Plane::from_frame_rows(w.n, w.p, &w.frame).map_err(serde::de::Error::custom)
    }
}

/// Orthonormalizes `frame` and returns the plane it spans.
pub fn projection_from_frame(frame: &DMatrix<f64>) -> Result<Plane> {
    Plane::from_frame(frame.clone())
}

/// tr_W A = ⟨A, P_W⟩
pub fn trace_pairing(a: &SymForm, w: &Plane) -> Result<f64> {
    if a.dim() != w.ambient_dim() {
        return Err(Error::Dim {
            expected: w.ambient_dim(),
            found: a.dim(),
        });
    }
    Ok(a.inner(w.projection()))
}

/// tr(Fᵀ·A·F) over the orthonormal frame; the second evaluation path for tr_W A.
pub fn frame_trace(a: &SymForm, w: &Plane) -> Result<f64> {
    Ok(a.restrict(w.frame())?.trace())
}

/// (sum of the p smallest eigenvalues, sum of the p largest).
pub fn eigen_partial_sums(a: &SymForm, p: usize) -> Result<(f64, f64)> {
    let n = a.dim();
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!("p = {p} not in 1..={n}")));
    }
    let ev = a.eigenvalues();
    let lo = ev[..p].iter().sum();
    let hi = ev[n - p..].iter().sum();
    Ok((lo, hi))
}

/// `count` Haar-distributed p-planes in ℝⁿ, reproducible for a fixed seed.
pub fn sample_frames(n: usize, p: usize, count: usize, seed: u64) -> Result<Vec<Plane>> {
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!("p = {p} not in 1..={n}")));
    }
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        out.push(random_plane(n, p, &mut rng));
    }
    Ok(out)
}

/// One Haar-distributed p-plane: a standard Gaussian n×p matrix, orthonormalized.
pub fn random_plane<R: Rng>(n: usize, p: usize, rng: &mut R) -> Plane {
    loop {
        let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(plane) = Plane::from_frame(g) {
            return plane;
        }
    }
}

/// A random symmetric form with spectral norm uniform in [0, bound].
pub fn random_symmetric<R: Rng>(n: usize, bound: f64, rng: &mut R) -> SymForm {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = SymForm::new(g).expect("square");
    let ev = s.eigenvalues();
    let norm = ev[0].abs().max(ev[n - 1].abs()).max(1e-300);
    let target: f64 = rng.random_range(0.0..=bound);
    s * (target / norm)
}

type ValueFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync;
type HessFn = dyn Fn(&[f64]) -> Result<SymForm> + Send + Sync;

/// A real function on (a region of) ℝⁿ with optional analytic derivatives.
///
/// Missing derivatives fall back to centered finite differences with step
/// `fd_step`.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: Arc<ValueFn>,
    grad: Option<Arc<GradFn>>,
    hess: Option<Arc<HessFn>>,
    fd_step: f64,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic_grad", &self.grad.is_some())
            .field("analytic_hess", &self.hess.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl ScalarField {
    /// Infallible closure; non-finite values are reported as evaluation errors.
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::fallible(dim, move |x| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::FieldEval {
                    point: x.to_vec(),
                    reason: format!("non-finite value {v}"),
                })
            }
        })
    }

    pub fn fallible<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            value: Arc::new(f),
            grad: None,
            hess: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&[f64]) -> Result<SymForm> + Send + Sync + 'static,
    {
        self.hess = Some(Arc::new(h));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        assert!(h > 0.0, "fd step must be positive");
        self.fd_step = h;
        self
    }

    /// Drops analytic derivatives so that every derivative is finite-differenced.
    pub fn values_only(&self) -> Self {
        ScalarField {
            dim: self.dim,
            value: self.value.clone(),
            grad: None,
            hess: None,
            fd_step: self.fd_step,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hess.is_some()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dim {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        match &self.grad {
            Some(g) => g(x),
            None => fd_gradient(self, x),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymForm> {
        self.check_dim(x)?;
        match &self.hess {
            Some(h) => h(x),
            None => fd_hessian(self, x),
        }
    }
}

/// Centered first differences.
pub fn fd_gradient(f: &ScalarField, x: &[f64]) -> Result<DVector<f64>> {
    let h = f.fd_step;
    let mut y = x.to_vec();
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f.value(&y)?;
        y[i] = x[i] - h;
        let fm = f.value(&y)?;
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Centered second differences of the field values, symmetrized.
/// Steps are the representable offsets (x + h) − x, so the result is exact up
/// to roundoff in the values on quadratic polynomials.
pub fn fd_hessian(f: &ScalarField, x: &[f64]) -> Result<SymForm> {
    f.check_dim(x)?;
    let n = x.len();
    let h = f.fd_step;
    let up: Vec<f64> = x.iter().map(|&t| (t + h) - t).collect();
    let down: Vec<f64> = x.iter().map(|&t| t - (t - h)).collect();
    let f0 = f.value(x)?;
    let mut y = x.to_vec();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        y[i] = x[i] + up[i];
        let fp = f.value(&y)?;
        y[i] = x[i] - down[i];
        let fm = f.value(&y)?;
        y[i] = x[i];
        m[(i, i)] = 2.0 * ((fp - f0) / up[i] - (f0 - fm) / down[i]) / (up[i] + down[i]);
        for j in 0..i {
            let mut corner = |si: bool, sj: bool| -> Result<f64> {
                y[i] = if si { x[i] + up[i] } else { x[i] - down[i] };
                y[j] = if sj { x[j] + up[j] } else { x[j] - down[j] };
                let v = f.value(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(true, true)? - corner(true, false)? - corner(false, true)? + corner(false, false)?)
                / ((up[i] + down[i]) * (up[j] + down[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymForm::new(m)
}

/// Quadratic field ½xᵀAx + bᵀx + c with exact derivatives.
pub fn quadratic_field(a: &SymForm, b: Option<DVector<f64>>, c: f64) -> ScalarField {
    let n = a.dim();
    let b = b.unwrap_or_else(|| DVector::zeros(n));
    let (a1, b1) = (a.clone(), b.clone());
    let (a2, b2) = (a.clone(), b);
    let a3 = a.clone();
    ScalarField::new(n, move |x| {
        let v = DVector::from_column_slice(x);
        0.5 * a1.quadratic(&v) + b1.dot(&v) + c
    })
    .with_gradient(move |x| Ok(a2.matrix() * DVector::from_column_slice(x) + &b2))
    .with_hessian(move |_| Ok(a3.clone()))
}
