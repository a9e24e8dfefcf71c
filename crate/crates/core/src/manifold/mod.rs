//! Chart-level Riemannian calculus: Christoffel symbols, Hessians and
//! W-Laplacians, plus the constant-rank normalization of linear operators.

mod normalize;
mod sphere;
mod surface;

pub use normalize::{normalize_constant_rank, Normalization};
pub use sphere::{sphere_counterexample, SphereReport};
pub use surface::{restriction_check, ParamSurface, RestrictionReport, RestrictionSample};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symcore::{ScalarField, SymForm};

type MetricFn = dyn Fn(&[f64]) -> Result<SymForm> + Send + Sync;
/// A point-dependent frame given in coordinates: column a holds the components of e_a.
pub type FrameField = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

const MIN_METRIC_EIGEN: f64 = 1e-8;

/// A Riemannian metric on a coordinate chart.
#[derive(Clone)]
pub struct ChartMetric {
    pub name: String,
    dim: usize,
    g: Arc<MetricFn>,
    pub fd_step: f64,
}

impl fmt::Debug for ChartMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChartMetric({}, dim {})", self.name, self.dim)
    }
}

impl ChartMetric {
    pub fn new<F>(name: &str, dim: usize, g: F) -> Self
    where
        F: Fn(&[f64]) -> Result<SymForm> + Send + Sync + 'static,
    {
        ChartMetric {
            name: name.into(),
            dim,
            g: Arc::new(g),
            fd_step: 1e-4,
        }
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(&format!("euclidean{n}"), n, move |_| Ok(SymForm::identity(n)))
    }

    /// (r, θ) on ℝ² minus the origin: g = diag(1, r²).
    pub fn polar() -> Self {
        Self::new("polar", 2, |x| Ok(SymForm::diagonal(&[1.0, x[0] * x[0]])))
    }

    /// (θ, φ) on the unit sphere, θ the polar angle: g = diag(1, sin²θ).
    pub fn sphere() -> Self {
        Self::new("sphere", 2, |x| {
            let s = x[0].sin();
            Ok(SymForm::diagonal(&[1.0, s * s]))
        })
    }

    /// Induced metric of the catenoid (cosh s cos t, cosh s sin t, s): cosh²s·I.
    pub fn catenoid() -> Self {
        Self::new("catenoid", 2, |x| {
            let c = x[0].cosh();
            Ok(SymForm::scalar(2, c * c))
        })
    }

    /// Induced metric of the helicoid (s cos t, s sin t, t): diag(1, 1 + s²).
    pub fn helicoid() -> Self {
        Self::new("helicoid", 2, |x| Ok(SymForm::diagonal(&[1.0, 1.0 + x[0] * x[0]])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// g(x), checked positive definite.
    pub fn metric(&self, x: &[f64]) -> Result<SymForm> {
        if x.len() != self.dim {
            return Err(Error::Dim {
                expected: self.dim,
                found: x.len(),
            });
        }
        let g = (self.g)(x)?;
        let m = g.min_eigenvalue();
        if !(m > MIN_METRIC_EIGEN) {
            return Err(Error::MetricSingular {
                point: x.to_vec(),
                min_eigenvalue: m,
            });
        }
        Ok(g)
    }

    pub fn inverse_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric(x)?;
        g.matrix().clone().try_inverse().ok_or(Error::MetricSingular {
            point: x.to_vec(),
            min_eigenvalue: 0.0,
        })
    }

    /// ∂_k g_ij by centered differences, indexed [k][(i, j)].
    pub fn metric_derivatives(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let h = self.fd_step;
        let mut y = x.to_vec();
        (0..self.dim)
            .map(|k| {
                y[k] = x[k] + h;
                let gp = (self.g)(&y);
                y[k] = x[k] - h;
                let gm = (self.g)(&y);
                y[k] = x[k];
                Ok((gp?.matrix() - gm?.matrix()) / (2.0 * h))
            })
            .collect()
    }
}

/// Γᵏᵢⱼ stored densely.
#[derive(Clone, Debug)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Σ_ij S^{ij} Γᵏᵢⱼ for each k.
    pub fn contract(&self, s: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += s[(i, j)] * self.get(k, i, j);
                }
            }
            acc
        })
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m = m.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        m
    }
}

/// Γᵏᵢⱼ = ½ gᵏˡ(∂ᵢgⱼₗ + ∂ⱼgᵢₗ − ∂ₗgᵢⱼ)
pub fn christoffel(gm: &ChartMetric, x: &[f64]) -> Result<Christoffel> {
    let n = gm.dim();
    let ginv = gm.inverse_metric(x)?;
    let dg = gm.metric_derivatives(x)?;
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                data[(k * n + i) * n + j] = 0.5 * acc;
                data[(k * n + j) * n + i] = 0.5 * acc;
            }
        }
    }
    Ok(Christoffel { n, data })
}

/// (Hess u)ᵢⱼ = ∂ᵢ∂ⱼu − Γᵏᵢⱼ∂ₖu
pub fn riemannian_hessian(gm: &ChartMetric, u: &ScalarField, x: &[f64]) -> Result<SymForm> {
    let gamma = christoffel(gm, x)?;
    let d2 = u.hessian(x)?;
    let du = u.gradient(x)?;
    let n = gm.dim();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let mut c = 0.0;
        for k in 0..n {
            c += gamma.get(k, i, j) * du[k];
        }
        d2.entry(i, j) - c
    });
    SymForm::new(m)
}

/// Gram–Schmidt in the inner product g.
pub fn g_orthonormalize(g: &SymForm, frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = frame.shape();
    if n != g.dim() {
        return Err(Error::Dim {
            expected: g.dim(),
            found: n,
        });
    }
    let gm = g.matrix();
    let mut out = DMatrix::zeros(n, p);
    for j in 0..p {
        let mut v = frame.column(j).into_owned();
        let scale = (v.transpose() * gm * &v)[(0, 0)].max(0.0).sqrt();
        for _ in 0..2 {
            for k in 0..j {
                let e = out.column(k).into_owned();
                let c = (e.transpose() * gm * &v)[(0, 0)];
                v -= e * c;
            }
        }
        let r = (v.transpose() * gm * &v)[(0, 0)].max(0.0).sqrt();
        if !(r > 1e-10 * scale.max(1e-300)) {
            return Err(Error::Frame(format!("frame column {j} is dependent")));
        }
        out.set_column(j, &(v / r));
    }
    Ok(out)
}

/// Extends a frame for W to a full g-orthonormal frame whose first p columns span W.
pub fn complete_frame(g: &SymForm, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = w.shape();
    let mut cols: Vec<DVector<f64>> = (0..p).map(|j| w.column(j).into_owned()).collect();
    let base = g_orthonormalize(g, w)?;
    let gm = g.matrix();
    let mut current = base.clone();
    for k in 0..n {
        if current.ncols() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        let mut trial = cols.clone();
        trial.push(e.clone());
        let m = DMatrix::from_columns(&trial);
        if let Ok(q) = g_orthonormalize(g, &m) {
            let last = q.column(q.ncols() - 1).into_owned();
            let resid = (0..current.ncols())
                .map(|c| (current.column(c).transpose() * gm * &last)[(0, 0)].abs())
                .fold(0.0, f64::max);
            if resid < 1e-8 {
                cols.push(e);
                current = q;
            }
        }
    }
    if current.ncols() != n {
        return Err(Error::Frame("could not complete the frame".into()));
    }
    Ok(current)
}

/// Δ_W u = tr_W Hess u over a g-orthonormalization of the frame field.
pub fn w_laplacian(gm: &ChartMetric, u: &ScalarField, w: &FrameField, x: &[f64]) -> Result<f64> {
    let g = gm.metric(x)?;
    let f = w(x)?;
    if f.nrows() != gm.dim() || f.ncols() == 0 || f.ncols() > gm.dim() {
        return Err(Error::Frame(format!(
            "frame of shape {:?} in a {}-dimensional chart",
            f.shape(),
            gm.dim()
        )));
    }
    let e = g_orthonormalize(&g, &f)?;
    let hess = riemannian_hessian(gm, u, x)?;
    Ok(hess.restrict(&e)?.trace())
}

/// Δ_W u = ⟨E, D²u⟩ − ⟨Γᵗ(E), Du⟩ with E = h·P·hᵗ, from coordinate
/// derivatives of u (always finite differences) and Christoffel symbols.
pub fn w_laplacian_coordinate_form(
    gm: &ChartMetric,
    u: &ScalarField,
    h: &FrameField,
    p: usize,
    x: &[f64],
) -> Result<f64> {
    let n = gm.dim();
    let g = gm.metric(x)?;
    let f = h(x)?;
    if f.shape() != (n, n) || p == 0 || p > n {
        return Err(Error::Frame(format!("expected an {n}×{n} frame, p in 1..={n}")));
    }
    let ortho = f.transpose() * g.matrix() * &f;
    if (ortho - DMatrix::identity(n, n)).amax() > 1e-6 {
        return Err(Error::Frame("frame is not g-orthonormal".into()));
    }
    let hp = f.columns(0, p).into_owned();
    let e = &hp * hp.transpose();
    let values = u.values_only();
    let d2 = crate::symcore::fd_hessian(&values, x)?;
    let du = crate::symcore::fd_gradient(&values, x)?;
    let gamma = christoffel(gm, x)?;
    Ok(e.component_mul(d2.matrix()).sum() - gamma.contract(&e).dot(&du))
}
