//! Parametrized surfaces in ℝᴺ and the restriction identity
//! Δ_M(u|_M) = tr_{TM} Hess u − H_M·u.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::{riemannian_hessian, ChartMetric};
use crate::error::{Error, Result};
use crate::symcore::{seeded_rng, ScalarField, SymForm};

type ParamFn = dyn Fn(f64, f64) -> DVector<f64> + Send + Sync;

/// Step for first derivatives of the parametrization.
pub const FIRST_STEP: f64 = 1e-4;
/// Step for second derivatives of the parametrization.
pub const SECOND_STEP: f64 = 1e-3;
/// |H_M| below this at every sample certifies minimality.
pub const MINIMAL_TOL: f64 = 1e-5;

#[derive(Clone)]
pub struct ParamSurface {
    pub name: String,
    ambient: usize,
    param: Arc<ParamFn>,
    /// Sampling rectangle [s0, s1] × [t0, t1].
    pub s_range: (f64, f64),
    pub t_range: (f64, f64),
}

impl fmt::Debug for ParamSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParamSurface({} in R^{})", self.name, self.ambient)
    }
}

/// First and second derivatives of X at a parameter point.
struct Jet {
    x: DVector<f64>,
    d1: [DVector<f64>; 2],
    d2: [[DVector<f64>; 2]; 2],
}

impl ParamSurface {
    pub fn new<F>(name: &str, ambient: usize, s_range: (f64, f64), t_range: (f64, f64), f: F) -> Self
    where
        F: Fn(f64, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        ParamSurface {
            name: name.into(),
            ambient,
            param: Arc::new(f),
            s_range,
            t_range,
        }
    }

    pub fn catenoid() -> Self {
        Self::new("catenoid", 3, (-1.0, 1.0), (0.0, std::f64::consts::TAU), |s, t| {
            DVector::from_vec(vec![s.cosh() * t.cos(), s.cosh() * t.sin(), s])
        })
    }

    pub fn helicoid() -> Self {
        Self::new("helicoid", 3, (-1.0, 1.0), (-3.0, 3.0), |s, t| {
            DVector::from_vec(vec![s * t.cos(), s * t.sin(), t])
        })
    }

    pub fn plane() -> Self {
        Self::new("plane", 3, (-1.0, 1.0), (-1.0, 1.0), |s, t| DVector::from_vec(vec![s, t, 0.0]))
    }

    /// Unit sphere in polar-angle coordinates, poles excluded.
    pub fn sphere() -> Self {
        Self::new("sphere", 3, (0.3, std::f64::consts::PI - 0.3), (0.0, std::f64::consts::TAU), |s, t| {
            DVector::from_vec(vec![s.sin() * t.cos(), s.sin() * t.sin(), s.cos()])
        })
    }

    pub fn builtins() -> Vec<ParamSurface> {
        vec![Self::catenoid(), Self::helicoid(), Self::plane(), Self::sphere()]
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn point(&self, s: f64, t: f64) -> DVector<f64> {
        (self.param)(s, t)
    }

    fn jet(&self, s: f64, t: f64) -> Jet {
        let f = &self.param;
        let h = FIRST_STEP;
        let k = SECOND_STEP;
        let x = f(s, t);
        let ds = (f(s + h, t) - f(s - h, t)) / (2.0 * h);
        let dt = (f(s, t + h) - f(s, t - h)) / (2.0 * h);
        let dss = (f(s + k, t) - &x * 2.0 + f(s - k, t)) / (k * k);
        let dtt = (f(s, t + k) - &x * 2.0 + f(s, t - k)) / (k * k);
        let dst = (f(s + k, t + k) - f(s + k, t - k) - f(s - k, t + k) + f(s - k, t - k)) / (4.0 * k * k);
        Jet {
            x,
            d1: [ds, dt],
            d2: [[dss, dst.clone()], [dst, dtt]],
        }
    }

    /// Induced metric gₐᵦ = Xₐ·Xᵦ.
    pub fn induced_metric(&self, s: f64, t: f64) -> Result<SymForm> {
        let j = self.jet(s, t);
        let g = SymForm::new(DMatrix::from_fn(2, 2, |a, b| j.d1[a].dot(&j.d1[b])))?;
        if g.matrix().determinant() < 1e-12 {
            return Err(Error::SurfaceDegenerate { s, t });
        }
        Ok(g)
    }

    /// The chart metric of the surface, with metric entries from finite differences.
    pub fn chart(&self) -> ChartMetric {
        let me = self.clone();
        ChartMetric::new(&format!("{}-induced", self.name), 2, move |x| {
            me.induced_metric(x[0], x[1])
        })
    }

    /// Mean curvature vector H_M = −gᵃᵇ(Xₐᵦ)^⊥ (outward for round spheres).
    pub fn mean_curvature(&self, s: f64, t: f64) -> Result<DVector<f64>> {
        let j = self.jet(s, t);
        self.mean_curvature_from(&j, s, t)
    }

    fn mean_curvature_from(&self, j: &Jet, s: f64, t: f64) -> Result<DVector<f64>> {
        let g = SymForm::new(DMatrix::from_fn(2, 2, |a, b| j.d1[a].dot(&j.d1[b])))?;
        let ginv = g.matrix().clone().try_inverse().ok_or(Error::SurfaceDegenerate { s, t })?;
        if g.matrix().determinant() < 1e-12 {
            return Err(Error::SurfaceDegenerate { s, t });
        }
        let mut trace = DVector::zeros(self.ambient);
        for a in 0..2 {
            for b in 0..2 {
                trace += &j.d2[a][b] * ginv[(a, b)];
            }
        }
        // Remove the tangential part: project onto span{X_s, X_t} via g⁻¹.
        let coeffs = DVector::from_fn(2, |a, _| j.d1[a].dot(&trace));
        let tang_coords = &ginv * coeffs;
        let tangential = &j.d1[0] * tang_coords[0] + &j.d1[1] * tang_coords[1];
        Ok(-(trace - tangential))
    }

    fn sample_params(&self, samples: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = seeded_rng(seed);
        (0..samples)
            .map(|_| {
                (
                    rng.random_range(self.s_range.0..self.s_range.1),
                    rng.random_range(self.t_range.0..self.t_range.1),
                )
            })
            .collect()
    }

    /// max |H_M| over random samples.
    pub fn max_mean_curvature(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (s, t) in self.sample_params(samples, seed) {
            m = m.max(self.mean_curvature(s, t)?.norm());
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionSample {
    pub s: f64,
    pub t: f64,
    /// Δ_M(u∘X) from the induced metric.
    pub intrinsic: f64,
    /// tr_{TM} Hess u from the ambient Hessian.
    pub ambient_trace: f64,
    /// ⟨H_M, ∇u⟩
    pub mean_curvature_term: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionReport {
    pub surface: String,
    /// max |Δ_M(u|_M) − tr_{TM} Hess u + H_M·u|
    pub max_defect: f64,
    /// max |Δ_M(u|_M) − tr_{TM} Hess u|
    pub max_minimal_defect: f64,
    pub min_intrinsic_laplacian: f64,
    pub is_minimal: bool,
    pub max_mean_curvature: f64,
    pub first_step: f64,
    pub second_step: f64,
    pub samples: Vec<RestrictionSample>,
}

/// Compares the intrinsic Laplacian of u|_M with the ambient trace over TM,
/// with and without the mean-curvature correction.
pub fn restriction_check(m: &ParamSurface, u: &ScalarField, samples: usize, seed: u64) -> Result<RestrictionReport> {
    if u.dim() != m.ambient {
        return Err(Error::Dim {
            expected: m.ambient,
            found: u.dim(),
        });
    }
    let chart = m.chart();
    let (mc, uc) = (m.clone(), u.clone());
    let pulled = ScalarField::fallible(2, move |x| uc.value(mc.point(x[0], x[1]).as_slice()))
        .with_fd_step(SECOND_STEP);
    let mut out = Vec::with_capacity(samples);
    let (mut max_defect, mut max_min_defect, mut min_lap, mut max_h) =
        (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for (s, t) in m.sample_params(samples, seed) {
        let x = [s, t];
        let g = chart.metric(&x).map_err(|_| Error::SurfaceDegenerate { s, t })?;
        let ginv = g.matrix().clone().try_inverse().ok_or(Error::SurfaceDegenerate { s, t })?;
        let hess_m = riemannian_hessian(&chart, &pulled, &x)?;
        let intrinsic = ginv.component_mul(hess_m.matrix()).sum();

        let jet = m.jet(s, t);
        let hu = u.hessian(jet.x.as_slice())?;
        let du = u.gradient(jet.x.as_slice())?;
        let mut ambient_trace = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                ambient_trace += ginv[(a, b)] * hu.quadratic_pair(&jet.d1[a], &jet.d1[b]);
            }
        }
        let hm = m.mean_curvature_from(&jet, s, t)?;
        let hterm = hm.dot(&du);
        max_h = max_h.max(hm.norm());
        max_defect = max_defect.max((intrinsic - ambient_trace + hterm).abs());
        max_min_defect = max_min_defect.max((intrinsic - ambient_trace).abs());
        min_lap = min_lap.min(intrinsic);
        out.push(RestrictionSample {
            s,
            t,
            intrinsic,
            ambient_trace,
            mean_curvature_term: hterm,
        });
    }
    Ok(RestrictionReport {
        surface: m.name.clone(),
        max_defect,
        max_minimal_defect: max_min_defect,
        min_intrinsic_laplacian: min_lap,
        is_minimal: max_h <= MINIMAL_TOL,
        max_mean_curvature: max_h,
        first_step: FIRST_STEP,
        second_step: SECOND_STEP,
        samples: out,
    })
}
