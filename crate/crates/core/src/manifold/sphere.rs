//! Failure of the maximum principle on S² for the horizontal distribution.
//!
//! With y the height and H = ker(dy) the horizontal circles, the function
//! φ = ½(1 − y²) satisfies tr_H Hess φ = y² ≥ 0 but has an interior maximum on
//! the equator of any band around it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{riemannian_hessian, w_laplacian, ChartMetric, FrameField};
use crate::error::Result;
use crate::symcore::{fd_gradient, fd_hessian, ScalarField, SymForm};

const POLE_MARGIN: f64 = 0.05;
const BAND: f64 = 0.9;

#[derive(Clone, Debug, Serialize)]
pub struct SphereReport {
    pub points: usize,
    /// max |tr_H Hess φ − y²|
    pub max_trace_error: f64,
    pub min_trace: f64,
    pub trace_at_equator: f64,
    pub trace_at_half: f64,
    /// max φ over the open band |y| < 0.9 and over its boundary circles.
    pub interior_max: f64,
    pub boundary_max: f64,
    pub mp_failure: bool,
    /// max entrywise gap between the chart Hessian and the ambient formula
    /// Hess^{ℝ³}φ(V,W) − ⟨V,W⟩·ν(φ).
    pub ambient_max_error: f64,
    /// (y, tr_H Hess φ) on the sampled grid.
    pub rows: Vec<(f64, f64)>,
}

fn embedding(th: f64, ph: f64) -> DVector<f64> {
    DVector::from_vec(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()])
}

fn tangent_basis(th: f64, ph: f64) -> [DVector<f64>; 2] {
    [
        DVector::from_vec(vec![th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()]),
        DVector::from_vec(vec![-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0]),
    ]
}

/// Runs the check on a grid × grid set of chart points with the poles excluded.
pub fn sphere_counterexample(grid: usize) -> Result<SphereReport> {
    let grid = grid.max(2);
    let gm = ChartMetric::sphere();
    let phi = ScalarField::new(2, |x| 0.5 * x[0].sin().powi(2));
    let ambient = ScalarField::new(3, |x| 0.5 * (1.0 - x[2] * x[2]));
    let horizontal: Box<FrameField> = Box::new(|_| Ok(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])));

    let trace_at = |th: f64| w_laplacian(&gm, &phi, &*horizontal, &[th, 0.3]);
    let trace_at_equator = trace_at(std::f64::consts::FRAC_PI_2)?;
    let trace_at_half = trace_at(0.5f64.acos())?;

    let span = std::f64::consts::PI - 2.0 * POLE_MARGIN;
    let mut rows = Vec::with_capacity(grid * grid);
    let (mut max_err, mut min_trace, mut amb_err) = (0.0f64, f64::INFINITY, 0.0f64);
    let (mut interior_max, mut boundary_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..grid {
        let th = POLE_MARGIN + span * i as f64 / (grid - 1) as f64;
        let y = th.cos();
        for j in 0..grid {
            let ph = std::f64::consts::TAU * j as f64 / grid as f64;
            let x = [th, ph];
            let tr = w_laplacian(&gm, &phi, &*horizontal, &x)?;
            max_err = max_err.max((tr - y * y).abs());
            min_trace = min_trace.min(tr);
            rows.push((y, tr));
            let v = phi.value(&x)?;
            if y.abs() < BAND {
                interior_max = interior_max.max(v);
            }

            let chart_hess = riemannian_hessian(&gm, &phi, &x)?;
            let p = embedding(th, ph);
            let amb_h = fd_hessian(&ambient, p.as_slice())?;
            let normal_derivative = fd_gradient(&ambient, p.as_slice())?.dot(&p);
            let basis = tangent_basis(th, ph);
            let g = gm.metric(&x)?;
            let formula = SymForm::new(DMatrix::from_fn(2, 2, |a, b| {
                amb_h.quadratic_pair(&basis[a], &basis[b]) - g.entry(a, b) * normal_derivative
            }))?;
            amb_err = amb_err.max(chart_hess.max_abs_diff(&formula));
        }
    }
    for th in [BAND.acos(), (-BAND).acos()] {
        boundary_max = boundary_max.max(phi.value(&[th, 0.0])?);
    }
    let mp_failure = interior_max > boundary_max + 1e-9 && min_trace >= -1e-4;
    Ok(SphereReport {
        points: grid * grid,
        max_trace_error: max_err,
        min_trace,
        trace_at_equator,
        trace_at_half,
        interior_max,
        boundary_max,
        mp_failure,
        ambient_max_error: amb_err,
        rows,
    })
}
