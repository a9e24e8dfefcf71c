use nalgebra::{DMatrix, DVector};

use super::{Frame, GridFunction, StencilFamily};
use crate::error::{Error, Result};
use crate::symcore::SymForm;

/// Lawson–Hanson non-negative least squares: min ‖Ax − b‖ with x ≥ 0.
/// Returns (x, residual norm).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let (m, k) = a.shape();
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let eps = 1e-12 * (1.0 + a.norm()) * (1.0 + b.norm());
    for _ in 0..(3 * k + 10) {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..k)
            .filter(|&j| !passive[j] && w[j] > eps)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = DMatrix::from_fn(m, idx.len(), |r, c| a[(r, idx[c])]);
            let z = match sub.clone().svd(true, true).solve(b, 1e-14) {
                Ok(z) => z,
                Err(_) => break,
            };
            if z.iter().all(|&v| v > 0.0) {
                for (c, &i) in idx.iter().enumerate() {
                    x[i] = z[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &i) in idx.iter().enumerate() {
                if z[c] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[c]));
                }
            }
            for (c, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[c] - x[i]);
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    let r = (b - a * &x).norm();
    (x, r)
}

fn vectorize(a: &SymForm) -> DVector<f64> {
    let n = a.dim();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push(if i == j { a.entry(i, i) } else { std::f64::consts::SQRT_2 * a.entry(i, j) });
        }
    }
    DVector::from_vec(v)
}

/// Non-negative coordinates of a form in the cone spanned by the frame projections.
/// Returns (coefficients, residual norm).
pub fn frame_coordinates(a: &SymForm, frames: &[&Frame]) -> (Vec<f64>, f64) {
    if frames.is_empty() {
        return (Vec::new(), a.frobenius_norm());
    }
    let cols: Vec<DVector<f64>> = frames.iter().map(|f| vectorize(&f.projection())).collect();
    let m = DMatrix::from_columns(&cols);
    let (x, r) = nnls(&m, &vectorize(a));
    (x.iter().copied().collect(), r)
}

#[derive(Clone, Debug)]
pub struct DistributionalReport {
    /// min over bumps of Σ u·(Δ_A*φ)·hⁿ
    pub min_pairing: f64,
    pub argmin_center: Vec<f64>,
    /// Mass Σ φ hⁿ of the minimizing bump.
    pub argmin_mass: f64,
    pub bumps: usize,
    pub max_cone_residual: f64,
}

/// Pairs u against the adjoint A-Laplacian of every nonnegative bump of the given radius
/// whose support stays in the interior.
pub fn distributional_check(
    u: &GridFunction,
    a_field: &dyn Fn(&[f64]) -> SymForm,
    s: &StencilFamily,
    mollifier_radius: f64,
) -> Result<DistributionalReport> {
    let lat = s.lattice().clone();
    if u.values.len() != lat.len() {
        return Err(Error::Dim {
            expected: lat.len(),
            found: u.values.len(),
        });
    }
    if !(mollifier_radius > 0.0) {
        return Err(Error::InvalidArgument(format!("mollifier radius {mollifier_radius}")));
    }
    let n = lat.dim();
    let h = lat.h();
    let h2 = h * h;
    let hn = h.powi(n as i32);

    let mut coef: Vec<Vec<(u32, f64)>> = vec![Vec::new(); lat.len()];
    let mut max_res = 0.0f64;
    for idx in lat.interior_indices() {
        let x = lat.point(idx);
        let a = a_field(&x);
        if a.dim() != n {
            return Err(Error::Dim { expected: n, found: a.dim() });
        }
        let ids = s.frame_ids(idx);
        let frames: Vec<&Frame> = ids.iter().map(|&f| &s.frames()[f as usize]).collect();
        let (c, r) = frame_coordinates(&a, &frames);
        if r > 1e-8 * (1.0 + a.frobenius_norm()) {
            return Err(Error::ConeViolation { point: x, residual: r });
        }
        max_res = max_res.max(r);
        coef[idx] = ids.iter().zip(c).filter(|(_, c)| *c > 0.0).map(|(&f, c)| (f, c)).collect();
    }

    let reach = (mollifier_radius / h).floor() as i64;
    let mut shape: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut d = vec![-reach; n];
    'outer: loop {
        let r2: f64 = d.iter().map(|&c| (c as f64 * h).powi(2)).sum();
        let t = 1.0 - r2 / (mollifier_radius * mollifier_radius);
        if t > 0.0 {
            shape.push((d.clone(), t * t));
        }
        for k in 0..n {
            d[k] += 1;
            if d[k] <= reach {
                continue 'outer;
            }
            d[k] = -reach;
        }
        break;
    }

    let mut buf = vec![0.0; lat.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut best = DistributionalReport {
        min_pairing: f64::INFINITY,
        argmin_center: Vec::new(),
        argmin_mass: 0.0,
        bumps: 0,
        max_cone_residual: max_res,
    };
    for center in lat.interior_indices() {
        let cc = lat.coords(center);
        let mut support = Vec::with_capacity(shape.len());
        let mut inside = true;
        for (off, w) in &shape {
            let mut q = Vec::with_capacity(n);
            for k in 0..n {
                let c = cc[k] as i64 + off[k];
                if c < 0 || c as usize >= lat.counts()[k] {
                    inside = false;
                    break;
                }
                q.push(c as usize);
            }
            if !inside {
                break;
            }
            let idx = lat.index(&q);
            if !lat.is_interior(idx) {
                inside = false;
                break;
            }
            support.push((idx, *w));
        }
        if !inside {
            continue;
        }
        for &(idx, phi) in &support {
            for &(f, c) in &coef[idx] {
                let fr = &s.frames()[f as usize];
                for (o, w) in fr.offsets.iter().zip(&fr.weights) {
                    let k = phi * c * w / h2;
                    let i = idx as isize;
                    for j in [(i + o) as usize, (i - o) as usize] {
                        buf[j] += k;
                        touched.push(j);
                    }
                    buf[idx] -= 2.0 * k;
                    touched.push(idx);
                }
            }
        }
        let mut pairing = 0.0;
        touched.sort_unstable();
        touched.dedup();
        for &j in &touched {
            pairing += u.values[j] * buf[j] * hn;
            buf[j] = 0.0;
        }
        touched.clear();
        best.bumps += 1;
        if pairing < best.min_pairing {
            best.min_pairing = pairing;
            best.argmin_center = lat.point(center);
            best.argmin_mass = support.iter().map(|(_, w)| w * hn).sum();
        }
    }
    if best.bumps == 0 {
        return Err(Error::InvalidArgument(format!(
            "no bump of radius {mollifier_radius} fits inside the interior"
        )));
    }
    Ok(best)
}
