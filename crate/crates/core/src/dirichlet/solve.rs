use log::{debug, warn};

use super::{GridFunction, StencilFamily};
use crate::error::{Error, Result};
use crate::grassmann::{span_analysis, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Lexicographic sweep, then reverse, alternating.
    SymmetricGaussSeidel,
    Jacobi,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Target distance to the fixed point, in value units.
    pub tol: f64,
    pub max_sweeps: usize,
    pub schedule: Schedule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_sweeps: 100_000,
            schedule: Schedule::SymmetricGaussSeidel,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub u: GridFunction,
    /// Harmonic solves: max |min-trace|. Envelopes: max(0, −min-trace) off the contact set.
    pub residual: f64,
    pub sweeps: usize,
    /// Largest per-sweep change, one entry per sweep.
    pub history: Vec<f64>,
    pub min_trace_range: (f64, f64),
    pub warnings: Vec<String>,
}

fn iterate<F>(u: &mut Vec<f64>, interior: &[usize], opts: &SolveOptions, update: F) -> Result<(usize, Vec<f64>)>
where
    F: Fn(&[f64], usize) -> f64,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let mut history = Vec::new();
    let mut scratch = u.clone();
    for sweep in 0..opts.max_sweeps {
        let mut change = 0.0f64;
        match opts.schedule {
            Schedule::SymmetricGaussSeidel => {
                let mut step = |idx: usize| {
                    let v = update(u, idx);
                    change = change.max((v - u[idx]).abs());
                    u[idx] = v;
                };
                if sweep % 2 == 0 {
                    interior.iter().for_each(|&i| step(i));
                } else {
                    interior.iter().rev().for_each(|&i| step(i));
                }
            }
            Schedule::Jacobi => {
                for &idx in interior {
                    let v = update(u, idx);
                    change = change.max((v - u[idx]).abs());
                    scratch[idx] = v;
                }
                for &idx in interior {
                    u[idx] = scratch[idx];
                }
            }
        }
        history.push(change);
        if !change.is_finite() {
            return Err(Error::NotConverged {
                sweeps: sweep + 1,
                residual: change,
            });
        }
        if change <= opts.tol && converged(&history, u, opts.tol) {
            return Ok((sweep + 1, history));
        }
    }
    Err(Error::NotConverged {
        sweeps: opts.max_sweeps,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Stops once the geometric tail change·ρ/(1−ρ) is below `tol`, with ρ read off
/// changes two sweeps apart (one forward and one reverse pass), or once changes
/// reach round-off.
fn converged(history: &[f64], u: &[f64], tol: f64) -> bool {
    let k = history.len();
    let change = history[k - 1];
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if change <= 8.0 * f64::EPSILON * scale {
        return true;
    }
    if k < 3 || history[k - 3] <= 0.0 {
        return false;
    }
    let rho = (change / history[k - 3]).sqrt();
    rho < 1.0 && change * rho / (1.0 - rho) <= tol
}

fn check_lattice(g: &GridFunction, s: &StencilFamily) -> Result<()> {
    if g.lattice().len() != s.lattice().len() || g.lattice().counts() != s.lattice().counts() {
        return Err(Error::Dim {
            expected: s.lattice().len(),
            found: g.lattice().len(),
        });
    }
    Ok(())
}

fn trace_range(u: &[f64], s: &StencilFamily, interior: &[usize], skip: impl Fn(usize) -> bool) -> (f64, f64) {
    let h2 = s.lattice().h().powi(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &idx in interior {
        if skip(idx) || s.frame_ids(idx).is_empty() {
            continue;
        }
        let m = s
            .frame_ids(idx)
            .iter()
            .map(|&f| s.frames()[f as usize].trace(u, idx, h2))
            .fold(f64::INFINITY, f64::min);
        lo = lo.min(m);
        hi = hi.max(m);
    }
    (lo, hi)
}

/// G-harmonic Dirichlet solve: boundary values are read from `g`'s boundary layer.
pub fn solve_dirichlet(g: &GridFunction, s: &StencilFamily, opts: &SolveOptions) -> Result<SolveReport> {
    check_lattice(g, s)?;
    let lat = s.lattice().clone();
    let interior = lat.interior_indices();
    let mut warnings = Vec::new();

    let probe = match s.set().variant() {
        Variant::FiberField(_) => {
            let c: Vec<f64> = lat.point(lat.len() / 2);
            span_analysis(s.set(), Some(&c))
        }
        _ => span_analysis(s.set(), None),
    };
    if let Ok(a) = probe {
        if !a.involves_all {
            let msg = "MaximumPrincipleAtRisk: G does not involve all the variables".to_string();
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let (bmin, bmax) = lat
        .boundary_indices()
        .iter()
        .map(|&i| g.values[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut u = g.values.clone();
    for &i in &interior {
        if !s.frame_ids(i).is_empty() {
            u[i] = bmax;
        }
    }
    let (sweeps, history) = iterate(&mut u, &interior, opts, |u, idx| {
        if s.frame_ids(idx).is_empty() {
            u[idx]
        } else {
            s.min_max_average(u, idx).0
        }
    })?;
    let (lo, hi) = trace_range(&u, s, &interior, |_| false);
    let residual = lo.abs().max(hi.abs());
    debug!("dirichlet solve: {sweeps} sweeps, residual {residual:.3e}");

    let (imin, imax) = interior
        .iter()
        .map(|&i| u[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if imax > bmax + opts.tol.max(1e-12) * 10.0 || imin < bmin - opts.tol.max(1e-12) * 10.0 {
        warnings.push(format!(
            "discrete maximum principle violated: interior range [{imin}, {imax}], boundary range [{bmin}, {bmax}]"
        ));
    }
    Ok(SolveReport {
        u: GridFunction::new(&lat, u)?,
        residual,
        sweeps,
        history,
        min_trace_range: (lo, hi),
        warnings,
    })
}

/// Largest discrete G-psh function below the obstacle (boundary layer fixed to the obstacle).
pub fn psh_envelope(obstacle: &GridFunction, s: &StencilFamily, opts: &SolveOptions) -> Result<SolveReport> {
    check_lattice(obstacle, s)?;
    let lat = s.lattice().clone();
    let interior = lat.interior_indices();
    let ob = &obstacle.values;
    let mut u = ob.clone();
    let (sweeps, history) = iterate(&mut u, &interior, opts, |u, idx| ob[idx].min(s.min_max_average(u, idx).0))?;
    let (lo, hi) = trace_range(&u, s, &interior, |_| false);
    Ok(SolveReport {
        u: GridFunction::new(&lat, u)?,
        residual: (-lo).max(0.0),
        sweeps,
        history,
        min_trace_range: (lo, hi),
        warnings: Vec::new(),
    })
}

/// Largest discrete dually-G-psh function below u: u(x) ← min(u(x), max-frame average).
pub fn force_dual(u: &GridFunction, s: &StencilFamily, opts: &SolveOptions) -> Result<GridFunction> {
    check_lattice(u, s)?;
    let lat = s.lattice().clone();
    let interior = lat.interior_indices();
    let mut v = u.values.clone();
    iterate(&mut v, &interior, opts, |v, idx| {
        if s.frame_ids(idx).is_empty() {
            v[idx]
        } else {
            v[idx].min(s.min_max_average(v, idx).1)
        }
    })?;
    GridFunction::new(&lat, v)
}

#[derive(Clone, Debug)]
pub struct HullReport {
    pub mask: Vec<bool>,
    pub w: GridFunction,
    pub threshold: f64,
    /// (threshold, number of points with w ≤ threshold)
    pub sweep: Vec<(f64, usize)>,
    pub sweeps: usize,
}

pub const HULL_THRESHOLDS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Discrete G-convex hull: {w ≤ threshold} for the envelope w of 0 on K, 1 elsewhere.
pub fn hull(k: &[bool], s: &StencilFamily, threshold: f64, opts: &SolveOptions) -> Result<HullReport> {
    let lat = s.lattice().clone();
    if k.len() != lat.len() {
        return Err(Error::Dim {
            expected: lat.len(),
            found: k.len(),
        });
    }
    if !k.iter().any(|&b| b) {
        return Err(Error::InvalidArgument("hull of an empty set".into()));
    }
    let obstacle = GridFunction::new(&lat, k.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect())?;
    let env = psh_envelope(&obstacle, s, opts)?;
    let w = env.u;
    let mask = w.values.iter().zip(k).map(|(&v, &b)| b || v <= threshold).collect();
    let sweep = HULL_THRESHOLDS
        .iter()
        .map(|&t| (t, w.values.iter().zip(k).filter(|(&v, &b)| b || v <= t).count()))
        .collect();
    Ok(HullReport {
        mask,
        w,
        threshold,
        sweep,
        sweeps: env.sweeps,
    })
}
