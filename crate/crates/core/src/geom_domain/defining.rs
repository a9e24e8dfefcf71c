//! Global G-psh defining functions, exhaustions and convex increasing
//! reparametrizations.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::{boundary_convexity, BoundaryPoint, ConvexityVerdict, ImplicitDomain};
use crate::error::{Error, Result};
use crate::grassmann::{min_max_trace, Fiber, GrassmannSet, TraceExtrema};
use crate::symcore::{fd_hessian, sample_frames, trace_pairing, Plane, ScalarField, SymForm};

/// Tangential traces at or below this are not strictly positive.
const STRICT_TOL: f64 = 1e-6;
const LAMBDA_CAP: f64 = (1u64 << 40) as f64;
/// Angle cutoff δ used for the a-priori λ bound.
const ANGLE_CUTOFF: f64 = 0.1;

#[derive(Clone, Serialize)]
pub struct GlobalDefining {
    pub lambda: f64,
    /// Target margin: half the smallest tangential trace of Hess ρ.
    pub eta: f64,
    /// min over samples and all W ∈ G of tr_W Hess ρ̃ at the accepted λ.
    pub margin: f64,
    /// −M, the smallest trace of Hess ρ over G at the samples.
    pub lower_bound: f64,
    /// (M + η)/(δ²·min|∇ρ|²) with δ = 0.1.
    pub lambda_bound: f64,
    /// max |tr_V Hess ρ̃ − tr_V Hess ρ − λ cos²θ_V |∇ρ|²| with FD Hess ρ̃.
    pub decomposition_residual: f64,
    /// max |Hess ρ̃ − (1+λρ)Hess ρ − λ∇ρ∘∇ρ| at boundary and collar points, FD Hess ρ̃.
    pub hessian_residual: f64,
    /// min over W of tr_W Hess ρ̃ at depth collar_eps inside Ω.
    pub collar_margin: f64,
    pub samples: usize,
    #[serde(skip)]
    pub rho_tilde: ScalarField,
}

impl fmt::Debug for GlobalDefining {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GlobalDefining")
            .field("lambda", &self.lambda)
            .field("eta", &self.eta)
            .field("margin", &self.margin)
            .field("lambda_bound", &self.lambda_bound)
            .field("decomposition_residual", &self.decomposition_residual)
            .finish()
    }
}

fn base_point<'a>(g: &GrassmannSet, x: &'a [f64]) -> Option<&'a [f64]> {
    g.base_dim().map(|_| x)
}

/// ρ̃ = ρ + (λ/2)ρ² with chain-rule derivatives.
pub fn quadratic_modification(rho: &ScalarField, lambda: f64) -> ScalarField {
    let (r0, r1, r2) = (rho.clone(), rho.clone(), rho.clone());
    ScalarField::fallible(rho.dim(), move |x| {
        let r = r0.value(x)?;
        Ok(r + 0.5 * lambda * r * r)
    })
    .with_gradient(move |x| Ok(r1.gradient(x)? * (1.0 + lambda * r1.value(x)?)))
    .with_hessian(move |x| {
        let r = r2.value(x)?;
        let g = r2.gradient(x)?;
        Ok(r2.hessian(x)? * (1.0 + lambda * r) + SymForm::outer(&g) * lambda)
    })
    .with_fd_step(rho.fd_step())
}

fn probe_planes(g: &GrassmannSet, x: &[f64], ext: &TraceExtrema) -> Result<Vec<Plane>> {
    let mut planes: Vec<Plane> = ext.witness_min.iter().chain(&ext.witness_max).cloned().collect();
    match g.fiber(base_point(g, x))? {
        Fiber::Empty => {}
        Fiber::Finite(ps) => planes.extend(ps),
        Fiber::Full => planes.extend(sample_frames(g.ambient_dim(), g.plane_dim(), 6, 17)?),
        Fiber::ComplexLines => {
            let mut rng = crate::symcore::seeded_rng(17);
            planes.extend((0..6).map(|_| crate::grassmann::random_complex_line(g.ambient_dim(), &mut rng)));
        }
    }
    Ok(planes)
}

/// Finds λ so that ρ̃ = ρ + (λ/2)ρ² has tr_W Hess ρ̃ ≥ η for every W ∈ G at every
/// boundary sample, where 2η is the smallest tangential trace of Hess ρ.
///
/// λ starts at 1 and doubles. Each sample also checks the decomposition
/// tr_V Hess ρ̃ = tr_V Hess ρ + λ cos²θ_V |∇ρ|² (cos θ_V = ‖P_V ν‖) against a
/// finite-difference Hessian of ρ̃.
pub fn make_global_defining(
    d: &ImplicitDomain,
    g: &GrassmannSet,
    points: &[BoundaryPoint],
    collar_eps: f64,
) -> Result<GlobalDefining> {
    if points.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let records = boundary_convexity(g, points, STRICT_TOL)?;
    let mut two_eta = f64::INFINITY;
    let mut worst: Option<(usize, f64)> = None;
    for (k, (r, b)) in records.iter().zip(points).enumerate() {
        if r.verdict == ConvexityVerdict::Free {
            continue;
        }
        if worst.is_none_or(|(_, t)| r.min_tangential_trace < t) {
            worst = Some((k, r.min_tangential_trace));
        }
        two_eta = two_eta.min(r.min_tangential_trace * b.grad_norm);
    }
    if let Some((k, t)) = worst {
        if records[k].verdict != ConvexityVerdict::StrictlyConvex {
            return Err(Error::NotStrictlyConvex {
                point: points[k].x.clone(),
                min_trace: t,
            });
        }
    }
    let eta = if two_eta.is_finite() { 0.5 * two_eta } else { 1.0 };

    let rho = d.rho();
    struct Local {
        r: f64,
        grad: DVector<f64>,
        hess: SymForm,
    }
    let locals = points
        .iter()
        .map(|b| {
            Ok(Local {
                r: rho.value(&b.x)?,
                grad: rho.gradient(&b.x)?,
                hess: rho.hessian(&b.x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tilde_at = |l: &Local, lambda: f64| {
        &(&l.hess * (1.0 + lambda * l.r)) + &(SymForm::outer(&l.grad) * lambda)
    };
    let margin_for = |lambda: f64| -> Result<f64> {
        let mut m = f64::INFINITY;
        for (b, l) in points.iter().zip(&locals) {
            m = m.min(min_max_trace(g, &tilde_at(l, lambda), base_point(g, &b.x))?.min);
        }
        Ok(m)
    };

    let mut lower = f64::INFINITY;
    let mut min_grad = f64::INFINITY;
    for (b, l) in points.iter().zip(&locals) {
        lower = lower.min(min_max_trace(g, &l.hess, base_point(g, &b.x))?.min);
        min_grad = min_grad.min(l.grad.norm());
    }
    let m_bound = (-lower).max(0.0);
    let lambda_bound = (m_bound + eta) / (ANGLE_CUTOFF * ANGLE_CUTOFF * min_grad * min_grad);

    let mut lambda = 1.0;
    let mut margin = margin_for(lambda)?;
    while margin < eta {
        lambda *= 2.0;
        if lambda > LAMBDA_CAP {
            return Err(Error::LambdaSearchFailed {
                cap: LAMBDA_CAP,
                margin,
            });
        }
        margin = margin_for(lambda)?;
    }

    let rho_tilde = quadratic_modification(rho, lambda);
    let fd_tilde = rho_tilde.values_only();
    let mut decomposition_residual: f64 = 0.0;
    let mut hessian_residual: f64 = 0.0;
    let mut collar_margin = f64::INFINITY;
    for (b, l) in points.iter().zip(&locals) {
        let h_fd = fd_hessian(&fd_tilde, &b.x)?;
        let h_exact = tilde_at(l, lambda);
        hessian_residual = hessian_residual.max(h_fd.max_abs_diff(&h_exact));
        let ext = min_max_trace(g, &h_exact, base_point(g, &b.x))?;
        let g2 = l.grad.norm_squared();
        for v in probe_planes(g, &b.x, &ext)? {
            let cos = v.component_norm(&b.normal);
            let lhs = trace_pairing(&h_fd, &v)?;
            let rhs = trace_pairing(&l.hess, &v)? + lambda * cos * cos * g2;
            decomposition_residual = decomposition_residual.max((lhs - rhs).abs());
        }
        let y: Vec<f64> = b
            .x
            .iter()
            .zip(b.normal.iter())
            .map(|(xi, ni)| xi + collar_eps * ni)
            .collect();
        if let Ok(hy) = rho_tilde.hessian(&y) {
            collar_margin = collar_margin.min(min_max_trace(g, &hy, base_point(g, &y))?.min);
            if let Ok(hy_fd) = fd_hessian(&fd_tilde, &y) {
                hessian_residual = hessian_residual.max(hy_fd.max_abs_diff(&hy));
            }
        }
    }

    Ok(GlobalDefining {
        lambda,
        eta,
        margin,
        lower_bound: lower,
        lambda_bound,
        decomposition_residual,
        hessian_residual,
        collar_margin,
        samples: points.len(),
        rho_tilde,
    })
}

/// −log(−ρ), defined on Ω.
pub fn exhaustion_from_defining(d: &ImplicitDomain) -> ScalarField {
    let rho = d.rho().clone();
    let inside = move |x: &[f64]| -> Result<f64> {
        let r = rho.value(x)?;
        if r >= 0.0 {
            return Err(Error::Domain {
                point: x.to_vec(),
                rho: r,
            });
        }
        Ok(r)
    };
    let (i0, i1, i2) = (inside.clone(), inside.clone(), inside);
    let (r1, r2) = (d.rho().clone(), d.rho().clone());
    ScalarField::fallible(d.dim(), move |x| Ok(-(-i0(x)?).ln()))
        .with_gradient(move |x| {
            let r = i1(x)?;
            Ok(r1.gradient(x)? * (-1.0 / r))
        })
        .with_hessian(move |x| {
            let r = i2(x)?;
            let g = r2.gradient(x)?;
            Ok(r2.hessian(x)? * (-1.0 / r) + SymForm::outer(&g) * (1.0 / (r * r)))
        })
        .with_fd_step(d.rho().fd_step())
}

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A real profile φ with its first two derivatives.
#[derive(Clone)]
pub struct Profile {
    pub name: String,
    f: Arc<RealFn>,
    d1: Arc<RealFn>,
    d2: Arc<RealFn>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile({})", self.name)
    }
}

impl Profile {
    pub fn new<F, G, H>(name: &str, f: F, d1: G, d2: H) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Profile {
            name: name.into(),
            f: Arc::new(f),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", |t| t, |_| 1.0, |_| 0.0)
    }

    pub fn exp() -> Self {
        Self::new("exp", f64::exp, f64::exp, f64::exp)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn d1(&self, t: f64) -> f64 {
        (self.d1)(t)
    }

    pub fn d2(&self, t: f64) -> f64 {
        (self.d2)(t)
    }
}

/// φ∘u with Hess φ(u) = φ′(u)·Hess u + φ″(u)·∇u∘∇u.
///
/// φ′ ≥ 0 and φ″ ≥ 0 are checked at 2001 points of `range`.
pub fn compose_convex_increasing(
    u: &ScalarField,
    phi: &Profile,
    range: (f64, f64),
) -> Result<ScalarField> {
    let (lo, hi) = range;
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
    }
    for k in 0..=2000 {
        let t = lo + (hi - lo) * k as f64 / 2000.0;
        if phi.d1(t) < -1e-12 {
            return Err(Error::CompositionRuleViolated {
                t,
                reason: format!("phi' = {} < 0", phi.d1(t)),
            });
        }
        if phi.d2(t) < -1e-12 {
            return Err(Error::CompositionRuleViolated {
                t,
                reason: format!("phi'' = {} < 0", phi.d2(t)),
            });
        }
    }
    let (u0, u1, u2) = (u.clone(), u.clone(), u.clone());
    let (p0, p1, p2) = (phi.clone(), phi.clone(), phi.clone());
    Ok(ScalarField::fallible(u.dim(), move |x| Ok(p0.eval(u0.value(x)?)))
        .with_gradient(move |x| Ok(u1.gradient(x)? * p1.d1(u1.value(x)?)))
        .with_hessian(move |x| {
            let t = u2.value(x)?;
            let g = u2.gradient(x)?;
            Ok(u2.hessian(x)? * p2.d1(t) + SymForm::outer(&g) * p2.d2(t))
        })
        .with_fd_step(u.fd_step()))
}

/// The C² clamp φ_c: φ ≡ c on (−∞, c − ½], φ(t) = t on [c + ½, ∞), with
/// φ″ = (15/8)(1 − s²)² on the transition, s = 2(t − c).
pub fn glue_profile(c: f64) -> Profile {
    const W: f64 = 0.5;
    let s_of = move |t: f64| (t - c) / W;
    let f = move |t: f64| {
        let s = s_of(t);
        if s <= -1.0 {
            c
        } else if s >= 1.0 {
            t
        } else {
            let big = (15.0 / 16.0) * (s * s / 2.0 - s.powi(4) / 6.0 + s.powi(6) / 30.0) + s / 2.0;
            c + W * (big + 5.0 / 32.0)
        }
    };
    let d1 = move |t: f64| {
        let s = s_of(t);
        if s <= -1.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            0.5 + (15.0 / 16.0) * (s - 2.0 * s.powi(3) / 3.0 + s.powi(5) / 5.0)
        }
    };
    let d2 = move |t: f64| {
        let s = s_of(t);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (15.0 / 16.0) * (1.0 - s * s).powi(2) / W
        }
    };
    Profile::new(&format!("glue({c})"), f, d1, d2)
}

/// φ_c∘v: constant c where v ≤ c − ½, equal to v where v ≥ c + ½.
pub fn glue_exhaustion(v: &ScalarField, c: f64) -> ScalarField {
    compose_convex_increasing(v, &glue_profile(c), (c - 2.0, c + 2.0))
        .expect("the glue profile is convex increasing")
}
