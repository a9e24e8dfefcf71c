//! Domains {ρ < 0}: boundary sampling, second fundamental forms and boundary
//! G-convexity.

mod defining;
mod slices;

pub use defining::{
    compose_convex_increasing, exhaustion_from_defining, glue_exhaustion, glue_profile,
    make_global_defining, GlobalDefining, Profile,
};
pub use slices::{horizontal_slice_connectivity, local_slice_convexity, LocalSliceReport, SliceReport};

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{complex_structure, Fiber, GrassmannSet};
use crate::symcore::{eigen_partial_sums, seeded_rng, trace_pairing, ScalarField, SymForm};

/// Minimum accepted |∇ρ| at a boundary point.
pub const MIN_GRAD: f64 = 1e-6;
/// ‖P_W·ν‖ below which W counts as tangential.
pub const TANGENCY_TOL: f64 = 1e-6;
/// Tangential traces above −CONVEX_TOL count as nonnegative.
pub const CONVEX_TOL: f64 = 1e-7;

const NEWTON_ITERS: usize = 50;

/// Ω = {x ∈ box : ρ(x) < 0}.
#[derive(Clone)]
pub struct ImplicitDomain {
    pub name: String,
    rho: ScalarField,
    lo: Vec<f64>,
    hi: Vec<f64>,
    pub boundary_tol: f64,
}

impl fmt::Debug for ImplicitDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitDomain")
            .field("name", &self.name)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish()
    }
}

impl ImplicitDomain {
    pub fn new(name: &str, rho: ScalarField, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = rho.dim();
        if lo.len() != n || hi.len() != n {
            return Err(Error::Dim {
                expected: n,
                found: lo.len().min(hi.len()),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("box has empty extent".into()));
        }
        Ok(ImplicitDomain {
            name: name.into(),
            rho,
            lo,
            hi,
            boundary_tol: 1e-8,
        })
    }

    /// ρ = |x| − r
    pub fn ball(n: usize, r: f64) -> Self {
        let rho = ScalarField::new(n, move |x| norm(x) - r)
            .with_gradient(|x| {
                let nx = nonzero_norm(x)?;
                Ok(DVector::from_column_slice(x) / nx)
            })
            .with_hessian(move |x| {
                let nx = nonzero_norm(x)?;
                let xh = DVector::from_column_slice(x) / nx;
                Ok((SymForm::identity(x.len()) - SymForm::outer(&xh)) * (1.0 / nx))
            });
        let m = 1.5 * r;
        Self::new("ball", rho, vec![-m; n], vec![m; n]).expect("valid box")
    }

    /// ρ = x²/a² + y²/b² − 1
    pub fn ellipse(a: f64, b: f64) -> Self {
        let (a2, b2) = (a * a, b * b);
        let rho = ScalarField::new(2, move |x| x[0] * x[0] / a2 + x[1] * x[1] / b2 - 1.0)
            .with_gradient(move |x| Ok(DVector::from_vec(vec![2.0 * x[0] / a2, 2.0 * x[1] / b2])))
            .with_hessian(move |_| Ok(SymForm::diagonal(&[2.0 / a2, 2.0 / b2])));
        let (ma, mb) = (1.25 * a, 1.25 * b);
        Self::new("ellipse", rho, vec![-ma, -mb], vec![ma, mb]).expect("valid box")
    }

    /// ρ = x² + y² − z² − 1 on |z| ≤ half_height: the solid one-sheeted hyperboloid.
    pub fn hyperboloid(half_height: f64) -> Self {
        let rho = ScalarField::new(3, |x| x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - 1.0)
            .with_gradient(|x| Ok(DVector::from_vec(vec![2.0 * x[0], 2.0 * x[1], -2.0 * x[2]])))
            .with_hessian(|_| Ok(SymForm::diagonal(&[2.0, 2.0, -2.0])));
        let m = (1.0 + half_height * half_height).sqrt() + 0.5;
        Self::new(
            "hyperboloid",
            rho,
            vec![-m, -m, -half_height],
            vec![m, m, half_height],
        )
        .expect("valid box")
    }

    /// ρ = x₁ on [−1, 1]ⁿ
    pub fn halfspace(n: usize) -> Self {
        let rho = ScalarField::new(n, |x| x[0])
            .with_gradient(move |x| {
                let mut g = DVector::zeros(x.len());
                g[0] = 1.0;
                Ok(g)
            })
            .with_hessian(move |x| Ok(SymForm::zeros(x.len())));
        Self::new("halfspace", rho, vec![-1.0; n], vec![1.0; n]).expect("valid box")
    }

    /// r < |x| < R in ℝ².
    pub fn annulus(inner: f64, outer: f64) -> Self {
        let rho = ScalarField::new(2, move |x| {
            let r = norm(x);
            (r - outer).max(inner - r)
        });
        let m = 1.25 * outer;
        Self::new("annulus", rho, vec![-m, -m], vec![m, m]).expect("valid box")
    }

    /// Lower half-disk of radius 3 together with unit disks about (±2, 0).
    ///
    /// The boundary contains the segment [−1, 1]×{0}, the lower half of the
    /// circle of radius 3 and the points (±2, 1). Every horizontal slice at
    /// heights in (0, 1) has two components.
    pub fn crescent() -> Self {
        let rho = ScalarField::new(2, |x| {
            let half = (norm(x) - 3.0).max(x[1]);
            let left = norm(&[x[0] + 2.0, x[1]]) - 1.0;
            let right = norm(&[x[0] - 2.0, x[1]]) - 1.0;
            half.min(left).min(right)
        });
        Self::new("crescent513", rho, vec![-3.5, -3.5], vec![3.5, 1.5]).expect("valid box")
    }

    pub fn from_config(cfg: &DomainConfig) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        Ok(match *cfg {
            DomainConfig::Ball { dim, radius } => {
                if !(1..=3).contains(&dim) {
                    return Err(Error::InvalidArgument(format!("ball dim {dim} not in 1..=3")));
                }
                Self::ball(dim, positive("radius", radius)?)
            }
            DomainConfig::Ellipse { a, b } => Self::ellipse(positive("a", a)?, positive("b", b)?),
            DomainConfig::Hyperboloid { half_height } => {
                Self::hyperboloid(positive("half_height", half_height)?)
            }
            DomainConfig::Halfspace { dim } => Self::halfspace(dim.max(1)),
            DomainConfig::Annulus { inner, outer } => {
                if !(inner < outer) {
                    return Err(Error::InvalidArgument("annulus needs inner < outer".into()));
                }
                Self::annulus(positive("inner", inner)?, outer)
            }
            DomainConfig::Crescent => Self::crescent(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    /// Same domain with a different defining function.
    pub fn with_rho(&self, rho: ScalarField) -> Result<Self> {
        Self::new(&self.name, rho, self.lo.clone(), self.hi.clone())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.rho.value(x)? < 0.0)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn nonzero_norm(x: &[f64]) -> Result<f64> {
    let r = norm(x);
    if r < 1e-12 {
        return Err(Error::FieldEval {
            point: x.to_vec(),
            reason: "|x| is not differentiable at the origin".into(),
        });
    }
    Ok(r)
}

/// Structured description of a built-in domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Ball {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipse {
        #[serde(default = "two")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    Hyperboloid {
        #[serde(default = "one")]
        half_height: f64,
    },
    Halfspace {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Annulus {
        #[serde(default = "half")]
        inner: f64,
        #[serde(default = "one")]
        outer: f64,
    },
    #[serde(rename = "crescent513")]
    Crescent,
}

fn default_dim() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}

/// A point of ∂Ω with its inward normal, tangent frame and II.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    /// Inward unit normal −∇ρ/|∇ρ|.
    pub normal: DVector<f64>,
    /// n×(n−1) orthonormal basis of the tangent space.
    pub tangent_frame: DMatrix<f64>,
    pub grad_norm: f64,
    pub ii: SymForm,
}

#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub points: Vec<BoundaryPoint>,
    /// Lattice points whose Newton projection failed.
    pub skipped: usize,
}

/// Orthonormal completion of a unit vector: the columns span its complement.
pub fn orthonormal_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let mut basis: Vec<DVector<f64>> = vec![v.normalize()];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()));
    for k in order {
        if basis.len() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e -= b * c;
            }
        }
        let r = e.norm();
        if r > 1e-6 {
            basis.push(e / r);
        }
    }
    let mut f = DMatrix::zeros(n, n - 1);
    for (j, b) in basis[1..].iter().enumerate() {
        f.set_column(j, b);
    }
    f
}

fn newton_project(d: &ImplicitDomain, x0: &[f64]) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    for _ in 0..NEWTON_ITERS {
        let r = d.rho.value(&x).ok()?;
        if r.abs() <= d.boundary_tol {
            return Some(x);
        }
        let g = d.rho.gradient(&x).ok()?;
        let g2 = g.norm_squared();
        if g2 < MIN_GRAD * MIN_GRAD {
            return None;
        }
        for (xi, gi) in x.iter_mut().zip(g.iter()) {
            *xi -= r * gi / g2;
        }
        if norm(&x) > 1e6 {
            return None;
        }
    }
    None
}

/// Builds the boundary data at a point of {ρ = 0}.
pub fn boundary_point(d: &ImplicitDomain, x: &[f64]) -> Result<BoundaryPoint> {
    let g = d.rho.gradient(x)?;
    let gn = g.norm();
    if gn < MIN_GRAD {
        return Err(Error::DegenerateDefiningFunction {
            point: x.to_vec(),
            grad_norm: gn,
        });
    }
    let normal = -&g / gn;
    let tangent_frame = orthonormal_complement(&normal);
    let mut b = BoundaryPoint {
        x: x.to_vec(),
        normal,
        tangent_frame,
        grad_norm: gn,
        ii: SymForm::zeros(1),
    };
    b.ii = second_fundamental_form(d, &b)?;
    Ok(b)
}

/// Lattice points within `grid_h` of {ρ = 0} (in ρ units), Newton-projected
/// onto the zero set. Seed 0 uses the lattice anchored at the box corner;
/// other seeds shift the lattice by a random sub-cell offset.
pub fn sample_boundary(d: &ImplicitDomain, grid_h: f64, seed: u64) -> Result<BoundarySample> {
    if !(grid_h > 0.0) {
        return Err(Error::InvalidArgument(format!("grid_h = {grid_h}")));
    }
    let n = d.dim();
    let mut rng = seeded_rng(seed);
    let offset: Vec<f64> = (0..n)
        .map(|_| if seed == 0 { 0.0 } else { rng.random::<f64>() * grid_h })
        .collect();
    let counts: Vec<usize> = (0..n)
        .map(|i| ((d.hi[i] - d.lo[i] - offset[i]) / grid_h).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let (mut neg, mut pos) = (false, false);
    let mut points = Vec::new();
    let mut skipped = 0;
    let mut x = vec![0.0; n];
    for idx in 0..total {
        let mut k = idx;
        for i in 0..n {
            x[i] = d.lo[i] + offset[i] + (k % counts[i]) as f64 * grid_h;
            k /= counts[i];
        }
        let r = match d.rho.value(&x) {
            Ok(r) => r,
            Err(_) => continue,
        };
        neg |= r < 0.0;
        pos |= r > 0.0;
        if r.abs() >= grid_h {
            continue;
        }
        match newton_project(d, &x).map(|y| boundary_point(d, &y)) {
            Some(Ok(b)) => points.push(b),
            _ => skipped += 1,
        }
    }
    if !(neg && pos) {
        return Err(Error::EmptyBoundary);
    }
    if skipped > 0 {
        warn!("{skipped} boundary candidates failed to project onto {{rho = 0}}");
    }
    Ok(BoundarySample { points, skipped })
}

/// II = Fᵀ·Hess ρ·F / |∇ρ| in the tangent frame F.
pub fn second_fundamental_form(d: &ImplicitDomain, b: &BoundaryPoint) -> Result<SymForm> {
    let g = d.rho.gradient(&b.x)?;
    let gn = g.norm();
    if gn < MIN_GRAD {
        return Err(Error::DegenerateDefiningFunction {
            point: b.x.clone(),
            grad_norm: gn,
        });
    }
    let h = d.rho.hessian(&b.x)?;
    Ok(h.restrict(&b.tangent_frame)? * (1.0 / gn))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityVerdict {
    StrictlyConvex,
    Convex,
    NotConvex,
    Free,
}

impl ConvexityVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvexityVerdict::StrictlyConvex => "strictly_convex",
            ConvexityVerdict::Convex => "convex",
            ConvexityVerdict::NotConvex => "not_convex",
            ConvexityVerdict::Free => "free",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityRecord {
    pub x: Vec<f64>,
    pub normal: Vec<f64>,
    /// min tr_W II over tangential G-planes (+∞ when there are none).
    pub min_tangential_trace: f64,
    pub verdict: ConvexityVerdict,
}

/// II as a form on ℝⁿ: Hess ρ / |∇ρ| compressed to the tangent space.
fn ambient_ii(b: &BoundaryPoint) -> SymForm {
    b.ii.conjugate(&b.tangent_frame).expect("frame matches II")
}

/// min tr_W II over W ∈ G_x tangent to ∂Ω at x, or None when no such W exists.
pub fn min_tangential_trace(g: &GrassmannSet, b: &BoundaryPoint) -> Result<Option<f64>> {
    let n = b.x.len();
    if g.ambient_dim() != n {
        return Err(Error::Dim {
            expected: n,
            found: g.ambient_dim(),
        });
    }
    let p = g.plane_dim();
    let x = g.base_dim().map(|_| b.x.as_slice());
    match g.fiber(x)? {
        Fiber::Empty => Ok(None),
        Fiber::Full => {
            if p >= n {
                Ok(None)
            } else {
                Ok(Some(eigen_partial_sums(&b.ii, p)?.0))
            }
        }
        Fiber::Finite(planes) => {
            let a = ambient_ii(b);
            let mut best: Option<f64> = None;
            for w in &planes {
                if w.component_norm(&b.normal) <= TANGENCY_TOL {
                    let t = trace_pairing(&a, w)?;
                    best = Some(best.map_or(t, |m: f64| m.min(t)));
                }
            }
            Ok(best)
        }
        Fiber::ComplexLines => {
            // Tangential complex lines live in the maximal complex subspace {ν, Jν}⊥.
            if n < 4 {
                return Ok(None);
            }
            let j = complex_structure(n);
            let jn = &j * &b.normal;
            let mut basis: Vec<DVector<f64>> = vec![b.normal.clone(), jn];
            for k in 0..n {
                let mut e = DVector::zeros(n);
                e[k] = 1.0;
                for _ in 0..2 {
                    for v in &basis {
                        let c = v.dot(&e);
                        e -= v * c;
                    }
                }
                if e.norm() > 1e-6 {
                    basis.push(e.normalize());
                }
            }
            let q = DMatrix::from_columns(&basis[2..]);
            let a = ambient_ii(b);
            let levi = SymForm::new(a.matrix() - &j * a.matrix() * &j)?;
            Ok(Some(levi.restrict(&q)?.min_eigenvalue()))
        }
    }
}

/// Per-sample G-convexity of the boundary.
pub fn boundary_convexity(
    g: &GrassmannSet,
    points: &[BoundaryPoint],
    strict_eta: f64,
) -> Result<Vec<ConvexityRecord>> {
    points
        .iter()
        .map(|b| {
            let m = min_tangential_trace(g, b)?;
            let (value, verdict) = match m {
                None => (f64::INFINITY, ConvexityVerdict::Free),
                Some(t) if t > strict_eta => (t, ConvexityVerdict::StrictlyConvex),
                Some(t) if t >= -CONVEX_TOL => (t, ConvexityVerdict::Convex),
                Some(t) => (t, ConvexityVerdict::NotConvex),
            };
            Ok(ConvexityRecord {
                x: b.x.clone(),
                normal: b.normal.iter().copied().collect(),
                min_tangential_trace: value,
                verdict,
            })
        })
        .collect()
}
