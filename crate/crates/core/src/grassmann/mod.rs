//! Closed subsets G of the Grassmannian and the cone P(G) they determine.
//!
//! A form A lies in P(G) when tr_W A ≥ 0 for every W ∈ G, in Int P(G) when
//! every such trace is positive, and in the Dirichlet dual P̃(G) when some
//! W ∈ G has tr_W A ≥ 0. The harmonic boundary is ∂P(G) = P(G) ∩ (−P̃(G)).

mod freedim;
mod probe;
mod span;

pub use freedim::{free_dimension, FreeDimension};
pub use probe::{nonclosed_probe, ProbeReport};
pub use span::{span_analysis, SpanAnalysis};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcore::{eigen_partial_sums, random_plane, seeded_rng, trace_pairing, Plane, SymForm};

/// Tolerance used by variants whose extremizers are computed in closed form.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance used by sampled extremization.
pub const SAMPLED_TOL: f64 = 1e-3;

/// Built-in point-dependent fiber families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberRule {
    /// On ℝ: every line for x ≥ 0, nothing for x < 0.
    HalfLineAll,
    /// On ℝ: the tangent line for x ≥ 0, nothing for x < 0 (same fibers as `HalfLineAll`).
    HalfLineTangent,
    /// On ℝ³: the horizontal rotation direction (−x₂, x₁, 0); empty on the vertical axis.
    SphereHorizontal,
    /// On ℝ²: the x-axis at every point.
    ConstantAxis,
    /// Base ℝ, planes in ℝ²: every line for x ≥ 0, only the second axis for x < 0.
    AxisJump,
}

impl FiberRule {
    pub const ALL: [FiberRule; 5] = [
        FiberRule::HalfLineAll,
        FiberRule::HalfLineTangent,
        FiberRule::SphereHorizontal,
        FiberRule::ConstantAxis,
        FiberRule::AxisJump,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FiberRule::HalfLineAll => "ex2.3",
            FiberRule::HalfLineTangent => "ex6.6",
            FiberRule::SphereHorizontal => "sphere_horizontal",
            FiberRule::ConstantAxis => "constant_axis",
            FiberRule::AxisJump => "axis_jump",
        }
    }

    pub fn from_id(id: &str) -> Result<FiberRule> {
        FiberRule::ALL
            .into_iter()
            .find(|r| r.id() == id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fiber rule '{id}'")))
    }

    /// (ambient n, plane p, base dimension)
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            FiberRule::HalfLineAll | FiberRule::HalfLineTangent => (1, 1, 1),
            FiberRule::SphereHorizontal => (3, 1, 3),
            FiberRule::ConstantAxis => (2, 1, 2),
            FiberRule::AxisJump => (2, 1, 1),
        }
    }

    pub fn fiber(self, x: &[f64]) -> Result<Fiber> {
        let (_, _, m) = self.dims();
        if x.len() != m {
            return Err(Error::Dim {
                expected: m,
                found: x.len(),
            });
        }
        Ok(match self {
            FiberRule::HalfLineAll | FiberRule::HalfLineTangent => {
                if x[0] >= 0.0 {
                    Fiber::Full
                } else {
                    Fiber::Empty
                }
            }
            FiberRule::SphereHorizontal => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2 < 1e-24 {
                    Fiber::Empty
                } else {
                    Fiber::Finite(vec![Plane::line(&[-x[1], x[0], 0.0])?])
                }
            }
            FiberRule::ConstantAxis => Fiber::Finite(vec![Plane::coordinate(2, &[0])?]),
            FiberRule::AxisJump => {
                if x[0] >= 0.0 {
                    Fiber::Full
                } else {
                    Fiber::Finite(vec![Plane::coordinate(2, &[1])?])
                }
            }
        })
    }
}

/// The fiber G_x of a set at one base point.
#[derive(Clone, Debug)]
pub enum Fiber {
    Full,
    Finite(Vec<Plane>),
    ComplexLines,
    Empty,
}

#[derive(Clone, Debug)]
pub enum Variant {
    Full,
    Finite(Vec<Plane>),
    ComplexLines,
    FiberField(FiberRule),
}

/// A closed subset G ⊂ G(p, ℝⁿ), possibly varying with a base point.
#[derive(Clone, Debug)]
pub struct GrassmannSet {
    n: usize,
    p: usize,
    variant: Variant,
    pub sampler_budget: usize,
    pub seed: u64,
}

impl GrassmannSet {
    pub fn full(p: usize, n: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidArgument(format!("p = {p} not in 1..={n}")));
        }
        Ok(Self::with_variant(n, p, Variant::Full))
    }

    pub fn finite(planes: Vec<Plane>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidArgument("finite set needs at least one plane".into()))?;
        let (n, p) = (first.ambient_dim(), first.dim());
        for (i, w) in planes.iter().enumerate() {
            if w.ambient_dim() != n || w.dim() != p {
                return Err(Error::Dim {
                    expected: n * 1000 + p,
                    found: w.ambient_dim() * 1000 + w.dim(),
                });
            }
            if planes[..i].iter().any(|v| v.same_plane(w)) {
                return Err(Error::InvalidArgument(format!("plane {i} is a duplicate")));
            }
        }
        Ok(Self::with_variant(n, p, Variant::Finite(planes)))
    }

    /// All complex lines span{v, Jv} in ℝⁿ = ℂ^{n/2}.
    pub fn complex_lines(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "complex lines need even ambient dimension, got {n}"
            )));
        }
        Ok(Self::with_variant(n, 2, Variant::ComplexLines))
    }

    pub fn fiber_field(rule: FiberRule) -> Self {
        let (n, p, _) = rule.dims();
        Self::with_variant(n, p, Variant::FiberField(rule))
    }

    fn with_variant(n: usize, p: usize, variant: Variant) -> Self {
        GrassmannSet {
            n,
            p,
            variant,
            sampler_budget: 4096,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn plane_dim(&self) -> usize {
        self.p
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            Variant::Full => "full",
            Variant::Finite(_) => "finite",
            Variant::ComplexLines => "complex_lines",
            Variant::FiberField(_) => "fiber_field",
        }
    }

    pub fn base_dim(&self) -> Option<usize> {
        match self.variant {
            Variant::FiberField(r) => Some(r.dims().2),
            _ => None,
        }
    }

    /// Resolves the fiber at `x`; `x` is required exactly for fiber fields.
    pub fn fiber(&self, x: Option<&[f64]>) -> Result<Fiber> {
        match (&self.variant, x) {
            (Variant::FiberField(rule), Some(x)) => rule.fiber(x),
            (Variant::FiberField(_), None) => Err(Error::InvalidArgument(
                "fiber field needs a base point".into(),
            )),
            (Variant::Full, _) => Ok(Fiber::Full),
            (Variant::Finite(ps), _) => Ok(Fiber::Finite(ps.clone())),
            (Variant::ComplexLines, _) => Ok(Fiber::ComplexLines),
        }
    }

    /// Tolerance attached to verdicts. Every built-in variant has an exact extremizer.
    pub fn tolerance(&self) -> f64 {
        EXACT_TOL
    }
}

/// The standard complex structure on ℝ²ᵐ: J e_k = e_{k+m}, J e_{k+m} = −e_k.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let m = n / 2;
    let mut j = DMatrix::zeros(n, n);
    for k in 0..m {
        j[(k + m, k)] = 1.0;
        j[(k, k + m)] = -1.0;
    }
    j
}

/// The complex line span{v, Jv}.
pub fn complex_line(v: &DVector<f64>) -> Result<Plane> {
    let n = v.len();
    let jv = complex_structure(n) * v;
    let mut f = DMatrix::zeros(n, 2);
    f.set_column(0, v);
    f.set_column(1, &jv);
    Plane::from_frame(f)
}

/// ½(A − JAJ): the part of A commuting with J.
pub fn hermitian_part(a: &SymForm) -> SymForm {
    let j = complex_structure(a.dim());
    SymForm::new((a.matrix() - &j * a.matrix() * &j) * 0.5).expect("square")
}

/// Extreme W-traces over a fiber, with attaining planes.
#[derive(Clone, Debug, Serialize)]
pub struct TraceExtrema {
    pub min: f64,
    pub max: f64,
    pub witness_min: Option<Plane>,
    pub witness_max: Option<Plane>,
}

impl TraceExtrema {
    fn empty() -> Self {
        TraceExtrema {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            witness_min: None,
            witness_max: None,
        }
    }
}

fn check_dim(g: &GrassmannSet, a: &SymForm) -> Result<()> {
    if a.dim() != g.n {
        return Err(Error::Dim {
            expected: g.n,
            found: a.dim(),
        });
    }
    Ok(())
}

fn fiber_extrema(n: usize, p: usize, fiber: &Fiber, a: &SymForm) -> Result<TraceExtrema> {
    match fiber {
        Fiber::Empty => Ok(TraceExtrema::empty()),
        Fiber::Full => {
            let s = a.spectrum();
            let (lo, hi) = eigen_partial_sums(a, p)?;
            let low = s.vectors.columns(0, p).into_owned();
            let high = s.vectors.columns(n - p, p).into_owned();
            Ok(TraceExtrema {
                min: lo,
                max: hi,
                witness_min: Some(Plane::from_frame(low)?),
                witness_max: Some(Plane::from_frame(high)?),
            })
        }
        Fiber::ComplexLines => {
            let s = hermitian_part(a).spectrum();
            let vmin = s.vectors.column(0).into_owned();
            let vmax = s.vectors.column(n - 1).into_owned();
            Ok(TraceExtrema {
                min: 2.0 * s.values[0],
                max: 2.0 * s.values[n - 1],
                witness_min: Some(complex_line(&vmin)?),
                witness_max: Some(complex_line(&vmax)?),
            })
        }
        Fiber::Finite(planes) => {
            let mut out = TraceExtrema::empty();
            for w in planes {
                let t = trace_pairing(a, w)?;
                if t < out.min {
                    out.min = t;
                    out.witness_min = Some(w.clone());
                }
                if t > out.max {
                    out.max = t;
                    out.witness_max = Some(w.clone());
                }
            }
            Ok(out)
        }
    }
}

/// (inf, sup) of tr_W A over G_x with witness planes. An empty fiber yields
/// the sentinels (+∞, −∞) and no witnesses.
pub fn min_max_trace(g: &GrassmannSet, a: &SymForm, x: Option<&[f64]>) -> Result<TraceExtrema> {
    check_dim(g, a)?;
    let fiber = g.fiber(x)?;
    fiber_extrema(g.n, g.p, &fiber, a)
}

/// Monte-Carlo estimate of the extreme traces, independent of the closed forms.
pub fn sampled_min_max_trace(
    g: &GrassmannSet,
    a: &SymForm,
    x: Option<&[f64]>,
    count: usize,
    seed: u64,
) -> Result<TraceExtrema> {
    check_dim(g, a)?;
    let mut rng = seeded_rng(seed);
    let planes: Vec<Plane> = match g.fiber(x)? {
        Fiber::Empty => return Ok(TraceExtrema::empty()),
        Fiber::Finite(ps) => ps,
        Fiber::Full => (0..count).map(|_| random_plane(g.n, g.p, &mut rng)).collect(),
        Fiber::ComplexLines => (0..count)
            .map(|_| random_complex_line(g.n, &mut rng))
            .collect(),
    };
    fiber_extrema(g.n, g.p, &Fiber::Finite(planes), a)
}

pub fn random_complex_line<R: Rng>(n: usize, rng: &mut R) -> Plane {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(w) = complex_line(&v) {
            return w;
        }
    }
}

/// Membership of a form in P(G), Int P(G), the dual P̃(G) and ∂P(G).
#[derive(Clone, Debug, Serialize)]
pub struct ConeVerdict {
    pub in_p: bool,
    pub in_int_p: bool,
    pub in_dual: bool,
    pub on_boundary: bool,
    pub min_trace: f64,
    pub max_trace: f64,
    pub witness_min: Option<Plane>,
    pub witness_max: Option<Plane>,
    pub tol: f64,
    pub empty_fiber: bool,
}

impl ConeVerdict {
    fn from_extrema(e: TraceExtrema, tol: f64) -> Self {
        let empty = e.witness_min.is_none();
        let in_p = e.min >= -tol;
        let in_int_p = e.min > tol;
        ConeVerdict {
            in_p,
            in_int_p,
            in_dual: e.max >= -tol,
            on_boundary: in_p && !in_int_p,
            min_trace: e.min,
            max_trace: e.max,
            witness_min: e.witness_min,
            witness_max: e.witness_max,
            tol,
            empty_fiber: empty,
        }
    }
}

pub fn classify(g: &GrassmannSet, a: &SymForm, x: Option<&[f64]>) -> Result<ConeVerdict> {
    let e = min_max_trace(g, a, x)?;
    Ok(ConeVerdict::from_extrema(e, g.tolerance()))
}

/// inf_W (1/p)·tr_W A, the signed distance to the complement of P(G_x).
pub fn strict_margin(g: &GrassmannSet, a: &SymForm, x: Option<&[f64]>) -> Result<f64> {
    Ok(min_max_trace(g, a, x)?.min / g.p as f64)
}

/// Whether tr_W A ≥ c for all W ∈ G_x, i.e. A ∈ P(G) + (c/p)·I.
pub fn c_strict_member(g: &GrassmannSet, a: &SymForm, c: f64, x: Option<&[f64]>) -> Result<bool> {
    if !(c >= 0.0) {
        return Err(Error::InvalidArgument(format!("c = {c} must be nonnegative")));
    }
    let margin = strict_margin(g, a, x)?;
    Ok(margin * g.p as f64 - c >= -g.tolerance())
}

/// A plane W ∈ G_x with tr_W A < 0.
pub fn separating_witness(g: &GrassmannSet, a: &SymForm, x: Option<&[f64]>) -> Result<Plane> {
    let v = classify(g, a, x)?;
    if v.in_p {
        return Err(Error::NoWitness {
            min_trace: v.min_trace,
        });
    }
    Ok(v.witness_min.expect("nonempty fiber has a witness"))
}

#[derive(Serialize, Deserialize)]
struct GrassmannWire {
    variant: String,
    n: usize,
    p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    planes: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fiber_rule: Option<String>,
    #[serde(default = "default_budget")]
    sampler_budget: usize,
    #[serde(default)]
    seed: u64,
}

fn default_budget() -> usize {
    4096
}

impl Serialize for GrassmannSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (planes, rule) = match &self.variant {
            Variant::Finite(ps) => (Some(ps.iter().map(|w| w.frame_rows()).collect()), None),
            Variant::FiberField(r) => (None, Some(r.id().to_string())),
            _ => (None, None),
        };
        GrassmannWire {
            variant: self.variant_name().into(),
            n: self.n,
            p: self.p,
            planes,
            base_dim: self.base_dim(),
            fiber_rule: rule,
            sampler_budget: self.sampler_budget,
            seed: self.seed,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GrassmannSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = GrassmannWire::deserialize(d)?;
        let mut g = match w.variant.as_str() {
            "full" => GrassmannSet::full(w.p, w.n).map_err(D::Error::custom)?,
            "complex_lines" => {
                if w.p != 2 {
                    return Err(D::Error::custom("complex lines have p = 2"));
                }
                GrassmannSet::complex_lines(w.n).map_err(D::Error::custom)?
            }
            "finite" => {
                let frames = w
                    .planes
                    .ok_or_else(|| D::Error::custom("finite variant needs 'planes'"))?;
                let planes = frames
                    .iter()
                    .map(|f| Plane::from_frame_rows(w.n, w.p, f))
                    .collect::<Result<Vec<_>>>()
                    .map_err(D::Error::custom)?;
                GrassmannSet::finite(planes).map_err(D::Error::custom)?
            }
            "fiber_field" => {
                let id = w
                    .fiber_rule
                    .ok_or_else(|| D::Error::custom("fiber_field variant needs 'fiber_rule'"))?;
                let rule = FiberRule::from_id(&id).map_err(D::Error::custom)?;
                let (n, p, m) = rule.dims();
                if n != w.n || p != w.p || w.base_dim.is_some_and(|b| b != m) {
                    return Err(D::Error::custom(format!(
                        "fiber rule '{id}' has n = {n}, p = {p}, base_dim = {m}"
                    )));
                }
                GrassmannSet::fiber_field(rule)
            }
            other => return Err(D::Error::custom(format!("unknown variant '{other}'"))),
        };
        g.sampler_budget = w.sampler_budget;
        g.seed = w.seed;
        Ok(g)
    }
}
