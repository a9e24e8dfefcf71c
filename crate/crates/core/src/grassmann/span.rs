//! Whether G involves all the variables, decided two ways.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{random_complex_line, Fiber, GrassmannSet};
use crate::error::Result;
use crate::symcore::{random_plane, seeded_rng, Plane, SymForm};

const ORTHO_TOL: f64 = 1e-8;
const ASCENT_ITERS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct SpanAnalysis {
    /// Orthonormal basis (trace inner product) of span{P_W : W ∈ G_x}.
    pub span_basis: Vec<SymForm>,
    pub involves_all: bool,
    /// Positive-definite element of the span, normalized to minimum eigenvalue 1.
    pub positive_witness: Option<SymForm>,
    /// Unit vector e with P_e orthogonal to the span, when one exists.
    pub orthogonal_direction: Option<Vec<f64>>,
    /// Best minimum eigenvalue of Σ tₖ P_k over the simplex.
    pub ascent_margin: f64,
    pub paths_agree: bool,
}

fn vectorize(a: &SymForm) -> DVector<f64> {
    let n = a.dim();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        v.push(a.entry(i, i));
        for j in i + 1..n {
            v.push(r2 * a.entry(i, j));
        }
    }
    DVector::from_vec(v)
}

fn devectorize(n: usize, v: &DVector<f64>) -> SymForm {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..n {
            m[(i, j)] = v[k] / r2;
            m[(j, i)] = v[k] / r2;
            k += 1;
        }
    }
    SymForm::new(m).expect("square")
}

fn orthonormal_basis(forms: &[SymForm]) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for f in forms {
        let mut v = vectorize(f);
        let scale = v.norm();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let r = v.norm();
        if r > 1e-9 * scale.max(1.0) {
            basis.push(v / r);
        }
    }
    basis
}

/// Generating planes for the span: the planes themselves for finite fibers,
/// a deterministic sample covering the span otherwise.
fn generators(g: &GrassmannSet, fiber: &Fiber) -> Vec<Plane> {
    let n = g.ambient_dim();
    let count = n * (n + 1) + 8;
    let mut rng = seeded_rng(g.seed ^ 0x5ba7);
    match fiber {
        Fiber::Empty => Vec::new(),
        Fiber::Finite(ps) => ps.clone(),
        Fiber::Full => (0..count)
            .map(|_| random_plane(n, g.plane_dim(), &mut rng))
            .collect(),
        Fiber::ComplexLines => (0..count).map(|_| random_complex_line(n, &mut rng)).collect(),
    }
}

/// Largest minimum eigenvalue of Σ tₖ P_k over the simplex, by projected
/// supergradient ascent from uniform weights. Returns (margin, weights).
fn simplex_ascent(projections: &[SymForm]) -> (f64, Vec<f64>) {
    let k = projections.len();
    let n = projections[0].dim();
    let combine = |t: &[f64]| {
        let mut m = SymForm::zeros(n);
        for (ti, p) in t.iter().zip(projections) {
            m = &m + &(p * *ti);
        }
        m
    };
    let mut t = vec![1.0 / k as f64; k];
    let mut best = (f64::NEG_INFINITY, t.clone());
    for iter in 0..ASCENT_ITERS {
        let s = combine(&t).spectrum();
        let lam = s.values[0];
        if lam > best.0 {
            best = (lam, t.clone());
        }
        let v = s.vectors.column(0).into_owned();
        let grad: Vec<f64> = projections.iter().map(|p| p.quadratic(&v)).collect();
        let step = 0.5 / (1.0 + iter as f64).sqrt();
        let raw: Vec<f64> = t.iter().zip(&grad).map(|(ti, gi)| ti + step * gi).collect();
        t = project_to_simplex(&raw);
    }
    best
}

/// Euclidean projection onto {t ≥ 0, Σt = 1}.
fn project_to_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let th = (css - 1.0) / (i as f64 + 1.0);
        if ui - th > 0.0 {
            theta = th;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Span G_x and the "involves all the variables" decision.
///
/// Path (i): for each eigen-direction e of Σ P_W, measures how much of P_e lies
/// in the span; an e with vanishing component is orthogonal to every W.
/// Path (ii): searches the simplex for a positive-definite combination.
/// The answer is negative only when both paths find no positivity.
pub fn span_analysis(g: &GrassmannSet, x: Option<&[f64]>) -> Result<SpanAnalysis> {
    let n = g.ambient_dim();
    let fiber = g.fiber(x)?;
    let planes = generators(g, &fiber);
    if planes.is_empty() {
        return Ok(SpanAnalysis {
            span_basis: Vec::new(),
            involves_all: false,
            positive_witness: None,
            orthogonal_direction: Some(
                (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            ),
            ascent_margin: f64::NEG_INFINITY,
            paths_agree: true,
        });
    }
    let projections: Vec<SymForm> = planes.iter().map(|w| w.projection().clone()).collect();
    let basis = orthonormal_basis(&projections);

    let mut total = SymForm::zeros(n);
    for p in &projections {
        total = &total + p;
    }
    let eig = total.spectrum();
    let mut orthogonal = None;
    for j in 0..n {
        let e = eig.vectors.column(j).into_owned();
        let pe = vectorize(&SymForm::outer(&e));
        let in_span: f64 = basis.iter().map(|b| b.dot(&pe).powi(2)).sum::<f64>().sqrt();
        if in_span <= ORTHO_TOL {
            orthogonal = Some(e.iter().copied().collect::<Vec<_>>());
            break;
        }
    }

    let (margin, witness) = match fiber {
        Fiber::Full | Fiber::ComplexLines => (
            g.plane_dim() as f64 / n as f64,
            Some(SymForm::identity(n)),
        ),
        _ => {
            let (margin, t) = simplex_ascent(&projections);
            let witness = (margin > ORTHO_TOL).then(|| {
                let mut m = SymForm::zeros(n);
                for (ti, p) in t.iter().zip(&projections) {
                    m = &m + &(p * *ti);
                }
                m * (1.0 / margin)
            });
            (margin, witness)
        }
    };
    let positive = witness.is_some();
    let involves_all = positive || orthogonal.is_none();
    Ok(SpanAnalysis {
        span_basis: basis.iter().map(|b| devectorize(n, b)).collect(),
        involves_all,
        positive_witness: witness,
        orthogonal_direction: orthogonal.clone(),
        ascent_margin: margin,
        paths_agree: positive == orthogonal.is_none(),
    })
}
