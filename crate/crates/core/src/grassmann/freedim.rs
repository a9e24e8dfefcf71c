//! Free dimension: the largest subspace dimension containing no G-plane.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{hermitian_part, random_complex_line, GrassmannSet, Variant};
use crate::error::{Error, Result};
use crate::symcore::{random_plane, seeded_rng, trace_pairing, Plane};

const RESTARTS: usize = 50;
const STEPS: usize = 300;
const FREE_MARGIN: f64 = 1e-6;
const VALIDATION_SAMPLES: usize = 100_000;

#[derive(Clone, Debug, Serialize)]
pub struct FreeDimension {
    pub dim: usize,
    /// A free subspace of dimension `dim` (absent when computed analytically or dim = 0).
    pub certificate: Option<Plane>,
    /// max_W tr_W P_V over G for the certificate; V contains W iff this reaches p.
    pub certificate_max_trace: f64,
    pub validated_samples: usize,
}

/// max over G of tr_W P_V.
fn containment_score(g: &GrassmannSet, v: &Plane) -> Result<f64> {
    match g.variant() {
        Variant::Finite(ps) => {
            let mut best = f64::NEG_INFINITY;
            for w in ps {
                best = best.max(trace_pairing(v.projection(), w)?);
            }
            Ok(best)
        }
        Variant::ComplexLines => Ok(2.0 * hermitian_part(v.projection()).max_eigenvalue()),
        _ => Err(Error::UnsupportedVariant(g.variant_name().into())),
    }
}

fn perturb<R: Rng>(v: &Plane, sigma: f64, rng: &mut R) -> Plane {
    let (n, k) = (v.ambient_dim(), v.dim());
    loop {
        let noise = DMatrix::from_fn(n, k, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        if let Ok(p) = Plane::from_frame(v.frame() + noise) {
            return p;
        }
    }
}

/// Simulated annealing over k-frames minimizing the containment score.
fn search_free<R: Rng>(g: &GrassmannSet, k: usize, rng: &mut R) -> Result<Option<(Plane, f64)>> {
    let n = g.ambient_dim();
    let p = g.plane_dim() as f64;
    let mut best: Option<(Plane, f64)> = None;
    for _ in 0..RESTARTS {
        let mut cur = random_plane(n, k, rng);
        let mut cur_score = containment_score(g, &cur)?;
        for step in 0..STEPS {
            let temp = 0.1 * (1e-3f64).powf(step as f64 / STEPS as f64);
            let cand = perturb(&cur, 0.5 * temp.sqrt(), rng);
            let s = containment_score(g, &cand)?;
            if s < cur_score || rng.random::<f64>() < ((cur_score - s) / temp).exp() {
                cur = cand;
                cur_score = s;
            }
            if best.as_ref().is_none_or(|b| cur_score < b.1) {
                best = Some((cur.clone(), cur_score));
            }
            if cur_score < p - 0.25 {
                break;
            }
        }
        if best.as_ref().is_some_and(|b| b.1 < p - 0.25) {
            break;
        }
    }
    Ok(best.filter(|b| b.1 < p - FREE_MARGIN))
}

/// Re-tests a claimed free subspace against sampled G-planes.
fn validate<R: Rng>(g: &GrassmannSet, v: &Plane, rng: &mut R) -> Result<usize> {
    let p = g.plane_dim() as f64;
    let planes: Box<dyn Iterator<Item = Plane>> = match g.variant() {
        Variant::Finite(ps) => Box::new(ps.clone().into_iter()),
        Variant::ComplexLines => {
            let n = g.ambient_dim();
            let lines: Vec<Plane> = (0..VALIDATION_SAMPLES)
                .map(|_| random_complex_line(n, rng))
                .collect();
            Box::new(lines.into_iter())
        }
        _ => return Err(Error::UnsupportedVariant(g.variant_name().into())),
    };
    let mut count = 0;
    for w in planes {
        if trace_pairing(v.projection(), &w)? >= p - FREE_MARGIN {
            return Err(Error::BudgetExceeded(format!(
                "claimed free subspace contains a G-plane (dimension {})",
                v.dim()
            )));
        }
        count += 1;
    }
    Ok(count)
}

/// Maximal dimension of a subspace containing no G-plane.
///
/// Analytic (p − 1) for the full Grassmannian; randomized search with
/// certificate re-checking for finite sets (n ≤ 6) and complex lines (n ≤ 4).
pub fn free_dimension(g: &GrassmannSet) -> Result<FreeDimension> {
    let (n, p) = (g.ambient_dim(), g.plane_dim());
    match g.variant() {
        Variant::Full => {
            return Ok(FreeDimension {
                dim: p - 1,
                certificate: None,
                certificate_max_trace: f64::NAN,
                validated_samples: 0,
            })
        }
        Variant::Finite(_) if n > 6 => {
            return Err(Error::BudgetExceeded(format!("finite set search needs n ≤ 6, got {n}")))
        }
        Variant::ComplexLines if n > 4 => {
            return Err(Error::BudgetExceeded(format!("complex line search needs n ≤ 4, got {n}")))
        }
        Variant::FiberField(_) => {
            return Err(Error::UnsupportedVariant("free dimension of a fiber field".into()))
        }
        _ => {}
    }
    let mut rng = seeded_rng(g.seed ^ 0xf4ee);
    for k in (p..n).rev() {
        if let Some((v, score)) = search_free(g, k, &mut rng)? {
            let validated = validate(g, &v, &mut rng)?;
            return Ok(FreeDimension {
                dim: k,
                certificate: Some(v),
                certificate_max_trace: score,
                validated_samples: validated,
            });
        }
    }
    Ok(FreeDimension {
        dim: p - 1,
        certificate: None,
        certificate_max_trace: f64::NAN,
        validated_samples: 0,
    })
}
