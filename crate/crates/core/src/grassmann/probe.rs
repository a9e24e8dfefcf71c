//! Non-closedness of P(G) when the fibers do not vary lower-semicontinuously.

use serde::Serialize;

use super::{classify, min_max_trace, GrassmannSet};
use crate::error::{Error, Result};
use crate::symcore::{Plane, SymForm};

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    /// A = −P_W + (1/ε)·P_{W⊥}
    pub form: SymForm,
    pub path_in_p: Vec<bool>,
    pub path_min_trace: Vec<f64>,
    pub limit_in_p: bool,
    pub limit_min_trace: f64,
    /// Membership holds along the whole path and fails at the limit.
    pub flipped: bool,
}

/// Builds A = −P_W + (1/ε)P_{W⊥} and follows its membership along `path → limit`.
///
/// Requires W ∈ G at the limit and every fiber on the path to stay away from W
/// in the sense tr_V P_{W⊥} ≥ ε·p; together these force A ∈ P(G_{xⱼ}) for all j
/// while tr_W A = −p < 0 at the limit.
pub fn nonclosed_probe(
    g: &GrassmannSet,
    path: &[Vec<f64>],
    limit: &[f64],
    w: &Plane,
    eps: f64,
) -> Result<ProbeReport> {
    let p = g.plane_dim() as f64;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    if w.ambient_dim() != g.ambient_dim() || w.dim() != g.plane_dim() {
        return Err(Error::Dim {
            expected: g.ambient_dim(),
            found: w.ambient_dim(),
        });
    }
    if path.is_empty() {
        return Err(Error::InvalidArgument("probe path is empty".into()));
    }
    let in_limit = min_max_trace(g, w.projection(), Some(limit))?.max;
    if !(in_limit >= p - 1e-9) {
        return Err(Error::ProbeInvalid(format!(
            "W is not in the fiber at the limit point {limit:?}"
        )));
    }
    let complement = w.complement_projection();
    for x in path {
        let closest = min_max_trace(g, &complement, Some(x))?.min;
        if closest < eps * p {
            return Err(Error::ProbeInvalid(format!(
                "fiber at {x:?} comes within eps of W (min tr_V P_W⊥ = {closest:.3e} < {:.3e})",
                eps * p
            )));
        }
    }
    let form = &complement * (1.0 / eps) - w.projection().clone();
    let mut path_in_p = Vec::with_capacity(path.len());
    let mut path_min_trace = Vec::with_capacity(path.len());
    for x in path {
        let v = classify(g, &form, Some(x))?;
        path_in_p.push(v.in_p);
        path_min_trace.push(v.min_trace);
    }
    let lim = classify(g, &form, Some(limit))?;
    let flipped = path_in_p.iter().all(|&b| b) && !lim.in_p;
    Ok(ProbeReport {
        form,
        path_in_p,
        path_min_trace,
        limit_in_p: lim.in_p,
        limit_min_trace: lim.min_trace,
        flipped,
    })
}
