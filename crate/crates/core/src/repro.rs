//! Scripted reproductions of the named counterexamples and identities.

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dirichlet::decreasing_limit_check;
use crate::error::{Error, Result};
use crate::geom_domain::{horizontal_slice_connectivity, local_slice_convexity, ImplicitDomain};
use crate::grassmann::{nonclosed_probe, FiberRule, GrassmannSet};
use crate::manifold::sphere_counterexample;
use crate::symcore::{fd_hessian, seeded_rng, Plane, ScalarField, SymForm};

pub const REPRO_NAMES: [&str; 6] = ["ex2.3", "ex5.13", "ex6.6", "ex8.6", "appA-nonclosed", "remark5.10"];

#[derive(Clone, Debug, Serialize)]
pub struct ReproReport {
    pub name: String,
    pub pass: bool,
    pub details: Value,
    /// Optional (file name, CSV contents) attachment.
    #[serde(skip)]
    pub table: Option<(String, String)>,
}

pub fn run_repro(name: &str, seed: u64) -> Result<ReproReport> {
    let (pass, details, table) = match name {
        "ex2.3" => half_line_cone()?,
        "ex5.13" => crescent_slices()?,
        "ex6.6" => decreasing_limit()?,
        "ex8.6" => ex86()?,
        "appA-nonclosed" => nonclosed()?,
        "remark5.10" => signed_distance(seed)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown reproduction '{other}' (expected one of {})",
                REPRO_NAMES.join(", ")
            )))
        }
    };
    Ok(ReproReport {
        name: name.to_string(),
        pass,
        details,
        table,
    })
}

type Outcome = (bool, Value, Option<(String, String)>);

fn approach_path() -> Vec<Vec<f64>> {
    (1..=50).map(|j| vec![-1.0 / j as f64]).collect()
}

fn half_line_cone() -> Result<Outcome> {
    let g = GrassmannSet::fiber_field(FiberRule::HalfLineAll);
    let w = Plane::line(&[1.0])?;
    let r = nonclosed_probe(&g, &approach_path(), &[0.0], &w, 0.5)?;
    let pass = r.flipped && r.path_in_p.iter().all(|&b| b) && !r.limit_in_p;
    Ok((pass, serde_json::to_value(&r)?, None))
}

fn nonclosed() -> Result<Outcome> {
    let g = GrassmannSet::fiber_field(FiberRule::AxisJump);
    let w = Plane::coordinate(2, &[0])?;
    let mut runs = Vec::new();
    let mut pass = true;
    for eps in [1.0, 0.25, 0.01] {
        let r = nonclosed_probe(&g, &approach_path(), &[0.0], &w, eps)?;
        pass &= r.flipped;
        runs.push(json!({
            "eps": eps,
            "flipped": r.flipped,
            "path_min_trace": r.path_min_trace.iter().cloned().fold(f64::INFINITY, f64::min),
            "limit_min_trace": r.limit_min_trace,
        }));
    }
    let control = GrassmannSet::fiber_field(FiberRule::ConstantAxis);
    let path: Vec<Vec<f64>> = (1..=50).map(|j| vec![-1.0 / j as f64, 0.0]).collect();
    let control_rejected = matches!(
        nonclosed_probe(&control, &path, &[0.0, 0.0], &w, 0.01),
        Err(Error::ProbeInvalid(_))
    );
    pass &= control_rejected;
    Ok((
        pass,
        json!({ "fiber_rule": "axis_jump", "runs": runs, "locally_surjective_control_rejected": control_rejected }),
        None,
    ))
}

fn crescent_slices() -> Result<Outcome> {
    let d = ImplicitDomain::crescent();
    let global = horizontal_slice_connectivity(&d, 0.02)?;
    let local = local_slice_convexity(&d, 0.02, 0.5)?;
    let pass = !global.g_convex && global.witness_slice.is_some() && local.locally_convex;
    Ok((
        pass,
        json!({ "globally_convex": global.g_convex, "locally_convex": local.locally_convex,
                "global": global, "local": local }),
        None,
    ))
}

fn decreasing_limit() -> Result<Outcome> {
    let r = decreasing_limit_check(1.0 / 64.0, 1.0)?;
    let details = json!({
        "h": r.h, "a": r.a, "deltas": r.deltas, "members": r.members, "decreasing": r.decreasing,
        "epsilons": r.epsilons, "eps_members": r.eps_members, "increasing": r.increasing,
        "limit_member": r.limit_member, "failing_point": r.failing_point,
        "second_difference_at_zero": r.second_difference,
    });
    Ok((r.reproduces(), details, None))
}

fn ex86() -> Result<Outcome> {
    let r = sphere_counterexample(100)?;
    let pass = r.points >= 10_000 && r.max_trace_error <= 1e-4 && r.mp_failure && r.ambient_max_error <= 1e-4;
    let mut csv = String::from("y,trace\n");
    for (y, t) in &r.rows {
        csv.push_str(&format!("{y},{t}\n"));
    }
    let details = json!({
        "points": r.points, "max_trace_error": r.max_trace_error, "min_trace": r.min_trace,
        "trace_at_equator": r.trace_at_equator, "trace_at_half": r.trace_at_half,
        "interior_max": r.interior_max, "boundary_max": r.boundary_max, "mp_failure": r.mp_failure,
        "ambient_max_error": r.ambient_max_error,
    });
    Ok((pass, details, Some(("ex8.6_trace.csv".into(), csv))))
}

/// Hess |x| = (1/r)(I − x̂x̂ᵀ) and the block form of Hess(−log δ) for the unit ball.
pub fn signed_distance_errors(seed: u64, points: usize) -> Result<(f64, f64)> {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seeded_rng(seed);
    let n = 3;
    let norm = ScalarField::new(n, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt());
    let logd = ScalarField::new(n, |x| -(1.0 - x.iter().map(|v| v * v).sum::<f64>().sqrt()).ln());
    let mut dir = || {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let l = v.iter().map(|a: &f64| a * a).sum::<f64>().sqrt();
        DVector::from_iterator(n, v.into_iter().map(|a| a / l))
    };
    let mut radii = seeded_rng(seed.wrapping_add(1));
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let xh = dir();
        let r: f64 = radii.random_range(0.5..2.0);
        let x: Vec<f64> = (&xh * r).iter().copied().collect();
        let exact = (SymForm::identity(n) - SymForm::outer(&xh)) * (1.0 / r);
        e1 = e1.max(fd_hessian(&norm, &x)?.max_abs_diff(&exact));

        let xh = dir();
        let r: f64 = radii.random_range(0.2..0.8);
        let x: Vec<f64> = (&xh * r).iter().copied().collect();
        let delta = 1.0 - r;
        // normal block 1/δ², tangential block (1/δ)·II with II = (1/r)·I on the level sphere
        let exact = SymForm::outer(&xh) * (1.0 / (delta * delta))
            + (SymForm::identity(n) - SymForm::outer(&xh)) * (1.0 / (delta * r));
        let fd = fd_hessian(&logd, &x)?;
        e2 = e2.max(fd.max_abs_diff(&exact) / exact.frobenius_norm().max(1.0));
    }
    Ok((e1, e2))
}

fn signed_distance(seed: u64) -> Result<Outcome> {
    let (e1, e2) = signed_distance_errors(seed, 100)?;
    Ok((
        e1 <= 1e-5 && e2 <= 1e-4,
        json!({ "points": 100, "hessian_norm_max_error": e1, "log_distance_block_max_error": e2 }),
        None,
    ))
}
