use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use gpsh_core::dirichlet::{
    build_stencil, hull, max_principle_check, psh_envelope, solve_dirichlet, GridFunction, Lattice,
    Schedule, SolveOptions, SolveReport, StencilFamily,
};
use gpsh_core::geom_domain::{boundary_convexity, sample_boundary, ConvexityVerdict, ImplicitDomain};
use gpsh_core::grassmann::{free_dimension, span_analysis};
use gpsh_core::repro::run_repro;
use gpsh_core::{classify, GrassmannSet, SymForm};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{field_plot, history_plot, read_numeric_csv, Output};

/// Exit code and the summary printed to stdout.
pub type Outcome = (i32, Value);

fn grassmann(cfg: &RunConfig) -> Result<GrassmannSet> {
    let g = cfg
        .g
        .as_ref()
        .ok_or_else(|| anyhow!("no Grassmannian given (use --g or set `g` in the config file)"))?;
    Ok(serde_json::from_value(g.clone())?)
}

fn point(cfg: &RunConfig, g: &GrassmannSet) -> Result<Option<Vec<f64>>> {
    match (&cfg.point, g.base_dim()) {
        (Some(x), Some(m)) if x.len() != m => bail!("base point needs {m} coordinates, got {}", x.len()),
        (None, Some(_)) => bail!("fiber field sets need a base point (--point)"),
        (p, _) => Ok(p.clone()),
    }
}

fn options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
        schedule: if cfg.schedule == "jacobi" {
            Schedule::Jacobi
        } else {
            Schedule::SymmetricGaussSeidel
        },
    }
}

fn lattice(cfg: &RunConfig, g: &GrassmannSet) -> Result<Arc<Lattice>> {
    let n = g.base_dim().unwrap_or(g.ambient_dim());
    let lo = cfg.lattice.lo.clone().unwrap_or_else(|| vec![-1.0; n]);
    let hi = cfg.lattice.hi.clone().unwrap_or_else(|| vec![1.0; n]);
    if lo.len() != n || hi.len() != n {
        bail!("lattice box must have {n} coordinates (lo {:?}, hi {:?})", lo, hi);
    }
    Ok(Lattice::new(&lo, &hi, cfg.lattice.h, cfg.lattice.radius)?)
}

fn stencil(cfg: &RunConfig) -> Result<StencilFamily> {
    let g = grassmann(cfg)?;
    let lat = lattice(cfg, &g)?;
    Ok(build_stencil(&g, &lat, cfg.lattice.radius)?)
}

fn builtin(name: &str) -> Option<fn(&[f64]) -> f64> {
    fn saddle(x: &[f64]) -> f64 {
        x[0] * x[0] - x.get(1).map_or(0.0, |y| y * y)
    }
    fn xsq(x: &[f64]) -> f64 {
        x[0] * x[0]
    }
    fn abs(x: &[f64]) -> f64 {
        x.iter().map(|t| t * t).sum::<f64>().sqrt()
    }
    fn double_well(x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|t| t * t).sum();
        (r2 - 1.0).powi(2)
    }
    match name {
        "saddle" => Some(saddle),
        "xsq" => Some(xsq),
        "abs" => Some(abs),
        "double-well" => Some(double_well),
        _ => None,
    }
}

/// Lattice values from a CSV of "x..,value" rows; `required` lists indices that must be covered.
fn grid_from_csv(path: &str, lat: &Arc<Lattice>, required: &[usize]) -> Result<GridFunction> {
    let rows = read_numeric_csv(path)?;
    let n = lat.dim();
    let mut values = vec![f64::NAN; lat.len()];
    for (k, r) in rows.iter().enumerate() {
        if r.len() != n + 1 {
            bail!("{path}: row {} has {} columns, expected {}", k + 1, r.len(), n + 1);
        }
        let idx = lat
            .nearest(&r[..n])
            .ok_or_else(|| anyhow!("{path}: point {:?} is outside the lattice box", &r[..n]))?;
        let q = lat.point(idx);
        let off = q.iter().zip(&r[..n]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if off > 1e-6 * lat.h() {
            bail!("{path}: point {:?} is not a lattice point", &r[..n]);
        }
        values[idx] = r[n];
    }
    if let Some(&miss) = required.iter().find(|&&i| values[i].is_nan()) {
        bail!("{path}: no value for lattice point {:?}", lat.point(miss));
    }
    for v in values.iter_mut().filter(|v| v.is_nan()) {
        *v = 0.0;
    }
    Ok(GridFunction::new(lat, values)?)
}

fn data(
    kind: &Option<String>,
    file: &Option<String>,
    lat: &Arc<Lattice>,
    required: &[usize],
    what: &str,
) -> Result<(GridFunction, Option<fn(&[f64]) -> f64>)> {
    let kind = kind.as_deref().ok_or_else(|| anyhow!("no {what} data given"))?;
    if kind == "custom-csv" {
        let path = file
            .as_deref()
            .ok_or_else(|| anyhow!("{what} 'custom-csv' needs a CSV file"))?;
        return Ok((grid_from_csv(path, lat, required)?, None));
    }
    let f = builtin(kind).ok_or_else(|| anyhow!("unknown {what} builtin '{kind}'"))?;
    Ok((GridFunction::from_fn(lat, f), Some(f)))
}

fn solve_outputs(out: &mut Output, prefix: &str, r: &SolveReport) -> Result<()> {
    let dim = r.u.lattice().dim();
    out.write(&format!("{prefix}.csv"), &r.u.to_csv())?;
    let mut hist = String::from("sweep,change\n");
    for (k, c) in r.history.iter().enumerate() {
        hist.push_str(&format!("{},{c}\n", k + 1));
    }
    out.write("history.csv", &hist)?;
    out.write(&format!("{prefix}.gp"), &field_plot(&format!("{prefix}.csv"), dim, prefix))?;
    out.write("history.gp", &history_plot("history.csv"))?;
    Ok(())
}

fn stencil_summary(s: &StencilFamily) -> Value {
    json!({
        "radius": s.radius(),
        "frames": s.frames().len(),
        "angular_resolution_deg": s.angular_resolution(),
        "snap_angles_deg": s.snap_angles(),
        "lattice_counts": s.lattice().counts(),
        "h": s.lattice().h(),
    })
}

pub fn cmd_classify(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let g = grassmann(cfg)?;
    let path = cfg.matrix.as_deref().ok_or_else(|| anyhow!("no matrix file given (--matrix)"))?;
    let rows = read_numeric_csv(path)?;
    let scale = rows.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            if let Some(w) = rows.get(j).and_then(|r| r.get(i)) {
                if (v - w).abs() > 1e-9 * scale {
                    bail!("{path} is not symmetric: entry ({i},{j}) = {v} but ({j},{i}) = {w}");
                }
            }
        }
    }
    let a = SymForm::from_rows(&rows).with_context(|| format!("{path} is not a symmetric matrix"))?;
    let x = point(cfg, &g)?;
    let v = classify(&g, &a, x.as_deref())?;
    let verdict = if v.in_int_p {
        "strict"
    } else if v.on_boundary {
        "boundary"
    } else {
        "outside"
    };
    let mut report = serde_json::to_value(&v)?;
    report["verdict"] = json!(verdict);
    report["dual"] = json!(v.in_dual);
    report["variant"] = json!(g.variant_name());
    out.write_json("verdict.json", &report)?;
    Ok((if v.in_p { 0 } else { 1 }, report))
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let s = stencil(cfg)?;
    let lat = s.lattice().clone();
    let (g, exact) = data(&cfg.boundary, &cfg.boundary_file, &lat, &lat.boundary_indices(), "boundary")?;
    let r = solve_dirichlet(&g, &s, &options(cfg))?;
    let (imax, bmax) = r.u.interior_and_boundary_max();
    let report = json!({
        "residual": r.residual,
        "sweeps": r.sweeps,
        "min_trace_range": [r.min_trace_range.0, r.min_trace_range.1],
        "warnings": r.warnings,
        "boundary": cfg.boundary,
        "max_abs_diff_from_builtin": exact.map(|_| r.u.max_abs_diff(&g)),
        "interior_max": imax,
        "boundary_max": bmax,
        "stencil": stencil_summary(&s),
    });
    solve_outputs(out, "u", &r)?;
    out.write_json("report.json", &report)?;
    Ok((0, report))
}

pub fn cmd_envelope(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let s = stencil(cfg)?;
    let lat = s.lattice().clone();
    let all: Vec<usize> = (0..lat.len()).collect();
    let (obstacle, _) = data(&cfg.obstacle, &cfg.obstacle_file, &lat, &all, "obstacle")?;
    let r = psh_envelope(&obstacle, &s, &options(cfg))?;
    let contact = r
        .u
        .values
        .iter()
        .zip(&obstacle.values)
        .filter(|(a, b)| (*a - *b).abs() <= cfg.tol.max(1e-12) * 10.0)
        .count();
    let report = json!({
        "residual": r.residual,
        "sweeps": r.sweeps,
        "min_trace_range": [r.min_trace_range.0, r.min_trace_range.1],
        "warnings": r.warnings,
        "obstacle": cfg.obstacle,
        "contact_points": contact,
        "max_gap_below_obstacle": r.u.zip_with(&obstacle, |a, b| b - a).values.iter().copied().fold(0.0, f64::max),
        "stencil": stencil_summary(&s),
    });
    solve_outputs(out, "envelope", &r)?;
    out.write_json("report.json", &report)?;
    Ok((0, report))
}

pub fn cmd_hull(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let s = stencil(cfg)?;
    let lat = s.lattice().clone();
    let pts = cfg
        .hull_points
        .as_ref()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| anyhow!("no hull points given (--points \"x,y;x,y\")"))?;
    let mut k = vec![false; lat.len()];
    for p in pts {
        if p.len() != lat.dim() {
            bail!("hull point {p:?} must have {} coordinates", lat.dim());
        }
        let idx = lat.nearest(p).ok_or_else(|| anyhow!("hull point {p:?} is outside the lattice box"))?;
        k[idx] = true;
    }
    let r = hull(&k, &s, cfg.threshold, &options(cfg))?;
    let n = lat.dim();
    let names = ["x", "y", "z"];
    let mut csv = format!("{},w,in_set,in_hull\n", names[..n].join(","));
    for idx in 0..lat.len() {
        for c in lat.point(idx) {
            csv.push_str(&format!("{c},"));
        }
        csv.push_str(&format!("{},{},{}\n", r.w.values[idx], k[idx] as u8, r.mask[idx] as u8));
    }
    out.write("hull.csv", &csv)?;
    let plot = match n {
        1 => "set datafile separator ','\nset key autotitle columnhead\nplot 'hull.csv' using 1:($3>0 ? $2 : 1/0) with points title 'hull', '' using 1:2 with lines title 'w'\npause -1\n".to_string(),
        _ => "set datafile separator ','\nset key autotitle columnhead\nset view map\nsplot 'hull.csv' using 1:2:($5>0 ? 1 : 0) with points pointtype 5 palette title 'hull'\npause -1\n".to_string(),
    };
    out.write("hull.gp", &plot)?;
    let report = json!({
        "threshold": r.threshold,
        "hull_points": r.mask.iter().filter(|&&b| b).count(),
        "set_points": k.iter().filter(|&&b| b).count(),
        "threshold_sweep": r.sweep.iter().map(|(t, c)| json!({"threshold": t, "points": c})).collect::<Vec<_>>(),
        "sweeps": r.sweeps,
        "cell_area": lat.h().powi(n as i32),
        "stencil": stencil_summary(&s),
    });
    out.write_json("report.json", &report)?;
    Ok((0, report))
}

pub fn cmd_boundary(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let g = grassmann(cfg)?;
    let dc = cfg.domain.as_ref().ok_or_else(|| anyhow!("no domain given (--domain)"))?;
    let d = ImplicitDomain::from_config(dc)?;
    let sample = sample_boundary(&d, cfg.grid_h, cfg.seed)?;
    let recs = boundary_convexity(&g, &sample.points, cfg.strict_eta)?;
    let n = d.dim();
    let mut head: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    head.extend((0..n).map(|i| format!("normal{i}")));
    head.extend(["min_tangential_trace".into(), "verdict".into()]);
    let mut csv = head.join(",") + "\n";
    for r in &recs {
        let cells: Vec<String> = r.x.iter().chain(&r.normal).map(|v| v.to_string()).collect();
        csv.push_str(&format!("{},{},{}\n", cells.join(","), r.min_tangential_trace, r.verdict.as_str()));
    }
    out.write("boundary.csv", &csv)?;
    let verdicts = [
        ConvexityVerdict::StrictlyConvex,
        ConvexityVerdict::Convex,
        ConvexityVerdict::NotConvex,
        ConvexityVerdict::Free,
    ];
    let mut counts = serde_json::Map::new();
    let mut witnesses = serde_json::Map::new();
    for v in verdicts {
        let hits: Vec<_> = recs.iter().filter(|r| r.verdict == v).collect();
        counts.insert(v.as_str().into(), json!(hits.len()));
        if let Some(r) = hits.first() {
            witnesses.insert(v.as_str().into(), json!({"x": r.x, "min_tangential_trace": r.min_tangential_trace}));
        }
    }
    let report = json!({
        "domain": dc,
        "samples": recs.len(),
        "skipped": sample.skipped,
        "counts": counts,
        "witnesses": witnesses,
        "all_strictly_convex": !recs.is_empty() && recs.iter().all(|r| r.verdict == ConvexityVerdict::StrictlyConvex),
    });
    out.write_json("report.json", &report)?;
    Ok((0, report))
}

pub fn cmd_span(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let g = grassmann(cfg)?;
    let x = point(cfg, &g)?;
    let r = serde_json::to_value(span_analysis(&g, x.as_deref())?)?;
    out.write_json("span.json", &r)?;
    Ok((0, r))
}

pub fn cmd_freedim(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let g = grassmann(cfg)?;
    let r = serde_json::to_value(free_dimension(&g)?)?;
    out.write_json("freedim.json", &r)?;
    Ok((0, r))
}

pub fn cmd_repro(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let name = cfg.name.as_deref().ok_or_else(|| anyhow!("no reproduction name given"))?;
    let r = run_repro(name, cfg.seed)?;
    if let Some((file, csv)) = &r.table {
        out.write(file, csv)?;
        if file.ends_with("_trace.csv") {
            out.write(
                &file.replace(".csv", ".gp"),
                &format!(
                    "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'y'\n\
                     plot '{file}' using 1:2 with points title 'trace', x**2 with lines title 'y^2'\npause -1\n"
                ),
            )?;
        }
    }
    let mut v = serde_json::to_value(&r)?;
    v["attachment"] = json!(r.table.as_ref().map(|t| t.0.clone()));
    out.write_json("repro.json", &v)?;
    eprintln!("{} {name}", if r.pass { "PASS" } else { "FAIL" });
    Ok((if r.pass { 0 } else { 1 }, v))
}

pub fn cmd_mp_check(cfg: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let s = stencil(cfg)?;
    let r = max_principle_check(&s, cfg.trials, cfg.seed)?;
    let report = json!({
        "trials": r.trials,
        "violations": r.violations,
        "worst_gap": r.worst_gap,
        "stencil": stencil_summary(&s),
    });
    out.write_json("report.json", &report)?;
    Ok((if r.violations == 0 { 0 } else { 1 }, report))
}
