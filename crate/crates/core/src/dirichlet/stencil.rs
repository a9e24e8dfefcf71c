use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{GridFunction, Lattice};
use crate::error::{Error, Result};
use crate::grassmann::{Fiber, GrassmannSet, Variant};
use crate::symcore::{sample_frames, Plane, SymForm};

const SNAP_LIMIT_DEG: f64 = 25.0;

/// p mutually orthogonal integer directions with weights 1/|d|².
#[derive(Clone, Debug)]
pub struct Frame {
    pub dirs: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
    pub(crate) offsets: Vec<isize>,
    wsum: f64,
}

impl Frame {
    fn new(dirs: Vec<Vec<i64>>, lattice: &Lattice) -> Frame {
        let weights: Vec<f64> = dirs
            .iter()
            .map(|d| 1.0 / d.iter().map(|&c| (c * c) as f64).sum::<f64>())
            .collect();
        let offsets = dirs.iter().map(|d| lattice.offset(d)).collect();
        let wsum = weights.iter().sum();
        Frame {
            dirs,
            weights,
            offsets,
            wsum,
        }
    }

    /// Σ dᵢdᵢᵀ/|dᵢ|², the orthogonal projection onto the frame's span.
    pub fn projection(&self) -> SymForm {
        let n = self.dirs[0].len();
        let mut m = DMatrix::zeros(n, n);
        for (d, w) in self.dirs.iter().zip(&self.weights) {
            let v = DVector::from_iterator(n, d.iter().map(|&c| c as f64));
            m += &v * v.transpose() * *w;
        }
        SymForm::new(m).expect("finite projection")
    }

    pub fn plane(&self) -> Plane {
        let n = self.dirs[0].len();
        let cols: Vec<Vec<f64>> = self.dirs.iter().map(|d| d.iter().map(|&c| c as f64).collect()).collect();
        Plane::from_columns(n, &cols).expect("orthogonal integer frame")
    }

    /// Σᵢ wᵢ (u(x+dᵢh) + u(x−dᵢh) − 2u(x)) / h²
    #[inline]
    pub fn trace(&self, u: &[f64], idx: usize, h2: f64) -> f64 {
        let c = u[idx];
        let mut s = 0.0;
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            let i = idx as isize;
            s += w * (u[(i + o) as usize] + u[(i - o) as usize] - 2.0 * c);
        }
        s / h2
    }

    /// The value of u(x) that makes the frame trace vanish.
    #[inline]
    pub fn average(&self, u: &[f64], idx: usize) -> f64 {
        let mut s = 0.0;
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            let i = idx as isize;
            s += w * (u[(i + o) as usize] + u[(i - o) as usize]);
        }
        s / (2.0 * self.wsum)
    }
}

/// Discrete frames approximating the planes of G, bound to one lattice.
#[derive(Clone, Debug)]
pub struct StencilFamily {
    set: GrassmannSet,
    lattice: Arc<Lattice>,
    radius: usize,
    frames: Vec<Frame>,
    all: Vec<u32>,
    per_point: Option<Vec<Vec<u32>>>,
    snap_angles: Vec<f64>,
    resolution_deg: f64,
}

impl StencilFamily {
    pub fn set(&self) -> &GrassmannSet {
        &self.set
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Frame ids active at a lattice point.
    pub fn frame_ids(&self, idx: usize) -> &[u32] {
        match &self.per_point {
            Some(v) => &v[idx],
            None => &self.all,
        }
    }

    /// Snap angle in degrees for each finite plane (in order), or per distinct fiber plane.
    pub fn snap_angles(&self) -> &[f64] {
        &self.snap_angles
    }

    /// Largest angle (degrees) from a plane of the ambient Grassmannian to the nearest frame.
    pub fn angular_resolution(&self) -> f64 {
        self.resolution_deg
    }

    pub fn min_max_average(&self, u: &[f64], idx: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &f in self.frame_ids(idx) {
            let a = self.frames[f as usize].average(u, idx);
            lo = lo.min(a);
            hi = hi.max(a);
        }
        (lo, hi)
    }
}

/// Result of the discrete operator at one interior point.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorValue {
    pub min_val: f64,
    pub max_val: f64,
    pub argmin: Option<usize>,
}

pub fn discrete_operator(u: &GridFunction, s: &StencilFamily, idx: usize) -> Result<OperatorValue> {
    let lat = s.lattice();
    if idx >= lat.len() || !lat.is_interior(idx) {
        return Err(Error::InvalidArgument(format!("lattice point {idx} is not interior")));
    }
    if u.lattice().len() != lat.len() {
        return Err(Error::Dim {
            expected: lat.len(),
            found: u.lattice().len(),
        });
    }
    let h2 = lat.h() * lat.h();
    let mut out = OperatorValue {
        min_val: f64::INFINITY,
        max_val: f64::NEG_INFINITY,
        argmin: None,
    };
    for &f in s.frame_ids(idx) {
        let t = s.frames[f as usize].trace(&u.values, idx, h2);
        if t < out.min_val {
            out.min_val = t;
            out.argmin = Some(f as usize);
        }
        out.max_val = out.max_val.max(t);
    }
    Ok(out)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer directions with max-norm ≤ radius, one per ± pair
/// (first nonzero entry positive).
pub fn enumerate_directions(n: usize, radius: usize) -> Vec<Vec<i64>> {
    let r = radius as i64;
    let mut out = Vec::new();
    let mut d = vec![-r; n];
    loop {
        let first = d.iter().find(|&&c| c != 0);
        if let Some(&f) = first {
            if f > 0 && d.iter().fold(0, |g, &c| gcd(g, c)) == 1 {
                out.push(d.clone());
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                out.sort_by_key(|v| {
                    let norm: i64 = v.iter().map(|c| c * c).sum();
                    (norm, v.iter().map(|c| -c).collect::<Vec<_>>())
                });
                return out;
            }
            d[k] += 1;
            if d[k] <= r {
                break;
            }
            d[k] = -r;
            k += 1;
        }
    }
}

fn orthogonal_tuples(dirs: &[Vec<i64>], p: usize) -> Vec<Vec<Vec<i64>>> {
    fn rec(dirs: &[Vec<i64>], p: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<Vec<i64>>>) {
        if cur.len() == p {
            out.push(cur.iter().map(|&i| dirs[i].clone()).collect());
            return;
        }
        for i in start..dirs.len() {
            let ok = cur
                .iter()
                .all(|&j| dirs[i].iter().zip(&dirs[j]).map(|(a, b)| a * b).sum::<i64>() == 0);
            if ok {
                cur.push(i);
                rec(dirs, p, i + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(dirs, p, 0, &mut Vec::new(), &mut out);
    out
}

fn candidate_frames(n: usize, p: usize, radius: usize) -> Vec<Vec<Vec<i64>>> {
    if p == n {
        return vec![(0..n)
            .map(|k| (0..n).map(|j| i64::from(j == k)).collect())
            .collect()];
    }
    orthogonal_tuples(&enumerate_directions(n, radius), p)
}

fn tuple_plane(t: &[Vec<i64>]) -> Plane {
    let n = t[0].len();
    let cols: Vec<Vec<f64>> = t.iter().map(|d| d.iter().map(|&c| c as f64).collect()).collect();
    Plane::from_columns(n, &cols).expect("orthogonal integer frame")
}

fn snap(plane: &Plane, candidates: &[Vec<Vec<i64>>], planes: &[Plane]) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (k, c) in planes.iter().enumerate() {
        let a = plane.max_principal_angle(c).to_degrees();
        if a < best.1 {
            best = (k, a);
        }
    }
    if candidates.is_empty() || best.1 > SNAP_LIMIT_DEG {
        return Err(Error::StencilResolution { angle_deg: best.1 });
    }
    Ok(best)
}

fn resolution(n: usize, p: usize, planes: &[Plane]) -> f64 {
    if p == n {
        return 0.0;
    }
    let samples = sample_frames(n, p, 4000, 0).expect("valid dimensions");
    samples
        .iter()
        .map(|s| {
            planes
                .iter()
                .map(|c| s.max_principal_angle(c).to_degrees())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub fn build_stencil(g: &GrassmannSet, lattice: &Arc<Lattice>, radius: usize) -> Result<StencilFamily> {
    if !(1..=3).contains(&radius) {
        return Err(Error::InvalidArgument(format!("stencil radius {radius} not in 1..=3")));
    }
    if radius > lattice.layer() {
        return Err(Error::InvalidArgument(format!(
            "stencil radius {radius} exceeds the boundary layer {}",
            lattice.layer()
        )));
    }
    let n = lattice.dim();
    if g.ambient_dim() != n {
        return Err(Error::Dim {
            expected: n,
            found: g.ambient_dim(),
        });
    }
    let p = g.plane_dim();
    let cands = candidate_frames(n, p, radius);
    let cand_planes: Vec<Plane> = cands.iter().map(|t| tuple_plane(t)).collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut snap_angles = Vec::new();
    let mut per_point = None;
    let pick = |chosen: &mut Vec<usize>, k: usize| -> u32 {
        match chosen.iter().position(|&c| c == k) {
            Some(i) => i as u32,
            None => {
                chosen.push(k);
                (chosen.len() - 1) as u32
            }
        }
    };

    match g.variant() {
        Variant::Full => {
            for k in 0..cands.len() {
                pick(&mut chosen, k);
            }
        }
        Variant::ComplexLines => {
            if p != n {
                return Err(Error::UnsupportedVariant(format!(
                    "complex lines in R^{n} cannot be placed on a lattice"
                )));
            }
            pick(&mut chosen, 0);
        }
        Variant::Finite(planes) => {
            for w in planes {
                let (k, a) = snap(w, &cands, &cand_planes)?;
                snap_angles.push(a);
                pick(&mut chosen, k);
            }
        }
        &Variant::FiberField(rule) => {
            let (_, _, base) = rule.dims();
            if base != n {
                return Err(Error::Dim { expected: n, found: base });
            }
            let mut table = vec![Vec::new(); lattice.len()];
            for idx in lattice.interior_indices() {
                let x = lattice.point(idx);
                table[idx] = match g.fiber(Some(&x))? {
                    Fiber::Empty => Vec::new(),
                    Fiber::Full | Fiber::ComplexLines => (0..cands.len()).map(|k| pick(&mut chosen, k)).collect(),
                    Fiber::Finite(planes) => {
                        let mut ids = Vec::new();
                        for w in &planes {
                            let (k, a) = snap(w, &cands, &cand_planes)?;
                            if !snap_angles.contains(&a) {
                                snap_angles.push(a);
                            }
                            let id = pick(&mut chosen, k);
                            if !ids.contains(&id) {
                                ids.push(id);
                            }
                        }
                        ids
                    }
                };
            }
            per_point = Some(table);
        }
    }

    let frames: Vec<Frame> = chosen.iter().map(|&k| Frame::new(cands[k].clone(), lattice)).collect();
    let resolution_deg = match g.variant() {
        Variant::Full => resolution(n, p, &cand_planes),
        _ => snap_angles.iter().cloned().fold(0.0, f64::max),
    };
    Ok(StencilFamily {
        set: g.clone(),
        lattice: lattice.clone(),
        radius,
        all: (0..frames.len() as u32).collect(),
        frames,
        per_point,
        snap_angles,
        resolution_deg,
    })
}
