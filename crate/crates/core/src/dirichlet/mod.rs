//! Monotone wide-stencil discretization of min_W tr_W D²u on uniform lattices:
//! Dirichlet solves, G-psh envelopes, hulls and discrete property harnesses.

mod checks;
mod distributional;
mod solve;
mod stencil;

pub use checks::{
    closure_properties_check, comparison_check, decreasing_limit_check, is_discrete_psh, max_principle_check, random_psh,
    ClosureReport, ComparisonReport, DecreasingLimitReport, MaxPrincipleReport,
};
pub use distributional::{distributional_check, frame_coordinates, nnls, DistributionalReport};
pub use solve::{
    force_dual, hull, psh_envelope, solve_dirichlet, HullReport, Schedule, SolveOptions, SolveReport,
};
pub use stencil::{build_stencil, discrete_operator, enumerate_directions, Frame, OperatorValue, StencilFamily};

use std::sync::Arc;

use crate::error::{Error, Result};

/// A uniform lattice on a box. Points within `layer` steps of a face form the
/// boundary layer; the rest are interior.
#[derive(Clone, Debug)]
pub struct Lattice {
    lo: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
    strides: Vec<usize>,
    layer: usize,
}

impl Lattice {
    pub fn new(lo: &[f64], hi: &[f64], h: f64, layer: usize) -> Result<Arc<Lattice>> {
        let n = lo.len();
        if !(1..=3).contains(&n) || hi.len() != n {
            return Err(Error::InvalidArgument(format!("lattice dimension {n} not in 1..=3")));
        }
        if !(h > 0.0) || layer == 0 {
            return Err(Error::InvalidArgument(format!("spacing {h}, layer {layer}")));
        }
        let mut counts = Vec::with_capacity(n);
        for k in 0..n {
            let cells = (hi[k] - lo[k]) / h;
            let r = cells.round();
            if (cells - r).abs() > 1e-8 * r.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "box side {} is not a multiple of h = {h}",
                    hi[k] - lo[k]
                )));
            }
            let c = r as usize + 1;
            if c <= 2 * layer {
                return Err(Error::InvalidArgument(format!(
                    "{c} points per side leave no interior for layer {layer}"
                )));
            }
            counts.push(c);
        }
        let mut strides = vec![1; n];
        for k in 1..n {
            strides[k] = strides[k - 1] * counts[k - 1];
        }
        Ok(Arc::new(Lattice {
            lo: lo.to_vec(),
            h,
            counts,
            strides,
            layer,
        }))
    }

    /// [−1, 1]ⁿ with spacing h.
    pub fn unit_box(n: usize, h: f64, layer: usize) -> Result<Arc<Lattice>> {
        Self::new(&vec![-1.0; n], &vec![1.0; n], h, layer)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        let mut k = idx;
        self.counts
            .iter()
            .map(|&c| {
                let v = k % c;
                k /= c;
                v
            })
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .iter()
            .zip(&self.lo)
            .map(|(&c, lo)| lo + c as f64 * self.h)
            .collect()
    }

    /// Index of the lattice point nearest to x, if x lies in the box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut coords = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let c = ((x[k] - self.lo[k]) / self.h).round();
            if c < 0.0 || c as usize >= self.counts[k] {
                return None;
            }
            coords.push(c as usize);
        }
        Some(self.index(&coords))
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.coords(idx)
            .iter()
            .zip(&self.counts)
            .all(|(&c, &n)| c >= self.layer && c + self.layer < n)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_interior(i)).collect()
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_interior(i)).collect()
    }

    /// Linear offset of an integer displacement.
    pub fn offset(&self, d: &[i64]) -> isize {
        d.iter().zip(&self.strides).map(|(&di, &s)| di as isize * s as isize).sum()
    }
}

/// Values on every point of a lattice.
#[derive(Clone, Debug)]
pub struct GridFunction {
    lattice: Arc<Lattice>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lattice: &Arc<Lattice>, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::Dim {
                expected: lattice.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at lattice point {:?}",
                lattice.point(i)
            )));
        }
        Ok(GridFunction {
            lattice: lattice.clone(),
            values,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(lattice: &Arc<Lattice>, f: F) -> Self {
        let values = (0..lattice.len()).map(|i| f(&lattice.point(i))).collect();
        GridFunction {
            lattice: lattice.clone(),
            values,
        }
    }

    pub fn constant(lattice: &Arc<Lattice>, c: f64) -> Self {
        GridFunction {
            lattice: lattice.clone(),
            values: vec![c; lattice.len()],
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction {
        GridFunction {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridFunction, f: F) -> GridFunction {
        GridFunction {
            lattice: self.lattice.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// (max over interior, max over boundary layer)
    pub fn interior_and_boundary_max(&self) -> (f64, f64) {
        let (mut i, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (k, &v) in self.values.iter().enumerate() {
            if self.lattice.is_interior(k) {
                i = i.max(v);
            } else {
                b = b.max(v);
            }
        }
        (i, b)
    }

    /// CSV rows "x..,value".
    pub fn to_csv(&self) -> String {
        let n = self.lattice.dim();
        let mut s = String::new();
        let names = ["x", "y", "z"];
        s.push_str(&names[..n].join(","));
        s.push_str(",value\n");
        for (k, v) in self.values.iter().enumerate() {
            for c in self.lattice.point(k) {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{v}\n"));
        }
        s
    }
}
