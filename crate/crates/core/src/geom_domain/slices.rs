//! Connectivity of horizontal slices: convexity for G = {x₁-axis} in ℝ².

use serde::Serialize;

use super::ImplicitDomain;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct SliceReport {
    pub g_convex: bool,
    /// Height of the first row (from the bottom) with more than one run.
    pub witness_slice: Option<f64>,
    pub max_runs: usize,
    pub rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalSliceReport {
    pub locally_convex: bool,
    /// Boundary cell whose neighborhood has a disconnected slice.
    pub witness_point: Option<Vec<f64>>,
    pub boundary_cells: usize,
    pub window: f64,
}

struct Raster {
    inside: Vec<bool>,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    h: f64,
}

impl Raster {
    fn new(d: &ImplicitDomain, h: f64) -> Result<Raster> {
        if d.dim() != 2 {
            return Err(Error::Dim {
                expected: 2,
                found: d.dim(),
            });
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("grid_h = {h}")));
        }
        let (lo, hi) = d.bounds();
        let nx = ((hi[0] - lo[0]) / h).floor() as usize;
        let ny = ((hi[1] - lo[1]) / h).floor() as usize;
        let mut inside = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = [lo[0] + (i as f64 + 0.5) * h, lo[1] + (j as f64 + 0.5) * h];
                inside[j * nx + i] = d.rho().value(&p).map(|r| r < 0.0).unwrap_or(false);
            }
        }
        Ok(Raster {
            inside,
            nx,
            ny,
            x0: lo[0],
            y0: lo[1],
            h,
        })
    }

    fn at(&self, i: usize, j: usize) -> bool {
        self.inside[j * self.nx + i]
    }

    fn runs(&self, j: usize, i0: usize, i1: usize) -> usize {
        let mut runs = 0;
        let mut prev = false;
        for i in i0..i1 {
            let c = self.at(i, j);
            if c && !prev {
                runs += 1;
            }
            prev = c;
        }
        runs
    }

    fn y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.h
    }

    fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h
    }
}

/// Rasterizes Ω at cell centers and counts interior runs in each row.
pub fn horizontal_slice_connectivity(d: &ImplicitDomain, grid_h: f64) -> Result<SliceReport> {
    let r = Raster::new(d, grid_h)?;
    let mut witness = None;
    let mut max_runs = 0;
    for j in 0..r.ny {
        let k = r.runs(j, 0, r.nx);
        max_runs = max_runs.max(k);
        if k > 1 && witness.is_none() {
            witness = Some(r.y(j));
        }
    }
    Ok(SliceReport {
        g_convex: witness.is_none(),
        witness_slice: witness,
        max_runs,
        rows: r.ny,
    })
}

/// Local version: around every boundary cell, the slices of Ω inside a square
/// window of half-width `window` must be connected.
pub fn local_slice_convexity(d: &ImplicitDomain, grid_h: f64, window: f64) -> Result<LocalSliceReport> {
    let r = Raster::new(d, grid_h)?;
    let w = (window / grid_h).round().max(1.0) as usize;
    let mut boundary_cells = 0;
    for j in 0..r.ny {
        for i in 0..r.nx {
            if !r.at(i, j) {
                continue;
            }
            let edge = i == 0
                || j == 0
                || i + 1 == r.nx
                || j + 1 == r.ny
                || !r.at(i - 1, j)
                || !r.at(i + 1, j)
                || !r.at(i, j - 1)
                || !r.at(i, j + 1);
            if !edge {
                continue;
            }
            boundary_cells += 1;
            let (i0, i1) = (i.saturating_sub(w), (i + w + 1).min(r.nx));
            let (j0, j1) = (j.saturating_sub(w), (j + w + 1).min(r.ny));
            if (j0..j1).any(|jj| r.runs(jj, i0, i1) > 1) {
                return Ok(LocalSliceReport {
                    locally_convex: false,
                    witness_point: Some(vec![r.x(i), r.y(j)]),
                    boundary_cells,
                    window,
                });
            }
        }
    }
    Ok(LocalSliceReport {
        locally_convex: true,
        witness_point: None,
        boundary_cells,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_and_annulus() {
        let disk = ImplicitDomain::ball(2, 1.0);
        assert!(horizontal_slice_connectivity(&disk, 0.02).unwrap().g_convex);
        let ann = ImplicitDomain::annulus(0.5, 1.0);
        let r = horizontal_slice_connectivity(&ann, 0.02).unwrap();
        assert!(!r.g_convex);
        assert_eq!(r.max_runs, 2);
    }

    #[test]
    fn crescent_is_locally_but_not_globally_convex() {
        let c = ImplicitDomain::crescent();
        let g = horizontal_slice_connectivity(&c, 0.02).unwrap();
        assert!(!g.g_convex);
        let y = g.witness_slice.unwrap();
        assert!(y > 0.0 && y < 0.05, "{y}");
        let l = local_slice_convexity(&c, 0.02, 0.5).unwrap();
        assert!(l.locally_convex, "{:?}", l.witness_point);
        assert!(l.boundary_cells > 100);
        let ann = ImplicitDomain::annulus(0.5, 1.0);
        assert!(!local_slice_convexity(&ann, 0.02, 1.5).unwrap().locally_convex);
    }
}
