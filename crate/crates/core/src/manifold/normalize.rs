//! Reduction of ⟨E, D²u⟩ − ⟨b, Du⟩ with rank E = p to the p-th horizontal Laplacian.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symcore::SymForm;

const RANGE_MIN: f64 = 1e-6;
const KERNEL_MAX: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct Normalization {
    /// A + B: PSD square root of E plus the projection onto ker E.
    pub root_plus_kernel: DMatrix<f64>,
    /// h with hᵗ·P·h = E, P the projection onto the first p coordinates.
    pub h: DMatrix<f64>,
    pub residual: f64,
    /// H(e_k) for each basis vector, chosen so that Hᵗ(P) = −b.
    pub first_order: Vec<SymForm>,
    pub first_order_residual: f64,
    /// Eigenvalues of E in decreasing order.
    pub eigenvalues: Vec<f64>,
}

/// Writes E = hᵗ·P·h and finds H with Hᵗ(P) = −b.
///
/// E = U·Λ·Uᵗ with the range eigenvectors first; A = U·√Λ·Uᵗ, B is the kernel
/// projection, (A + B)·P_W·(A + B) = E with P_W = U·P·Uᵗ, hence h = Uᵗ(A + B).
pub fn normalize_constant_rank(e: &SymForm, p: usize, b: Option<&DVector<f64>>) -> Result<Normalization> {
    let n = e.dim();
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!("p = {p} not in 1..={n}")));
    }
    let s = e.spectrum();
    let order: Vec<usize> = (0..n).rev().collect();
    let values: Vec<f64> = order.iter().map(|&k| s.values[k]).collect();
    let gap_ok = values[p - 1] >= RANGE_MIN && (p == n || values[p] <= KERNEL_MAX)
        && values.iter().skip(p).all(|v| v.abs() <= KERNEL_MAX);
    if !gap_ok {
        return Err(Error::RankAmbiguous { p, eigenvalues: values });
    }
    let mut u = DMatrix::from_fn(n, n, |i, j| s.vectors[(i, order[j])]);
    for j in 0..n {
        let col = u.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            u.column_mut(j).neg_mut();
        }
    }
    let sqrt_diag = DVector::from_fn(n, |j, _| if j < p { values[j].sqrt() } else { 0.0 });
    let kernel_diag = DVector::from_fn(n, |j, _| if j < p { 0.0 } else { 1.0 });
    let a = &u * DMatrix::from_diagonal(&sqrt_diag) * u.transpose();
    let bproj = &u * DMatrix::from_diagonal(&kernel_diag) * u.transpose();
    let root_plus_kernel = &a + &bproj;
    let h = u.transpose() * &root_plus_kernel;
    let pm = DMatrix::from_diagonal(&DVector::from_fn(n, |j, _| if j < p { 1.0 } else { 0.0 }));
    let residual = (h.transpose() * &pm * &h - e.matrix()).amax();

    let pform = SymForm::new(pm)?;
    let zero = DVector::zeros(n);
    let b = b.unwrap_or(&zero);
    if b.len() != n {
        return Err(Error::Dim {
            expected: n,
            found: b.len(),
        });
    }
    let first_order: Vec<SymForm> = (0..n).map(|k| &pform * (-b[k] / p as f64)).collect();
    let ht_p = DVector::from_fn(n, |k, _| first_order[k].inner(&pform));
    let first_order_residual = (ht_p + b).amax();
    Ok(Normalization {
        root_plus_kernel,
        h,
        residual,
        first_order,
        first_order_residual,
        eigenvalues: values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::{random_plane, seeded_rng, Plane};

    #[test]
    fn diagonal_rank_one() {
        let r = normalize_constant_rank(&SymForm::diagonal(&[4.0, 0.0]), 1, None).unwrap();
        assert!((&r.h - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]))).amax() < 1e-15);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn projection_is_rotation() {
        let w = Plane::line(&[1.0, 1.0]).unwrap();
        let r = normalize_constant_rank(w.projection(), 1, None).unwrap();
        assert!(r.residual <= 1e-10);
        assert!((&r.root_plus_kernel - DMatrix::identity(2, 2)).amax() < 1e-12);
        let hh = r.h.transpose() * &r.h;
        assert!((hh - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn ambiguous_rank() {
        assert!(matches!(
            normalize_constant_rank(&SymForm::diagonal(&[1.0, 1e-7, 0.0]), 1, None),
            Err(Error::RankAmbiguous { .. })
        ));
    }

    #[test]
    fn random_rank_p_fields() {
        let mut rng = seeded_rng(4);
        for _ in 0..50 {
            let w = random_plane(4, 2, &mut rng);
            let f = w.frame() * DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 + i as f64 } else { 0.3 });
            let e = SymForm::new(&f * f.transpose()).unwrap();
            let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
            let r = normalize_constant_rank(&e, 2, Some(&b)).unwrap();
            assert!(r.residual <= 1e-8);
            assert!(r.first_order_residual <= 1e-12);
        }
    }
}
