use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{build_stencil, force_dual, GridFunction, Lattice, SolveOptions, StencilFamily};
use crate::error::{Error, Result};
use crate::grassmann::{FiberRule, GrassmannSet};
use crate::symcore::seeded_rng;

/// First interior point where min-trace < −tol/h², if any.
pub(crate) fn psh_violation(u: &[f64], s: &StencilFamily, tol: f64) -> Option<(usize, f64)> {
    let lat = s.lattice();
    let h2 = lat.h() * lat.h();
    let bound = -tol / h2;
    lat.interior_indices().into_iter().find_map(|idx| {
        let m = s
            .frame_ids(idx)
            .iter()
            .map(|&f| s.frames()[f as usize].trace(u, idx, h2))
            .fold(f64::INFINITY, f64::min);
        (m < bound).then_some((idx, m))
    })
}

fn dual_violation(u: &[f64], s: &StencilFamily, tol: f64) -> Option<(usize, f64)> {
    let lat = s.lattice();
    let h2 = lat.h() * lat.h();
    let bound = -tol / h2;
    lat.interior_indices().into_iter().find_map(|idx| {
        let m = s
            .frame_ids(idx)
            .iter()
            .map(|&f| s.frames()[f as usize].trace(u, idx, h2))
            .fold(f64::NEG_INFINITY, f64::max);
        (m < bound).then_some((idx, m))
    })
}

/// A random smooth G-psh function for every G: ½xᵀAx with A ⪰ 0 plus a max of affine pieces.
pub fn random_psh<R: Rng>(lattice: &Arc<Lattice>, rng: &mut R) -> GridFunction {
    let n = lattice.dim();
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| 0.7 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let pieces: Vec<(Vec<f64>, f64)> = (0..3)
        .map(|_| {
            (
                (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
                0.3 * rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect();
    let c: f64 = rng.random_range(-1.0..1.0);
    GridFunction::from_fn(lattice, |x| {
        let q: f64 = b
            .iter()
            .map(|row| row.iter().zip(x).map(|(r, xi)| r * xi).sum::<f64>().powi(2))
            .sum();
        let aff = pieces
            .iter()
            .map(|(s, o)| s.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + o)
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * q + aff + c
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPrincipleReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest interior max minus boundary max.
    pub worst_gap: f64,
}

pub fn max_principle_check(s: &StencilFamily, trials: usize, seed: u64) -> Result<MaxPrincipleReport> {
    let lat = s.lattice().clone();
    let mut rng = seeded_rng(seed);
    let opts = SolveOptions {
        tol: 1e-13,
        max_sweeps: 1_000_000,
        ..Default::default()
    };
    let mut report = MaxPrincipleReport {
        trials,
        violations: 0,
        worst_gap: f64::NEG_INFINITY,
    };
    for _ in 0..trials {
        let raw = GridFunction::new(&lat, (0..lat.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let u = force_dual(&raw, s, &opts)?;
        let (imax, bmax) = u.interior_and_boundary_max();
        let gap = imax - bmax;
        report.worst_gap = report.worst_gap.max(gap);
        if gap > 1e-9 {
            report.violations += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub holds: bool,
    /// Whether u + v ≤ 0 on the boundary layer.
    pub hypothesis: bool,
    pub boundary_max: f64,
    pub interior_max: f64,
}

/// Zero maximum principle for u + v with u discrete G-psh and v discrete dually G-psh.
/// `tol` is in value units; memberships are checked at −tol/h².
pub fn comparison_check(u: &GridFunction, v: &GridFunction, s: &StencilFamily, tol: f64) -> Result<ComparisonReport> {
    let lat = s.lattice().clone();
    for w in [u, v] {
        if w.values.len() != lat.len() {
            return Err(Error::Dim {
                expected: lat.len(),
                found: w.values.len(),
            });
        }
    }
    if let Some((idx, m)) = psh_violation(&u.values, s, tol) {
        return Err(Error::PreconditionFailed {
            index: idx,
            point: lat.point(idx),
            reason: format!("u is not discrete G-psh (min-trace {m:.3e})"),
        });
    }
    for idx in lat.interior_indices() {
        if s.frame_ids(idx).is_empty() {
            return Err(Error::PreconditionFailed {
                index: idx,
                point: lat.point(idx),
                reason: "empty fiber: no dually G-psh function exists".into(),
            });
        }
    }
    if let Some((idx, m)) = dual_violation(&v.values, s, tol) {
        return Err(Error::PreconditionFailed {
            index: idx,
            point: lat.point(idx),
            reason: format!("v is not discrete dually G-psh (max-trace {m:.3e})"),
        });
    }
    let w = u.zip_with(v, |a, b| a + b);
    let (interior_max, boundary_max) = w.interior_and_boundary_max();
    let n = *lat.counts().iter().max().unwrap() as f64;
    let slack = 1e-9 + tol * n * n;
    let hypothesis = boundary_max <= slack;
    Ok(ComparisonReport {
        holds: !hypothesis || interior_max <= boundary_max.max(0.0) + slack,
        hypothesis,
        boundary_max,
        interior_max,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    /// (passed, total) for pointwise maxima of random pairs.
    pub pointwise_max: (usize, usize),
    pub decreasing_limit: bool,
    pub uniform_limit: bool,
    pub upper_envelope: bool,
    pub constants: bool,
}

impl ClosureReport {
    pub fn all_pass(&self) -> bool {
        self.pointwise_max.0 == self.pointwise_max.1
            && self.decreasing_limit
            && self.uniform_limit
            && self.upper_envelope
            && self.constants
    }
}

const MEMBER_TOL: f64 = 1e-9;

pub fn closure_properties_check(s: &StencilFamily, pairs: usize, seed: u64) -> Result<ClosureReport> {
    let lat = s.lattice().clone();
    let mut rng = seeded_rng(seed);
    let member = |u: &GridFunction| psh_violation(&u.values, s, MEMBER_TOL).is_none();

    let mut passed = 0;
    for _ in 0..pairs {
        let a = random_psh(&lat, &mut rng);
        let b = random_psh(&lat, &mut rng);
        if member(&a) && member(&b) && member(&a.zip_with(&b, f64::max)) {
            passed += 1;
        }
    }

    let u = random_psh(&lat, &mut rng);
    let q = GridFunction::from_fn(&lat, |x| x.iter().map(|v| v * v).sum());
    let decreasing_limit = (1..=6).all(|k| member(&u.zip_with(&q, |a, b| a + b / k as f64))) && member(&u);

    let phi = random_psh(&lat, &mut rng);
    let uniform_limit = (1..=6).all(|k| member(&u.zip_with(&phi, |a, b| a + b / (k * k) as f64))) && member(&u);

    let family: Vec<GridFunction> = (0..10).map(|_| random_psh(&lat, &mut rng)).collect();
    let env = family
        .iter()
        .skip(1)
        .fold(family[0].clone(), |acc, f| acc.zip_with(f, f64::max));
    let upper_envelope = family.iter().all(member) && member(&env);

    let constants = [-3.0, 0.0, 2.5].iter().all(|&c| member(&GridFunction::constant(&lat, c)));

    Ok(ClosureReport {
        pointwise_max: (passed, pairs),
        decreasing_limit,
        uniform_limit,
        upper_envelope,
        constants,
    })
}

/// The fibered example on ℝ (u'' ≥ 0 required only for x ≥ 0) on a 1-D lattice.
#[derive(Clone, Debug)]
pub struct DecreasingLimitReport {
    pub h: f64,
    pub a: f64,
    pub deltas: Vec<f64>,
    /// Discrete membership of each v_δ(x) = u(x+δ) + δ.
    pub members: Vec<bool>,
    /// v_δ decreases pointwise as δ decreases.
    pub decreasing: bool,
    pub epsilons: Vec<f64>,
    /// Discrete membership of each u_ε = min(u, −ε).
    pub eps_members: Vec<bool>,
    pub increasing: bool,
    /// Discrete membership of the limit u.
    pub limit_member: bool,
    pub failing_point: Option<f64>,
    /// Allowed-direction second difference of u at 0.
    pub second_difference: f64,
}

impl DecreasingLimitReport {
    pub fn reproduces(&self) -> bool {
        self.members.iter().all(|&m| m)
            && self.eps_members.iter().all(|&m| m)
            && self.decreasing
            && self.increasing
            && !self.limit_member
            && self.failing_point.is_some_and(|x| x.abs() < 1e-12)
            && self.second_difference < 0.0
    }
}

pub fn decreasing_limit_check(h: f64, a: f64) -> Result<DecreasingLimitReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("a = {a} must be positive")));
    }
    let lat = Lattice::new(&[-1.0], &[1.0], h, 1)?;
    let s = build_stencil(&GrassmannSet::fiber_field(FiberRule::HalfLineTangent), &lat, 1)?;
    let u = |x: f64| if x >= 0.0 { 0.0 } else { x * (a - x) };
    let member = |g: &GridFunction| psh_violation(&g.values, &s, 1e-12);

    let deltas: Vec<f64> = [16.0, 8.0, 4.0, 2.0, 1.0].iter().map(|m| m * h).collect();
    let vs: Vec<GridFunction> = deltas
        .iter()
        .map(|&d| GridFunction::from_fn(&lat, |x| u(x[0] + d) + d))
        .collect();
    let members = vs.iter().map(|v| member(v).is_none()).collect();
    let limit = GridFunction::from_fn(&lat, |x| u(x[0]));
    let mut chain = vs.clone();
    chain.push(limit.clone());
    let decreasing = chain
        .windows(2)
        .all(|w| w[0].values.iter().zip(&w[1].values).all(|(p, q)| p >= q));

    let base = h * (a + h);
    let epsilons: Vec<f64> = [16.0, 8.0, 4.0, 2.0, 1.0].iter().map(|m| m * base).collect();
    let us: Vec<GridFunction> = epsilons
        .iter()
        .map(|&e| GridFunction::from_fn(&lat, |x| u(x[0]).min(-e)))
        .collect();
    let eps_members = us.iter().map(|v| member(v).is_none()).collect();
    let mut chain = us.clone();
    chain.push(limit.clone());
    let increasing = chain
        .windows(2)
        .all(|w| w[0].values.iter().zip(&w[1].values).all(|(p, q)| p <= q));

    let fail = member(&limit);
    let zero = lat.nearest(&[0.0]).expect("0 is a lattice point");
    let second_difference = (limit.values[zero + 1] + limit.values[zero - 1] - 2.0 * limit.values[zero]) / (h * h);
    Ok(DecreasingLimitReport {
        h,
        a,
        deltas,
        members,
        decreasing,
        epsilons,
        eps_members,
        increasing,
        limit_member: fail.is_none(),
        failing_point: fail.map(|(i, _)| lat.point(i)[0]),
        second_difference,
    })
}

/// Membership helper for callers outside the module.
pub fn is_discrete_psh(u: &GridFunction, s: &StencilFamily, tol: f64) -> bool {
    psh_violation(&u.values, s, tol).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::{solve_dirichlet, Lattice};
    use crate::Plane;

    fn stencil(p: usize, n: usize, h: f64) -> StencilFamily {
        let r = if n == 2 && p < n { 2 } else { 1 };
        let l = Lattice::unit_box(n, h, r).unwrap();
        build_stencil(&GrassmannSet::full(p, n).unwrap(), &l, r).unwrap()
    }

    #[test]
    fn random_psh_is_member() {
        let s = stencil(1, 2, 0.125);
        let mut rng = seeded_rng(1);
        for _ in 0..20 {
            assert!(is_discrete_psh(&random_psh(s.lattice(), &mut rng), &s, 1e-9));
        }
    }

    #[test]
    fn max_principle_small() {
        for (p, n) in [(1, 2), (2, 2), (1, 3)] {
            let s = stencil(p, n, 0.25);
            let r = max_principle_check(&s, 10, 3).unwrap();
            assert_eq!(r.violations, 0, "{p} {n} {r:?}");
        }
        let l = Lattice::unit_box(2, 0.25, 1).unwrap();
        let g = GrassmannSet::finite(vec![Plane::line(&[1.0, 0.0]).unwrap()]).unwrap();
        let s = build_stencil(&g, &l, 1).unwrap();
        assert_eq!(max_principle_check(&s, 10, 3).unwrap().violations, 0);
    }

    #[test]
    fn comparison_pairs() {
        let s = stencil(1, 2, 0.125);
        let l = s.lattice().clone();
        let u = GridFunction::from_fn(&l, |x| x[0] * x[0]);
        let v = u.map(|a| -a);
        let r = comparison_check(&u, &v, &s, 1e-12).unwrap();
        assert!(r.holds && r.hypothesis && r.interior_max == 0.0);

        let g = GridFunction::from_fn(&l, |x| x[0] * x[1] + x[0].abs());
        let sol = solve_dirichlet(&g, &s, &SolveOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let r = comparison_check(&sol.u, &sol.u.map(|a| -a), &s, 1e-10).unwrap();
        assert!(r.holds);

        let bad = GridFunction::from_fn(&l, |x| -x[0] * x[0]);
        match comparison_check(&bad, &v, &s, 1e-12) {
            Err(Error::PreconditionFailed { point, .. }) => assert_eq!(point.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closure_and_decreasing_limit() {
        let s = stencil(1, 2, 0.125);
        let r = closure_properties_check(&s, 20, 5).unwrap();
        assert!(r.all_pass(), "{r:?}");
        let e = decreasing_limit_check(1.0 / 64.0, 1.0).unwrap();
        assert!(e.reproduces(), "{e:?}");
        assert!((e.second_difference + 64.0 * (1.0 + 1.0 / 64.0)).abs() < 1e-9);
    }
}
