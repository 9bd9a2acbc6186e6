//! Ground-state collection by fixed-point iteration, and ground-state correlations.

use crate::cluster::{amps_norm, cluster_energies, exp_apply, Collection, Truncation, PRUNE};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE};
use crate::local::{conjugated_action, ClusterIndex};
use crate::model::{LocalOp, System};

/// The ground-state collection that defines the frame `Omega~ = exp(sum v^) Omega_0`.
#[derive(Clone, Debug)]
pub struct GroundFrame {
    pub gs: Collection,
    pub energy: f64,
    /// Smallest eps with `weighted_norm(gs, eps, h0) <= 1`, if any eps < 1 works.
    pub eps: Option<f64>,
    pub truncation: Truncation,
}

impl GroundFrame {
    /// The unperturbed frame (empty collection).
    pub fn free(truncation: Truncation) -> Self {
        GroundFrame { gs: Collection::new(), energy: 0.0, eps: None, truncation }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateOptions {
    pub truncation: Truncation,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// The eps at which the weighted bound is checked.
    pub eps: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { truncation: Truncation::default(), tol: 1e-12, max_iter: 200, damping: 1.0, eps: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateSolution {
    pub frame: GroundFrame,
    pub iterations: usize,
    /// Triple norm of each update.
    pub update_norms: Vec<f64>,
    /// Ratios of consecutive update norms (empirical contraction factors).
    pub ratios: Vec<f64>,
    pub final_damping: f64,
    /// `weighted_norm(gs, options.eps, h0 = on)`.
    pub weighted_at_eps: f64,
}

impl GroundStateSolution {
    pub fn energy(&self) -> f64 {
        self.frame.energy
    }

    pub fn contraction(&self) -> f64 {
        let tail: Vec<f64> = self.ratios.iter().rev().take(5).copied().collect();
        if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        }
    }
}

/// The perturbation part of the residual, `P_K exp(-X) Phi exp(X) Omega_0`, and its empty-set part.
fn phi_residual(coll: &Collection, sys: &System, trunc: &Truncation) -> (Collection, f64) {
    let index = ClusterIndex::new(coll, sys.n_sites());
    let mut res = Collection::new();
    let mut energy = C64::from(0.0);
    for term in sys.terms() {
        let out = conjugated_action(&index, term.sites(), trunc.k_max, sys.e(), |psi| psi.apply(term));
        let fv = out.into_frame();
        energy += fv.scalar;
        res.axpy(ONE, &fv.coll);
    }
    res.truncate(trunc, sys.volume());
    (res, energy.re)
}

/// One step `v'_K = v_K - alpha H_{K,0}^{-1} r_K` with `r = exp(-X)(H - E)exp(X)Omega_0`.
pub fn fixed_point_step(coll: &Collection, sys: &System, trunc: &Truncation, alpha: f64) -> (Collection, f64) {
    let (phi_part, energy) = phi_residual(coll, sys, trunc);
    // H_0 contributes exactly H_{K,0} v_K to r_K
    let mut next = coll.clone();
    next.scale(C64::from(1.0 - alpha));
    for (s, a) in phi_part.iter() {
        let en = cluster_energies(s, sys);
        let upd: Vec<C64> = a.iter().zip(&en).map(|(x, h)| -x / h * alpha).collect();
        next.add(s, &upd, ONE);
    }
    next.prune(PRUNE);
    next.truncate(trunc, sys.volume());
    (next, energy)
}

pub fn fixed_point_map(coll: &Collection, sys: &System, trunc: &Truncation) -> (Collection, f64) {
    fixed_point_step(coll, sys, trunc, 1.0)
}

fn difference_norm(a: &Collection, b: &Collection) -> (f64, Collection) {
    let mut diff = a.clone();
    diff.axpy(-ONE, b);
    (diff.triple_norm(), diff)
}

fn real_overlap(a: &Collection, b: &Collection) -> f64 {
    a.iter()
        .filter_map(|(s, x)| b.get(s).map(|y| x.iter().zip(y).map(|(p, q)| (p * q.conj()).re).sum::<f64>()))
        .sum()
}

pub fn solve_ground_state(sys: &System, opts: &GroundStateOptions) -> Result<GroundStateSolution> {
    if opts.tol <= 0.0 {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let trunc = opts.truncation;
    let mut coll = Collection::new();
    let mut alpha = opts.damping;
    let mut norms: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut prev_diff: Option<Collection> = None;
    let mut growth = 0;
    for it in 1..=opts.max_iter {
        let (next, _) = fixed_point_step(&coll, sys, &trunc, alpha);
        let (dn, diff) = difference_norm(&next, &coll);
        if let Some(&last) = norms.last() {
            let ratio = if last > 0.0 { dn / last } else { 0.0 };
            ratios.push(ratio);
            if dn > last {
                growth += 1;
                if growth >= 2 {
                    return Err(Error::NonContraction { previous: last, current: dn });
                }
            } else {
                growth = 0;
            }
        }
        if let Some(prev) = &prev_diff {
            if real_overlap(&diff, prev) < 0.0 && dn > 0.5 * norms.last().copied().unwrap_or(0.0) {
                alpha *= 0.5;
            }
        }
        norms.push(dn);
        coll = next;
        prev_diff = Some(diff);
        if dn < opts.tol {
            // energy for the final collection
            let (_, e) = phi_residual(&coll, sys, &trunc);
            let eps = fit_eps(&coll, sys);
            let weighted_at_eps = coll.weighted_norm(opts.eps, true, sys);
            return Ok(GroundStateSolution {
                frame: GroundFrame { gs: coll, energy: e, eps, truncation: trunc },
                iterations: it,
                update_norms: norms,
                ratios,
                final_damping: alpha,
                weighted_at_eps,
            });
        }
    }
    Err(Error::MaxIterations { iterations: opts.max_iter, residual: norms.last().copied().unwrap_or(f64::NAN) })
}

/// Smallest eps in (0, 1) with `weighted_norm(coll, eps, h0 = on) <= 1` (the norm decreases in eps).
pub fn fit_eps(coll: &Collection, sys: &System) -> Option<f64> {
    if coll.is_empty() {
        return Some(0.0);
    }
    let f = |eps: f64| coll.weighted_norm(eps, true, sys);
    let hi_eps = 1.0 - 1e-12;
    if f(hi_eps) > 1.0 {
        return None;
    }
    let (mut lo, mut hi) = (1e-9f64, hi_eps);
    if f(lo) <= 1.0 {
        return Some(lo);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Normalized ground-state vector in the canonical frame.
pub fn ground_vector(frame: &GroundFrame, sys: &System) -> Result<Vec<C64>> {
    let space = sys.space()?;
    let mut v = exp_apply(&frame.gs, &space)?;
    let n = linalg::norm(&v);
    linalg::scale(C64::from(1.0 / n), &mut v);
    Ok(v)
}

/// Connected correlation `omega(A1 A2) - omega(A1) omega(A2)` in the normalized ground state.
pub fn correlation(frame: &GroundFrame, a1: &LocalOp, a2: &LocalOp, sys: &System) -> Result<C64> {
    let space = sys.space()?;
    let v = ground_vector(frame, sys)?;
    connected_correlation(&v, a1, a2, &space)
}

pub fn connected_correlation(v: &[C64], a1: &LocalOp, a2: &LocalOp, space: &crate::space::StateSpace) -> Result<C64> {
    let a2v = space.apply_local(a2, v);
    let a1a2v = space.apply_local(a1, &a2v);
    let a1v = space.apply_local(a1, v);
    let e12 = linalg::inner(&a1a2v, v);
    let e1 = linalg::inner(&a1v, v);
    let e2 = linalg::inner(&a2v, v);
    Ok(e12 - e1 * e2)
}

#[derive(Clone, Debug)]
pub struct DecayScan {
    pub rows: Vec<(u32, C64)>,
    /// Fit of `ln |c(r)|` against `r`.
    pub slope: f64,
    pub r2: f64,
}

/// Correlations of one-site observables `a` at `anchor` and `b` at `anchor + r` along axis 0.
pub fn decay_scan(
    frame: &GroundFrame,
    sys: &System,
    a: &nalgebra::DMatrix<C64>,
    b: &nalgebra::DMatrix<C64>,
    anchor: usize,
    separations: &[u32],
) -> Result<DecayScan> {
    let space = sys.space()?;
    let v = ground_vector(frame, sys)?;
    let op_a = sys.local_op(vec![anchor], a)?;
    let mut rows = Vec::new();
    for &r in separations {
        let mut off = vec![0i64; sys.volume().nu()];
        off[0] = r as i64;
        let site = sys
            .volume()
            .shift(anchor, &off)
            .ok_or_else(|| Error::OutsideVolume(vec![anchor + r as usize]))?;
        let op_b = sys.local_op(vec![site], b)?;
        rows.push((r, connected_correlation(&v, &op_a, &op_b, &space)?));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|&(r, c)| (r as f64, c.norm().ln()))
        .collect();
    let (slope, _, r2) = linalg::linear_fit(&pts);
    Ok(DecayScan { rows, slope, r2 })
}

pub fn residual_norm(frame: &GroundFrame, sys: &System) -> Result<f64> {
    let space = sys.space()?;
    let v = exp_apply(&frame.gs, &space)?;
    let h = sys.hamiltonian()?;
    let mut hv = h.matvec(&v);
    linalg::axpy(C64::from(-frame.energy), &v, &mut hv);
    Ok(linalg::norm(&hv) / linalg::norm(&v))
}

/// Largest amplitude in the collection (for diagnostics).
pub fn max_amplitude(coll: &Collection) -> f64 {
    coll.iter().map(|(_, a)| amps_norm(a)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::support_of;
    use crate::lattice::{Boundary, Volume};
    use crate::model::Model;

    fn tfi(lambda: f64, n: usize) -> System {
        System::new(&Model::tfi(lambda).unwrap(), &Volume::chain(n, Boundary::Open).unwrap()).unwrap()
    }

    #[test]
    fn free_model_is_a_fixed_point() {
        let sys = tfi(0.0, 6);
        let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.energy(), 0.0);
        assert!(sol.frame.gs.is_empty());
    }

    #[test]
    fn first_step_is_first_order_perturbation_theory() {
        let sys = tfi(0.1, 4);
        let (next, e) = fixed_point_map(&Collection::new(), &sys, &Truncation::default());
        assert_eq!(e, 0.0);
        assert_eq!(next.len(), 3);
        for x in 0..3 {
            let a = next.get(&support_of(&[x, x + 1])).unwrap();
            assert!((a[0] - C64::from(0.05)).norm() < 1e-15);
        }
    }

    #[test]
    fn energy_tracks_second_order_estimate() {
        let sys = tfi(0.05, 8);
        let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
        let second = -7.0 * 0.05f64.powi(2) / 2.0;
        assert!((sol.energy() - second).abs() < 0.1 * second.abs());
        assert!(residual_norm(&sol.frame, &sys).unwrap() < 1e-4);
    }

    #[test]
    fn trivial_correlations_vanish() {
        let sys = tfi(0.0, 4);
        let frame = GroundFrame::free(Truncation::default());
        let sx = nalgebra::DMatrix::from_row_slice(2, 2, &[C64::from(0.0), ONE, ONE, C64::from(0.0)]);
        let a = sys.local_op(vec![0], &sx).unwrap();
        let b = sys.local_op(vec![2], &sx).unwrap();
        assert_eq!(correlation(&frame, &a, &b, &sys).unwrap(), C64::from(0.0));
        let id = nalgebra::DMatrix::identity(2, 2);
        let sys = tfi(0.1, 4);
        let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
        let i0 = sys.local_op(vec![0], &id).unwrap();
        let i1 = sys.local_op(vec![1], &id).unwrap();
        assert!(correlation(&sol.frame, &i0, &i1, &sys).unwrap().norm() < 1e-14);
    }
}
