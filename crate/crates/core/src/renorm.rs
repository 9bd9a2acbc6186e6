//! The renormalized Hamiltonian `H~ = H~_0 + Phi~` acting on frame vectors, its Neumann
//! resolvent series and the contour spectral projector.
//!
//! Frame vectors carry the coefficient of `Omega~` as a scalar; `H~_0` is zero there and
//! multiplies a cluster vector on `I` by its free energy. `Phi~` sends `u_I` to the frame
//! components of `[Phi, u_I^] Omega~`, built locally term by term.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;
use std::rc::Rc;

use rustc_hash::FxHashMap;

use crate::cluster::{
    amps_norm, cluster_energies, sites_of, translate_amps, Amps, Collection, FrameVector, Support, Truncation, PRUNE,
};
use crate::error::{Error, Result};
use crate::groundstate::GroundFrame;
use crate::lattice::{cluster_metric_rel, Boundary};
use crate::linalg::{C64, ONE, ZERO};
use crate::local::{conjugated_action, ClusterIndex, SparseState};
use crate::model::System;
use crate::oracle;

/// Default constant of the forbidden disks `|z - a| <= c2 lambda a`.
pub const DEFAULT_C2: f64 = 2.5;

pub struct RenormOperator<'a> {
    sys: &'a System,
    frame: &'a GroundFrame,
    index: ClusterIndex,
    trunc: Truncation,
    terms_at: Vec<Vec<usize>>,
    use_translations: bool,
    // canonical support -> one image per multi-index
    cache: RefCell<FxHashMap<Support, Rc<Vec<FrameVector>>>>,
    dropped: Cell<f64>,
}

impl<'a> RenormOperator<'a> {
    pub fn new(sys: &'a System, frame: &'a GroundFrame) -> Self {
        let mut terms_at = vec![Vec::new(); sys.n_sites()];
        for (t, term) in sys.terms().iter().enumerate() {
            for &x in term.sites() {
                terms_at[x].push(t);
            }
        }
        RenormOperator {
            sys,
            frame,
            index: ClusterIndex::new(&frame.gs, sys.n_sites()),
            trunc: frame.truncation,
            terms_at,
            use_translations: sys.volume().boundary() == Boundary::Periodic,
            cache: RefCell::new(FxHashMap::default()),
            dropped: Cell::new(0.0),
        }
    }

    /// Turns the translation cache off (every support is then computed directly).
    pub fn without_translations(mut self) -> Self {
        self.use_translations = false;
        self
    }

    pub fn system(&self) -> &System {
        self.sys
    }

    pub fn frame(&self) -> &GroundFrame {
        self.frame
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    /// Largest triple norm cut by `D_max` from the image of a single unit cluster vector.
    pub fn dropped_weight(&self) -> f64 {
        self.dropped.get()
    }

    /// Whether some F-map image lost more than `fraction` of the input norm to truncation.
    pub fn overflowed(&self, fraction: f64) -> bool {
        self.dropped.get() > fraction
    }

    pub fn cached_columns(&self) -> usize {
        self.cache.borrow().len()
    }

    /// `u_I -> H_{I,0} u_I`; the `Omega~` coefficient goes to zero.
    pub fn diagonal_apply(&self, v: &FrameVector) -> FrameVector {
        let mut out = FrameVector::default();
        for (s, a) in v.coll.iter() {
            let en = cluster_energies(s, self.sys);
            let b: Amps = a.iter().zip(&en).map(|(x, h)| x * h).collect();
            out.coll.add(s, &b, ONE);
        }
        out
    }

    /// Frame components of `[Phi, u_I^] Omega~` for a single cluster vector.
    pub fn f_map(&self, s: &[u32], a: &[C64]) -> FrameVector {
        let (key, offset) = self.canonical(s);
        let cols = self.columns(&key);
        let e = self.sys.e();
        let (local_amps, back): (Amps, Option<Vec<i64>>) = match &offset {
            None => (a.iter().copied().collect(), None),
            Some(g) => {
                let (t, b) = translate_amps(s, a, g, self.sys.volume(), e).expect("periodic shift");
                debug_assert_eq!(&t[..], &key[..]);
                (b, Some(g.iter().map(|x| -x).collect()))
            }
        };
        let mut out = FrameVector::default();
        for (c, col) in local_amps.iter().zip(cols.iter()) {
            if *c != ZERO {
                out.axpy(*c, col);
            }
        }
        if let Some(g) = back {
            out.coll = out.coll.translated(&g, self.sys.volume(), e).expect("periodic shift");
        }
        out
    }

    /// `Phi~ v`, the linear extension of the F-map (the scalar part is annihilated).
    pub fn phi_apply(&self, v: &FrameVector) -> FrameVector {
        let mut out = FrameVector::default();
        for (s, a) in v.coll.iter() {
            if amps_norm(a) < PRUNE {
                continue;
            }
            out.axpy(ONE, &self.f_map(s, a));
        }
        out
    }

    /// `H~ v = H~_0 v + Phi~ v`.
    pub fn apply(&self, v: &FrameVector) -> FrameVector {
        let mut out = self.diagonal_apply(v);
        out.axpy(ONE, &self.phi_apply(v));
        out.coll.prune(PRUNE);
        out
    }

    /// `(H~_0 - z)^{-1}`; the `Omega~` coefficient has free energy 0.
    pub fn free_resolvent(&self, v: &FrameVector, z: C64) -> FrameVector {
        let mut out = FrameVector { scalar: -v.scalar / z, coll: Collection::new() };
        for (s, a) in v.coll.iter() {
            let en = cluster_energies(s, self.sys);
            let b: Amps = a.iter().zip(&en).map(|(x, h)| x / (h - z)).collect();
            out.coll.add(s, &b, ONE);
        }
        out
    }

    fn canonical(&self, s: &[u32]) -> (Support, Option<Vec<i64>>) {
        if !self.use_translations {
            return (s.into(), None);
        }
        let vol = self.sys.volume();
        let e = self.sys.e();
        let mut best: Option<(Support, Vec<i64>)> = None;
        for x in s {
            // candidates move one of the sites to the origin
            let g: Vec<i64> = vol.coords(*x as usize).iter().map(|c| -c).collect();
            let (t, _) = translate_amps(s, &[], &g, vol, e).expect("periodic shift");
            if best.as_ref().is_none_or(|(b, _)| t < *b) {
                best = Some((t, g));
            }
        }
        let (t, g) = best.expect("nonempty support");
        if g.iter().all(|&c| c == 0) {
            (t, None)
        } else {
            (t, Some(g))
        }
    }

    fn columns(&self, key: &Support) -> Rc<Vec<FrameVector>> {
        if let Some(c) = self.cache.borrow().get(key) {
            return c.clone();
        }
        let e = self.sys.e();
        let n = e.pow(key.len() as u32);
        let mut cols = Vec::with_capacity(n);
        for m in 0..n {
            let mut unit: Amps = smallvec::SmallVec::from_elem(ZERO, n);
            unit[m] = ONE;
            cols.push(self.compute_image(key, &unit));
        }
        let cols = Rc::new(cols);
        self.cache.borrow_mut().insert(key.clone(), cols.clone());
        cols
    }

    fn compute_image(&self, s: &[u32], a: &[C64]) -> FrameVector {
        let e = self.sys.e();
        let sites = sites_of(&s.into());
        let mut terms: Vec<usize> = sites.iter().flat_map(|&x| self.terms_at[x].iter().copied()).collect();
        terms.sort_unstable();
        terms.dedup();
        let mut total = SparseState::empty(e);
        for t in terms {
            let term = &self.sys.terms()[t];
            let mut r: Vec<usize> = term.sites().iter().chain(&sites).copied().collect();
            r.sort_unstable();
            r.dedup();
            let out = conjugated_action(&self.index, &r, self.trunc.k_max, e, |psi| {
                let mut comm = psi.created(s, a).apply(term);
                comm.axpy(-ONE, &psi.apply(term).created(s, a));
                comm
            });
            total.axpy(ONE, &out);
        }
        let mut fv = total.into_frame();
        let lost = fv.coll.truncate(&self.trunc, self.sys.volume());
        self.dropped.set(self.dropped.get().max(lost));
        fv
    }

    /// `sum_J |(F u_I)_J| eps^{-(d_{J;I}+1)} / (lambda |I| |u_I|)`, the constant in the
    /// relative bound for the F-map.
    pub fn relative_bound_constant(&self, s: &[u32], a: &[C64], eps: f64) -> f64 {
        let img = self.f_map(s, a);
        let i_sites = sites_of(&s.into());
        let vol = self.sys.volume();
        let mut sum = img.scalar.norm() / eps;
        for (j, b) in img.coll.iter() {
            let d = cluster_metric_rel(&sites_of(j), &i_sites, vol);
            sum += amps_norm(b) * eps.powi(-(d as i32 + 1));
        }
        let denom = self.sys.lambda() * s.len() as f64 * amps_norm(a);
        if denom == 0.0 {
            0.0
        } else {
            sum / denom
        }
    }
}

/// Energies of `H_{Lambda,0}` up to `upper` (sums of excited levels over at most `n` sites).
pub fn free_levels(sys: &System, upper: f64) -> Vec<f64> {
    let mut exc: Vec<f64> = sys.levels()[1..].to_vec();
    exc.sort_by(f64::total_cmp);
    exc.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut out = vec![0.0];
    let mut frontier = vec![(0.0f64, 0usize, 0usize)];
    while let Some((sum, count, from)) = frontier.pop() {
        if count == sys.n_sites() {
            continue;
        }
        for (k, &l) in exc.iter().enumerate().skip(from) {
            let next = sum + l;
            if next > upper + 1e-12 {
                break;
            }
            out.push(next);
            frontier.push((next, count + 1, k));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// Checks `z` against every forbidden disk `|z - a| <= c2 lambda a`.
pub fn check_admissible(z: C64, sys: &System, c2: f64) -> Result<()> {
    let lam = sys.lambda();
    let frac = c2 * lam;
    if frac >= 1.0 {
        return Err(Error::Contour(format!("c2 * lambda = {frac} leaves no admissible region")));
    }
    let upper = z.norm() / (1.0 - frac) + 1e-9;
    for a in free_levels(sys, upper) {
        let radius = frac * a;
        if (z - a).norm() <= radius.max(1e-12) {
            return Err(Error::InadmissibleZ { z, level: a, radius });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct ResolventOptions {
    pub k_max: usize,
    pub tol: f64,
    pub c2: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions { k_max: 20, tol: 1e-12, c2: DEFAULT_C2 }
    }
}

#[derive(Clone, Debug)]
pub struct ResolventOutput {
    pub value: FrameVector,
    /// Triple norm of every term of the series, in order.
    pub term_norms: Vec<f64>,
}

impl ResolventOutput {
    /// Norm of the last term kept, the truncation indicator of the series.
    pub fn indicator(&self) -> f64 {
        self.term_norms.last().copied().unwrap_or(0.0)
    }

    /// Geometric-mean ratio of consecutive term norms.
    pub fn ratio(&self) -> f64 {
        let n = self.term_norms.len();
        if n < 2 || self.term_norms[0] == 0.0 {
            return 0.0;
        }
        (self.term_norms[n - 1] / self.term_norms[0]).powf(1.0 / (n - 1) as f64)
    }
}

/// `(H~ - z)^{-1} v` as `sum_k (-1)^k R0 (Phi~ R0)^k v` with `R0 = (H~_0 - z)^{-1}`.
pub fn resolvent_apply(
    op: &RenormOperator,
    v: &FrameVector,
    z: C64,
    opts: &ResolventOptions,
) -> Result<ResolventOutput> {
    check_admissible(z, op.system(), opts.c2)?;
    let mut term = op.free_resolvent(v, z);
    let mut value = term.clone();
    let mut norms = vec![term.triple_norm()];
    let mut rising = 0;
    for _ in 0..opts.k_max {
        if norms.last().copied().unwrap_or(0.0) < opts.tol {
            break;
        }
        let mut next = op.free_resolvent(&op.phi_apply(&term), z);
        next.scale(-ONE);
        next.coll.prune(PRUNE);
        let nrm = next.triple_norm();
        if nrm >= *norms.last().unwrap() {
            rising += 1;
        } else {
            rising = 0;
        }
        norms.push(nrm);
        if rising >= 3 {
            return Err(Error::SeriesDivergence(norms));
        }
        value.axpy(ONE, &next);
        term = next;
    }
    Ok(ResolventOutput { value, term_norms: norms })
}

/// Circle `center + radius e^{i theta}` discretized by `nodes` equispaced points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contour {
    pub center: f64,
    pub radius: f64,
    pub nodes: usize,
}

impl Contour {
    /// Circle around `mu` with radius `0.4` times the distance to the nearest other free level.
    pub fn around_mu(sys: &System) -> Self {
        let mu = sys.mu();
        let gap = free_levels(sys, 3.0 * mu + 1.0)
            .into_iter()
            .map(|a| (a - mu).abs())
            .filter(|&d| d > 1e-9)
            .fold(f64::INFINITY, f64::min);
        Contour { center: mu, radius: 0.4 * gap, nodes: 32 }
    }

    pub fn node(&self, j: usize) -> C64 {
        self.center + self.radius * C64::from_polar(1.0, 2.0 * PI * j as f64 / self.nodes as f64)
    }

    /// The circle must lie strictly between the disk at `center` and every other disk.
    pub fn check(&self, sys: &System, c2: f64) -> Result<()> {
        if self.nodes < 2 || self.radius <= 0.0 {
            return Err(Error::Contour("need at least two nodes and a positive radius".into()));
        }
        let frac = c2 * sys.lambda();
        if frac >= 1.0 {
            return Err(Error::Contour(format!("c2 * lambda = {frac} leaves no admissible region")));
        }
        let upper = (self.center + self.radius) / (1.0 - frac) + 1e-9;
        for a in free_levels(sys, upper) {
            let radius = frac * a;
            let dist = (a - self.center).abs();
            let ok = if dist < 1e-12 { radius < self.radius } else { dist - radius > self.radius };
            if !ok {
                return Err(Error::Contour(format!(
                    "circle |z - {}| = {} meets the disk |z - {a}| <= {radius:.4}",
                    self.center, self.radius
                )));
            }
        }
        Ok(())
    }
}

/// `P v = -(2 pi i)^{-1} oint (H~ - z)^{-1} v dz` by the trapezoidal rule.
pub fn spectral_projector_apply(
    op: &RenormOperator,
    v: &FrameVector,
    contour: &Contour,
    opts: &ResolventOptions,
) -> Result<FrameVector> {
    contour.check(op.system(), opts.c2)?;
    let mut out = FrameVector::default();
    for j in 0..contour.nodes {
        let z = contour.node(j);
        let r = resolvent_apply(op, v, z, opts)?;
        let w = -(z - contour.center) / contour.nodes as f64;
        out.axpy(w, &r.value);
    }
    out.coll.prune(PRUNE);
    Ok(out)
}

/// Exact spectrum of `H - E` compared with the free levels.
#[derive(Clone, Debug)]
pub struct SpectrumCheck {
    pub lambda: f64,
    pub eigenvalues: Vec<f64>,
    /// For each eigenvalue, the nearest free level and the smallest c2 that covers it.
    pub nearest: Vec<(f64, f64)>,
    pub required_c2: f64,
    pub gap: f64,
}

impl SpectrumCheck {
    pub fn passes(&self, c2: f64) -> bool {
        self.required_c2 <= c2
    }
}

pub fn spectrum_check(sys: &System) -> Result<SpectrumCheck> {
    let evals = oracle::full_spectrum(sys)?;
    let e0 = evals[0];
    let shifted: Vec<f64> = evals.iter().map(|x| x - e0).collect();
    let top = shifted.last().copied().unwrap_or(0.0);
    let levels = free_levels(sys, 2.0 * top + 1.0);
    let lam = sys.lambda();
    let mut nearest = Vec::with_capacity(shifted.len());
    let mut required: f64 = 0.0;
    for &ev in &shifted {
        let mut best = (f64::NAN, f64::INFINITY);
        for &a in &levels {
            let c = if a == 0.0 {
                if ev.abs() < 1e-9 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else if lam == 0.0 {
                if (ev - a).abs() < 1e-9 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (ev - a).abs() / (lam * a)
            };
            if c < best.1 {
                best = (a, c);
            }
        }
        required = required.max(best.1);
        nearest.push(best);
    }
    let gap = shifted.get(1).copied().unwrap_or(f64::INFINITY);
    Ok(SpectrumCheck { lambda: lam, eigenvalues: shifted, nearest, required_c2: required, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{frame_components, reconstruct, support_of, ClusterVector};
    use crate::groundstate::{solve_ground_state, GroundStateOptions};
    use crate::lattice::Volume;
    use crate::model::Model;

    fn chain(n: usize, b: Boundary, lam: f64) -> System {
        System::new(&Model::tfi(lam).unwrap(), &Volume::chain(n, b).unwrap()).unwrap()
    }

    fn w_at(x: usize) -> FrameVector {
        FrameVector::single(&ClusterVector::unit(x, 1, 1))
    }

    #[test]
    fn free_case_is_diagonal() {
        let sys = chain(6, Boundary::Open, 0.0);
        let frame = GroundFrame::free(Truncation::default());
        let op = RenormOperator::new(&sys, &frame);
        let v = w_at(2);
        assert_eq!(op.apply(&v), v);
        let pair = FrameVector::single(&ClusterVector::new(&[1, 2], &[ONE], 1).unwrap());
        let out = op.diagonal_apply(&pair);
        assert!((out.coll.get(&support_of(&[1, 2])).unwrap()[0] - 2.0).norm() < 1e-14);
        let r = resolvent_apply(&op, &v, C64::from(0.5), &ResolventOptions::default()).unwrap();
        assert!((r.value.coll.get(&support_of(&[2])).unwrap()[0] - 2.0).norm() < 1e-14);
        let c = Contour::around_mu(&sys);
        assert!((c.radius - 0.4).abs() < 1e-12);
        let p = spectral_projector_apply(&op, &v, &c, &ResolventOptions::default()).unwrap();
        assert!((p.coll.get(&support_of(&[2])).unwrap()[0] - 1.0).norm() < 1e-12);
        let p2 = spectral_projector_apply(&op, &pair, &c, &ResolventOptions::default()).unwrap();
        assert!(p2.triple_norm() < 1e-12);
    }

    #[test]
    fn inadmissible_points_are_rejected() {
        let sys = chain(4, Boundary::Open, 0.1);
        assert!(check_admissible(C64::from(1.1), &sys, 2.5).is_err());
        assert!(check_admissible(C64::from(0.0), &sys, 2.5).is_err());
        assert!(check_admissible(C64::from(0.5), &sys, 2.5).is_ok());
        assert!(Contour { center: 1.0, radius: 0.2, nodes: 8 }.check(&sys, 2.5).is_err());
    }

    // frame components of (H - E) applied to the reconstructed vector, against H~
    #[test]
    fn matches_full_space_conjugation() {
        let sys = chain(5, Boundary::Open, 0.1);
        let trunc = Truncation::unbounded();
        let sol = solve_ground_state(&sys, &GroundStateOptions { truncation: trunc, ..Default::default() }).unwrap();
        let op = RenormOperator::new(&sys, &sol.frame);
        let space = sys.space().unwrap();
        let h = sys.hamiltonian().unwrap().shifted(-sol.energy());
        for s in [vec![2usize], vec![0], vec![1, 3], vec![0, 1, 2]] {
            let v = FrameVector::single(&ClusterVector::new(&s, &[C64::new(0.7, 0.2)], 1).unwrap());
            let full = reconstruct(&v, &sol.frame.gs, &space).unwrap();
            let want = frame_components(&h.matvec(&full), &sol.frame.gs, &space).unwrap();
            let mut diff = op.apply(&v);
            diff.axpy(-ONE, &want);
            assert!(diff.triple_norm() < 1e-8, "{s:?}: {}", diff.triple_norm());
        }
    }

    #[test]
    fn translation_cache_agrees_with_direct() {
        let sys = chain(8, Boundary::Periodic, 0.1);
        let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
        let cached = RenormOperator::new(&sys, &sol.frame);
        let direct = RenormOperator::new(&sys, &sol.frame).without_translations();
        for s in [vec![5usize], vec![0, 7], vec![3, 4, 6]] {
            let u = ClusterVector::new(&s, &[ONE], 1).unwrap();
            let mut d = cached.f_map(u.support(), u.amps());
            d.axpy(-ONE, &direct.f_map(u.support(), u.amps()));
            assert!(d.triple_norm() < 1e-12);
        }
        assert!(cached.cached_columns() <= 3);
    }

    #[test]
    fn resolvent_identity() {
        let sys = chain(6, Boundary::Open, 0.1);
        let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
        let op = RenormOperator::new(&sys, &sol.frame);
        let z = C64::new(0.5, 0.1);
        let u = w_at(3);
        let r = resolvent_apply(&op, &u, z, &ResolventOptions { k_max: 40, ..Default::default() }).unwrap();
        let mut back = op.apply(&r.value);
        back.axpy(-z, &r.value);
        back.axpy(-ONE, &u);
        assert!(back.triple_norm() < 1e-8 + 10.0 * r.indicator(), "{}", back.triple_norm());
    }

    #[test]
    fn tfi_spectrum_is_localized() {
        let sys = chain(6, Boundary::Open, 0.1);
        let sc = spectrum_check(&sys).unwrap();
        assert!(sc.required_c2 < DEFAULT_C2, "{}", sc.required_c2);
        assert!(sc.gap > 1.0 - 3.0 * 0.1);
    }
}
