//! Sparse component representation used for local commutator expansions.
//!
//! A state is stored through its components on `H'_S (x) Omega_rest`, keyed by `S`; the empty
//! support holds the vacuum coefficient. Only a handful of sites are ever involved, so this
//! avoids full-space vectors entirely.

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::cluster::{amps_norm, is_disjoint, merge_tensor, Amps, Collection, FrameVector, Support, PRUNE};
use crate::linalg::{C64, ONE, ZERO};
use crate::model::LocalOp;

#[derive(Clone, Debug)]
pub struct SparseState {
    map: FxHashMap<Support, Amps>,
    e: usize,
}

impl SparseState {
    pub fn vacuum(e: usize) -> Self {
        let mut map = FxHashMap::default();
        map.insert(Support::new(), SmallVec::from_elem(ONE, 1));
        SparseState { map, e }
    }

    pub fn empty(e: usize) -> Self {
        SparseState { map: FxHashMap::default(), e }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Support, &Amps)> {
        self.map.iter()
    }

    pub fn add(&mut self, s: &[u32], amps: &[C64], c: C64) {
        match self.map.get_mut(s) {
            Some(cur) => {
                for (x, y) in cur.iter_mut().zip(amps) {
                    *x += c * y;
                }
            }
            None => {
                self.map.insert(s.into(), amps.iter().map(|y| c * y).collect());
            }
        }
    }

    /// `self += c u_K^ self`, keeping only new components accepted by `keep`.
    pub fn create(&mut self, k: &[u32], amps: &[C64], c: C64, keep: impl Fn(&[u32]) -> bool) {
        let mut fresh: Vec<(Support, Amps)> = Vec::new();
        for (s, a) in &self.map {
            if !is_disjoint(s, k) {
                continue;
            }
            let mut target: Support = Support::with_capacity(s.len() + k.len());
            target.extend_from_slice(s);
            target.extend_from_slice(k);
            target.sort_unstable();
            if !keep(&target) {
                continue;
            }
            let (t, prod) = merge_tensor(s, a, k, amps, self.e);
            fresh.push((t, prod));
        }
        for (t, prod) in fresh {
            self.add(&t, &prod, c);
        }
    }

    /// `u_K^ self` as a new state.
    pub fn created(&self, k: &[u32], amps: &[C64]) -> SparseState {
        let mut out = SparseState::empty(self.e);
        for (s, a) in &self.map {
            if is_disjoint(s, k) {
                let (t, prod) = merge_tensor(s, a, k, amps, self.e);
                out.add(&t, &prod, ONE);
            }
        }
        out
    }

    pub fn axpy(&mut self, c: C64, other: &SparseState) {
        for (s, a) in &other.map {
            self.add(s, a, c);
        }
    }

    pub fn retain(&mut self, f: impl Fn(&[u32]) -> bool) {
        self.map.retain(|s, _| f(s));
    }

    /// `op` applied to the state; components are re-split by which sites end up excited.
    pub fn apply(&self, op: &LocalOp) -> SparseState {
        let e = self.e;
        let d = e + 1;
        let r = op.sites();
        let kr = r.len();
        let mut out = SparseState::empty(e);
        let mut digits: SmallVec<[usize; 12]> = SmallVec::new();
        for (s, a) in &self.map {
            let k = s.len();
            // positions of S inside R (or None)
            let in_r: SmallVec<[Option<usize>; 12]> =
                s.iter().map(|&x| r.iter().position(|&y| y == x as usize)).collect();
            let rest: Support = s
                .iter()
                .zip(&in_r)
                .filter(|(_, p)| p.is_none())
                .map(|(&x, _)| x)
                .collect();
            for (idx, &amp) in a.iter().enumerate() {
                if amp == ZERO {
                    continue;
                }
                digits.clear();
                let mut t = idx;
                for _ in 0..k {
                    digits.push(t % e + 1);
                    t /= e;
                }
                digits.reverse();
                let mut c = 0;
                let mut rest_digits: SmallVec<[usize; 12]> = SmallVec::new();
                let mut local = [0usize; 16];
                for (p, pos) in in_r.iter().enumerate() {
                    match pos {
                        Some(q) => local[*q] = digits[p],
                        None => rest_digits.push(digits[p]),
                    }
                }
                for &g in local.iter().take(kr) {
                    c = c * d + g;
                }
                for &(row, v) in op.column(c) {
                    let mut rd = [0usize; 16];
                    let mut q = row;
                    for slot in (0..kr).rev() {
                        rd[slot] = q % d;
                        q /= d;
                    }
                    // merge rest (sorted) with excited sites of R (sorted)
                    let mut sup: Support = Support::new();
                    let mut new_idx = 0usize;
                    let (mut i, mut j) = (0, 0);
                    loop {
                        while j < kr && rd[j] == 0 {
                            j += 1;
                        }
                        let take_rest = match (i < rest.len(), j < kr) {
                            (false, false) => break,
                            (true, false) => true,
                            (false, true) => false,
                            (true, true) => (rest[i] as usize) < r[j],
                        };
                        if take_rest {
                            sup.push(rest[i]);
                            new_idx = new_idx * e + rest_digits[i] - 1;
                            i += 1;
                        } else {
                            sup.push(r[j] as u32);
                            new_idx = new_idx * e + rd[j] - 1;
                            j += 1;
                        }
                    }
                    let val = v * amp;
                    let len = e.pow(sup.len() as u32);
                    let entry = out
                        .map
                        .entry(sup)
                        .or_insert_with(|| SmallVec::from_elem(ZERO, len));
                    entry[new_idx] += val;
                }
            }
        }
        out
    }

    pub fn scalar(&self) -> C64 {
        self.map.get(&Support::new()[..]).map(|a| a[0]).unwrap_or(ZERO)
    }

    pub fn into_frame(self) -> FrameVector {
        let mut fv = FrameVector::default();
        let mut entries: Vec<(Support, Amps)> = self.map.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (s, a) in entries {
            if s.is_empty() {
                fv.scalar += a[0];
            } else if amps_norm(&a) >= PRUNE {
                fv.coll.add(&s, &a, ONE);
            }
        }
        fv
    }

    pub fn from_collection(coll: &Collection, e: usize) -> Self {
        let mut st = SparseState::empty(e);
        for (s, a) in coll.iter() {
            st.add(s, a, ONE);
        }
        st
    }
}

/// Clusters of a collection indexed by the sites they touch.
pub struct ClusterIndex {
    clusters: Vec<(Support, Amps)>,
    by_site: Vec<Vec<usize>>,
}

impl ClusterIndex {
    pub fn new(coll: &Collection, n_sites: usize) -> Self {
        let clusters: Vec<(Support, Amps)> = coll.iter().map(|(s, a)| (s.clone(), a.clone())).collect();
        let mut by_site = vec![Vec::new(); n_sites];
        for (k, (s, _)) in clusters.iter().enumerate() {
            for &x in s {
                by_site[x as usize].push(k);
            }
        }
        ClusterIndex { clusters, by_site }
    }

    /// Clusters intersecting `sites`, in a fixed order.
    pub fn touching(&self, sites: &[usize]) -> Vec<&(Support, Amps)> {
        let mut ks: Vec<usize> = sites.iter().flat_map(|&x| self.by_site[x].iter().copied()).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.into_iter().map(|k| &self.clusters[k]).collect()
    }
}

fn outside_count(s: &[u32], r: &[usize]) -> usize {
    s.iter().filter(|&&x| !r.contains(&(x as usize))).count()
}

/// `exp(-X_R) A exp(X_R) Omega_0` for an operator `A` that acts only on the sites `r`,
/// where `X_R` collects the frame clusters touching `r`. Components with more than `k_max`
/// sites are never needed downstream and are dropped as early as it is exact to do so.
pub fn conjugated_action(
    index: &ClusterIndex,
    r: &[usize],
    k_max: usize,
    e: usize,
    act: impl Fn(&SparseState) -> SparseState,
) -> SparseState {
    let clusters = index.touching(r);
    let mut psi = SparseState::vacuum(e);
    for (k, a) in &clusters {
        psi.create(k, a, ONE, |s| outside_count(s, r) <= k_max);
    }
    let mut out = act(&psi);
    out.retain(|s| s.len() <= k_max);
    for (k, a) in &clusters {
        out.create(k, a, -ONE, |s| s.len() <= k_max);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{embed, support_of};
    use crate::space::StateSpace;
    use nalgebra::DMatrix;

    #[test]
    fn apply_matches_full_space() {
        let d = 3;
        let e = 2;
        let space = StateSpace::new(d, 5).unwrap();
        let m = DMatrix::from_fn(9, 9, |r, c| C64::new(((r * 3 + c * 7) % 5) as f64 - 2.0, (r as f64) * 0.1));
        let op = LocalOp::new(vec![3, 1], m, d).unwrap();
        let mut st = SparseState::vacuum(e);
        st.add(&support_of(&[1]), &[C64::new(0.5, 0.0), C64::new(0.0, 0.2)], ONE);
        st.add(&support_of(&[0, 3]), &[C64::new(0.1, 0.0), C64::new(0.2, 0.0), C64::new(0.3, 0.0), C64::new(0.4, 0.1)], ONE);
        st.add(&support_of(&[2, 4]), &[ONE, ONE, ONE, C64::new(0.0, 1.0)], ONE);
        let before = embed(&st.clone().into_frame(), &space).unwrap();
        let after = embed(&st.apply(&op).into_frame(), &space).unwrap();
        let want = space.apply_local(&op, &before);
        for (a, b) in after.iter().zip(&want) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
