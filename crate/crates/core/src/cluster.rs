//! Cluster vectors, collections, creation operators and the exp/log ansatz.
//!
//! Everything here works in the canonical frame of [`System`]: digit 0 of a site is Omega,
//! digits `1..d` are the excited eigenvectors, and amplitudes of a cluster vector on `I` are
//! indexed by the excited digits `m_j - 1` with the first site most significant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{cluster_metric, cluster_metric_rel, Volume};
use crate::linalg::{C64, ONE, ZERO};
use crate::model::System;
use crate::space::StateSpace;

pub type Support = SmallVec<[u32; 6]>;
pub type Amps = SmallVec<[C64; 2]>;

/// Cluster vectors with norm below this are dropped.
pub const PRUNE: f64 = 1e-14;

pub fn support_of(sites: &[usize]) -> Support {
    sites.iter().map(|&s| s as u32).collect()
}

pub fn sites_of(s: &Support) -> Vec<usize> {
    s.iter().map(|&x| x as usize).collect()
}

pub fn amps_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_disjoint(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

/// Tensor product of amplitudes on disjoint sorted supports, re-indexed to the merged order.
pub fn merge_tensor(sa: &[u32], aa: &[C64], sb: &[u32], ab: &[C64], e: usize) -> (Support, Amps) {
    let mut merged = Support::with_capacity(sa.len() + sb.len());
    let mut from_a: SmallVec<[bool; 12]> = SmallVec::new();
    let (mut i, mut j) = (0, 0);
    while i < sa.len() || j < sb.len() {
        if j == sb.len() || (i < sa.len() && sa[i] < sb[j]) {
            merged.push(sa[i]);
            from_a.push(true);
            i += 1;
        } else {
            merged.push(sb[j]);
            from_a.push(false);
            j += 1;
        }
    }
    if e == 1 {
        let mut out = Amps::new();
        out.push(aa[0] * ab[0]);
        return (merged, out);
    }
    let total = e.pow(merged.len() as u32);
    let mut out: Amps = SmallVec::from_elem(ZERO, total);
    let ka = sa.len();
    let kb = sb.len();
    for (ia, &va) in aa.iter().enumerate() {
        if va == ZERO {
            continue;
        }
        for (ib, &vb) in ab.iter().enumerate() {
            let (mut ra, mut rb) = (ia, ib);
            let mut da: SmallVec<[usize; 6]> = SmallVec::from_elem(0, ka);
            let mut db: SmallVec<[usize; 6]> = SmallVec::from_elem(0, kb);
            for p in (0..ka).rev() {
                da[p] = ra % e;
                ra /= e;
            }
            for p in (0..kb).rev() {
                db[p] = rb % e;
                rb /= e;
            }
            let (mut pa, mut pb, mut idx) = (0, 0, 0);
            for &fa in &from_a {
                let g = if fa {
                    pa += 1;
                    da[pa - 1]
                } else {
                    pb += 1;
                    db[pb - 1]
                };
                idx = idx * e + g;
            }
            out[idx] += va * vb;
        }
    }
    (merged, out)
}

/// An element of the excited tensor factor on a finite site set.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterVector {
    support: Support,
    amps: Amps,
}

impl ClusterVector {
    /// `support` must be strictly increasing; `amps` has `e^{|support|}` entries.
    pub fn new(support: &[usize], amps: &[C64], e: usize) -> Result<Self> {
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Dimension(format!("support {support:?} is not sorted and distinct")));
        }
        if amps.len() != e.pow(support.len() as u32) {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a support of size {} (expected {})",
                amps.len(),
                support.len(),
                e.pow(support.len() as u32)
            )));
        }
        Ok(ClusterVector { support: support_of(support), amps: amps.iter().copied().collect() })
    }

    /// One-site vector with a single excited digit set to one.
    pub fn unit(site: usize, digit: usize, e: usize) -> Self {
        let mut amps: Amps = SmallVec::from_elem(ZERO, e);
        amps[digit - 1] = ONE;
        ClusterVector { support: support_of(&[site]), amps }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn sites(&self) -> Vec<usize> {
        sites_of(&self.support)
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        amps_norm(&self.amps)
    }

    pub fn scaled(&self, c: C64) -> Self {
        ClusterVector { support: self.support.clone(), amps: self.amps.iter().map(|a| a * c).collect() }
    }
}

/// `u^ v^` as a cluster vector: zero (None) when the supports intersect.
pub fn creation_product(u: &ClusterVector, v: &ClusterVector, e: usize) -> Option<ClusterVector> {
    if !is_disjoint(&u.support, &v.support) {
        return None;
    }
    let (support, amps) = merge_tensor(&u.support, &u.amps, &v.support, &v.amps, e);
    Some(ClusterVector { support, amps })
}

/// Amplitudes of a cluster moved by a lattice offset, re-indexed to the new site order.
/// `None` if a site leaves the volume.
pub fn translate_amps(s: &[u32], a: &[C64], offset: &[i64], vol: &Volume, e: usize) -> Option<(Support, Amps)> {
    let mut moved: SmallVec<[(u32, usize); 6]> = SmallVec::new();
    for (pos, &x) in s.iter().enumerate() {
        moved.push((vol.shift(x as usize, offset)? as u32, pos));
    }
    moved.sort_unstable();
    let k = s.len();
    let support: Support = moved.iter().map(|&(x, _)| x).collect();
    let mut amps: Amps = SmallVec::from_elem(ZERO, a.len());
    let mut digits = [0usize; 16];
    for (old, &v) in a.iter().enumerate() {
        let mut t = old;
        for slot in (0..k).rev() {
            digits[slot] = t % e;
            t /= e;
        }
        let new = moved.iter().fold(0, |acc, &(_, pos)| acc * e + digits[pos]);
        amps[new] = v;
    }
    Some((support, amps))
}

/// Cardinality and graph-length cutoffs applied to every stored cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Truncation {
    pub k_max: usize,
    pub d_max: u32,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { k_max: 4, d_max: 6 }
    }
}

impl Truncation {
    pub fn unbounded() -> Self {
        Truncation { k_max: usize::MAX, d_max: u32::MAX }
    }

    pub fn admits(&self, s: &[u32], vol: &Volume) -> bool {
        if s.len() > self.k_max {
            return false;
        }
        if self.d_max == u32::MAX || s.len() <= 1 {
            return true;
        }
        let sites: Vec<usize> = s.iter().map(|&x| x as usize).collect();
        cluster_metric(&sites, vol) <= self.d_max
    }
}

/// Every nonempty support admitted by `trunc`, sorted.
pub fn enumerate_supports(vol: &Volume, trunc: &Truncation) -> Vec<Support> {
    let n = vol.len();
    let mut out = Vec::new();
    for a in 0..n {
        let cand: Vec<usize> = (a + 1..n).filter(|&b| vol.distance(a, b) <= trunc.d_max).collect();
        let mut stack: Vec<(Vec<usize>, usize)> = vec![(vec![a], 0)];
        while let Some((cur, from)) = stack.pop() {
            let s = support_of(&cur);
            if trunc.admits(&s, vol) {
                out.push(s);
            }
            if cur.len() < trunc.k_max {
                for (k, &b) in cand.iter().enumerate().skip(from) {
                    let mut next = cur.clone();
                    next.push(b);
                    stack.push((next, k + 1));
                }
            }
        }
    }
    out.sort();
    out
}

/// Sparse map from nonempty supports to cluster amplitudes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Collection {
    entries: BTreeMap<Support, Amps>,
}

impl Collection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_vectors(vs: impl IntoIterator<Item = ClusterVector>) -> Self {
        let mut c = Collection::new();
        for v in vs {
            c.add(&v.support, &v.amps, ONE);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, s: &[u32]) -> Option<&Amps> {
        self.entries.get(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Support, &Amps)> {
        self.entries.iter()
    }

    pub fn vectors(&self) -> impl Iterator<Item = ClusterVector> + '_ {
        self.entries
            .iter()
            .map(|(s, a)| ClusterVector { support: s.clone(), amps: a.clone() })
    }

    /// `self[s] += c * amps`; the empty support is ignored.
    pub fn add(&mut self, s: &[u32], amps: &[C64], c: C64) {
        if s.is_empty() {
            return;
        }
        match self.entries.get_mut(s) {
            Some(cur) => {
                for (x, y) in cur.iter_mut().zip(amps) {
                    *x += c * y;
                }
            }
            None => {
                self.entries.insert(s.into(), amps.iter().map(|y| c * y).collect());
            }
        }
    }

    pub fn axpy(&mut self, c: C64, other: &Collection) {
        for (s, a) in &other.entries {
            self.add(s, a, c);
        }
    }

    pub fn scale(&mut self, c: C64) {
        for a in self.entries.values_mut() {
            for x in a.iter_mut() {
                *x *= c;
            }
        }
    }

    pub fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, a| amps_norm(a) >= tol);
    }

    /// Drops clusters outside `trunc` and returns the triple norm of what was dropped.
    pub fn truncate(&mut self, trunc: &Truncation, vol: &Volume) -> f64 {
        let mut dropped = 0.0;
        self.entries.retain(|s, a| {
            let keep = trunc.admits(s, vol);
            if !keep {
                dropped += amps_norm(a);
            }
            keep
        });
        dropped
    }

    /// The collection moved by a lattice offset; `None` if a cluster leaves the volume.
    pub fn translated(&self, offset: &[i64], vol: &Volume, e: usize) -> Option<Collection> {
        let mut out = Collection::new();
        for (s, a) in &self.entries {
            let (t, b) = translate_amps(s, a, offset, vol, e)?;
            out.add(&t, &b, ONE);
        }
        Some(out)
    }

    /// `|||v||| = sum_I |v_I|`.
    pub fn triple_norm(&self) -> f64 {
        self.entries.values().map(|a| amps_norm(a)).sum()
    }

    /// Maximum over anchor sites x of `sum_{I contains x} |(H_{I,0}) v_I| eps^{-(d_I+1)}`.
    pub fn weighted_norm(&self, eps: f64, h0: bool, sys: &System) -> f64 {
        let mut per_site = vec![0.0f64; sys.n_sites()];
        for (s, a) in &self.entries {
            let sites = sites_of(s);
            let dist = cluster_metric(&sites, sys.volume());
            let nrm = if h0 { h0_norm(s, a, sys) } else { amps_norm(a) };
            let w = nrm * eps.powi(-(dist as i32 + 1));
            for &x in &sites {
                per_site[x] += w;
            }
        }
        per_site.into_iter().fold(0.0, f64::max)
    }

    /// `sum_I |H_{I,0} v_I| eps^{-(d_{I u {x}}+1)}`, the weighted size of a remainder around `x`.
    pub fn weighted_norm_around(&self, x: usize, eps: f64, sys: &System) -> f64 {
        self.entries
            .iter()
            .map(|(s, a)| {
                let dist = cluster_metric_rel(&sites_of(s), &[x], sys.volume());
                h0_norm(s, a, sys) * eps.powi(-(dist as i32 + 1))
            })
            .sum()
    }

    /// Text form: one `(i, j, ...) : (re+imi, ...)` record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, a) in &self.entries {
            let sites: Vec<String> = s.iter().map(|x| x.to_string()).collect();
            let amps: Vec<String> = a.iter().map(|z| format!("{:e}{:+e}i", z.re, z.im)).collect();
            let _ = writeln!(out, "({}) : ({})", sites.join(", "), amps.join(", "));
        }
        out
    }

    pub fn parse(text: &str, e: usize) -> Result<Self> {
        let mut c = Collection::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            let (lhs, rhs) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let strip = |s: &str| -> Result<String> {
                let s = s.trim();
                s.strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .map(str::to_string)
                    .ok_or_else(|| bad("expected parenthesised list"))
            };
            let sites: Vec<usize> = strip(lhs)?
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad("bad site index")))
                .collect::<Result<_>>()?;
            let amps: Vec<C64> = strip(rhs)?
                .split(',')
                .map(|t| parse_complex(t.trim()).ok_or_else(|| bad("bad complex amplitude")))
                .collect::<Result<_>>()?;
            let v = ClusterVector::new(&sites, &amps, e).map_err(|err| bad(&err.to_string()))?;
            c.add(&v.support, &v.amps, ONE);
        }
        Ok(c)
    }
}

fn parse_complex(t: &str) -> Option<C64> {
    let body = t.strip_suffix('i')?;
    // split at the sign that starts the imaginary part (not an exponent sign)
    let bytes = body.as_bytes();
    let mut cut = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && bytes[k - 1] != b'e' && bytes[k - 1] != b'E' {
            cut = Some(k);
            break;
        }
    }
    let k = cut?;
    Some(C64::new(body[..k].parse().ok()?, body[k..].parse().ok()?))
}

/// Free energy of each amplitude slot of a cluster on `s`.
pub fn cluster_energies(s: &[u32], sys: &System) -> Amps {
    let e = sys.e();
    let k = s.len();
    (0..e.pow(k as u32))
        .map(|mut idx| {
            let mut en = 0.0;
            for _ in 0..k {
                en += sys.levels()[idx % e + 1];
                idx /= e;
            }
            C64::from(en)
        })
        .collect()
}

fn h0_norm(s: &[u32], a: &[C64], sys: &System) -> f64 {
    let en = cluster_energies(s, sys);
    a.iter().zip(&en).map(|(x, y)| (x * y).norm_sqr()).sum::<f64>().sqrt()
}

/// A vector written as `sum_I u_I^ Omega~`, with the empty-set part kept as a scalar.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameVector {
    pub scalar: C64,
    pub coll: Collection,
}

impl FrameVector {
    pub fn from_collection(coll: Collection) -> Self {
        FrameVector { scalar: ZERO, coll }
    }

    pub fn single(u: &ClusterVector) -> Self {
        Self::from_collection(Collection::from_vectors([u.clone()]))
    }

    pub fn axpy(&mut self, c: C64, other: &FrameVector) {
        self.scalar += c * other.scalar;
        self.coll.axpy(c, &other.coll);
    }

    pub fn scale(&mut self, c: C64) {
        self.scalar *= c;
        self.coll.scale(c);
    }

    pub fn triple_norm(&self) -> f64 {
        self.scalar.norm() + self.coll.triple_norm()
    }
}

/// Full-space indices of the amplitude slots of a cluster on `s` (all other sites in Omega).
pub fn slot_indices(s: &[u32], space: &StateSpace) -> Vec<usize> {
    let e = space.d() - 1;
    let k = s.len();
    (0..e.pow(k as u32))
        .map(|mut idx| {
            let mut off = 0;
            for &site in s.iter().rev() {
                off += (idx % e + 1) * space.stride(site as usize);
                idx /= e;
            }
            off
        })
        .collect()
}

fn check_support(s: &[u32], space: &StateSpace) -> Result<()> {
    if s.iter().any(|&x| x as usize >= space.n_sites()) {
        return Err(Error::OutsideVolume(sites_of(&s.into())));
    }
    Ok(())
}

/// `v += c u_I^ v`; in place is safe because sources are Omega on `I` and targets are not.
pub fn apply_creation_add(s: &[u32], amps: &[C64], c: C64, v: &mut [C64], space: &StateSpace) {
    let slots = slot_indices(s, space);
    let sites = sites_of(&s.into());
    space.for_each_zero_on(&sites, |i| {
        let x = v[i];
        if x != ZERO {
            let x = x * c;
            for (a, &off) in amps.iter().zip(&slots) {
                v[i + off] += a * x;
            }
        }
    });
}

/// `u_I^ v = <v, Omega_I>_I u_I`.
pub fn creation_apply(u: &ClusterVector, v: &[C64], space: &StateSpace) -> Result<Vec<C64>> {
    check_support(&u.support, space)?;
    let slots = slot_indices(&u.support, space);
    let mut out = vec![ZERO; space.dim()];
    space.for_each_zero_on(&u.sites(), |i| {
        let x = v[i];
        if x != ZERO {
            for (a, &off) in u.amps.iter().zip(&slots) {
                out[i + off] += a * x;
            }
        }
    });
    Ok(out)
}

/// `exp(c sum_I v_I^)` applied in place, as the commuting product of `(1 + c v_I^)`.
pub fn exp_apply_in_place(coll: &Collection, c: C64, v: &mut [C64], space: &StateSpace) -> Result<()> {
    for (s, a) in coll.iter() {
        check_support(s, space)?;
        apply_creation_add(s, a, c, v, space);
    }
    Ok(())
}

/// `exp(sum_I v_I^) Omega_{Lambda,0}`.
pub fn exp_apply(coll: &Collection, space: &StateSpace) -> Result<Vec<C64>> {
    let mut v = space.vacuum();
    exp_apply_in_place(coll, ONE, &mut v, space)?;
    Ok(v)
}

/// The unique collection with `exp_apply(result) = v / <v, Omega_0>`, cut to `trunc`.
///
/// Components are split off by Moebius inversion: with `E` the normalized vector,
/// `L_S = E_S - sum_{B, min S in B, B != S} L_B E_{S \ B}`. Only supports up to `trunc.k_max`
/// are computed since larger ones never feed smaller ones.
pub fn truncate_log(v: &[C64], space: &StateSpace, trunc: &Truncation, vol: &Volume) -> Result<Collection> {
    let total: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let c0 = v[0];
    if c0.norm() <= 1e-12 * total.max(1e-300) {
        return Err(Error::NotNormalizable);
    }
    let inv = c0.inv();
    let n = space.n_sites();
    let d = space.d();
    let kmax = trunc.k_max.min(n);
    let mut logs: Vec<C64> = vec![ZERO; space.dim()];
    let mut out = Collection::new();
    let mut digits = vec![0usize; n];
    for i in 1..space.dim() {
        // odometer over digits, site n-1 least significant
        let mut k = n;
        while k > 0 {
            k -= 1;
            digits[k] += 1;
            if digits[k] < d {
                break;
            }
            digits[k] = 0;
        }
        let sup: SmallVec<[usize; 12]> = (0..n).filter(|&s| digits[s] != 0).collect();
        if sup.len() > kmax {
            continue;
        }
        let m = sup.len();
        let mut acc = v[i] * inv;
        // proper subsets B containing sup[0]: bitmask over sup[1..]
        for mask in 0..(1usize << (m - 1)) {
            if mask == (1usize << (m - 1)) - 1 {
                continue;
            }
            let mut ib = digits[sup[0]] * space.stride(sup[0]);
            for (p, &s) in sup[1..].iter().enumerate() {
                if mask >> p & 1 == 1 {
                    ib += digits[s] * space.stride(s);
                }
            }
            acc -= logs[ib] * v[i - ib] * inv;
        }
        logs[i] = acc;
    }
    let e = d - 1;
    for s in enumerate_small_supports(n, kmax) {
        if !trunc.admits(&s, vol) {
            continue;
        }
        let slots = slot_indices(&s, space);
        let amps: Amps = slots.iter().map(|&i| logs[i]).collect();
        debug_assert_eq!(amps.len(), e.pow(s.len() as u32));
        if amps_norm(&amps) >= PRUNE {
            out.add(&s, &amps, ONE);
        }
    }
    Ok(out)
}

fn enumerate_small_supports(n: usize, kmax: usize) -> Vec<Support> {
    let mut out = Vec::new();
    let mut stack: Vec<Support> = (0..n as u32).map(|a| SmallVec::from_slice(&[a])).collect();
    while let Some(s) = stack.pop() {
        if s.len() < kmax {
            for b in (*s.last().unwrap() + 1)..n as u32 {
                let mut t = s.clone();
                t.push(b);
                stack.push(t);
            }
        }
        out.push(s);
    }
    out
}

/// Splits a full-space vector into its components on `H'_I (x) Omega_rest`.
pub fn components(u: &[C64], space: &StateSpace) -> FrameVector {
    let e = space.d() - 1;
    let mut fv = FrameVector { scalar: u[0], coll: Collection::new() };
    let mut groups: BTreeMap<Support, Amps> = BTreeMap::new();
    for (i, &x) in u.iter().enumerate().skip(1) {
        if x == ZERO {
            continue;
        }
        let sup = support_of(&space.support(i));
        let mut idx = 0;
        for &s in &sup {
            idx = idx * e + space.digit(i, s as usize) - 1;
        }
        let entry = groups
            .entry(sup.clone())
            .or_insert_with(|| SmallVec::from_elem(ZERO, e.pow(sup.len() as u32)));
        entry[idx] += x;
    }
    for (s, a) in groups {
        if amps_norm(&a) >= PRUNE {
            fv.coll.add(&s, &a, ONE);
        }
    }
    fv
}

/// `frame_components`: `v_K = P_K exp(-sum v^gs) v`, with the empty-set part as the scalar.
pub fn frame_components(v: &[C64], frame: &Collection, space: &StateSpace) -> Result<FrameVector> {
    let mut u = v.to_vec();
    exp_apply_in_place(frame, -ONE, &mut u, space)?;
    Ok(components(&u, space))
}

/// `sum_I u_I^ Omega_0`.
pub fn embed(fv: &FrameVector, space: &StateSpace) -> Result<Vec<C64>> {
    let mut v = vec![ZERO; space.dim()];
    v[0] = fv.scalar;
    for (s, a) in fv.coll.iter() {
        check_support(s, space)?;
        for (x, i) in a.iter().zip(slot_indices(s, space)) {
            v[i] += x;
        }
    }
    Ok(v)
}

/// `sum_I u_I^ Omega~ = exp(sum v^gs) embed(fv)` (unnormalized ground state).
pub fn reconstruct(fv: &FrameVector, frame: &Collection, space: &StateSpace) -> Result<Vec<C64>> {
    let mut v = embed(fv, space)?;
    exp_apply_in_place(frame, ONE, &mut v, space)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::model::Model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn chain(n: usize) -> Volume {
        Volume::chain(n, Boundary::Open).unwrap()
    }

    #[test]
    fn tensor_product_reindexes_interleaved_supports() {
        // e = 2; u on {0, 2}, v on {1}
        let u = ClusterVector::new(&[0, 2], &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)], 2).unwrap();
        let v = ClusterVector::new(&[1], &[c(10., 0.), c(20., 0.)], 2).unwrap();
        let p = creation_product(&u, &v, 2).unwrap();
        assert_eq!(p.sites(), vec![0, 1, 2]);
        // index (m0, m1, m2) -> u[m0 m2] v[m1]
        for m0 in 0..2 {
            for m1 in 0..2 {
                for m2 in 0..2 {
                    let want = u.amps()[m0 * 2 + m2] * v.amps()[m1];
                    assert_eq!(p.amps()[m0 * 4 + m1 * 2 + m2], want);
                }
            }
        }
        assert_eq!(creation_product(&v, &u, 2).unwrap(), p);
        assert!(creation_product(&u, &u, 2).is_none());
    }

    #[test]
    fn exp_of_two_singles_has_four_terms() {
        let space = StateSpace::new(2, 2).unwrap();
        let coll = Collection::from_vectors([
            ClusterVector::new(&[0], &[c(0.3, 0.)], 1).unwrap(),
            ClusterVector::new(&[1], &[c(0., 0.5)], 1).unwrap(),
        ]);
        let v = exp_apply(&coll, &space).unwrap();
        assert_eq!(v[0b00], ONE);
        assert_eq!(v[0b10], c(0.3, 0.));
        assert_eq!(v[0b01], c(0., 0.5));
        assert!((v[0b11] - c(0.0, 0.15)).norm() < 1e-16);
    }

    #[test]
    fn creation_on_orthogonal_vector_vanishes() {
        let space = StateSpace::new(2, 3).unwrap();
        let u = ClusterVector::new(&[1], &[ONE], 1).unwrap();
        let mut v = vec![ZERO; 8];
        v[0b010] = ONE;
        v[0b111] = c(0.2, 0.1);
        let out = creation_apply(&u, &v, &space).unwrap();
        assert!(out.iter().all(|x| *x == ZERO));
        let vac = creation_apply(&u, &space.vacuum(), &space).unwrap();
        assert_eq!(vac[0b010], ONE);
        let far = ClusterVector::new(&[7], &[ONE], 1).unwrap();
        assert!(matches!(creation_apply(&far, &vac, &space), Err(Error::OutsideVolume(_))));
    }

    fn random_collection(rng: &mut ChaCha8Rng, n: usize, e: usize, count: usize) -> Collection {
        let mut coll = Collection::new();
        for _ in 0..count {
            let k = rng.gen_range(1..=3usize.min(n));
            let mut sites: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n);
                sites.swap(i, j);
            }
            let mut sup = sites[..k].to_vec();
            sup.sort_unstable();
            let amps: Vec<C64> = (0..e.pow(k as u32))
                .map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                .collect();
            coll.add(&support_of(&sup), &amps, ONE);
        }
        coll
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, n) in [(2usize, 8usize), (3, 5)] {
            let space = StateSpace::new(d, n).unwrap();
            let vol = chain(n);
            let coll = random_collection(&mut rng, n, d - 1, 10);
            let mut v = exp_apply(&coll, &space).unwrap();
            for x in v.iter_mut() {
                *x *= c(0.7, -0.2);
            }
            let back = truncate_log(&v, &space, &Truncation::unbounded(), &vol).unwrap();
            let mut diff = back.clone();
            diff.axpy(-ONE, &coll);
            assert!(diff.triple_norm() < 1e-12, "d = {d}: {}", diff.triple_norm());
        }
    }

    #[test]
    fn log_of_vacuum_is_empty_and_orthogonal_vector_errors() {
        let space = StateSpace::new(2, 4).unwrap();
        let vol = chain(4);
        assert!(truncate_log(&space.vacuum(), &space, &Truncation::default(), &vol)
            .unwrap()
            .is_empty());
        let mut v = vec![ZERO; 16];
        v[3] = ONE;
        let err = truncate_log(&v, &space, &Truncation::default(), &vol).unwrap_err();
        assert!(err.to_string().contains("not normalizable"));
    }

    #[test]
    fn frame_components_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let space = StateSpace::new(2, 6).unwrap();
        let frame = random_collection(&mut rng, 6, 1, 6);
        let omega = exp_apply(&frame, &space).unwrap();
        let fv = frame_components(&omega, &frame, &space).unwrap();
        assert!((fv.scalar - ONE).norm() < 1e-14);
        assert!(fv.coll.triple_norm() < 1e-14);

        let w = ClusterVector::new(&[3], &[ONE], 1).unwrap();
        let v = creation_apply(&w, &omega, &space).unwrap();
        let fv = frame_components(&v, &frame, &space).unwrap();
        assert!(fv.scalar.norm() < 1e-14);
        assert_eq!(fv.coll.len(), 1);
        assert!((fv.coll.get(&support_of(&[3])).unwrap()[0] - ONE).norm() < 1e-14);

        let x: Vec<C64> = (0..64).map(|i| c((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
        let fx = frame_components(&x, &frame, &space).unwrap();
        let back = reconstruct(&fx, &frame, &space).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn truncation_drops_far_and_large_clusters() {
        let vol = chain(10);
        let t = Truncation { k_max: 2, d_max: 3 };
        assert!(t.admits(&support_of(&[2, 5]), &vol));
        assert!(!t.admits(&support_of(&[2, 6]), &vol));
        assert!(!t.admits(&support_of(&[2, 3, 4]), &vol));
        let all = enumerate_supports(&vol, &t);
        // 10 singles + pairs at distance 1..=3: 9 + 8 + 7
        assert_eq!(all.len(), 10 + 24);
    }

    #[test]
    fn norms() {
        let model = Model::tfi(0.1).unwrap();
        let sys = System::new(&model, &chain(8)).unwrap();
        let mut coll = Collection::new();
        assert_eq!(coll.triple_norm(), 0.0);
        coll.add(&support_of(&[2]), &[ONE], ONE);
        assert!((coll.weighted_norm(0.5, true, &sys) - 2.0).abs() < 1e-15);
        coll.add(&support_of(&[5]), &[c(0.0, 1.0)], ONE);
        assert!((coll.triple_norm() - 2.0).abs() < 1e-15);
        let mut pair = Collection::new();
        pair.add(&support_of(&[2, 3]), &[c(0.1, 0.0)], ONE);
        // H_{I,0} = 2, d_I = 1
        assert!((pair.weighted_norm(0.5, true, &sys) - 0.2 * 4.0).abs() < 1e-14);
        assert!((pair.weighted_norm(0.5, false, &sys) - 0.1 * 4.0).abs() < 1e-14);
    }

    #[test]
    fn text_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coll = random_collection(&mut rng, 6, 2, 8);
        let text = coll.to_text();
        let back = Collection::parse(&text, 2).unwrap();
        assert_eq!(back, coll);
        assert!(Collection::parse("(0, 1) : (1e0+0e0i)", 2).is_err());
    }
}
