//! Finite volumes of Z^nu and the graph-length metrics on site sets.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Config(format!(
                "boundary must be \"open\" or \"periodic\", got {other:?}"
            ))),
        }
    }
}

/// A finite set of lattice points; site indices follow the order of `sites`.
#[derive(Clone, Debug)]
pub struct Volume {
    nu: usize,
    sites: Vec<Vec<i64>>,
    boundary: Boundary,
    extent: Vec<usize>,
    lookup: FxHashMap<Vec<i64>, usize>,
}

impl Volume {
    pub fn chain(n: usize, boundary: Boundary) -> Result<Self> {
        Self::boxed(&[n], boundary)
    }

    /// Full rectangular box `[0, L_1) x ... x [0, L_nu)`, first axis slowest.
    pub fn boxed(extent: &[usize], boundary: Boundary) -> Result<Self> {
        if extent.is_empty() || extent.contains(&0) {
            return Err(Error::Config(format!("box extent {extent:?} must be nonempty and positive")));
        }
        let total: usize = extent.iter().product();
        let mut sites = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut p = vec![0i64; extent.len()];
            for a in (0..extent.len()).rev() {
                p[a] = (k % extent[a]) as i64;
                k /= extent[a];
            }
            sites.push(p);
        }
        let mut v = Self::build(extent.len(), sites, boundary)?;
        v.extent = extent.to_vec();
        Ok(v)
    }

    /// Arbitrary open volume from a list of distinct points.
    pub fn from_sites(nu: usize, sites: Vec<Vec<i64>>) -> Result<Self> {
        if sites.iter().any(|p| p.len() != nu) {
            return Err(Error::Config(format!("every site needs {nu} coordinates")));
        }
        Self::build(nu, sites, Boundary::Open)
    }

    fn build(nu: usize, sites: Vec<Vec<i64>>, boundary: Boundary) -> Result<Self> {
        if nu == 0 || sites.is_empty() {
            return Err(Error::Config("volume must have nu >= 1 and at least one site".into()));
        }
        let mut lookup = FxHashMap::default();
        for (i, p) in sites.iter().enumerate() {
            if lookup.insert(p.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate site {p:?}")));
            }
        }
        let extent = (0..nu)
            .map(|a| {
                let lo = sites.iter().map(|p| p[a]).min().unwrap();
                let hi = sites.iter().map(|p| p[a]).max().unwrap();
                (hi - lo + 1) as usize
            })
            .collect();
        Ok(Volume { nu, sites, boundary, extent, lookup })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    pub fn coords(&self, i: usize) -> &[i64] {
        &self.sites[i]
    }

    pub fn site_index(&self, p: &[i64]) -> Option<usize> {
        match self.boundary {
            Boundary::Open => self.lookup.get(p).copied(),
            Boundary::Periodic => {
                let wrapped: Vec<i64> = p
                    .iter()
                    .zip(&self.extent)
                    .map(|(&x, &l)| x.rem_euclid(l as i64))
                    .collect();
                self.lookup.get(&wrapped).copied()
            }
        }
    }

    /// Site reached from `i` by `offset`, wrapping on periodic volumes.
    pub fn shift(&self, i: usize, offset: &[i64]) -> Option<usize> {
        let p: Vec<i64> = self.sites[i].iter().zip(offset).map(|(a, b)| a + b).collect();
        self.site_index(&p)
    }

    /// `b - a`, using the minimal image on periodic axes.
    pub fn displacement(&self, a: usize, b: usize) -> Vec<i64> {
        let (pa, pb) = (&self.sites[a], &self.sites[b]);
        (0..self.nu)
            .map(|k| {
                let d = pb[k] - pa[k];
                match self.boundary {
                    Boundary::Open => d,
                    Boundary::Periodic => min_image(d, self.extent[k] as i64),
                }
            })
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.displacement(a, b).iter().map(|x| x.unsigned_abs() as u32).sum()
    }

    /// Lattice translations of a periodic box, as offsets.
    pub fn translations(&self) -> Vec<Vec<i64>> {
        match self.boundary {
            Boundary::Open => vec![vec![0; self.nu]],
            Boundary::Periodic => self.sites.clone(),
        }
    }

    /// Distance from site `i` to the outside of an open volume's bounding box.
    pub fn boundary_distance(&self, i: usize) -> u32 {
        if self.boundary == Boundary::Periodic {
            return u32::MAX;
        }
        let p = &self.sites[i];
        (0..self.nu)
            .map(|a| {
                let lo = self.sites.iter().map(|q| q[a]).min().unwrap();
                let hi = self.sites.iter().map(|q| q[a]).max().unwrap();
                (p[a] - lo).min(hi - p[a]) as u32
            })
            .min()
            .unwrap()
    }
}

fn min_image(d: i64, l: i64) -> i64 {
    let mut r = d.rem_euclid(l);
    if 2 * r > l {
        r -= l;
    }
    r
}

/// Length of a minimal connected graph on `sites` (see module docs for the exact/approximate split).
pub fn cluster_metric(sites: &[usize], vol: &Volume) -> u32 {
    match sites.len() {
        0 | 1 => 0,
        2 => vol.distance(sites[0], sites[1]),
        _ if vol.nu() == 1 => line_span(sites, vol),
        3 => {
            // rectilinear Steiner tree on three terminals: half-perimeter of the bounding box
            let rel: Vec<Vec<i64>> = sites.iter().map(|&s| vol.displacement(sites[0], s)).collect();
            (0..vol.nu())
                .map(|a| {
                    let lo = rel.iter().map(|p| p[a]).min().unwrap();
                    let hi = rel.iter().map(|p| p[a]).max().unwrap();
                    (hi - lo) as u32
                })
                .sum()
        }
        _ => mst_length(sites.len(), |i, j| vol.distance(sites[i], sites[j])),
    }
}

fn line_span(sites: &[usize], vol: &Volume) -> u32 {
    let mut xs: Vec<i64> = sites.iter().map(|&s| vol.coords(s)[0]).collect();
    xs.sort_unstable();
    xs.dedup();
    let span = (xs[xs.len() - 1] - xs[0]) as u32;
    match vol.boundary() {
        Boundary::Open => span,
        Boundary::Periodic => {
            let l = vol.extent()[0] as i64;
            let mut largest = l - xs[xs.len() - 1] + xs[0];
            for w in xs.windows(2) {
                largest = largest.max(w[1] - w[0]);
            }
            (l - largest) as u32
        }
    }
}

/// Prim's algorithm on a dense distance function.
fn mst_length(n: usize, dist: impl Fn(usize, usize) -> u32) -> u32 {
    if n <= 1 {
        return 0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![u32::MAX; n];
    best[0] = 0;
    let mut total = 0;
    for _ in 0..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (pick == usize::MAX || best[v] < best[pick]) {
                pick = v;
            }
        }
        in_tree[pick] = true;
        total += best[pick];
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(dist(pick, v));
            }
        }
    }
    total
}

/// Length needed to connect every site of `j` to the set `i` (sites of `i` are free).
pub fn cluster_metric_rel(j: &[usize], i: &[usize], vol: &Volume) -> u32 {
    if i.is_empty() {
        return cluster_metric(j, vol);
    }
    let rest: Vec<usize> = j.iter().copied().filter(|s| !i.contains(s)).collect();
    if rest.is_empty() {
        return 0;
    }
    if i.len() == 1 {
        let mut all = rest;
        all.push(i[0]);
        all.sort_unstable();
        return cluster_metric(&all, vol);
    }
    let to_i = |s: usize| i.iter().map(|&t| vol.distance(s, t)).min().unwrap();
    if rest.len() == 1 {
        return to_i(rest[0]);
    }
    // node 0 is the contracted set i
    mst_length(rest.len() + 1, |a, b| match (a, b) {
        (0, 0) => 0,
        (0, k) | (k, 0) => to_i(rest[k - 1]),
        (x, y) => vol.distance(rest[x - 1], rest[y - 1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: usize) -> Volume {
        Volume::boxed(&[l, l], Boundary::Open).unwrap()
    }

    fn at(vol: &Volume, p: &[i64]) -> usize {
        vol.site_index(p).unwrap()
    }

    #[test]
    fn metric_examples() {
        let chain = Volume::chain(8, Boundary::Open).unwrap();
        assert_eq!(cluster_metric(&[4], &chain), 0);
        assert_eq!(cluster_metric(&[0, 3], &chain), 3);
        let g = grid(5);
        let tri = [at(&g, &[0, 0]), at(&g, &[2, 0]), at(&g, &[0, 2])];
        assert_eq!(cluster_metric(&tri, &g), 4);
    }

    /// Brute-force rectilinear Steiner length for three terminals: best Steiner point in the box.
    fn steiner3_brute(pts: &[[i64; 2]; 3]) -> u32 {
        let mut best = u32::MAX;
        for x in -1..7 {
            for y in -1..7 {
                let s: u32 = pts
                    .iter()
                    .map(|p| ((p[0] - x).abs() + (p[1] - y).abs()) as u32)
                    .sum();
                best = best.min(s);
            }
        }
        best
    }

    #[test]
    fn three_point_steiner_matches_enumeration() {
        let g = grid(6);
        for a in 0..36 {
            for b in (a + 1)..36 {
                for c in [(a * 7 + b) % 36, (b * 5 + 3) % 36] {
                    if c == a || c == b {
                        continue;
                    }
                    let pts = [a, b, c].map(|s| [g.coords(s)[0], g.coords(s)[1]]);
                    assert_eq!(cluster_metric(&[a, b, c], &g), steiner3_brute(&pts));
                }
            }
        }
    }

    #[test]
    fn ring_metric_uses_short_way_round() {
        let ring = Volume::chain(10, Boundary::Periodic).unwrap();
        assert_eq!(cluster_metric(&[0, 9], &ring), 1);
        assert_eq!(cluster_metric(&[0, 1, 9], &ring), 2);
        assert_eq!(cluster_metric(&[0, 5], &ring), 5);
        assert_eq!(cluster_metric(&[0, 3, 6], &ring), 6);
    }

    #[test]
    fn relative_metric() {
        let chain = Volume::chain(12, Boundary::Open).unwrap();
        assert_eq!(cluster_metric_rel(&[5], &[2, 3], &chain), 2);
        assert_eq!(cluster_metric_rel(&[0, 7], &[3], &chain), 7);
        assert_eq!(cluster_metric_rel(&[3], &[3, 5], &chain), 0);
        assert_eq!(cluster_metric_rel(&[0, 8], &[3, 5], &chain), 6);
    }

    #[test]
    fn periodic_lookup_wraps() {
        let ring = Volume::chain(6, Boundary::Periodic).unwrap();
        assert_eq!(ring.shift(5, &[1]), Some(0));
        assert_eq!(ring.displacement(5, 0), vec![1]);
        let open = Volume::chain(6, Boundary::Open).unwrap();
        assert_eq!(open.shift(5, &[1]), None);
        assert_eq!(open.boundary_distance(1), 1);
    }
}
