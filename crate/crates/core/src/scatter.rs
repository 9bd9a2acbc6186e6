//! Wave packets of quasi-particles, the product map `T`, the Cook integrand and overlap scans.
//!
//! Packets are given in momentum space on a uniform grid of the circle (chains only). On a ring
//! of `N` sites the grid has `N` points and the lattice amplitudes are an exact discrete Fourier
//! pair; finer grids model the infinite chain.

use std::f64::consts::PI;

use crate::cluster::{slot_indices, FrameVector};
use crate::error::{Error, Result};
use crate::lattice::Boundary;
use crate::linalg::{self, SparseMatrix, C64, ONE, ZERO};
use crate::model::System;
use crate::oneparticle::{Dispersion, OneParticleBasis};
use crate::space::StateSpace;

/// Profile values with modulus below this are outside the support.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// `cos(pi s / 2)^(2 power)` on `|s| < 1`; `power = 1` is the raised cosine.
    RaisedCosine { power: u32 },
    /// `exp(1 - 1 / (1 - s^2))`, smooth to all orders.
    Bump,
    /// Constant on the support (not smooth).
    Indicator,
}

impl Shape {
    fn eval(self, s: f64) -> f64 {
        if s.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Shape::RaisedCosine { power } => (0.5 * PI * s).cos().powi(2 * power as i32),
            Shape::Bump => (1.0 - 1.0 / (1.0 - s * s)).exp(),
            Shape::Indicator => 1.0,
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(Shape::Bump),
            "indicator" => Ok(Shape::Indicator),
            "raised-cosine" => Ok(Shape::RaisedCosine { power: 1 }),
            other => match other.strip_prefix("raised-cosine-").and_then(|p| p.parse().ok()) {
                Some(power) if power >= 1 => Ok(Shape::RaisedCosine { power }),
                _ => Err(Error::Parse(format!("unknown packet shape {other:?}"))),
            },
        }
    }
}

/// A one-particle state `sum_x k_x xi_x` given by its momentum profile.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    grid: usize,
    values: Vec<C64>,
}

impl WavePacket {
    /// Bump of the given shape around `center` (half-width `half_width` on the circle), placed at
    /// lattice position `position` and normalized to `(1/n) sum |Vf|^2 = 1`.
    pub fn new(grid: usize, center: f64, half_width: f64, shape: Shape, position: f64) -> Result<Self> {
        if grid == 0 || !(half_width > 0.0 && half_width <= 0.5) {
            return Err(Error::Config(format!("bad packet grid {grid} or half-width {half_width}")));
        }
        let values: Vec<C64> = (0..grid)
            .map(|j| {
                let p = j as f64 / grid as f64;
                let s = ((p - center + 0.5).rem_euclid(1.0) - 0.5) / half_width;
                C64::from_polar(shape.eval(s), 2.0 * PI * position * p)
            })
            .collect();
        Self::from_values(values)
    }

    pub fn from_values(mut values: Vec<C64>) -> Result<Self> {
        let grid = values.len();
        let nrm = (linalg::norm_sqr(&values) / grid as f64).sqrt();
        if nrm == 0.0 {
            return Err(Error::Config("packet profile vanishes on the grid".into()));
        }
        linalg::scale(C64::from(1.0 / nrm), &mut values);
        Ok(WavePacket { grid, values })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn momentum(&self, j: usize) -> f64 {
        j as f64 / self.grid as f64
    }

    /// Grid cells where the profile is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.grid).filter(|&j| self.values[j].norm() > SUPPORT_TOL).collect()
    }

    /// Group velocities over the support.
    pub fn velocity_set(&self, disp: &Dispersion) -> Vec<f64> {
        self.support().into_iter().map(|j| disp.velocity(&[self.momentum(j)])[0]).collect()
    }

    /// `<f, g> = (1/n) sum f(p) conj(g(p))`.
    pub fn inner(&self, other: &WavePacket) -> C64 {
        linalg::inner(&self.values, &other.values) / self.grid as f64
    }

    /// `exp(-itH)` on the one-particle space: multiplication by `exp(-i t m(p))`.
    pub fn evolved(&self, t: f64, disp: &Dispersion) -> WavePacket {
        self.map(|p, v| v * C64::from_polar(1.0, -t * disp.m(&[p])))
    }

    /// Lattice shift by `x` sites: multiplication by `exp(2 pi i x p)`.
    pub fn shifted(&self, x: f64) -> WavePacket {
        self.map(|p, v| v * C64::from_polar(1.0, 2.0 * PI * x * p))
    }

    /// `m(p) f(p)` (not normalized).
    pub fn times_m(&self, disp: &Dispersion) -> WavePacket {
        self.map(|p, v| v * disp.m(&[p]))
    }

    fn map(&self, f: impl Fn(f64, C64) -> C64) -> WavePacket {
        let values = self.values.iter().enumerate().map(|(j, &v)| f(self.momentum(j), v)).collect();
        WavePacket { grid: self.grid, values }
    }

    /// `k_x = (1/n) sum_j f(p_j) exp(-2 pi i x p_j)` for `x` in `(-n/2, n/2]`, in that order.
    pub fn lattice_amplitudes(&self) -> Vec<(i64, C64)> {
        let n = self.grid as i64;
        let lo = -(n - 1) / 2;
        (lo..lo + n)
            .map(|x| {
                let k: C64 = self
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * (x * j as i64).rem_euclid(n) as f64 / n as f64))
                    .sum();
                (x, k / n as f64)
            })
            .collect()
    }

    /// Circular mean position of the lattice weight and the radius around it holding all but
    /// `1e-4` of that weight.
    pub fn spatial_extent(&self) -> (f64, f64) {
        let n = self.grid as f64;
        let amps = self.lattice_amplitudes();
        let mean: C64 = amps.iter().map(|(x, k)| C64::from_polar(k.norm_sqr(), 2.0 * PI * *x as f64 / n)).sum();
        let center = mean.arg() * n / (2.0 * PI);
        let mut by_dist: Vec<(f64, f64)> = amps
            .iter()
            .map(|(x, k)| {
                let d = (*x as f64 - center).rem_euclid(n);
                (d.min(n - d), k.norm_sqr())
            })
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = by_dist.iter().map(|x| x.1).sum();
        let mut acc = 0.0;
        for (d, w) in by_dist {
            acc += w;
            if acc >= (1.0 - 1e-4) * total {
                return (center, d);
            }
        }
        (center, n / 2.0)
    }
}

/// Lattice amplitudes of `exp(-itH) f`; errors if the outer eighth of the window carries
/// amplitude above `alias_tol` on either side.
pub fn packet_amplitudes(f: &WavePacket, t: f64, disp: &Dispersion, alias_tol: f64) -> Result<Vec<(i64, C64)>> {
    let amps = f.evolved(t, disp).lattice_amplitudes();
    let edge = 3 * f.grid() as i64 / 8;
    let worst = amps.iter().filter(|(x, _)| x.abs() > edge).map(|(_, k)| k.norm()).fold(0.0, f64::max);
    if worst > alias_tol {
        return Err(Error::Aliasing(worst));
    }
    Ok(amps)
}

/// Amplitude centroid `sum x |k_x|^2` of `exp(-itH) f`.
pub fn centroid(f: &WavePacket, t: f64, disp: &Dispersion) -> f64 {
    let amps = f.evolved(t, disp).lattice_amplitudes();
    let total: f64 = amps.iter().map(|(_, k)| k.norm_sqr()).sum();
    amps.iter().map(|(x, k)| *x as f64 * k.norm_sqr()).sum::<f64>() / total
}

#[derive(Clone, Debug)]
pub struct ConeRow {
    pub t: f64,
    /// `max |k_x(t)| (1 + |x| + |t|)^a` over `x` outside the cone.
    pub weighted: f64,
    pub at: i64,
    /// Largest plain amplitude outside the cone.
    pub amplitude: f64,
}

#[derive(Clone, Debug)]
pub struct ConeReport {
    pub cone: (f64, f64),
    pub rows: Vec<ConeRow>,
    /// Constant fitted at the first time.
    pub c: f64,
    pub passed: bool,
}

/// Decay of a packet (centered at the origin) outside `t` times the velocity interval enlarged
/// by `factor` about its midpoint. Passes when the constant fitted at the first time bounds
/// every later time.
pub fn cone_decay_check(
    f: &WavePacket,
    disp: &Dispersion,
    factor: f64,
    times: &[f64],
    a: i32,
    alias_tol: f64,
) -> Result<ConeReport> {
    let vs = f.velocity_set(disp);
    let (vmin, vmax) = vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (mid, half) = (0.5 * (vmin + vmax), 0.5 * (vmax - vmin) * factor);
    let cone = (mid - half, mid + half);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let amps = packet_amplitudes(f, t, disp, alias_tol)?;
        let mut row = ConeRow { t, weighted: 0.0, at: 0, amplitude: 0.0 };
        for (x, k) in amps {
            let xf = x as f64;
            if xf >= cone.0 * t && xf <= cone.1 * t {
                continue;
            }
            let w = k.norm() * (1.0 + xf.abs() + t.abs()).powi(a);
            if w > row.weighted {
                row.weighted = w;
                row.at = x;
            }
            row.amplitude = row.amplitude.max(k.norm());
        }
        rows.push(row);
    }
    let c = rows.first().map(|r| r.weighted).unwrap_or(0.0);
    let passed = rows.iter().all(|r| r.weighted <= c);
    Ok(ConeReport { cone, rows, c, passed })
}

/// A finite sum of symmetrized products `c (f_1 x ... x f_n)^sym`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FockVector {
    pub terms: Vec<(C64, Vec<WavePacket>)>,
}

impl FockVector {
    pub fn product(packets: Vec<WavePacket>) -> Self {
        FockVector { terms: vec![(ONE, packets)] }
    }

    pub fn n_max(&self) -> usize {
        self.terms.iter().map(|t| t.1.len()).max().unwrap_or(0)
    }

    pub fn free_evolve(&self, t: f64, disp: &Dispersion) -> FockVector {
        self.map_packets(|f| f.evolved(t, disp))
    }

    pub fn shifted(&self, x: f64) -> FockVector {
        self.map_packets(|f| f.shifted(x))
    }

    fn map_packets(&self, g: impl Fn(&WavePacket) -> WavePacket) -> FockVector {
        FockVector { terms: self.terms.iter().map(|(c, fs)| (*c, fs.iter().map(&g).collect())).collect() }
    }

    /// Symmetric Fock inner product: permanents of the one-particle overlaps.
    pub fn inner(&self, other: &FockVector) -> C64 {
        let mut acc = ZERO;
        for (c1, f1) in &self.terms {
            for (c2, f2) in &other.terms {
                if f1.len() != f2.len() {
                    continue;
                }
                let n = f1.len();
                let m: Vec<C64> = (0..n * n).map(|k| f1[k / n].inner(&f2[k % n])).collect();
                acc += c1 * c2.conj() * permanent(&m, n);
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }
}

/// Permanent of a row-major `n x n` matrix (Ryser's formula).
pub fn permanent(m: &[C64], n: usize) -> C64 {
    if n == 0 {
        return ONE;
    }
    let mut total = ZERO;
    for mask in 1u64..(1u64 << n) {
        let mut prod = ONE;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                if mask >> j & 1 == 1 {
                    row += m[i * n + j];
                }
            }
            prod *= row;
        }
        let sign = if (n as u32 - mask.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

#[derive(Clone, Debug)]
pub struct Admissibility {
    pub admissible: bool,
    /// Smallest distance between velocity sets of two packets in one term.
    pub margin: f64,
}

pub fn admissible(fock: &FockVector, disp: &Dispersion) -> Admissibility {
    let mut margin = f64::INFINITY;
    for (_, fs) in &fock.terms {
        let sets: Vec<Vec<f64>> = fs.iter().map(|f| f.velocity_set(disp)).collect();
        for k in 0..sets.len() {
            for l in k + 1..sets.len() {
                let d = sets[k]
                    .iter()
                    .flat_map(|a| sets[l].iter().map(move |b| (a - b).abs()))
                    .fold(f64::INFINITY, f64::min);
                margin = margin.min(d);
            }
        }
    }
    Admissibility { admissible: margin > 0.0, margin }
}

/// `v -> (s + sum_I u_I^) v` for a frame vector `s Omega + sum u_I`.
pub fn creation_sum_apply(fv: &FrameVector, v: &[C64], space: &StateSpace) -> Vec<C64> {
    let mut out: Vec<C64> = v.iter().map(|x| x * fv.scalar).collect();
    for (s, a) in fv.coll.iter() {
        let slots = slot_indices(s, space);
        let sites: Vec<usize> = s.iter().map(|&x| x as usize).collect();
        space.for_each_zero_on(&sites, |i| {
            let x = v[i];
            if x != ZERO {
                for (c, &off) in a.iter().zip(&slots) {
                    out[i + off] += c * x;
                }
            }
        });
    }
    out
}

/// Everything needed to map packets on a ring into the physical space.
pub struct ScatterContext {
    pub basis: OneParticleBasis,
    pub dispersion: Dispersion,
    /// `H - E` in the canonical frame.
    pub hamiltonian: SparseMatrix,
    n: usize,
}

impl ScatterContext {
    pub fn new(sys: &System, basis: OneParticleBasis, dispersion: Dispersion, energy: f64) -> Result<Self> {
        let vol = sys.volume();
        if vol.nu() != 1 || vol.boundary() != Boundary::Periodic {
            return Err(Error::Config("scattering runs need a periodic chain".into()));
        }
        if basis.len() != vol.len() {
            return Err(Error::Config("the one-particle basis must cover the whole ring".into()));
        }
        let hamiltonian = sys.hamiltonian()?.shifted(-energy);
        Ok(ScatterContext { basis, dispersion, hamiltonian, n: vol.len() })
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    /// `sum_x k_x xi_x` as a frame vector.
    pub fn one_particle(&self, f: &WavePacket) -> Result<FrameVector> {
        if f.grid() != self.n {
            return Err(Error::Config(format!("packet grid {} differs from the ring size {}", f.grid(), self.n)));
        }
        let mut out = FrameVector::default();
        for (x, k) in f.lattice_amplitudes() {
            let site = x.rem_euclid(self.n as i64) as usize;
            out.axpy(k, &self.basis.xi[self.basis.window.iter().position(|&w| w == site).expect("ring site")]);
        }
        Ok(out)
    }

    fn product_of(&self, factors: &[FrameVector]) -> Result<Vec<C64>> {
        let space = self.basis.metric.space();
        let mut v = space.vacuum();
        for f in factors {
            v = creation_sum_apply(f, &v, space);
        }
        Ok(v)
    }

    /// `T fock = sum c prod_k A_{f_k} Omega~ / |Omega~|` with `A_f = sum_x k_x xi_x^`.
    pub fn product_map(&self, fock: &FockVector) -> Result<Vec<C64>> {
        let space = self.basis.metric.space();
        let mut total = vec![ZERO; space.dim()];
        for (c, fs) in &fock.terms {
            let factors: Vec<FrameVector> = fs.iter().map(|f| self.one_particle(f)).collect::<Result<_>>()?;
            linalg::axpy(*c, &self.product_of(&factors)?, &mut total);
        }
        self.to_physical(total)
    }

    /// `T H_f fock`, with `H_f` acting by the Leibniz rule.
    pub fn product_map_hf(&self, fock: &FockVector) -> Result<Vec<C64>> {
        let space = self.basis.metric.space();
        let mut total = vec![ZERO; space.dim()];
        for (c, fs) in &fock.terms {
            let plain: Vec<FrameVector> = fs.iter().map(|f| self.one_particle(f)).collect::<Result<_>>()?;
            for k in 0..fs.len() {
                let mut factors = plain.clone();
                factors[k] = self.one_particle(&fs[k].times_m(&self.dispersion))?;
                linalg::axpy(*c, &self.product_of(&factors)?, &mut total);
            }
        }
        self.to_physical(total)
    }

    fn to_physical(&self, v: Vec<C64>) -> Result<Vec<C64>> {
        self.basis.metric.lift(v)
    }

    /// `(N/2 - radius) / max velocity`, minimized over the packets of `fock`.
    pub fn time_budget(&self, fock: &FockVector) -> f64 {
        let mut budget = f64::INFINITY;
        for (_, fs) in &fock.terms {
            for f in fs {
                let vmax = f.velocity_set(&self.dispersion).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let room = self.n as f64 / 2.0 - f.spatial_extent().1;
                if vmax > 0.0 {
                    budget = budget.min(room / vmax);
                }
            }
        }
        budget
    }

    fn check_time(&self, fock: &FockVector, t: f64) -> Result<()> {
        let budget = self.time_budget(fock);
        if t.abs() > budget {
            return Err(Error::TimeBudget { t, budget });
        }
        Ok(())
    }

    /// `|(H T - T H_f) exp(-i t H_f) fock|`.
    pub fn cook_integrand(&self, fock: &FockVector, t: f64) -> Result<f64> {
        self.check_time(fock, t)?;
        let ft = fock.free_evolve(t, &self.dispersion);
        let tv = self.product_map(&ft)?;
        let mut r = self.hamiltonian.matvec(&tv);
        let thf = self.product_map_hf(&ft)?;
        linalg::axpy(-ONE, &thf, &mut r);
        Ok(linalg::norm(&r))
    }

    pub fn isometry_scan(&self, f1: &FockVector, f2: &FockVector, times: &[f64]) -> Result<Vec<OverlapRow>> {
        let target = f1.inner(f2);
        times
            .iter()
            .map(|&t| {
                self.check_time(f1, t)?;
                self.check_time(f2, t)?;
                let a = self.product_map(&f1.free_evolve(t, &self.dispersion))?;
                let b = self.product_map(&f2.free_evolve(t, &self.dispersion))?;
                let overlap = linalg::inner(&a, &b);
                Ok(OverlapRow { t, overlap, target, gap: (overlap - target).norm() })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OverlapRow {
    pub t: f64,
    pub overlap: C64,
    pub target: C64,
    pub gap: f64,
}

/// `|(H - E) u^ v^ Omega - v^ (H - E) u^ Omega - u^ (H - E) v^ Omega|` for an eigenvector
/// `Omega` of `H` with eigenvalue `energy`; zero when the supports are farther apart than the
/// interaction range.
pub fn leibniz_defect(
    u: &FrameVector,
    v: &FrameVector,
    h: &SparseMatrix,
    energy: f64,
    omega: &[C64],
    space: &StateSpace,
) -> f64 {
    let hs = h.shifted(-energy);
    let cu = |x: &[C64]| creation_sum_apply(u, x, space);
    let cv = |x: &[C64]| creation_sum_apply(v, x, space);
    let mut lhs = hs.matvec(&cu(&cv(omega)));
    linalg::axpy(-ONE, &cv(&hs.matvec(&cu(omega))), &mut lhs);
    linalg::axpy(-ONE, &cu(&hs.matvec(&cv(omega))), &mut lhs);
    linalg::norm(&lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oneparticle::Hoppings;

    fn tfi_like(lam: f64) -> Dispersion {
        Dispersion::from_hoppings(&Hoppings {
            offsets: vec![vec![0], vec![1], vec![-1]],
            values: vec![C64::from(1.0), C64::from(-lam), C64::from(-lam)],
            extent: None,
        })
    }

    #[test]
    fn uniform_profile_is_a_delta() {
        let f = WavePacket::from_values(vec![ONE; 16]).unwrap();
        for (x, k) in f.lattice_amplitudes() {
            let want = if x == 0 { 1.0 } else { 0.0 };
            assert!((k.norm() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn packets_are_normalized_and_placed() {
        let f = WavePacket::new(64, 0.25, 0.1, Shape::Bump, 5.0).unwrap();
        assert!((f.inner(&f).re - 1.0).abs() < 1e-12);
        let w: f64 = f.lattice_amplitudes().iter().map(|(_, k)| k.norm_sqr()).sum();
        assert!((w - 1.0).abs() < 1e-12);
        let (c, _) = f.spatial_extent();
        assert!((c - 5.0).abs() < 0.5, "{c}");
        let g = f.shifted(-5.0);
        assert!((g.spatial_extent().0).abs() < 0.5);
    }

    #[test]
    fn flat_dispersion_does_not_move_packets() {
        let flat = Dispersion::flat(1, 1.0);
        let f = WavePacket::new(128, 0.3, 0.1, Shape::Bump, 0.0).unwrap();
        let a0 = f.lattice_amplitudes();
        let a1 = f.evolved(17.0, &flat).lattice_amplitudes();
        for ((_, x), (_, y)) in a0.iter().zip(&a1) {
            assert!((x.norm() - y.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_moves_with_group_velocity() {
        let disp = tfi_like(0.1);
        let f = WavePacket::new(512, 0.25, 0.05, Shape::Bump, 0.0).unwrap();
        let pts: Vec<(f64, f64)> = (0..=4).map(|k| (10.0 * k as f64, centroid(&f, 10.0 * k as f64, &disp))).collect();
        let (slope, _, _) = linalg::linear_fit(&pts);
        assert!((slope - disp.velocity(&[0.25])[0]).abs() < 5e-3, "{slope}");
        assert!((disp.velocity(&[0.25])[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn free_evolution_is_a_unitary_group() {
        let disp = tfi_like(0.1);
        let f = FockVector::product(vec![
            WavePacket::new(32, 0.2, 0.15, Shape::Bump, 0.0).unwrap(),
            WavePacket::new(32, 0.7, 0.15, Shape::Bump, 3.0).unwrap(),
        ]);
        let a = f.free_evolve(2.0, &disp).free_evolve(3.5, &disp);
        let b = f.free_evolve(5.5, &disp);
        for ((_, x), (_, y)) in a.terms.iter().zip(&b.terms) {
            for (p, q) in x.iter().zip(y) {
                assert!(p.values().iter().zip(q.values()).all(|(u, v)| (u - v).norm() < 1e-12));
            }
        }
        assert!((f.norm() - b.norm()).abs() < 1e-12);
        assert_eq!(f.free_evolve(0.0, &disp), f);
    }

    #[test]
    fn permanent_small_cases() {
        let m = [C64::from(1.0), C64::from(2.0), C64::from(3.0), C64::from(4.0)];
        assert!((permanent(&m, 2) - 10.0).norm() < 1e-12);
        let m3: Vec<C64> = (1..=9).map(|k| C64::from(k as f64)).collect();
        assert!((permanent(&m3, 3) - 450.0).norm() < 1e-9);
        let f = WavePacket::new(16, 0.2, 0.2, Shape::Bump, 0.0).unwrap();
        let g = WavePacket::new(16, 0.3, 0.2, Shape::Bump, 1.0).unwrap();
        let two = FockVector::product(vec![f.clone(), g.clone()]);
        let want = 1.0 + f.inner(&g).norm_sqr();
        assert!((two.inner(&two).re - want).abs() < 1e-12);
    }

    #[test]
    fn admissibility() {
        let disp = tfi_like(0.1);
        let a = WavePacket::new(200, 0.25, 0.05, Shape::Bump, 0.0).unwrap();
        let b = WavePacket::new(200, 0.75, 0.05, Shape::Bump, 0.0).unwrap();
        assert!(admissible(&FockVector::product(vec![a.clone()]), &disp).admissible);
        let ab = admissible(&FockVector::product(vec![a.clone(), b]), &disp);
        assert!(ab.admissible && ab.margin > 0.3);
        let aa = admissible(&FockVector::product(vec![a.clone(), a]), &disp);
        assert!(!aa.admissible && aa.margin == 0.0);
    }

    #[test]
    fn shapes_parse() {
        assert_eq!("raised-cosine-3".parse::<Shape>().unwrap(), Shape::RaisedCosine { power: 3 });
        assert_eq!("bump".parse::<Shape>().unwrap(), Shape::Bump);
        assert!("gauss".parse::<Shape>().is_err());
    }
}
