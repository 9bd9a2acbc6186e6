//! Brute-force references: dense and Lanczos diagonalization, momentum sectors, Chebyshev propagation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::Boundary;
use crate::linalg::{self, bessel_j_sequence, SparseMatrix, C64, ONE, ZERO};
use crate::model::System;

pub const DENSE_MAX_DIM: usize = 1 << 13;

/// Full Hermitian eigendecomposition, eigenvalues ascending.
pub fn dense_spectrum(h: &SparseMatrix) -> Result<(Vec<f64>, DMatrix<C64>)> {
    if h.dim() > DENSE_MAX_DIM {
        return Err(Error::Capacity { dim: h.dim() as u128, ceiling: DENSE_MAX_DIM });
    }
    Ok(linalg::eigh(&h.to_dense()))
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Krylov basis memory budget in bytes.
    pub memory: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-9, max_restarts: 60, seed: 0x5eed, memory: 256 << 20 }
    }
}

#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

fn orthogonalize(v: &mut [C64], against: &[Vec<C64>]) {
    // twice is enough
    for _ in 0..2 {
        for q in against {
            let c = linalg::inner(v, q);
            linalg::axpy(-c, q, v);
        }
    }
}

/// Lowest `k` eigenpairs by Lanczos with full reorthogonalization, locking and explicit restarts.
pub fn extremal_eigs(h: &SparseMatrix, k: usize, opts: &LanczosOptions) -> Result<Vec<EigPair>> {
    let n = h.dim();
    if n > linalg::max_dim() {
        return Err(Error::Capacity { dim: n as u128, ceiling: linalg::max_dim() });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if n <= 64 {
        let (vals, vecs) = dense_spectrum(h)?;
        return Ok((0..k.min(n))
            .map(|i| EigPair { value: vals[i], vector: vecs.column(i).iter().copied().collect(), residual: 0.0 })
            .collect());
    }
    let m_max = (opts.memory / (16 * n)).clamp(k + 20, 160).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut locked: Vec<EigPair> = Vec::new();
    let mut hv = vec![ZERO; n];
    for _ in 0..opts.max_restarts {
        let locked_vecs: Vec<Vec<C64>> = locked.iter().map(|p| p.vector.clone()).collect();
        orthogonalize(&mut start, &locked_vecs);
        let nrm = linalg::norm(&start);
        if nrm < 1e-300 {
            return Err(Error::NoConvergence("Lanczos start vector vanished".into()));
        }
        linalg::scale(C64::from(1.0 / nrm), &mut start);
        let m = m_max.min(n - locked.len());
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..m {
            h.matvec_into(&basis[j], &mut hv);
            let a = linalg::inner(&hv, &basis[j]).re;
            alpha.push(a);
            let mut w = hv.clone();
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &locked_vecs);
            let b = linalg::norm(&w);
            if j + 1 == m || b < 1e-12 {
                beta.push(b);
                break;
            }
            linalg::scale(C64::from(1.0 / b), &mut w);
            beta.push(b);
            basis.push(w);
        }
        let mm = alpha.len();
        let t = DMatrix::from_fn(mm, mm, |i, j| {
            if i == j {
                C64::from(alpha[i])
            } else if i + 1 == j || j + 1 == i {
                C64::from(beta[i.min(j)])
            } else {
                ZERO
            }
        });
        let (_, s) = linalg::eigh(&t);
        let want = k - locked.len();
        let mut next_start = vec![ZERO; n];
        let mut locking = true;
        for r in 0..want.min(mm) {
            let mut y = vec![ZERO; n];
            for (c, q) in basis.iter().enumerate() {
                linalg::axpy(s[(c, r)], q, &mut y);
            }
            let ny = linalg::norm(&y);
            linalg::scale(C64::from(1.0 / ny), &mut y);
            h.matvec_into(&y, &mut hv);
            let rq = linalg::inner(&hv, &y).re;
            linalg::axpy(C64::from(-rq), &y, &mut hv);
            let res = linalg::norm(&hv);
            if locking && res <= opts.tol * rq.abs().max(1.0) {
                locked.push(EigPair { value: rq, vector: y, residual: res });
            } else {
                locking = false;
                linalg::axpy(ONE, &y, &mut next_start);
            }
        }
        if locked.len() >= k {
            locked.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
            return Ok(locked);
        }
        start = next_start;
    }
    Err(Error::NoConvergence(format!(
        "{} of {k} eigenpairs converged after {} restarts",
        locked.len(),
        opts.max_restarts
    )))
}

/// Ground energy (lowest eigenvalue) of `h`.
pub fn ground_energy(h: &SparseMatrix) -> Result<f64> {
    Ok(extremal_eigs(h, 1, &LanczosOptions::default())?[0].value)
}

/// Cheap enclosing interval of the spectrum from a short Lanczos run, padded by the residual bounds.
pub fn spectral_bounds(h: &SparseMatrix, steps: usize) -> Result<(f64, f64)> {
    let n = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let nrm = linalg::norm(&v);
    linalg::scale(C64::from(1.0 / nrm), &mut v);
    let mut v_prev = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut b_prev = 0.0;
    for _ in 0..steps.min(n) {
        h.matvec_into(&v, &mut w);
        let a = linalg::inner(&w, &v).re;
        for i in 0..n {
            w[i] -= v[i] * a + v_prev[i] * b_prev;
        }
        let b = linalg::norm(&w);
        alpha.push(a);
        beta.push(b);
        if b < 1e-10 {
            break;
        }
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..n {
            v[i] = w[i] / b;
        }
        b_prev = b;
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            C64::from(alpha[i])
        } else if i + 1 == j || j + 1 == i {
            C64::from(beta[i.min(j)])
        } else {
            ZERO
        }
    });
    let (theta, s) = linalg::eigh(&t);
    let last_beta = beta[m - 1];
    let lo = theta[0] - last_beta * s[(m - 1, 0)].norm();
    let hi = theta[m - 1] + last_beta * s[(m - 1, m - 1)].norm();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NoConvergence("spectral interval estimation failed".into()));
    }
    let pad = 0.01 * (hi - lo) + 1e-3;
    Ok((lo - pad, hi + pad))
}

/// `exp(-i t H) v` by Chebyshev expansion on a Lanczos-estimated interval.
pub fn evolve_reference(h: &SparseMatrix, v: &[C64], t: f64) -> Result<Vec<C64>> {
    let bounds = spectral_bounds(h, 40)?;
    evolve_chebyshev(h, v, t, bounds)
}

pub fn evolve_chebyshev(h: &SparseMatrix, v: &[C64], t: f64, (lo, hi): (f64, f64)) -> Result<Vec<C64>> {
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    let n = h.dim();
    let a = 0.5 * (hi - lo);
    let b = 0.5 * (hi + lo);
    let x = a * t.abs();
    let kmax = (x + 10.0 * x.powf(1.0 / 3.0) + 40.0) as usize;
    let jv = bessel_j_sequence(x, kmax);
    let sgn = if t > 0.0 { -1.0 } else { 1.0 };
    // coefficient of T_k: (2 - delta_k0) (sgn i)^k J_k(a|t|)
    let coef = |k: usize| -> C64 {
        let ik = C64::new(0.0, sgn).powu(k as u32);
        ik * (if k == 0 { 1.0 } else { 2.0 }) * jv[k]
    };
    let apply_scaled = |x: &[C64], out: &mut [C64]| {
        h.matvec_into(x, out);
        for i in 0..n {
            out[i] = (out[i] - x[i] * b) / a;
        }
    };
    let mut t0 = v.to_vec();
    let mut t1 = vec![ZERO; n];
    apply_scaled(&t0, &mut t1);
    let mut acc: Vec<C64> = t0.iter().map(|z| z * coef(0)).collect();
    linalg::axpy(coef(1), &t1, &mut acc);
    let mut t2 = vec![ZERO; n];
    let vnorm = linalg::norm(v);
    let mut small = 0;
    for k in 2..kmax {
        apply_scaled(&t1, &mut t2);
        for i in 0..n {
            t2[i] = t2[i] * 2.0 - t0[i];
        }
        let c = coef(k);
        linalg::axpy(c, &t2, &mut acc);
        std::mem::swap(&mut t0, &mut t1);
        std::mem::swap(&mut t1, &mut t2);
        if c.norm() * vnorm < 1e-15 && k as f64 > x {
            small += 1;
            if small >= 4 {
                break;
            }
        } else {
            small = 0;
        }
    }
    let phase = C64::new(0.0, -b * t).exp();
    linalg::scale(phase, &mut acc);
    Ok(acc)
}

/// `exp(-i t H) v` through a dense eigendecomposition (small dimensions only).
pub fn evolve_dense(h: &SparseMatrix, v: &[C64], t: f64) -> Result<Vec<C64>> {
    let (vals, vecs) = dense_spectrum(h)?;
    let n = h.dim();
    let mut out = vec![ZERO; n];
    for (k, &e) in vals.iter().enumerate() {
        let col: Vec<C64> = vecs.column(k).iter().copied().collect();
        let c = linalg::inner(v, &col) * C64::new(0.0, -e * t).exp();
        linalg::axpy(c, &col, &mut out);
    }
    Ok(out)
}

/// Translation sectors of a periodic box.
pub struct MomentumSectors {
    /// Per configuration: (representative, translation index g with T_g rep = config).
    rep_of: Vec<(u32, u32)>,
    reps: Vec<usize>,
    orbit_size: Vec<usize>,
    translations: Vec<Vec<i64>>,
    extent: Vec<usize>,
    /// Translations fixing each representative (empty when the orbit is full).
    stabilizer: Vec<Vec<usize>>,
}

impl MomentumSectors {
    pub fn new(sys: &System) -> Result<Self> {
        let vol = sys.volume();
        if vol.boundary() != Boundary::Periodic {
            return Err(Error::Config("momentum sectors need a periodic volume".into()));
        }
        let space = sys.space()?;
        let n = vol.len();
        let translations = vol.translations();
        let perm: Vec<Vec<usize>> = translations
            .iter()
            .map(|g| (0..n).map(|s| vol.shift(s, g).unwrap()).collect())
            .collect();
        let dim = space.dim();
        let mut rep_of = vec![(u32::MAX, 0u32); dim];
        let mut reps = Vec::new();
        let mut orbit_size = Vec::new();
        let mut stabilizer = Vec::new();
        let mut digits = vec![0usize; n];
        for i in 0..dim {
            if rep_of[i].0 != u32::MAX {
                continue;
            }
            // i is the smallest element of its orbit
            for (s, dg) in digits.iter_mut().enumerate() {
                *dg = space.digit(i, s);
            }
            let mut size = 0;
            let mut stab = Vec::new();
            for (g, p) in perm.iter().enumerate() {
                let mut j = 0;
                for s in 0..n {
                    j += digits[s] * space.stride(p[s]);
                }
                if j == i {
                    stab.push(g);
                }
                if rep_of[j].0 == u32::MAX {
                    rep_of[j] = (reps.len() as u32, g as u32);
                    size += 1;
                }
            }
            if size == translations.len() {
                stab.clear();
            }
            reps.push(i);
            orbit_size.push(size);
            stabilizer.push(stab);
        }
        Ok(MomentumSectors { rep_of, reps, orbit_size, translations, extent: vol.extent().to_vec(), stabilizer })
    }

    pub fn momenta(&self) -> Vec<Vec<f64>> {
        self.translations
            .iter()
            .map(|g| g.iter().zip(&self.extent).map(|(&j, &l)| j as f64 / l as f64).collect())
            .collect()
    }

    /// Dense block of `h` in the sector with momentum `p` (components in [0, 1)).
    pub fn block(&self, h: &SparseMatrix, p: &[f64]) -> DMatrix<C64> {
        let phase = |g: usize| -> C64 {
            let dot: f64 = self.translations[g].iter().zip(p).map(|(&x, &q)| x as f64 * q).sum();
            C64::new(0.0, 2.0 * std::f64::consts::PI * dot).exp()
        };
        let nreps = self.reps.len();
        // a representative survives only if the stabilizer phases do not cancel
        let allowed: Vec<bool> = (0..nreps)
            .map(|r| {
                let stab = &self.stabilizer[r];
                stab.is_empty() || stab.iter().map(|&g| phase(g)).sum::<C64>().norm() > 1e-8
            })
            .collect();
        let index: Vec<usize> = {
            let mut idx = vec![usize::MAX; nreps];
            let mut c = 0;
            for r in 0..nreps {
                if allowed[r] {
                    idx[r] = c;
                    c += 1;
                }
            }
            idx
        };
        let nb = index.iter().filter(|&&x| x != usize::MAX).count();
        let mut m = DMatrix::zeros(nb, nb);
        for a in 0..nreps {
            if !allowed[a] {
                continue;
            }
            let ia = index[a];
            let sa = self.orbit_size[a] as f64;
            // H |a> = sum_c h_c |c>, c = T_g |b>
            for (c, hc) in h.row(self.reps[a]).map(|(c, v)| (c, v.conj())) {
                let (b, g) = self.rep_of[c];
                let b = b as usize;
                if !allowed[b] {
                    continue;
                }
                let sb = self.orbit_size[b] as f64;
                m[(index[b], ia)] += hc * phase(g as usize) * (sa / sb).sqrt();
            }
        }
        m
    }
}

/// All eigenvalues of `H`, ascending; periodic volumes are diagonalized sector by sector.
pub fn full_spectrum(sys: &System) -> Result<Vec<f64>> {
    let h = sys.hamiltonian()?;
    if sys.volume().boundary() != Boundary::Periodic {
        return Ok(dense_spectrum(&h)?.0);
    }
    let sectors = MomentumSectors::new(sys)?;
    let mut vals: Vec<f64> = sectors
        .momenta()
        .iter()
        .flat_map(|p| linalg::eigh(&sectors.block(&h, p)).0)
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

#[derive(Clone, Debug)]
pub struct BandPoint {
    pub p: Vec<f64>,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct Band {
    pub ground_energy: f64,
    pub points: Vec<BandPoint>,
    /// Number of eigenvalues of `H - E_0` inside the window, all sectors.
    pub count_in_window: usize,
}

/// Lowest excitation energy per momentum inside `window` (relative to the ground energy).
pub fn momentum_band(sys: &System, window: (f64, f64)) -> Result<Band> {
    let sectors = MomentumSectors::new(sys)?;
    let h = sys.hamiltonian()?;
    let momenta = sectors.momenta();
    let spectra: Vec<Vec<f64>> = momenta
        .iter()
        .map(|p| linalg::eigh(&sectors.block(&h, p)).0)
        .collect();
    let e0 = spectra
        .iter()
        .filter_map(|s| s.first().copied())
        .fold(f64::INFINITY, f64::min);
    let mut points = Vec::new();
    let mut count = 0;
    for (p, spec) in momenta.iter().zip(&spectra) {
        let inside: Vec<f64> = spec
            .iter()
            .map(|e| e - e0)
            .filter(|&e| e >= window.0 && e <= window.1)
            .collect();
        count += inside.len();
        if let Some(&e) = inside.first() {
            points.push(BandPoint { p: p.clone(), energy: e });
        }
    }
    if points.is_empty() {
        return Err(Error::Config(format!("no eigenvalues in the window [{}, {}]", window.0, window.1)));
    }
    Ok(Band { ground_energy: e0, points, count_in_window: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Volume;
    use crate::model::Model;

    fn ring(lambda: f64, n: usize) -> System {
        System::new(&Model::tfi(lambda).unwrap(), &Volume::chain(n, Boundary::Periodic).unwrap()).unwrap()
    }

    fn open(lambda: f64, n: usize) -> System {
        System::new(&Model::tfi(lambda).unwrap(), &Volume::chain(n, Boundary::Open).unwrap()).unwrap()
    }

    #[test]
    fn free_spectrum_counts_excitations() {
        let h = open(0.0, 3).hamiltonian().unwrap();
        let (vals, _) = dense_spectrum(&h).unwrap();
        assert_eq!(vals, vec![0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let h = open(0.1, 8).hamiltonian().unwrap();
        let (vals, _) = dense_spectrum(&h).unwrap();
        let pairs = extremal_eigs(&h, 3, &LanczosOptions::default()).unwrap();
        for (p, v) in pairs.iter().zip(&vals) {
            assert!((p.value - v).abs() < 1e-9, "{} vs {}", p.value, v);
            assert!(p.residual <= 1e-9);
        }
    }

    #[test]
    fn lanczos_free_ground_state_is_vacuum() {
        let h = open(0.0, 8).hamiltonian().unwrap();
        let p = &extremal_eigs(&h, 1, &LanczosOptions::default()).unwrap()[0];
        assert!(p.value.abs() < 1e-12);
        assert!((p.vector[0].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sector_spectra_reassemble_full_spectrum() {
        let sys = ring(0.1, 6);
        let h = sys.hamiltonian().unwrap();
        let (full, _) = dense_spectrum(&h).unwrap();
        let sectors = MomentumSectors::new(&sys).unwrap();
        let mut all: Vec<f64> = sectors
            .momenta()
            .iter()
            .flat_map(|p| linalg::eigh(&sectors.block(&h, p)).0)
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all.len(), full.len());
        for (a, b) in all.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn band_matches_closed_form() {
        let lambda = 0.1;
        let sys = ring(lambda, 10);
        let band = momentum_band(&sys, (1.0 - 2.5 * lambda, 1.0 + 2.5 * lambda)).unwrap();
        assert_eq!(band.points.len(), 10);
        assert_eq!(band.count_in_window, 10);
        for pt in &band.points {
            let p = pt.p[0];
            let exact = (1.0 + 4.0 * lambda * lambda - 4.0 * lambda * (2.0 * std::f64::consts::PI * p).cos()).sqrt();
            assert!((pt.energy - exact).abs() < 1e-6, "p = {p}: {} vs {exact}", pt.energy);
        }
    }

    #[test]
    fn chebyshev_matches_dense_exponential() {
        let h = open(0.1, 8).hamiltonian().unwrap();
        let v: Vec<C64> = (0..256).map(|i| C64::new((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos())).collect();
        let nv = linalg::norm(&v);
        let v: Vec<C64> = v.iter().map(|x| x / nv).collect();
        for t in [0.0, 0.7, 5.0, -3.0] {
            let a = evolve_reference(&h, &v, t).unwrap();
            let b = evolve_dense(&h, &v, t).unwrap();
            let err = linalg::norm(&linalg::sub(&a, &b));
            assert!(err < 1e-8, "t = {t}: {err}");
            assert!((linalg::norm(&a) - 1.0).abs() < 1e-9);
        }
    }
}
