//! One-particle subspace: projected seeds `P w_x^ Omega~`, their Gram matrix, the orthonormal
//! family `xi_x`, hopping amplitudes and the dispersion `m(p)`.
//!
//! Inner products of frame vectors are taken exactly by reconstructing them in the full space
//! and dividing by `|Omega~|^2`. Shifts act on the torus side as multiplication by
//! `exp(2 pi i <x, p>)`, so a packet moves with velocity `-grad m / (2 pi)` under `exp(-itH)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::cluster::{exp_apply, exp_apply_in_place, reconstruct, ClusterVector, Collection, FrameVector, PRUNE};
use crate::error::{Error, Result};
use crate::groundstate::GroundFrame;
use crate::lattice::Boundary;
use crate::linalg::{self, C64, ONE, ZERO};
use crate::model::System;
use crate::renorm::{spectral_projector_apply, Contour, RenormOperator, ResolventOptions};
use crate::space::StateSpace;

/// Full-space realization of frame vectors, normalized against `Omega~`.
pub struct FrameMetric {
    space: StateSpace,
    gs: Collection,
    inv_norm: f64,
}

impl FrameMetric {
    pub fn new(sys: &System, frame: &GroundFrame) -> Result<Self> {
        let space = sys.space()?;
        let omega = exp_apply(&frame.gs, &space)?;
        let inv_norm = 1.0 / linalg::norm(&omega);
        Ok(FrameMetric { space, gs: frame.gs.clone(), inv_norm })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// `sum_I u_I^ Omega~ / |Omega~|`.
    pub fn vector(&self, v: &FrameVector) -> Result<Vec<C64>> {
        let mut out = reconstruct(v, &self.gs, &self.space)?;
        linalg::scale(C64::from(self.inv_norm), &mut out);
        Ok(out)
    }

    /// `exp(X) v / |Omega~|` for a vector written over `Omega_0`.
    pub fn lift(&self, mut v: Vec<C64>) -> Result<Vec<C64>> {
        exp_apply_in_place(&self.gs, ONE, &mut v, &self.space)?;
        linalg::scale(C64::from(self.inv_norm), &mut v);
        Ok(v)
    }

    pub fn inner(&self, a: &FrameVector, b: &FrameVector) -> Result<C64> {
        Ok(linalg::inner(&self.vector(a)?, &self.vector(b)?))
    }
}

#[derive(Clone, Debug)]
pub struct OneParticleOptions {
    /// Defaults to [`Contour::around_mu`].
    pub contour: Option<Contour>,
    pub resolvent: ResolventOptions,
    /// Minimal distance of window sites from an open boundary; defaults to `D_max + range`.
    pub margin: Option<u32>,
}

impl Default for OneParticleOptions {
    fn default() -> Self {
        OneParticleOptions {
            contour: None,
            resolvent: ResolventOptions { k_max: 80, ..Default::default() },
            margin: None,
        }
    }
}

impl OneParticleOptions {
    pub fn contour_for(&self, sys: &System) -> Contour {
        self.contour.unwrap_or_else(|| Contour::around_mu(sys))
    }
}

/// `P w_x^ Omega~` in frame coordinates.
pub fn project_w(x: usize, op: &RenormOperator, opts: &OneParticleOptions) -> Result<FrameVector> {
    let sys = op.system();
    let seed = FrameVector::single(&ClusterVector::new(&[x], &sys.w_frame(), sys.e())?);
    spectral_projector_apply(op, &seed, &opts.contour_for(sys), &opts.resolvent)
}

pub struct OneParticleBasis {
    pub window: Vec<usize>,
    /// Position of the reference site `x_0` inside `window`.
    pub center: usize,
    /// Displacement of each window site from `x_0`.
    pub offsets: Vec<Vec<i64>>,
    pub projected: Vec<FrameVector>,
    pub gram: DMatrix<C64>,
    pub gram_inv_sqrt: DMatrix<C64>,
    pub xi: Vec<FrameVector>,
    /// `xi` realized in the full space.
    pub xi_full: Vec<Vec<C64>>,
    pub metric: FrameMetric,
}

impl OneParticleBasis {
    pub fn build(op: &RenormOperator, opts: &OneParticleOptions) -> Result<Self> {
        let sys = op.system();
        let vol = sys.volume();
        let periodic = vol.boundary() == Boundary::Periodic;
        let (window, center) = if periodic {
            ((0..vol.len()).collect::<Vec<_>>(), 0)
        } else {
            let margin = opts.margin.unwrap_or(op.truncation().d_max.min(64) + sys.range() as u32);
            let w: Vec<usize> = (0..vol.len()).filter(|&x| vol.boundary_distance(x) >= margin).collect();
            if w.is_empty() {
                return Err(Error::Config(format!("no site is {margin} sites away from the boundary")));
            }
            let c = w.len() / 2;
            (w, c)
        };
        let x0 = window[center];
        let offsets: Vec<Vec<i64>> = window.iter().map(|&x| vol.displacement(x0, x)).collect();
        let projected: Vec<FrameVector> = if periodic {
            // one projection, the rest by translation
            let p0 = project_w(0, op, opts)?;
            window
                .iter()
                .map(|&x| {
                    let coll = p0.coll.translated(vol.coords(x), vol, sys.e()).expect("periodic shift");
                    FrameVector { scalar: p0.scalar, coll }
                })
                .collect()
        } else {
            window.iter().map(|&x| project_w(x, op, opts)).collect::<Result<_>>()?
        };
        let metric = FrameMetric::new(sys, op.frame())?;
        let full: Vec<Vec<C64>> = projected.iter().map(|p| metric.vector(p)).collect::<Result<_>>()?;
        let n = window.len();
        let gram = DMatrix::from_fn(n, n, |i, j| linalg::inner(&full[i], &full[j]));
        let a = linalg::inv_sqrt_hermitian(&gram)?;
        let mut xi = Vec::with_capacity(n);
        let mut xi_full = Vec::with_capacity(n);
        for i in 0..n {
            let mut f = FrameVector::default();
            let mut v = vec![ZERO; metric.space().dim()];
            for j in 0..n {
                f.axpy(a[(i, j)], &projected[j]);
                linalg::axpy(a[(i, j)], &full[j], &mut v);
            }
            f.coll.prune(PRUNE);
            xi.push(f);
            xi_full.push(v);
        }
        Ok(OneParticleBasis { window, center, offsets, projected, gram, gram_inv_sqrt: a, xi, xi_full, metric })
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// `max |<xi_x, xi_y> - delta_xy|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let g = linalg::inner(&self.xi_full[i], &self.xi_full[j]);
                let want = if i == j { ONE } else { ZERO };
                worst = worst.max((g - want).norm());
            }
        }
        worst
    }

    /// `(|x - y|, |G_xy - delta_xy|)` for every window pair, with `|.|` the lattice distance.
    pub fn gram_profile(&self, sys: &System) -> Vec<(u32, f64)> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { ONE } else { ZERO };
                out.push((sys.volume().distance(self.window[i], self.window[j]), (self.gram[(i, j)] - want).norm()));
            }
        }
        out
    }

    /// Largest `|G_xy - delta_xy|` at each distance `0..=max`.
    pub fn gram_decay(&self, sys: &System, max: u32) -> Vec<f64> {
        let mut out = vec![0.0f64; max as usize + 1];
        for (d, v) in self.gram_profile(sys) {
            if d <= max {
                out[d as usize] = out[d as usize].max(v);
            }
        }
        out
    }

    /// Smallest eps with `|G_xy - delta_xy| <= eps^{|x-y|+1}` for all pairs.
    pub fn gram_eps(&self, sys: &System) -> f64 {
        self.gram_profile(sys)
            .into_iter()
            .map(|(d, v)| v.powf(1.0 / (d as f64 + 1.0)))
            .fold(0.0, f64::max)
    }

    /// `P w_x^ Omega~ - w_x^ Omega~`, the remainder of each projected seed.
    pub fn remainder(&self, i: usize, sys: &System) -> FrameVector {
        let mut r = self.projected[i].clone();
        let w = ClusterVector::new(&[self.window[i]], &sys.w_frame(), sys.e()).expect("site in volume");
        r.coll.add(w.support(), w.amps(), -ONE);
        r.coll.prune(PRUNE);
        r
    }
}

#[derive(Clone, Debug)]
pub struct Hoppings {
    pub offsets: Vec<Vec<i64>>,
    pub values: Vec<C64>,
    /// Periodic extent per axis (`None` on open volumes).
    pub extent: Option<Vec<usize>>,
}

/// `t(y) = <H~ xi_{x0 + y}, xi_{x0}>` for every window site.
pub fn hopping_amplitudes(basis: &OneParticleBasis, op: &RenormOperator) -> Result<Hoppings> {
    let reference = &basis.xi_full[basis.center];
    let mut values = Vec::with_capacity(basis.len());
    for xi in &basis.xi {
        let hx = basis.metric.vector(&op.apply(xi))?;
        values.push(linalg::inner(&hx, reference));
    }
    let vol = op.system().volume();
    let extent = (vol.boundary() == Boundary::Periodic).then(|| vol.extent().to_vec());
    Ok(Hoppings { offsets: basis.offsets.clone(), values, extent })
}

/// Fit of `ln |t(y)|` against `|y|` over `1 <= |y| <= max_dist`.
#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

impl Hoppings {
    pub fn get(&self, y: &[i64]) -> Option<C64> {
        self.offsets.iter().position(|o| o == y).map(|k| self.values[k])
    }

    /// `max |t(y) - conj t(-y)|` over offsets whose mirror is present.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (o, v) in self.offsets.iter().zip(&self.values) {
            let mirror: Vec<i64> = o.iter().map(|x| -x).collect();
            let mirror = match &self.extent {
                Some(ext) => wrap(&mirror, ext),
                None => mirror,
            };
            if let Some(m) = self.get(&mirror) {
                worst = worst.max((v - m.conj()).norm());
            }
        }
        worst
    }

    pub fn decay_fit(&self, max_dist: u32) -> DecayFit {
        let pts: Vec<(f64, f64)> = self
            .offsets
            .iter()
            .zip(&self.values)
            .filter_map(|(o, v)| {
                let d: u32 = o.iter().map(|x| x.unsigned_abs() as u32).sum();
                (d >= 1 && d <= max_dist && v.norm() > 0.0).then(|| (d as f64, v.norm().ln()))
            })
            .collect();
        let (slope, intercept, r2) = linalg::linear_fit(&pts);
        DecayFit { slope, intercept, r2, points: pts.len() }
    }
}

fn wrap(o: &[i64], ext: &[usize]) -> Vec<i64> {
    o.iter()
        .zip(ext)
        .map(|(&x, &l)| {
            let l = l as i64;
            let mut r = x.rem_euclid(l);
            if 2 * r > l {
                r -= l;
            }
            r
        })
        .collect()
}

/// `m(p) = sum_y t(y) exp(2 pi i <y, p>)` as a trigonometric polynomial.
#[derive(Clone, Debug)]
pub struct Dispersion {
    pub nu: usize,
    terms: Vec<(Vec<f64>, C64)>,
}

#[derive(Clone, Debug)]
pub struct DispersionPoint {
    pub p: Vec<f64>,
    pub m: f64,
    /// Group velocity `-grad m / (2 pi)` in sites per unit time.
    pub velocity: Vec<f64>,
}

/// Largest tolerated imaginary part of `m` on a grid.
pub const IMAG_TOL: f64 = 1e-8;

impl Dispersion {
    pub fn from_hoppings(h: &Hoppings) -> Self {
        let nu = h.offsets.first().map(|o| o.len()).unwrap_or(1);
        let mut terms = Vec::new();
        for (o, &t) in h.offsets.iter().zip(&h.values) {
            // an offset of exactly half the ring is shared between both images
            let mut images: Vec<Vec<f64>> = vec![Vec::new()];
            if let Some(ext) = &h.extent {
                for (a, &x) in o.iter().enumerate() {
                    let l = ext[a] as i64;
                    let both = l % 2 == 0 && x.abs() * 2 == l;
                    images = images
                        .into_iter()
                        .flat_map(|img| {
                            let mut v = vec![];
                            let mut a1 = img.clone();
                            a1.push(x as f64);
                            v.push(a1);
                            if both {
                                let mut a2 = img;
                                a2.push(-x as f64);
                                v.push(a2);
                            }
                            v
                        })
                        .collect();
                }
            } else {
                images = vec![o.iter().map(|&x| x as f64).collect()];
            }
            let w = C64::from(1.0 / images.len() as f64);
            for img in images {
                terms.push((img, t * w));
            }
        }
        Dispersion { nu, terms }
    }

    /// The constant dispersion `m = mu`.
    pub fn flat(nu: usize, mu: f64) -> Self {
        Dispersion { nu, terms: vec![(vec![0.0; nu], C64::from(mu))] }
    }

    pub fn eval_complex(&self, p: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|(y, t)| {
                let ph: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
                t * C64::from_polar(1.0, 2.0 * PI * ph)
            })
            .sum()
    }

    pub fn m(&self, p: &[f64]) -> f64 {
        self.eval_complex(p).re
    }

    pub fn velocity(&self, p: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.nu];
        for (y, t) in &self.terms {
            let ph: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
            let z = t * C64::from_polar(1.0, 2.0 * PI * ph) * C64::new(0.0, -1.0);
            for (k, yk) in y.iter().enumerate() {
                v[k] += (z * yk).re;
            }
        }
        v
    }

    /// Samples on `{0, 1/n, ..., (n-1)/n}^nu`; errors if the imaginary part exceeds [`IMAG_TOL`].
    pub fn sample(&self, n: usize) -> Result<Vec<DispersionPoint>> {
        let total = n.pow(self.nu as u32);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut t = idx;
            let mut p = vec![0.0; self.nu];
            for k in (0..self.nu).rev() {
                p[k] = (t % n) as f64 / n as f64;
                t /= n;
            }
            let m = self.eval_complex(&p);
            if m.im.abs() > IMAG_TOL {
                return Err(Error::NonHermitianHopping(m.im.abs()));
            }
            let velocity = self.velocity(&p);
            out.push(DispersionPoint { p, m: m.re, velocity });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct Expansion {
    pub coefficients: Vec<C64>,
    pub residual: f64,
}

/// Coefficients of `P u^ Omega~` in the `xi` basis by least squares.
pub fn expand_one_particle(
    u: &ClusterVector,
    basis: &OneParticleBasis,
    op: &RenormOperator,
    opts: &OneParticleOptions,
) -> Result<Expansion> {
    let sys = op.system();
    let pu = spectral_projector_apply(op, &FrameVector::single(u), &opts.contour_for(sys), &opts.resolvent)?;
    let target = basis.metric.vector(&pu)?;
    let n = basis.len();
    let g = DMatrix::from_fn(n, n, |i, j| linalg::inner(&basis.xi_full[j], &basis.xi_full[i]));
    let (vals, _) = linalg::eigh(&g);
    let cond = vals.last().copied().unwrap_or(1.0) / vals.first().copied().unwrap_or(1.0);
    if !(cond.is_finite() && cond > 0.0 && cond < 1e8) {
        return Err(Error::IllConditioned(cond));
    }
    let rhs = nalgebra::DVector::from_iterator(n, basis.xi_full.iter().map(|x| linalg::inner(&target, x)));
    let coeffs = g.lu().solve(&rhs).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let mut res = target;
    for (k, x) in coeffs.iter().zip(&basis.xi_full) {
        linalg::axpy(-k, x, &mut res);
    }
    Ok(Expansion { coefficients: coeffs.iter().copied().collect(), residual: linalg::norm(&res) })
}
