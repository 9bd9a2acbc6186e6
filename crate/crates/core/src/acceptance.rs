//! The acceptance checks, one function per criterion, with thresholds pinned here.
//!
//! Criteria 5-8 share a periodic 12-site context at lambda = 0.1 and criteria 9-10 share an
//! 18-site scattering context; both are built on first use.

use std::cell::OnceCell;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::{creation_apply, creation_product, exp_apply, truncate_log, ClusterVector, Collection, FrameVector, Truncation};
use crate::error::Result;
use crate::groundstate::{fit_eps, ground_vector, solve_ground_state, GroundStateOptions, GroundStateSolution};
use crate::lattice::{Boundary, Volume};
use crate::linalg::{self, C64, ZERO};
use crate::model::{Model, System};
use crate::oneparticle::{hopping_amplitudes, Dispersion, Hoppings, OneParticleBasis, OneParticleOptions};
use crate::oracle::{dense_spectrum, extremal_eigs, momentum_band, LanczosOptions};
use crate::renorm::{spectrum_check, RenormOperator, DEFAULT_C2};
use crate::scatter::{cone_decay_check, leibniz_defect, FockVector, ScatterContext, Shape, WavePacket};
use crate::space::StateSpace;

pub const GS_ENERGY_TOL: f64 = 1e-3;
pub const GS_INFIDELITY_TOL: f64 = 1e-4;
pub const GS_SECONDS: f64 = 60.0;
pub const TRUNCATION_FACTOR: f64 = 3.0;
pub const EPS_FACTOR: f64 = 5.0;
pub const SPECTRUM_GAP_FACTOR: f64 = 3.0;
pub const DISPERSION_TOL: f64 = 1e-2;
pub const DISPERSION_SECONDS: f64 = 300.0;
pub const GRAM_BASE: f64 = 5.0;
pub const GRAM_MAX_DISTANCE: u32 = 4;
pub const HOPPING_R2: f64 = 0.95;
pub const CONE_FACTOR: f64 = 1.5;
pub const CONE_POWER: i32 = 4;
pub const CONE_GRID: usize = 4096;
pub const CONE_TIMES: [f64; 3] = [10.0, 20.0, 40.0];
pub const COOK_RATIO: f64 = 0.1;
pub const COOK_SECONDS: f64 = 900.0;
pub const ISOMETRY_TOL: f64 = 0.05;
pub const SCATTER_TIME: f64 = 15.0;
pub const ROUNDTRIP_TOL: f64 = 1e-12;
pub const LEIBNIZ_TOL: f64 = 1e-9;

/// Criteria known to fail for reasons outside the solver (see the README).
pub const KNOWN_RED: [u8; 3] = [3, 6, 8];

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{:>2} {} {:<24} {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn tfi(lambda: f64, n: usize, boundary: Boundary) -> Result<System> {
    System::new(&Model::tfi(lambda)?, &Volume::chain(n, boundary)?)
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    linalg::inner(a, b).norm_sqr() / (linalg::norm_sqr(a) * linalg::norm_sqr(b))
}

fn ed_ground(sys: &System) -> Result<(f64, Vec<C64>)> {
    let (vals, vecs) = dense_spectrum(&sys.hamiltonian()?)?;
    Ok((vals[0], vecs.column(0).iter().copied().collect()))
}

fn solve(sys: &System, k_max: usize, d_max: u32) -> Result<GroundStateSolution> {
    let opts = GroundStateOptions { truncation: Truncation { k_max, d_max }, ..Default::default() };
    solve_ground_state(sys, &opts)
}

fn closed_form(lambda: f64, p: f64) -> f64 {
    (1.0 + 4.0 * lambda * lambda - 4.0 * lambda * (2.0 * std::f64::consts::PI * p).cos()).sqrt()
}

/// Perturbative one-particle data on a periodic chain.
pub struct BandContext {
    pub sys: System,
    pub solution: GroundStateSolution,
    pub basis: OneParticleBasis,
    pub hoppings: Hoppings,
    pub dispersion: Dispersion,
    pub seconds: f64,
}

impl BandContext {
    pub fn build(lambda: f64, n: usize) -> Result<Self> {
        let start = Instant::now();
        let sys = tfi(lambda, n, Boundary::Periodic)?;
        let solution = solve_ground_state(&sys, &GroundStateOptions::default())?;
        let op = RenormOperator::new(&sys, &solution.frame);
        let basis = OneParticleBasis::build(&op, &OneParticleOptions::default())?;
        let hoppings = hopping_amplitudes(&basis, &op)?;
        let dispersion = Dispersion::from_hoppings(&hoppings);
        drop(op);
        Ok(BandContext { sys, solution, basis, hoppings, dispersion, seconds: start.elapsed().as_secs_f64() })
    }
}

pub struct ScatterScenario {
    pub ctx: ScatterContext,
    pub left: WavePacket,
    pub right: WavePacket,
    pub seconds: f64,
}

pub const SCATTER_SITES: usize = 18;
pub const SCATTER_LAMBDA: f64 = 0.1;

impl ScatterScenario {
    /// Two packets at momenta 1/4 and 3/4 (opposite velocities), both starting at the origin.
    pub fn build() -> Result<Self> {
        let start = Instant::now();
        let band = BandContext::build(SCATTER_LAMBDA, SCATTER_SITES)?;
        let energy = band.solution.energy();
        let ctx = ScatterContext::new(&band.sys, band.basis, band.dispersion, energy)?;
        let shape = Shape::RaisedCosine { power: 1 };
        let left = WavePacket::new(SCATTER_SITES, 0.25, 0.25, shape, 0.0)?;
        let right = WavePacket::new(SCATTER_SITES, 0.75, 0.25, shape, 0.0)?;
        Ok(ScatterScenario { ctx, left, right, seconds: start.elapsed().as_secs_f64() })
    }

    pub fn pair(&self) -> FockVector {
        FockVector::product(vec![self.left.clone(), self.right.clone()])
    }
}

/// Lazily built shared contexts.
#[derive(Default)]
pub struct Contexts {
    band: OnceCell<std::result::Result<BandContext, String>>,
    scatter: OnceCell<std::result::Result<ScatterScenario, String>>,
}

impl Contexts {
    pub fn band(&self) -> std::result::Result<&BandContext, String> {
        self.band
            .get_or_init(|| BandContext::build(0.1, 12).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn scatter(&self) -> std::result::Result<&ScatterScenario, String> {
        self.scatter
            .get_or_init(|| ScatterScenario::build().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }
}

type Check = (bool, String);

fn run(id: u8, name: &'static str, f: impl FnOnce() -> std::result::Result<Check, String>) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(c) => c,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn ground_state_oracle() -> Outcome {
    run(1, "ground-state oracle", || {
        let start = Instant::now();
        let sys = tfi(0.05, 8, Boundary::Open).map_err(err)?;
        let sol = solve(&sys, 4, 5).map_err(err)?;
        let v = ground_vector(&sol.frame, &sys).map_err(err)?;
        let secs = start.elapsed().as_secs_f64();
        let (e, w) = ed_ground(&sys).map_err(err)?;
        let de = (sol.energy() - e).abs();
        let infid = 1.0 - fidelity(&v, &w);
        Ok((
            de <= GS_ENERGY_TOL && infid <= GS_INFIDELITY_TOL && secs <= GS_SECONDS,
            format!("|dE| = {de:.2e}, 1 - fidelity = {infid:.2e}, solver {secs:.2} s"),
        ))
    })
}

pub fn truncation_convergence() -> Outcome {
    run(2, "truncation convergence", || {
        let sys = tfi(0.05, 8, Boundary::Open).map_err(err)?;
        let (e, _) = ed_ground(&sys).map_err(err)?;
        let e3 = (solve(&sys, 4, 3).map_err(err)?.energy() - e).abs();
        let e5 = (solve(&sys, 4, 5).map_err(err)?.energy() - e).abs();
        let factor = e3 / e5;
        Ok((factor >= TRUNCATION_FACTOR, format!("error D=3 {e3:.2e}, D=5 {e5:.2e}, factor {factor:.1}")))
    })
}

pub fn weighted_certificate() -> Outcome {
    run(3, "weighted-bound certificate", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for lambda in [0.02, 0.05, 0.1] {
            let sys = tfi(lambda, 8, Boundary::Open).map_err(err)?;
            let sol = solve_ground_state(&sys, &GroundStateOptions::default()).map_err(err)?;
            let eps = fit_eps(&sol.frame.gs, &sys);
            let bound = EPS_FACTOR * lambda;
            ok &= eps.is_some_and(|x| x <= bound);
            parts.push(match eps {
                Some(x) => format!("lambda {lambda}: eps {x:.3} (<= {bound:.2})"),
                None => format!("lambda {lambda}: no eps < 1"),
            });
        }
        Ok((ok, parts.join("; ")))
    })
}

pub fn spectral_localization() -> Outcome {
    run(4, "spectral localization", || {
        let mut worst_c2: f64 = 0.0;
        let mut ok = true;
        let mut gaps = Vec::new();
        for boundary in [Boundary::Open, Boundary::Periodic] {
            for n in [6, 8] {
                for lambda in [0.02, 0.05, 0.1] {
                    let sys = tfi(lambda, n, boundary).map_err(err)?;
                    let chk = spectrum_check(&sys).map_err(err)?;
                    worst_c2 = worst_c2.max(chk.required_c2);
                    let floor = 1.0 - SPECTRUM_GAP_FACTOR * lambda;
                    ok &= chk.passes(DEFAULT_C2) && chk.gap >= floor;
                    if n == 8 && lambda == 0.1 {
                        gaps.push(format!("{boundary:?} gap {:.4}", chk.gap));
                    }
                }
            }
        }
        Ok((ok, format!("required c2 {worst_c2:.3} (<= {DEFAULT_C2}), lambda 0.1 N 8: {}", gaps.join(", "))))
    })
}

pub fn dispersion(ctx: &Contexts) -> Outcome {
    run(5, "dispersion", || {
        let b = ctx.band()?;
        let lambda = b.sys.lambda();
        let pts = b.dispersion.sample(600).map_err(err)?;
        let closed = pts.iter().map(|q| (q.m - closed_form(lambda, q.p[0])).abs()).fold(0.0, f64::max);
        let m0 = b.dispersion.m(&[0.0]);
        let mh = b.dispersion.m(&[0.5]);
        let band = momentum_band(&b.sys, (0.5, 1.5)).map_err(err)?;
        let ed = band
            .points
            .iter()
            .map(|q| (b.dispersion.m(&q.p) - q.energy).abs())
            .fold(0.0, f64::max);
        let ends = (m0 - 0.8).abs().max((mh - 1.2).abs());
        Ok((
            closed <= DISPERSION_TOL && ends <= DISPERSION_TOL && ed <= DISPERSION_TOL && b.seconds <= DISPERSION_SECONDS,
            format!(
                "closed form {closed:.2e}, m(0) {m0:.5}, m(1/2) {mh:.5}, band vs ED {ed:.2e} ({} momenta), build {:.1} s",
                band.points.len(),
                b.seconds
            ),
        ))
    })
}

pub fn gram_decay(ctx: &Contexts) -> Outcome {
    run(6, "Gram decay", || {
        let b = ctx.band()?;
        let lambda = b.sys.lambda();
        let g = b.basis.gram_decay(&b.sys, GRAM_MAX_DISTANCE);
        let monotone = g.windows(2).skip(1).all(|w| w[1] <= w[0]);
        let bounded = g.iter().enumerate().skip(1).all(|(d, &v)| v <= (GRAM_BASE * lambda).powi(d as i32));
        let shown: Vec<String> = g.iter().enumerate().skip(1).map(|(d, v)| format!("d{d} {v:.2e}")).collect();
        Ok((
            monotone && bounded,
            format!("{}; monotone {monotone}, (5 lambda)^d bound {bounded}", shown.join(", ")),
        ))
    })
}

pub fn hopping_decay(ctx: &Contexts) -> Outcome {
    run(7, "hopping decay", || {
        let b = ctx.band()?;
        let fit = b.hoppings.decay_fit(b.sys.n_sites() as u32 / 2);
        Ok((
            fit.slope < 0.0 && fit.r2 >= HOPPING_R2,
            format!("slope {:.3}, R2 {:.4} over {} offsets", fit.slope, fit.r2, fit.points),
        ))
    })
}

pub fn velocity_cone(ctx: &Contexts) -> Outcome {
    run(8, "velocity cone", || {
        let b = ctx.band()?;
        let f = WavePacket::new(CONE_GRID, 0.25, 0.05, Shape::Bump, 0.0).map_err(err)?;
        let rep = cone_decay_check(&f, &b.dispersion, CONE_FACTOR, &CONE_TIMES, CONE_POWER, 1e-8).map_err(err)?;
        let rows: Vec<String> = rep.rows.iter().map(|r| format!("t {} {:.2e}", r.t, r.weighted)).collect();
        Ok((
            rep.passed,
            format!("cone [{:.4}, {:.4}], c {:.2e}; {}", rep.cone.0, rep.cone.1, rep.c, rows.join(", ")),
        ))
    })
}

pub fn cook_decay(ctx: &Contexts) -> Outcome {
    run(9, "Cook decay", || {
        let start = Instant::now();
        let s = ctx.scatter()?;
        let pair = s.pair();
        let c0 = s.ctx.cook_integrand(&pair, 0.0).map_err(err)?;
        let c1 = s.ctx.cook_integrand(&pair, SCATTER_TIME).map_err(err)?;
        let secs = start.elapsed().as_secs_f64();
        Ok((
            c1 <= COOK_RATIO * c0 && secs <= COOK_SECONDS,
            format!("t=0 {c0:.4e}, t={SCATTER_TIME} {c1:.4e}, ratio {:.3}, {secs:.1} s", c1 / c0),
        ))
    })
}

pub fn isometry(ctx: &Contexts) -> Outcome {
    run(10, "isometry", || {
        let s = ctx.scatter()?;
        let pair = s.pair();
        let same = s.ctx.isometry_scan(&pair, &pair, &[SCATTER_TIME]).map_err(err)?[0];
        let single = FockVector::product(vec![s.left.clone()]);
        let mixed = s.ctx.isometry_scan(&pair, &single, &[SCATTER_TIME]).map_err(err)?[0];
        let cross = mixed.overlap.norm();
        Ok((
            same.gap <= ISOMETRY_TOL && cross <= ISOMETRY_TOL,
            format!("|<Tf,Tf> - target| {:.2e} (target {:.4}), |<T(2), T(1)>| {cross:.2e}", same.gap, same.target.re),
        ))
    })
}

fn random_amps(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<C64> {
    (0..len).map(|_| C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect()
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    random_amps(rng, len, 1.0)
}

/// `exp` then `log` on a random collection over every support of a 5-site, 3-level chain.
fn roundtrip_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, n) = (3, 5);
    let e = d - 1;
    let space = StateSpace::new(d, n)?;
    let vol = Volume::chain(n, Boundary::Open)?;
    let mut coll = Collection::new();
    for mask in 1u32..(1 << n) {
        let sites: Vec<usize> = (0..n).filter(|&s| mask >> s & 1 == 1).collect();
        let amps = random_amps(&mut rng, e.pow(sites.len() as u32), 0.5);
        let u = ClusterVector::new(&sites, &amps, e)?;
        coll.add(u.support(), u.amps(), C64::from(1.0));
    }
    let v = exp_apply(&coll, &space)?;
    let back = truncate_log(&v, &space, &Truncation::unbounded(), &vol)?;
    let mut diff = back.clone();
    diff.axpy(C64::from(-1.0), &coll);
    Ok(diff.triple_norm() / coll.triple_norm())
}

fn creation_checks(seed: u64) -> Result<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, n) = (3, 6);
    let e = d - 1;
    let space = StateSpace::new(d, n)?;
    let x = random_vector(&mut rng, space.dim());
    let u = ClusterVector::new(&[0, 2], &random_amps(&mut rng, 4, 1.0), e)?;
    let v = ClusterVector::new(&[3, 5], &random_amps(&mut rng, 4, 1.0), e)?;
    let w = ClusterVector::new(&[1, 2], &random_amps(&mut rng, 4, 1.0), e)?;
    let uv = creation_apply(&u, &creation_apply(&v, &x, &space)?, &space)?;
    let vu = creation_apply(&v, &creation_apply(&u, &x, &space)?, &space)?;
    let comm = linalg::norm(&linalg::sub(&uv, &vu)) / linalg::norm(&uv);
    let uw = creation_apply(&u, &creation_apply(&w, &x, &space)?, &space)?;
    let wu = creation_apply(&w, &creation_apply(&u, &x, &space)?, &space)?;
    let annihilated = uw.iter().chain(&wu).all(|&z| z == ZERO) && creation_product(&u, &w, e).is_none();
    Ok((comm, annihilated))
}

/// Leibniz defects for far-apart and for adjacent supports on a 12-site ring.
pub fn leibniz_pair(seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = tfi(0.1, 12, Boundary::Periodic)?;
    let space = sys.space()?;
    let h = sys.hamiltonian()?;
    let opts = LanczosOptions { tol: 1e-12, seed, ..Default::default() };
    let gs = extremal_eigs(&h, 1, &opts)?.remove(0);
    let e = sys.e();
    let cv = |sites: &[usize], rng: &mut ChaCha8Rng| -> Result<FrameVector> {
        let amps = random_amps(rng, e.pow(sites.len() as u32), 1.0);
        Ok(FrameVector::single(&ClusterVector::new(sites, &amps, e)?))
    };
    let u = cv(&[0, 1], &mut rng)?;
    let far = cv(&[5, 6], &mut rng)?;
    let near = cv(&[2, 3], &mut rng)?;
    let d_far = leibniz_defect(&u, &far, &h, gs.value, &gs.vector, &space);
    let d_near = leibniz_defect(&u, &near, &h, gs.value, &gs.vector, &space);
    Ok((d_far, d_near))
}

pub fn algebra_exactness() -> Outcome {
    run(11, "algebra exactness", || {
        let rt = (0..3).map(roundtrip_error).collect::<Result<Vec<_>>>().map_err(err)?;
        let rt = rt.into_iter().fold(0.0, f64::max);
        let (comm, annihilated) = creation_checks(11).map_err(err)?;
        let (far, near) = leibniz_pair(7).map_err(err)?;
        Ok((
            rt <= ROUNDTRIP_TOL && comm <= 1e-14 && annihilated && far <= LEIBNIZ_TOL && near > 1e-3,
            format!(
                "roundtrip {rt:.1e}, commutator {comm:.1e}, overlap annihilation {annihilated}, Leibniz far {far:.1e} (adjacent control {near:.2e})"
            ),
        ))
    })
}

pub fn run_all() -> Vec<Outcome> {
    run_selected(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11])
}

pub fn run_selected(ids: &[u8]) -> Vec<Outcome> {
    let ctx = Contexts::default();
    ids.iter()
        .filter_map(|&id| {
            Some(match id {
                1 => ground_state_oracle(),
                2 => truncation_convergence(),
                3 => weighted_certificate(),
                4 => spectral_localization(),
                5 => dispersion(&ctx),
                6 => gram_decay(&ctx),
                7 => hopping_decay(&ctx),
                8 => velocity_cone(&ctx),
                9 => cook_decay(&ctx),
                10 => isometry(&ctx),
                11 => algebra_exactness(),
                _ => return None,
            })
        })
        .collect()
}
