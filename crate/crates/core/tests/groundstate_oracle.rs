use qpert::cluster::Truncation;
use qpert::groundstate::{ground_vector, residual_norm, solve_ground_state, GroundStateOptions};
use qpert::lattice::{Boundary, Volume};
use qpert::linalg::{self, C64};
use qpert::model::{Model, System};
use qpert::oracle::{dense_spectrum, extremal_eigs, momentum_band, LanczosOptions};

fn tfi(lambda: f64, n: usize, b: Boundary) -> System {
    System::new(&Model::tfi(lambda).unwrap(), &Volume::chain(n, b).unwrap()).unwrap()
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    linalg::inner(a, b).norm_sqr() / (linalg::norm_sqr(a) * linalg::norm_sqr(b))
}

#[test]
fn solver_matches_dense_ground_state() {
    for (lambda, n, d_max, tol) in [(0.02, 8, 5, 1e-9), (0.05, 8, 5, 1e-9), (0.05, 8, 3, 1e-8), (0.1, 6, 6, 1e-7), (0.1, 8, 6, 1e-6)] {
        let sys = tfi(lambda, n, Boundary::Open);
        let opts = GroundStateOptions { truncation: Truncation { k_max: 4, d_max }, ..Default::default() };
        let sol = solve_ground_state(&sys, &opts).unwrap();
        let (vals, vecs) = dense_spectrum(&sys.hamiltonian().unwrap()).unwrap();
        let w: Vec<C64> = vecs.column(0).iter().copied().collect();
        let v = ground_vector(&sol.frame, &sys).unwrap();
        let de = (sol.energy() - vals[0]).abs();
        assert!(de < tol, "lambda {lambda} n {n} D {d_max}: dE {de:.3e}");
        assert!(1.0 - fidelity(&v, &w) < 1e-6);
    }
}

#[test]
fn solver_matches_lanczos_on_a_ring() {
    let sys = tfi(0.1, 10, Boundary::Periodic);
    let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
    let gs = extremal_eigs(&sys.hamiltonian().unwrap(), 1, &LanczosOptions::default()).unwrap();
    assert!((sol.energy() - gs[0].value).abs() < 1e-5);
    assert!(residual_norm(&sol.frame, &sys).unwrap() < 1e-4);
    // translation invariance of the converged energy density
    let small = solve_ground_state(&tfi(0.1, 8, Boundary::Periodic), &GroundStateOptions::default()).unwrap();
    assert!((sol.energy() / 10.0 - small.energy() / 8.0).abs() < 1e-6);
}

#[test]
fn band_energies_belong_to_the_spectrum() {
    let sys = tfi(0.15, 8, Boundary::Periodic);
    let (vals, _) = dense_spectrum(&sys.hamiltonian().unwrap()).unwrap();
    let band = momentum_band(&sys, (0.2, 2.0)).unwrap();
    assert_eq!(band.points.len(), 8);
    for q in &band.points {
        let e = q.energy + band.ground_energy;
        assert!(vals.iter().any(|v| (v - e).abs() < 1e-8), "{e}");
    }
}

#[test]
fn free_model_ground_state_is_the_vacuum() {
    let sys = tfi(0.0, 7, Boundary::Open);
    let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
    let v = ground_vector(&sol.frame, &sys).unwrap();
    assert_eq!(sol.energy(), 0.0);
    assert_eq!(v[0], C64::from(1.0));
    assert!(v[1..].iter().all(|z| *z == C64::from(0.0)));
}

#[test]
fn weighted_bound_eps_scales_like_sqrt_lambda() {
    // nearest-neighbour pairs alone force eps >= sqrt(2 lambda)
    for lambda in [0.02, 0.05, 0.1] {
        let sys = tfi(lambda, 8, Boundary::Open);
        let sol = solve_ground_state(&sys, &GroundStateOptions::default()).unwrap();
        let eps = qpert::groundstate::fit_eps(&sol.frame.gs, &sys).unwrap();
        assert!(eps >= (2.0 * lambda).sqrt());
        let ratio = eps / lambda.sqrt();
        assert!((1.4..1.7).contains(&ratio), "lambda {lambda}: eps {eps}");
    }
}
