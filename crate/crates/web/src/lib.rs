//! WebAssembly bindings for the demo page in `www/`.
//!
//! Everything runs on a transverse-field Ising ring small enough to answer in well under a
//! second in the browser. The plain functions are what the bindings call; they are also what
//! the native tests exercise.

use qpert::groundstate::{solve_ground_state, GroundStateOptions};
use qpert::lattice::{Boundary, Volume};
use qpert::model::{Model, System};
use qpert::oneparticle::{hopping_amplitudes, Dispersion, OneParticleBasis, OneParticleOptions};
use qpert::oracle::ground_energy as ed_ground_energy;
use qpert::renorm::RenormOperator;
use qpert::scatter::{Shape, WavePacket};
use wasm_bindgen::prelude::*;

/// Largest ring the page offers; the one-particle construction grows quickly with it.
pub const MAX_SITES: usize = 10;

fn ring(lambda: f64, n: usize) -> Result<System, String> {
    if !(3..=MAX_SITES).contains(&n) {
        return Err(format!("ring size must be between 3 and {MAX_SITES}"));
    }
    let model = Model::tfi(lambda).map_err(|e| e.to_string())?;
    let vol = Volume::chain(n, Boundary::Periodic).map_err(|e| e.to_string())?;
    System::new(&model, &vol).map_err(|e| e.to_string())
}

/// The perturbative dispersion of the TFI ring, plus the hopping magnitudes it came from.
pub fn perturbative_dispersion(lambda: f64, n: usize) -> Result<(Dispersion, Vec<f64>), String> {
    let sys = ring(lambda, n)?;
    let sol = solve_ground_state(&sys, &GroundStateOptions::default()).map_err(|e| e.to_string())?;
    let op = RenormOperator::new(&sys, &sol.frame);
    let basis = OneParticleBasis::build(&op, &OneParticleOptions::default()).map_err(|e| e.to_string())?;
    let hop = hopping_amplitudes(&basis, &op).map_err(|e| e.to_string())?;
    let mut mags = vec![0.0; n / 2 + 1];
    for (y, t) in hop.offsets.iter().zip(&hop.values) {
        let d = y[0].unsigned_abs() as usize;
        mags[d] = f64::max(mags[d], t.norm());
    }
    Ok((Dispersion::from_hoppings(&hop), mags))
}

pub fn closed_form(lambda: f64, p: f64) -> f64 {
    (1.0 + 4.0 * lambda * lambda - 4.0 * lambda * (2.0 * std::f64::consts::PI * p).cos()).sqrt()
}

#[wasm_bindgen]
pub struct Curve {
    p: Vec<f64>,
    m: Vec<f64>,
    exact: Vec<f64>,
    hoppings: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn p(&self) -> Vec<f64> {
        self.p.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn m(&self) -> Vec<f64> {
        self.m.clone()
    }

    /// The Jordan-Wigner band `sqrt(1 + 4 lambda^2 - 4 lambda cos 2 pi p)` for comparison.
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    /// `max |t(y)|` at each distance `|y| = 0, 1, ...`.
    #[wasm_bindgen(getter)]
    pub fn hoppings(&self) -> Vec<f64> {
        self.hoppings.clone()
    }
}

/// Dispersion sampled at `samples` momenta in [0, 1).
#[wasm_bindgen]
pub fn dispersion_curve(lambda: f64, sites: usize, samples: usize) -> Result<Curve, JsError> {
    let (disp, hoppings) = perturbative_dispersion(lambda, sites).map_err(|e| JsError::new(&e))?;
    let samples = samples.clamp(2, 2000);
    let p: Vec<f64> = (0..samples).map(|k| k as f64 / samples as f64).collect();
    let m = p.iter().map(|&q| disp.m(&[q])).collect();
    let exact = p.iter().map(|&q| closed_form(lambda, q)).collect();
    Ok(Curve { p, m, exact, hoppings })
}

#[wasm_bindgen]
pub struct Energies {
    pub solver: f64,
    pub exact: f64,
    pub iterations: usize,
    pub clusters: usize,
}

/// Ground energy from the cluster solver and from exact diagonalization.
pub fn energies(lambda: f64, sites: usize) -> Result<Energies, String> {
    let sys = ring(lambda, sites)?;
    let sol = solve_ground_state(&sys, &GroundStateOptions::default()).map_err(|e| e.to_string())?;
    let h = sys.hamiltonian().map_err(|e| e.to_string())?;
    let exact = ed_ground_energy(&h).map_err(|e| e.to_string())?;
    Ok(Energies { solver: sol.energy(), exact, iterations: sol.iterations, clusters: sol.frame.gs.len() })
}

#[wasm_bindgen]
pub fn ground_energies(lambda: f64, sites: usize) -> Result<Energies, JsError> {
    energies(lambda, sites).map_err(|e| JsError::new(&e))
}

/// A packet moving under the perturbative dispersion of a small ring.
#[wasm_bindgen]
pub struct Packet {
    packet: WavePacket,
    disp: Dispersion,
}

#[wasm_bindgen]
impl Packet {
    /// `grid` momentum points (and lattice sites) for the packet; the dispersion comes from a
    /// ring of `sites` sites.
    #[wasm_bindgen(constructor)]
    pub fn new(lambda: f64, sites: usize, grid: usize, center: f64, half_width: f64) -> Result<Packet, JsError> {
        let (disp, _) = perturbative_dispersion(lambda, sites).map_err(|e| JsError::new(&e))?;
        let packet = WavePacket::new(grid.clamp(16, 1024), center, half_width, Shape::Bump, 0.0)
            .map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Packet { packet, disp })
    }

    /// Lattice positions matching [`Packet::density`].
    pub fn positions(&self) -> Vec<f64> {
        self.packet.lattice_amplitudes().iter().map(|(x, _)| *x as f64).collect()
    }

    /// `|k_x(t)|^2` at every position.
    pub fn density(&self, t: f64) -> Vec<f64> {
        self.packet.evolved(t, &self.disp).lattice_amplitudes().iter().map(|(_, k)| k.norm_sqr()).collect()
    }

    /// Group velocity at the packet's central momentum, in sites per unit time.
    pub fn velocity(&self, p: f64) -> f64 {
        self.disp.velocity(&[p])[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_tracks_the_closed_form() {
        let (disp, hops) = perturbative_dispersion(0.1, 8).unwrap();
        for k in 0..16 {
            let p = k as f64 / 16.0;
            assert!((disp.m(&[p]) - closed_form(0.1, p)).abs() < 1e-3);
        }
        assert!(hops[1] > hops[2] && hops[2] > hops[3]);
    }

    #[test]
    fn energies_agree() {
        let e = energies(0.1, 8).unwrap();
        assert!((e.solver - e.exact).abs() < 1e-6);
        assert!(energies(0.1, 40).is_err());
    }

    #[test]
    fn packet_moves_left_at_quarter_momentum() {
        let (disp, _) = perturbative_dispersion(0.1, 8).unwrap();
        let packet = WavePacket::new(256, 0.25, 0.1, Shape::Bump, 0.0).unwrap();
        let mean = |t: f64| -> f64 {
            packet
                .evolved(t, &disp)
                .lattice_amplitudes()
                .iter()
                .map(|(x, k)| *x as f64 * k.norm_sqr())
                .sum()
        };
        let drift = mean(50.0) - mean(0.0);
        assert!((drift / 50.0 - disp.velocity(&[0.25])[0]).abs() < 0.01, "{drift}");
        assert!(drift < 0.0);
    }
}
