//! Single-site data, the perturbation template, and the finite-volume Hamiltonian.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Volume};
use crate::linalg::{self, SparseMatrix, C64, ONE, ZERO};
use crate::space::StateSpace;

/// Tolerance for the exact identities (h Omega = 0, Hermiticity, eigen-equations).
const EXACT_TOL: f64 = 1e-10;

/// Single-site Hamiltonian with its vacuum and the marked one-particle level.
#[derive(Clone, Debug)]
pub struct LocalSite {
    h: DMatrix<C64>,
    omega_index: usize,
    mu: f64,
    w: Vec<C64>,
}

impl LocalSite {
    /// `mu_index` selects the marked eigenvalue in the ascending spectrum of `h`.
    pub fn new(h: DMatrix<C64>, omega_index: usize, mu_index: usize) -> Result<Self> {
        check_square(&h, "local h")?;
        let d = h.nrows();
        if omega_index >= d || mu_index >= d {
            return Err(Error::InvalidModel(format!(
                "omega_index {omega_index} / mu_index {mu_index} out of range for d = {d}"
            )));
        }
        let defect = linalg::hermitian_defect(&h);
        if defect > EXACT_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let (vals, vecs) = linalg::eigh(&h);
        let mut w: Vec<C64> = vecs.column(mu_index).iter().copied().collect();
        fix_phase(&mut w);
        Ok(LocalSite { h, omega_index, mu: vals[mu_index], w })
    }

    /// Explicit eigenpair; nothing is checked beyond the shapes, see [`validate_model`].
    pub fn with_eigenpair(h: DMatrix<C64>, omega_index: usize, mu: f64, w: Vec<C64>) -> Result<Self> {
        check_square(&h, "local h")?;
        if w.len() != h.nrows() || omega_index >= h.nrows() {
            return Err(Error::Dimension(format!(
                "w has {} components and omega_index {omega_index}, but d = {}",
                w.len(),
                h.nrows()
            )));
        }
        Ok(LocalSite { h, omega_index, mu, w })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn h(&self) -> &DMatrix<C64> {
        &self.h
    }

    pub fn omega_index(&self) -> usize {
        self.omega_index
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn w(&self) -> &[C64] {
        &self.w
    }

    /// Eigenvalues of `h` on the complement of Omega, ascending, with eigenvectors as columns.
    fn excited_spectrum(&self) -> (Vec<f64>, DMatrix<C64>) {
        let d = self.dim();
        let keep: Vec<usize> = (0..d).filter(|&i| i != self.omega_index).collect();
        let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, b| self.h[(keep[a], keep[b])]);
        let (vals, vecs) = linalg::eigh(&sub);
        let mut full = DMatrix::zeros(d, keep.len());
        for c in 0..keep.len() {
            for (a, &i) in keep.iter().enumerate() {
                full[(i, c)] = vecs[(a, c)];
            }
        }
        (vals, full)
    }
}

fn check_square(m: &DMatrix<C64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("{what} is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Rotates `v` so its largest component is real and positive.
fn fix_phase(v: &mut [C64]) {
    let mut big = ZERO;
    for x in v.iter() {
        if x.norm() > big.norm() + 1e-12 {
            big = *x;
        }
    }
    if big.norm() > 0.0 {
        let ph = big.conj() / big.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Translation-invariant perturbation: `phi` acts on the sites `x + offsets`.
#[derive(Clone, Debug)]
pub struct PerturbationTemplate {
    offsets: Vec<Vec<i64>>,
    phi: DMatrix<C64>,
    strength: f64,
}

impl PerturbationTemplate {
    pub fn new(offsets: Vec<Vec<i64>>, phi: DMatrix<C64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidModel("perturbation range is empty".into()));
        }
        let nu = offsets[0].len();
        if offsets.iter().any(|o| o.len() != nu) {
            return Err(Error::InvalidModel("offsets have inconsistent dimension".into()));
        }
        for (i, a) in offsets.iter().enumerate() {
            if offsets[..i].contains(a) {
                return Err(Error::InvalidModel(format!("repeated offset {a:?}")));
            }
        }
        check_square(&phi, "phi")?;
        let strength = linalg::operator_norm(&phi);
        Ok(PerturbationTemplate { offsets, phi, strength })
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn phi(&self) -> &DMatrix<C64> {
        &self.phi
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let phi = self.phi.map(|x| x * factor);
        PerturbationTemplate {
            offsets: self.offsets.clone(),
            strength: linalg::operator_norm(&phi),
            phi,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub site: LocalSite,
    pub pert: PerturbationTemplate,
}

impl Model {
    pub fn new(site: LocalSite, pert: PerturbationTemplate) -> Self {
        Model { site, pert }
    }

    pub fn tfi(lambda: f64) -> Result<Self> {
        let (site, pert) = preset_tfi(lambda)?;
        Ok(Model { site, pert })
    }

    pub fn lambda(&self) -> f64 {
        self.pert.strength()
    }
}

/// Transverse-field Ising chain: `h = diag(0, 1)`, `phi = -lambda sigma^x sigma^x` on nearest neighbours.
pub fn preset_tfi(lambda: f64) -> Result<(LocalSite, PerturbationTemplate)> {
    if !(0.0..0.5).contains(&lambda) {
        return Err(Error::InvalidModel(format!("TFI preset needs 0 <= lambda < 1/2, got {lambda}")));
    }
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ZERO, ONE]));
    let site = LocalSite::new(h, 0, 1)?;
    let sx = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let phi = sx.kronecker(&sx).map(|x| x * (-lambda));
    let pert = PerturbationTemplate::new(vec![vec![0], vec![1]], phi)?;
    Ok((site, pert))
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub hermitian_defect: f64,
    pub gap: f64,
    /// Distance from mu to the closest other level or multi-particle sum.
    pub mu_isolation: f64,
    pub lambda: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

pub const DEFAULT_ISOLATION_MARGIN: f64 = 2.0;

pub fn validate_model(site: &LocalSite, pert: &PerturbationTemplate) -> Result<ValidationReport> {
    validate_model_with_margin(site, pert, DEFAULT_ISOLATION_MARGIN)
}

pub fn validate_model_with_margin(
    site: &LocalSite,
    pert: &PerturbationTemplate,
    margin: f64,
) -> Result<ValidationReport> {
    let d = site.dim();
    let k = pert.offsets().len();
    let want = d.pow(k as u32);
    if pert.phi().nrows() != want {
        return Err(Error::Dimension(format!(
            "phi is {}x{}, expected {want}x{want} for {k} sites of dimension {d}",
            pert.phi().nrows(),
            pert.phi().ncols()
        )));
    }
    let h_defect = linalg::hermitian_defect(site.h());
    if h_defect > EXACT_TOL {
        return Err(Error::NotHermitian { defect: h_defect });
    }
    let phi_defect = linalg::hermitian_defect(pert.phi());
    if phi_defect > EXACT_TOL {
        return Err(Error::NotHermitian { defect: phi_defect });
    }

    let mut checks = Vec::new();
    let omega_residual = site.h().column(site.omega_index()).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    checks.push(Check {
        name: "omega eigenvector",
        passed: omega_residual <= EXACT_TOL,
        detail: format!("|h Omega| = {omega_residual:.3e}"),
    });

    let (levels, _) = site.excited_spectrum();
    let gap = levels.first().copied().unwrap_or(f64::INFINITY);
    checks.push(Check {
        name: "gap",
        passed: gap >= 1.0 - EXACT_TOL,
        detail: if gap >= 1.0 - EXACT_TOL {
            format!("gap = {gap}")
        } else {
            format!("gap < 1 (gap = {gap})")
        },
    });

    let w = site.w();
    let hw: Vec<C64> = (0..d).map(|i| (0..d).map(|j| site.h()[(i, j)] * w[j]).sum()).collect();
    let eig_res = hw.iter().zip(w).map(|(a, b)| (a - b * site.mu()).norm_sqr()).sum::<f64>().sqrt();
    let w_norm = linalg::norm(w);
    let w_omega = w[site.omega_index()].norm();
    checks.push(Check {
        name: "mu eigenpair",
        passed: eig_res <= EXACT_TOL && (w_norm - 1.0).abs() <= EXACT_TOL && w_omega <= EXACT_TOL,
        detail: format!("|h w - mu w| = {eig_res:.3e}, |w| = {w_norm}, <w, Omega> = {w_omega:.3e}"),
    });

    let mu = site.mu();
    let others = levels.iter().filter(|&&a| (a - mu).abs() <= 1e-8).count();
    checks.push(Check {
        name: "mu non-degenerate",
        passed: others == 1,
        detail: format!("{others} excited levels at mu = {mu}"),
    });

    let mut isolation = f64::INFINITY;
    let mut single_skipped = false;
    for &a in &levels {
        if !single_skipped && (a - mu).abs() <= 1e-8 {
            single_skipped = true;
            continue;
        }
        isolation = isolation.min((a - mu).abs());
    }
    let mut collision: Option<Vec<f64>> = None;
    let positive: Vec<f64> = levels.iter().copied().filter(|&a| a > EXACT_TOL).collect();
    let mut stack: Vec<(usize, f64, Vec<f64>)> = vec![(0, 0.0, Vec::new())];
    while let Some((from, sum, parts)) = stack.pop() {
        if parts.len() >= 2 {
            isolation = isolation.min((sum - mu).abs());
            if (sum - mu).abs() <= 1e-9 && collision.is_none() {
                collision = Some(parts.clone());
            }
        }
        for (i, &a) in positive.iter().enumerate().skip(from) {
            if sum + a <= mu + margin {
                let mut p = parts.clone();
                p.push(a);
                stack.push((i, sum + a, p));
            }
        }
    }
    checks.push(Check {
        name: "mu isolation",
        passed: collision.is_none(),
        detail: match &collision {
            Some(parts) => format!(
                "mu equals sum of nonzero eigenvalues ({})",
                parts.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join("+")
            ),
            None => format!("isolation distance {isolation}"),
        },
    });

    let recomputed = linalg::operator_norm(pert.phi());
    checks.push(Check {
        name: "strength",
        passed: (recomputed - pert.strength()).abs() <= 1e-12 * recomputed.max(1.0),
        detail: format!("lambda = {}", pert.strength()),
    });

    Ok(ValidationReport {
        checks,
        hermitian_defect: h_defect.max(phi_defect),
        gap,
        mu_isolation: isolation,
        lambda: pert.strength(),
    })
}

/// An operator on a few sites, stored in sorted-site order with sparse columns.
#[derive(Clone, Debug)]
pub struct LocalOp {
    sites: Vec<usize>,
    matrix: DMatrix<C64>,
    columns: Vec<Vec<(usize, C64)>>,
}

impl LocalOp {
    /// `sites` may be unsorted; the tensor factors of `matrix` follow their order.
    pub fn new(sites: Vec<usize>, matrix: DMatrix<C64>, d: usize) -> Result<Self> {
        let k = sites.len();
        if matrix.nrows() != d.pow(k as u32) || matrix.ncols() != matrix.nrows() {
            return Err(Error::Dimension(format!("local operator on {k} sites has shape {:?}", matrix.shape())));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&a| sites[a]);
        if order.windows(2).any(|w| sites[w[0]] == sites[w[1]]) {
            return Err(Error::InvalidModel(format!("operator sites {sites:?} collide (volume too small?)")));
        }
        let sorted: Vec<usize> = order.iter().map(|&a| sites[a]).collect();
        let matrix = permute_factors(&matrix, d, &order);
        let columns = (0..matrix.ncols())
            .map(|c| {
                (0..matrix.nrows())
                    .filter(|&r| matrix[(r, c)] != ZERO)
                    .map(|r| (r, matrix[(r, c)]))
                    .collect()
            })
            .collect();
        Ok(LocalOp { sites: sorted, matrix, columns })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Nonzero entries `(row, value)` of column `c` in local-configuration indexing.
    pub fn column(&self, c: usize) -> &[(usize, C64)] {
        &self.columns[c]
    }
}

/// Reorders tensor factors: new factor `a` is old factor `order[a]`.
fn permute_factors(m: &DMatrix<C64>, d: usize, order: &[usize]) -> DMatrix<C64> {
    let k = order.len();
    if order.iter().enumerate().all(|(a, &b)| a == b) {
        return m.clone();
    }
    let n = m.nrows();
    let map = |idx: usize| -> usize {
        // digits of idx in the new order -> index in the old order
        let mut old = vec![0usize; k];
        let mut r = idx;
        for a in (0..k).rev() {
            old[order[a]] = r % d;
            r /= d;
        }
        old.iter().fold(0, |acc, &g| acc * d + g)
    };
    let perm: Vec<usize> = (0..n).map(map).collect();
    DMatrix::from_fn(n, n, |r, c| m[(perm[r], perm[c])])
}

/// The model placed on a volume and rotated into the local eigenframe of `h`.
///
/// Digit 0 of every site is Omega; digits `1..d` are the excited eigenvectors in ascending
/// order, so the free Hamiltonian is diagonal. `rotation` has these vectors as columns.
#[derive(Clone, Debug)]
pub struct System {
    volume: Volume,
    model: Model,
    levels: Vec<f64>,
    mu_digit: usize,
    rotation: DMatrix<C64>,
    terms: Vec<LocalOp>,
}

impl System {
    pub fn new(model: &Model, volume: &Volume) -> Result<Self> {
        let report = validate_model(&model.site, &model.pert)?;
        if !report.passed() {
            return Err(Error::InvalidModel(report.failures().join("; ")));
        }
        if model.pert.offsets()[0].len() != volume.nu() {
            return Err(Error::InvalidModel(format!(
                "perturbation offsets live in Z^{} but the volume is in Z^{}",
                model.pert.offsets()[0].len(),
                volume.nu()
            )));
        }
        let site = &model.site;
        let d = site.dim();
        let (exc, vecs) = site.excited_spectrum();
        let mut rotation = DMatrix::zeros(d, d);
        rotation[(site.omega_index(), 0)] = ONE;
        let mut mu_digit = 0;
        for (c, &a) in exc.iter().enumerate() {
            if mu_digit == 0 && (a - site.mu()).abs() <= 1e-8 {
                mu_digit = c + 1;
                for i in 0..d {
                    rotation[(i, c + 1)] = site.w()[i];
                }
            } else {
                rotation.set_column(c + 1, &vecs.column(c));
            }
        }
        let mut levels = vec![0.0];
        levels.extend(exc);

        let k = model.pert.offsets().len();
        let mut big_u = rotation.clone();
        for _ in 1..k {
            big_u = big_u.kronecker(&rotation);
        }
        let phi_can = big_u.adjoint() * model.pert.phi() * &big_u;
        let terms = perturbation_sites(volume, &model.pert)?
            .into_iter()
            .map(|sites| LocalOp::new(sites, phi_can.clone(), d))
            .collect::<Result<Vec<_>>>()?;
        Ok(System { volume: volume.clone(), model: model.clone(), levels, mu_digit, rotation, terms })
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    /// Number of excited directions per site.
    pub fn e(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn n_sites(&self) -> usize {
        self.volume.len()
    }

    /// Free energies of the canonical local basis (index 0 is Omega).
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn mu(&self) -> f64 {
        self.levels[self.mu_digit]
    }

    /// Digit of w in the canonical local basis.
    pub fn mu_digit(&self) -> usize {
        self.mu_digit
    }

    /// Amplitudes of w as a one-site cluster vector in the canonical frame.
    pub fn w_frame(&self) -> Vec<C64> {
        let mut a = vec![C64::from(0.0); self.d() - 1];
        a[self.mu_digit - 1] = C64::from(1.0);
        a
    }

    pub fn rotation(&self) -> &DMatrix<C64> {
        &self.rotation
    }

    pub fn lambda(&self) -> f64 {
        self.model.pert.strength()
    }

    /// Perturbation terms phi_x in the canonical frame, one per anchor x.
    pub fn terms(&self) -> &[LocalOp] {
        &self.terms
    }

    /// Largest number of sites of a single perturbation term.
    pub fn range(&self) -> usize {
        self.model.pert.offsets().len()
    }

    /// An operator given in the input basis, rotated into the canonical frame.
    pub fn local_op(&self, sites: Vec<usize>, m: &DMatrix<C64>) -> Result<LocalOp> {
        let mut u = self.rotation.clone();
        for _ in 1..sites.len() {
            u = u.kronecker(&self.rotation);
        }
        if m.nrows() != u.nrows() {
            return Err(Error::Dimension(format!("operator on {} sites must be {}x{}", sites.len(), u.nrows(), u.nrows())));
        }
        LocalOp::new(sites, u.adjoint() * m * &u, self.d())
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::new(self.d(), self.n_sites())
    }

    /// `H_Lambda` in the canonical frame.
    pub fn hamiltonian(&self) -> Result<SparseMatrix> {
        let space = self.space()?;
        let diag = DMatrix::from_fn(self.d(), self.d(), |i, j| {
            if i == j {
                C64::from(self.levels[i])
            } else {
                ZERO
            }
        });
        Ok(assemble(&space, &diag, &self.terms))
    }

    /// Maps a canonical-frame vector back to the computational basis of the input model.
    pub fn to_original_basis(&self, v: &[C64]) -> Result<Vec<C64>> {
        let space = self.space()?;
        let ops: Vec<LocalOp> = (0..self.n_sites())
            .map(|s| LocalOp::new(vec![s], self.rotation.clone(), self.d()))
            .collect::<Result<_>>()?;
        let mut cur = v.to_vec();
        for op in &ops {
            cur = space.apply_local(op, &cur);
        }
        Ok(cur)
    }
}

/// Site lists `x + Lambda_0` for every admissible anchor x, in offset order.
pub fn perturbation_sites(volume: &Volume, pert: &PerturbationTemplate) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for x in 0..volume.len() {
        let sites: Option<Vec<usize>> = pert.offsets().iter().map(|o| volume.shift(x, o)).collect();
        if let Some(sites) = sites {
            let mut sorted = sites.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != sites.len() {
                if volume.boundary() == Boundary::Periodic {
                    return Err(Error::InvalidModel(format!(
                        "periodic volume {:?} is too small for the perturbation range",
                        volume.extent()
                    )));
                }
                continue;
            }
            out.push(sites);
        }
    }
    Ok(out)
}

/// `H_Lambda = sum_x h_x + sum_x phi_x` in the input basis.
pub fn assemble_dense_hamiltonian(volume: &Volume, site: &LocalSite, pert: &PerturbationTemplate) -> Result<SparseMatrix> {
    let d = site.dim();
    let defect = linalg::hermitian_defect(site.h()).max(linalg::hermitian_defect(pert.phi()));
    if defect > EXACT_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let space = StateSpace::new(d, volume.len())?;
    let terms = perturbation_sites(volume, pert)?
        .into_iter()
        .map(|s| LocalOp::new(s, pert.phi().clone(), d))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(&space, site.h(), &terms))
}

fn assemble(space: &StateSpace, one_site: &DMatrix<C64>, terms: &[LocalOp]) -> SparseMatrix {
    let d = space.d();
    let site_ops: Vec<LocalOp> = (0..space.n_sites())
        .map(|s| LocalOp::new(vec![s], one_site.clone(), d).expect("one-site operator shape"))
        .collect();
    // H is Hermitian, so row i is the conjugate of column i
    SparseMatrix::from_row_fn(space.dim(), |i, out| {
        for op in site_ops.iter().chain(terms) {
            space.column_entries(op, i, |j, v| out.push((j, v.conj())));
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    fn real_diag(v: &[f64]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::from(x))))
    }

    fn trivial_pert(d: usize) -> PerturbationTemplate {
        PerturbationTemplate::new(vec![vec![0]], DMatrix::zeros(d, d)).unwrap()
    }

    #[test]
    fn tfi_preset_validates() {
        let (site, pert) = preset_tfi(0.1).unwrap();
        let rep = validate_model(&site, &pert).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert_eq!(rep.gap, 1.0);
        assert!((rep.lambda - 0.1).abs() < 1e-14);
        assert_eq!(site.mu(), 1.0);
        let (_, zero) = preset_tfi(0.0).unwrap();
        assert_eq!(zero.strength(), 0.0);
        assert!(preset_tfi(-0.1).is_err());
    }

    #[test]
    fn small_gap_fails() {
        let site = LocalSite::new(real_diag(&[0.0, 0.5]), 0, 1).unwrap();
        let rep = validate_model(&site, &trivial_pert(2)).unwrap();
        assert!(!rep.passed());
        assert!(rep.failures().iter().any(|f| f.contains("gap < 1")));
    }

    #[test]
    fn mu_as_sum_fails() {
        let site = LocalSite::new(real_diag(&[0.0, 1.0, 2.0]), 0, 2).unwrap();
        let rep = validate_model(&site, &trivial_pert(3)).unwrap();
        let f = rep.failures().join("\n");
        assert!(f.contains("mu equals sum of nonzero eigenvalues (1+1)"), "{f}");
    }

    #[test]
    fn non_hermitian_is_rejected_with_defect() {
        let mut h = real_diag(&[0.0, 1.0]);
        h[(0, 1)] = C64::new(0.3, 0.0);
        let err = LocalSite::with_eigenpair(h, 0, 1.0, vec![ZERO, ONE])
            .and_then(|s| validate_model(&s, &trivial_pert(2)))
            .unwrap_err();
        match err {
            Error::NotHermitian { defect } => assert!((defect - 0.3).abs() < 1e-12),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn free_hamiltonian_counts_excitations() {
        let model = Model::tfi(0.0).unwrap();
        let vol = Volume::chain(3, Boundary::Open).unwrap();
        let h = assemble_dense_hamiltonian(&vol, &model.site, &model.pert).unwrap();
        assert!(h.is_diagonal());
        for i in 0..8 {
            assert_eq!(h.get(i, i).re, i.count_ones() as f64);
        }
    }

    #[test]
    fn two_site_coupling_pattern() {
        let model = Model::tfi(0.1).unwrap();
        let vol = Volume::chain(2, Boundary::Open).unwrap();
        let h = assemble_dense_hamiltonian(&vol, &model.site, &model.pert).unwrap();
        assert!((h.get(0, 3) - C64::from(-0.1)).norm() < 1e-15);
        assert!((h.get(1, 2) - C64::from(-0.1)).norm() < 1e-15);
        assert_eq!(h.get(0, 1), ZERO);
        let (vals, _) = eigh(&h.to_dense());
        // exact ground energy of [[0, -l], [-l, 2]]: 1 - sqrt(1 + l^2)
        assert!((vals[0] - (1.0 - (1.0f64 + 0.01).sqrt())).abs() < 1e-14);
        assert!((vals[0] + 0.00501).abs() < 1e-4);
    }

    #[test]
    fn periodic_wrap_term_is_sorted() {
        let model = Model::tfi(0.1).unwrap();
        let ring = Volume::chain(4, Boundary::Periodic).unwrap();
        let sys = System::new(&model, &ring).unwrap();
        assert_eq!(sys.terms().len(), 4);
        assert_eq!(sys.terms()[3].sites(), &[0, 3]);
        let h = sys.hamiltonian().unwrap();
        assert!(h.hermitian_defect() < 1e-15);
        // |1000> <-> |0001> through the wrapped bond
        assert!((h.get(0b1001, 0) - C64::from(-0.1)).norm() < 1e-15);
    }

    #[test]
    fn canonical_frame_diagonalizes_local_h() {
        // h with Omega at index 1 and a rotated excited block
        let mut h = real_diag(&[1.5, 0.0, 1.5]);
        h[(0, 2)] = C64::new(0.0, 0.25);
        h[(2, 0)] = C64::new(0.0, -0.25);
        let site = LocalSite::new(h, 1, 2).unwrap();
        assert!((site.mu() - 1.75).abs() < 1e-12);
        let pert = PerturbationTemplate::new(vec![vec![0]], DMatrix::zeros(3, 3)).unwrap();
        let model = Model::new(site.clone(), pert);
        let sys = System::new(&model, &Volume::chain(2, Boundary::Open).unwrap()).unwrap();
        let u = sys.rotation();
        let hd = u.adjoint() * site.h() * u;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { sys.levels()[i] } else { 0.0 };
                assert!((hd[(i, j)] - C64::from(want)).norm() < 1e-12);
            }
        }
        for (a, b) in sys.levels().iter().zip([0.0, 1.25, 1.75]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(sys.mu_digit(), 2);
    }
}
