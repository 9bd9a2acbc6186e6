//! The `qpert` command line: one TOML config per experiment, CSV results in `--out`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use crate::acceptance;
use crate::cluster::{creation_apply, ClusterVector};
use crate::groundstate::{residual_norm, solve_ground_state, GroundStateSolution};
use crate::linalg;
use crate::model::{validate_model, System};
use crate::oneparticle::{hopping_amplitudes, Dispersion, Hoppings, OneParticleBasis};
use crate::oracle::{self, LanczosOptions};
use crate::renorm::{free_levels, spectrum_check, RenormOperator};
use crate::scatter::{admissible, FockVector, ScatterContext};
use crate::linalg::C64;
use config::Config;
use output::{num, Table};

#[derive(Debug, Parser)]
#[command(name = "qpert", version, about = "Perturbative ground states, dispersion and scattering on lattice spin models")]
pub struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (computations currently run on one).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for the randomized start vectors.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model assumptions (gap, mu isolation, Hermiticity).
    Validate,
    /// Solve for the ground-state collection.
    SolveGs,
    /// Compare the exact spectrum with the free levels.
    SpectrumCheck,
    /// One-particle hoppings and the dispersion m(p).
    Dispersion,
    /// One-particle hoppings only.
    Hoppings,
    /// Cook integrand and overlaps for the configured packets (needs hoppings.csv).
    Scatter,
    /// Exact-diagonalization reference computations.
    Ed {
        #[command(subcommand)]
        which: EdCommand,
    },
    /// Run the acceptance checks and write report.csv.
    Report {
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
    },
}

#[derive(Debug, Subcommand)]
pub enum EdCommand {
    /// Lowest eigenvalues of H.
    Spectrum,
    /// Lowest excitation per momentum (periodic volumes).
    Band,
    /// Propagate a single local excitation.
    Evolve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(s) => s.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Status> {
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Validate => validate(&cfg, out),
        Command::SolveGs => solve_gs(&cfg, out),
        Command::SpectrumCheck => spectrum(&cfg, out),
        Command::Dispersion => dispersion(&cfg, out, true),
        Command::Hoppings => dispersion(&cfg, out, false),
        Command::Scatter => scatter(&cfg, out),
        Command::Ed { which } => match which {
            EdCommand::Spectrum => ed_spectrum(&cfg, out, cli.seed),
            EdCommand::Band => ed_band(&cfg, out),
            EdCommand::Evolve => ed_evolve(&cfg, out),
        },
        Command::Report { criteria } => report(&cfg, out, criteria.as_deref()),
    }
}

fn validate(cfg: &Config, out: &Path) -> anyhow::Result<Status> {
    let (site, pert) = cfg.model_parts()?;
    let rep = validate_model(&site, &pert)?;
    cfg.volume()?;
    let mut t = Table::new(["item", "value", "passed", "detail"]);
    for (k, v) in [
        ("lambda", rep.lambda),
        ("gap", rep.gap),
        ("mu_isolation", rep.mu_isolation),
        ("hermitian_defect", rep.hermitian_defect),
    ] {
        t.row(vec![k.into(), num(v), String::new(), String::new()]);
        println!("{k} = {v}");
    }
    for c in &rep.checks {
        t.row(vec![c.name.into(), String::new(), c.passed.to_string(), c.detail.clone()]);
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    t.write(out, "validate.csv", cfg)?;
    Ok(Status::from(rep.passed()))
}

fn ground_state(cfg: &Config, sys: &System) -> anyhow::Result<GroundStateSolution> {
    Ok(solve_ground_state(sys, &cfg.groundstate_options())?)
}

fn solve_gs(cfg: &Config, out: &Path) -> anyhow::Result<Status> {
    let sys = cfg.system()?;
    let sol = ground_state(cfg, &sys)?;
    let mut t = Table::new(["quantity", "value"]);
    let eps = sol.frame.eps.map(num).unwrap_or_else(|| "none".into());
    let mut rows = vec![
        ("energy", num(sol.energy())),
        ("iterations", sol.iterations.to_string()),
        ("contraction", num(sol.contraction())),
        ("fitted_eps", eps),
        ("weighted_norm_at_eps", num(sol.weighted_at_eps)),
        ("final_damping", num(sol.final_damping)),
        ("clusters", sol.frame.gs.len().to_string()),
    ];
    // the residual needs the full space; skip it quietly when that is out of reach
    if let Ok(r) = residual_norm(&sol.frame, &sys) {
        rows.push(("residual", num(r)));
    }
    for (k, v) in rows {
        println!("{k} = {v}");
        t.row(vec![k.into(), v]);
    }
    t.write(out, "gs.csv", cfg)?;
    let mut it = Table::new(["iteration", "update_norm", "ratio"]);
    for (k, u) in sol.update_norms.iter().enumerate() {
        let ratio = if k == 0 { String::new() } else { sol.ratios.get(k - 1).map(|&r| num(r)).unwrap_or_default() };
        it.row(vec![(k + 1).to_string(), num(*u), ratio]);
    }
    it.write(out, "gs_iterations.csv", cfg)?;
    let path = out.join("gs_collection.txt");
    let mut text = Vec::new();
    output::write_header(&mut text, cfg)?;
    text.extend_from_slice(sol.frame.gs.to_text().as_bytes());
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(Status::Pass)
}

fn spectrum(cfg: &Config, out: &Path) -> anyhow::Result<Status> {
    let sys = cfg.system()?;
    let chk = spectrum_check(&sys)?;
    let c2 = cfg.renorm.c2;
    let lam = sys.lambda();
    let mut t = Table::new(["index", "eigenvalue", "nearest_level", "disk_radius", "required_c2", "inside"]);
    for (k, (&ev, &(a, c))) in chk.eigenvalues.iter().zip(&chk.nearest).enumerate() {
        t.row(vec![k.to_string(), num(ev), num(a), num(c2 * lam * a), num(c), (c <= c2).to_string()]);
    }
    let levels = free_levels(&sys, chk.eigenvalues.last().copied().unwrap_or(0.0) + 1.0);
    t.note("free_levels", levels.iter().map(|&a| num(a)).collect::<Vec<_>>().join(" "));
    t.note("c2", num(c2));
    t.note("required_c2", num(chk.required_c2));
    t.note("gap", num(chk.gap));
    t.write(out, "spectrum.csv", cfg)?;
    let ok = chk.passes(c2);
    println!("required c2 = {} (configured {c2}), gap = {}: {}", chk.required_c2, chk.gap, if ok { "pass" } else { "FAIL" });
    Ok(Status::from(ok))
}

struct OneParticle {
    sys: System,
    solution: GroundStateSolution,
    basis: OneParticleBasis,
    hoppings: Hoppings,
}

fn one_particle(cfg: &Config) -> anyhow::Result<OneParticle> {
    let sys = cfg.system()?;
    let solution = ground_state(cfg, &sys)?;
    let op = RenormOperator::new(&sys, &solution.frame);
    let basis = OneParticleBasis::build(&op, &cfg.one_particle_options(&sys))?;
    let hoppings = hopping_amplitudes(&basis, &op)?;
    if op.overflowed(cfg.renorm.overflow_fraction) {
        eprintln!(
            "warning: truncation dropped up to {:.2e} of an F-map column (threshold {})",
            op.dropped_weight(),
            cfg.renorm.overflow_fraction
        );
    }
    drop(op);
    Ok(OneParticle { sys, solution, basis, hoppings })
}

fn axis_names(prefix: &str, nu: usize) -> Vec<String> {
    (0..nu).map(|k| format!("{prefix}{k}")).collect()
}

fn dispersion(cfg: &Config, out: &Path, with_curve: bool) -> anyhow::Result<Status> {
    let op = one_particle(cfg)?;
    let nu = op.sys.volume().nu();
    let mut t = Table::new(axis_names("y", nu).into_iter().chain(["re", "im", "abs"].map(String::from)));
    for (y, v) in op.hoppings.offsets.iter().zip(&op.hoppings.values) {
        let mut row: Vec<String> = y.iter().map(|x| x.to_string()).collect();
        row.extend([num(v.re), num(v.im), num(v.norm())]);
        t.row(row);
    }
    let fit_max = cfg.dispersion.fit_max.unwrap_or(cfg.volume.extent[0] as u32 / 2);
    let fit = op.hoppings.decay_fit(fit_max);
    t.note("hermiticity_defect", num(op.hoppings.hermiticity_defect()));
    t.note("orthonormality_defect", num(op.basis.orthonormality_defect()));
    t.note("decay_slope", num(fit.slope));
    t.note("decay_r2", num(fit.r2));
    t.write(out, "hoppings.csv", cfg)?;
    println!("hoppings: {} offsets, decay slope {:.4}, R2 {:.4}", op.hoppings.values.len(), fit.slope, fit.r2);
    if with_curve {
        let disp = Dispersion::from_hoppings(&op.hoppings);
        let pts = disp.sample(cfg.dispersion.grid)?;
        let mut header = axis_names("p", nu);
        header.push("m".into());
        header.extend(axis_names("v", nu));
        let mut d = Table::new(header);
        for q in &pts {
            let mut row: Vec<String> = q.p.iter().map(|&x| num(x)).collect();
            row.push(num(q.m));
            row.extend(q.velocity.iter().map(|&x| num(x)));
            d.row(row);
        }
        d.note("ground_energy", num(op.solution.energy()));
        d.write(out, "dispersion.csv", cfg)?;
        let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q.m), b.max(q.m)));
        println!("dispersion: {} points, band [{lo:.6}, {hi:.6}]", pts.len());
    }
    Ok(Status::Pass)
}

fn read_hoppings(cfg: &Config, out: &Path) -> anyhow::Result<Hoppings> {
    let path = out.join("hoppings.csv");
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            bail!("missing prerequisite {}: run `qpert dispersion` (or `hoppings`) with the same config first", path.display())
        }
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    if output::recorded_hash(&text) != Some(cfg.model_hash().as_str()) {
        bail!("{} was produced for a different model or volume; regenerate it", path.display());
    }
    let (header, rows) = output::read_rows(&text)?;
    let nu = header.iter().filter(|h| h.starts_with('y')).count();
    let mut offsets = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for r in &rows {
        let bad = || anyhow::anyhow!("malformed row {r:?} in {}", path.display());
        let y = r[..nu].iter().map(|x| x.parse::<i64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
        let re: f64 = r.get(nu).and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let im: f64 = r.get(nu + 1).and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        offsets.push(y);
        values.push(C64::new(re, im));
    }
    let vol = cfg.volume()?;
    let extent = (vol.boundary() == crate::lattice::Boundary::Periodic).then(|| vol.extent().to_vec());
    Ok(Hoppings { offsets, values, extent })
}

fn scatter(cfg: &Config, out: &Path) -> anyhow::Result<Status> {
    let hop = read_hoppings(cfg, out)?;
    let disp = Dispersion::from_hoppings(&hop);
    let op = one_particle(cfg)?;
    let n = op.sys.n_sites();
    let ctx = ScatterContext::new(&op.sys, op.basis, disp, op.solution.energy())?;
    let packets = cfg.packets(n)?;
    if packets.is_empty() {
        bail!("scatter: no packets configured");
    }
    let first = FockVector::product(packets.clone());
    let second = match &cfg.scatter.compare {
        Some(idx) => FockVector::product(idx.iter().map(|&k| packets[k].clone()).collect()),
        None => first.clone(),
    };
    for f in [&first, &second] {
        let a = admissible(f, &ctx.dispersion);
        if !a.admissible {
            bail!("scatter: packet velocities overlap (margin {:.3e}); the state is not admissible", a.margin);
        }
    }
    let times = &cfg.scatter.times;
    if times.is_empty() {
        bail!("scatter: empty time list");
    }
    let mut t = Table::new(["t", "cook", "overlap_re", "overlap_im", "target_re", "target_im", "gap", "overlap_ok"]);
    let rows = ctx.isometry_scan(&first, &second, times)?;
    let mut cooks = Vec::with_capacity(times.len());
    for row in &rows {
        let c = ctx.cook_integrand(&first, row.t)?;
        cooks.push(c);
        let ok = row.gap <= cfg.scatter.overlap_tol;
        t.row(vec![
            num(row.t),
            num(c),
            num(row.overlap.re),
            num(row.overlap.im),
            num(row.target.re),
            num(row.target.im),
            num(row.gap),
            ok.to_string(),
        ]);
        println!("t = {:>6}: cook {c:.4e}, overlap gap {:.3e}", row.t, row.gap);
    }
    let cook_ok = cooks.len() < 2 || cooks[cooks.len() - 1] <= cfg.scatter.cook_ratio * cooks[0];
    let overlap_ok = rows.last().is_some_and(|r| r.gap <= cfg.scatter.overlap_tol);
    t.note("time_budget", num(ctx.time_budget(&first)));
    t.note("cook_decay_ok", cook_ok);
    t.note("overlap_ok", overlap_ok);
    t.write(out, "scatter.csv", cfg)?;
    Ok(Status::from(cook_ok && overlap_ok))
}

fn ed_spectrum(cfg: &Config, out: &Path, seed: u64) -> anyhow::Result<Status> {
    let sys = cfg.system()?;
    let h = sys.hamiltonian()?;
    let k = cfg.ed.levels.max(1).min(h.dim());
    let vals: Vec<f64> = if h.dim() <= oracle::DENSE_MAX_DIM {
        oracle::full_spectrum(&sys)?.into_iter().take(k).collect()
    } else {
        let opts = LanczosOptions { seed, ..Default::default() };
        oracle::extremal_eigs(&h, k, &opts)?.into_iter().map(|p| p.value).collect()
    };
    let mut t = Table::new(["index", "energy", "excitation"]);
    for (i, &e) in vals.iter().enumerate() {
        t.row(vec![i.to_string(), num(e), num(e - vals[0])]);
    }
    t.write(out, "ed_spectrum.csv", cfg)?;
    println!("ground energy {}, first excitation {}", vals[0], vals.get(1).map_or(f64::NAN, |e| e - vals[0]));
    Ok(Status::Pass)
}

fn ed_band(cfg: &Config, out: &Path) -> anyhow::Result<Status> {
    let sys = cfg.system()?;
    let [lo, hi] = cfg.ed.window;
    let band = oracle::momentum_band(&sys, (lo, hi))?;
    let nu = sys.volume().nu();
    let mut header = axis_names("p", nu);
    header.push("energy".into());
    let mut t = Table::new(header);
    for q in &band.points {
        let mut row: Vec<String> = q.p.iter().map(|&x| num(x)).collect();
        row.push(num(q.energy));
        t.row(row);
    }
    t.note("ground_energy", num(band.ground_energy));
    t.note("count_in_window", band.count_in_window);
    t.write(out, "ed_band.csv", cfg)?;
    println!("{} momenta, {} levels in [{lo}, {hi}]", band.points.len(), band.count_in_window);
    Ok(Status::Pass)
}

fn ed_evolve(cfg: &Config, out: &Path) -> anyhow::Result<Status> {
    let sys = cfg.system()?;
    let n = sys.n_sites();
    if cfg.ed.site >= n {
        bail!("ed: site {} outside a volume of {n} sites", cfg.ed.site);
    }
    let space = sys.space()?;
    let h = sys.hamiltonian()?;
    let w = ClusterVector::new(&[cfg.ed.site], &sys.w_frame(), sys.e())?;
    let v0 = creation_apply(&w, &space.vacuum(), &space)?;
    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend(axis_names("n", n));
    let mut t = Table::new(header);
    for &time in &cfg.ed.times {
        let v = oracle::evolve_reference(&h, &v0, time)?;
        let mut occ = vec![0.0; n];
        for (i, z) in v.iter().enumerate() {
            let p = z.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (x, o) in occ.iter_mut().enumerate() {
                if space.digit(i, x) != 0 {
                    *o += p;
                }
            }
        }
        let mut row = vec![num(time), num(linalg::norm(&v))];
        row.extend(occ.iter().map(|&o| num(o)));
        t.row(row);
    }
    t.write(out, "ed_evolve.csv", cfg)?;
    Ok(Status::Pass)
}

fn report(cfg: &Config, out: &Path, criteria: Option<&[u8]>) -> anyhow::Result<Status> {
    let all: Vec<u8> = (1..=11).collect();
    let ids = criteria.unwrap_or(&all);
    if let Some(bad) = ids.iter().find(|&&k| !(1..=11).contains(&k)) {
        bail!("report: no criterion {bad} (valid: 1-11)");
    }
    let outcomes = acceptance::run_selected(ids);
    let mut t = Table::new(["criterion", "name", "passed", "seconds", "detail"]);
    for o in &outcomes {
        println!("{}", o.line());
        t.row(vec![o.id.to_string(), o.name.into(), o.passed.to_string(), format!("{:.2}", o.seconds), o.detail.clone()]);
    }
    let ok = outcomes.iter().all(|o| o.passed);
    t.note("passed", outcomes.iter().filter(|o| o.passed).count());
    t.note("failed", outcomes.iter().filter(|o| !o.passed).count());
    t.write(out, "report.csv", cfg)?;
    Ok(Status::from(ok))
}
