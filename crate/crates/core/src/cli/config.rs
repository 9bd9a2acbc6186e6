//! Experiment configuration (TOML). Every section is optional; unknown keys are rejected.

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cluster::Truncation;
use crate::groundstate::GroundStateOptions;
use crate::lattice::{Boundary, Volume};
use crate::linalg::C64;
use crate::model::{LocalSite, Model, PerturbationTemplate, System};
use crate::oneparticle::OneParticleOptions;
use crate::renorm::{Contour, ResolventOptions, DEFAULT_C2};
use crate::scatter::{Shape, WavePacket};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelConfig,
    pub volume: VolumeConfig,
    pub truncation: TruncationConfig,
    pub groundstate: GroundStateConfig,
    pub renorm: RenormConfig,
    pub contour: ContourConfig,
    pub dispersion: DispersionConfig,
    pub scatter: ScatterConfig,
    pub ed: EdConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// `"tfi"` or `"custom"`.
    pub preset: String,
    pub lambda: f64,
    /// Custom model: real and optional imaginary parts of `h` and `phi`, row-major.
    pub h: Option<Vec<Vec<f64>>>,
    pub h_imag: Option<Vec<Vec<f64>>>,
    pub omega_index: usize,
    pub mu_index: usize,
    pub offsets: Option<Vec<Vec<i64>>>,
    pub phi: Option<Vec<Vec<f64>>>,
    pub phi_imag: Option<Vec<Vec<f64>>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            preset: "tfi".into(),
            lambda: 0.1,
            h: None,
            h_imag: None,
            omega_index: 0,
            mu_index: 1,
            offsets: None,
            phi: None,
            phi_imag: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeConfig {
    pub extent: Vec<usize>,
    pub boundary: String,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig { extent: vec![8], boundary: "open".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub k_max: usize,
    pub d_max: u32,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        let t = Truncation::default();
        TruncationConfig { k_max: t.k_max, d_max: t.d_max }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub eps: f64,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        let g = GroundStateOptions::default();
        GroundStateConfig { tol: g.tol, max_iter: g.max_iter, damping: g.damping, eps: g.eps }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormConfig {
    pub c2: f64,
    pub k_max: usize,
    pub tol: f64,
    /// Warn when the F-map drops more than this fraction of a unit input. Clusters at the
    /// D_max edge lose their whole first-order image (about lambda per term), hence the loose default.
    pub overflow_fraction: f64,
}

impl Default for RenormConfig {
    fn default() -> Self {
        let r = OneParticleOptions::default().resolvent;
        RenormConfig { c2: DEFAULT_C2, k_max: r.k_max, tol: r.tol, overflow_fraction: 0.5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourConfig {
    /// Defaults to a circle around mu sized by the nearest other free level.
    pub center: Option<f64>,
    pub radius: Option<f64>,
    pub nodes: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { center: None, radius: None, nodes: 32 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionConfig {
    pub grid: usize,
    /// Largest |y| in the hopping decay fit (default: half the first extent).
    pub fit_max: Option<u32>,
    /// Open volumes: keep basis sites at least this far from the boundary.
    pub margin: Option<u32>,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig { grid: 64, fit_max: None, margin: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub center: f64,
    pub half_width: f64,
    #[serde(default = "default_shape")]
    pub shape: String,
    #[serde(default)]
    pub position: f64,
}

fn default_shape() -> String {
    "raised-cosine".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    pub times: Vec<f64>,
    pub packets: Vec<PacketConfig>,
    /// Indices into `packets` forming the second state of the overlap scan (default: all).
    pub compare: Option<Vec<usize>>,
    pub overlap_tol: f64,
    /// Required ratio of the last to the first Cook integrand.
    pub cook_ratio: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        let p = |center| PacketConfig { center, half_width: 0.25, shape: default_shape(), position: 0.0 };
        ScatterConfig {
            times: vec![0.0, 5.0, 10.0, 15.0],
            packets: vec![p(0.25), p(0.75)],
            compare: None,
            overlap_tol: 0.05,
            cook_ratio: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdConfig {
    /// Number of eigenvalues reported by `ed spectrum`.
    pub levels: usize,
    /// Excitation-energy window for `ed band`.
    pub window: [f64; 2],
    /// `ed evolve`: a single excitation at `site` on the free vacuum, sampled at `times`.
    pub site: usize,
    pub times: Vec<f64>,
}

impl Default for EdConfig {
    fn default() -> Self {
        EdConfig { levels: 16, window: [0.5, 1.5], site: 0, times: vec![0.0, 1.0, 2.0, 4.0, 8.0] }
    }
}

fn matrix(name: &str, re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> anyhow::Result<DMatrix<C64>> {
    let n = re.len();
    if re.iter().any(|r| r.len() != n) {
        bail!("{name} must be square");
    }
    if let Some(im) = im {
        if im.len() != n || im.iter().any(|r| r.len() != n) {
            bail!("{name}_imag must have the shape of {name}");
        }
    }
    Ok(DMatrix::from_fn(n, n, |r, c| C64::new(re[r][c], im.map_or(0.0, |m| m[r][c]))))
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Config = toml::from_str(text).context("parsing config")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    fn check(&self) -> anyhow::Result<()> {
        match self.model.preset.as_str() {
            "tfi" => {
                let m = &self.model;
                if m.h.is_some() || m.phi.is_some() || m.offsets.is_some() || m.h_imag.is_some() || m.phi_imag.is_some() {
                    bail!("model: h/phi/offsets only apply to preset = \"custom\"");
                }
            }
            "custom" => {
                if self.model.h.is_none() || self.model.phi.is_none() || self.model.offsets.is_none() {
                    bail!("model: preset = \"custom\" needs h, phi and offsets");
                }
            }
            other => bail!("model: unknown preset {other:?} (expected \"tfi\" or \"custom\")"),
        }
        self.boundary()?;
        if self.volume.extent.is_empty() || self.volume.extent.contains(&0) {
            bail!("volume: extent must be nonempty with positive entries");
        }
        for p in &self.scatter.packets {
            p.shape.parse::<Shape>().map_err(anyhow::Error::msg)?;
        }
        if let Some(c) = &self.scatter.compare {
            if let Some(&k) = c.iter().find(|&&k| k >= self.scatter.packets.len()) {
                bail!("scatter: compare index {k} out of range");
            }
        }
        if self.contour.nodes == 0 {
            bail!("contour: nodes must be positive");
        }
        Ok(())
    }

    pub fn boundary(&self) -> anyhow::Result<Boundary> {
        self.volume.boundary.parse::<Boundary>().map_err(|e| anyhow::anyhow!("volume: {e}"))
    }

    pub fn model_parts(&self) -> anyhow::Result<(LocalSite, PerturbationTemplate)> {
        let m = &self.model;
        if m.preset == "tfi" {
            return Ok(crate::model::preset_tfi(m.lambda)?);
        }
        let h = matrix("h", m.h.as_ref().unwrap(), m.h_imag.as_ref())?;
        let phi = matrix("phi", m.phi.as_ref().unwrap(), m.phi_imag.as_ref())?;
        let site = LocalSite::new(h, m.omega_index, m.mu_index)?;
        let pert = PerturbationTemplate::new(m.offsets.clone().unwrap(), phi)?;
        Ok((site, pert))
    }

    pub fn model(&self) -> anyhow::Result<Model> {
        let (site, pert) = self.model_parts()?;
        Ok(Model::new(site, pert))
    }

    pub fn volume(&self) -> anyhow::Result<Volume> {
        Ok(Volume::boxed(&self.volume.extent, self.boundary()?)?)
    }

    pub fn system(&self) -> anyhow::Result<System> {
        Ok(System::new(&self.model()?, &self.volume()?)?)
    }

    pub fn truncation(&self) -> Truncation {
        Truncation { k_max: self.truncation.k_max, d_max: self.truncation.d_max }
    }

    pub fn groundstate_options(&self) -> GroundStateOptions {
        let g = &self.groundstate;
        GroundStateOptions { truncation: self.truncation(), tol: g.tol, max_iter: g.max_iter, damping: g.damping, eps: g.eps }
    }

    pub fn resolvent_options(&self) -> ResolventOptions {
        ResolventOptions { k_max: self.renorm.k_max, tol: self.renorm.tol, c2: self.renorm.c2 }
    }

    pub fn contour(&self, sys: &System) -> Contour {
        let auto = Contour::around_mu(sys);
        Contour {
            center: self.contour.center.unwrap_or(auto.center),
            radius: self.contour.radius.unwrap_or(auto.radius),
            nodes: self.contour.nodes,
        }
    }

    pub fn one_particle_options(&self, sys: &System) -> OneParticleOptions {
        OneParticleOptions {
            contour: Some(self.contour(sys)),
            resolvent: self.resolvent_options(),
            margin: self.dispersion.margin,
        }
    }

    pub fn packets(&self, grid: usize) -> anyhow::Result<Vec<WavePacket>> {
        self.scatter
            .packets
            .iter()
            .map(|p| {
                let shape: Shape = p.shape.parse().map_err(anyhow::Error::msg)?;
                Ok(WavePacket::new(grid, p.center, p.half_width, shape, p.position)?)
            })
            .collect()
    }

    /// The configuration with all defaults filled in, as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the model and volume sections.
    pub fn model_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        #[derive(Serialize)]
        struct Key<'a> {
            model: &'a ModelConfig,
            volume: &'a VolumeConfig,
        }
        let text = toml::to_string(&Key { model: &self.model, volume: &self.volume }).expect("model serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
