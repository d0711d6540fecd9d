//! Experiment configuration: a sectioned TOML file with units in the key names.
//!
//! `CONFIG.md` next to this crate's manifest documents every key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use quasiclassical::effective::ClassicalMeasure;
use quasiclassical::fock::{adequate_cutoff, Mode, ModeSet, ModelFamily};
use quasiclassical::model::{Boundary, NamedPotential, ParticleModel, PotentialSplit, SpatialGrid};
use quasiclassical::{Measure, Modes, Particles, C64};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub field: FieldBlock,
    #[serde(default)]
    pub state: StateBlock,
    pub sweep: SweepBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub trap: Option<TrapBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Harmonic,
    PowerLaw,
    CosineLattice,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    #[default]
    PositivePart,
    KatoSmall,
    Mixed,
}

/// A named potential, or samples read from a file (one value per site).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub kind: PotentialKind,
    #[serde(default)]
    pub strength_energy: Option<f64>,
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub depth_energy: Option<f64>,
    #[serde(default)]
    pub wavenumber_invlen: Option<f64>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

impl Default for PotentialBlock {
    fn default() -> Self {
        Self {
            kind: PotentialKind::Zero,
            strength_energy: None,
            power: None,
            depth_energy: None,
            wavenumber_invlen: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub dimension: usize,
    #[serde(default = "one")]
    pub particles: usize,
    pub half_width_len: f64,
    pub grid_points: usize,
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub potential: PotentialBlock,
    #[serde(default)]
    pub split: SplitKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Discrete,
    NelsonCutoff,
    Polaron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLayout {
    /// Explicit `mode_*` arrays.
    List,
    /// Cell-centred k-grid of `k_points` per axis over `[−k_half_width, k_half_width]`.
    Continuum,
    /// The discrete Fourier frequencies of the periodic particle grid.
    FourierDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// `ω = mass`.
    #[default]
    Constant,
    /// `ω = √(mass² + |k|²)`.
    Relativistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormFactor {
    /// `λ = g`.
    #[default]
    Constant,
    /// `λ = g / (1 + |k|²)`.
    Lorentzian,
    /// `λ = g exp(−|k|²/2)`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub family: FamilyKind,
    pub layout: ModeLayout,
    #[serde(default)]
    pub mode_k_invlen: Vec<Vec<f64>>,
    #[serde(default)]
    pub mode_omega_energy: Vec<f64>,
    #[serde(default)]
    pub mode_coupling_re: Vec<f64>,
    #[serde(default)]
    pub mode_coupling_im: Vec<f64>,
    #[serde(default)]
    pub k_half_width_invlen: Option<f64>,
    #[serde(default)]
    pub k_points: Option<usize>,
    #[serde(default)]
    pub dispersion: Dispersion,
    #[serde(default = "unit")]
    pub mass_energy: f64,
    #[serde(default)]
    pub form_factor: FormFactor,
    #[serde(default = "unit")]
    pub coupling_strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    #[default]
    Vacuum,
    Coherent,
    Mixture,
    Number,
    File,
}

/// Field state. Amplitudes are given per atom as rows of per-mode values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBlock {
    #[serde(default)]
    pub kind: StateKind,
    #[serde(default)]
    pub atom_weights: Vec<f64>,
    #[serde(default)]
    pub atom_re: Vec<Vec<f64>>,
    #[serde(default)]
    pub atom_im: Vec<Vec<f64>>,
    #[serde(default)]
    pub occupations: Vec<usize>,
    #[serde(default)]
    pub measure_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffPolicy {
    /// Smallest cutoff per mode meeting the Poisson-tail tolerance.
    #[default]
    Adequate,
    /// `cutoffs` verbatim, checked against the same tolerance.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub cutoff_policy: CutoffPolicy,
    #[serde(default)]
    pub cutoffs: Vec<usize>,
    #[serde(default = "default_tail")]
    pub cutoff_tolerance: f64,
    #[serde(default = "default_min_cutoff")]
    pub min_cutoff: usize,
    #[serde(default = "default_max_cutoff")]
    pub max_cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_lanczos_tol")]
    pub lanczos_tolerance: f64,
    #[serde(default = "default_matvecs")]
    pub max_matvecs: usize,
    #[serde(default = "default_budget")]
    pub dimension_budget: usize,
    #[serde(default = "default_samples")]
    pub check_samples: usize,
    /// Uniform cutoff of the random field states drawn by `check`.
    #[serde(default = "default_check_cutoff")]
    pub check_cutoff: usize,
    #[serde(default = "default_sup_tol")]
    pub coherent_tolerance: f64,
    #[serde(default = "default_slope")]
    pub mixture_slope_fraction: f64,
    #[serde(default)]
    pub refine_evaluations: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunBlock {
    fn default() -> Self {
        toml::from_str("").expect("all run keys have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    pub potential: PotentialBlock,
    #[serde(default = "default_sup_tol")]
    pub reproduction_tolerance: f64,
    #[serde(default = "default_interior")]
    pub interior_fraction: f64,
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_tail() -> f64 {
    quasiclassical::fock::COHERENT_TAIL_TOLERANCE
}
fn default_min_cutoff() -> usize {
    1
}
fn default_max_cutoff() -> usize {
    256
}
fn default_seed() -> u64 {
    7
}
fn default_lanczos_tol() -> f64 {
    1e-9
}
fn default_matvecs() -> usize {
    50_000
}
fn default_budget() -> usize {
    quasiclassical::fock::DEFAULT_DIMENSION_BUDGET
}
fn default_samples() -> usize {
    200
}
fn default_check_cutoff() -> usize {
    3
}
fn default_sup_tol() -> f64 {
    1e-6
}
fn default_slope() -> f64 {
    0.9
}
fn default_interior() -> f64 {
    0.8
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut cfg.model.potential.file);
        fix(&mut cfg.state.measure_file);
        if let Some(t) = cfg.trap.as_mut() {
            fix(&mut t.potential.file);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Overrides the sweep, keeping validation.
    pub fn with_eps(mut self, eps: Vec<f64>) -> Result<Self, HarnessError> {
        self.sweep.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&mut self) -> Result<(), HarnessError> {
        if self.sweep.eps.is_empty() {
            return Err(bad("sweep.eps is empty"));
        }
        if self.sweep.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(bad("sweep.eps must be positive"));
        }
        self.sweep.eps.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        self.sweep.eps.dedup();
        if !(self.sweep.cutoff_tolerance > 0.0 && self.sweep.cutoff_tolerance < 1.0) {
            return Err(bad("sweep.cutoff_tolerance must lie in (0, 1)"));
        }
        if self.sweep.min_cutoff > self.sweep.max_cutoff {
            return Err(bad("sweep.min_cutoff exceeds sweep.max_cutoff"));
        }
        if self.model.grid_points < 8 {
            return Err(bad("model.grid_points must be at least 8"));
        }
        let f = &self.field;
        if f.layout == ModeLayout::List {
            let n = f.mode_omega_energy.len();
            if n == 0 {
                return Err(bad("field.mode_omega_energy is empty"));
            }
            if f.mode_k_invlen.len() != n || f.mode_coupling_re.len() != n {
                return Err(bad("field.mode_* arrays differ in length"));
            }
            if !f.mode_coupling_im.is_empty() && f.mode_coupling_im.len() != n {
                return Err(bad("field.mode_coupling_im has the wrong length"));
            }
            if f.mode_k_invlen.iter().any(|k| k.len() != self.model.dimension) {
                return Err(bad("every field.mode_k_invlen entry needs model.dimension components"));
            }
        }
        if f.layout == ModeLayout::Continuum && (f.k_half_width_invlen.is_none() || f.k_points.is_none()) {
            return Err(bad("continuum layout needs field.k_half_width_invlen and field.k_points"));
        }
        let s = &self.state;
        match s.kind {
            StateKind::Coherent if s.atom_re.len() != 1 => return Err(bad("coherent state needs exactly one atom row")),
            StateKind::Mixture if s.atom_re.len() < 2 => return Err(bad("mixture needs at least two atoms")),
            StateKind::Mixture if s.atom_weights.len() != s.atom_re.len() => {
                return Err(bad("state.atom_weights must match the atom rows"))
            }
            StateKind::File if s.measure_file.is_none() => return Err(bad("file state needs state.measure_file")),
            _ => {}
        }
        if !s.atom_im.is_empty() && s.atom_im.len() != s.atom_re.len() {
            return Err(bad("state.atom_im must match state.atom_re"));
        }
        if self.run.check_samples == 0 {
            return Err(bad("run.check_samples must be positive"));
        }
        Ok(())
    }

    pub fn particles(&self) -> Result<Particles, HarnessError> {
        let m = &self.model;
        let grid = self.grid()?;
        let u = sample_potential(&m.potential, &grid)?;
        let split = match m.split {
            SplitKind::PositivePart => PotentialSplit::PositivePart,
            SplitKind::KatoSmall => PotentialSplit::KatoSmall,
            SplitKind::Mixed => PotentialSplit::Mixed,
        };
        Ok(ParticleModel::external(grid, m.particles, &u, split)?)
    }

    pub fn grid(&self) -> Result<SpatialGrid<f64>, HarnessError> {
        let m = &self.model;
        let boundary = match m.boundary {
            BoundaryKind::Dirichlet => Boundary::Dirichlet,
            BoundaryKind::Periodic => Boundary::Periodic,
        };
        Ok(SpatialGrid::new(m.dimension, m.half_width_len, m.grid_points, boundary)?)
    }

    pub fn modes(&self) -> Result<Modes, HarnessError> {
        let f = &self.field;
        let family = match f.family {
            FamilyKind::Discrete => ModelFamily::Discrete,
            FamilyKind::NelsonCutoff => ModelFamily::NelsonCutoff,
            FamilyKind::Polaron => ModelFamily::Polaron,
        };
        let omega = |k: &[f64]| match f.dispersion {
            Dispersion::Constant => f.mass_energy,
            Dispersion::Relativistic => (f.mass_energy * f.mass_energy + k.iter().map(|c| c * c).sum::<f64>()).sqrt(),
        };
        let coupling = |k: &[f64]| {
            let k2: f64 = k.iter().map(|c| c * c).sum();
            let g = match f.form_factor {
                FormFactor::Constant => f.coupling_strength,
                FormFactor::Lorentzian => f.coupling_strength / (1.0 + k2),
                FormFactor::Gaussian => f.coupling_strength * (-k2 / 2.0).exp(),
            };
            C64::new(g, 0.0)
        };
        let d = self.model.dimension;
        let modes = match (f.layout, family) {
            (ModeLayout::List, _) => {
                let list = (0..f.mode_omega_energy.len())
                    .map(|n| Mode {
                        k: f.mode_k_invlen[n].clone(),
                        omega: f.mode_omega_energy[n],
                        coupling: C64::new(f.mode_coupling_re[n], f.mode_coupling_im.get(n).copied().unwrap_or(0.0)),
                    })
                    .collect();
                ModeSet::with_family(d, family, list, 1.0)?
            }
            (ModeLayout::Continuum, ModelFamily::Polaron) => {
                ModeSet::polaron(d, f.k_half_width_invlen.unwrap_or(1.0), f.k_points.unwrap_or(2))?
            }
            (ModeLayout::Continuum, _) => ModeSet::continuum(
                family,
                d,
                f.k_half_width_invlen.unwrap_or(1.0),
                f.k_points.unwrap_or(1),
                omega,
                coupling,
            )?,
            (ModeLayout::FourierDual, _) => ModeSet::fourier_dual(family, &self.grid()?, omega, coupling)?,
        };
        Ok(modes)
    }

    /// The classical measure the configured state converges to.
    pub fn measure(&self, n_modes: usize) -> Result<Measure, HarnessError> {
        let s = &self.state;
        let row = |i: usize| -> Result<Vec<C64>, HarnessError> {
            let re = &s.atom_re[i];
            if re.len() != n_modes {
                return Err(bad(format!("atom row {i} has {} entries, expected {n_modes}", re.len())));
            }
            let im = s.atom_im.get(i);
            Ok(re
                .iter()
                .enumerate()
                .map(|(n, &r)| C64::new(r, im.and_then(|v| v.get(n)).copied().unwrap_or(0.0)))
                .collect())
        };
        Ok(match s.kind {
            StateKind::Vacuum | StateKind::Number => ClassicalMeasure::dirac(vec![C64::new(0.0, 0.0); n_modes]),
            StateKind::Coherent => ClassicalMeasure::dirac(row(0)?),
            StateKind::Mixture => {
                let atoms = (0..s.atom_re.len())
                    .map(|i| Ok((s.atom_weights[i], row(i)?)))
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                ClassicalMeasure::new(atoms)?
            }
            StateKind::File => {
                let path = s.measure_file.as_ref().expect("validated");
                let file = std::fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
                let mu = ClassicalMeasure::read(std::io::BufReader::new(file))?;
                if mu.n_modes() != n_modes {
                    return Err(bad(format!("measure file has {} modes, expected {n_modes}", mu.n_modes())));
                }
                mu
            }
        })
    }

    /// Cutoffs at `eps` holding every atom of `mu` (and the configured number state).
    pub fn cutoffs(&self, mu: &Measure, eps: f64) -> Result<Vec<usize>, HarnessError> {
        let sw = &self.sweep;
        let n = mu.n_modes();
        let needed: Vec<usize> = (0..n)
            .map(|k| {
                let r = mu.points().iter().map(|z| z[k].norm_sqr()).fold(0.0, f64::max);
                let occ = self.state.occupations.get(k).copied().unwrap_or(0);
                adequate_cutoff(r, eps, sw.cutoff_tolerance).max(sw.min_cutoff).max(occ)
            })
            .collect();
        match sw.cutoff_policy {
            CutoffPolicy::Adequate => {
                if let Some((k, &c)) = needed.iter().enumerate().find(|(_, &c)| c > sw.max_cutoff) {
                    return Err(quasiclassical::Error::CutoffTooSmall {
                        mode: k,
                        cutoff: sw.max_cutoff,
                        required: c,
                    }
                    .into());
                }
                Ok(needed)
            }
            CutoffPolicy::Fixed => {
                if sw.cutoffs.len() != n {
                    return Err(bad(format!("sweep.cutoffs has {} entries, expected {n}", sw.cutoffs.len())));
                }
                for (k, (&have, &need)) in sw.cutoffs.iter().zip(&needed).enumerate() {
                    if have < need {
                        return Err(quasiclassical::Error::CutoffTooSmall {
                            mode: k,
                            cutoff: have,
                            required: need,
                        }
                        .into());
                    }
                }
                Ok(sw.cutoffs.clone())
            }
        }
    }

    /// Short tags for configurations outside the proven regimes.
    pub fn tags(&self, modes: &Modes) -> Vec<String> {
        let mut t = Vec::new();
        if modes.family() == ModelFamily::Polaron && self.model.dimension < 2 {
            t.push("non-paper: one-dimensional polaron form factor".to_string());
        }
        if !modes.is_massive() && modes.family() != ModelFamily::Polaron {
            t.push("outside theorem hypotheses: massless field".to_string());
        }
        if self.model.particles > 1 {
            t.push("particles treated as distinguishable".to_string());
        }
        t
    }

    /// Canonical key-value view used for hashing and reports.
    pub fn canonical(&self) -> BTreeMap<String, serde_json::Value> {
        let value = serde_json::to_value(self).expect("serializable");
        let mut out = BTreeMap::new();
        flatten("", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, serde_json::Value>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

pub fn sample_potential(p: &PotentialBlock, grid: &SpatialGrid<f64>) -> Result<Vec<f64>, HarnessError> {
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| bad(format!("potential needs {key}")));
    let named = match p.kind {
        PotentialKind::Zero => NamedPotential::Zero,
        PotentialKind::Harmonic => NamedPotential::Harmonic {
            strength: need(p.strength_energy, "strength_energy")?,
        },
        PotentialKind::PowerLaw => {
            let power = need(p.power, "power")?;
            if !(power > 0.0) {
                return Err(bad("power-law exponent must be positive"));
            }
            NamedPotential::PowerLaw {
                strength: need(p.strength_energy, "strength_energy")?,
                power,
            }
        }
        PotentialKind::CosineLattice => NamedPotential::CosineLattice {
            depth: need(p.depth_energy, "depth_energy")?,
            wavenumber: need(p.wavenumber_invlen, "wavenumber_invlen")?,
        },
        PotentialKind::File => {
            let path = p.file.as_ref().ok_or_else(|| bad("file potential needs file"))?;
            let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            let v: Vec<f64> = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad sample '{t}' in {}", path.display()))))
                .collect::<Result<_, _>>()?;
            if v.len() != grid.len() {
                return Err(bad(format!("{} holds {} samples, grid has {}", path.display(), v.len(), grid.len())));
            }
            return Ok(v);
        }
    };
    Ok(named.sample(grid))
}
