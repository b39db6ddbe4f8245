//! Experiment configuration. Unknown keys are rejected and every value is
//! checked before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};

use bdglab::transport::Perturbation;
use bdglab::{Flux, Kinetic, PairingKind, PairingSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tasks: Vec<Task>,
    pub model: ModelBlock,
    pub lattice: LatticeBlock,
    #[serde(default)]
    pub disorder: DisorderBlock,
    #[serde(default)]
    pub kubo: KuboBlock,
    #[serde(default)]
    pub thermal: ThermalBlock,
    #[serde(default)]
    pub edge: EdgeBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ChernRealspace,
    ChernIndex,
    SymmetryReport,
    EdgeCurrent,
    Winding,
    KuboSweep,
    Thermal,
    SpinHall,
    OracleCheck,
    ContinuityCheck,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::ChernRealspace => "chern_realspace",
            Task::ChernIndex => "chern_index",
            Task::SymmetryReport => "symmetry_report",
            Task::EdgeCurrent => "edge_current",
            Task::Winding => "winding",
            Task::KuboSweep => "kubo_sweep",
            Task::Thermal => "thermal",
            Task::SpinHall => "spin_hall",
            Task::OracleCheck => "oracle_check",
            Task::ContinuityCheck => "continuity_check",
        }
    }

    pub fn needs_cylinder(&self) -> bool {
        matches!(self, Task::EdgeCurrent | Task::Winding)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KineticName {
    Laplacian,
    Magnetic,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// A pairing preset name, or `normal` for a model without pairing.
    pub preset: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub mu: f64,
    /// Spin `s`; the fiber has `2s + 1` components.
    pub spin: Option<f64>,
    /// Flux per plaquette as `p/q`.
    pub flux: Option<String>,
    pub kinetic: Option<KineticName>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub n1: usize,
    pub n2: usize,
    /// Cylinder width for boundary tasks.
    pub width: Option<usize>,
    #[serde(default = "default_twists")]
    pub twists: usize,
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DisorderBlock {
    #[serde(default)]
    pub w: f64,
    pub seeds: Option<Vec<u64>>,
    pub seed_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KuboBlock {
    #[serde(default = "infinity")]
    pub beta: f64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_perturbation")]
    pub perturbation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThermalBlock {
    /// Temperatures in units of the spectral gap.
    #[serde(default = "default_t_over_gap")]
    pub t_over_gap: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeBlock {
    /// Half-widths of the bump windows in units of the bulk gap.
    #[serde(default = "default_windows")]
    pub windows: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn one() -> f64 {
    1.0
}
fn infinity() -> f64 {
    f64::INFINITY
}
fn default_twists() -> usize {
    32
}
fn default_deltas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_perturbation() -> String {
    "gravitational".into()
}
fn default_t_over_gap() -> Vec<f64> {
    vec![0.025, 0.05, 0.1]
}
fn default_windows() -> Vec<f64> {
    vec![0.5, 0.3]
}
fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for KuboBlock {
    fn default() -> Self {
        KuboBlock {
            beta: infinity(),
            deltas: default_deltas(),
            perturbation: default_perturbation(),
        }
    }
}

impl Default for ThermalBlock {
    fn default() -> Self {
        ThermalBlock {
            t_over_gap: default_t_over_gap(),
        }
    }
}

impl Default for EdgeBlock {
    fn default() -> Self {
        EdgeBlock {
            windows: default_windows(),
        }
    }
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: None,
            formats: default_formats(),
        }
    }
}

/// Scalar parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Mu,
    Amplitude,
    W,
    Delta,
    Beta,
    TOverGap,
    Width,
}

impl Axis {
    pub const ALL: [Axis; 7] = [Axis::Mu, Axis::Amplitude, Axis::W, Axis::Delta, Axis::Beta, Axis::TOverGap, Axis::Width];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Mu => "mu",
            Axis::Amplitude => "amplitude",
            Axis::W => "w",
            Axis::Delta => "delta",
            Axis::Beta => "beta",
            Axis::TOverGap => "t_over_gap",
            Axis::Width => "width",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Axis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Axis::ALL.iter().map(|a| a.name()).collect();
            ConfigError(format!("unknown sweep axis `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn pairing(&self) -> Result<Option<PairingSpec>, ConfigError> {
        if self.model.preset == "normal" {
            return Ok(None);
        }
        let kind: PairingKind = self.model.preset.parse().map_err(|e: bdglab::Error| ConfigError(e.to_string()))?;
        Ok(Some(PairingSpec::new(kind, self.model.amplitude)))
    }

    pub fn fiber_l(&self) -> Result<usize, ConfigError> {
        let preset = self.pairing()?.map(|p| p.spin_required());
        match (self.model.spin, preset) {
            (Some(s), _) => {
                let two_s = 2.0 * s;
                if !(s >= 0.0) || (two_s - two_s.round()).abs() > 1e-12 {
                    return bad(format!("spin must be a nonnegative multiple of 1/2, got {s}"));
                }
                let l = two_s.round() as usize + 1;
                if let Some(req) = preset {
                    if req != l {
                        return bad(format!("preset `{}` needs spin {}, got {s}", self.model.preset, (req - 1) as f64 / 2.0));
                    }
                }
                Ok(l)
            }
            (None, Some(l)) => Ok(l),
            (None, None) => Ok(1),
        }
    }

    pub fn flux(&self) -> Result<Flux, ConfigError> {
        let Some(text) = &self.model.flux else {
            return Ok(Flux::ZERO);
        };
        let parse = |t: &str| t.trim().parse::<i64>().map_err(|_| ConfigError(format!("flux `{text}` is not p/q")));
        let (p, q) = match text.split_once('/') {
            Some((p, q)) => (parse(p)?, parse(q)?),
            None => (parse(text)?, 1),
        };
        Flux::new(p, q).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn kinetic(&self) -> Result<Kinetic, ConfigError> {
        Ok(match self.model.kinetic {
            Some(KineticName::Laplacian) => Kinetic::Laplacian,
            Some(KineticName::Magnetic) => Kinetic::MagneticLaplacian,
            None if self.flux()?.is_zero() => Kinetic::Laplacian,
            None => Kinetic::MagneticLaplacian,
        })
    }

    pub fn perturbation(&self) -> Result<Perturbation, ConfigError> {
        self.kubo.perturbation.parse().map_err(|e: bdglab::Error| ConfigError(e.to_string()))
    }

    /// Disorder seeds, shifted by `seed_base`; `None` stands for the clean model.
    pub fn seeds(&self, seed_base: u64) -> Vec<Option<u64>> {
        let d = &self.disorder;
        if d.w == 0.0 && d.seeds.is_none() && d.seed_count.is_none() {
            return vec![None];
        }
        let raw: Vec<u64> = match (&d.seeds, d.seed_count) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => (0..n as u64).collect(),
            (None, None) => vec![0],
        };
        raw.into_iter().map(|s| Some(s.wrapping_add(seed_base))).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return bad("the task list is empty");
        }
        let mut seen = self.tasks.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.tasks.len() {
            return bad("the task list contains duplicates");
        }
        self.pairing()?;
        self.fiber_l()?;
        let flux = self.flux()?;
        if self.kinetic()? == Kinetic::Laplacian && !flux.is_zero() {
            return bad("a nonzero flux needs the magnetic kinetic term");
        }
        let m = &self.model;
        if !m.mu.is_finite() || !m.amplitude.is_finite() {
            return bad("mu and amplitude must be finite");
        }
        let l = &self.lattice;
        if l.n1 == 0 || l.n2 == 0 {
            return bad("lattice sizes must be positive");
        }
        if l.twists == 0 {
            return bad("twists must be positive");
        }
        if self.tasks.iter().any(Task::needs_cylinder) {
            match l.width {
                None => return bad("edge_current and winding need lattice.width"),
                Some(w) if w > l.n2 => return bad(format!("width {w} exceeds n2 = {}", l.n2)),
                Some(w) => {
                    if let Some(d) = l.depth {
                        if d == 0 || d > w {
                            return bad(format!("depth {d} outside 1..={w}"));
                        }
                    }
                }
            }
        }
        let d = &self.disorder;
        if !(d.w >= 0.0 && d.w.is_finite()) {
            return bad(format!("disorder strength must be finite and >= 0, got {}", d.w));
        }
        if d.seeds.is_some() && d.seed_count.is_some() {
            return bad("give either disorder.seeds or disorder.seed_count, not both");
        }
        if matches!(&d.seeds, Some(s) if s.is_empty()) || d.seed_count == Some(0) {
            return bad("the seed list is empty");
        }
        let k = &self.kubo;
        if !(k.beta > 0.0) {
            return bad(format!("kubo.beta must lie in (0, inf], got {}", k.beta));
        }
        if k.deltas.is_empty() || k.deltas.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return bad("kubo.deltas must be a nonempty list of positive numbers");
        }
        self.perturbation()?;
        let t = &self.thermal.t_over_gap;
        if t.is_empty() || t.iter().any(|x| !(*x > 0.0 && *x <= 0.1)) {
            return bad("thermal.t_over_gap must be a nonempty list in (0, 0.1]");
        }
        let w = &self.edge.windows;
        if w.is_empty() || w.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return bad("edge.windows must be a nonempty list in (0, 1)");
        }
        if self.output.formats.is_empty() {
            return bad("output.formats is empty");
        }
        Ok(())
    }

    /// The configuration with one sweep parameter replaced.
    pub fn with_axis(&self, axis: Axis, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        match axis {
            Axis::Mu => c.model.mu = value,
            Axis::Amplitude => c.model.amplitude = value,
            Axis::W => c.disorder.w = value,
            Axis::Delta => c.kubo.deltas = vec![value],
            Axis::Beta => c.kubo.beta = value,
            Axis::TOverGap => c.thermal.t_over_gap = vec![value],
            Axis::Width => {
                if value < 1.0 || value.fract() != 0.0 {
                    return bad(format!("width must be a positive integer, got {value}"));
                }
                c.lattice.width = Some(value as usize);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
tasks = ["chern_realspace"]
[model]
preset = "p_plus_ip"
mu = -1.0
[lattice]
n1 = 8
n2 = 8
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.fiber_l().unwrap(), 1);
        assert_eq!(c.kubo.beta, f64::INFINITY);
        assert_eq!(c.seeds(0), vec![None]);
        assert_eq!(c.lattice.twists, 32);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("mu = -1.0", "mu = -1.0\ncolour = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = format!("{BASE}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [
            ("[\"chern_realspace\"]", "[]"),
            ("p_plus_ip", "f_wave"),
            ("mu = -1.0", "mu = -1.0\nspin = 0.5"),
            ("[\"chern_realspace\"]", "[\"winding\"]"),
            ("n1 = 8", "n1 = 0"),
        ] {
            assert!(ExperimentConfig::from_toml(&BASE.replace(from, to)).is_err(), "{to}");
        }
    }

    #[test]
    fn seeds_are_offset() {
        let text = format!("{BASE}\n[disorder]\nw = 0.5\nseed_count = 3\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.seeds(10), vec![Some(10), Some(11), Some(12)]);
    }

    #[test]
    fn sweeps_replace_one_parameter() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        let s = c.with_axis("mu".parse().unwrap(), -3.0).unwrap();
        assert_eq!(s.model.mu, -3.0);
        assert!("temperature".parse::<Axis>().is_err());
        assert!(c.with_axis(Axis::Width, 2.5).is_err());
    }
}
