//! TOML experiment configuration. Unknown keys are rejected and every error
//! names the line it refers to.

use std::f64::consts::TAU;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bec::CondensateSpec;
use crate::error::{Error, Result};
use crate::optical::InitialState;
use crate::scattering::{LightSpec, ParticleEnsemble, ViewCone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Optical,
    Bec,
    Scattering,
    Oracle,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Optical => "optical",
            Scenario::Bec => "bec",
            Scenario::Scattering => "scattering",
            Scenario::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optical: Option<OpticalConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec: Option<BecConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scattering: Option<ScatteringConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

fn default_seed() -> u64 {
    7
}
fn default_runs() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem for the data files; the scenario name when absent.
    pub name: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            name: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Fock,
    Poissonian,
    Thermal,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    pub state: StateKind,
    /// Photons per mode for `fock`.
    pub n: Option<usize>,
    pub nbar: Option<f64>,
    /// Second-mode mean for `asymmetric`.
    pub mbar: Option<f64>,
    #[serde(default = "default_eps_total")]
    pub eps_total: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default)]
    pub random_tau: bool,
    #[serde(default = "default_optical_grid")]
    pub n_grid: usize,
}

fn default_eps_total() -> f64 {
    0.2
}
fn one() -> f64 {
    1.0
}
fn default_optical_grid() -> usize {
    1024
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondensateKindConfig {
    Poissonian,
    Fock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BecConfig {
    #[serde(default = "default_bec_kind")]
    pub kind: CondensateKindConfig,
    #[serde(default = "default_atoms")]
    pub n: f64,
    #[serde(default = "default_atoms")]
    pub m: f64,
    #[serde(default = "default_detections")]
    pub detections: usize,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default)]
    pub per_run_csv: bool,
}

fn default_bec_kind() -> CondensateKindConfig {
    CondensateKindConfig::Poissonian
}
fn default_atoms() -> f64 {
    1000.0
}
fn default_detections() -> usize {
    50
}

impl Default for BecConfig {
    fn default() -> Self {
        BecConfig {
            kind: default_bec_kind(),
            n: default_atoms(),
            m: default_atoms(),
            detections: default_detections(),
            k: 1.0,
            per_run_csv: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Free,
    Rubber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightConfig {
    Mono,
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    #[serde(default = "default_light")]
    pub light: LightConfig,
    #[serde(default = "default_k")]
    pub k: f64,
    pub nbar: Option<f64>,
    /// Thermal spread in units of the wavelength `2 pi / k`.
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    #[serde(default = "default_view")]
    pub view: f64,
    /// Fixed record counts; free model uses forward/deflect, rubber left/right.
    #[serde(default)]
    pub forward: usize,
    #[serde(default)]
    pub deflect: usize,
    #[serde(default)]
    pub left: usize,
    #[serde(default)]
    pub right: usize,
    /// Sampled mode: packets per run, `n_runs` runs.
    pub packets: Option<usize>,
    #[serde(default = "default_scatter_grid")]
    pub n_grid: usize,
}

fn default_model() -> ModelConfig {
    ModelConfig::Free
}
fn default_light() -> LightConfig {
    LightConfig::Mono
}
fn default_k() -> f64 {
    5.0
}
fn default_d() -> f64 {
    0.2
}
fn default_upper() -> f64 {
    2.0
}
fn default_view() -> f64 {
    crate::scattering::DEFAULT_VIEW
}
fn default_scatter_grid() -> usize {
    2001
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            model: default_model(),
            light: default_light(),
            k: default_k(),
            nbar: None,
            d: default_d(),
            lower: 0.0,
            upper: default_upper(),
            view: default_view(),
            forward: 0,
            deflect: 0,
            left: 0,
            right: 0,
            packets: None,
            n_grid: default_scatter_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    #[serde(default = "default_eps_total")]
    pub eps: f64,
}

fn default_oracle_n() -> usize {
    20
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n: default_oracle_n(),
            eps: default_eps_total(),
        }
    }
}

/// 1-based line holding `key` inside `[section]` (top level when `None`).
/// Falls back to the section header, then to line 1.
pub fn key_line(src: &str, section: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = Some(name.trim().to_string());
            if section == Some(name.trim()) {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of_offset(src, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            seed: default_seed(),
            n_runs: default_runs(),
            output: OutputConfig::default(),
            optical: None,
            bec: None,
            scattering: None,
            oracle: None,
        }
    }

    pub fn stem(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| self.scenario.name().to_string())
    }

    /// Check cross-field constraints; `src` anchors messages to lines.
    pub fn validate(&self, src: &str) -> Result<()> {
        let err = |section: Option<&str>, key: &str, message: String| Error::Config {
            line: key_line(src, section, key),
            message,
        };
        let sections = [
            (Scenario::Optical, self.optical.is_some()),
            (Scenario::Bec, self.bec.is_some()),
            (Scenario::Scattering, self.scattering.is_some()),
            (Scenario::Oracle, self.oracle.is_some()),
        ];
        for (s, present) in sections {
            if present && s != self.scenario {
                return Err(err(
                    Some(s.name()),
                    "",
                    format!("section [{}] does not apply to scenario {}", s.name(), self.scenario.name()),
                ));
            }
        }
        if self.n_runs == 0 {
            return Err(err(None, "n_runs", "n_runs must be at least 1".into()));
        }
        match self.scenario {
            Scenario::Optical => {
                let o = self
                    .optical
                    .as_ref()
                    .ok_or_else(|| err(None, "scenario", "scenario optical needs an [optical] section".into()))?;
                let state = self.initial_state().map_err(|e| err(Some("optical"), "state", strip(e)))?;
                state.validate().map_err(|e| err(Some("optical"), "nbar", strip(e)))?;
                if !(o.eps_total > 0.0 && o.eps_total.is_finite()) {
                    return Err(err(Some("optical"), "eps_total", "eps_total must be positive".into()));
                }
                if !(o.efficiency > 0.0 && o.efficiency <= 1.0) {
                    return Err(err(Some("optical"), "efficiency", "efficiency must lie in (0, 1]".into()));
                }
                if o.n_grid < 8 {
                    return Err(err(Some("optical"), "n_grid", "n_grid must be at least 8".into()));
                }
            }
            Scenario::Bec => {
                let b = self.bec.clone().unwrap_or_default();
                if b.detections == 0 {
                    return Err(err(Some("bec"), "detections", "detections must be at least 1".into()));
                }
                if !(b.k > 0.0 && b.k.is_finite()) {
                    return Err(err(Some("bec"), "k", "k must be positive".into()));
                }
                if b.kind == CondensateKindConfig::Fock && (b.n.fract() != 0.0 || b.m.fract() != 0.0 || b.n < 0.0 || b.m < 0.0) {
                    return Err(err(Some("bec"), "n", "Fock condensates need whole atom numbers".into()));
                }
                self.condensate().map_err(|e| err(Some("bec"), "n", strip(e)))?;
            }
            Scenario::Scattering => {
                let s = self.scattering.clone().unwrap_or_default();
                if s.light == LightConfig::Thermal && s.nbar.is_none() {
                    return Err(err(Some("scattering"), "light", "thermal light needs nbar".into()));
                }
                if s.light == LightConfig::Mono && s.nbar.is_some() {
                    return Err(err(Some("scattering"), "nbar", "nbar only applies to thermal light".into()));
                }
                if !(s.nbar.unwrap_or(1.0) > 0.0) {
                    return Err(err(Some("scattering"), "nbar", "nbar must be positive".into()));
                }
                self.light().map_err(|e| err(Some("scattering"), "k", strip(e)))?;
                self.ensemble().map_err(|e| err(Some("scattering"), "upper", strip(e)))?;
                ViewCone::new(s.view).map_err(|e| err(Some("scattering"), "view", strip(e)))?;
                if s.n_grid < 3 {
                    return Err(err(Some("scattering"), "n_grid", "n_grid must be at least 3".into()));
                }
                match s.model {
                    ModelConfig::Free if s.left + s.right > 0 => {
                        return Err(err(Some("scattering"), "left", "left/right counts belong to the rubber model".into()));
                    }
                    ModelConfig::Rubber if s.forward + s.deflect > 0 => {
                        return Err(err(Some("scattering"), "forward", "forward/deflect counts belong to the free model".into()));
                    }
                    ModelConfig::Rubber if s.packets.is_some() => {
                        return Err(err(Some("scattering"), "packets", "sampled runs need the free model".into()));
                    }
                    _ => {}
                }
            }
            Scenario::Oracle => {
                let o = self.oracle.clone().unwrap_or_default();
                if o.n == 0 || o.n > 60 {
                    return Err(err(Some("oracle"), "n", "n must lie in 1..=60".into()));
                }
                if !(o.eps > 0.0 && o.eps < 1.0) {
                    return Err(err(Some("oracle"), "eps", "eps must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        let o = self.optical.as_ref().ok_or_else(|| Error::invalid("missing [optical] section"))?;
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| Error::invalid(format!("state needs {what}")));
        Ok(match o.state {
            StateKind::Fock => InitialState::Fock(o.n.ok_or_else(|| Error::invalid("state fock needs n"))?),
            StateKind::Poissonian => InitialState::Poissonian(need(o.nbar, "nbar")?),
            StateKind::Thermal => InitialState::Thermal(need(o.nbar, "nbar")?),
            StateKind::Asymmetric => InitialState::AsymPoissonian {
                nbar: need(o.nbar, "nbar")?,
                mbar: need(o.mbar, "mbar")?,
            },
        })
    }

    pub fn condensate(&self) -> Result<CondensateSpec> {
        let b = self.bec.clone().unwrap_or_default();
        let spec = match b.kind {
            CondensateKindConfig::Poissonian => CondensateSpec::poissonian(b.n, b.m),
            CondensateKindConfig::Fock => CondensateSpec::fock(b.n as usize, b.m as usize),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn light(&self) -> Result<LightSpec> {
        let s = self.scattering.clone().unwrap_or_default();
        let light = match s.light {
            LightConfig::Mono => LightSpec::Mono { k: s.k },
            LightConfig::Thermal => LightSpec::Thermal {
                k: s.k,
                nbar: s.nbar.unwrap_or(f64::NAN),
            },
        };
        light.validate()?;
        Ok(light)
    }

    /// Particle ensemble with `d` converted from wavelengths to lengths.
    pub fn ensemble(&self) -> Result<ParticleEnsemble> {
        let s = self.scattering.clone().unwrap_or_default();
        ParticleEnsemble::new(s.lower, s.upper, s.d * TAU / s.k)
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidParameter(m) | Error::InvalidRecord(m) | Error::UnsupportedSpec(m) => m,
        other => other.to_string(),
    }
}
