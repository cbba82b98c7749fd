//! Scenario configuration files.
//!
//! A config is a flat TOML document: a few top-level keys plus one level of
//! sections holding `key = value` pairs. Every key has a default, so a
//! config only needs to name the scenario and whatever it changes.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use timemachine_core::ensemble::{DensityShape, DensitySpec};
use timemachine_core::{ModelParams, PotentialSpec};

use crate::scenario::ScenarioKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    /// Output file stem; defaults to the scenario name.
    pub name: Option<String>,
    pub params: ParamsSection,
    /// `V(x)`.
    pub potential: PotentialSection,
    /// `𝒱(τ)`.
    pub internal_potential: PotentialSection,
    pub initial: InitialSection,
    pub run: RunSection,
    pub density: Option<DensitySection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub l: f64,
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub big_omega: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub taubar: f64,
    pub phi: f64,
    pub x1: f64,
    pub dt: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            l: p.l,
            omega: p.omega,
            big_omega: p.big_omega,
            e0: p.e0,
            lambda: p.lambda,
            zeta: p.zeta,
            taubar: p.taubar,
            phi: p.phi,
            x1: p.x1,
            dt: p.dt,
        }
    }
}

impl ParamsSection {
    pub fn to_model(self) -> ModelParams {
        ModelParams {
            l: self.l,
            omega: self.omega,
            big_omega: self.big_omega,
            e0: self.e0,
            lambda: self.lambda,
            zeta: self.zeta,
            taubar: self.taubar,
            phi: self.phi,
            x1: self.x1,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    /// `zero`, `constant`, `linear` or `harmonic`.
    pub kind: String,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            c0: 0.0,
            c1: 0.0,
            c2: 0.0,
        }
    }
}

impl PotentialSection {
    fn to_spec(&self, section: &str, errors: &mut Vec<FieldError>) -> Option<PotentialSpec> {
        let spec = match self.kind.as_str() {
            "zero" => Some(PotentialSpec::zero()),
            "constant" => Some(PotentialSpec::constant(self.c0)),
            "linear" => Some(PotentialSpec::linear(self.c1).with_offset(self.c0)),
            "harmonic" => match PotentialSpec::harmonic(self.c2) {
                Ok(s) => Some(s.with_offset(self.c0)),
                Err(_) => {
                    errors.push(FieldError::new(
                        format!("{section}.c2"),
                        "must be > 0 for a harmonic potential",
                    ));
                    None
                }
            },
            other => {
                errors.push(FieldError::new(
                    format!("{section}.kind"),
                    format!("unknown kind `{other}` (expected zero, constant, linear or harmonic)"),
                ));
                None
            }
        };
        for (k, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if !v.is_finite() {
                errors.push(FieldError::new(format!("{section}.{k}"), "must be finite"));
            }
        }
        spec
    }
}

/// Initial data. Discrete and continuum scenarios read `(x, tau, p, pcal)`;
/// hybrid scenarios read `(x, p, X1, X2, P1, P2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub x: f64,
    pub tau: f64,
    pub p: f64,
    pub pcal: f64,
    #[serde(rename = "X1")]
    pub qx1: f64,
    #[serde(rename = "X2")]
    pub qx2: f64,
    #[serde(rename = "P1")]
    pub qp1: f64,
    #[serde(rename = "P2")]
    pub qp2: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            x: 1.0,
            tau: 0.0,
            p: 0.0,
            pcal: 1.0,
            qx1: 1.0,
            qx2: 0.0,
            qp1: 0.0,
            qp2: 1.0,
        }
    }
}

impl InitialSection {
    pub fn discrete(&self) -> [f64; 4] {
        [self.x, self.tau, self.p, self.pcal]
    }

    pub fn hybrid(&self) -> [f64; 6] {
        [self.x, self.p, self.qx1, self.qx2, self.qp1, self.qp2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub steps: u64,
    /// Keep every `stride`-th row (and the last one).
    pub stride: u64,
    /// Ensemble size.
    pub members: u64,
    /// Allowed `|C − 1|` before a hybrid run is aborted.
    pub constraint_tolerance: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            steps: 1000,
            stride: 1,
            members: 32,
            constraint_tolerance: timemachine_core::hybrid::DEFAULT_CONSTRAINT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySection {
    /// `gaussian`, `uniform-box` or `point`.
    pub shape: String,
    pub center: Vec<f64>,
    pub widths: Vec<f64>,
    pub seed: u64,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self {
            shape: "point".into(),
            center: Vec::new(),
            widths: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: Box<toml::de::Error> },
    #[error("invalid configuration:\n{}", list(.0))]
    Invalid(Vec<FieldError>),
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n")
}

/// A configuration that passed validation, with typed values.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub kind: ScenarioKind,
    pub params: ModelParams,
    pub v: PotentialSpec,
    pub vtau: PotentialSpec,
    pub density: Option<DensitySpec>,
    pub raw: ScenarioConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn file_stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.scenario.clone())
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let mut errors = Vec::new();
        let kind = ScenarioKind::parse(&self.scenario);
        if kind.is_none() {
            errors.push(FieldError::new(
                "scenario",
                format!("unknown scenario `{}` (see `timemachine scenarios`)", self.scenario),
            ));
        }

        let p = &self.params;
        let numeric = [
            ("params.l", p.l),
            ("params.omega", p.omega),
            ("params.Omega", p.big_omega),
            ("params.E0", p.e0),
            ("params.lambda", p.lambda),
            ("params.zeta", p.zeta),
            ("params.taubar", p.taubar),
            ("params.phi", p.phi),
            ("params.x1", p.x1),
            ("params.dt", p.dt),
        ];
        for (name, v) in numeric {
            if !v.is_finite() {
                errors.push(FieldError::new(name, "must be finite"));
            }
        }
        for (name, v) in [("params.l", p.l), ("params.dt", p.dt), ("params.omega", p.omega)] {
            if v.is_finite() && v <= 0.0 {
                errors.push(FieldError::new(name, "must be > 0"));
            }
        }
        if p.big_omega.is_finite() && p.big_omega < 0.0 {
            errors.push(FieldError::new("params.Omega", "must be >= 0"));
        }
        for (name, v) in [
            ("initial.x", self.initial.x),
            ("initial.tau", self.initial.tau),
            ("initial.p", self.initial.p),
            ("initial.pcal", self.initial.pcal),
            ("initial.X1", self.initial.qx1),
            ("initial.X2", self.initial.qx2),
            ("initial.P1", self.initial.qp1),
            ("initial.P2", self.initial.qp2),
        ] {
            if !v.is_finite() {
                errors.push(FieldError::new(name, "must be finite"));
            }
        }
        if self.run.steps == 0 {
            errors.push(FieldError::new("run.steps", "must be >= 1"));
        }
        if self.run.stride == 0 {
            errors.push(FieldError::new("run.stride", "must be >= 1"));
        }
        if !(self.run.constraint_tolerance > 0.0) {
            errors.push(FieldError::new("run.constraint_tolerance", "must be > 0"));
        }

        let v = self.potential.to_spec("potential", &mut errors);
        let vtau = self.internal_potential.to_spec("internal_potential", &mut errors);

        let density = match (&self.density, kind) {
            (Some(d), Some(k)) if k.is_ensemble() => self.density_spec(d, k, &mut errors),
            (None, Some(k)) if k.is_ensemble() => {
                errors.push(FieldError::new(
                    "density",
                    "ensemble scenarios need a [density] section",
                ));
                None
            }
            _ => None,
        };
        if kind.is_some_and(|k| k.is_ensemble()) && self.run.members == 0 {
            errors.push(FieldError::new("run.members", "must be >= 1"));
        }

        if let (Some(kind), Some(v), Some(vtau)) = (kind, v, vtau) {
            kind.check_requirements(self, &v, &vtau, &mut errors);
        }

        if !errors.is_empty() {
            return Err(ConfigError::Invalid(errors));
        }
        Ok(Validated {
            kind: kind.expect("checked above"),
            params: p.to_model(),
            v: v.expect("checked above"),
            vtau: vtau.expect("checked above"),
            density,
            raw: self.clone(),
        })
    }

    fn density_spec(
        &self,
        d: &DensitySection,
        kind: ScenarioKind,
        errors: &mut Vec<FieldError>,
    ) -> Option<DensitySpec> {
        let shape = match d.shape.as_str() {
            "gaussian" => DensityShape::Gaussian,
            "uniform-box" => DensityShape::UniformBox,
            "point" => DensityShape::Point,
            other => {
                errors.push(FieldError::new(
                    "density.shape",
                    format!("unknown shape `{other}` (expected gaussian, uniform-box or point)"),
                ));
                return None;
            }
        };
        let dim = kind.sample_dim();
        let mut ok = true;
        if d.center.len() != dim {
            errors.push(FieldError::new("density.center", format!("needs {dim} entries")));
            ok = false;
        }
        if d.center.iter().any(|c| !c.is_finite()) {
            errors.push(FieldError::new("density.center", "must be finite"));
            ok = false;
        }
        if shape != DensityShape::Point {
            if d.widths.len() != dim {
                errors.push(FieldError::new("density.widths", format!("needs {dim} entries")));
                ok = false;
            } else if d.widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                errors.push(FieldError::new("density.widths", "must be finite and > 0"));
                ok = false;
            }
        }
        ok.then(|| DensitySpec {
            shape,
            center: d.center.clone(),
            widths: if shape == DensityShape::Point {
                vec![0.0; dim]
            } else {
                d.widths.clone()
            },
            seed: d.seed,
        })
    }
}

/// Pushes an error onto `errors`; used by scenario-specific checks.
pub(crate) fn reject(errors: &mut Vec<FieldError>, field: &str, message: &str) {
    errors.push(FieldError::new(field, message));
}
