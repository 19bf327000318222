//! TOML run configuration.
//!
//! ```toml
//! [model]
//! cross_lead = "damped"        # optional
//! [model.hot]
//! beta = 0.2
//! half_bandwidth = 3.0
//! spacing = 0.03
//! coupling = 0.5               # Γ; `damping` (γ) defaults to `spacing`
//! [model.cold]
//! beta = 1.5
//! half_bandwidth = 3.0
//! spacing = 0.03
//! coupling = 0.5
//! [model.protocol]
//! epsilon1 = 2.0
//! epsilon2 = 1.0
//! t1 = 20.0
//! t2 = 10.0
//! t3 = 20.0
//! t4 = 10.0
//! [numerics]
//! dt = 0.1
//! cycles = 10
//! dot_occupation = 0.0
//! [sweep]
//! coupling = [0.05, 0.2, 0.5]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrossLead, LeadSpec, Model};
use crate::propagate::{plan_segments, RunOptions};
use crate::protocol::OttoProtocol;
use crate::regime::GridAxis;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hot: LeadSpec,
    pub cold: LeadSpec,
    #[serde(default)]
    pub protocol: OttoProtocol,
    #[serde(default)]
    pub cross_lead: CrossLead,
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        Ok(Model::new(self.hot.clone(), self.cold.clone(), self.protocol.clone())?.with_cross_lead(self.cross_lead))
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write the decimated per-step observables.
    #[serde(default = "yes")]
    pub samples: bool,
    /// Dump σ at every stroke boundary in the binary checkpoint format.
    #[serde(default)]
    pub checkpoints: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            samples: true,
            checkpoints: false,
        }
    }
}

/// Parameter lists for sweeps and convergence studies. Lead parameters are
/// applied to both leads.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub damping: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spacing: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub half_bandwidth: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dt: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Coupling,
    Damping,
    Spacing,
    HalfBandwidth,
    Dt,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::Coupling, Axis::Damping, Axis::Spacing, Axis::HalfBandwidth, Axis::Dt];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Coupling => "coupling",
            Axis::Damping => "damping",
            Axis::Spacing => "spacing",
            Axis::HalfBandwidth => "half_bandwidth",
            Axis::Dt => "dt",
        }
    }
}

impl Axes {
    pub fn values(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::Coupling => &self.coupling,
            Axis::Damping => &self.damping,
            Axis::Spacing => &self.spacing,
            Axis::HalfBandwidth => &self.half_bandwidth,
            Axis::Dt => &self.dt,
        }
    }

    pub fn is_empty(&self) -> bool {
        Axis::ALL.iter().all(|&a| self.values(a).is_empty())
    }

    /// Non-empty axes in fixed order.
    pub fn active(&self) -> Vec<(Axis, &[f64])> {
        Axis::ALL
            .iter()
            .map(|&a| (a, self.values(a)))
            .filter(|(_, v)| !v.is_empty())
            .collect()
    }

    fn validate(&self, section: &str) -> Result<()> {
        for (axis, vals) in self.active() {
            if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "{section}.{}: values must be finite and non-negative",
                    axis.name()
                )));
            }
        }
        Ok(())
    }

    /// Cartesian product of the active axes, last axis varying fastest.
    pub fn combinations(&self) -> Vec<Vec<(Axis, f64)>> {
        let mut out = vec![Vec::new()];
        for (axis, vals) in self.active() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((axis, v));
                        p
                    })
                })
                .collect();
        }
        if self.is_empty() {
            out.clear();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub eps1: GridAxis,
    pub eps2: GridAxis,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig {
            eps1: GridAxis::new(-4.0, 4.0, 81),
            eps2: GridAxis::new(-4.0, 4.0, 81),
        }
    }
}

fn default_tolerance() -> f64 {
    0.02
}

/// Axes varied one at a time around the base run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub damping: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spacing: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub half_bandwidth: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dt: Vec<f64>,
    /// Largest accepted relative deviation from the finest setting.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ConvergeConfig {
    pub fn axes(&self) -> Axes {
        Axes {
            coupling: self.coupling.clone(),
            damping: self.damping.clone(),
            spacing: self.spacing.clone(),
            half_bandwidth: self.half_bandwidth.clone(),
            dt: self.dt.clone(),
        }
    }
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            coupling: Vec::new(),
            damping: Vec::new(),
            spacing: Vec::new(),
            half_bandwidth: Vec::new(),
            dt: Vec::new(),
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: RunOptions,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Axes::is_empty")]
    pub sweep: Axes,
    #[serde(default)]
    pub regime: RegimeConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
}

impl Default for RunConfig {
    /// Working point of the reference engine at Γ = 0.5 on the desk-scale
    /// grid `D = 3`, `Δε = 0.03`.
    fn default() -> Self {
        RunConfig {
            model: ModelConfig {
                hot: LeadSpec::new(0.2, 3.0, 0.03, 0.5),
                cold: LeadSpec::new(1.5, 3.0, 0.03, 0.5),
                protocol: OttoProtocol::default(),
                cross_lead: CrossLead::default(),
            },
            numerics: RunOptions::default(),
            output: OutputConfig::default(),
            sweep: Axes::default(),
            regime: RegimeConfig::default(),
            converge: ConvergeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Builds the model and checks the numerics against the protocol.
    pub fn build(&self) -> Result<Model> {
        let model = self.model.build()?;
        self.numerics.validate()?;
        plan_segments(&model, self.numerics.dt)?;
        Ok(model)
    }

    /// Full validation of the base run and every auxiliary section.
    pub fn validate(&self) -> Result<()> {
        self.build()?;
        self.sweep.validate("sweep")?;
        self.converge.axes().validate("converge")?;
        if !(self.converge.tolerance > 0.0 && self.converge.tolerance.is_finite()) {
            return Err(Error::InvalidConfig("converge.tolerance must be positive".into()));
        }
        self.regime.eps1.validate("regime.eps1")?;
        self.regime.eps2.validate("regime.eps2")?;
        Ok(())
    }

    /// Copy with one parameter replaced.
    pub fn with(&self, axis: Axis, value: f64) -> RunConfig {
        let mut c = self.clone();
        match axis {
            Axis::Dt => c.numerics.dt = value,
            _ => {
                for lead in [&mut c.model.hot, &mut c.model.cold] {
                    match axis {
                        Axis::Coupling => lead.coupling = value,
                        Axis::Damping => lead.damping = Some(value),
                        Axis::Spacing => lead.spacing = value,
                        Axis::HalfBandwidth => lead.half_bandwidth = value,
                        Axis::Dt => unreachable!(),
                    }
                }
            }
        }
        c
    }

    pub fn with_all(&self, point: &[(Axis, f64)]) -> RunConfig {
        point.iter().fold(self.clone(), |c, &(a, v)| c.with(a, v))
    }
}
