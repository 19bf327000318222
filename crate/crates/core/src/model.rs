//! Discretized leads and the arrowhead block Hamiltonian of dot + leads.

use std::ops::Range;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Drive, Lead, OttoProtocol};

/// Fermi-Dirac occupation `1 / (exp(β(ε−μ)) + 1)`, evaluated without overflow.
pub fn fermi(energy: f64, beta: f64, mu: f64) -> f64 {
    let x = beta * (energy - mu);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// A wideband lead: `levels` equally spaced states on `[-D, D]` with uniform
/// tunneling to the dot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadSpec {
    pub beta: f64,
    #[serde(default)]
    pub mu: f64,
    /// Half-bandwidth D.
    pub half_bandwidth: f64,
    /// Level spacing Δε = 2D/N.
    pub spacing: f64,
    /// Hybridization Γ.
    pub coupling: f64,
    /// Superbath damping rate γ; defaults to the level spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
}

impl LeadSpec {
    pub fn new(beta: f64, half_bandwidth: f64, spacing: f64, coupling: f64) -> Self {
        LeadSpec {
            beta,
            mu: 0.0,
            half_bandwidth,
            spacing,
            coupling,
            damping: None,
        }
    }

    pub fn damping(&self) -> f64 {
        self.damping.unwrap_or(self.spacing)
    }

    pub fn levels(&self) -> usize {
        (2.0 * self.half_bandwidth / self.spacing).round() as usize
    }

    pub fn tunneling(&self) -> f64 {
        (self.coupling * self.spacing / (2.0 * std::f64::consts::PI)).sqrt()
    }

    /// Level energies at interval midpoints `−D + (k − ½)Δε`, `k = 1..N`.
    pub fn level_energies(&self) -> Vec<f64> {
        let n = self.levels();
        (0..n)
            .map(|k| -self.half_bandwidth + (k as f64 + 0.5) * self.spacing)
            .collect()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("{name} lead: {msg}")));
        let finite = [self.beta, self.mu, self.half_bandwidth, self.spacing, self.coupling];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if self.beta <= 0.0 {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.half_bandwidth <= 0.0 || self.spacing <= 0.0 {
            return bad("half_bandwidth and spacing must be positive".into());
        }
        let ratio = 2.0 * self.half_bandwidth / self.spacing;
        if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return bad(format!("2D/spacing = {ratio} is not a whole number of levels"));
        }
        if self.coupling < 0.0 {
            return bad("coupling must be non-negative".into());
        }
        // Γ = 0 is a decoupled lead; any other value must be resolved by the grid.
        if self.coupling > 0.0 && self.coupling <= self.spacing {
            return bad(format!(
                "coupling {} must exceed the level spacing {}",
                self.coupling, self.spacing
            ));
        }
        if self.coupling >= 2.0 * self.half_bandwidth {
            return bad(format!(
                "coupling {} must be below the bandwidth {}",
                self.coupling,
                2.0 * self.half_bandwidth
            ));
        }
        let g = self.damping();
        if !(g.is_finite() && g >= 0.0) {
            return bad("damping must be non-negative".into());
        }
        Ok(())
    }
}

/// Index layout `[hot lead | dot | cold lead]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_hot: usize,
    pub n_cold: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Hot,
    Dot,
    Cold,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.n_hot + 1 + self.n_cold
    }

    pub fn dot(&self) -> usize {
        self.n_hot
    }

    pub fn hot(&self) -> Range<usize> {
        0..self.n_hot
    }

    pub fn cold(&self) -> Range<usize> {
        self.n_hot + 1..self.dim()
    }

    pub fn lead(&self, lead: Lead) -> Range<usize> {
        match lead {
            Lead::Hot => self.hot(),
            Lead::Cold => self.cold(),
        }
    }

    pub fn region(&self, i: usize) -> Region {
        if i < self.n_hot {
            Region::Hot
        } else if i == self.n_hot {
            Region::Dot
        } else {
            Region::Cold
        }
    }
}

/// Arrowhead Hamiltonian: diagonal `energies` plus a real border `coupling`
/// in the dot row and column. `coupling[dot] == 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockHamiltonian {
    pub layout: Layout,
    pub energies: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl BlockHamiltonian {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn dot_energy(&self) -> f64 {
        self.energies[self.layout.dot()]
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dim();
        let d = self.layout.dot();
        let mut h = Array2::zeros((n, n));
        for i in 0..n {
            h[[i, i]] = C64::new(self.energies[i], 0.0);
            if i != d {
                h[[i, d]] = C64::new(self.coupling[i], 0.0);
                h[[d, i]] = C64::new(self.coupling[i], 0.0);
            }
        }
        h
    }
}

/// Treatment of the hot↔cold coherence block of σ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossLead {
    /// Relaxed at the mean of the two lead rates.
    #[default]
    Damped,
    /// Evolved with no damping. Finite leads then show recurrences at
    /// multiples of `2π/Δε`.
    Undamped,
    /// Held at zero.
    Dropped,
}

/// Validated dot + two-lead model with its discretization precomputed.
#[derive(Clone, Debug)]
pub struct Model {
    pub hot: LeadSpec,
    pub cold: LeadSpec,
    pub protocol: OttoProtocol,
    pub cross_lead: CrossLead,
    layout: Layout,
    lead_energies: Vec<f64>,
    tunneling: Vec<f64>,
    equilibrium: Vec<f64>,
    damping: [f64; 2],
}

impl Model {
    pub fn new(hot: LeadSpec, cold: LeadSpec, protocol: OttoProtocol) -> Result<Self> {
        hot.validate("hot")?;
        cold.validate("cold")?;
        protocol.validate()?;
        let layout = Layout {
            n_hot: hot.levels(),
            n_cold: cold.levels(),
        };
        let n = layout.dim();
        let mut lead_energies = vec![0.0; n];
        let mut tunneling = vec![0.0; n];
        let mut equilibrium = vec![0.0; n];
        for (spec, range) in [(&hot, layout.hot()), (&cold, layout.cold())] {
            let t = spec.tunneling();
            for (i, e) in range.zip(spec.level_energies()) {
                lead_energies[i] = e;
                tunneling[i] = t;
                equilibrium[i] = fermi(e, spec.beta, spec.mu);
            }
        }
        let damping = [hot.damping(), cold.damping()];
        Ok(Model {
            hot,
            cold,
            protocol,
            cross_lead: CrossLead::default(),
            layout,
            lead_energies,
            tunneling,
            equilibrium,
            damping,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn lead_spec(&self, lead: Lead) -> &LeadSpec {
        match lead {
            Lead::Hot => &self.hot,
            Lead::Cold => &self.cold,
        }
    }

    /// Lead level energies on the full index range (zero at the dot).
    pub fn lead_energies(&self) -> &[f64] {
        &self.lead_energies
    }

    pub fn with_cross_lead(mut self, cross_lead: CrossLead) -> Self {
        self.cross_lead = cross_lead;
        self
    }

    /// Unscaled tunneling amplitudes t_v on the full index range.
    pub fn tunneling(&self) -> &[f64] {
        &self.tunneling
    }

    /// Diagonal of the equilibrium lead correlator (zero at the dot).
    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    pub fn damping(&self, lead: Lead) -> f64 {
        match lead {
            Lead::Hot => self.damping[0],
            Lead::Cold => self.damping[1],
        }
    }

    pub fn build_hamiltonian(&self, t: f64) -> BlockHamiltonian {
        self.hamiltonian_for(&self.protocol.drive_at(t))
    }

    pub fn hamiltonian_for(&self, drive: &Drive) -> BlockHamiltonian {
        let mut energies = self.lead_energies.clone();
        let mut coupling = vec![0.0; self.dim()];
        self.fill_hamiltonian(drive, &mut energies, &mut coupling);
        BlockHamiltonian {
            layout: self.layout,
            energies,
            coupling,
        }
    }

    /// Writes the diagonal and border of H for `drive` into preallocated buffers.
    pub fn fill_hamiltonian(&self, drive: &Drive, energies: &mut [f64], coupling: &mut [f64]) {
        let l = self.layout;
        energies.copy_from_slice(&self.lead_energies);
        energies[l.dot()] = drive.epsilon;
        coupling[l.dot()] = 0.0;
        for lead in [Lead::Hot, Lead::Cold] {
            let lam = drive.lambda(lead);
            for i in l.lead(lead) {
                coupling[i] = lam * self.tunneling[i];
            }
        }
    }
}
