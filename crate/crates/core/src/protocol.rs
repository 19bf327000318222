//! Otto driving protocol: the dot energy ε(t) and the contact switches λ_v(t).
//!
//! One period is split into four strokes with half-open intervals
//! `[0,t1)`, `[t1,t1+t2)`, `[t1+t2,t1+t2+t3)`, `[t1+t2+t3,T)`:
//! hot contact at fixed ε₁, isolated drive ε₁→ε₂, cold contact at fixed ε₂,
//! isolated drive ε₂→ε₁.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interpolation used for the isolated drive strokes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    /// `Z(s) = 3s² − 2s³`, once differentiable with zero end slopes.
    #[default]
    Smoothstep,
    /// `Z(s) = s`.
    Linear,
}

impl RampShape {
    #[inline]
    pub fn value(self, s: f64) -> f64 {
        match self {
            RampShape::Smoothstep => s * s * (3.0 - 2.0 * s),
            RampShape::Linear => s,
        }
    }

    #[inline]
    pub fn slope(self, s: f64) -> f64 {
        match self {
            RampShape::Smoothstep => 6.0 * s * (1.0 - s),
            RampShape::Linear => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stroke {
    HotContact,
    ForwardDrive,
    ColdContact,
    ReturnDrive,
}

impl Stroke {
    pub const ALL: [Stroke; 4] = [
        Stroke::HotContact,
        Stroke::ForwardDrive,
        Stroke::ColdContact,
        Stroke::ReturnDrive,
    ];

    pub fn index(self) -> usize {
        match self {
            Stroke::HotContact => 0,
            Stroke::ForwardDrive => 1,
            Stroke::ColdContact => 2,
            Stroke::ReturnDrive => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lead {
    Hot,
    Cold,
}

/// Instantaneous drive parameters and their time derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Drive {
    pub epsilon: f64,
    pub epsilon_rate: f64,
    pub lambda_hot: f64,
    pub lambda_hot_rate: f64,
    pub lambda_cold: f64,
    pub lambda_cold_rate: f64,
}

impl Drive {
    pub fn lambda(&self, lead: Lead) -> f64 {
        match lead {
            Lead::Hot => self.lambda_hot,
            Lead::Cold => self.lambda_cold,
        }
    }

    pub fn lambda_rate(&self, lead: Lead) -> f64 {
        match lead {
            Lead::Hot => self.lambda_hot_rate,
            Lead::Cold => self.lambda_cold_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OttoProtocol {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    #[serde(default)]
    pub ramp: RampShape,
    /// Duration over which λ_v ramps on and off inside the contact strokes.
    /// Zero gives the sharp 0/1 step.
    #[serde(default)]
    pub switch_ramp: f64,
}

impl Default for OttoProtocol {
    fn default() -> Self {
        OttoProtocol::with_period(2.0, 1.0, 60.0)
    }
}

impl OttoProtocol {
    /// Strokes of `T/3, T/6, T/3, T/6`.
    pub fn with_period(epsilon1: f64, epsilon2: f64, period: f64) -> Self {
        OttoProtocol {
            epsilon1,
            epsilon2,
            t1: period / 3.0,
            t2: period / 6.0,
            t3: period / 3.0,
            t4: period / 6.0,
            ramp: RampShape::Smoothstep,
            switch_ramp: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon1", self.epsilon1), ("epsilon2", self.epsilon2)] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        for (name, v) in [("t1", self.t1), ("t2", self.t2), ("t3", self.t3), ("t4", self.t4)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let r = self.switch_ramp;
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidConfig("switch_ramp must be non-negative".into()));
        }
        if 2.0 * r > self.t1 || 2.0 * r > self.t3 {
            return Err(Error::InvalidConfig(
                "switch_ramp must fit twice inside each contact stroke".into(),
            ));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4
    }

    pub fn duration(&self, stroke: Stroke) -> f64 {
        match stroke {
            Stroke::HotContact => self.t1,
            Stroke::ForwardDrive => self.t2,
            Stroke::ColdContact => self.t3,
            Stroke::ReturnDrive => self.t4,
        }
    }

    /// Offset of the stroke start within the period.
    pub fn start(&self, stroke: Stroke) -> f64 {
        match stroke {
            Stroke::HotContact => 0.0,
            Stroke::ForwardDrive => self.t1,
            Stroke::ColdContact => self.t1 + self.t2,
            Stroke::ReturnDrive => self.t1 + self.t2 + self.t3,
        }
    }

    /// Stroke containing `t` and the local time since its start.
    pub fn stroke_at(&self, t: f64) -> (Stroke, f64) {
        let tau = t.rem_euclid(self.period());
        let b1 = self.t1;
        let b2 = b1 + self.t2;
        let b3 = b2 + self.t3;
        if tau < b1 {
            (Stroke::HotContact, tau)
        } else if tau < b2 {
            (Stroke::ForwardDrive, tau - b1)
        } else if tau < b3 {
            (Stroke::ColdContact, tau - b2)
        } else {
            (Stroke::ReturnDrive, tau - b3)
        }
    }

    pub fn epsilon_at(&self, t: f64) -> f64 {
        let (stroke, tau) = self.stroke_at(t);
        self.drive_in(stroke, tau).epsilon
    }

    pub fn lambda_at(&self, t: f64, lead: Lead) -> f64 {
        let (stroke, tau) = self.stroke_at(t);
        self.drive_in(stroke, tau).lambda(lead)
    }

    pub fn drive_at(&self, t: f64) -> Drive {
        let (stroke, tau) = self.stroke_at(t);
        self.drive_in(stroke, tau)
    }

    /// Drive evaluated on the closed stroke interval `tau ∈ [0, duration]`,
    /// so that the right endpoint takes the stroke's own left limit.
    pub fn drive_in(&self, stroke: Stroke, tau: f64) -> Drive {
        let de = self.epsilon1 - self.epsilon2;
        match stroke {
            Stroke::HotContact => {
                let (l, dl) = self.contact_switch(tau, self.t1);
                Drive {
                    epsilon: self.epsilon1,
                    lambda_hot: l,
                    lambda_hot_rate: dl,
                    ..Drive::default()
                }
            }
            Stroke::ForwardDrive => {
                let s = tau / self.t2;
                Drive {
                    epsilon: self.epsilon1 - de * self.ramp.value(s),
                    epsilon_rate: -de * self.ramp.slope(s) / self.t2,
                    ..Drive::default()
                }
            }
            Stroke::ColdContact => {
                let (l, dl) = self.contact_switch(tau, self.t3);
                Drive {
                    epsilon: self.epsilon2,
                    lambda_cold: l,
                    lambda_cold_rate: dl,
                    ..Drive::default()
                }
            }
            Stroke::ReturnDrive => {
                let s = tau / self.t4;
                Drive {
                    epsilon: self.epsilon2 + de * self.ramp.value(s),
                    epsilon_rate: de * self.ramp.slope(s) / self.t4,
                    ..Drive::default()
                }
            }
        }
    }

    fn contact_switch(&self, tau: f64, duration: f64) -> (f64, f64) {
        let r = self.switch_ramp;
        if r <= 0.0 {
            return (1.0, 0.0);
        }
        if tau < r {
            let s = tau / r;
            (RampShape::Smoothstep.value(s), RampShape::Smoothstep.slope(s) / r)
        } else if tau > duration - r {
            let s = (duration - tau) / r;
            (RampShape::Smoothstep.value(s), -RampShape::Smoothstep.slope(s) / r)
        } else {
            (1.0, 0.0)
        }
    }

    /// Local times inside a stroke where the drive is not smooth (always
    /// includes 0 and the duration).
    pub fn breakpoints(&self, stroke: Stroke) -> Vec<f64> {
        let d = self.duration(stroke);
        let r = self.switch_ramp;
        match stroke {
            Stroke::HotContact | Stroke::ColdContact if r > 0.0 => {
                if 2.0 * r < d {
                    vec![0.0, r, d - r, d]
                } else {
                    vec![0.0, r, d]
                }
            }
            _ => vec![0.0, d],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> OttoProtocol {
        OttoProtocol::default()
    }

    #[test]
    fn epsilon_examples() {
        let p = fig2();
        assert_eq!(p.epsilon_at(0.0), 2.0);
        assert!((p.epsilon_at(p.t1 + p.t2 / 2.0) - 1.5).abs() < 1e-15);
        assert_eq!(p.epsilon_at(p.t1 + p.t2), 1.0);
        assert_eq!(p.epsilon_at(p.t1 + p.t2 + p.t3), 1.0);
        assert_eq!(p.epsilon_at(p.period()), 2.0);
    }

    #[test]
    fn lambda_examples() {
        let p = fig2();
        assert_eq!(p.lambda_at(p.t1 / 2.0, Lead::Hot), 1.0);
        assert_eq!(p.lambda_at(p.t1 / 2.0, Lead::Cold), 0.0);
        for lead in [Lead::Hot, Lead::Cold] {
            assert_eq!(p.lambda_at(p.t1 + p.t2 / 2.0, lead), 0.0);
        }
        assert_eq!(p.lambda_at(p.period() - p.t4 / 2.0, Lead::Cold), 0.0);
        // half-open boundaries
        assert_eq!(p.lambda_at(p.t1, Lead::Hot), 0.0);
        assert_eq!(p.lambda_at(p.t1 + p.t2, Lead::Cold), 1.0);
        assert_eq!(p.lambda_at(p.t1 + p.t2 + p.t3, Lead::Cold), 0.0);
        assert_eq!(p.lambda_at(p.period(), Lead::Hot), 1.0);
    }

    #[test]
    fn continuity_across_boundaries() {
        let p = fig2();
        for stroke in Stroke::ALL {
            let end = p.drive_in(stroke, p.duration(stroke)).epsilon;
            let next = Stroke::ALL[(stroke.index() + 1) % 4];
            let start = p.drive_in(next, 0.0).epsilon;
            assert!((end - start).abs() <= 4.0 * f64::EPSILON, "{stroke:?}");
        }
    }

    #[test]
    fn smoothstep_has_flat_ends() {
        let p = fig2();
        assert_eq!(p.drive_in(Stroke::ForwardDrive, 0.0).epsilon_rate, 0.0);
        assert_eq!(p.drive_in(Stroke::ForwardDrive, p.t2).epsilon_rate, 0.0);
    }

    #[test]
    fn rejects_bad_durations() {
        let mut p = fig2();
        p.t2 = 0.0;
        assert!(p.validate().is_err());
        let mut p = fig2();
        p.switch_ramp = 15.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn switch_ramp_is_continuous() {
        let mut p = fig2();
        p.switch_ramp = 2.0;
        p.validate().unwrap();
        assert_eq!(p.drive_in(Stroke::HotContact, 0.0).lambda_hot, 0.0);
        assert_eq!(p.drive_in(Stroke::HotContact, 2.0).lambda_hot, 1.0);
        assert_eq!(p.drive_in(Stroke::HotContact, p.t1).lambda_hot, 0.0);
        assert_eq!(p.breakpoints(Stroke::HotContact), vec![0.0, 2.0, 18.0, 20.0]);
    }
}
