//! Cycle-resolved thermodynamic ledger.
//!
//! For cycle `m` over `[mT, (m+1)T]`:
//!
//! ```text
//! W   = ∫Tr[Ḣσ]                  (smooth drive only)
//! Q_v = −Δ Tr[H_B^v σ] − γ_v ∫Tr[Z_v H]
//! A   = ∫ d/dt Tr[H_SI σ]          (smooth segments only)
//! F   = W + Q_h + Q_c − A
//! ```
//!
//! The instantaneous contact switches are kept out of both `W` and `A` and
//! reported separately as `switch_work = Σ Tr[ΔH σ]`. Adding it to both
//! recovers the endpoint form `A + switch_work = Tr{H_SI(mT)[σ((m+1)T) − σ(mT)]}`
//! with `H_SI(mT)` right-continuous; the hot switch-on at `(m+1)T` belongs
//! to cycle `m`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::propagate::Trajectory;
use crate::protocol::{Lead, Stroke};

const ENTROPY_CLAMP: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRecord {
    pub m: usize,
    pub work: f64,
    pub heat_hot: f64,
    pub heat_cold: f64,
    pub a_term: f64,
    /// Work done by the contact switches.
    pub switch_work: f64,
    /// Endpoint form `Tr{H_SI(mT) [σ((m+1)T) − σ(mT)]}`; equals
    /// `a_term + switch_work` up to roundoff.
    pub a_term_endpoint: f64,
    pub residual: f64,
    pub incomplete: f64,
    pub eta: Option<f64>,
    pub eta0: Option<f64>,
    pub entropy_change: f64,
    pub entropy_production: f64,
}

impl CycleRecord {
    /// `max(1e-8, 1e-6 (|W| + |Q_h| + |Q_c|))`.
    pub fn first_law_tolerance(&self) -> f64 {
        (1e-6 * (self.work.abs() + self.heat_hot.abs() + self.heat_cold.abs())).max(1e-8)
    }

    pub fn first_law_holds(&self) -> bool {
        self.residual.abs() < self.first_law_tolerance()
    }
}

fn cycle_bounds(traj: &Trajectory, m: usize) -> Result<()> {
    if m >= traj.cycles || traj.checkpoints.len() < 4 * (m + 1) + 1 {
        return Err(Error::IncompleteCycle(m));
    }
    Ok(())
}

pub fn work_of_cycle(traj: &Trajectory, m: usize) -> Result<f64> {
    cycle_bounds(traj, m)?;
    let acc = &traj.integrals[m];
    Ok(acc.work_drive)
}

pub fn switch_work_of_cycle(traj: &Trajectory, m: usize) -> Result<f64> {
    cycle_bounds(traj, m)?;
    Ok(traj.integrals[m].work_switch)
}

/// Heat absorbed from `lead` during cycle `m`; an engine has `Q_h > 0`, `Q_c < 0`.
pub fn heat_of_cycle(traj: &Trajectory, model: &Model, m: usize, lead: Lead) -> Result<f64> {
    cycle_bounds(traj, m)?;
    let slot = match lead {
        Lead::Hot => 0,
        Lead::Cold => 1,
    };
    let start = &traj.checkpoints[4 * m];
    let end = &traj.checkpoints[4 * (m + 1)];
    let gamma = model.damping(lead);
    Ok(-(end.lead_energy[slot] - start.lead_energy[slot]) - gamma * traj.integrals[m].superbath[slot])
}

/// 𝒜-term over the smooth segments of cycle `m`.
pub fn a_term(traj: &Trajectory, m: usize) -> Result<f64> {
    cycle_bounds(traj, m)?;
    Ok(traj.integrals[m].system_interaction_drive)
}

/// `Tr{H_SI(mT⁺) [σ((m+1)T) − σ(mT)]}`, switches included.
pub fn a_term_endpoint(traj: &Trajectory, model: &Model, m: usize) -> Result<f64> {
    cycle_bounds(traj, m)?;
    let drive = model.protocol.drive_in(Stroke::HotContact, 0.0);
    let start = &traj.checkpoints[4 * m];
    let end = &traj.checkpoints[4 * (m + 1)];
    Ok(end.system_interaction_energy(&drive) - start.system_interaction_energy(&drive))
}

/// `(F, F₀)` with `F = W + ΣQ − A` and `F₀ = W + ΣQ`.
pub fn first_law_residual(work: f64, heat_hot: f64, heat_cold: f64, a_term: f64) -> (f64, f64) {
    let incomplete = work + heat_hot + heat_cold;
    (incomplete - a_term, incomplete)
}

/// `(η, η₀)` with `η = −W/Q_h` and `η₀ = 1 + Q_c/Q_h`; undefined when `Q_h = 0`.
pub fn efficiency(work: f64, heat_hot: f64, heat_cold: f64) -> Option<(f64, f64)> {
    if heat_hot == 0.0 || !heat_hot.is_finite() {
        return None;
    }
    Some((-work / heat_hot, 1.0 + heat_cold / heat_hot))
}

/// Binary von Neumann entropy of a single fermionic level.
pub fn level_entropy(n: f64) -> f64 {
    let n = n.clamp(ENTROPY_CLAMP, 1.0 - ENTROPY_CLAMP);
    -n * n.ln() - (1.0 - n) * (1.0 - n).ln()
}

/// `(ΔS_S, Σ)` with `Σ = ΔS_S − β_h Q_h − β_c Q_c`.
pub fn entropy_production(
    traj: &Trajectory,
    model: &Model,
    m: usize,
    heat_hot: f64,
    heat_cold: f64,
) -> Result<(f64, f64)> {
    cycle_bounds(traj, m)?;
    let n0 = traj.checkpoints[4 * m].dot_occupation;
    let n1 = traj.checkpoints[4 * (m + 1)].dot_occupation;
    let ds = level_entropy(n1) - level_entropy(n0);
    Ok((ds, ds - model.hot.beta * heat_hot - model.cold.beta * heat_cold))
}

pub fn cycle_record(traj: &Trajectory, model: &Model, m: usize) -> Result<CycleRecord> {
    let work = work_of_cycle(traj, m)?;
    let heat_hot = heat_of_cycle(traj, model, m, Lead::Hot)?;
    let heat_cold = heat_of_cycle(traj, model, m, Lead::Cold)?;
    let a = a_term(traj, m)?;
    let switch_work = switch_work_of_cycle(traj, m)?;
    let a_end = a_term_endpoint(traj, model, m)?;
    let (residual, incomplete) = first_law_residual(work, heat_hot, heat_cold, a);
    let eff = efficiency(work, heat_hot, heat_cold);
    let (entropy_change, entropy_production) = entropy_production(traj, model, m, heat_hot, heat_cold)?;
    Ok(CycleRecord {
        m,
        work,
        heat_hot,
        heat_cold,
        a_term: a,
        switch_work,
        a_term_endpoint: a_end,
        residual,
        incomplete,
        eta: eff.map(|e| e.0),
        eta0: eff.map(|e| e.1),
        entropy_change,
        entropy_production,
    })
}

pub fn ledger(traj: &Trajectory, model: &Model) -> Result<Vec<CycleRecord>> {
    (0..traj.cycles).map(|m| cycle_record(traj, model, m)).collect()
}

/// Number of warm-up cycles. With `m*` the first `m ≥ 1` such that
/// `|A(m) − A(m−1)| < 0.05 max_k |A(k)|`, cycles `m* − 1` and `m*` are the
/// first matching pair, so `m* − 1` cycles precede the limit cycle.
/// `None` when the criterion is never met or `A` vanishes identically.
pub fn transient_cycles(records: &[CycleRecord]) -> Option<usize> {
    let scale = records.iter().map(|r| r.a_term.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    records
        .windows(2)
        .find(|w| (w[1].a_term - w[0].a_term).abs() < 0.05 * scale)
        .map(|w| w[0].m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert!((level_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(level_entropy(0.0).abs() < 1e-13);
        assert!(level_entropy(1.0).abs() < 1e-13);
        assert!(level_entropy(-0.2).is_finite());
    }

    #[test]
    fn efficiency_identity() {
        let (w, qh, qc) = (-0.21, 0.43, -0.25);
        let (f, _) = first_law_residual(w, qh, qc, 0.0);
        let a = f; // choose A so that F = 0
        let (eta, eta0) = efficiency(w, qh, qc).unwrap();
        assert!((eta - (eta0 - a / qh)).abs() < 1e-12);
        assert!(efficiency(0.0, 0.0, 0.0).is_none());
    }

    #[test]
    fn zero_a_means_equal_efficiencies() {
        let (eta, eta0) = efficiency(-0.2, 0.5, -0.3).unwrap();
        assert!((eta - eta0).abs() < 1e-15);
    }

    fn rec(m: usize, a: f64) -> CycleRecord {
        CycleRecord {
            m,
            work: 0.0,
            heat_hot: 0.0,
            heat_cold: 0.0,
            a_term: a,
            switch_work: 0.0,
            a_term_endpoint: a,
            residual: 0.0,
            incomplete: 0.0,
            eta: None,
            eta0: None,
            entropy_change: 0.0,
            entropy_production: 0.0,
        }
    }

    #[test]
    fn transient_count() {
        let recs: Vec<_> = [1.0, 0.5, 0.2, 0.19, 0.19].iter().enumerate().map(|(m, &a)| rec(m, a)).collect();
        assert_eq!(transient_cycles(&recs), Some(2));
        let flat: Vec<_> = (0..3).map(|m| rec(m, 0.0)).collect();
        assert_eq!(transient_cycles(&flat), None);
    }
}
