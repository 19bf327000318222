//! One-particle correlator `σ_ij = ⟨c_i† c_j⟩` and the right-hand side of the
//! driven Liouville–von-Neumann equation
//!
//! ```text
//! dσ/dt = −i[H(t), σ] − Γ_damp ∘ (σ − σ_eq)
//! ```
//!
//! where lead blocks relax toward the equilibrium diagonal at rate γ_v,
//! dot–lead coherences decay at γ_v/2 and the dot population is undamped.
//! The hot–cold block follows [`CrossLead`].

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{BlockHamiltonian, CrossLead, Layout, Model, Region};
use crate::protocol::Lead;


#[derive(Clone, Debug, PartialEq)]
pub struct Correlator {
    pub matrix: Array2<C64>,
    pub time: f64,
}

impl Correlator {
    /// Factorized initial state: leads at their equilibrium diagonal, dot at
    /// occupation `dot_occupation`, no coherences.
    pub fn initial(model: &Model, dot_occupation: f64) -> Self {
        let n = model.dim();
        let mut matrix = Array2::zeros((n, n));
        for (i, &f) in model.equilibrium().iter().enumerate() {
            matrix[[i, i]] = C64::new(f, 0.0);
        }
        let d = model.layout().dot();
        matrix[[d, d]] = C64::new(dot_occupation, 0.0);
        Correlator { matrix, time: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dot_occupation(&self, layout: &Layout) -> f64 {
        self.matrix[[layout.dot(), layout.dot()]].re
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn hermitize(&mut self) {
        hermitize(&mut self.matrix);
    }

    /// Largest modulus in the hot↔cold block.
    pub fn hot_cold_max(&self, layout: &Layout) -> f64 {
        let mut m: f64 = 0.0;
        for i in layout.hot() {
            for j in layout.cold() {
                m = m.max(self.matrix[[i, j]].norm());
            }
        }
        m
    }

    /// Smallest and largest eigenvalue of the Hermitian part.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        spectrum_bounds(&self.matrix)
    }

    /// `Tr[H_B^v σ]` for lead `v`.
    pub fn lead_energy(&self, model: &Model, lead: Lead) -> f64 {
        let e = model.lead_energies();
        model
            .layout()
            .lead(lead)
            .map(|i| e[i] * self.matrix[[i, i]].re)
            .sum()
    }

    /// `Σ_k t_k Re σ_kd` for lead `v`; `Tr[H_I^v σ] = 2 λ_v` times this.
    pub fn coherence(&self, model: &Model, lead: Lead) -> f64 {
        coherence(&self.matrix, model, lead)
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

pub(crate) fn coherence(matrix: &Array2<C64>, model: &Model, lead: Lead) -> f64 {
    let d = model.layout().dot();
    let t = model.tunneling();
    model
        .layout()
        .lead(lead)
        .map(|i| t[i] * matrix[[i, d]].re)
        .sum()
}

pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    err
}

/// `σ ← (σ + σ†)/2`.
pub fn hermitize(m: &mut Array2<C64>) {
    const TILE: usize = 32;
    let n = m.nrows();
    for i0 in (0..n).step_by(TILE) {
        for j0 in (i0..n).step_by(TILE) {
            for i in i0..(i0 + TILE).min(n) {
                for j in j0.max(i)..(j0 + TILE).min(n) {
                    if i == j {
                        m[[i, i]].im = 0.0;
                        continue;
                    }
                    let avg = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
                    m[[i, j]] = avg;
                    m[[j, i]] = avg.conj();
                }
            }
        }
    }
}

pub fn spectrum_bounds(m: &Array2<C64>) -> (f64, f64) {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| (m[[i, j]] + m[[j, i]].conj()) * 0.5);
    let eig = dm.symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Damping rate of entry `(j, k)`.
#[inline]
fn damping_rate(model: &Model, a: Region, b: Region) -> f64 {
    let g = |lead| model.damping(lead);
    match (a, b) {
        (Region::Hot, Region::Hot) => g(Lead::Hot),
        (Region::Cold, Region::Cold) => g(Lead::Cold),
        (Region::Hot, Region::Dot) | (Region::Dot, Region::Hot) => 0.5 * g(Lead::Hot),
        (Region::Cold, Region::Dot) | (Region::Dot, Region::Cold) => 0.5 * g(Lead::Cold),
        (Region::Hot, Region::Cold) | (Region::Cold, Region::Hot) => match model.cross_lead {
            CrossLead::Damped => 0.5 * (g(Lead::Hot) + g(Lead::Cold)),
            CrossLead::Undamped | CrossLead::Dropped => 0.0,
        },
        _ => 0.0,
    }
}

fn is_cross(a: Region, b: Region) -> bool {
    matches!((a, b), (Region::Hot, Region::Cold) | (Region::Cold, Region::Hot))
}

fn check_dims(sigma: &Array2<C64>, h: &BlockHamiltonian) -> Result<()> {
    if sigma.nrows() != h.dim() || sigma.ncols() != h.dim() {
        return Err(Error::DimensionMismatch {
            sigma: sigma.nrows(),
            hamiltonian: h.dim(),
        });
    }
    Ok(())
}

/// Reference right-hand side with a dense commutator, O(n³).
pub fn rhs_dense(sigma: &Array2<C64>, h: &BlockHamiltonian, model: &Model) -> Result<Array2<C64>> {
    check_dims(sigma, h)?;
    let n = h.dim();
    let hd = h.to_dense();
    let layout = model.layout();
    let eq = model.equilibrium();
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            let mut comm = C64::new(0.0, 0.0);
            for l in 0..n {
                comm += hd[[j, l]] * sigma[[l, k]] - sigma[[j, l]] * hd[[l, k]];
            }
            let (rj, rk) = (layout.region(j), layout.region(k));
            if model.cross_lead == CrossLead::Dropped && is_cross(rj, rk) {
                continue;
            }
            let rate = damping_rate(model, rj, rk);
            let target = if j == k { eq[j] } else { 0.0 };
            out[[j, k]] = -C64::i() * comm - (sigma[[j, k]] - target) * rate;
        }
    }
    Ok(out)
}

/// Right-hand side exploiting the arrowhead form of H, O(n²).
///
/// With `H = diag(e) + u e_dᵀ + e_d uᵀ`:
/// `[H,σ]_jk = (e_j − e_k)σ_jk + u_j σ_dk − σ_jd u_k + δ_jd (uᵀσ)_k − δ_kd (σu)_j`.
///
/// `sigma` must be Hermitian; `σu` is then taken as the conjugate of `uᵀσ`.
pub fn rhs_structured(
    sigma: &Array2<C64>,
    h: &BlockHamiltonian,
    model: &Model,
) -> Result<Array2<C64>> {
    let mut out = Array2::zeros(sigma.raw_dim());
    rhs_structured_into(sigma, h, model, &mut out)?;
    Ok(out)
}

pub fn rhs_structured_into(
    sigma: &Array2<C64>,
    h: &BlockHamiltonian,
    model: &Model,
    out: &mut Array2<C64>,
) -> Result<()> {
    check_dims(sigma, h)?;
    let n = h.dim();
    let sig = sigma.as_standard_layout();
    let kernel = ArrowheadRhs::new(sig.as_slice().expect("standard layout"), h, model);
    let out = out.as_slice_mut().expect("standard layout output");
    out.chunks_mut(n).enumerate().for_each(|(j, row)| kernel.row(j, row));
    Ok(())
}

/// Row-wise evaluation of the structured right-hand side on a row-major
/// Hermitian correlator. For exactly Hermitian input the output is exactly
/// Hermitian: every term pairs with its conjugate under `j ↔ k` without
/// reassociation.
pub(crate) struct ArrowheadRhs<'a> {
    sig: &'a [C64],
    n: usize,
    layout: Layout,
    energies: &'a [f64],
    coupling: &'a [f64],
    equilibrium: &'a [f64],
    rates: [[f64; 3]; 3],
    drop_cross: bool,
    // uᵀσ
    border: Vec<C64>,
}

fn region_slot(r: Region) -> usize {
    match r {
        Region::Hot => 0,
        Region::Dot => 1,
        Region::Cold => 2,
    }
}

impl<'a> ArrowheadRhs<'a> {
    pub(crate) fn new(sig: &'a [C64], h: &'a BlockHamiltonian, model: &'a Model) -> Self {
        let layout = model.layout();
        let n = layout.dim();
        let u = &h.coupling;
        let mut border = vec![C64::new(0.0, 0.0); n];
        for l in 0..n {
            if u[l] == 0.0 {
                continue;
            }
            let row = &sig[l * n..(l + 1) * n];
            for (b, &z) in border.iter_mut().zip(row) {
                *b += z * u[l];
            }
        }
        let regions = [Region::Hot, Region::Dot, Region::Cold];
        let mut rates = [[0.0; 3]; 3];
        for a in regions {
            for b in regions {
                rates[region_slot(a)][region_slot(b)] = damping_rate(model, a, b);
            }
        }
        ArrowheadRhs {
            sig,
            n,
            layout,
            energies: &h.energies,
            coupling: u,
            equilibrium: model.equilibrium(),
            rates,
            drop_cross: model.cross_lead == CrossLead::Dropped,
            border,
        }
    }

    pub(crate) fn row(&self, j: usize, out: &mut [C64]) {
        let n = self.n;
        let d = self.layout.dot();
        let e = self.energies;
        let u = self.coupling;
        let row = &self.sig[j * n..(j + 1) * n];
        let dot_row = &self.sig[d * n..(d + 1) * n];
        let ej = e[j];
        let uj = u[j];
        let sjd = row[d];
        let rj = region_slot(self.layout.region(j));
        let ranges = [(self.layout.hot(), 0), (d..d + 1, 1), (self.layout.cold(), 2)];
        for (range, rk) in ranges {
            if self.drop_cross && rj + rk == 2 && rj != 1 {
                out[range].fill(C64::new(0.0, 0.0));
                continue;
            }
            let rate = self.rates[rj][rk];
            let (o, z, e, u, dr) = (&mut out[range.clone()], &row[range.clone()], &e[range.clone()], &u[range.clone()], &dot_row[range]);
            for k in 0..o.len() {
                let zk = z[k];
                let a = zk * (ej - e[k]) + (dr[k] * uj - sjd * u[k]);
                // −i a − rate z
                o[k] = C64::new(a.im - rate * zk.re, -a.re - rate * zk.im);
            }
        }
        if rj != 1 {
            out[j] += C64::new(self.rates[rj][rj] * self.equilibrium[j], 0.0);
        }
        // −i(−(σu)_j) with (σu)_j = conj((uᵀσ)_j)
        let s = self.border[j].conj();
        out[d] += C64::new(-s.im, s.re);
        if j == d {
            for (o, r) in out.iter_mut().zip(&self.border) {
                *o += C64::new(r.im, -r.re);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LeadSpec;
    use crate::protocol::{OttoProtocol, Stroke};

    fn small_model(gamma: f64) -> Model {
        let mut hot = LeadSpec::new(0.2, 1.0, 0.2, 0.5);
        hot.damping = Some(gamma);
        let mut cold = LeadSpec::new(1.5, 1.0, 0.2, 0.5);
        cold.damping = Some(gamma);
        Model::new(hot, cold, OttoProtocol::default()).unwrap()
    }

    #[test]
    fn equilibrium_fixed_point_when_decoupled() {
        let m = small_model(0.1);
        let mut sigma = Correlator::initial(&m, 0.37);
        sigma.time = m.protocol.start(Stroke::ForwardDrive) + 1.0;
        let h = m.build_hamiltonian(sigma.time);
        let k = rhs_structured(&sigma.matrix, &h, &m).unwrap();
        assert!(k.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn empty_state_relaxes_toward_equilibrium() {
        let m = small_model(0.1);
        let n = m.dim();
        let sigma = Array2::zeros((n, n));
        let h = m.build_hamiltonian(1.0);
        let k = rhs_structured(&sigma, &h, &m).unwrap();
        let d = m.layout().dot();
        for j in 0..n {
            for l in 0..n {
                let want = if j == l && j != d { 0.1 * m.equilibrium()[j] } else { 0.0 };
                assert!((k[[j, l]] - C64::new(want, 0.0)).norm() < 1e-16);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = small_model(0.1);
        let h = m.build_hamiltonian(0.0);
        let sigma = Array2::zeros((3, 3));
        assert!(matches!(
            rhs_structured(&sigma, &h, &m),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(rhs_dense(&sigma, &h, &m).is_err());
    }

    #[test]
    fn hermitize_is_idempotent() {
        let mut a = Array2::from_shape_fn((4, 4), |(i, j)| C64::new(i as f64, j as f64));
        hermitize(&mut a);
        assert_eq!(hermiticity_error(&a), 0.0);
        let b = a.clone();
        hermitize(&mut a);
        assert_eq!(a, b);
    }
}
