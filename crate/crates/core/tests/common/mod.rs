//! Oracles and random instances shared by the test targets.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;

use qotto::propagate::step_rk4;
use qotto::{Correlator, LeadSpec, Model, OttoProtocol};

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> Array2<C64> {
    let mut m = Array2::zeros((n, n));
    for j in 0..n {
        m[[j, j]] = C64::new(rng.random_range(0.0..1.0), 0.0);
        for k in j + 1..n {
            let z = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            m[[j, k]] = z;
            m[[k, j]] = z.conj();
        }
    }
    m
}

pub fn random_lead(rng: &mut impl Rng) -> LeadSpec {
    let half_bandwidth = rng.random_range(0.5..3.0);
    let levels = rng.random_range(2..=12usize);
    let spacing = 2.0 * half_bandwidth / levels as f64;
    let coupling = rng.random_range(1.05 * spacing..1.95 * half_bandwidth);
    let mut lead = LeadSpec::new(rng.random_range(0.1..3.0), half_bandwidth, spacing, coupling);
    lead.mu = rng.random_range(-0.5..0.5);
    lead.damping = Some(rng.random_range(0.0..0.5));
    lead
}

pub fn random_protocol(rng: &mut impl Rng) -> OttoProtocol {
    let mut p = OttoProtocol::with_period(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 24.0);
    p.switch_ramp = if rng.random_bool(0.5) { 2.0 } else { 0.0 };
    p
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// σ(t) during the forward drive from a state whose only coherence is
/// between the dot and lead level `k`: lead diagonals relax at γ, the
/// coherence rotates with ∫(ε − e_k) and decays at γ/2.
pub fn isolated_oracle(model: &Model, sigma0: &Array2<C64>, k: usize, tau: f64) -> Array2<C64> {
    let p = &model.protocol;
    let d = model.layout().dot();
    let gamma = model.hot.damping();
    let x = tau / p.t2;
    let de = p.epsilon1 - p.epsilon2;
    let phase = p.epsilon1 * tau - de * p.t2 * (x.powi(3) - 0.5 * x.powi(4)) - model.lead_energies()[k] * tau;
    let mut out = sigma0.clone();
    for (i, &f) in model.equilibrium().iter().enumerate() {
        if i != d {
            out[[i, i]] = C64::new(f + (sigma0[[i, i]].re - f) * (-gamma * tau).exp(), 0.0);
        }
    }
    let c = sigma0[[d, k]] * C64::from_polar((-0.5 * gamma * tau).exp(), -phase);
    out[[d, k]] = c;
    out[[k, d]] = c.conj();
    out
}

/// Max-norm error of RK4 against [`isolated_oracle`] over one forward
/// drive stroke at dt = 0.5, 0.25, 0.125.
pub fn rk4_oracle_errors() -> Vec<f64> {
    let mut hot = LeadSpec::new(0.3, 1.0, 0.25, 0.4);
    hot.damping = Some(0.2);
    let mut cold = LeadSpec::new(2.0, 1.0, 0.25, 0.4);
    cold.damping = Some(0.2);
    let model = Model::new(hot, cold, OttoProtocol::with_period(3.0, -1.0, 60.0)).unwrap();
    let (d, k) = (model.layout().dot(), 2);
    let t1 = model.protocol.t1;
    let t2 = model.protocol.t2;

    let mut sigma0 = Correlator::initial(&model, 0.3);
    sigma0.matrix[[k, k]] = C64::new(0.9, 0.0);
    sigma0.matrix[[d, k]] = C64::new(0.2, 0.1);
    sigma0.matrix[[k, d]] = C64::new(0.2, -0.1);
    sigma0.time = t1;
    let exact = isolated_oracle(&model, &sigma0.matrix, k, t2);

    [0.5, 0.25, 0.125]
        .iter()
        .map(|&dt| {
            let mut s = sigma0.clone();
            let steps = (t2 / dt).round() as usize;
            for _ in 0..steps {
                s = step_rk4(&model, &s, dt).unwrap();
            }
            max_abs_diff(&s.matrix, &exact)
        })
        .collect()
}
