mod common;

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qotto::correlator::{rhs_dense, rhs_structured};
use qotto::propagate::step_rk4;
use qotto::{run_cycles, Correlator, CrossLead, LeadSpec, Model, OttoProtocol, RunOptions};

use common::{max_abs_diff, random_hermitian, random_lead, random_protocol, rk4_oracle_errors};

fn small_model(cross: CrossLead) -> Model {
    let hot = LeadSpec::new(0.3, 1.0, 0.1, 0.4);
    let cold = LeadSpec::new(2.0, 1.0, 0.1, 0.4);
    Model::new(hot, cold, OttoProtocol::with_period(1.5, 0.5, 24.0))
        .unwrap()
        .with_cross_lead(cross)
}

#[test]
fn structured_matches_dense_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 50 {
        let model = Model::new(random_lead(&mut rng), random_lead(&mut rng), random_protocol(&mut rng));
        let model = match model {
            Ok(m) if m.dim() <= 25 => m,
            _ => continue,
        };
        let cross = [CrossLead::Damped, CrossLead::Undamped, CrossLead::Dropped][count % 3];
        let model = model.with_cross_lead(cross);
        let t = rng.random_range(0.0..model.protocol.period());
        let h = model.build_hamiltonian(t);
        let sigma = random_hermitian(&mut rng, model.dim());
        let fast = rhs_structured(&sigma, &h, &model).unwrap();
        let slow = rhs_dense(&sigma, &h, &model).unwrap();
        worst = worst.max(max_abs_diff(&fast, &slow));
        count += 1;
    }
    assert!(worst < 1e-12, "max deviation {worst:e}");
}

#[test]
fn structured_rhs_of_hermitian_input_is_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = small_model(CrossLead::Damped);
    for _ in 0..20 {
        let sigma = random_hermitian(&mut rng, model.dim());
        let h = model.build_hamiltonian(rng.random_range(0.0..24.0));
        let r = rhs_structured(&sigma, &h, &model).unwrap();
        let t = r.t().mapv(|z| z.conj());
        assert_eq!(max_abs_diff(&r, &t), 0.0);
    }
}

#[test]
fn energy_is_conserved_by_the_commutator() {
    // Tr{H[H,σ]} = 0: with γ = 0 the RHS carries no energy
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hot = LeadSpec::new(0.3, 1.0, 0.1, 0.4);
    let mut cold = LeadSpec::new(2.0, 1.0, 0.1, 0.4);
    hot.damping = Some(0.0);
    cold.damping = Some(0.0);
    let mut protocol = OttoProtocol::with_period(1.5, 0.5, 24.0);
    protocol.switch_ramp = 1.0;
    let model = Model::new(hot, cold, protocol).unwrap();
    for _ in 0..100 {
        let t = rng.random_range(0.0..24.0);
        let h = model.build_hamiltonian(t);
        let sigma = random_hermitian(&mut rng, model.dim());
        let hd = h.to_dense();

        let comm = hd.dot(&sigma) - sigma.dot(&hd);
        let direct: C64 = hd.dot(&comm).diag().sum();
        assert!(direct.norm() < 1e-12, "Tr H[H,σ] = {direct}");

        let r = rhs_structured(&sigma, &h, &model).unwrap();
        let power: C64 = hd.dot(&r).diag().sum();
        assert!(power.norm() < 1e-12, "Tr H dσ/dt = {power}");
    }
}

#[test]
fn trace_is_conserved_without_damping() {
    let mut hot = LeadSpec::new(0.3, 1.0, 0.1, 0.4);
    let mut cold = LeadSpec::new(2.0, 1.0, 0.1, 0.4);
    hot.damping = Some(0.0);
    cold.damping = Some(0.0);
    let model = Model::new(hot, cold, OttoProtocol::with_period(1.5, 0.5, 24.0)).unwrap();
    let opts = RunOptions {
        dt: 0.05,
        cycles: 2,
        dot_occupation: 1.0,
        ..Default::default()
    };
    let traj = run_cycles(&model, &opts).unwrap();
    let tr0 = traj.checkpoints[0].trace;
    for c in &traj.checkpoints {
        assert!((c.trace - tr0).abs() < 1e-10, "trace drift {} at t = {}", c.trace - tr0, c.time);
    }
}

#[test]
fn initial_state_holds_equilibrium_leads() {
    let model = small_model(CrossLead::Damped);
    let eq = model.equilibrium().iter().sum::<f64>();
    let sigma = Correlator::initial(&model, 0.0);
    assert!((sigma.trace() - eq).abs() < 1e-12);
}

#[test]
fn audited_run_stays_hermitian_and_physical() {
    let model = small_model(CrossLead::Damped);
    let opts = RunOptions {
        dt: 0.1,
        cycles: 3,
        audit: true,
        ..Default::default()
    };
    let traj = run_cycles(&model, &opts).unwrap();
    assert!(traj.max_hermiticity_defect < 1e-12, "{:e}", traj.max_hermiticity_defect);
    for c in &traj.checkpoints {
        let (lo, hi) = c.spectrum.expect("audit records the spectrum");
        assert!(lo >= -1e-6 && hi <= 1.0 + 1e-6, "spectrum [{lo}, {hi}] at t = {}", c.time);
    }
}

#[test]
fn rk4_is_fourth_order_on_the_closed_form_oracle() {
    let errors = rk4_oracle_errors();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((8.0..=32.0).contains(&ratio), "error ratio {ratio} from {errors:?}");
    }
}

#[test]
fn stepping_across_a_stroke_boundary_is_refused() {
    let model = small_model(CrossLead::Damped);
    let mut s = Correlator::initial(&model, 0.0);
    s.time = model.protocol.t1 - 0.05;
    assert!(step_rk4(&model, &s, 0.1).is_err());
}

#[test]
fn structured_kernel_beats_dense_at_moderate_size() {
    let hot = LeadSpec::new(0.3, 2.0, 0.04, 0.4);
    let cold = LeadSpec::new(2.0, 2.0, 0.04, 0.4);
    let model = Model::new(hot, cold, OttoProtocol::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sigma = random_hermitian(&mut rng, model.dim());
    let h = model.build_hamiltonian(3.0);

    let t = Instant::now();
    let fast = rhs_structured(&sigma, &h, &model).unwrap();
    let t_fast = t.elapsed();
    let t = Instant::now();
    let slow = rhs_dense(&sigma, &h, &model).unwrap();
    let t_slow = t.elapsed();
    assert!(max_abs_diff(&fast, &slow) < 1e-12);
    assert!(t_fast * 5 < t_slow, "structured {t_fast:?} vs dense {t_slow:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dimension_mismatch_is_an_error(extra in 1usize..4) {
        let model = small_model(CrossLead::Damped);
        let n = model.dim() + extra;
        let sigma = Array2::<C64>::zeros((n, n));
        let h = model.build_hamiltonian(0.0);
        prop_assert!(rhs_structured(&sigma, &h, &model).is_err());
        prop_assert!(rhs_dense(&sigma, &h, &model).is_err());
    }

    #[test]
    fn hamiltonian_is_exactly_hermitian(t in -100.0f64..100.0) {
        let model = small_model(CrossLead::Damped);
        let h = model.build_hamiltonian(t).to_dense();
        let ht = h.t().mapv(|z| z.conj());
        prop_assert_eq!(h, ht);
    }
}
