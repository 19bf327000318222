//! Fixed-step RK4 propagation of the correlator through repeated Otto cycles.
//!
//! The ledger integrals (`∫Tr[Ḣσ]`, `∫Tr[Z_v H]`, `∫ d/dt Tr[H_SI σ]`) are
//! carried as extra RK4 state components, so they share the stage
//! evaluations and the order of the correlator update. λ switching
//! discontinuities are never integrated; they are recorded as discrete
//! `Tr[ΔH σ]` events at segment boundaries.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlator::{coherence, hermiticity_error, hermitize, ArrowheadRhs, Correlator};
use crate::error::{Error, Result};
use crate::model::{BlockHamiltonian, Model};
use crate::protocol::{Drive, Lead, Stroke};

/// Entries of a physical correlator have modulus at most 1.
const BLOWUP_BOUND: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    pub dt: f64,
    pub cycles: usize,
    #[serde(default)]
    pub dot_occupation: f64,
    /// Approximate spacing of the observable samples, rounded to whole steps.
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    /// Record per-step hermiticity and the σ spectrum at every checkpoint.
    #[serde(default)]
    pub audit: bool,
    /// Keep full correlator matrices at stroke boundaries.
    #[serde(default)]
    pub store_matrices: bool,
}

fn default_sample_interval() -> f64 {
    1.0
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            dt: 0.1,
            cycles: 10,
            dot_occupation: 0.0,
            sample_interval: 1.0,
            audit: false,
            store_matrices: false,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidConfig("cycles must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dot_occupation) {
            return Err(Error::InvalidConfig("dot_occupation must lie in [0, 1]".into()));
        }
        self.sample_stride()?;
        Ok(())
    }

    /// Steps between samples, `sample_interval / dt` rounded, at least 1.
    pub fn sample_stride(&self) -> Result<usize> {
        let si = self.sample_interval;
        if !(si.is_finite() && si > 0.0) {
            return Err(Error::InvalidConfig(format!("sample_interval must be positive, got {si}")));
        }
        Ok(((si / self.dt).round() as usize).max(1))
    }
}

/// Smallest whole number of steps of length at most `dt` covering `length`.
fn snapped_steps(length: f64, dt: f64) -> usize {
    ((length / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// A smooth stretch of one stroke, `[tau0, tau1]` in stroke-local time.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub stroke: Stroke,
    pub tau0: f64,
    pub tau1: f64,
    pub steps: usize,
    pub h: f64,
}

/// Splits one period into smooth segments with an integer number of steps
/// each; the step is snapped down to `length / steps ≤ dt`.
pub fn plan_segments(model: &Model, dt: f64) -> Result<Vec<Segment>> {
    let p = &model.protocol;
    let mut out = Vec::new();
    for stroke in Stroke::ALL {
        let bp = p.breakpoints(stroke);
        for w in bp.windows(2) {
            let len = w[1] - w[0];
            let steps = snapped_steps(len, dt);
            out.push(Segment {
                stroke,
                tau0: w[0],
                tau1: w[1],
                steps,
                h: len / steps as f64,
            });
        }
    }
    Ok(out)
}

/// Ledger integrands, in order: drive work `Tr[Ḣσ]`, superbath terms
/// `Tr[Z_h H]` and `Tr[Z_c H]`, and `d/dt Tr[H_SI σ]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rates {
    pub work: f64,
    pub superbath: [f64; 2],
    pub system_interaction: f64,
}

impl Rates {
    fn axpy(&mut self, a: f64, x: &Rates) {
        self.work += a * x.work;
        self.superbath[0] += a * x.superbath[0];
        self.superbath[1] += a * x.superbath[1];
        self.system_interaction += a * x.system_interaction;
    }

    fn is_finite(&self) -> bool {
        self.work.is_finite()
            && self.superbath.iter().all(|v| v.is_finite())
            && self.system_interaction.is_finite()
    }
}

fn rates(model: &Model, drive: &Drive, h: &BlockHamiltonian, sigma: &[C64], kcol: &[C64]) -> Rates {
    let l = model.layout();
    let n = l.dim();
    let d = l.dot();
    let e = model.lead_energies();
    let eq = model.equilibrium();
    let t = model.tunneling();
    let u = &h.coupling;
    let col = |i: usize| sigma[i * n + d].re;

    let mut work = drive.epsilon_rate * col(d);
    let mut superbath = [0.0; 2];
    for (slot, lead) in [Lead::Hot, Lead::Cold].into_iter().enumerate() {
        let mut coh = 0.0;
        let mut sb = 0.0;
        for i in l.lead(lead) {
            coh += t[i] * col(i);
            sb += e[i] * (sigma[i * n + i].re - eq[i]) + u[i] * col(i);
        }
        work += 2.0 * drive.lambda_rate(lead) * coh;
        superbath[slot] = sb;
    }

    let border: f64 = (0..n).filter(|&i| i != d).map(|i| u[i] * kcol[i].re).sum();
    let system_interaction = work + drive.epsilon * kcol[d].re + 2.0 * border;

    Rates {
        work,
        superbath,
        system_interaction,
    }
}

/// Reusable RK4 buffers. Each stage evaluates the right-hand side one row at
/// a time and folds it straight into the accumulator and the next stage
/// input, so no full `k` matrix is ever stored.
pub struct Stepper {
    acc: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
    row: Vec<C64>,
    kcol: Vec<C64>,
    ham: BlockHamiltonian,
}

fn sweep_rows(
    model: &Model,
    ham: &BlockHamiltonian,
    input: &[C64],
    row: &mut [C64],
    kcol: &mut [C64],
    mut emit: impl FnMut(usize, &[C64]),
) {
    let n = ham.dim();
    let d = model.layout().dot();
    let kernel = ArrowheadRhs::new(input, ham, model);
    for j in 0..n {
        kernel.row(j, row);
        kcol[j] = row[d];
        emit(j, row);
    }
}

impl Stepper {
    pub fn new(model: &Model) -> Self {
        let n = model.dim();
        let z = C64::new(0.0, 0.0);
        Stepper {
            acc: vec![z; n * n],
            a: vec![z; n * n],
            b: vec![z; n * n],
            row: vec![z; n],
            kcol: vec![z; n],
            ham: model.hamiltonian_for(&Drive::default()),
        }
    }

    /// Advances `sigma` by one step of length `h` from local time `tau`,
    /// with the drive given on the current smooth segment. Returns the
    /// integrated ledger increments and the hermiticity defect before
    /// re-Hermitization when `audit` is set.
    pub fn step(
        &mut self,
        model: &Model,
        sigma: &mut Array2<C64>,
        tau: f64,
        h: f64,
        drive: impl Fn(f64) -> Drive,
        audit: bool,
    ) -> Result<(Rates, f64)> {
        let n = model.dim();
        if sigma.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                sigma: sigma.nrows(),
                hamiltonian: n,
            });
        }
        if !sigma.is_standard_layout() {
            *sigma = sigma.as_standard_layout().into_owned();
        }
        let d0 = drive(tau);
        let dm = drive(tau + 0.5 * h);
        let d1 = drive(tau + h);
        let half = 0.5 * h;
        let c = h / 6.0;
        let mut incr = Rates::default();
        let Stepper { acc, a, b, row, kcol, ham } = self;
        let y = sigma.as_slice_mut().expect("standard layout");

        model.fill_hamiltonian(&d0, &mut ham.energies, &mut ham.coupling);
        sweep_rows(model, ham, y, row, kcol, |j, k| {
            let r = j * n..(j + 1) * n;
            for ((acc, a), (&y, &k)) in acc[r.clone()].iter_mut().zip(&mut a[r.clone()]).zip(y[r].iter().zip(k)) {
                *acc = k;
                *a = y + k * half;
            }
        });
        incr.axpy(1.0, &rates(model, &d0, ham, y, kcol));

        model.fill_hamiltonian(&dm, &mut ham.energies, &mut ham.coupling);
        sweep_rows(model, ham, a, row, kcol, |j, k| {
            let r = j * n..(j + 1) * n;
            for ((acc, b), (&y, &k)) in acc[r.clone()].iter_mut().zip(&mut b[r.clone()]).zip(y[r].iter().zip(k)) {
                *acc += k * 2.0;
                *b = y + k * half;
            }
        });
        incr.axpy(2.0, &rates(model, &dm, ham, a, kcol));

        sweep_rows(model, ham, b, row, kcol, |j, k| {
            let r = j * n..(j + 1) * n;
            for ((acc, a), (&y, &k)) in acc[r.clone()].iter_mut().zip(&mut a[r.clone()]).zip(y[r].iter().zip(k)) {
                *acc += k * 2.0;
                *a = y + k * h;
            }
        });
        incr.axpy(2.0, &rates(model, &dm, ham, b, kcol));

        model.fill_hamiltonian(&d1, &mut ham.energies, &mut ham.coupling);
        let stage4 = {
            let mut out = Rates::default();
            // Rates must see the stage input before `y` is overwritten; they
            // only read `a`, which the final sweep leaves intact.
            sweep_rows(model, ham, a, row, kcol, |j, k| {
                let r = j * n..(j + 1) * n;
                for ((y, &acc), &k) in y[r.clone()].iter_mut().zip(&acc[r]).zip(k) {
                    *y += (acc + k) * c;
                }
            });
            out.axpy(1.0, &rates(model, &d1, ham, a, kcol));
            out
        };
        incr.axpy(1.0, &stage4);

        let defect = if audit { hermiticity_error(sigma) } else { 0.0 };
        hermitize(sigma);

        let mut out = Rates::default();
        out.axpy(c, &incr);
        Ok((out, defect))
    }
}

/// Single RK4 step of `sigma` by `dt`. The step must stay inside one smooth
/// segment of the protocol.
pub fn step_rk4(model: &Model, sigma: &Correlator, dt: f64) -> Result<Correlator> {
    let p = &model.protocol;
    let (stroke, tau) = p.stroke_at(sigma.time);
    let end = p
        .breakpoints(stroke)
        .into_iter()
        .find(|&b| b > tau)
        .unwrap_or_else(|| p.duration(stroke));
    if tau + dt > end + 1e-12 * end.max(1.0) {
        return Err(Error::CrossesBoundary {
            t0: sigma.time,
            t1: sigma.time + dt,
        });
    }
    let mut stepper = Stepper::new(model);
    let mut out = sigma.clone();
    stepper.step(model, &mut out.matrix, tau, dt, |s| p.drive_in(stroke, s), false)?;
    out.time = sigma.time + dt;
    Ok(out)
}

/// State summary at a stroke boundary.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub time: f64,
    pub cycle: usize,
    /// 0..=3: start of the stroke with this index.
    pub boundary: usize,
    pub dot_occupation: f64,
    /// `Tr[H_B^v σ]`, hot then cold.
    pub lead_energy: [f64; 2],
    /// `Σ_k t_k Re σ_kd`, hot then cold.
    pub coherence: [f64; 2],
    pub trace: f64,
    pub hot_cold_max: f64,
    pub spectrum: Option<(f64, f64)>,
    pub matrix: Option<Array2<C64>>,
}

impl Checkpoint {
    fn capture(model: &Model, sigma: &Correlator, cycle: usize, boundary: usize, opts: &RunOptions) -> Self {
        let l = model.layout();
        Checkpoint {
            time: sigma.time,
            cycle,
            boundary,
            dot_occupation: sigma.dot_occupation(&l),
            lead_energy: [sigma.lead_energy(model, Lead::Hot), sigma.lead_energy(model, Lead::Cold)],
            coherence: [sigma.coherence(model, Lead::Hot), sigma.coherence(model, Lead::Cold)],
            trace: sigma.trace(),
            hot_cold_max: sigma.hot_cold_max(&l),
            spectrum: opts.audit.then(|| sigma.spectrum_bounds()),
            matrix: opts.store_matrices.then(|| sigma.matrix.clone()),
        }
    }

    /// `Tr[H_SI σ]` with the system+interaction part of `drive`.
    pub fn system_interaction_energy(&self, drive: &Drive) -> f64 {
        drive.epsilon * self.dot_occupation
            + 2.0 * (drive.lambda_hot * self.coherence[0] + drive.lambda_cold * self.coherence[1])
    }
}

/// Per-cycle integrals accumulated during propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CycleIntegrals {
    /// `∫Tr[Ḣσ]` over the smooth segments.
    pub work_drive: f64,
    /// `Σ Tr[ΔH σ]` over λ jumps in `(mT, (m+1)T]`.
    pub work_switch: f64,
    /// `∫Tr[Z_v H]`, hot then cold.
    pub superbath: [f64; 2],
    /// `∫ d/dt Tr[H_SI σ]` over the smooth segments.
    pub system_interaction_drive: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub epsilon: f64,
    pub lambda_hot: f64,
    pub lambda_cold: f64,
    pub dot_occupation: f64,
    pub lead_energy: [f64; 2],
    pub system_interaction_energy: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub period: f64,
    pub cycles: usize,
    /// Boundary `b` of cycle `m` at index `4m + b`; the last entry is `t = MT`.
    pub checkpoints: Vec<Checkpoint>,
    pub integrals: Vec<CycleIntegrals>,
    pub samples: Vec<Sample>,
    pub final_state: Correlator,
    pub steps: u64,
    /// Largest pre-Hermitization defect seen (audit runs only).
    pub max_hermiticity_defect: f64,
}

impl Trajectory {
    pub fn checkpoint(&self, cycle: usize, boundary: usize) -> Option<&Checkpoint> {
        self.checkpoints.get(4 * cycle + boundary)
    }

    pub fn max_hot_cold(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.hot_cold_max).fold(0.0, f64::max)
    }
}

fn switch_jump(model: &Model, sigma: &Array2<C64>, before: &Drive, after: &Drive) -> f64 {
    let d = model.layout().dot();
    let de = after.epsilon - before.epsilon;
    let dh = after.lambda_hot - before.lambda_hot;
    let dc = after.lambda_cold - before.lambda_cold;
    let mut jump = de * sigma[[d, d]].re;
    if dh != 0.0 {
        jump += 2.0 * dh * coherence(sigma, model, Lead::Hot);
    }
    if dc != 0.0 {
        jump += 2.0 * dc * coherence(sigma, model, Lead::Cold);
    }
    jump
}

pub fn run_cycles(model: &Model, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate()?;
    let segments = plan_segments(model, opts.dt)?;
    let stride = opts.sample_stride()?;
    let p = &model.protocol;
    let period = p.period();

    let mut sigma = Correlator::initial(model, opts.dot_occupation);
    let mut stepper = Stepper::new(model);
    let mut checkpoints = Vec::with_capacity(4 * opts.cycles + 1);
    let mut integrals = vec![CycleIntegrals::default(); opts.cycles];
    let mut samples = Vec::new();
    let mut step: u64 = 0;
    let mut max_defect: f64 = 0.0;

    checkpoints.push(Checkpoint::capture(model, &sigma, 0, 0, opts));
    let last = segments.last().expect("non-empty plan");

    for cycle in 0..opts.cycles {
        let t_cycle = cycle as f64 * period;
        for (si, seg) in segments.iter().enumerate() {
            let t_seg = t_cycle + p.start(seg.stroke) + seg.tau0;
            let drive = |s: f64| p.drive_in(seg.stroke, s);

            // switch entering this segment; the cycle-start switch is booked
            // at the end of the previous cycle, the one at t = 0 precedes the run
            if si > 0 {
                let prev = &segments[si - 1];
                let before = p.drive_in(prev.stroke, prev.tau1);
                let after = drive(seg.tau0);
                let jump = switch_jump(model, &sigma.matrix, &before, &after);
                integrals[cycle].work_switch += jump;
            }
            if seg.tau0 == 0.0 && seg.stroke != Stroke::HotContact {
                checkpoints.push(Checkpoint::capture(model, &sigma, cycle, seg.stroke.index(), opts));
            }

            for i in 0..seg.steps {
                let tau = seg.tau0 + i as f64 * seg.h;
                if step % stride as u64 == 0 {
                    samples.push(sample(model, &sigma, &drive(tau), t_seg + i as f64 * seg.h));
                }
                let (incr, defect) =
                    stepper.step(model, &mut sigma.matrix, tau, seg.h, drive, opts.audit)?;
                step += 1;
                let dd = sigma.matrix[[model.layout().dot(), model.layout().dot()]];
                // 0 <= sigma <= 1 bounds every entry, so a wild n_d means RK4 left its stability region
                if !(incr.is_finite() && dd.re.abs() <= BLOWUP_BOUND) {
                    return Err(Error::Instability {
                        step,
                        time: t_seg + (i + 1) as f64 * seg.h,
                    });
                }
                max_defect = max_defect.max(defect);
                let acc = &mut integrals[cycle];
                acc.work_drive += incr.work;
                acc.superbath[0] += incr.superbath[0];
                acc.superbath[1] += incr.superbath[1];
                acc.system_interaction_drive += incr.system_interaction;
            }
            sigma.time = t_seg + seg.steps as f64 * seg.h;
        }
        sigma.time = (cycle + 1) as f64 * period;
        if !sigma.is_finite() || sigma.matrix.iter().any(|z| z.norm() > BLOWUP_BOUND) {
            return Err(Error::Instability {
                step,
                time: sigma.time,
            });
        }
        // the hot switch-on at (m+1)T closes cycle m
        let first = &segments[0];
        let before = p.drive_in(last.stroke, last.tau1);
        let after = p.drive_in(first.stroke, first.tau0);
        let jump = switch_jump(model, &sigma.matrix, &before, &after);
        integrals[cycle].work_switch += jump;
        checkpoints.push(Checkpoint::capture(model, &sigma, cycle + 1, 0, opts));
    }
    samples.push(sample(model, &sigma, &p.drive_in(Stroke::HotContact, 0.0), sigma.time));

    Ok(Trajectory {
        period,
        cycles: opts.cycles,
        checkpoints,
        integrals,
        samples,
        final_state: sigma,
        steps: step,
        max_hermiticity_defect: max_defect,
    })
}

fn sample(model: &Model, sigma: &Correlator, drive: &Drive, time: f64) -> Sample {
    let l = model.layout();
    let n = sigma.dot_occupation(&l);
    let si = drive.epsilon * n
        + 2.0
            * (drive.lambda_hot * sigma.coherence(model, Lead::Hot)
                + drive.lambda_cold * sigma.coherence(model, Lead::Cold));
    Sample {
        time,
        epsilon: drive.epsilon,
        lambda_hot: drive.lambda_hot,
        lambda_cold: drive.lambda_cold,
        dot_occupation: n,
        lead_energy: [sigma.lead_energy(model, Lead::Hot), sigma.lead_energy(model, Lead::Cold)],
        system_interaction_energy: si,
    }
}
