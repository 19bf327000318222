//! Single runs, sweeps and convergence studies on top of a [`RunConfig`].

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Axis, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, fmt_float};
use crate::ledger::{self, CycleRecord};
use crate::model::Model;
use crate::propagate::{run_cycles, Trajectory};
use crate::regime::{engine_region_map, RegimeGrid};

const SECOND_LAW_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitCycle {
    pub m: usize,
    pub work: f64,
    pub heat_hot: f64,
    pub heat_cold: f64,
    pub a_term: f64,
    pub switch_work: f64,
    pub eta: Option<f64>,
    pub eta0: Option<f64>,
}

/// Ledger invariants checked over every cycle of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerChecks {
    pub first_law: bool,
    pub second_law: bool,
    pub efficiency_identity: bool,
}

impl LedgerChecks {
    pub fn all(&self) -> bool {
        self.first_law && self.second_law && self.efficiency_identity
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub dim: usize,
    pub cycles: usize,
    pub dt: f64,
    pub steps: u64,
    pub transient_cycles: Option<usize>,
    /// Last simulated cycle.
    pub limit_cycle: LimitCycle,
    pub max_first_law_residual: f64,
    /// Largest `|A_endpoint − W_switch − A|` over cycles.
    pub max_a_term_discrepancy: f64,
    pub min_entropy_production: f64,
    /// Largest modulus in the hot↔cold block at stroke boundaries.
    pub max_hot_cold: f64,
    pub checks: LedgerChecks,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_hermiticity_defect: Option<f64>,
    /// Extreme eigenvalues of σ over all checkpoints (audit runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<(f64, f64)>,
}

pub struct RunOutcome {
    pub model: Model,
    pub trajectory: Trajectory,
    pub records: Vec<CycleRecord>,
    pub summary: RunSummary,
}

fn efficiency_identity_holds(r: &CycleRecord) -> bool {
    match (r.eta, r.eta0) {
        (Some(eta), Some(eta0)) => (eta - (eta0 - r.a_term / r.heat_hot)).abs() <= IDENTITY_TOL * (1.0 + eta.abs()),
        (None, None) => true,
        _ => false,
    }
}

pub fn summarize(traj: &Trajectory, records: &[CycleRecord], dim: usize, dt: f64, audit: bool) -> RunSummary {
    let last = records.last().expect("at least one cycle");
    let spectrum = traj
        .checkpoints
        .iter()
        .filter_map(|c| c.spectrum)
        .fold(None, |acc: Option<(f64, f64)>, (lo, hi)| {
            Some(acc.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))))
        });
    RunSummary {
        dim,
        cycles: traj.cycles,
        dt,
        steps: traj.steps,
        transient_cycles: ledger::transient_cycles(records),
        limit_cycle: LimitCycle {
            m: last.m,
            work: last.work,
            heat_hot: last.heat_hot,
            heat_cold: last.heat_cold,
            a_term: last.a_term,
            switch_work: last.switch_work,
            eta: last.eta,
            eta0: last.eta0,
        },
        max_first_law_residual: records.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        max_a_term_discrepancy: records
            .iter()
            .map(|r| (r.a_term_endpoint - r.switch_work - r.a_term).abs())
            .fold(0.0, f64::max),
        min_entropy_production: records.iter().map(|r| r.entropy_production).fold(f64::INFINITY, f64::min),
        max_hot_cold: traj.max_hot_cold(),
        checks: LedgerChecks {
            first_law: records.iter().all(CycleRecord::first_law_holds),
            second_law: records.iter().all(|r| r.entropy_production >= -SECOND_LAW_TOL),
            efficiency_identity: records.iter().all(efficiency_identity_holds),
        },
        max_hermiticity_defect: audit.then_some(traj.max_hermiticity_defect),
        spectrum,
    }
}

/// Validates, propagates and books one run.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let model = cfg.build()?;
    let mut opts = cfg.numerics.clone();
    opts.store_matrices |= cfg.output.checkpoints;
    let trajectory = run_cycles(&model, &opts)?;
    let records = ledger::ledger(&trajectory, &model)?;
    let summary = summarize(&trajectory, &records, model.dim(), opts.dt, opts.audit);
    Ok(RunOutcome {
        model,
        trajectory,
        records,
        summary,
    })
}

/// Writes `cycles.csv`, `summary.json`, optionally `samples.csv` and the
/// binary stroke-boundary dumps under `checkpoints/`.
pub fn write_outputs(outcome: &RunOutcome, cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_cycles(&outcome.records, fs::File::create(dir.join("cycles.csv"))?)?;
    if cfg.output.samples {
        io::write_samples(&outcome.trajectory.samples, fs::File::create(dir.join("samples.csv"))?)?;
    }
    if cfg.output.checkpoints {
        let sub = dir.join("checkpoints");
        fs::create_dir_all(&sub)?;
        for c in &outcome.trajectory.checkpoints {
            if let Some(m) = &c.matrix {
                let sigma = crate::Correlator {
                    matrix: m.clone(),
                    time: c.time,
                };
                io::save_checkpoint(&sigma, &sub.join(format!("c{:04}_b{}.bin", c.cycle, c.boundary)))?;
            }
        }
    }
    let json = serde_json::to_string_pretty(&outcome.summary).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

pub fn run_regime(cfg: &RunConfig) -> Result<RegimeGrid> {
    cfg.regime.eps1.validate("regime.eps1")?;
    cfg.regime.eps2.validate("regime.eps2")?;
    engine_region_map(
        &cfg.regime.eps1.values(),
        &cfg.regime.eps2.values(),
        &cfg.model.hot,
        &cfg.model.cold,
    )
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

/// Directory name of sweep point `index`, e.g. `run-002_coupling-0.2_dt-0.1`.
pub fn point_label(index: usize, point: &[(Axis, f64)]) -> String {
    let mut s = format!("run-{index:03}");
    for (axis, v) in point {
        s.push_str(&format!("_{}-{}", axis.name(), v));
    }
    s
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub index: usize,
    pub label: String,
    pub config: RunConfig,
    pub result: std::result::Result<RunSummary, String>,
}

pub const INDEX_COLUMNS: [&str; 17] = [
    "index",
    "label",
    "coupling",
    "damping",
    "spacing",
    "half_bandwidth",
    "dt",
    "status",
    "transient_cycles",
    "W",
    "Qh",
    "Qc",
    "A",
    "eta",
    "eta0",
    "max_F",
    "min_Sigma",
];

/// Runs every combination of the sweep axes, `workers` at a time, each into
/// its own subdirectory of `out`, then writes `index.csv`. Failed runs are
/// recorded and do not stop the others.
pub fn run_sweep(cfg: &RunConfig, out: &Path, workers: usize) -> Result<Vec<SweepEntry>> {
    let points = cfg.sweep.combinations();
    if points.is_empty() {
        return Err(Error::InvalidConfig("sweep has no axis values".into()));
    }
    fs::create_dir_all(out)?;
    let pool = thread_pool(workers)?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, point)| {
                let label = point_label(index, point);
                let mut config = cfg.with_all(point);
                config.sweep = Default::default();
                let result = execute(&config)
                    .and_then(|o| write_outputs(&o, &config, &out.join(&label)).map(|_| o.summary))
                    .map_err(|e| e.to_string());
                SweepEntry {
                    index,
                    label,
                    config,
                    result,
                }
            })
            .collect()
    });
    write_index(&entries, fs::File::create(out.join("index.csv"))?)?;
    Ok(entries)
}

pub fn write_index<W: std::io::Write>(entries: &[SweepEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INDEX_COLUMNS)?;
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_else(|| io::UNDEFINED.to_string());
    for e in entries {
        let lead = &e.config.model.hot;
        let mut row = vec![
            e.index.to_string(),
            e.label.clone(),
            fmt_float(lead.coupling),
            fmt_float(lead.damping()),
            fmt_float(lead.spacing),
            fmt_float(lead.half_bandwidth),
            fmt_float(e.config.numerics.dt),
        ];
        match &e.result {
            Ok(s) => {
                let l = &s.limit_cycle;
                row.extend([
                    "ok".to_string(),
                    s.transient_cycles.map(|c| c.to_string()).unwrap_or_default(),
                    fmt_float(l.work),
                    fmt_float(l.heat_hot),
                    fmt_float(l.heat_cold),
                    fmt_float(l.a_term),
                    opt(l.eta),
                    opt(l.eta0),
                    fmt_float(s.max_first_law_residual),
                    fmt_float(s.min_entropy_production),
                ]);
            }
            Err(msg) => {
                row.push(format!("failed: {msg}"));
                row.extend(std::iter::repeat_n(String::new(), 9));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergeEntry {
    pub value: f64,
    /// `max_t |n_d − n_d^ref| / max_t |n_d^ref|` over common sample times.
    pub occupation_deviation: f64,
    /// Largest deviation of the last-cycle `W, Q_h, Q_c, A`, relative to
    /// the reference energy scale `max(|W|, |Q_h|, |Q_c|)`.
    pub ledger_deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisReport {
    pub axis: Axis,
    pub reference: f64,
    pub entries: Vec<ConvergeEntry>,
    /// Deviations shrink as the setting approaches the reference.
    pub monotone: bool,
    /// `(W(h) − W(h/2)) / (W(h/2) − W(h/4))` for the first three halvings
    /// of dt, ≈ 16 for a fourth-order integrator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub richardson: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergeReport {
    pub tolerance: f64,
    pub axes: Vec<AxisReport>,
    pub pass: bool,
}

/// The finest setting of an axis; the last listed value for Γ.
fn reference_value(axis: Axis, values: &[f64]) -> f64 {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    match axis {
        Axis::Dt | Axis::Spacing | Axis::Damping => min,
        Axis::HalfBandwidth => max,
        Axis::Coupling => *values.last().expect("non-empty axis"),
    }
}

fn occupation_deviation(run: &Trajectory, reference: &Trajectory) -> f64 {
    let scale = reference.samples.iter().map(|s| s.dot_occupation.abs()).fold(0.0, f64::max);
    let mut dev: f64 = 0.0;
    let mut j = 0;
    for s in &run.samples {
        while j < reference.samples.len() && reference.samples[j].time < s.time - 1e-9 {
            j += 1;
        }
        if let Some(r) = reference.samples.get(j) {
            if (r.time - s.time).abs() <= 1e-9 {
                dev = dev.max((s.dot_occupation - r.dot_occupation).abs());
            }
        }
    }
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

fn ledger_deviation(run: &CycleRecord, reference: &CycleRecord) -> f64 {
    let scale = reference.work.abs().max(reference.heat_hot.abs()).max(reference.heat_cold.abs());
    let dev = [
        run.work - reference.work,
        run.heat_hot - reference.heat_hot,
        run.heat_cold - reference.heat_cold,
        run.a_term - reference.a_term,
    ]
    .iter()
    .map(|d| d.abs())
    .fold(0.0, f64::max);
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

fn richardson(values: &[f64], works: &[f64]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for w in idx.windows(3) {
        let (h0, h1, h2) = (values[w[0]], values[w[1]], values[w[2]]);
        let halving = |a: f64, b: f64| ((a / b) - 2.0).abs() < 1e-9;
        if halving(h0, h1) && halving(h1, h2) {
            let num = works[w[0]] - works[w[1]];
            let den = works[w[1]] - works[w[2]];
            return (den != 0.0).then(|| num / den);
        }
    }
    None
}

/// Varies each configured axis around the base run and compares against
/// the finest setting of that axis.
pub fn run_converge(cfg: &RunConfig, workers: usize) -> Result<ConvergeReport> {
    let axes = cfg.converge.axes();
    if axes.is_empty() {
        return Err(Error::InvalidConfig("converge has no axis values".into()));
    }
    let tol = cfg.converge.tolerance;
    let pool = thread_pool(workers)?;
    let mut reports = Vec::new();
    for (axis, values) in axes.active() {
        let reference = reference_value(axis, values);
        let mut settings: Vec<f64> = values.to_vec();
        if !settings.contains(&reference) {
            settings.push(reference);
        }
        let runs: Vec<RunOutcome> = pool.install(|| {
            settings
                .par_iter()
                .map(|&v| execute(&cfg.with(axis, v)))
                .collect::<Result<Vec<_>>>()
        })?;
        let ref_idx = settings.iter().position(|&v| v == reference).expect("reference present");
        let ref_run = &runs[ref_idx];
        let ref_last = ref_run.records.last().expect("cycles");
        let mut entries: Vec<ConvergeEntry> = settings
            .iter()
            .zip(&runs)
            .map(|(&value, run)| {
                let occupation = occupation_deviation(&run.trajectory, &ref_run.trajectory);
                let ledger = ledger_deviation(run.records.last().expect("cycles"), ref_last);
                ConvergeEntry {
                    value,
                    occupation_deviation: occupation,
                    ledger_deviation: ledger,
                    pass: occupation <= tol && ledger <= tol,
                }
            })
            .collect();
        // order from the coarsest setting to the reference
        entries.sort_by(|a, b| {
            let da = (a.value - reference).abs();
            let db = (b.value - reference).abs();
            db.total_cmp(&da)
        });
        let monotone = entries
            .windows(2)
            .all(|w| w[1].occupation_deviation <= w[0].occupation_deviation + 1e-15);
        let richardson = (axis == Axis::Dt)
            .then(|| {
                let works: Vec<f64> = runs.iter().map(|r| r.summary.limit_cycle.work).collect();
                richardson(&settings, &works)
            })
            .flatten();
        reports.push(AxisReport {
            axis,
            reference,
            entries,
            monotone,
            richardson,
        });
    }
    let pass = reports.iter().all(|r| r.entries.iter().all(|e| e.pass));
    Ok(ConvergeReport {
        tolerance: tol,
        axes: reports,
        pass,
    })
}
