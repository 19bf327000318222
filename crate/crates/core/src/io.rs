//! CSV, JSON and binary outputs.
//!
//! Per-cycle CSV columns, in order:
//! `m,W,Qh,Qc,A,F,F0,eta,eta0,dS,Sigma,W_switch`. Floats carry 17
//! significant digits; an undefined efficiency is written as `undefined`.
//!
//! Sample CSV columns: `t,eps,lambda_h,lambda_c,n_d,E_hot,E_cold,E_SI`.
//!
//! Checkpoint dump layout (little endian): 8-byte magic `QOTTOSIG`,
//! `u32` format version, `u64` dimension `n`, `f64` time, then `n·n`
//! row-major `(re, im)` pairs of `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::correlator::Correlator;
use crate::error::{Error, Result};
use crate::ledger::CycleRecord;
use crate::propagate::Sample;

pub const CYCLE_COLUMNS: [&str; 12] =
    ["m", "W", "Qh", "Qc", "A", "F", "F0", "eta", "eta0", "dS", "Sigma", "W_switch"];
pub const SAMPLE_COLUMNS: [&str; 8] = ["t", "eps", "lambda_h", "lambda_c", "n_d", "E_hot", "E_cold", "E_SI"];
pub const UNDEFINED: &str = "undefined";

const MAGIC: &[u8; 8] = b"QOTTOSIG";
const DUMP_VERSION: u32 = 1;

/// 17 significant digits, round-trip exact.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_else(|| UNDEFINED.to_string())
}

pub fn write_cycles<W: Write>(records: &[CycleRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CYCLE_COLUMNS)?;
    for r in records {
        w.write_record([
            r.m.to_string(),
            fmt_float(r.work),
            fmt_float(r.heat_hot),
            fmt_float(r.heat_cold),
            fmt_float(r.a_term),
            fmt_float(r.residual),
            fmt_float(r.incomplete),
            fmt_opt(r.eta),
            fmt_opt(r.eta0),
            fmt_float(r.entropy_change),
            fmt_float(r.entropy_production),
            fmt_float(r.switch_work),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples<W: Write>(samples: &[Sample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SAMPLE_COLUMNS)?;
    for s in samples {
        w.write_record([
            fmt_float(s.time),
            fmt_float(s.epsilon),
            fmt_float(s.lambda_hot),
            fmt_float(s.lambda_cold),
            fmt_float(s.dot_occupation),
            fmt_float(s.lead_energy[0]),
            fmt_float(s.lead_energy[1]),
            fmt_float(s.system_interaction_energy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed row of a per-cycle CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRow {
    pub m: usize,
    pub work: f64,
    pub heat_hot: f64,
    pub heat_cold: f64,
    pub a_term: f64,
    pub residual: f64,
    pub incomplete: f64,
    pub eta: Option<f64>,
    pub eta0: Option<f64>,
    pub entropy_change: f64,
    pub entropy_production: f64,
    pub switch_work: f64,
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.trim() == UNDEFINED {
        Ok(None)
    } else {
        parse_f(s).map(Some)
    }
}

pub fn read_cycles<R: Read>(input: R) -> Result<Vec<CycleRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CYCLE_COLUMNS {
        return Err(Error::Parse(format!("unexpected cycle header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| parse_f(&rec[i]);
        rows.push(CycleRow {
            m: rec[0].parse().map_err(|_| Error::Parse(format!("bad cycle index {:?}", &rec[0])))?,
            work: f(1)?,
            heat_hot: f(2)?,
            heat_cold: f(3)?,
            a_term: f(4)?,
            residual: f(5)?,
            incomplete: f(6)?,
            eta: parse_opt(&rec[7])?,
            eta0: parse_opt(&rec[8])?,
            entropy_change: f(9)?,
            entropy_production: f(10)?,
            switch_work: f(11)?,
        });
    }
    Ok(rows)
}

pub fn write_checkpoint<W: Write>(sigma: &Correlator, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let n = sigma.dim();
    w.write_all(MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&sigma.time.to_le_bytes())?;
    for z in sigma.matrix.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Correlator> {
    let mut r = BufReader::new(input);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a correlator dump".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::Parse(format!("unsupported dump version {version}")));
    }
    r.read_exact(&mut b8)?;
    let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Parse("dimension overflow".into()))?;
    if n == 0 || n > 1 << 16 {
        return Err(Error::Parse(format!("implausible dimension {n}")));
    }
    r.read_exact(&mut b8)?;
    let time = f64::from_le_bytes(b8);
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        data.push(C64::new(re, f64::from_le_bytes(b8)));
    }
    let matrix = Array2::from_shape_vec((n, n), data).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(Correlator { matrix, time })
}

pub fn save_checkpoint(sigma: &Correlator, path: &Path) -> Result<()> {
    write_checkpoint(sigma, File::create(path)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Correlator> {
    read_checkpoint(File::open(path)?)
}
