//! Equilibrium estimate of the engine region in the (ε₁, ε₂) plane.
//!
//! In the limit cycle the dot occupation is frozen during the two isolated
//! strokes, so the work per cycle is estimated from the equilibrium
//! occupations reached at the end of the contact strokes:
//!
//! ```text
//! W ≈ n_h(ε₁)(ε₂ − ε₁) + n_c(ε₂)(ε₁ − ε₂)
//! n(ε_d) = Γ ∫ dε/2π n_F(ε) / ((Γ/2)² + (ε − ε_d)²)
//! ```

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_float;
use crate::model::{fermi, LeadSpec};

/// Absolute tolerance of the occupation quadrature.
pub const OCCUPATION_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;

// 21-point Gauss–Kronrod rule: Kronrod abscissae and weights, then the
// weights of the embedded 10-point Gauss rule at the odd-indexed nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

fn gk21(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    let kronrod = kronrod * h;
    let gauss = gauss * h;
    (kronrod, (kronrod - gauss).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature over `[points[0], points[last]]`
/// with mandatory subdivision at every entry of `points` (sorted, distinct).
/// Returns the integral and its error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, points: &[f64], tol: f64) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    let mut error = 0.0;
    for w in points.windows(2) {
        let (value, err) = gk21(&f, w[0], w[1]);
        error += err;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            error: err,
        });
    }
    while error > tol {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: tol,
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: tol,
            });
        }
        error -= worst.error;
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk21(&f, a, b);
            error += err;
            heap.push(Piece { a, b, value, error: err });
        }
        // resum now and then so the running error does not drift
        if heap.len() % 256 == 0 {
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    let total = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok((total, error))
}

/// Default half-width of the explicitly integrated window around μ.
pub fn default_cutoff(eps_d: f64, lead: &LeadSpec) -> f64 {
    ((eps_d - lead.mu).abs() + 10.0 * lead.coupling).max(40.0 / lead.beta)
}

/// Equilibrium occupation of a level at `eps_d` hybridized with `lead`.
pub fn equilibrium_occupation(eps_d: f64, lead: &LeadSpec) -> Result<f64> {
    equilibrium_occupation_with_cutoff(eps_d, lead, default_cutoff(eps_d, lead))
}

/// As [`equilibrium_occupation`], integrating numerically over
/// `[μ − cut, μ + cut]` and analytically beyond.
pub fn equilibrium_occupation_with_cutoff(eps_d: f64, lead: &LeadSpec, cut: f64) -> Result<f64> {
    let g = lead.coupling;
    let (beta, mu) = (lead.beta, lead.mu);
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidConfig(format!("occupation needs Γ > 0, got {g}")));
    }
    if !(beta > 0.0 && beta.is_finite() && mu.is_finite() && eps_d.is_finite()) {
        return Err(Error::InvalidConfig("occupation needs finite β > 0, μ and ε_d".into()));
    }
    if !(cut > 0.0 && cut.is_finite()) {
        return Err(Error::InvalidConfig(format!("cutoff must be positive, got {cut}")));
    }
    let hw = 0.5 * g;
    let (lo, hi) = (mu - cut, mu + cut);

    // Lorentzian mass outside [lo, hi]; n_F is 1 below and ≤ n_F(hi) above
    let mass_below = (((lo - eps_d) / hw).atan() + 0.5 * PI) / PI;
    let mass_above = (0.5 * PI - ((hi - eps_d) / hw).atan()) / PI;
    let tails = mass_below + fermi(hi, beta, mu) * mass_above;

    let mut points = vec![lo, hi, mu, eps_d.clamp(lo, hi)];
    let mut k = g;
    while k < 2.0 * cut {
        points.extend([eps_d - k, eps_d + k]);
        k *= 4.0;
    }
    for w in [1.0, 5.0, 15.0] {
        points.extend([mu - w / beta, mu + w / beta]);
    }
    points.retain(|p| *p >= lo && *p <= hi);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let f = |e: f64| fermi(e, beta, mu) * hw / (PI * (hw * hw + (e - eps_d) * (e - eps_d)));
    let (core, _) = integrate(f, &points, OCCUPATION_TOL)?;
    Ok(core + tails)
}

/// Limit-cycle work per cycle from equilibrium occupations at the ends of
/// the two contact strokes.
pub fn limit_cycle_work_estimate(eps1: f64, eps2: f64, hot: &LeadSpec, cold: &LeadSpec) -> Result<f64> {
    let n_hot = equilibrium_occupation(eps1, hot)?;
    let n_cold = equilibrium_occupation(eps2, cold)?;
    Ok(n_hot * (eps2 - eps1) + n_cold * (eps1 - eps2))
}

/// Evenly spaced axis including both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        GridAxis { start, stop, points }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && match self.points {
                0 => false,
                1 => true,
                _ => self.stop > self.start,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "axis {name}: need finite start < stop and at least one point"
            )))
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.stop } else { self.start + i as f64 * step })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeGrid {
    pub eps1_axis: Vec<f64>,
    pub eps2_axis: Vec<f64>,
    /// `w_est[i][j]` at `(eps1_axis[i], eps2_axis[j])`.
    pub w_est: Vec<Vec<f64>>,
}

impl RegimeGrid {
    pub fn is_engine(&self, i: usize, j: usize) -> bool {
        self.w_est[i][j] < 0.0
    }

    /// Rows `eps1,eps2,W_est`, `eps2` varying fastest.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eps1", "eps2", "W_est"])?;
        for (i, &e1) in self.eps1_axis.iter().enumerate() {
            for (j, &e2) in self.eps2_axis.iter().enumerate() {
                w.write_record([fmt_float(e1), fmt_float(e2), fmt_float(self.w_est[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn check_monotone(axis: &[f64], name: &str) -> Result<()> {
    if axis.is_empty() || axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} axis must be non-empty and increasing")));
    }
    Ok(())
}

pub fn engine_region_map(eps1: &[f64], eps2: &[f64], hot: &LeadSpec, cold: &LeadSpec) -> Result<RegimeGrid> {
    check_monotone(eps1, "eps1")?;
    check_monotone(eps2, "eps2")?;
    // occupations depend on one energy each, so the grid is an outer product
    let n_hot: Vec<f64> = eps1.par_iter().map(|&e| equilibrium_occupation(e, hot)).collect::<Result<_>>()?;
    let n_cold: Vec<f64> = eps2.par_iter().map(|&e| equilibrium_occupation(e, cold)).collect::<Result<_>>()?;
    let w_est = eps1
        .iter()
        .zip(&n_hot)
        .map(|(&e1, &nh)| eps2.iter().zip(&n_cold).map(|(&e2, &nc)| nh * (e2 - e1) + nc * (e1 - e2)).collect())
        .collect();
    Ok(RegimeGrid {
        eps1_axis: eps1.to_vec(),
        eps2_axis: eps2.to_vec(),
        w_est,
    })
}
