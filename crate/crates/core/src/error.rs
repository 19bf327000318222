use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: correlator is {sigma}x{sigma}, hamiltonian is {hamiltonian}x{hamiltonian}")]
    DimensionMismatch { sigma: usize, hamiltonian: usize },

    #[error("step [{t0}, {t1}] crosses a stroke boundary")]
    CrossesBoundary { t0: f64, t1: f64 },

    #[error("correlator diverged at step {step} (t = {time}); try a smaller time step")]
    Instability { step: u64, time: f64 },

    #[error("cycle {0} has not been fully propagated")]
    IncompleteCycle(usize),

    #[error("quadrature did not converge: estimated error {estimate:e} above tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
