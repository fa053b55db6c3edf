//! Independent ground truth: brute-force projections, finite-difference
//! derivatives and variational-inequality certificates.

mod certificate;
mod descent;
mod fd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use certificate::{vi_certificate, CertificateReport, TOL_CERT};
pub use descent::{brute_gpi, brute_mpi, brute_project, BruteOutcome};
pub use fd::fd_derivative;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Iteration cap per start of the projected descent.
    pub max_iters: usize,
    /// Initial step length of the projected descent.
    pub step_init: f64,
    /// Stationarity target, relative to `max(1, ‖x‖_∞)`.
    pub tol_opt: f64,
    /// Strictly decreasing step sizes for difference quotients.
    pub fd_t_sequence: Vec<f64>,
    pub vi_samples: usize,
    pub rng_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step_init: 1.0,
            tol_opt: 1e-10,
            fd_t_sequence: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            vi_samples: 1000,
            rng_seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_opt.is_finite() && self.tol_opt > 0.0) {
            return Err(Error::Schema(format!("tol_opt must be positive, got {}", self.tol_opt)));
        }
        if !(self.step_init.is_finite() && self.step_init > 0.0) {
            return Err(Error::Schema(format!(
                "step_init must be positive, got {}",
                self.step_init
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Schema("max_iters must be positive".into()));
        }
        let t = &self.fd_t_sequence;
        if t.len() < 2 {
            return Err(Error::Schema("fd_t_sequence needs at least two steps".into()));
        }
        if t.iter().any(|s| !(s.is_finite() && *s > 0.0)) || t.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Schema(
                "fd_t_sequence must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}
