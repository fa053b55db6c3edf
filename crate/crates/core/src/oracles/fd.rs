use super::OracleConfig;
use crate::derivatives::{DerivativeMethod, DerivativeResult};
use crate::error::{Error, Result};
use crate::lp::{max_abs_diff, LpVector};

/// One-sided difference quotients of `projector` at `x` along `v`, with
/// Richardson extrapolation over the last two steps.
///
/// The error estimate is the largest coordinate gap between the last two
/// quotients. When that gap exceeds the first one the quotients are not
/// settling, which happens where the projector has no directional
/// derivative, and the call fails with [`Error::Unstable`].
pub fn fd_derivative<F>(
    projector: F,
    x: &LpVector,
    v: &LpVector,
    cfg: &OracleConfig,
) -> Result<DerivativeResult>
where
    F: Fn(&LpVector) -> Result<LpVector>,
{
    cfg.validate()?;
    if x.dim() != v.dim() {
        return Err(Error::DimensionMismatch(x.dim(), v.dim()));
    }
    if v.is_zero() {
        return Err(Error::ZeroDirection);
    }
    let base = projector(x)?;
    let mut quotients = Vec::with_capacity(cfg.fd_t_sequence.len());
    for &t in &cfg.fd_t_sequence {
        let moved = projector(&x.axpy(t, v)?)?;
        let q: Vec<f64> =
            moved.coords().iter().zip(base.coords()).map(|(a, b)| (a - b) / t).collect();
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::Unstable { spread: f64::INFINITY });
        }
        quotients.push(q);
    }
    let spreads: Vec<f64> = quotients.windows(2).map(|w| max_abs_diff(&w[0], &w[1])).collect();
    let k = quotients.len();
    let (qa, qb) = (&quotients[k - 2], &quotients[k - 1]);
    let (ta, tb) = (cfg.fd_t_sequence[k - 2], cfg.fd_t_sequence[k - 1]);
    let last = spreads[spreads.len() - 1];
    let scale = 1.0 + qb.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if last > spreads[0] && last > 1e-6 * scale {
        return Err(Error::Unstable { spread: last });
    }
    let extrapolated = qa.iter().zip(qb).map(|(a, b)| (ta * b - tb * a) / (ta - tb)).collect();
    Ok(DerivativeResult {
        vector: LpVector::new(extrapolated, x.params())?,
        method: DerivativeMethod::FiniteDifference,
        fd_error_estimate: Some(last),
    })
}
