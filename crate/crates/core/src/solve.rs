//! Dispatch to closed forms, with oracle fallback where the closed forms
//! stop.

use crate::derivatives::{
    d_gpi_ball, d_gpi_masked_ball, d_mpi_cylinder, d_mpi_masked_ball, d_mpi_subspace,
    DerivativeResult,
};
use crate::error::{Error, Result};
use crate::lp::LpVector;
use crate::oracles::{brute_project, fd_derivative, vi_certificate, OracleConfig};
use crate::sets::{
    classify_region, project_closed_form, CertificateSummary, ConvexSetSpec, Flavor, Method,
    ProjectionResult,
};

/// Marker for operations that only ever run through an oracle.
pub const NO_CLOSED_FORM: &str = "NoClosedForm";

/// A result together with the reason an oracle replaced the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved<T> {
    pub value: T,
    /// Error code of the closed form that was bypassed, or [`NO_CLOSED_FORM`].
    pub fallback: Option<String>,
}

fn projection_falls_back(err: &Error, set: &ConvexSetSpec, flavor: Flavor) -> bool {
    let generalized_cylinder =
        matches!((set, flavor), (ConvexSetSpec::Cylinder { .. }, Flavor::Generalized));
    err.allows_fallback()
        || generalized_cylinder && matches!(err, Error::WrongExponent(_) | Error::InvalidRegion(_))
}

/// Closed-form projection when one applies, else the brute-force oracle
/// with a certificate attached.
pub fn project(
    x: &LpVector,
    set: &ConvexSetSpec,
    flavor: Flavor,
    cfg: &OracleConfig,
) -> Result<Solved<ProjectionResult>> {
    match project_closed_form(x, set, flavor) {
        Ok(value) => Ok(Solved { value, fallback: None }),
        Err(e) if projection_falls_back(&e, set, flavor) => {
            let point = brute_project(x, set, flavor, cfg)?.point;
            let cert = vi_certificate(x, &point, set, flavor, cfg)?;
            let r = set.radius().unwrap_or(1.0);
            let region = classify_region(x, &set.mask_or_full(x.dim()), r)?;
            let value = ProjectionResult {
                point,
                region,
                method: Method::OracleFallback,
                certificate: Some(CertificateSummary {
                    min_margin: cert.min_margin,
                    passed: cert.passed,
                }),
            };
            Ok(Solved { value, fallback: Some(e.code().to_string()) })
        }
        Err(e) => Err(e),
    }
}

/// Projection point only, for use as a finite-difference target.
pub fn projector<'a>(
    set: &'a ConvexSetSpec,
    flavor: Flavor,
    cfg: &'a OracleConfig,
) -> impl Fn(&LpVector) -> Result<LpVector> + 'a {
    move |y| project(y, set, flavor, cfg).map(|s| s.value.point)
}

/// The closed-form directional derivative for this set and flavor, or
/// `None` where only the finite-difference oracle applies.
pub fn derivative_closed_form(
    x: &LpVector,
    v: &LpVector,
    set: &ConvexSetSpec,
    flavor: Flavor,
) -> Option<Result<DerivativeResult>> {
    match (set, flavor) {
        (ConvexSetSpec::FullBall { r }, _) => Some(d_gpi_ball(x, v, *r)),
        (ConvexSetSpec::MaskedBall { mask, r }, Flavor::Generalized) => {
            Some(d_gpi_masked_ball(x, v, mask, *r))
        }
        (ConvexSetSpec::MaskedBall { mask, r }, Flavor::Metric) => {
            Some(d_mpi_masked_ball(x, v, mask, *r))
        }
        (ConvexSetSpec::Cylinder { mask, r }, Flavor::Metric) => {
            Some(d_mpi_cylinder(x, v, mask, *r))
        }
        (ConvexSetSpec::Subspace { mask }, Flavor::Metric) => Some(d_mpi_subspace(x, v, mask)),
        (ConvexSetSpec::Cylinder { .. }, Flavor::Generalized)
        | (ConvexSetSpec::Subspace { .. }, Flavor::Generalized) => None,
    }
}

/// Closed-form directional derivative when one applies, else the
/// finite-difference oracle.
pub fn derivative(
    x: &LpVector,
    v: &LpVector,
    set: &ConvexSetSpec,
    flavor: Flavor,
    cfg: &OracleConfig,
) -> Result<Solved<DerivativeResult>> {
    let reason = match derivative_closed_form(x, v, set, flavor) {
        Some(Ok(value)) => return Ok(Solved { value, fallback: None }),
        Some(Err(e)) if e.allows_fallback() => e.code().to_string(),
        Some(Err(e)) => return Err(e),
        None => NO_CLOSED_FORM.to_string(),
    };
    let value = fd_derivative(projector(set, flavor, cfg), x, v, cfg)?;
    Ok(Solved { value, fallback: Some(reason) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivatives::DerivativeMethod;
    use crate::lp::IndexMask;

    fn v(c: &[f64], p: f64) -> LpVector {
        LpVector::from_slice(c, p).unwrap()
    }

    #[test]
    fn closed_form_projection_has_no_fallback() {
        let set = ConvexSetSpec::full_ball(1.0).unwrap();
        let s = project(&v(&[3.0, 4.0], 2.0), &set, Flavor::Generalized, &Default::default())
            .unwrap();
        assert!(s.fallback.is_none());
        assert_eq!(s.value.method, Method::ClosedForm);
    }

    #[test]
    fn cylinder_condition_violation_routes_to_oracle() {
        let set = ConvexSetSpec::cylinder(IndexMask::new([0], 2).unwrap(), 1.0).unwrap();
        let s = project(&v(&[5.0, 0.1], 3.0), &set, Flavor::Generalized, &Default::default())
            .unwrap();
        assert_eq!(s.fallback.as_deref(), Some("ConditionViolated"));
        assert_eq!(s.value.method, Method::OracleFallback);
        assert!(s.value.certificate.unwrap().passed);
        assert!((s.value.point.norm() - (1.0f64 + 0.1f64.powi(3)).cbrt()).abs() < 0.1);
    }

    #[test]
    fn cylinder_other_exponents_route_to_oracle() {
        let set = ConvexSetSpec::cylinder(IndexMask::new([0], 2).unwrap(), 2.0).unwrap();
        for p in [2.5, 3.0] {
            let s = project(&v(&[5.0, 1.0], p), &set, Flavor::Generalized, &Default::default())
                .unwrap();
            assert!(s.fallback.is_some());
            assert!((s.value.point.coords()[0] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_falls_back_on_fractional_p() {
        let set = ConvexSetSpec::masked_ball(IndexMask::new([0], 2).unwrap(), 1.0).unwrap();
        let s = derivative(
            &v(&[0.5, 2.0], 2.5),
            &v(&[0.0, 1.0], 2.5),
            &set,
            Flavor::Generalized,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(s.fallback.as_deref(), Some("NonIntegerP"));
        assert_eq!(s.value.method, DerivativeMethod::FiniteDifference);
        assert!(s.value.fd_error_estimate.unwrap() < 1e-6);
    }

    #[test]
    fn subspace_generalized_derivative_is_fd_only() {
        let set = ConvexSetSpec::subspace(IndexMask::new([0], 2).unwrap());
        let x = v(&[1.0, 2.0], 3.0);
        let s = derivative(&x, &x, &set, Flavor::Generalized, &Default::default()).unwrap();
        assert_eq!(s.fallback.as_deref(), Some(NO_CLOSED_FORM));
        let px = project(&x, &set, Flavor::Generalized, &Default::default()).unwrap();
        assert!(s.value.vector.max_abs_diff(&px.value.point) < 1e-6);
    }

    #[test]
    fn nondifferentiable_is_an_error() {
        let set = ConvexSetSpec::masked_ball(IndexMask::new([0], 2).unwrap(), 1.0).unwrap();
        let err = derivative(
            &v(&[0.0, 1.0], 1.5),
            &v(&[1.0, 0.0], 1.5),
            &set,
            Flavor::Generalized,
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Nondifferentiable(_)));
    }
}
