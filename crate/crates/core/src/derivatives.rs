//! Closed-form Gâteaux directional derivatives of `Π` and `P`.
//!
//! Every function takes the base point, a nonzero direction and the set
//! parameters. Points where no formula applies (boundary shells, case ties,
//! fractional exponents in integer-only branches) produce errors for which
//! [`Error::allows_fallback`] is true; the dispatcher then switches to the
//! finite-difference oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{psi, IndexMask, LpVector, TOL_REGION};
use crate::sets::{classify_region, Parts, RegionTag};

/// Direction classes at a point of the sphere `S(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionClass {
    /// `‖x + tv‖ ≥ r` for all small `t > 0`.
    Up,
    /// `‖x + tv‖ < r` for all small `t > 0`.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeResult {
    pub vector: LpVector,
    pub method: DerivativeMethod,
    /// Spread of the last two difference quotients; `None` for closed forms.
    pub fd_error_estimate: Option<f64>,
}

impl DerivativeResult {
    fn closed(vector: LpVector) -> Self {
        Self { vector, method: DerivativeMethod::ClosedForm, fd_error_estimate: None }
    }
}

fn check_direction(x: &LpVector, v: &LpVector) -> Result<()> {
    if x.dim() != v.dim() {
        return Err(Error::DimensionMismatch(x.dim(), v.dim()));
    }
    if x.p() != v.p() {
        return Err(Error::ExponentMismatch(x.p(), v.p()));
    }
    if v.is_zero() {
        return Err(Error::ZeroDirection);
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidRadius(r));
    }
    Ok(())
}

/// Up or down at `x ∈ S(r)`, decided by the sign of `Ψ(x, v)`.
///
/// `Ψ = 0` counts as up: the norm is strictly convex along any line not
/// through the origin, so `‖x + tv‖` then grows.
pub fn classify_direction(x: &LpVector, v: &LpVector, r: f64) -> Result<DirectionClass> {
    check_radius(r)?;
    check_direction(x, v)?;
    let norm = x.norm();
    if (norm - r).abs() > TOL_REGION * r {
        return Err(Error::NotOnSphere { norm, r });
    }
    if psi(x, v) >= -TOL_REGION * v.norm() {
        Ok(DirectionClass::Up)
    } else {
        Ok(DirectionClass::Down)
    }
}

/// `Π'_{B(r)}(x)(v)`.
pub fn d_gpi_ball(x: &LpVector, v: &LpVector, r: f64) -> Result<DerivativeResult> {
    check_radius(r)?;
    check_direction(x, v)?;
    let norm = x.norm();
    let vnorm = v.norm();
    let out = if norm < r * (1.0 - TOL_REGION) {
        v.clone()
    } else if norm > r * (1.0 + TOL_REGION) {
        let s = psi(&x.scale(1.0 / norm), &v.scale(1.0 / vnorm)) * vnorm;
        v.scale(norm).axpy(-s, x)?.scale(r / (norm * norm))
    } else {
        match classify_direction(x, v, r)? {
            DirectionClass::Up => {
                let s = psi(&x.scale(1.0 / r), &v.scale(1.0 / vnorm));
                v.axpy(-vnorm * s / r, x)?
            }
            DirectionClass::Down => v.clone(),
        }
    };
    Ok(DerivativeResult::closed(out))
}

/// Direction data split along the mask.
struct Dir {
    h: LpVector,
    on: LpVector,
    in_subspace: bool,
}

impl Dir {
    fn new(x: &LpVector, h: &LpVector, mask: &IndexMask) -> Result<Self> {
        check_direction(x, h)?;
        let parts = Parts::new(h, mask)?;
        Ok(Self { h: h.clone(), in_subspace: parts.off_norm == 0.0, on: parts.on })
    }
}

fn integer_at_least_two(p: f64) -> bool {
    p >= 2.0 && p.fract() == 0.0
}

/// Radial branch `(r/‖u‖) h − (r/‖u‖²) Ψ(u, h) u`, the derivative of
/// `h ↦ r u/‖u‖` for the relevant part `u` of the point.
fn radial_derivative(u: &LpVector, u_norm: f64, h: &LpVector, r: f64) -> Result<LpVector> {
    let s = psi(u, h);
    h.scale(r / u_norm).axpy(-r * s / (u_norm * u_norm), u)
}

/// Derivative of `x ↦ λ(x) x^M` with `λ = (‖x^M‖/‖x‖)^{p-2}`.
fn scaled_derivative(x: &LpVector, parts: &Parts, dir: &Dir) -> Result<LpVector> {
    let p = x.p();
    let lambda = parts.scaling();
    let a = psi(&parts.on, &dir.on) / parts.on_norm;
    let b = psi(x, &dir.h) / parts.norm;
    dir.on.scale(lambda).axpy((p - 2.0) * lambda * (a - b), &parts.on)
}

/// `Π'_{B_M(r)}(x)(h)`.
///
/// Off the subspace, the branch follows the case test of the projection:
/// the scaled point `λ x^M` or the radial point `r x^M/‖x^M‖`. On the
/// scaled side the derivative of `λ x^M` is used, which depends on both
/// `Ψ(x^M, h^M)` and `Ψ(x, h)`; it reduces to `h^M` only for `p = 2`.
pub fn d_gpi_masked_ball(
    x: &LpVector,
    h: &LpVector,
    mask: &IndexMask,
    r: f64,
) -> Result<DerivativeResult> {
    check_radius(r)?;
    let dir = Dir::new(x, h, mask)?;
    let p = x.p();
    if x.is_zero() {
        return Ok(DerivativeResult::closed(if dir.in_subspace {
            dir.h
        } else {
            let parts = Parts::new(h, mask)?;
            dir.on.scale(parts.scaling())
        }));
    }
    let label = classify_region(x, mask, r)?;
    let parts = Parts::new(x, mask)?;
    let out = match label.tag {
        RegionTag::InBall if label.boundary.on_radius => {
            return Err(Error::OnBoundary("x on the sphere of B_M(r)".into()));
        }
        RegionTag::InBall => {
            if dir.in_subspace || p == 2.0 {
                if dir.in_subspace { dir.h } else { dir.on }
            } else if p > 2.0 && !integer_at_least_two(p) {
                return Err(Error::NonIntegerP(p));
            } else {
                let psi_on = psi(x, &dir.on);
                let psi_all = psi(x, &dir.h);
                dir.on
                    .scale(parts.scaling())
                    .axpy((p - 2.0) * (psi_on - psi_all) / parts.norm, x)?
            }
        }
        RegionTag::MaskedOutside => radial_derivative(&parts.on, parts.on_norm, &dir.on, r)?,
        _ if label.boundary.on_radius => {
            return Err(Error::OnBoundary("‖x^M‖ = r off the subspace".into()));
        }
        _ if label.boundary.case_tie => {
            return Err(Error::CaseBoundary("λ‖x^M‖ = r".into()));
        }
        _ if parts.on_norm == 0.0 => {
            let h_on_norm = dir.on.norm();
            if p == 2.0 {
                dir.on
            } else if p > 2.0 || h_on_norm == 0.0 {
                LpVector::zeros(x.dim(), x.params())
            } else {
                return Err(Error::Nondifferentiable(
                    "x^M = θ with p < 2 and h^M ≠ θ".into(),
                ));
            }
        }
        _ if parts.case_gap(r) > 0.0 => {
            radial_derivative(&parts.on, parts.on_norm, &dir.on, r)?
        }
        _ if p == 2.0 => dir.on,
        _ if !integer_at_least_two(p) => return Err(Error::NonIntegerP(p)),
        _ => scaled_derivative(x, &parts, &dir)?,
    };
    Ok(DerivativeResult::closed(out))
}

/// `P'_{B_M(r)}(x)(h)`.
pub fn d_mpi_masked_ball(
    x: &LpVector,
    h: &LpVector,
    mask: &IndexMask,
    r: f64,
) -> Result<DerivativeResult> {
    check_radius(r)?;
    let dir = Dir::new(x, h, mask)?;
    let label = classify_region(x, mask, r)?;
    if label.boundary.on_radius {
        return Err(Error::OnBoundary("‖x^M‖ = r".into()));
    }
    let parts = Parts::new(x, mask)?;
    let out = match label.tag {
        RegionTag::InBall if dir.in_subspace => dir.h,
        RegionTag::InBall | RegionTag::CylinderOffSubspace => dir.on,
        RegionTag::MaskedOutside | RegionTag::OutsideBoth => {
            radial_derivative(&parts.on, parts.on_norm, &dir.on, r)?
        }
    };
    Ok(DerivativeResult::closed(out))
}

/// `P'_{C_M(r)}(x)(h)`.
pub fn d_mpi_cylinder(
    x: &LpVector,
    h: &LpVector,
    mask: &IndexMask,
    r: f64,
) -> Result<DerivativeResult> {
    check_radius(r)?;
    let dir = Dir::new(x, h, mask)?;
    let label = classify_region(x, mask, r)?;
    if label.boundary.on_radius {
        return Err(Error::OnBoundary("‖x^M‖ = r".into()));
    }
    let out = match label.tag {
        RegionTag::InBall | RegionTag::CylinderOffSubspace => dir.h,
        RegionTag::MaskedOutside | RegionTag::OutsideBoth => {
            let parts = Parts::new(x, mask)?;
            let off = dir.h.sub(&dir.on)?;
            radial_derivative(&parts.on, parts.on_norm, &dir.on, r)?.add(&off)?
        }
    };
    Ok(DerivativeResult::closed(out))
}

/// `P'_{l_p^M}(x)(h) = h^M`.
pub fn d_mpi_subspace(x: &LpVector, h: &LpVector, mask: &IndexMask) -> Result<DerivativeResult> {
    let dir = Dir::new(x, h, mask)?;
    Ok(DerivativeResult::closed(dir.on))
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::instances::EXPONENTS;
    use crate::lp::IndexMask;
    use proptest::prelude::*;

    #[derive(Debug)]
    struct Case {
        x: LpVector,
        v: LpVector,
        mask: IndexMask,
        r: f64,
    }

    fn case_with(exponents: Vec<f64>) -> impl Strategy<Value = Case> {
        (prop::sample::select(exponents), 2..=6usize)
            .prop_flat_map(|(p, n)| {
                (
                    Just(p),
                    prop::collection::vec(-5.0..5.0f64, n),
                    prop::collection::vec(-1.0..1.0f64, n),
                    prop::collection::vec(any::<bool>(), n),
                    0.25..3.0f64,
                )
            })
            .prop_filter_map("proper mask, nonzero data", |(p, x, v, bits, r)| {
                let mask = IndexMask::new((0..x.len()).filter(|&i| bits[i]), x.len()).ok()?;
                let x = LpVector::from_slice(&x, p).ok()?;
                let v = LpVector::from_slice(&v, p).ok()?;
                (!x.is_zero() && !v.is_zero()).then_some(Case { x, v, mask, r })
            })
    }

    type Op = fn(&Case, &LpVector) -> Result<DerivativeResult>;

    const OPS: [(&str, Op); 5] = [
        ("d_gpi_ball", |c, v| d_gpi_ball(&c.x, v, c.r)),
        ("d_gpi_masked_ball", |c, v| d_gpi_masked_ball(&c.x, v, &c.mask, c.r)),
        ("d_mpi_masked_ball", |c, v| d_mpi_masked_ball(&c.x, v, &c.mask, c.r)),
        ("d_mpi_cylinder", |c, v| d_mpi_cylinder(&c.x, v, &c.mask, c.r)),
        ("d_mpi_subspace", |c, v| d_mpi_subspace(&c.x, v, &c.mask)),
    ];

    proptest! {
        #[test]
        fn homogeneous_in_the_direction(c in case_with(EXPONENTS.to_vec())) {
            for (name, op) in OPS {
                let Ok(base) = op(&c, &c.v) else { continue };
                for lam in [0.5, 2.0] {
                    let scaled = op(&c, &c.v.scale(lam)).unwrap();
                    let want = base.vector.scale(lam);
                    prop_assert!(
                        scaled.vector.max_abs_diff(&want) <= 1e-10 * want.max_abs().max(1.0),
                        "{name}"
                    );
                }
            }
        }

        #[test]
        fn identity_at_interior_points(c in case_with(EXPONENTS.to_vec())) {
            let x = c.x.scale(0.5 * c.r / c.x.norm());
            prop_assert_eq!(d_gpi_ball(&x, &c.v, c.r).unwrap().vector, c.v.clone());
            let (on, _) = x.split(&c.mask).unwrap();
            let (v_on, _) = c.v.split(&c.mask).unwrap();
            let inner = Case { x: on.clone(), v: v_on.clone(), mask: c.mask.clone(), r: c.r };
            if !v_on.is_zero() && !on.is_zero() {
                for op in [OPS[1].1, OPS[2].1] {
                    prop_assert_eq!(op(&inner, &v_on).unwrap().vector, v_on.clone());
                }
            }
            let cyl = Case { x, ..c };
            prop_assert_eq!(OPS[3].1(&cyl, &cyl.v).unwrap().vector, cyl.v.clone());
        }

        #[test]
        fn hilbert_derivatives_coincide(c in case_with(vec![2.0])) {
            let gen = d_gpi_masked_ball(&c.x, &c.v, &c.mask, c.r);
            let met = d_mpi_masked_ball(&c.x, &c.v, &c.mask, c.r);
            if let (Ok(a), Ok(b)) = (gen, met) {
                prop_assert!(a.vector.max_abs_diff(&b.vector) <= 1e-10);
            }
        }
    }
}
