//! Convex sets, the region classifier, and the closed-form projections.
//!
//! Sets handled here, for a radius `r > 0` and a nonempty mask `M`:
//!
//! * `B(r)`: the full ball,
//! * `B_M(r)`: the ball of radius `r` inside the coordinate subspace `l_p^M`,
//! * `C_M(r)`: the cylinder `{x : x^M ∈ B_M(r)}`,
//! * `l_p^M`: the coordinate subspace itself.
//!
//! `Π` denotes the generalized metric projection (minimizer of the Lyapunov
//! functional `V(x, ·)` over the set) and `P` the standard metric projection
//! (nearest point in norm).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{IndexMask, LpVector, TOL_REGION};

/// Relative feasibility tolerance for projection results.
pub const TOL_FEAS: f64 = 1e-10;

/// Which projection: `Π` (generalized) or `P` (metric).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Generalized,
    Metric,
}

/// A closed convex set with its defining data.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSetSpec {
    FullBall { r: f64 },
    MaskedBall { mask: IndexMask, r: f64 },
    Cylinder { mask: IndexMask, r: f64 },
    Subspace { mask: IndexMask },
}

fn check_radius(r: f64) -> Result<f64> {
    if r.is_finite() && r > 0.0 {
        Ok(r)
    } else {
        Err(Error::InvalidRadius(r))
    }
}

impl ConvexSetSpec {
    pub fn full_ball(r: f64) -> Result<Self> {
        Ok(Self::FullBall { r: check_radius(r)? })
    }

    pub fn masked_ball(mask: IndexMask, r: f64) -> Result<Self> {
        Ok(Self::MaskedBall { mask, r: check_radius(r)? })
    }

    pub fn cylinder(mask: IndexMask, r: f64) -> Result<Self> {
        Ok(Self::Cylinder { mask, r: check_radius(r)? })
    }

    pub fn subspace(mask: IndexMask) -> Self {
        Self::Subspace { mask }
    }

    pub fn radius(&self) -> Option<f64> {
        match self {
            Self::FullBall { r } | Self::MaskedBall { r, .. } | Self::Cylinder { r, .. } => {
                Some(*r)
            }
            Self::Subspace { .. } => None,
        }
    }

    pub fn mask(&self) -> Option<&IndexMask> {
        match self {
            Self::FullBall { .. } => None,
            Self::MaskedBall { mask, .. }
            | Self::Cylinder { mask, .. }
            | Self::Subspace { mask } => Some(mask),
        }
    }

    /// The mask, with the full index set standing in for `B(r)`.
    pub fn mask_or_full(&self, dim: usize) -> IndexMask {
        self.mask().cloned().unwrap_or_else(|| IndexMask::full(dim))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::FullBall { .. } => "full_ball",
            Self::MaskedBall { .. } => "masked_ball",
            Self::Cylinder { .. } => "cylinder",
            Self::Subspace { .. } => "subspace",
        }
    }

    /// Whether the mask part of the set is bounded by a radius.
    fn bounds_mask_part(&self) -> bool {
        !matches!(self, Self::Subspace { .. })
    }

    /// Whether coordinates off the mask are pinned to zero.
    fn pins_off_mask(&self) -> bool {
        matches!(self, Self::MaskedBall { .. } | Self::Subspace { .. })
    }

    /// Largest constraint violation of `y`, relative to the set's scale;
    /// zero when `y` is in the set.
    pub fn violation(&self, y: &LpVector) -> Result<f64> {
        let mask = self.mask_or_full(y.dim());
        let (on, off) = y.split(&mask)?;
        let mut worst = 0.0f64;
        if let Some(r) = self.radius() {
            worst = worst.max((on.norm() - r) / r);
        }
        if self.pins_off_mask() {
            worst = worst.max(off.max_abs() / y.norm().max(1.0));
        }
        Ok(worst.max(0.0))
    }

    pub fn contains(&self, y: &LpVector) -> Result<bool> {
        Ok(self.violation(y)? <= TOL_FEAS)
    }

    /// Map `y` into the set by radial scaling of the mask part and, where the
    /// set requires it, zeroing the coordinates off the mask.
    pub fn feasibilize(&self, y: &LpVector) -> Result<LpVector> {
        let mask = self.mask_or_full(y.dim());
        let (on, off) = y.split(&mask)?;
        let on = match self.radius() {
            Some(r) if self.bounds_mask_part() && on.norm() > r => on.scale(r / on.norm()),
            _ => on,
        };
        if self.pins_off_mask() {
            Ok(on)
        } else {
            on.add(&off)
        }
    }
}

/// The four cases into which a point falls relative to `B_M(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    /// `x ∈ B_M(r)`.
    InBall,
    /// `x ∈ l_p^M ∖ B_M(r)`.
    MaskedOutside,
    /// `x ∈ C_M(r) ∖ l_p^M`.
    CylinderOffSubspace,
    /// `x ∈ l_p ∖ (C_M(r) ∪ l_p^M)`.
    OutsideBoth,
}

/// Defining inequalities that were within `TOL_REGION` of equality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFlags {
    /// `‖x^M‖ = r`.
    pub on_radius: bool,
    /// `x^{N∖M}` is nonzero but negligible against `‖x‖`.
    pub near_subspace: bool,
    /// The case test `‖x^M‖^{p-2}/‖x‖^{p-2} = r/‖x^M‖` off the subspace.
    pub case_tie: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionLabel {
    pub tag: RegionTag,
    pub boundary: BoundaryFlags,
}

/// Where `x` sits relative to `B_M(r)`, `C_M(r)` and `l_p^M`.
///
/// Comparisons use `TOL_REGION` relative to the quantities compared, and ties
/// resolve toward the closed set: a point with `‖x^M‖ = r` counts as inside.
pub fn classify_region(x: &LpVector, mask: &IndexMask, r: f64) -> Result<RegionLabel> {
    check_radius(r)?;
    let parts = Parts::new(x, mask)?;
    let mut boundary = BoundaryFlags {
        on_radius: (parts.on_norm - r).abs() <= TOL_REGION * r,
        ..Default::default()
    };
    let inside = parts.on_norm <= r * (1.0 + TOL_REGION);
    let tag = if parts.in_subspace() {
        boundary.near_subspace = parts.off_norm > 0.0;
        if inside {
            RegionTag::InBall
        } else {
            RegionTag::MaskedOutside
        }
    } else {
        boundary.case_tie = parts.case_gap(r).abs() <= TOL_REGION * r;
        if inside {
            RegionTag::CylinderOffSubspace
        } else {
            RegionTag::OutsideBoth
        }
    };
    Ok(RegionLabel { tag, boundary })
}

/// Cached decomposition `x = x^M + x^{N∖M}` with the norms that every
/// formula needs.
#[derive(Debug, Clone)]
pub(crate) struct Parts {
    pub on: LpVector,
    pub off: LpVector,
    pub norm: f64,
    pub on_norm: f64,
    pub off_norm: f64,
}

impl Parts {
    pub fn new(x: &LpVector, mask: &IndexMask) -> Result<Self> {
        let (on, off) = x.split(mask)?;
        Ok(Self {
            norm: x.norm(),
            on_norm: on.norm(),
            off_norm: off.norm(),
            on,
            off,
        })
    }

    pub fn in_subspace(&self) -> bool {
        self.off_norm <= TOL_REGION * self.norm
    }

    /// `λ = (‖x^M‖ / ‖x‖)^{p-2}`, the weight of `J(x^M)` in `J(x)`.
    pub fn scaling(&self) -> f64 {
        if self.on_norm == 0.0 {
            return 0.0;
        }
        (self.on_norm / self.norm).powf(self.on.p() - 2.0)
    }

    /// `λ‖x^M‖ - r`: positive exactly when `λ > r/‖x^M‖`.
    pub fn case_gap(&self, r: f64) -> f64 {
        self.scaling() * self.on_norm - r
    }
}

/// How a projection was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    OracleFallback,
}

/// Short summary of a variational-inequality check on a projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub min_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: LpVector,
    pub region: RegionLabel,
    pub method: Method,
    pub certificate: Option<CertificateSummary>,
}

impl ProjectionResult {
    fn closed(point: LpVector, region: RegionLabel) -> Self {
        Self { point, region, method: Method::ClosedForm, certificate: None }
    }
}

fn full_ball_region(x: &LpVector, r: f64) -> Result<RegionLabel> {
    classify_region(x, &IndexMask::full(x.dim()), r)
}

/// `Π_{B(r)}`: identity inside the ball, radial scaling `r x / ‖x‖` outside.
/// Coincides with `P_{B(r)}` for every `p`.
pub fn gpi_ball(x: &LpVector, r: f64) -> Result<ProjectionResult> {
    let region = full_ball_region(x, r)?;
    let point = match region.tag {
        RegionTag::InBall => x.clone(),
        _ => x.scale(r / x.norm()),
    };
    Ok(ProjectionResult::closed(point, region))
}

/// `Π_{B_M(r)}`.
///
/// * in `B_M(r)`: `x`;
/// * in `l_p^M` outside the ball: `r x / ‖x‖`;
/// * off `l_p^M`: with `λ = ‖x^M‖^{p-2}/‖x‖^{p-2}`, the point `λ x^M` when
///   `λ‖x^M‖ ≤ r`, else `r x^M / ‖x^M‖`.
///
/// Off the subspace and inside the cylinder the case test always picks
/// `λ x^M` when `p ≥ 2`; for `p < 2` the weight exceeds one and the radial
/// branch can apply there as well.
pub fn gpi_masked_ball(x: &LpVector, mask: &IndexMask, r: f64) -> Result<ProjectionResult> {
    let region = classify_region(x, mask, r)?;
    let parts = Parts::new(x, mask)?;
    let point = match region.tag {
        RegionTag::InBall => parts.on.clone(),
        RegionTag::MaskedOutside => parts.on.scale(r / parts.on_norm),
        RegionTag::CylinderOffSubspace | RegionTag::OutsideBoth => {
            if parts.on_norm == 0.0 {
                parts.on.clone()
            } else {
                let scaled = parts.on.scale(parts.scaling());
                let radial = parts.on.scale(r / parts.on_norm);
                if region.boundary.case_tie {
                    debug_assert!(scaled.max_abs_diff(&radial) <= 1e-9 * r.max(1.0));
                }
                if parts.case_gap(r) <= TOL_REGION * r {
                    scaled
                } else {
                    radial
                }
            }
        }
    };
    Ok(ProjectionResult::closed(point, region))
}

/// `P_{B_M(r)}`: `x`, `r x/‖x‖`, `x^M` or `r x^M/‖x^M‖` by region.
pub fn mpi_masked_ball(x: &LpVector, mask: &IndexMask, r: f64) -> Result<ProjectionResult> {
    let region = classify_region(x, mask, r)?;
    let parts = Parts::new(x, mask)?;
    let point = match region.tag {
        RegionTag::InBall | RegionTag::CylinderOffSubspace => parts.on,
        RegionTag::MaskedOutside | RegionTag::OutsideBoth => {
            parts.on.scale(r / parts.on_norm)
        }
    };
    Ok(ProjectionResult::closed(point, region))
}

/// `P_{C_M(r)}`: `x` inside the cylinder, else `r x^M/‖x^M‖ + x^{N∖M}`.
pub fn mpi_cylinder(x: &LpVector, mask: &IndexMask, r: f64) -> Result<ProjectionResult> {
    let region = classify_region(x, mask, r)?;
    let point = if parts_inside(&region) {
        x.clone()
    } else {
        let parts = Parts::new(x, mask)?;
        parts.on.scale(r / parts.on_norm).add(&parts.off)?
    };
    Ok(ProjectionResult::closed(point, region))
}

fn parts_inside(region: &RegionLabel) -> bool {
    matches!(region.tag, RegionTag::InBall | RegionTag::CylinderOffSubspace)
}

fn require_l3(x: &LpVector) -> Result<()> {
    if (x.p() - 3.0).abs() > 1e-12 {
        return Err(Error::WrongExponent(x.p()));
    }
    Ok(())
}

/// The coefficient `b > 0` of the off-mask part in `Π_{C_M(1)}` for `p = 3`:
/// the positive root of `b⁶‖x‖³ - b³‖x^{N∖M}‖³ - 1 = 0`, which makes
/// `a = x^M/‖x^M‖ + b x^{N∖M}` satisfy `(Ja)^{N∖M} = (Jx)^{N∖M}`.
pub fn cylinder_aux_b(x: &LpVector, mask: &IndexMask) -> Result<f64> {
    require_l3(x)?;
    let parts = Parts::new(x, mask)?;
    if parts.on_norm <= 1.0 {
        return Err(Error::InvalidRegion(format!(
            "need ‖x^M‖ > 1, got {}",
            parts.on_norm
        )));
    }
    if parts.off_norm == 0.0 {
        return Err(Error::InvalidRegion("need x^{N∖M} ≠ θ".into()));
    }
    let s = parts.off_norm.powi(3);
    let total = parts.norm.powi(3);
    let b3 = (s + (s * s + 4.0 * total).sqrt()) / (2.0 * total);
    Ok(b3.cbrt())
}

/// `‖x‖ ≤ ((1+√5)/2)^{1/3} ‖x^{N∖M}‖²` in `l_3`: the sufficient condition
/// under which the closed form for `Π_{C_M(1)}` is established.
pub fn condition_618(x: &LpVector, mask: &IndexMask) -> Result<bool> {
    require_l3(x)?;
    let parts = Parts::new(x, mask)?;
    Ok(parts.norm <= condition_618_bound(parts.off_norm))
}

fn condition_618_bound(off_norm: f64) -> f64 {
    let golden = 0.5 * (1.0 + 5f64.sqrt());
    golden.cbrt() * off_norm * off_norm
}

/// `Π_{C_M(1)}` in `l_3`: `x` inside the cylinder, otherwise
/// `x^M/‖x^M‖ + b x^{N∖M}` with `b` from [`cylinder_aux_b`], provided
/// [`condition_618`] holds.
pub fn gpi_cylinder_l3(x: &LpVector, mask: &IndexMask) -> Result<ProjectionResult> {
    require_l3(x)?;
    let region = classify_region(x, mask, 1.0)?;
    if parts_inside(&region) {
        return Ok(ProjectionResult::closed(x.clone(), region));
    }
    let parts = Parts::new(x, mask)?;
    let bound = condition_618_bound(parts.off_norm);
    if parts.norm > bound {
        return Err(Error::ConditionViolated { norm: parts.norm, bound });
    }
    let b = cylinder_aux_b(x, mask)?;
    let point = parts.on.scale(1.0 / parts.on_norm).axpy(b, &parts.off)?;
    Ok(ProjectionResult::closed(point, region))
}

/// `Π_{l_p^M}(x) = (‖x^M‖/‖x‖)^{p-2} x^M`, and `θ` when `x^M = θ`.
///
/// The weight is the one that cancels the mask part of `Jx - Jy`, which
/// characterizes the projection onto a subspace.
pub fn gpi_subspace(x: &LpVector, mask: &IndexMask) -> Result<ProjectionResult> {
    let parts = Parts::new(x, mask)?;
    let tag = if parts.in_subspace() {
        RegionTag::InBall
    } else {
        RegionTag::CylinderOffSubspace
    };
    let region = RegionLabel { tag, boundary: BoundaryFlags::default() };
    let point = if tag == RegionTag::InBall {
        parts.on
    } else {
        parts.on.scale(parts.scaling())
    };
    Ok(ProjectionResult::closed(point, region))
}

/// `P_{l_p^M}(x) = x^M`.
pub fn mpi_subspace(x: &LpVector, mask: &IndexMask) -> Result<ProjectionResult> {
    let mut res = gpi_subspace(x, mask)?;
    res.point = x.restrict(mask)?;
    Ok(res)
}

/// Closed-form projection for any set and flavor, when one exists.
///
/// Returns [`Error::ConditionViolated`] or [`Error::WrongExponent`] for the
/// generalized projection onto a cylinder outside the `p = 3`, `r = 1`
/// setting; callers then use the brute-force oracle.
pub fn project_closed_form(
    x: &LpVector,
    set: &ConvexSetSpec,
    flavor: Flavor,
) -> Result<ProjectionResult> {
    match (set, flavor) {
        (ConvexSetSpec::FullBall { r }, _) => gpi_ball(x, *r),
        (ConvexSetSpec::MaskedBall { mask, r }, Flavor::Generalized) => {
            gpi_masked_ball(x, mask, *r)
        }
        (ConvexSetSpec::MaskedBall { mask, r }, Flavor::Metric) => mpi_masked_ball(x, mask, *r),
        (ConvexSetSpec::Cylinder { mask, r }, Flavor::Metric) => mpi_cylinder(x, mask, *r),
        (ConvexSetSpec::Cylinder { mask, r }, Flavor::Generalized) => {
            let region = classify_region(x, mask, *r)?;
            if parts_inside(&region) {
                return Ok(ProjectionResult::closed(x.clone(), region));
            }
            if (r - 1.0).abs() > TOL_REGION {
                return Err(Error::InvalidRegion(format!(
                    "closed form needs r = 1, got r = {r}"
                )));
            }
            gpi_cylinder_l3(x, mask)
        }
        (ConvexSetSpec::Subspace { mask }, Flavor::Generalized) => gpi_subspace(x, mask),
        (ConvexSetSpec::Subspace { mask }, Flavor::Metric) => mpi_subspace(x, mask),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64], p: f64) -> LpVector {
        LpVector::from_slice(c, p).unwrap()
    }

    fn m(idx: &[usize], n: usize) -> IndexMask {
        IndexMask::new(idx.iter().copied(), n).unwrap()
    }

    fn close(a: &LpVector, b: &[f64], tol: f64) {
        assert!(
            lp_max_diff(a.coords(), b) <= tol,
            "{:?} vs {:?}",
            a.coords(),
            b
        );
    }

    fn lp_max_diff(a: &[f64], b: &[f64]) -> f64 {
        crate::lp::max_abs_diff(a, b)
    }

    #[test]
    fn classify_examples() {
        let mk = m(&[0], 2);
        let tag = |c: &[f64]| classify_region(&v(c, 2.0), &mk, 1.0).unwrap().tag;
        assert_eq!(tag(&[0.5, 0.0]), RegionTag::InBall);
        assert_eq!(tag(&[2.0, 3.0]), RegionTag::OutsideBoth);
        assert_eq!(tag(&[0.5, 2.0]), RegionTag::CylinderOffSubspace);
        assert_eq!(tag(&[2.0, 0.0]), RegionTag::MaskedOutside);
        // ties resolve toward the closed set
        let label = classify_region(&v(&[1.0, 0.0], 2.0), &mk, 1.0).unwrap();
        assert_eq!(label.tag, RegionTag::InBall);
        assert!(label.boundary.on_radius);
        assert!(classify_region(&v(&[1.0, 0.0], 2.0), &mk, 0.0).is_err());
    }

    #[test]
    fn gpi_ball_examples() {
        let x = v(&[0.3, -0.4], 3.0);
        assert_eq!(gpi_ball(&x, 1.0).unwrap().point, x);
        close(&gpi_ball(&v(&[3.0, 4.0], 2.0), 1.0).unwrap().point, &[0.6, 0.8], 1e-15);
        close(
            &gpi_ball(&v(&[1.0, 2.0], 3.0), 1.0).unwrap().point,
            &[0.480749856769136, 0.961499713538272],
            1e-12,
        );
    }

    #[test]
    fn gpi_masked_ball_examples() {
        let mk = m(&[0], 2);
        let pi = |c: &[f64], p: f64| gpi_masked_ball(&v(c, p), &mk, 1.0).unwrap().point;
        close(&pi(&[0.5, 2.0], 2.0), &[0.5, 0.0], 1e-15);
        close(&pi(&[0.5, 2.0], 3.0), &[0.124355658659858, 0.0], 1e-12);
        close(&pi(&[2.0, 3.0], 3.0), &[1.0, 0.0], 1e-15);
        close(&pi(&[1.2, 10.0], 3.0), &[0.143917151423251, 0.0], 1e-12);
        // p < 2 off the subspace inside the cylinder: the weight exceeds one
        // and the result is clipped to the sphere.
        close(&pi(&[0.9, 5.0], 1.5), &[1.0, 0.0], 1e-15);
        // x^M = θ
        close(&pi(&[0.0, 5.0], 1.5), &[0.0, 0.0], 0.0);
        close(&pi(&[0.0, 5.0], 3.0), &[0.0, 0.0], 0.0);
    }

    #[test]
    fn mpi_masked_ball_examples() {
        let mk = m(&[0], 2);
        for p in [1.5, 2.0, 3.0, 4.0] {
            let pm = |c: &[f64]| mpi_masked_ball(&v(c, p), &mk, 1.0).unwrap().point;
            close(&pm(&[0.5, 2.0]), &[0.5, 0.0], 0.0);
            close(&pm(&[2.0, 3.0]), &[1.0, 0.0], 0.0);
        }
        let pm = mpi_masked_ball(&v(&[1.2, 10.0], 3.0), &mk, 1.0).unwrap().point;
        let pi = gpi_masked_ball(&v(&[1.2, 10.0], 3.0), &mk, 1.0).unwrap().point;
        close(&pm, &[1.0, 0.0], 1e-15);
        assert!(pm.max_abs_diff(&pi) > 0.85);
    }

    #[test]
    fn mpi_cylinder_examples() {
        for p in [1.5, 2.0, 3.0] {
            let x = v(&[0.5, 7.0], p);
            assert_eq!(mpi_cylinder(&x, &m(&[0], 2), 1.0).unwrap().point, x);
            let y = mpi_cylinder(&v(&[2.0, 3.0], p), &m(&[0], 2), 1.0).unwrap().point;
            close(&y, &[1.0, 3.0], 0.0);
        }
        let y = mpi_cylinder(&v(&[2.0, 2.0, 3.0], 2.0), &m(&[0, 1], 3), 1.0)
            .unwrap()
            .point;
        let h = 0.5f64.sqrt();
        close(&y, &[h, h, 3.0], 1e-15);
    }

    #[test]
    fn cylinder_aux_b_example() {
        let x = v(&[1.2, 2.0], 3.0);
        let mk = m(&[0], 2);
        let b = cylinder_aux_b(&x, &mk).unwrap();
        // (8 + √102.912) / 19.456
        assert!((b.powi(3) - 0.9325943251364263).abs() < 1e-13);
        assert!((b - 0.9770068068477136).abs() < 1e-13);
        assert!((b.powi(6) * 9.728 - b.powi(3) * 8.0 - 1.0).abs() < 1e-10);

        let a = v(&[1.0, 2.0 * b], 3.0);
        assert!((a.duality_map().coords()[1] - x.duality_map().coords()[1]).abs() < 1e-9);
    }

    #[test]
    fn cylinder_aux_b_errors() {
        let mk = m(&[0], 2);
        assert_eq!(
            cylinder_aux_b(&v(&[1.2, 2.0], 2.0), &mk),
            Err(Error::WrongExponent(2.0))
        );
        assert!(matches!(
            cylinder_aux_b(&v(&[0.5, 2.0], 3.0), &mk),
            Err(Error::InvalidRegion(_))
        ));
        assert!(matches!(
            cylinder_aux_b(&v(&[1.5, 0.0], 3.0), &mk),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn condition_618_examples() {
        let mk = m(&[0], 2);
        assert!(condition_618(&v(&[1.2, 2.0], 3.0), &mk).unwrap());
        assert!(!condition_618(&v(&[5.0, 0.1], 3.0), &mk).unwrap());
        assert!(!condition_618(&v(&[5.0, 0.0], 3.0), &mk).unwrap());
        assert!(condition_618(&v(&[5.0, 0.0], 2.0), &mk).is_err());
    }

    #[test]
    fn gpi_cylinder_l3_examples() {
        let mk = m(&[0], 2);
        let x = v(&[0.4, 9.0], 3.0);
        assert_eq!(gpi_cylinder_l3(&x, &mk).unwrap().point, x);
        let y = gpi_cylinder_l3(&v(&[1.2, 2.0], 3.0), &mk).unwrap().point;
        close(&y, &[1.0, 1.9540136136954271], 1e-13);
        assert!(matches!(
            gpi_cylinder_l3(&v(&[5.0, 0.1], 3.0), &mk),
            Err(Error::ConditionViolated { .. })
        ));
    }

    #[test]
    fn gpi_subspace_examples() {
        let mk = m(&[0], 2);
        let x = v(&[1.3, -0.7], 2.0);
        close(&gpi_subspace(&x, &mk).unwrap().point, &[1.3, 0.0], 0.0);
        let x = v(&[1.3, 0.0], 3.0);
        assert_eq!(gpi_subspace(&x, &mk).unwrap().point, x);
        let y = gpi_subspace(&v(&[1.0, 2.0], 3.0), &mk).unwrap().point;
        close(&y, &[0.480749856769136, 0.0], 1e-12);
        let jx = v(&[1.0, 2.0], 3.0).duality_map();
        assert!((jx.coords()[0] - y.duality_map().coords()[0]).abs() < 1e-12);
    }

    #[test]
    fn feasibilize_and_violation() {
        let set = ConvexSetSpec::cylinder(m(&[0], 2), 1.0).unwrap();
        let y = set.feasibilize(&v(&[3.0, 5.0], 2.0)).unwrap();
        close(&y, &[1.0, 5.0], 0.0);
        assert!(set.contains(&y).unwrap());
        let set = ConvexSetSpec::masked_ball(m(&[0], 2), 1.0).unwrap();
        assert!(!set.contains(&v(&[0.5, 0.1], 2.0)).unwrap());
        assert!(ConvexSetSpec::full_ball(-1.0).is_err());
    }
}
