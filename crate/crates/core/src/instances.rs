//! Seeded random problem instances at desk scale.
//!
//! Every point is built to land in a chosen region with relative margin at
//! least [`MARGIN`] from the region boundaries, so closed forms and
//! difference quotients are compared away from kinks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lp::{IndexMask, LpParams, LpVector};
use crate::sets::{condition_618, ConvexSetSpec, Parts};

pub const EXPONENTS: [f64; 5] = [1.5, 2.0, 2.5, 3.0, 4.0];
pub const INTEGER_EXPONENTS: [f64; 3] = [2.0, 3.0, 4.0];
pub const MAX_DIM: usize = 6;
pub const MARGIN: f64 = 1e-3;

const TRIES: usize = 10_000;

/// Position of a point relative to `B_M(r)`, `C_M(r)` and `l_p^M`, refined
/// by which branch of the generalized projection is active off the
/// subspace (`radial`: `λ‖x^M‖ > r`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    InBall,
    MaskedOutside,
    OffInside { radial: bool },
    OffOutside { radial: bool },
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::InBall,
        Region::MaskedOutside,
        Region::OffInside { radial: false },
        Region::OffInside { radial: true },
        Region::OffOutside { radial: true },
        Region::OffOutside { radial: false },
    ];

    /// Whether points of this region exist for exponent `p`.
    pub fn exists_for(self, p: f64) -> bool {
        match self {
            Region::OffInside { radial: true } => p < 2.0,
            Region::OffOutside { radial: false } => p > 2.0,
            _ => true,
        }
    }

    pub fn in_subspace(self) -> bool {
        matches!(self, Region::InBall | Region::MaskedOutside)
    }

    pub fn mask_part_inside(self) -> bool {
        matches!(self, Region::InBall | Region::OffInside { .. })
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::InBall => "in_ball",
            Region::MaskedOutside => "masked_outside",
            Region::OffInside { radial: false } => "cylinder_off_subspace",
            Region::OffInside { radial: true } => "cylinder_off_subspace_radial",
            Region::OffOutside { radial: true } => "outside_both_radial",
            Region::OffOutside { radial: false } => "outside_both_scaled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub x: LpVector,
    pub set: ConvexSetSpec,
    pub region: Region,
}

/// Random source for instances; identical seeds give identical streams.
#[derive(Debug, Clone)]
pub struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn exponent(&mut self) -> f64 {
        *EXPONENTS.choose(&mut self.rng).unwrap()
    }

    pub fn integer_exponent(&mut self) -> f64 {
        *INTEGER_EXPONENTS.choose(&mut self.rng).unwrap()
    }

    pub fn dim(&mut self) -> usize {
        self.rng.gen_range(2..=MAX_DIM)
    }

    pub fn radius(&mut self) -> f64 {
        self.rng.gen_range(0.5..2.0)
    }

    /// Nonempty proper subset of `{0, .., n-1}`.
    pub fn mask(&mut self, n: usize) -> IndexMask {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.rng);
        let k = self.rng.gen_range(1..n);
        IndexMask::new(idx[..k].iter().copied(), n).unwrap()
    }

    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.rng.gen_range(lo.ln()..hi.ln())).exp()
    }

    /// Entries of magnitude in `[0.2, 1]` with random signs on `idx`, zero
    /// elsewhere, scaled to unit `l_p` norm over `idx`.
    fn unit_on(&mut self, idx: &[usize], n: usize, p: f64) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for &i in idx {
            let s = if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
            c[i] = s * self.rng.gen_range(0.2..=1.0);
        }
        if idx.is_empty() {
            return c;
        }
        let norm = crate::lp::norm_with(&c, p);
        c.iter().map(|v| v / norm).collect()
    }

    /// A vector with entries bounded away from zero.
    pub fn vector(&mut self, n: usize, p: f64) -> LpVector {
        let idx: Vec<usize> = (0..n).collect();
        let scale = self.log_uniform(0.2, 5.0);
        let c = self.unit_on(&idx, n, p).iter().map(|v| v * scale).collect();
        LpVector::new(c, LpParams::new(p).unwrap()).unwrap()
    }

    /// A direction of unit `l_p` norm with entries bounded away from zero.
    pub fn direction(&mut self, n: usize, p: f64) -> LpVector {
        let idx: Vec<usize> = (0..n).collect();
        let c = self.unit_on(&idx, n, p);
        LpVector::new(c, LpParams::new(p).unwrap()).unwrap()
    }

    /// A unit direction supported on `idx`.
    pub fn direction_on(&mut self, idx: &[usize], n: usize, p: f64) -> LpVector {
        let c = self.unit_on(idx, n, p);
        LpVector::new(c, LpParams::new(p).unwrap()).unwrap()
    }

    /// `a u^M + b u^{N∖M}` with unit parts `u`.
    fn compose(&mut self, mask: &IndexMask, p: f64, a: f64, b: f64) -> LpVector {
        let n = mask.dim();
        let on = mask.indices();
        let off: Vec<usize> = (0..n).filter(|i| !mask.contains(*i)).collect();
        let u = self.unit_on(&on, n, p);
        let w = self.unit_on(&off, n, p);
        let c = u.iter().zip(&w).map(|(s, t)| a * s + b * t).collect();
        LpVector::new(c, LpParams::new(p).unwrap()).unwrap()
    }

    /// Norm of the mask part, inside or outside `r` with margin.
    fn mask_norm(&mut self, r: f64, inside: bool) -> f64 {
        if inside {
            r * self.rng.gen_range(0.05..1.0 - 2.0 * MARGIN)
        } else {
            r * self.rng.gen_range(1.0 + 2.0 * MARGIN..3.0)
        }
    }

    /// A point of `region` for `B_M(r)` in `l_p`.
    ///
    /// # Panics
    /// If the region is empty for this `p` (see [`Region::exists_for`]).
    pub fn point_in(&mut self, region: Region, mask: &IndexMask, r: f64, p: f64) -> LpVector {
        assert!(region.exists_for(p), "region {} is empty for p = {p}", region.name());
        let inside = region.mask_part_inside();
        if region.in_subspace() {
            let a = self.mask_norm(r, inside);
            return self.compose(mask, p, a, 0.0);
        }
        let want_radial = matches!(
            region,
            Region::OffInside { radial: true } | Region::OffOutside { radial: true }
        );
        for _ in 0..TRIES {
            let a = self.mask_norm(r, inside);
            let b = r * self.log_uniform(0.05, 20.0);
            let x = self.compose(mask, p, a, b);
            let parts = Parts::new(&x, mask).unwrap();
            let gap = parts.case_gap(r);
            if gap.abs() >= MARGIN * r && (gap > 0.0) == want_radial {
                return x;
            }
        }
        panic!("no point found in region {} for p = {p}", region.name());
    }

    /// Masked ball instance in a region that exists for the drawn `p`.
    pub fn masked_ball(&mut self, region: Region, exponents: &[f64]) -> Instance {
        let options: Vec<f64> = exponents.iter().copied().filter(|&p| region.exists_for(p)).collect();
        let p = *options.choose(&mut self.rng).expect("no exponent admits this region");
        let n = self.dim();
        let mask = self.mask(n);
        let r = self.radius();
        let x = self.point_in(region, &mask, r, p);
        Instance { x, set: ConvexSetSpec::masked_ball(mask, r).unwrap(), region }
    }

    /// Full ball instance, inside or outside with margin.
    pub fn full_ball(&mut self, inside: bool, p: f64) -> Instance {
        let n = self.dim();
        let r = self.radius();
        let a = self.mask_norm(r, inside);
        let full = IndexMask::full(n);
        let x = self.compose(&full, p, a, 0.0);
        let region = if inside { Region::InBall } else { Region::MaskedOutside };
        Instance { x, set: ConvexSetSpec::full_ball(r).unwrap(), region }
    }

    /// Cylinder instance with a nonzero off-mask part.
    pub fn cylinder(&mut self, inside: bool, p: f64) -> Instance {
        let n = self.dim();
        let mask = self.mask(n);
        let r = self.radius();
        let a = self.mask_norm(r, inside);
        let b = r * self.log_uniform(0.05, 20.0);
        let x = self.compose(&mask, p, a, b);
        let region = if inside {
            Region::OffInside { radial: false }
        } else {
            Region::OffOutside { radial: true }
        };
        Instance { x, set: ConvexSetSpec::cylinder(mask, r).unwrap(), region }
    }

    /// `l_3` point outside `C_M(1)` on the requested side of the sufficient
    /// condition for the closed form.
    pub fn l3_cylinder(&mut self, condition_holds: bool) -> Instance {
        for _ in 0..TRIES {
            let n = self.dim();
            let mask = self.mask(n);
            let a = self.mask_norm(1.0, false);
            let b = self.log_uniform(0.05, 20.0);
            let x = self.compose(&mask, 3.0, a, b);
            if condition_618(&x, &mask).unwrap() == condition_holds {
                let set = ConvexSetSpec::cylinder(mask, 1.0).unwrap();
                return Instance { x, set, region: Region::OffOutside { radial: true } };
            }
        }
        panic!("no l_3 cylinder instance found");
    }

    /// Subspace instance, on or off the subspace.
    pub fn subspace(&mut self, on: bool, p: f64) -> Instance {
        let n = self.dim();
        let mask = self.mask(n);
        let a = self.log_uniform(0.1, 5.0);
        let b = if on { 0.0 } else { self.log_uniform(0.05, 5.0) };
        let x = self.compose(&mask, p, a, b);
        let region = if on { Region::InBall } else { Region::OffInside { radial: false } };
        Instance { x, set: ConvexSetSpec::subspace(mask), region }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{classify_region, RegionTag};

    #[test]
    fn regions_are_hit_with_margin() {
        let mut g = Generator::new(3);
        for region in Region::ALL {
            for _ in 0..50 {
                let inst = g.masked_ball(region, &EXPONENTS);
                let mask = inst.set.mask().unwrap();
                let r = inst.set.radius().unwrap();
                let label = classify_region(&inst.x, mask, r).unwrap();
                let tag = match region {
                    Region::InBall => RegionTag::InBall,
                    Region::MaskedOutside => RegionTag::MaskedOutside,
                    Region::OffInside { .. } => RegionTag::CylinderOffSubspace,
                    Region::OffOutside { .. } => RegionTag::OutsideBoth,
                };
                assert_eq!(label.tag, tag);
                let parts = Parts::new(&inst.x, mask).unwrap();
                assert!((parts.on_norm - r).abs() >= MARGIN * r);
                if !region.in_subspace() {
                    assert!(parts.case_gap(r).abs() >= MARGIN * r);
                }
            }
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = Generator::new(9).masked_ball(Region::InBall, &EXPONENTS);
        let b = Generator::new(9).masked_ball(Region::InBall, &EXPONENTS);
        assert_eq!(a.x, b.x);
        assert_eq!(a.set, b.set);
    }

    #[test]
    fn l3_condition_sides() {
        let mut g = Generator::new(5);
        for holds in [true, false] {
            let inst = g.l3_cylinder(holds);
            assert_eq!(condition_618(&inst.x, inst.set.mask().unwrap()).unwrap(), holds);
        }
    }
}
