//! Finite truncations of `l_p`: vectors, coordinate masks, the normalized
//! duality mapping `J`, the Lyapunov functional `V` and the smoothness
//! function `Ψ`.
//!
//! A vector of length `n` stands for a sequence whose coordinates past `n`
//! are zero. Every formula here is coordinatewise, so nothing is lost by the
//! truncation.
//!
//! Elements of the dual space `l_q` are represented by the same
//! [`LpVector`] type; the pairing `<f, x>` is the plain coordinate sum
//! `Σ f_i x_i` (see [`pairing`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for every comparison against a region or case
/// boundary.
pub const TOL_REGION: f64 = 1e-12;

/// Exponent `p` together with its conjugate `q = p / (p - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpParams {
    p: f64,
    q: f64,
}

impl LpParams {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self { p, q: p / (p - 1.0) })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// The dual exponent pair `(q, p)`.
    pub fn conjugate(&self) -> Self {
        Self { p: self.q, q: self.p }
    }

    /// True when `p` is an integer (to within rounding).
    pub fn is_integer(&self) -> bool {
        (self.p - self.p.round()).abs() <= 1e-12 * self.p
    }

    pub fn is_hilbert(&self) -> bool {
        (self.p - 2.0).abs() <= 1e-15
    }
}

/// A coordinate array with its exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct LpVector {
    coords: Vec<f64>,
    params: LpParams,
}

impl LpVector {
    pub fn new(coords: Vec<f64>, params: LpParams) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let v = Self { coords, params };
        if !v.norm().is_finite() {
            return Err(Error::NonFinite(0));
        }
        Ok(v)
    }

    /// Convenience constructor taking the raw exponent.
    pub fn from_slice(coords: &[f64], p: f64) -> Result<Self> {
        Self::new(coords.to_vec(), LpParams::new(p)?)
    }

    /// The zero vector `θ` of dimension `n`.
    pub fn zeros(n: usize, params: LpParams) -> Self {
        Self { coords: vec![0.0; n.max(1)], params }
    }

    /// Builds a vector without validation; callers guarantee finiteness.
    pub(crate) fn from_raw(coords: Vec<f64>, params: LpParams) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()), "{coords:?}");
        Self { coords, params }
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    #[inline]
    pub fn params(&self) -> LpParams {
        self.params
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.params.p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    /// `‖x‖_p = (Σ |x_i|^p)^{1/p}`, evaluated with scaling by the largest
    /// magnitude so large or tiny entries do not overflow.
    pub fn norm(&self) -> f64 {
        norm_with(&self.coords, self.params.p)
    }

    /// `Σ |x_i|^p`.
    pub fn norm_pow_p(&self) -> f64 {
        let p = self.params.p;
        self.coords.iter().map(|c| c.abs().powf(p)).sum()
    }

    /// Normalized duality mapping
    /// `(Jx)_i = |x_i|^{p-1} sign(x_i) / ‖x‖^{p-2}`, with `J(θ) = θ`.
    ///
    /// The result is an element of `l_q`, stored as a coordinate array with
    /// the conjugate exponent.
    pub fn duality_map(&self) -> LpVector {
        let n = self.norm();
        let params = self.params.conjugate();
        if n == 0.0 {
            return LpVector::from_raw(vec![0.0; self.dim()], params);
        }
        let p = self.params.p;
        // |x_i|^{p-1} / ‖x‖^{p-2} = ‖x‖ (|x_i| / ‖x‖)^{p-1}; zero entries stay
        // zero because the exponent p - 1 is positive.
        let coords = self
            .coords
            .iter()
            .map(|&c| {
                if c == 0.0 {
                    0.0
                } else {
                    c.signum() * n * (c.abs() / n).powf(p - 1.0)
                }
            })
            .collect();
        LpVector::from_raw(coords, params)
    }

    /// Splits `x` into `(x^M, x^{N∖M})`.
    pub fn split(&self, mask: &IndexMask) -> Result<(LpVector, LpVector)> {
        mask.check_dim(self.dim())?;
        let mut on = vec![0.0; self.dim()];
        let mut off = vec![0.0; self.dim()];
        for (i, &c) in self.coords.iter().enumerate() {
            if mask.contains(i) {
                on[i] = c;
            } else {
                off[i] = c;
            }
        }
        Ok((
            LpVector::from_raw(on, self.params),
            LpVector::from_raw(off, self.params),
        ))
    }

    /// `x^M` alone.
    pub fn restrict(&self, mask: &IndexMask) -> Result<LpVector> {
        Ok(self.split(mask)?.0)
    }

    /// Scalar weights `(‖x^M‖^{p-2}/‖x‖^{p-2}, ‖x^{N∖M}‖^{p-2}/‖x‖^{p-2})`
    /// for which `J(x) = w_M J(x^M) + w_off J(x^{N∖M})`.
    ///
    /// A part equal to `θ` contributes nothing to the sum. Its weight is
    /// `0^{p-2}` when that is finite and `0` when `p < 2`.
    pub fn decompose_duality(&self, mask: &IndexMask) -> Result<(f64, f64)> {
        let (on, off) = self.split(mask)?;
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let e = self.params.p - 2.0;
        let weight = |part: f64| {
            if part == 0.0 && e < 0.0 {
                0.0
            } else {
                (part / n).powf(e)
            }
        };
        Ok((weight(on.norm()), weight(off.norm())))
    }

    pub fn scale(&self, a: f64) -> LpVector {
        LpVector::from_raw(self.coords.iter().map(|c| a * c).collect(), self.params)
    }

    pub fn add(&self, other: &LpVector) -> Result<LpVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LpVector) -> Result<LpVector> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &LpVector) -> Result<LpVector> {
        self.zip_with(other, |x, y| x + a * y)
    }

    fn zip_with(&self, other: &LpVector, f: impl Fn(f64, f64) -> f64) -> Result<LpVector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(LpVector::from_raw(coords, self.params))
    }

    /// Largest coordinate difference `max_i |x_i - y_i|`.
    pub fn max_abs_diff(&self, other: &LpVector) -> f64 {
        max_abs_diff(&self.coords, &other.coords)
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub(crate) fn norm_with(coords: &[f64], p: f64) -> f64 {
    let m = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = coords.iter().map(|c| (c.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// The subset `M` of coordinate indices, stored as a membership table for a
/// fixed dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMask {
    members: Vec<bool>,
}

impl IndexMask {
    pub fn new<I: IntoIterator<Item = usize>>(indices: I, dim: usize) -> Result<Self> {
        let mut members = vec![false; dim];
        for i in indices {
            if i >= dim {
                return Err(Error::InvalidMask(format!(
                    "index {i} out of range for dimension {dim}"
                )));
            }
            members[i] = true;
        }
        if !members.iter().any(|&m| m) {
            return Err(Error::InvalidMask("mask must be nonempty".into()));
        }
        Ok(Self { members })
    }

    /// `M = {0, .., n-1}`, which turns `l_p^M` into the whole space.
    pub fn full(dim: usize) -> Self {
        Self { members: vec![true; dim.max(1)] }
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.members.get(i).copied().unwrap_or(false)
    }

    pub fn dim(&self) -> usize {
        self.members.len()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.members[i]).collect()
    }

    pub fn is_full(&self) -> bool {
        self.members.iter().all(|&m| m)
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::InvalidMask(format!(
                "mask built for dimension {} applied to dimension {n}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Canonical pairing `<f, x> = Σ f_i x_i` between `l_q` and `l_p`.
pub fn pairing(f: &LpVector, x: &LpVector) -> f64 {
    debug_assert_eq!(f.dim(), x.dim());
    f.coords.iter().zip(&x.coords).map(|(a, b)| a * b).sum()
}

/// Lyapunov functional `V(x, y) = ‖x‖² - 2<Jx, y> + ‖y‖²`.
pub fn lyapunov(x: &LpVector, y: &LpVector) -> f64 {
    let nx = x.norm();
    let ny = y.norm();
    nx * nx - 2.0 * pairing(&x.duality_map(), y) + ny * ny
}

/// Smoothness function `Ψ(x, v)`: the right derivative of `t ↦ ‖x + tv‖`
/// at `t = 0`.
///
/// For `x ≠ θ` the norm is Gâteaux differentiable and
/// `Ψ(x, v) = <Jx, v> / ‖x‖`; for `x = θ` it is `‖v‖`. `Ψ(x, θ) = 0`.
pub fn psi(x: &LpVector, v: &LpVector) -> f64 {
    let nx = x.norm();
    if nx == 0.0 {
        return v.norm();
    }
    pairing(&x.duality_map(), v) / nx
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::instances::EXPONENTS;
    use proptest::prelude::*;

    fn exponent() -> impl Strategy<Value = f64> {
        prop::sample::select(EXPONENTS.to_vec())
    }

    /// Coordinates with magnitude in `[min, 5)` and random sign.
    fn coords(n: usize, min: f64) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            (min..5.0f64, any::<bool>()).prop_map(|(a, s)| if s { a } else { -a }),
            n,
        )
    }

    fn point(min: f64) -> impl Strategy<Value = (f64, Vec<f64>)> {
        (exponent(), 1..=6usize).prop_flat_map(move |(p, n)| (Just(p), coords(n, min)))
    }

    fn pair(min: f64) -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>)> {
        (exponent(), 1..=6usize)
            .prop_flat_map(move |(p, n)| (Just(p), coords(n, min), coords(n, 0.0)))
    }

    proptest! {
        #[test]
        fn pairing_identity((p, c) in point(0.0)) {
            let x = LpVector::from_slice(&c, p).unwrap();
            prop_assume!(!x.is_zero());
            let n = x.norm();
            let jx = x.duality_map();
            prop_assert!((pairing(&jx, &x) - n * n).abs() <= 1e-10 * n * n);
            prop_assert!((jx.norm() - n).abs() <= 1e-10 * n);
        }

        #[test]
        fn duality_map_is_positively_homogeneous((p, c) in point(0.0)) {
            let x = LpVector::from_slice(&c, p).unwrap();
            for lam in [0.5, 2.0, 10.0] {
                let lhs = x.scale(lam).duality_map();
                let rhs = x.duality_map().scale(lam);
                prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-10 * lam * x.norm().max(1e-300));
            }
        }

        #[test]
        fn decomposition_reconstructs((p, c) in point(0.0), bits in any::<u8>()) {
            let x = LpVector::from_slice(&c, p).unwrap();
            prop_assume!(!x.is_zero());
            let mask = IndexMask::new((0..x.dim()).filter(|i| bits >> i & 1 == 1), x.dim());
            prop_assume!(mask.is_ok());
            let mask = mask.unwrap();
            let (on, off) = x.split(&mask).unwrap();
            let (wm, wo) = x.decompose_duality(&mask).unwrap();
            let rebuilt = on.duality_map().scale(wm).add(&off.duality_map().scale(wo)).unwrap();
            prop_assert!(rebuilt.max_abs_diff(&x.duality_map()) <= 1e-10 * x.norm().max(1.0));
            let total = x.norm_pow_p();
            prop_assert!((on.norm_pow_p() + off.norm_pow_p() - total).abs() <= 1e-12 * total);
        }

        #[test]
        fn lyapunov_lower_bound((p, a, b) in pair(0.0)) {
            let x = LpVector::from_slice(&a, p).unwrap();
            let y = LpVector::from_slice(&b, p).unwrap();
            let gap = x.norm() - y.norm();
            prop_assert!(lyapunov(&x, &y) >= gap * gap - 1e-12 * (x.norm() + y.norm()).powi(2).max(1.0));
        }

        #[test]
        fn psi_bounds_the_difference_quotient((p, a, b) in pair(0.05)) {
            let x = LpVector::from_slice(&a, p).unwrap();
            let v = LpVector::from_slice(&b, p).unwrap();
            prop_assume!(!v.is_zero());
            let v = v.scale(1.0 / v.norm());
            let t = 1e-6;
            let q = (x.axpy(t, &v).unwrap().norm() - x.norm()) / t;
            let s = psi(&x, &v);
            prop_assert!(q >= s - 1e-9, "q {q} psi {s}");
            prop_assert!((q - s).abs() <= 1e-5, "q {q} psi {s}");
        }

        #[test]
        fn psi_scaling_law((p, a, b) in pair(0.0)) {
            let x = LpVector::from_slice(&a, p).unwrap();
            let v = LpVector::from_slice(&b, p).unwrap();
            prop_assume!(!x.is_zero() && !v.is_zero());
            let unit = psi(&x.scale(1.0 / x.norm()), &v.scale(1.0 / v.norm()));
            prop_assert!((psi(&x, &v) - v.norm() * unit).abs() <= 1e-10 * v.norm().max(1.0));
        }
    }
}
