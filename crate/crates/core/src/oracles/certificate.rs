use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OracleConfig;
use crate::error::{Error, Result};
use crate::lp::{pairing, LpVector};
use crate::sets::{ConvexSetSpec, Flavor, TOL_FEAS};

/// Pass threshold for the sampled variational inequality.
pub const TOL_CERT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// Smallest sampled value of `<g, y - z>`.
    pub min_margin: f64,
    pub worst_z: LpVector,
    pub passed: bool,
}

/// Samples feasible `z` and evaluates `<g, y - z>`, where `g = Jx - Jy`
/// (generalized) or `g = J(x - y)` (metric).
///
/// The pairing is affine in `z`, so the samples are biased toward where its
/// minimum lives: the exact support point of `g` on the ball part, the
/// vertices `±r e_i`, boundary points, and long steps along unconstrained
/// coordinates. Random interior points and `z = y` fill the rest.
pub fn vi_certificate(
    x: &LpVector,
    y: &LpVector,
    set: &ConvexSetSpec,
    flavor: Flavor,
    cfg: &OracleConfig,
) -> Result<CertificateReport> {
    let violation = set.violation(y)?;
    set.violation(x)?;
    if violation > TOL_FEAS {
        return Err(Error::InfeasibleCandidate(violation));
    }
    let g = match flavor {
        Flavor::Generalized => x.duality_map().sub(&y.duality_map())?,
        Flavor::Metric => x.sub(y)?.duality_map(),
    };
    let sampler = Sampler::new(y, &g, set);
    let mut best = (0.0, y.clone());
    let mut consider = |z: Vec<f64>| {
        let z = LpVector::from_raw(z, y.params());
        let m = pairing(&g, y) - pairing(&g, &z);
        if m < best.0 {
            best = (m, z);
        }
    };
    let fixed = sampler.deterministic();
    let extra = cfg.vi_samples.saturating_sub(fixed.len() + 1);
    for z in fixed {
        consider(z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for k in 0..extra {
        consider(sampler.random(&mut rng, k % 2 == 0));
    }
    let (min_margin, worst_z) = best;
    Ok(CertificateReport { min_margin, worst_z, passed: min_margin >= -TOL_CERT })
}

struct Sampler<'a> {
    y: &'a [f64],
    g: &'a [f64],
    p: f64,
    /// Coordinates constrained by the ball and its radius.
    ball: Option<(Vec<usize>, f64)>,
    /// Coordinates with no constraint.
    free: Vec<usize>,
    /// Coordinates fixed at zero.
    pinned: Vec<usize>,
    /// Typical size of the point.
    step: f64,
}

/// Steps along unconstrained coordinates reach this multiple of `step`; the
/// pairing is linear there, so longer steps only magnify a nonzero slope.
const FAR: f64 = 1e3;

impl<'a> Sampler<'a> {
    fn new(y: &'a LpVector, g: &'a LpVector, set: &ConvexSetSpec) -> Self {
        let n = y.dim();
        let mask = set.mask_or_full(n);
        let on = mask.indices();
        let off: Vec<usize> = (0..n).filter(|i| !mask.contains(*i)).collect();
        let (ball, free, pinned) = match set {
            ConvexSetSpec::FullBall { r } | ConvexSetSpec::MaskedBall { r, .. } => {
                (Some((on, *r)), vec![], off)
            }
            ConvexSetSpec::Cylinder { r, .. } => (Some((on, *r)), off, vec![]),
            ConvexSetSpec::Subspace { .. } => (None, on, off),
        };
        Self {
            y: y.coords(),
            g: g.coords(),
            p: y.p(),
            ball,
            free,
            pinned,
            step: y.max_abs().max(1.0),
        }
    }

    /// `y` with pinned coordinates zeroed and the ball part replaced.
    fn with_ball(&self, part: Option<&[f64]>) -> Vec<f64> {
        let mut z = self.y.to_vec();
        for &i in &self.pinned {
            z[i] = 0.0;
        }
        if let (Some(part), Some((idx, _))) = (part, &self.ball) {
            for (&i, &v) in idx.iter().zip(part) {
                z[i] = v;
            }
        }
        z
    }

    fn deterministic(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.y.to_vec()];
        if let Some((idx, r)) = &self.ball {
            let q = self.p / (self.p - 1.0);
            let gm: Vec<f64> = idx.iter().map(|&i| self.g[i]).collect();
            let gq = crate::lp::norm_with(&gm, q);
            if gq > 0.0 {
                let support: Vec<f64> = gm
                    .iter()
                    .map(|c| r * c.signum() * (c.abs() / gq).powf(q - 1.0))
                    .collect();
                out.push(self.with_ball(Some(&support)));
            }
            for k in 0..idx.len() {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; idx.len()];
                    e[k] = s * r;
                    out.push(self.with_ball(Some(&e)));
                }
            }
            out.push(self.with_ball(Some(&vec![0.0; idx.len()])));
        }
        let gf: f64 = self.free.iter().fold(0.0, |m, &i| m.max(self.g[i].abs()));
        for s in [1.0, -1.0, FAR, -FAR] {
            for &i in &self.free {
                let mut z = self.with_ball(None);
                z[i] += s * self.step;
                out.push(z);
            }
            if gf > 0.0 {
                let mut z = self.with_ball(None);
                for &i in &self.free {
                    z[i] += s * self.step * self.g[i] / gf;
                }
                out.push(z);
            }
        }
        out
    }

    fn random(&self, rng: &mut ChaCha8Rng, on_boundary: bool) -> Vec<f64> {
        let part = self.ball.as_ref().map(|(idx, r)| {
            let dir: Vec<f64> = idx.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let norm = crate::lp::norm_with(&dir, self.p);
            let radius = if on_boundary {
                *r
            } else {
                r * rng.gen::<f64>().powf(1.0 / idx.len() as f64)
            };
            if norm == 0.0 {
                dir
            } else {
                dir.iter().map(|c| c * radius / norm).collect()
            }
        });
        let mut z = self.with_ball(part.as_deref());
        for &i in &self.free {
            z[i] += rng.gen_range(-self.step..=self.step);
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::IndexMask;

    fn v(c: &[f64], p: f64) -> LpVector {
        LpVector::from_slice(c, p).unwrap()
    }

    #[test]
    fn hilbert_projection_passes() {
        let set = ConvexSetSpec::full_ball(1.0).unwrap();
        let rep = vi_certificate(
            &v(&[3.0, 4.0], 2.0),
            &v(&[0.6, 0.8], 2.0),
            &set,
            Flavor::Generalized,
            &Default::default(),
        )
        .unwrap();
        assert!(rep.passed);
        assert!(rep.min_margin >= -1e-15);
    }

    #[test]
    fn wrong_point_fails_with_hand_value() {
        let set = ConvexSetSpec::full_ball(1.0).unwrap();
        let x = v(&[3.0, 4.0], 2.0);
        let y = v(&[1.0, 0.0], 2.0);
        let rep = vi_certificate(&x, &y, &set, Flavor::Metric, &Default::default()).unwrap();
        assert!(!rep.passed);
        // at z = (0.6, 0.8): <(2, 4), (0.4, -0.8)> = -2.4; the support point does worse
        let z = v(&[0.6, 0.8], 2.0);
        let g = x.sub(&y).unwrap();
        assert!((pairing(&g, &y.sub(&z).unwrap()) + 2.4).abs() < 1e-15);
        assert!(rep.min_margin <= -2.4);
    }

    #[test]
    fn zero_margin_at_y() {
        // x inside: g = θ, every pairing is zero
        let set = ConvexSetSpec::full_ball(1.0).unwrap();
        let x = v(&[0.1, 0.2], 3.0);
        let rep = vi_certificate(&x, &x, &set, Flavor::Generalized, &Default::default()).unwrap();
        assert_eq!(rep.min_margin, 0.0);
        assert_eq!(rep.worst_z, x);
    }

    #[test]
    fn infeasible_candidate_rejected() {
        let set = ConvexSetSpec::full_ball(1.0).unwrap();
        let err = vi_certificate(
            &v(&[3.0, 4.0], 2.0),
            &v(&[3.0, 4.0], 2.0),
            &set,
            Flavor::Metric,
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleCandidate(_)));
    }

    #[test]
    fn free_directions_are_probed() {
        // Dropping the off-mask part is wrong for a cylinder.
        let m = IndexMask::new([0], 2).unwrap();
        let set = ConvexSetSpec::cylinder(m, 1.0).unwrap();
        let rep = vi_certificate(
            &v(&[2.0, 3.0], 3.0),
            &v(&[1.0, 0.0], 3.0),
            &set,
            Flavor::Metric,
            &Default::default(),
        )
        .unwrap();
        assert!(!rep.passed);
        let good = vi_certificate(
            &v(&[2.0, 3.0], 3.0),
            &v(&[1.0, 3.0], 3.0),
            &set,
            Flavor::Metric,
            &Default::default(),
        )
        .unwrap();
        assert!(good.passed, "{}", good.min_margin);
    }
}
