//! Brute-force projections by projected descent.
//!
//! Each start runs two phases. Spectral projected gradient (Barzilai-Borwein
//! steps, nonmonotone Armijo search, Euclidean projection onto the set)
//! brings the iterate close to the minimizer. A projected Newton polish with
//! the diagonal of the Hessian then finishes it; for `p > 2` the objectives
//! are nearly flat along coordinates where the solution is small, and plain
//! gradient steps stall there long before the point is accurate.
//!
//! Stationarity is the length of the scaled projected step
//! `‖P_D(y - D⁻¹∇f) - y‖_∞`, which estimates the distance to the minimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OracleConfig;
use crate::error::{Error, Result};
use crate::lp::{norm_with, LpParams, LpVector};
use crate::sets::{ConvexSetSpec, Flavor};

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const STEP_MIN: f64 = 1e-10;
const STEP_MAX: f64 = 1e10;
const COARSE: f64 = 1e-4;
const POLISH_ITERS: usize = 500;
const REFINE_ITERS: usize = 50;
/// On a curved boundary the diagonal Newton step cannot shrink below about
/// `sqrt(ε ‖∇f‖)`; a run that stalls there counts as converged up to this
/// multiple of the tolerance.
const STALL_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteOutcome {
    pub point: LpVector,
    /// Objective value, `V(x, y)` or `‖x - y‖_p^p`.
    pub objective: f64,
    /// Scaled projected-step length at the returned point.
    pub residual: f64,
    /// Iterations summed over all starts and both phases.
    pub iterations: usize,
}

/// `Π_C(x)` as the minimizer of `V(x, ·)` over the set.
pub fn brute_gpi(x: &LpVector, set: &ConvexSetSpec, cfg: &OracleConfig) -> Result<LpVector> {
    brute_project(x, set, Flavor::Generalized, cfg).map(|o| o.point)
}

/// `P_C(x)` as the minimizer of `‖x - ·‖_p^p` over the set.
pub fn brute_mpi(x: &LpVector, set: &ConvexSetSpec, cfg: &OracleConfig) -> Result<LpVector> {
    brute_project(x, set, Flavor::Metric, cfg).map(|o| o.point)
}

/// Multi-start minimization for either flavor, from `θ`, the radially
/// feasibilized `x` and one random point. The converged run with the lowest
/// objective wins.
pub fn brute_project(
    x: &LpVector,
    set: &ConvexSetSpec,
    flavor: Flavor,
    cfg: &OracleConfig,
) -> Result<BruteOutcome> {
    cfg.validate()?;
    set.violation(x)?;
    let problem = Problem::new(x, set, flavor);
    let n = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let spread = x.max_abs().max(1.0);
    let random: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..=spread)).collect();
    let starts = [vec![0.0; n], set.feasibilize(x)?.into_coords(), random];

    let tol = cfg.tol_opt * spread;
    let mut iterations = 0;
    let mut best: Option<Run> = None;
    let mut best_residual = f64::INFINITY;
    for start in starts {
        let coarse = problem.spg(start, (COARSE * spread).max(tol), cfg);
        let run = problem.refine_free(problem.polish(coarse, tol, cfg.max_iters.min(POLISH_ITERS)));
        iterations += run.iters;
        best_residual = best_residual.min(run.residual);
        if run.converged(tol) && best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let run = best.ok_or(Error::NoConvergence { iters: iterations, residual: best_residual })?;
    Ok(BruteOutcome {
        point: LpVector::from_raw(run.y, x.params()),
        objective: run.value,
        residual: run.residual,
        iterations,
    })
}

struct Run {
    y: Vec<f64>,
    value: f64,
    residual: f64,
    iters: usize,
    /// No descent step was left at rounding level.
    stalled: bool,
}

impl Run {
    fn converged(&self, tol: f64) -> bool {
        self.residual <= tol || self.stalled && self.residual <= STALL_FACTOR * tol
    }
}

struct Problem<'a> {
    x: &'a LpVector,
    jx: Vec<f64>,
    set: &'a ConvexSetSpec,
    flavor: Flavor,
    params: LpParams,
    /// Objective changes below this are rounding.
    noise: f64,
}

impl<'a> Problem<'a> {
    fn new(x: &'a LpVector, set: &'a ConvexSetSpec, flavor: Flavor) -> Self {
        // θ is feasible for every set, so f(θ) bounds the optimal value.
        let at_origin = match flavor {
            Flavor::Generalized => x.norm().powi(2),
            Flavor::Metric => x.norm_pow_p(),
        };
        Self {
            x,
            jx: x.duality_map().into_coords(),
            set,
            flavor,
            params: x.params(),
            noise: 1e-14 * at_origin.max(1.0),
        }
    }

    fn p(&self) -> f64 {
        self.params.p()
    }

    fn value_grad(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p();
        match self.flavor {
            Flavor::Generalized => {
                let ny = norm_with(y, p);
                let nx = norm_with(self.x.coords(), p);
                let value = nx * nx - 2.0 * dot(&self.jx, y) + ny * ny;
                let jy = LpVector::from_raw(y.to_vec(), self.params).duality_map();
                let grad = jy.coords().iter().zip(&self.jx).map(|(a, b)| 2.0 * (a - b)).collect();
                (value, grad)
            }
            Flavor::Metric => {
                let mut value = 0.0;
                let grad = self
                    .x
                    .coords()
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let u = a - b;
                        value += u.abs().powf(p);
                        -p * u.signum() * u.abs().powf(p - 1.0)
                    })
                    .collect();
                (value, grad)
            }
        }
    }

    /// Diagonal of the Hessian, floored so that every entry is positive.
    fn hessian_diag(&self, y: &[f64]) -> Vec<f64> {
        let p = self.p();
        let raw: Vec<f64> = match self.flavor {
            Flavor::Generalized => {
                let ny = norm_with(y, p);
                if ny == 0.0 {
                    vec![2.0; y.len()]
                } else {
                    y.iter()
                        .map(|c| {
                            let t = c.abs() / ny;
                            2.0 * ((p - 1.0) * t.powf(p - 2.0) + (2.0 - p) * t.powf(2.0 * p - 2.0))
                        })
                        .collect()
                }
            }
            Flavor::Metric => self
                .x
                .coords()
                .iter()
                .zip(y)
                .map(|(a, b)| p * (p - 1.0) * (a - b).abs().powf(p - 2.0))
                .collect(),
        };
        let top = raw.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        let floor = if top > 0.0 { 1e-16 * top } else { 1.0 };
        raw.into_iter().map(|d| if d.is_nan() { floor } else { d.max(floor) }).collect()
    }

    fn project(&self, y: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
        project_onto_set(y, self.set, self.p(), weights)
    }

    fn spg_residual(&self, y: &[f64], g: &[f64]) -> f64 {
        let trial: Vec<f64> = y.iter().zip(g).map(|(a, b)| a - b).collect();
        max_gap(&self.project(&trial, None), y)
    }

    fn spg(&self, start: Vec<f64>, tol: f64, cfg: &OracleConfig) -> Run {
        let mut y = self.project(&start, None);
        let (mut f, mut g) = self.value_grad(&y);
        let mut history = vec![f];
        let mut alpha = cfg.step_init;
        let mut iters = 0;
        while iters < cfg.max_iters {
            if self.spg_residual(&y, &g) <= tol {
                break;
            }
            let trial: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
            let d: Vec<f64> =
                self.project(&trial, None).iter().zip(&y).map(|(a, b)| a - b).collect();
            let gd = dot(&g, &d);
            if !(gd < 0.0) {
                if alpha == 1.0 {
                    break;
                }
                alpha = 1.0;
                continue;
            }
            let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let Some((lam, fn_, gn)) = self.line_search(&y, &d, f, f_ref, gd) else {
                break;
            };
            let s: Vec<f64> = d.iter().map(|c| lam * c).collect();
            let yn: Vec<f64> = y.iter().zip(&s).map(|(a, b)| a + b).collect();
            let dg: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &dg);
            alpha = if sy > 0.0 { (dot(&s, &s) / sy).clamp(STEP_MIN, STEP_MAX) } else { STEP_MAX };
            y = yn;
            f = fn_;
            g = gn;
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push(f);
            iters += 1;
        }
        Run { y, value: f, residual: f64::INFINITY, iters, stalled: false }
    }

    /// Projected Newton steps with the diagonal Hessian `D`: each step
    /// projects `y - D⁻¹∇f` onto the set in the norm weighted by `D`.
    fn polish(&self, run: Run, tol: f64, max_iters: usize) -> Run {
        let Run { mut y, iters: mut total, .. } = run;
        let (mut f, mut g) = self.value_grad(&y);
        let mut residual = f64::INFINITY;
        let mut stalled = false;
        for _ in 0..max_iters {
            let dg = self.hessian_diag(&y);
            let trial: Vec<f64> = y
                .iter()
                .zip(&g)
                .zip(&dg)
                .map(|((a, b), d)| if d.is_finite() { a - b / d } else { *a })
                .collect();
            let target = self.project(&trial, Some(&dg));
            let d: Vec<f64> = target.iter().zip(&y).map(|(a, b)| a - b).collect();
            residual = max_gap(&target, &y);
            total += 1;
            if residual <= 1e-3 * tol {
                break;
            }
            let gd = dot(&g, &d);
            if !(gd < 0.0) {
                stalled = true;
                break;
            }
            let Some((lam, fn_, gn)) = self.line_search(&y, &d, f, f, gd) else {
                stalled = true;
                break;
            };
            for (yi, di) in y.iter_mut().zip(&d) {
                *yi += lam * di;
            }
            f = fn_;
            g = gn;
        }
        Run { y, value: f, residual, iters: total, stalled }
    }

    /// Coordinates the set leaves unconstrained.
    fn free(&self) -> Vec<usize> {
        let n = self.x.dim();
        match self.set {
            ConvexSetSpec::Cylinder { mask, .. } => (0..n).filter(|i| !mask.contains(*i)).collect(),
            ConvexSetSpec::Subspace { mask } => mask.indices(),
            _ => vec![],
        }
    }

    /// Full Newton steps on the unconstrained coordinates of the generalized
    /// objective. There the Hessian block of `‖y‖²` is `2(D + c a aᵀ)` with
    /// `D_ii = (p-1)‖y‖^(2-p)|y_i|^(p-2)`, `c = (2-p)/‖y‖²` and `a = Jy`, so
    /// each step is a Sherman-Morrison solve.
    fn refine_free(&self, mut run: Run) -> Run {
        let free = self.free();
        if self.flavor != Flavor::Generalized || free.is_empty() {
            return run;
        }
        let p = self.p();
        let slope = |y: &[f64]| -> Vec<f64> {
            let jy = LpVector::from_raw(y.to_vec(), self.params).duality_map();
            free.iter().map(|&i| jy.coords()[i] - self.jx[i]).collect()
        };
        let size = |u: &[f64]| u.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut u = slope(&run.y);
        for _ in 0..REFINE_ITERS {
            let y = &run.y;
            let ny = norm_with(y, p);
            if ny == 0.0 || free.iter().any(|&i| y[i] == 0.0) || size(&u) == 0.0 {
                break;
            }
            let jy = LpVector::from_raw(y.clone(), self.params).duality_map();
            let d: Vec<f64> = free
                .iter()
                .map(|&i| (p - 1.0) * ny.powf(2.0 - p) * y[i].abs().powf(p - 2.0))
                .collect();
            let a: Vec<f64> = free.iter().map(|&i| jy.coords()[i]).collect();
            let c = (2.0 - p) / (ny * ny);
            let du: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a / b).collect();
            let da: Vec<f64> = a.iter().zip(&d).map(|(a, b)| a / b).collect();
            let k = c * dot(&a, &du) / (1.0 + c * dot(&a, &da));
            let step: Vec<f64> = du.iter().zip(&da).map(|(s, t)| -(s - k * t)).collect();
            let mut lam = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let mut trial = run.y.clone();
                for (&i, s) in free.iter().zip(&step) {
                    trial[i] += lam * s;
                }
                let un = slope(&trial);
                if size(&un) < size(&u) {
                    accepted = Some((trial, un));
                    break;
                }
                lam *= 0.5;
            }
            let Some((trial, un)) = accepted else { break };
            run.y = trial;
            u = un;
        }
        run.value = self.value_grad(&run.y).0;
        run
    }

    /// Backtracking along `y + λd` with quadratic interpolation.
    fn line_search(
        &self,
        y: &[f64],
        d: &[f64],
        f: f64,
        f_ref: f64,
        gd: f64,
    ) -> Option<(f64, f64, Vec<f64>)> {
        let scale = self.x.max_abs().max(1.0);
        let dmax = d.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut lam = if dmax > 1e3 * scale { 1e3 * scale / dmax } else { 1.0 };
        while lam > 1e-30 {
            let yn: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + lam * b).collect();
            let (fn_, gn) = self.value_grad(&yn);
            if fn_ <= f_ref + ARMIJO * lam * gd + self.noise {
                return Some((lam, fn_, gn));
            }
            let curvature = fn_ - f - lam * gd;
            let quad = -0.5 * lam * lam * gd / curvature;
            lam = if curvature > 0.0 && quad >= 0.1 * lam && quad <= 0.9 * lam {
                quad
            } else {
                0.5 * lam
            };
        }
        None
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Nearest point of `set` to `y` in the norm `Σ w_i (·)_i²` (Euclidean when
/// `weights` is `None`).
fn project_onto_set(y: &[f64], set: &ConvexSetSpec, p: f64, weights: Option<&[f64]>) -> Vec<f64> {
    match set {
        ConvexSetSpec::FullBall { r } => project_lp_ball(y, p, *r, weights),
        ConvexSetSpec::MaskedBall { mask, r } | ConvexSetSpec::Cylinder { mask, r } => {
            let keep_off = matches!(set, ConvexSetSpec::Cylinder { .. });
            let idx = mask.indices();
            let sub: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let w: Option<Vec<f64>> = weights.map(|w| idx.iter().map(|&i| w[i]).collect());
            let proj = project_lp_ball(&sub, p, *r, w.as_deref());
            let mut out = if keep_off { y.to_vec() } else { vec![0.0; y.len()] };
            for (&i, v) in idx.iter().zip(proj) {
                out[i] = v;
            }
            out
        }
        ConvexSetSpec::Subspace { mask } => y
            .iter()
            .enumerate()
            .map(|(i, &v)| if mask.contains(i) { v } else { 0.0 })
            .collect(),
    }
}

/// Weighted projection of `z` onto `{w : ‖w‖_p ≤ r}`.
///
/// The minimizer has `w_i = sign(z_i) r u_i` where `u_i ≥ 0` solves
/// `u + (μ/d_i) p u^{p-1} = |z_i|/r`, with the multiplier `μ ≥ 0` fixed by
/// `Σ u_i^p = 1`. Both equations are monotone and solved by safeguarded
/// Newton iteration.
fn project_lp_ball(z: &[f64], p: f64, r: f64, weights: Option<&[f64]>) -> Vec<f64> {
    let norm = norm_with(z, p);
    if norm <= r {
        return z.to_vec();
    }
    if p == 2.0 && weights.is_none() {
        return z.iter().map(|c| c * r / norm).collect();
    }
    let a: Vec<f64> = z.iter().map(|c| c.abs() / r).collect();
    let inv_w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|d| 1.0 / d).collect(),
        None => vec![1.0; z.len()],
    };
    let constraint = |mu: f64| -> (f64, f64, Vec<f64>) {
        let mut value = -1.0;
        let mut slope = 0.0;
        let u: Vec<f64> = a
            .iter()
            .zip(&inv_w)
            .map(|(&ai, &iw)| {
                let m = mu * iw;
                let ui = solve_component(ai, m, p);
                let up1 = ui.powf(p - 1.0);
                value += ui * up1;
                let du = -iw * p * up1 / (1.0 + m * p * (p - 1.0) * ui.powf(p - 2.0));
                if du.is_finite() {
                    slope += p * up1 * du;
                }
                ui
            })
            .collect();
        (value, slope, u)
    };

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while constraint(hi).0 > 0.0 && hi < 1e300 {
        lo = hi;
        hi *= 16.0;
    }
    let mut mu = 0.5 * (lo + hi);
    let mut u = Vec::new();
    for _ in 0..300 {
        let (value, slope, us) = constraint(mu);
        u = us;
        if value.abs() <= 1e-15 {
            break;
        }
        if value > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
        let newton = mu - value / slope;
        mu = if newton > lo && newton < hi {
            newton
        } else if lo > 0.0 && hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    let total: f64 = norm_with(&u, p);
    let shrink = if total > 1.0 { 1.0 / total } else { 1.0 };
    z.iter().zip(u).map(|(zi, ui)| zi.signum() * r * ui * shrink).collect()
}

/// Root `u ∈ [0, a]` of `u + μ p u^{p-1} = a`.
fn solve_component(a: f64, mu: f64, p: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if mu == 0.0 {
        return a;
    }
    let (mut lo, mut hi) = (0.0, a);
    let mut u = a / (1.0 + mu * p * a.powf(p - 2.0));
    for _ in 0..100 {
        let g = u + mu * p * u.powf(p - 1.0) - a;
        if g == 0.0 {
            return u;
        }
        if g > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let dg = 1.0 + mu * p * (p - 1.0) * u.powf(p - 2.0);
        let mut next = u - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-16 * a {
            return next;
        }
        u = next;
    }
    u
}
