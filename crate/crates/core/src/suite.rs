//! Seeded property checks over random instances.
//!
//! Each check runs a fixed number of instances, each drawn from its own
//! seed, and reports how many met the tolerance together with the worst
//! error seen. A failing instance can be replayed from the seed it reports.

use serde::{Deserialize, Serialize};

use crate::derivatives::{d_gpi_masked_ball, d_mpi_masked_ball};
use crate::error::{Error, Result};
use crate::instances::{Generator, Instance, Region, EXPONENTS};
use crate::lp::{lyapunov, pairing, psi, IndexMask, LpVector};
use crate::oracles::{brute_project, fd_derivative, vi_certificate, OracleConfig, TOL_CERT};
use crate::sets::{
    classify_region, cylinder_aux_b, gpi_masked_ball, gpi_subspace, project_closed_form,
    ConvexSetSpec, Flavor, Method, Parts, RegionTag,
};
use crate::solve::{self, derivative_closed_form};

/// Instances per check unless a check says otherwise.
pub const INSTANCES: usize = 200;

/// Size of the perturbations the certificate must reject.
pub const PERTURBATION: f64 = 1e-3;

const MAX_REPORTED: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: String,
    /// Seed that reproduces the instance.
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    /// Largest error seen; an instance passes when its error is at most
    /// `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    /// The first few failing instances.
    pub failures: Vec<Failure>,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.instances > 0 && self.passed == self.instances
    }
}

struct Tally(Check);

impl Tally {
    fn new(name: &str, tolerance: f64) -> Self {
        Tally(Check {
            name: name.to_string(),
            instances: 0,
            passed: 0,
            worst: f64::NEG_INFINITY,
            tolerance,
            failures: Vec::new(),
        })
    }

    fn measure(&mut self, seed: u64, err: f64, detail: String) {
        let c = &mut self.0;
        c.instances += 1;
        let err = if err.is_nan() { f64::INFINITY } else { err };
        c.worst = c.worst.max(err);
        if err <= c.tolerance {
            c.passed += 1;
        } else if c.failures.len() < MAX_REPORTED {
            c.failures.push(Failure {
                check: c.name.clone(),
                seed,
                detail: format!("error {err:e}: {detail}"),
            });
        }
    }

    fn run(&mut self, seed: u64, f: impl FnOnce() -> Result<(f64, String)>) {
        match f() {
            Ok((err, detail)) => self.measure(seed, err, detail),
            Err(e) => self.measure(seed, f64::INFINITY, format!("{} ({})", e, e.code())),
        }
    }

    fn finish(self) -> Check {
        self.0
    }
}

/// Seed of instance `k` of the check family `salt`.
pub fn instance_seed(seed: u64, salt: &str, k: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in salt.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ h ^ (k as u64).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

fn dist(a: &LpVector, b: &LpVector) -> f64 {
    a.max_abs_diff(b)
}

fn describe(inst: &Instance) -> String {
    format!(
        "{} p={} x={:?} region={}",
        inst.set.kind_name(),
        inst.x.p(),
        inst.x.coords(),
        inst.region.name()
    )
}

fn closed_point(x: &LpVector, set: &ConvexSetSpec, flavor: Flavor) -> Result<LpVector> {
    project_closed_form(x, set, flavor).map(|r| r.point)
}

/// An instance of set kind `kind` (0 full ball, 1 masked ball, 2 cylinder,
/// 3 subspace) that has a closed-form projection for `flavor`.
pub fn closed_form_instance(g: &mut Generator, kind: usize, flavor: Flavor, k: usize) -> Instance {
    match kind {
        0 => {
            let p = g.exponent();
            g.full_ball(k % 2 == 0, p)
        }
        1 => g.masked_ball(Region::ALL[k % Region::ALL.len()], &EXPONENTS),
        2 => {
            let p = g.exponent();
            match flavor {
                Flavor::Generalized if k % 3 != 0 => g.l3_cylinder(true),
                Flavor::Generalized => g.cylinder(true, p),
                Flavor::Metric => g.cylinder(k % 2 == 0, p),
            }
        }
        _ => {
            let p = g.exponent();
            g.subspace(k % 4 == 0, p)
        }
    }
}

/// Exponents for which the generalized masked-ball derivative has a closed
/// form throughout `region` for every direction.
pub fn closed_derivative_exponents(region: Region) -> &'static [f64] {
    match region {
        Region::InBall => &[1.5, 2.0, 3.0, 4.0],
        Region::OffInside { radial: false } => &[2.0, 3.0, 4.0],
        Region::OffInside { radial: true } => &[1.5],
        Region::OffOutside { radial: false } => &[3.0, 4.0],
        _ => &EXPONENTS,
    }
}

// ---------------------------------------------------------------------------
// Duality map, decomposition, smoothness function

/// `<Jx, x> = ‖x‖²` and `‖Jx‖_q = ‖x‖_p`, relative to `‖x‖²` and `‖x‖`.
pub fn duality_identities(seed: u64) -> Vec<Check> {
    let mut pair = Tally::new("duality pairing identity", 1e-10);
    let mut norm = Tally::new("duality norm identity", 1e-10);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "duality", k);
        let mut g = Generator::new(s);
        let p = g.exponent();
        let n = g.dim();
        let scale = 10f64.powf(rand::Rng::gen_range(g.rng(), -3.0..3.0));
        let x = g.vector(n, p).scale(scale);
        let nx = x.norm();
        let jx = x.duality_map();
        let d = format!("p={p} x={:?}", x.coords());
        pair.measure(s, (pairing(&jx, &x) - nx * nx).abs() / (nx * nx), d.clone());
        norm.measure(s, (jx.norm() - nx).abs() / nx, d);
    }
    vec![pair.finish(), norm.finish()]
}

/// `J` splits along a mask, and `‖·‖^p` is additive over the two parts.
pub fn decomposition(seed: u64) -> Vec<Check> {
    let mut recon = Tally::new("duality decomposition", 1e-10);
    let mut additive = Tally::new("norm power additivity", 1e-12);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "decomposition", k);
        let mut g = Generator::new(s);
        let p = g.exponent();
        let n = g.dim();
        let x = g.vector(n, p);
        let mask = g.mask(n);
        let d = format!("p={p} x={:?} mask={:?}", x.coords(), mask.indices());
        recon.run(s, || {
            let (on, off) = x.split(&mask)?;
            let (wm, wo) = x.decompose_duality(&mask)?;
            let rebuilt = on.duality_map().scale(wm).axpy(wo, &off.duality_map())?;
            Ok((dist(&rebuilt, &x.duality_map()), d.clone()))
        });
        additive.run(s, || {
            let (on, off) = x.split(&mask)?;
            let total = x.norm().powf(p);
            let sum = on.norm().powf(p) + off.norm().powf(p);
            Ok(((total - sum).abs() / total, d.clone()))
        });
    }
    vec![recon.finish(), additive.finish()]
}

/// Analytic `Ψ` against the one-sided quotient at `t = 1e-6`, and the
/// scaling law `Ψ(x, v) = ‖v‖ Ψ(x/‖x‖, v/‖v‖)` with `Ψ(x, x) = ‖x‖`.
pub fn psi_checks(seed: u64) -> Vec<Check> {
    let mut fd = Tally::new("psi matches difference quotient", 1e-5);
    let mut scaling = Tally::new("psi scaling law", 1e-10);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "psi", k);
        let mut g = Generator::new(s);
        let p = g.exponent();
        let n = g.dim();
        let x = g.vector(n, p);
        let v = g.direction(n, p);
        let d = format!("p={p} x={:?} v={:?}", x.coords(), v.coords());
        fd.run(s, || {
            let t = 1e-6;
            let q = (x.axpy(t, &v)?.norm() - x.norm()) / t;
            Ok(((q - psi(&x, &v)).abs(), d.clone()))
        });
        let (nx, nv) = (x.norm(), v.norm());
        let law = (psi(&x, &v) - nv * psi(&x.scale(1.0 / nx), &v.scale(1.0 / nv))).abs();
        let diag = (psi(&x, &x) - nx).abs();
        scaling.measure(s, law.max(diag), d);
    }
    vec![fd.finish(), scaling.finish()]
}

/// Further identities of `J`, `V` and `Ψ`.
pub fn duality_extras(seed: u64) -> Vec<Check> {
    let mut homog = Tally::new("duality positive homogeneity", 1e-10);
    let mut lower = Tally::new("lyapunov lower bound", 1e-12);
    let mut one_sided = Tally::new("psi below difference quotient", 1e-9);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "duality-extras", k);
        let mut g = Generator::new(s);
        let p = g.exponent();
        let n = g.dim();
        let x = g.vector(n, p);
        let y = g.vector(n, p);
        let d = format!("p={p} x={:?} y={:?}", x.coords(), y.coords());
        homog.run(s, || {
            let mut worst = 0.0f64;
            for lam in [0.5, 2.0, 10.0] {
                let diff = x.scale(lam).duality_map().sub(&x.duality_map().scale(lam))?;
                worst = worst.max(diff.norm() / (lam * x.norm()));
            }
            Ok((worst, d.clone()))
        });
        let gap = (x.norm() - y.norm()).powi(2) - lyapunov(&x, &y);
        lower.measure(s, gap, d.clone());
        one_sided.run(s, || {
            let t = 1e-6;
            let q = (x.axpy(t, &y)?.norm() - x.norm()) / t;
            Ok((psi(&x, &y) - q, d.clone()))
        });
    }
    vec![homog.finish(), lower.finish(), one_sided.finish()]
}

// ---------------------------------------------------------------------------
// Projections

/// Region tags agree with the defining inequalities, results are feasible,
/// feasible points are fixed, and the two generalized case formulas agree
/// on the case boundary.
pub fn projection_structure(seed: u64) -> Vec<Check> {
    let mut partition = Tally::new("region partition", 0.0);
    let mut feasible = Tally::new("projection feasibility", 0.0);
    let mut fixed = Tally::new("idempotence on the set", 1e-12);
    let mut tie = Tally::new("case formulas agree at the tie", 1e-9);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "structure", k);
        let mut g = Generator::new(s);
        let p = g.exponent();
        let n = g.dim();
        let mask = g.mask(n);
        let r = g.radius();
        let mut x = g.vector(n, p);
        if k % 3 == 0 {
            x = x.restrict(&mask).unwrap();
        }
        let d = format!("p={p} x={:?} mask={:?} r={r}", x.coords(), mask.indices());
        partition.run(s, || {
            let label = classify_region(&x, &mask, r)?;
            let (on, off) = x.split(&mask)?;
            let inside = on.norm() <= r;
            let expected = match (off.is_zero(), inside) {
                (true, true) => RegionTag::InBall,
                (true, false) => RegionTag::MaskedOutside,
                (false, true) => RegionTag::CylinderOffSubspace,
                (false, false) => RegionTag::OutsideBoth,
            };
            Ok((if label.tag == expected { 0.0 } else { 1.0 }, d.clone()))
        });
        let sets = [
            ConvexSetSpec::full_ball(r).unwrap(),
            ConvexSetSpec::masked_ball(mask.clone(), r).unwrap(),
            ConvexSetSpec::cylinder(mask.clone(), r).unwrap(),
            ConvexSetSpec::subspace(mask.clone()),
        ];
        for set in &sets {
            for flavor in [Flavor::Generalized, Flavor::Metric] {
                let d = format!("{} {flavor:?} {d}", set.kind_name());
                feasible.run(s, || {
                    let y = solve::project(&x, set, flavor, &OracleConfig::default())?.value.point;
                    let v = set.violation(&y)?;
                    Ok((if v <= crate::sets::TOL_FEAS * r.max(1.0) { 0.0 } else { v }, d.clone()))
                });
                fixed.run(s, || {
                    let z = set.feasibilize(&x)?;
                    let y = closed_point(&z, set, flavor)?;
                    Ok((dist(&y, &z) / z.max_abs().max(1.0), d.clone()))
                });
            }
        }
        // Scale an off-subspace point onto λ‖x^M‖ = r; λ is scale invariant.
        let off_point = g.vector(n, p);
        tie.run(s, || {
            let parts = Parts::new(&off_point, &mask)?;
            let x = off_point.scale(r / (parts.scaling() * parts.on_norm));
            let parts = Parts::new(&x, &mask)?;
            let radial = parts.on.scale(r / parts.on_norm);
            let scaled = parts.on.scale(parts.scaling());
            let y = gpi_masked_ball(&x, &mask, r)?.point;
            let err = dist(&radial, &scaled).max(dist(&y, &radial));
            Ok((err, format!("p={p} x={:?} mask={:?} r={r}", x.coords(), mask.indices())))
        });
    }
    vec![partition.finish(), feasible.finish(), fixed.finish(), tie.finish()]
}

fn oracle_agreement(seed: u64, flavor: Flavor, cfg: &OracleConfig) -> Vec<Check> {
    let tag = match flavor {
        Flavor::Generalized => "generalized",
        Flavor::Metric => "metric",
    };
    let mut checks = Vec::new();
    let mut gap = Tally::new(&format!("{tag} oracle optimality gap"), 1e-8);
    let mut covered = [0usize; 6];
    let mut covered_ok = [true; 6];
    for (kind, name) in ["full_ball", "masked_ball", "cylinder", "subspace"].iter().enumerate() {
        let mut t = Tally::new(&format!("{tag} {name} matches oracle"), 1e-6);
        for k in 0..INSTANCES {
            let s = instance_seed(seed, &format!("oracle-{tag}-{name}"), k);
            let mut g = Generator::new(s);
            let inst = closed_form_instance(&mut g, kind, flavor, k);
            let d = describe(&inst);
            let mut ok = false;
            t.run(s, || {
                let y = closed_point(&inst.x, &inst.set, flavor)?;
                let b = brute_project(&inst.x, &inst.set, flavor, cfg)?.point;
                let err = dist(&y, &b);
                ok = err <= 1e-6;
                Ok((err, format!("{d} closed={:?} oracle={:?}", y.coords(), b.coords())))
            });
            if kind == 1 {
                let i = Region::ALL.iter().position(|r| *r == inst.region).unwrap();
                covered[i] += 1;
                covered_ok[i] &= ok;
            }
            if flavor == Flavor::Generalized && k % 4 == 0 {
                gap.run(s, || {
                    let b = brute_project(&inst.x, &inst.set, flavor, cfg)?.point;
                    let vb = lyapunov(&inst.x, &b);
                    let n = inst.x.dim();
                    let mut best = f64::INFINITY;
                    for _ in 0..50 {
                        let z = inst.set.feasibilize(&g.vector(n, inst.x.p()))?;
                        best = best.min(lyapunov(&inst.x, &z));
                    }
                    Ok((vb - best, d.clone()))
                });
            }
        }
        checks.push(t.finish());
    }
    let mut cov = Tally::new(&format!("{tag} masked_ball regions covered"), 0.0);
    for (i, region) in Region::ALL.iter().enumerate() {
        let err = if covered[i] > 0 && covered_ok[i] { 0.0 } else { 1.0 };
        cov.measure(i as u64, err, format!("{}: {} instances", region.name(), covered[i]));
    }
    checks.push(cov.finish());
    if flavor == Flavor::Generalized {
        checks.push(gap.finish());
    }
    checks
}

/// Closed-form `Π` against the brute-force `V` minimizer, per set kind,
/// plus the optimality gap of the minimizer against sampled feasible points.
pub fn gpi_oracle_agreement(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    oracle_agreement(seed, Flavor::Generalized, cfg)
}

/// Closed-form `P` against the brute-force distance minimizer, per set kind.
pub fn mpi_oracle_agreement(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    oracle_agreement(seed, Flavor::Metric, cfg)
}

/// `y` moved by [`PERTURBATION`] in max norm toward a feasible point.
fn perturb_toward(y: &LpVector, z: &LpVector) -> Option<LpVector> {
    let d = z.sub(y).ok()?;
    let m = d.max_abs();
    (m >= PERTURBATION).then(|| y.axpy(PERTURBATION / m, &d).unwrap())
}

/// Closed-form projections pass the sampled variational inequality, and
/// feasible perturbations of them fail it.
pub fn certificates(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut out = Vec::new();
    for flavor in [Flavor::Generalized, Flavor::Metric] {
        let tag = match flavor {
            Flavor::Generalized => "generalized",
            Flavor::Metric => "metric",
        };
        let mut pass = Tally::new(&format!("{tag} closed forms pass certificate"), TOL_CERT);
        let mut reject =
            Tally::new(&format!("{tag} perturbations fail certificate"), -TOL_CERT);
        for k in 0..INSTANCES {
            let s = instance_seed(seed, &format!("certificate-{tag}"), k);
            let mut g = Generator::new(s);
            let inst = closed_form_instance(&mut g, k % 4, flavor, k / 4);
            let d = describe(&inst);
            let y = match closed_point(&inst.x, &inst.set, flavor) {
                Ok(y) => y,
                Err(e) => {
                    pass.measure(s, f64::INFINITY, format!("{d}: {e}"));
                    continue;
                }
            };
            pass.run(s, || {
                let rep = vi_certificate(&inst.x, &y, &inst.set, flavor, cfg)?;
                Ok((-rep.min_margin, d.clone()))
            });
            let n = inst.x.dim();
            let target = inst.set.feasibilize(&g.vector(n, inst.x.p())).unwrap();
            let origin = LpVector::zeros(n, inst.x.params());
            let moved: Vec<LpVector> =
                [&target, &origin].iter().filter_map(|z| perturb_toward(&y, z)).collect();
            reject.run(s, || {
                let mut worst = f64::NEG_INFINITY;
                for y2 in &moved {
                    let rep = vi_certificate(&inst.x, y2, &inst.set, flavor, cfg)?;
                    worst = worst.max(rep.min_margin);
                }
                Ok((worst, d.clone()))
            });
        }
        out.push(pass.finish());
        out.push(reject.finish());
    }
    out
}

/// At `p = 2` the generalized and metric projections coincide, and so do
/// their derivatives.
pub fn hilbert_collapse(seed: u64) -> Vec<Check> {
    let mut proj = Tally::new("p = 2 projections coincide", 1e-10);
    let mut der = Tally::new("p = 2 derivatives coincide", 1e-10);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "hilbert", k);
        let mut g = Generator::new(s);
        let kind = [0, 1, 3][k % 3];
        let inst = loop {
            let inst = closed_form_instance(&mut g, kind, Flavor::Metric, k);
            if inst.x.p() == 2.0 {
                break inst;
            }
        };
        let d = describe(&inst);
        proj.run(s, || {
            let a = closed_point(&inst.x, &inst.set, Flavor::Generalized)?;
            let b = closed_point(&inst.x, &inst.set, Flavor::Metric)?;
            Ok((dist(&a, &b), d.clone()))
        });
        let regions: Vec<Region> = Region::ALL.into_iter().filter(|r| r.exists_for(2.0)).collect();
        let m = g.masked_ball(regions[k % regions.len()], &[2.0]);
        let (mask, r) = (m.set.mask().unwrap().clone(), m.set.radius().unwrap());
        let h = g.direction(m.x.dim(), 2.0);
        der.run(s, || {
            let a = d_gpi_masked_ball(&m.x, &h, &mask, r)?.vector;
            let b = d_mpi_masked_ball(&m.x, &h, &mask, r)?.vector;
            Ok((dist(&a, &b), describe(&m)))
        });
    }
    vec![proj.finish(), der.finish()]
}

/// The fixed instance `p = 3`, `M = {0}`, `r = 1`, `x = (1.2, 10)` where
/// `Π` and `P` are far apart, confirmed by both oracles.
pub fn discrepancy_witness(cfg: &OracleConfig) -> Vec<Check> {
    let mut apart = Tally::new("witness projections are apart", 0.0);
    let mut values = Tally::new("witness values", 1e-6);
    let mut oracle = Tally::new("witness confirmed by oracles", 1e-6);
    let x = LpVector::from_slice(&[1.2, 10.0], 3.0).unwrap();
    let set = ConvexSetSpec::masked_ball(IndexMask::new([0], 2).unwrap(), 1.0).unwrap();
    let gp = closed_point(&x, &set, Flavor::Generalized);
    let mp = closed_point(&x, &set, Flavor::Metric);
    match (gp, mp) {
        (Ok(gp), Ok(mp)) => {
            let gap = gp.sub(&mp).unwrap().norm();
            apart.measure(0, 0.85 - gap, format!("‖Π - P‖ = {gap}"));
            let want_g = LpVector::from_slice(&[0.143917, 0.0], 3.0).unwrap();
            let want_m = LpVector::from_slice(&[1.0, 0.0], 3.0).unwrap();
            values.measure(
                0,
                dist(&gp, &want_g).max(dist(&mp, &want_m)),
                format!("Π = {:?}, P = {:?}", gp.coords(), mp.coords()),
            );
            oracle.run(0, || {
                let bg = brute_project(&x, &set, Flavor::Generalized, cfg)?.point;
                let bm = brute_project(&x, &set, Flavor::Metric, cfg)?.point;
                Ok((dist(&bg, &gp).max(dist(&bm, &mp)), format!("{:?} {:?}", bg.coords(), bm.coords())))
            });
        }
        (a, b) => {
            let e = a.err().or(b.err()).unwrap();
            for t in [&mut apart, &mut values, &mut oracle] {
                t.measure(0, f64::INFINITY, e.to_string());
            }
        }
    }
    vec![apart.finish(), values.finish(), oracle.finish()]
}

// ---------------------------------------------------------------------------
// Derivatives

/// Instance and direction for closed-form derivative operation `op`
/// (0 `Π'_B`, 1 `Π'_{B_M}`, 2 `P'_{B_M}`, 3 `P'_{C_M}`, 4 `P'_{l_p^M}`).
fn derivative_instance(g: &mut Generator, op: usize, k: usize) -> (Instance, Flavor, LpVector) {
    let (inst, flavor) = match op {
        0 => {
            let p = g.exponent();
            (g.full_ball(k % 2 == 0, p), Flavor::Generalized)
        }
        1 => {
            let region = Region::ALL[k % Region::ALL.len()];
            (g.masked_ball(region, closed_derivative_exponents(region)), Flavor::Generalized)
        }
        2 => (g.masked_ball(Region::ALL[k % Region::ALL.len()], &EXPONENTS), Flavor::Metric),
        3 => {
            let p = g.exponent();
            (g.cylinder(k % 2 == 0, p), Flavor::Metric)
        }
        _ => {
            let p = g.exponent();
            (g.subspace(k % 2 == 0, p), Flavor::Metric)
        }
    };
    let n = inst.x.dim();
    let p = inst.x.p();
    // In l_p^M with p < 2, leaving the subspace perturbs Π at order
    // t^p, which difference quotients resolve only to order t^{p-1}.
    let h = if op == 1 && inst.region == Region::InBall && p < 2.0 {
        g.direction_on(&inst.set.mask().unwrap().indices(), n, p)
    } else {
        g.direction(n, p)
    };
    (inst, flavor, h)
}

const OP_NAMES: [&str; 5] = [
    "generalized full_ball",
    "generalized masked_ball",
    "metric masked_ball",
    "metric cylinder",
    "metric subspace",
];

/// Closed-form derivatives against extrapolated difference quotients of the
/// closed-form projection.
pub fn derivative_fd_agreement(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut out = Vec::new();
    for (op, name) in OP_NAMES.iter().enumerate() {
        let mut t = Tally::new(&format!("{name} derivative matches difference quotients"), 1e-6);
        for k in 0..INSTANCES {
            let s = instance_seed(seed, &format!("derivative-{op}"), k);
            let mut g = Generator::new(s);
            let (inst, flavor, h) = derivative_instance(&mut g, op, k);
            t.run(s, || {
                let closed = derivative_closed_form(&inst.x, &h, &inst.set, flavor)
                    .expect("closed form exists")?
                    .vector;
                let fd = fd_derivative(solve::projector(&inst.set, flavor, cfg), &inst.x, &h, cfg)?;
                Ok((
                    dist(&closed, &fd.vector),
                    format!("{} h={:?} closed={:?} fd={:?}", describe(&inst), h.coords(), closed.coords(), fd.vector.coords()),
                ))
            });
        }
        out.push(t.finish());
    }
    out
}

/// Errors of the plain difference quotients shrink along the step sequence
/// until they reach rounding noise.
pub fn fd_convergence_order(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut t = Tally::new("difference quotient errors decrease", 0.0);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "fd-order", k);
        let mut g = Generator::new(s);
        let (inst, flavor, h) = derivative_instance(&mut g, k % OP_NAMES.len(), k / OP_NAMES.len());
        t.run(s, || {
            let exact = derivative_closed_form(&inst.x, &h, &inst.set, flavor)
                .expect("closed form exists")?
                .vector;
            let base = closed_point(&inst.x, &inst.set, flavor)?;
            let scale = base.max_abs().max(1.0);
            let mut errs = Vec::new();
            for &step in &cfg.fd_t_sequence {
                let moved = closed_point(&inst.x.axpy(step, &h)?, &inst.set, flavor)?;
                let q = moved.sub(&base)?.scale(1.0 / step);
                errs.push((dist(&q, &exact), step));
            }
            // Rounding in Π(x + th) - Π(x) contributes up to a few ulps / t.
            let worst = errs
                .windows(2)
                .map(|w| {
                    let noise = 1e-9f64.max(8.0 * f64::EPSILON * scale / w[1].1);
                    w[1].0 - w[0].0.max(noise)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((worst.max(0.0), format!("{} errors={:?}", describe(&inst), errs)))
        });
    }
    vec![t.finish()]
}

fn closed_derivative(inst: &Instance, flavor: Flavor, h: &LpVector) -> Result<LpVector> {
    derivative_closed_form(&inst.x, h, &inst.set, flavor)
        .ok_or_else(|| Error::Schema("no closed form".into()))?
        .map(|d| d.vector)
}

/// Special values of the derivatives along `h = x`.
pub fn special_values(seed: u64) -> Vec<Check> {
    let tol = 1e-10;
    let mut ball = Tally::new("ball derivative along x vanishes outside", tol);
    let mut masked_b = Tally::new("masked ball derivative along x vanishes in l_p^M outside", tol);
    let mut masked_d = Tally::new("masked ball scaled branch derivative along x is x^M", tol);
    let mut metric_d = Tally::new("metric masked ball derivative along x vanishes outside both", tol);
    let mut cyl = Tally::new("metric cylinder derivative along x is the off-mask part", tol);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "special", k);
        let mut g = Generator::new(s);
        let p = g.exponent();
        let inst = g.full_ball(false, p);
        ball.run(s, || Ok((closed_derivative(&inst, Flavor::Generalized, &inst.x)?.max_abs(), describe(&inst))));
        let inst = g.masked_ball(Region::MaskedOutside, &EXPONENTS);
        masked_b.run(s, || Ok((closed_derivative(&inst, Flavor::Generalized, &inst.x)?.max_abs(), describe(&inst))));
        let inst = g.masked_ball(Region::OffOutside { radial: false }, &[3.0, 4.0]);
        masked_d.run(s, || {
            let d = closed_derivative(&inst, Flavor::Generalized, &inst.x)?;
            let xm = inst.x.restrict(inst.set.mask().unwrap())?;
            let y = closed_point(&inst.x, &inst.set, Flavor::Generalized)?;
            Ok((
                dist(&d, &xm),
                format!("{} value={:?} x^M={:?} Π(x)={:?}", describe(&inst), d.coords(), xm.coords(), y.coords()),
            ))
        });
        let inst = g.masked_ball(Region::OffOutside { radial: k % 2 == 0 }, &EXPONENTS);
        metric_d.run(s, || Ok((closed_derivative(&inst, Flavor::Metric, &inst.x)?.max_abs(), describe(&inst))));
        let inst = g.cylinder(false, p);
        cyl.run(s, || {
            let d = closed_derivative(&inst, Flavor::Metric, &inst.x)?;
            let (_, off) = inst.x.split(inst.set.mask().unwrap())?;
            Ok((dist(&d, &off), describe(&inst)))
        });
    }
    vec![ball.finish(), masked_b.finish(), masked_d.finish(), metric_d.finish(), cyl.finish()]
}

/// Structural identities of projections onto convex sets, cones and
/// subspaces and of their derivatives.
pub fn structural_properties(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut homog = Tally::new("derivative positive homogeneity in the direction", 1e-10);
    let mut interior = Tally::new("derivative is the identity at interior points", 1e-10);
    let mut chord = Tally::new("chord derivative between feasible points", 1e-6);
    let mut cone = Tally::new("subspace projection is positively homogeneous", 1e-10);
    let mut vertex = Tally::new("orthogonality at the cone vertex", 1e-9);
    let mut ortho = Tally::new("subspace residual annihilates the subspace", 1e-10);
    let mut sub_fd = Tally::new("subspace derivative along the subspace", 1e-6);
    let mut radial = Tally::new("cone derivative along the point", 1e-6);
    let mut constant = Tally::new("derivative vanishes where the projection is locally constant", 1e-10);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "structural", k);
        let mut g = Generator::new(s);

        let (inst, flavor, h) = derivative_instance(&mut g, k % OP_NAMES.len(), k / OP_NAMES.len());
        homog.run(s, || {
            let base = closed_derivative(&inst, flavor, &h)?;
            let mut worst = 0.0f64;
            for lam in [0.5, 2.0] {
                let d = closed_derivative(&inst, flavor, &h.scale(lam))?;
                worst = worst.max(dist(&d, &base.scale(lam)));
            }
            Ok((worst, describe(&inst)))
        });

        let p = g.exponent();
        let interior_case: (Instance, Flavor, LpVector) = match k % 4 {
            0 => {
                let inst = g.full_ball(true, p);
                let h = g.direction(inst.x.dim(), p);
                (inst, Flavor::Generalized, h)
            }
            1 => {
                let inst = g.cylinder(true, p);
                let h = g.direction(inst.x.dim(), p);
                (inst, Flavor::Metric, h)
            }
            2 => {
                let inst = g.masked_ball(Region::InBall, &EXPONENTS);
                let idx = inst.set.mask().unwrap().indices();
                let h = g.direction_on(&idx, inst.x.dim(), inst.x.p());
                let flavor = if k % 8 == 2 { Flavor::Generalized } else { Flavor::Metric };
                (inst, flavor, h)
            }
            _ => {
                let inst = g.subspace(true, p);
                let idx = inst.set.mask().unwrap().indices();
                let h = g.direction_on(&idx, inst.x.dim(), p);
                (inst, Flavor::Metric, h)
            }
        };
        let (inst_i, flavor_i, h_i) = interior_case;
        interior.run(s, || Ok((dist(&closed_derivative(&inst_i, flavor_i, &h_i)?, &h_i), describe(&inst_i))));

        let flavor = if k % 2 == 0 { Flavor::Generalized } else { Flavor::Metric };
        let p = g.exponent();
        let n = g.dim();
        let mask = g.mask(n);
        let r = g.radius();
        let set = match k % 4 {
            0 => ConvexSetSpec::full_ball(r).unwrap(),
            1 => ConvexSetSpec::masked_ball(mask.clone(), r).unwrap(),
            2 => ConvexSetSpec::cylinder(mask.clone(), r).unwrap(),
            _ => ConvexSetSpec::subspace(mask.clone()),
        };
        let u = set.feasibilize(&g.vector(n, p)).unwrap();
        let w = loop {
            let w = set.feasibilize(&g.vector(n, p)).unwrap();
            if w != u {
                break w;
            }
        };
        chord.run(s, || {
            let v = w.sub(&u)?;
            let fd = fd_derivative(solve::projector(&set, flavor, cfg), &u, &v, cfg)?;
            Ok((
                dist(&fd.vector, &v),
                format!("{} {flavor:?} p={p} u={:?} w={:?}", set.kind_name(), u.coords(), w.coords()),
            ))
        });

        let x = g.vector(n, p);
        let d = format!("p={p} x={:?} mask={:?}", x.coords(), mask.indices());
        cone.run(s, || {
            let y = gpi_subspace(&x, &mask)?.point;
            let mut worst = 0.0f64;
            for lam in [0.5, 3.0] {
                worst = worst.max(dist(&gpi_subspace(&x.scale(lam), &mask)?.point, &y.scale(lam)));
            }
            Ok((worst, d.clone()))
        });
        vertex.run(s, || {
            let y = gpi_subspace(&x, &mask)?.point;
            let gdiff = x.duality_map().sub(&y.duality_map())?;
            Ok((pairing(&gdiff, &y).abs(), d.clone()))
        });
        ortho.run(s, || {
            let y = gpi_subspace(&x, &mask)?.point;
            let gdiff = x.duality_map().sub(&y.duality_map())?;
            let z = g.vector(n, p).restrict(&mask)?;
            let on = gdiff.restrict(&mask)?.max_abs();
            Ok((on.max(pairing(&gdiff, &z).abs()), d.clone()))
        });
        let sub = ConvexSetSpec::subspace(mask.clone());
        let y = x.restrict(&mask).unwrap();
        let v = g.direction_on(&mask.indices(), n, p);
        sub_fd.run(s, || {
            let fd = fd_derivative(solve::projector(&sub, Flavor::Generalized, cfg), &y, &v, cfg)?;
            Ok((dist(&fd.vector, &v), d.clone()))
        });
        radial.run(s, || {
            let proj = solve::projector(&sub, Flavor::Generalized, cfg);
            let px = gpi_subspace(&x, &mask)?.point;
            let along_x = fd_derivative(&proj, &x, &x, cfg)?.vector;
            let in_cone = fd_derivative(&proj, &y, &y, cfg)?.vector;
            let at_vertex = fd_derivative(&proj, &LpVector::zeros(n, x.params()), &y, cfg)?.vector;
            let err = dist(&along_x, &px).max(dist(&in_cone, &y)).max(dist(&at_vertex, &y));
            Ok((err, d.clone()))
        });

        let inst = g.masked_ball(Region::OffOutside { radial: true }, &EXPONENTS);
        let mask = inst.set.mask().unwrap();
        let off: Vec<usize> = (0..inst.x.dim()).filter(|i| !mask.contains(*i)).collect();
        let h = g.direction_on(&off, inst.x.dim(), inst.x.p());
        constant.run(s, || {
            let a = closed_derivative(&inst, Flavor::Generalized, &h)?;
            let b = closed_derivative(&inst, Flavor::Metric, &h)?;
            Ok((a.max_abs().max(b.max_abs()), describe(&inst)))
        });
    }
    vec![
        homog.finish(),
        interior.finish(),
        chord.finish(),
        cone.finish(),
        vertex.finish(),
        ortho.finish(),
        sub_fd.finish(),
        radial.finish(),
        constant.finish(),
    ]
}

/// The `l_3` cylinder coefficient: the sextic it solves, the duality match
/// it produces, and routing of points outside the sufficient condition to
/// the oracle.
pub fn cylinder_auxiliary(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut sextic = Tally::new("cylinder coefficient solves its sextic", 1e-10);
    let mut matched = Tally::new("cylinder point matches the duality map off the mask", 1e-9);
    let mut routed = Tally::new("cylinder condition violations route to the oracle", 0.0);
    for k in 0..INSTANCES {
        let s = instance_seed(seed, "cylinder-aux", k);
        let mut g = Generator::new(s);
        let inst = g.l3_cylinder(k % 2 == 0);
        let mask = inst.set.mask().unwrap();
        let d = describe(&inst);
        sextic.run(s, || {
            let b = cylinder_aux_b(&inst.x, mask)?;
            let parts = Parts::new(&inst.x, mask)?;
            let res = b.powi(6) * parts.norm.powi(3) - b.powi(3) * parts.off_norm.powi(3) - 1.0;
            Ok((res.abs(), d.clone()))
        });
        matched.run(s, || {
            let b = cylinder_aux_b(&inst.x, mask)?;
            let parts = Parts::new(&inst.x, mask)?;
            let a = parts.on.scale(1.0 / parts.on_norm).axpy(b, &parts.off)?;
            let ja = a.duality_map().split(mask)?.1;
            let jx = inst.x.duality_map().split(mask)?.1;
            let sphere = (a.restrict(mask)?.norm() - 1.0).abs();
            Ok((dist(&ja, &jx).max(sphere), d.clone()))
        });
        routed.run(s, || {
            let holds = k % 2 == 0;
            let solved = solve::project(&inst.x, &inst.set, Flavor::Generalized, cfg)?;
            let ok = if holds {
                solved.fallback.is_none() && solved.value.method == Method::ClosedForm
            } else {
                solved.fallback.as_deref() == Some("ConditionViolated")
                    && solved.value.method == Method::OracleFallback
                    && solved.value.certificate.is_some_and(|c| c.passed)
            };
            Ok((if ok { 0.0 } else { 1.0 }, format!("{d} fallback={:?}", solved.fallback)))
        });
    }
    vec![sextic.finish(), matched.finish(), routed.finish()]
}

// ---------------------------------------------------------------------------
// Suites

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    pub fn failures(&self) -> Vec<Failure> {
        self.checks.iter().flat_map(|c| c.failures.iter().cloned()).collect()
    }
}

pub const SUITES: [&str; 3] = ["invariants", "oracle_equivalence", "all"];

fn invariants(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut checks = duality_identities(seed);
    checks.extend(decomposition(seed));
    checks.extend(psi_checks(seed));
    checks.extend(duality_extras(seed));
    checks.extend(projection_structure(seed));
    checks.extend(certificates(seed, cfg));
    checks.extend(hilbert_collapse(seed));
    checks.extend(derivative_fd_agreement(seed, cfg));
    checks.extend(structural_properties(seed, cfg));
    checks.extend(cylinder_auxiliary(seed, cfg));
    checks
}

fn oracle_equivalence(seed: u64, cfg: &OracleConfig) -> Vec<Check> {
    let mut checks = gpi_oracle_agreement(seed, cfg);
    checks.extend(mpi_oracle_agreement(seed, cfg));
    checks.extend(discrepancy_witness(cfg));
    checks.extend(fd_convergence_order(seed, cfg));
    checks
}

/// Runs a named suite; unknown names are a schema error.
pub fn run_suite(name: &str, seed: u64, cfg: &OracleConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let checks = match name {
        "invariants" => invariants(seed, cfg),
        "oracle_equivalence" => oracle_equivalence(seed, cfg),
        "all" => {
            let mut c = invariants(seed, cfg);
            c.extend(oracle_equivalence(seed, cfg));
            c
        }
        other => {
            return Err(Error::Schema(format!(
                "unknown suite {other:?}; expected one of {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport { name: name.to_string(), seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_schema_error() {
        let err = run_suite("nope", 0, &OracleConfig::default()).unwrap_err();
        assert!(err.is_schema());
    }

    #[test]
    fn seeds_differ_across_families_and_instances() {
        let a = instance_seed(1, "psi", 0);
        assert_ne!(a, instance_seed(1, "psi", 1));
        assert_ne!(a, instance_seed(1, "duality", 0));
        assert_ne!(a, instance_seed(2, "psi", 0));
        assert_eq!(a, instance_seed(1, "psi", 0));
    }

    #[test]
    fn tally_counts_and_caps() {
        let mut t = Tally::new("t", 1.0);
        for k in 0..30 {
            t.measure(k, k as f64, String::new());
        }
        t.run(99, || Err(Error::ZeroVector));
        let c = t.finish();
        assert_eq!(c.instances, 31);
        assert_eq!(c.passed, 2);
        assert_eq!(c.failures.len(), MAX_REPORTED);
        assert_eq!(c.worst, f64::INFINITY);
        assert!(!c.ok());
    }

    #[test]
    fn witness_holds() {
        for c in discrepancy_witness(&OracleConfig::default()) {
            assert!(c.ok(), "{c:?}");
        }
    }
}
