//! JSON requests and reports for the command-line front end.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::derivatives::{DerivativeMethod, DerivativeResult};
use crate::error::{Error, Result};
use crate::lp::{IndexMask, LpVector};
use crate::oracles::{brute_project, vi_certificate, OracleConfig};
use crate::sets::{classify_region, ConvexSetSpec, Flavor, Method, RegionLabel, RegionTag};
use crate::solve::{self, Solved};
use crate::suite::{self, SuiteReport};

/// Default per-coordinate tolerance of `verify` against the brute oracle.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Project,
    Derivative,
    Verify,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetDescription {
    FullBall { r: f64 },
    MaskedBall { mask: Vec<usize>, r: f64 },
    Cylinder { mask: Vec<usize>, r: f64 },
    Subspace { mask: Vec<usize> },
}

impl SetDescription {
    pub fn build(&self, dim: usize) -> Result<ConvexSetSpec> {
        let mask = |m: &[usize]| IndexMask::new(m.iter().copied(), dim);
        match self {
            SetDescription::FullBall { r } => ConvexSetSpec::full_ball(*r),
            SetDescription::MaskedBall { mask: m, r } => ConvexSetSpec::masked_ball(mask(m)?, *r),
            SetDescription::Cylinder { mask: m, r } => ConvexSetSpec::cylinder(mask(m)?, *r),
            SetDescription::Subspace { mask: m } => Ok(ConvexSetSpec::subspace(mask(m)?)),
        }
    }
}

fn default_flavor() -> Flavor {
    Flavor::Generalized
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub command: Command,
    pub p: f64,
    pub x: Vec<f64>,
    /// Direction for `derivative`, optional for `compare`.
    #[serde(default, alias = "h", skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    pub set: SetDescription,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

impl Request {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        match (self.command, &self.v) {
            (Command::Derivative, None) => {
                Err(Error::Schema("derivative requires a direction \"v\" (or \"h\")".into()))
            }
            (Command::Project | Command::Verify, Some(_)) => Err(Error::Schema(format!(
                "{:?} takes no direction",
                self.command
            ))),
            _ => Ok(()),
        }
    }
}

/// Options that come from the command line rather than the request.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Replaces the oracle's random seed.
    pub seed: Option<u64>,
    /// Replaces [`VERIFY_TOL`].
    pub tol_override: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFields {
    pub min_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_z: Option<Vec<f64>>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Side {
    pub result: Vec<f64>,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub generalized: Side,
    pub metric: Side,
    /// Largest coordinate difference between the two.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub projection: Pair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    /// `None` when some instance produced no finite error.
    pub worst: Option<f64>,
    pub tolerance: f64,
    pub failures: Vec<suite::Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckSummary>,
}

impl From<&SuiteReport> for SuiteSummary {
    fn from(r: &SuiteReport) -> Self {
        Self {
            name: r.name.clone(),
            seed: r.seed,
            passed: r.passed(),
            checks: r
                .checks
                .iter()
                .map(|c| CheckSummary {
                    name: c.name.clone(),
                    instances: c.instances,
                    passed: c.passed,
                    worst: c.worst.is_finite().then_some(c.worst),
                    tolerance: c.tolerance,
                    failures: c.failures.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateFields>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Report {
    fn empty(status: Status) -> Self {
        Self {
            status,
            result: None,
            region: None,
            method: None,
            certificate: None,
            diagnostics: BTreeMap::new(),
            fallback_reason: None,
            comparison: None,
            suite: None,
            error: None,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        let mut r = Self::empty(Status::Error);
        r.fail(e);
        r
    }

    fn fail(&mut self, e: &Error) {
        self.status = Status::Error;
        self.error = Some(ErrorBody { code: e.code().to_string(), message: e.to_string() });
    }

    /// Non-finite values are dropped; JSON cannot carry them.
    fn diagnostic(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.diagnostics.insert(name.to_string(), value);
        }
    }

    /// 0 on success or fallback, 2 for schema and input errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            None => 0,
            Some(e) if is_schema_code(&e.code) => 2,
            Some(_) => 1,
        }
    }

    pub fn to_json(&self, pretty: bool) -> String {
        let out = if pretty { serde_json::to_string_pretty(self) } else { serde_json::to_string(self) };
        out.expect("reports hold only finite numbers")
    }
}

fn is_schema_code(code: &str) -> bool {
    matches!(
        code,
        "SchemaError"
            | "InvalidExponent"
            | "NonFinite"
            | "EmptyVector"
            | "DimensionMismatch"
            | "ExponentMismatch"
            | "InvalidMask"
            | "InvalidRadius"
    )
}

/// Region name as seen from the given set.
pub fn region_name(set: &ConvexSetSpec, label: &RegionLabel) -> &'static str {
    use RegionTag::*;
    match (set, label.tag) {
        (ConvexSetSpec::FullBall { .. } | ConvexSetSpec::Cylinder { .. }, InBall | CylinderOffSubspace) => {
            "inside"
        }
        (ConvexSetSpec::FullBall { .. } | ConvexSetSpec::Cylinder { .. }, _) => "outside",
        (ConvexSetSpec::Subspace { .. }, InBall | MaskedOutside) => "in_subspace",
        (ConvexSetSpec::Subspace { .. }, _) => "off_subspace",
        (ConvexSetSpec::MaskedBall { .. }, InBall) => "in_ball",
        (ConvexSetSpec::MaskedBall { .. }, MaskedOutside) => "masked_outside",
        (ConvexSetSpec::MaskedBall { .. }, CylinderOffSubspace) => "cylinder_off_subspace",
        (ConvexSetSpec::MaskedBall { .. }, OutsideBoth) => "outside_both",
    }
}

fn region_of(x: &LpVector, set: &ConvexSetSpec) -> Result<&'static str> {
    let label = classify_region(x, &set.mask_or_full(x.dim()), set.radius().unwrap_or(1.0))?;
    Ok(region_name(set, &label))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ClosedForm => "closed_form",
        Method::OracleFallback => "oracle_fallback",
    }
}

fn derivative_method_name(m: DerivativeMethod) -> &'static str {
    match m {
        DerivativeMethod::ClosedForm => "closed_form",
        DerivativeMethod::FiniteDifference => "finite_difference",
    }
}

fn status_for(fallback: bool) -> Status {
    if fallback {
        Status::Fallback
    } else {
        Status::Ok
    }
}

struct Problem {
    x: LpVector,
    v: Option<LpVector>,
    set: ConvexSetSpec,
    cfg: OracleConfig,
}

impl Problem {
    fn new(req: &Request, opts: &RunOptions) -> Result<Self> {
        req.validate()?;
        let x = LpVector::from_slice(&req.x, req.p)?;
        let v = req.v.as_deref().map(|v| LpVector::from_slice(v, req.p)).transpose()?;
        if let Some(v) = &v {
            if v.dim() != x.dim() {
                return Err(Error::DimensionMismatch(x.dim(), v.dim()));
            }
        }
        let set = req.set.build(x.dim())?;
        let mut cfg = req.oracle.clone().unwrap_or_default();
        if let Some(seed) = opts.seed {
            cfg.rng_seed = seed;
        }
        cfg.validate()?;
        if let Some(t) = opts.tol_override {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Schema(format!("--tol-override must be positive, got {t}")));
            }
        }
        Ok(Self { x, v, set, cfg })
    }
}

/// Runs one request. Failures come back as error reports, never as `Err`.
pub fn run_request(req: &Request, opts: &RunOptions) -> Report {
    let out = Problem::new(req, opts).and_then(|pb| match req.command {
        Command::Project => project(&pb, req.flavor),
        Command::Derivative => derivative(&pb, req.flavor),
        Command::Verify => verify(&pb, req.flavor, opts.tol_override.unwrap_or(VERIFY_TOL)),
        Command::Compare => compare(&pb),
    });
    out.unwrap_or_else(|e| Report::from_error(&e))
}

/// Parses and runs a request given as JSON text.
pub fn run_json(text: &str, opts: &RunOptions) -> Report {
    match Request::parse(text) {
        Ok(req) => run_request(&req, opts),
        Err(e) => Report::from_error(&e),
    }
}

fn project(pb: &Problem, flavor: Flavor) -> Result<Report> {
    let Solved { value, fallback } = solve::project(&pb.x, &pb.set, flavor, &pb.cfg)?;
    let mut r = Report::empty(status_for(fallback.is_some()));
    r.result = Some(value.point.coords().to_vec());
    r.region = Some(region_name(&pb.set, &value.region).to_string());
    r.method = Some(method_name(value.method).to_string());
    r.certificate = value.certificate.map(|c| CertificateFields {
        min_margin: c.min_margin,
        worst_z: None,
        passed: c.passed,
    });
    r.fallback_reason = fallback;
    let b = value.region.boundary;
    for (name, on) in [
        ("boundary_on_radius", b.on_radius),
        ("boundary_near_subspace", b.near_subspace),
        ("boundary_case_tie", b.case_tie),
    ] {
        if on {
            r.diagnostic(name, 1.0);
        }
    }
    Ok(r)
}

fn derivative(pb: &Problem, flavor: Flavor) -> Result<Report> {
    let v = pb.v.as_ref().expect("validated");
    let Solved { value, fallback } = solve::derivative(&pb.x, v, &pb.set, flavor, &pb.cfg)?;
    let mut r = Report::empty(status_for(fallback.is_some()));
    r.result = Some(value.vector.coords().to_vec());
    r.region = Some(region_of(&pb.x, &pb.set)?.to_string());
    r.method = Some(derivative_method_name(value.method).to_string());
    if let Some(e) = value.fd_error_estimate {
        r.diagnostic("fd_error_estimate", e);
    }
    r.fallback_reason = fallback;
    Ok(r)
}

fn verify(pb: &Problem, flavor: Flavor, tol: f64) -> Result<Report> {
    let mut r = project(pb, flavor)?;
    let point = LpVector::from_slice(r.result.as_ref().expect("projection result"), pb.x.p())?;
    let cert = vi_certificate(&pb.x, &point, &pb.set, flavor, &pb.cfg)?;
    let brute = brute_project(&pb.x, &pb.set, flavor, &pb.cfg)?;
    let gap = point.max_abs_diff(&brute.point);
    r.certificate = Some(CertificateFields {
        min_margin: cert.min_margin,
        worst_z: Some(cert.worst_z.coords().to_vec()),
        passed: cert.passed,
    });
    r.diagnostic("oracle_discrepancy", gap);
    r.diagnostic("oracle_residual", brute.residual);
    r.diagnostic("oracle_objective", brute.objective);
    r.diagnostic("oracle_iterations", brute.iterations as f64);
    r.diagnostic("tolerance", tol);
    let mut problems = Vec::new();
    if !cert.passed {
        problems.push(format!("certificate margin {:e}", cert.min_margin));
    }
    if !(gap <= tol) {
        problems.push(format!("oracle discrepancy {gap:e} exceeds {tol:e}"));
    }
    if !problems.is_empty() {
        r.fail(&Error::SuiteFailure(problems.join("; ")));
    }
    Ok(r)
}

fn side_projection(s: Solved<crate::sets::ProjectionResult>) -> Side {
    Side {
        result: s.value.point.coords().to_vec(),
        method: method_name(s.value.method).to_string(),
        fallback_reason: s.fallback,
    }
}

fn side_derivative(s: Solved<DerivativeResult>) -> Side {
    Side {
        result: s.value.vector.coords().to_vec(),
        method: derivative_method_name(s.value.method).to_string(),
        fallback_reason: s.fallback,
    }
}

fn pair(generalized: Side, metric: Side) -> Pair {
    let discrepancy = generalized
        .result
        .iter()
        .zip(&metric.result)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Pair { generalized, metric, discrepancy }
}

fn compare(pb: &Problem) -> Result<Report> {
    let proj = |f| solve::project(&pb.x, &pb.set, f, &pb.cfg).map(side_projection);
    let projection = pair(proj(Flavor::Generalized)?, proj(Flavor::Metric)?);
    let derivative = match &pb.v {
        Some(v) => {
            let der = |f| solve::derivative(&pb.x, v, &pb.set, f, &pb.cfg).map(side_derivative);
            Some(pair(der(Flavor::Generalized)?, der(Flavor::Metric)?))
        }
        None => None,
    };
    let sides = [Some(&projection), derivative.as_ref()];
    let fell_back = sides
        .iter()
        .flatten()
        .any(|p| p.generalized.fallback_reason.is_some() || p.metric.fallback_reason.is_some());
    let mut r = Report::empty(status_for(fell_back));
    r.region = Some(region_of(&pb.x, &pb.set)?.to_string());
    r.diagnostic("projection_discrepancy", projection.discrepancy);
    if let Some(d) = &derivative {
        r.diagnostic("derivative_discrepancy", d.discrepancy);
    }
    r.comparison = Some(Comparison { projection, derivative });
    Ok(r)
}

/// Runs a named property suite. A failing check makes the report an error
/// whose message lists the failing instances with their seeds.
pub fn run_suite(name: &str, seed: u64) -> Report {
    let report = match suite::run_suite(name, seed, &OracleConfig::default()) {
        Ok(report) => report,
        Err(e) => return Report::from_error(&e),
    };
    let mut r = Report::empty(Status::Ok);
    let summary = SuiteSummary::from(&report);
    let passed: usize = summary.checks.iter().filter(|c| c.instances == c.passed).count();
    r.diagnostic("checks", summary.checks.len() as f64);
    r.diagnostic("checks_passed", passed as f64);
    if !report.passed() {
        let failing: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.ok())
            .map(|c| {
                let seeds: Vec<String> = c.failures.iter().map(|f| f.seed.to_string()).collect();
                format!("{} ({}/{}; seeds {})", c.name, c.passed, c.instances, seeds.join(", "))
            })
            .collect();
        r.fail(&Error::SuiteFailure(failing.join("; ")));
    }
    r.suite = Some(summary);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Report {
        run_json(text, &RunOptions::default())
    }

    #[test]
    fn project_example() {
        let r = run(r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1},"flavor":"generalized"}"#);
        assert_eq!(r.status, Status::Ok);
        let y = r.result.unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        assert_eq!(r.region.as_deref(), Some("outside"));
        assert_eq!(r.method.as_deref(), Some("closed_form"));
    }

    #[test]
    fn derivative_requires_direction() {
        let r = run(r#"{"command":"derivative","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1}}"#);
        assert_eq!(r.error.as_ref().unwrap().code, "SchemaError");
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn h_is_an_alias_for_v() {
        let a = run(r#"{"command":"derivative","p":3,"x":[3,4],"v":[1,0],"set":{"kind":"full_ball","r":1}}"#);
        let b = run(r#"{"command":"derivative","p":3,"x":[3,4],"h":[1,0],"set":{"kind":"full_ball","r":1}}"#);
        assert_eq!(a, b);
        assert_eq!(a.status, Status::Ok);
    }

    #[test]
    fn unknown_fields_and_kinds_are_schema_errors() {
        for text in [
            r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1},"extra":1}"#,
            r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"hexagon","r":1}}"#,
            r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1,"mask":[0]}}"#,
            r#"{"command":"shrink","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1}}"#,
            "not json",
        ] {
            assert_eq!(run(text).exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn validation_errors_exit_2_and_computation_errors_exit_1() {
        let bad_p = run(r#"{"command":"project","p":1,"x":[3,4],"set":{"kind":"full_ball","r":1}}"#);
        assert_eq!(bad_p.error.as_ref().unwrap().code, "InvalidExponent");
        assert_eq!(bad_p.exit_code(), 2);
        let zero = run(
            r#"{"command":"derivative","p":3,"x":[1,0],"v":[0,0],"set":{"kind":"full_ball","r":1}}"#,
        );
        assert_eq!(zero.error.as_ref().unwrap().code, "ZeroDirection");
        assert_eq!(zero.exit_code(), 1);
    }

    #[test]
    fn fallback_is_reported_and_exits_0() {
        let r = run(r#"{"command":"project","p":3,"x":[5,0.1],"set":{"kind":"cylinder","mask":[0],"r":1}}"#);
        assert_eq!(r.status, Status::Fallback);
        assert_eq!(r.fallback_reason.as_deref(), Some("ConditionViolated"));
        assert_eq!(r.method.as_deref(), Some("oracle_fallback"));
        assert!(r.certificate.as_ref().unwrap().passed);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn verify_passes_on_closed_form() {
        let r = run(r#"{"command":"verify","p":3,"x":[1.2,10],"set":{"kind":"masked_ball","mask":[0],"r":1}}"#);
        assert_eq!(r.status, Status::Ok, "{r:?}");
        assert!(r.diagnostics["oracle_discrepancy"] <= VERIFY_TOL);
        assert!(r.certificate.unwrap().worst_z.is_some());
    }

    #[test]
    fn verify_fails_under_impossible_tolerance() {
        let text = r#"{"command":"verify","p":2.5,"x":[0.7,-0.4,2],"set":{"kind":"masked_ball","mask":[0,1],"r":0.5},"flavor":"metric"}"#;
        let opts = RunOptions { tol_override: Some(1e-300), ..Default::default() };
        let r = run_json(text, &opts);
        assert!(r.diagnostics["oracle_discrepancy"] > 0.0);
        assert_eq!(r.error.as_ref().unwrap().code, "SuiteFailure");
        assert_eq!(r.exit_code(), 1);
        assert!(r.result.is_some());
    }

    #[test]
    fn region_names_follow_the_set() {
        let cases = [
            (r#"{"kind":"cylinder","mask":[0],"r":1}"#, "[0.5,3]", "inside"),
            (r#"{"kind":"subspace","mask":[0]}"#, "[0.5,3]", "off_subspace"),
            (r#"{"kind":"subspace","mask":[0]}"#, "[7,0]", "in_subspace"),
            (r#"{"kind":"masked_ball","mask":[0],"r":1}"#, "[7,0]", "masked_outside"),
        ];
        for (set, x, want) in cases {
            let text = format!(r#"{{"command":"project","p":2,"x":{x},"set":{set},"flavor":"metric"}}"#);
            assert_eq!(run(&text).region.as_deref(), Some(want), "{text}");
        }
    }

    #[test]
    fn oracle_overrides_are_checked() {
        let r = run(r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1},"oracle":{"tol_opt":-1}}"#);
        assert_eq!(r.exit_code(), 2);
        let r = run(r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1},"oracle":{"bogus":1}}"#);
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn unknown_suite() {
        let r = run_suite("nope", 0);
        assert_eq!(r.exit_code(), 2);
    }
}
