//! Actions and their declared checks.

use std::fs;
use std::path::{Path, PathBuf};

use crystal_flow::analysis::{
    classify_stationary_square, is_square_anisotropy, make_stationary_square_aniso, make_stationary_square_aniso_with,
    make_translating_square_aniso, stationarity_residual, translation_check, AnalysisError, StationaryClass,
    StationaryKind,
};
use crystal_flow::energy::{admissible_triples, facet_identity_residual};
use crystal_flow::flow::{dissipation_residual, evolve, FlowError, IntegratorOptions, Trajectory};
use crystal_flow::{AdmissibleCurve, Anisotropy, FlowParams, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{epoch_manifest, snapshot, snapshots, write_series, Snapshot};
use crate::scenario::{Action, CurveSpec, Scenario};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_OK};

/// Relative energy increase tolerated between consecutive samples of one epoch.
const ENERGY_SLACK: f64 = 1e-9;
const DEFAULT_TRANSLATION_TOL: f64 = 1e-10;
const DEFAULT_IDENTITY_TOL: f64 = 1e-12;
const DEFAULT_REL_TOLS: [f64; 2] = [1e-8, 1e-10];
/// Classes whose round trip is compared with this relative tolerance on chain lengths.
const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub check: bool,
    pub max_time: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub name: String,
    pub action: &'static str,
    pub summary: Value,
    pub checks: Vec<CheckResult>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

#[derive(Default)]
struct Checks(Vec<CheckResult>);

impl Checks {
    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.0.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value <= bound, format!("{value:e} <= {bound:e}"));
    }
}

fn build(e: impl std::fmt::Display) -> CliError {
    CliError::Build(e.to_string())
}

fn flow_err(e: FlowError) -> CliError {
    match e {
        FlowError::InvalidOptions(_) => CliError::Build(e.to_string()),
        e => CliError::Run(e.to_string()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Loads `path`, runs it as `action` and writes outputs under `opts.out_dir/<name>/`.
pub fn run_file(action: Action, path: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let scenario = Scenario::load(path)?;
    run_scenario(action, &scenario, opts)
}

pub fn run_scenario(action: Action, s: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    if let Some(declared) = s.action {
        if declared != action {
            return Err(CliError::Schema(format!(
                "scenario {:?} declares action {} but was run with {}",
                s.name,
                declared.name(),
                action.name()
            )));
        }
    }
    let dir = opts.out_dir.join(&s.name);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut checks = Checks::default();
    let summary = match action {
        Action::Simulate => simulate(s, opts, &dir, &mut checks)?,
        Action::Catalog => catalog(s, &dir, &mut checks)?,
        Action::Classify => classify(s, &mut checks)?,
        Action::TranslatingCheck => translating(s, &mut checks)?,
        Action::VerifyIdentity => identity(s, &mut checks)?,
        Action::Audit => audit(s, opts, &mut checks)?,
    };
    let outcome = Outcome {
        name: s.name.clone(),
        action: action.name(),
        summary,
        checks: if opts.check { checks.0 } else { Vec::new() },
    };
    write_json(&dir.join("summary.json"), &outcome)?;
    Ok(outcome)
}

fn integrator(s: &Scenario, opts: &RunOptions) -> IntegratorOptions {
    let mut io = s.integrator;
    if let Some(t) = opts.max_time {
        io.max_time = t;
    }
    io
}

/// Adds a uniform random height in `[-eps, eps]` to every bounded segment.
fn perturb(curve: AdmissibleCurve, eps: f64, seed: u64) -> Result<AdmissibleCurve, CliError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CliError::Schema("perturbation must be a non-negative number".into()));
    }
    if eps == 0.0 {
        return Ok(curve);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h: Vec<f64> = (0..curve.len())
        .map(|i| {
            if curve.is_bounded(i) {
                rng.gen_range(-eps..=eps)
            } else {
                0.0
            }
        })
        .collect();
    curve.reconstruct_parallel(&h).map_err(build)
}

fn bounded_lengths(curve: &AdmissibleCurve) -> Vec<f64> {
    let l = curve.lengths();
    curve.bounded().map(|i| l[i]).collect()
}

fn energy_increase(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .filter(|w| w[0].epoch == w[1].epoch)
        .filter_map(|w| Some((w[1].energy? - w[0].energy?) / w[0].energy?.abs().max(1.0)))
        .fold(0.0, f64::max)
}

fn try_classify(curve: &AdmissibleCurve, alpha: f64) -> Option<StationaryClass> {
    if !is_square_anisotropy(curve.anisotropy()) {
        return None;
    }
    classify_stationary_square(curve, alpha).ok()
}

fn simulate(s: &Scenario, opts: &RunOptions, dir: &Path, checks: &mut Checks) -> Result<Value, CliError> {
    let p = s.params()?;
    let mut curve = s.curve()?;
    if let Some(eps) = s.perturbation {
        curve = perturb(curve, eps, opts.seed)?;
    }
    let traj = evolve(&curve, &p, &integrator(s, opts)).map_err(flow_err)?;
    let end = traj.final_state.t;

    if s.outputs.series.unwrap_or(true) {
        let path = dir.join("series.csv");
        let file = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        write_series(&traj, std::io::BufWriter::new(file))?;
    }
    write_json(&dir.join("epochs.json"), &epoch_manifest(&traj))?;
    let times = s.outputs.snapshots.clone().unwrap_or_else(|| vec![0.0, end]);
    let snaps: Vec<Snapshot> = snapshots(&traj, &times, p.window_radius)?;
    write_json(&dir.join("snapshots.json"), &snaps)?;

    let final_curve = traj.final_state.curve().map_err(flow_err)?;
    let limit_class = traj
        .limit
        .as_ref()
        .filter(|l| l.stationary)
        .and_then(|l| try_classify(&l.curve, p.alpha));
    let residual = dissipation_residual(&traj).ok();
    let increase = energy_increase(&traj);
    let summary = json!({
        "status": traj.status,
        "final_time": end,
        "steps": traj.steps,
        "samples": traj.samples.len(),
        "restarts": traj.restarts.len(),
        "initial_segments": curve.len(),
        "final_segments": final_curve.len(),
        "initial_energy": traj.initial_energy(),
        "final_energy": traj.samples.last().and_then(|x| x.energy),
        "final_lengths": bounded_lengths(&final_curve),
        "dissipation_residual": residual,
        "max_energy_increase": increase,
        "limit": traj.limit.as_ref().map(|l| json!({
            "residual": l.residual,
            "stationary": l.stationary,
            "generalized": l.generalized,
            "degenerate": l.degenerate,
            "class": limit_class,
        })),
    });

    let c = &s.checks;
    if let Some(want) = c.status {
        checks.push("status", traj.status == want, format!("{:?} == {want:?}", traj.status));
    }
    let lengths = bounded_lengths(&final_curve);
    if let Some(v) = &c.final_lengths {
        let err = if lengths.len() == v.values.len() {
            lengths
                .iter()
                .zip(&v.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        checks.push(
            "final_lengths",
            err <= v.tol,
            format!("{} lengths, max error {err:e} <= {:e}", lengths.len(), v.tol),
        );
    }
    if let Some(v) = c.final_length_all {
        let err = lengths.iter().map(|l| (l - v.value).abs()).fold(0.0, f64::max);
        checks.push(
            "final_length_all",
            err <= v.tol,
            format!("max |L - {}| = {err:e} <= {:e}", v.value, v.tol),
        );
    }
    if c.energy_nonincreasing == Some(true) {
        checks.at_most("energy_nonincreasing", increase, ENERGY_SLACK);
    }
    if let Some(n) = c.max_restarts {
        checks.push(
            "max_restarts",
            traj.restarts.len() <= n,
            format!("{} <= {n}", traj.restarts.len()),
        );
    }
    if let Some(n) = c.min_restarts {
        checks.push(
            "min_restarts",
            traj.restarts.len() >= n,
            format!("{} >= {n}", traj.restarts.len()),
        );
    }
    if let Some(bound) = c.dissipation_residual {
        checks.at_most("dissipation_residual", residual.unwrap_or(f64::INFINITY), bound);
    }
    if let Some(want) = c.stationary_limit {
        let got = traj.limit.as_ref().is_some_and(|l| l.stationary);
        checks.push("stationary_limit", got == want, format!("{got} == {want}"));
    }
    if let Some(bound) = c.residual {
        let r = traj.limit.as_ref().map_or(f64::INFINITY, |l| l.residual);
        checks.at_most("residual", r, bound);
    }
    if let Some(want) = &c.class {
        let ok = limit_class.is_some_and(|got| got.approx_eq(want, ROUND_TRIP_TOL));
        checks.push("class", ok, format!("{limit_class:?} == {want:?}"));
    }
    Ok(summary)
}

/// Default catalog: every generator at its default parameters, for the scenario's alpha.
fn default_catalog(alpha: f64) -> Vec<StationaryClass> {
    let mut out = vec![
        StationaryClass::new(StationaryKind::Staircase, false),
        StationaryClass::new(StationaryKind::WulffSquare, true),
    ];
    for m in 1..=4 {
        for closed in [false, true] {
            out.push(StationaryClass::new(StationaryKind::RightAngleChain { m }, closed));
        }
    }
    for m in 1..=3 {
        for k in [1.6, 2.0, 3.5] {
            let a = k * alpha.sqrt();
            let b = 1.0 / (1.0 / (2.0 * alpha) - 1.0 / (a * a)).sqrt();
            out.push(StationaryClass::new(
                StationaryKind::DoubleRightAngleChain { m, a, b },
                false,
            ));
        }
        let s = (4.0 * alpha).sqrt();
        out.push(StationaryClass::new(
            StationaryKind::DoubleRightAngleChain { m, a: s, b: s },
            true,
        ));
    }
    out
}

#[derive(Serialize)]
struct CatalogRecord {
    class: StationaryClass,
    alpha: f64,
    residual: f64,
    classified: Option<StationaryClass>,
    round_trip: bool,
    curve: Snapshot,
}

fn catalog(s: &Scenario, dir: &Path, checks: &mut Checks) -> Result<Value, CliError> {
    let p = s.params()?;
    let entries: Vec<(StationaryClass, f64, Option<Vec<f64>>)> = if s.catalog.is_empty() {
        default_catalog(p.alpha)
            .into_iter()
            .map(|c| (c, p.alpha, None))
            .collect()
    } else {
        s.catalog
            .iter()
            .map(|e| (e.class, e.alpha.unwrap_or(p.alpha), e.free.clone()))
            .collect()
    };
    let mut records = Vec::with_capacity(entries.len());
    for (class, alpha, free) in entries {
        let curve = match &free {
            Some(f) => make_stationary_square_aniso_with(&class, alpha, f),
            None => make_stationary_square_aniso(&class, alpha),
        }
        .map_err(build)?;
        let entry_params = FlowParams::new(alpha, p.window_radius).map_err(build)?;
        let residual = stationarity_residual(&curve, &entry_params).map_err(build)?;
        let classified = classify_stationary_square(&curve, alpha).ok();
        records.push(CatalogRecord {
            class,
            alpha,
            residual,
            classified,
            round_trip: classified.is_some_and(|c| c.approx_eq(&class, ROUND_TRIP_TOL)),
            curve: snapshot(&curve, 0.0, 0, p.window_radius),
        });
    }
    write_json(&dir.join("catalog.json"), &records)?;
    let worst = records.iter().map(|r| r.residual).fold(0.0, f64::max);
    let failed: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.round_trip)
        .map(|(k, _)| k)
        .collect();
    if let Some(bound) = s.checks.residual {
        checks.at_most("residual", worst, bound);
    }
    if s.checks.round_trip == Some(true) {
        checks.push(
            "round_trip",
            failed.is_empty(),
            format!("mismatched entries {failed:?}"),
        );
    }
    Ok(json!({
        "entries": records.len(),
        "max_residual": worst,
        "round_trip_failures": failed,
    }))
}

fn classify(s: &Scenario, checks: &mut Checks) -> Result<Value, CliError> {
    let p = s.params()?;
    let curve = s.curve()?;
    let residual = stationarity_residual(&curve, &p).map_err(build)?;
    let class = match classify_stationary_square(&curve, p.alpha) {
        Ok(c) => Some(c),
        Err(AnalysisError::NotStationary(_)) => None,
        Err(e) => return Err(build(e)),
    };
    if let Some(bound) = s.checks.residual {
        checks.at_most("residual", residual, bound);
    }
    if let Some(want) = &s.checks.class {
        let ok = class.is_some_and(|c| c.approx_eq(want, ROUND_TRIP_TOL));
        checks.push("class", ok, format!("{class:?} == {want:?}"));
    }
    Ok(json!({
        "segments": curve.len(),
        "residual": residual,
        "stationary": class.is_some(),
        "class": class,
    }))
}

fn translating(s: &Scenario, checks: &mut Checks) -> Result<Value, CliError> {
    let p = s.params()?;
    let curve = s.curve()?;
    let eta = s.direction.map_or(Vec2::new(0.0, 1.0), |d| Vec2::new(d[0], d[1]));
    if !(eta.norm() > 0.0) {
        return Err(CliError::Schema("direction must be nonzero".into()));
    }
    let eta = eta.normalize();
    let tol = s.checks.residual.unwrap_or(DEFAULT_TRANSLATION_TOL);
    let expected = match &s.curve {
        Some(CurveSpec::Translating(kind)) => {
            Some(make_translating_square_aniso(kind, p.alpha).map_err(build)?.velocity)
        }
        _ => None,
    };
    let verdict = translation_check(&curve, &p, eta, tol).map_err(build)?;
    let velocity = verdict.report().map(|r| r.velocity);
    if let Some(want) = s.checks.accepted {
        checks.push(
            "accepted",
            verdict.is_accepted() == want,
            format!("{} == {want}", verdict.is_accepted()),
        );
    }
    if let Some(v) = s.checks.velocity {
        let got = velocity.unwrap_or(f64::NAN);
        checks.push(
            "velocity",
            (got - v.value).abs() <= v.tol,
            format!("|{got} - {}| <= {:e}", v.value, v.tol),
        );
    }
    Ok(json!({
        "segments": curve.len(),
        "tolerance": tol,
        "verdict": verdict,
        "expected_velocity": expected,
    }))
}

fn identity(s: &Scenario, checks: &mut Checks) -> Result<Value, CliError> {
    let sides: Vec<usize> = if s.sides.is_empty() {
        (3..=12).collect()
    } else {
        s.sides.clone()
    };
    let mut rows = Vec::with_capacity(sides.len());
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    for &n in &sides {
        let a = Anisotropy::regular(n).map_err(build)?;
        let mut local: f64 = 0.0;
        let list = admissible_triples(&a);
        for t in &list {
            local = local.max(facet_identity_residual(&a, *t).map_err(build)?);
        }
        triples += list.len();
        worst = worst.max(local);
        rows.push(json!({"sides": n, "triples": list.len(), "max_residual": local}));
    }
    checks.at_most("residual", worst, s.checks.residual.unwrap_or(DEFAULT_IDENTITY_TOL));
    Ok(json!({"triples": triples, "max_residual": worst, "polygons": rows}))
}

fn audit(s: &Scenario, opts: &RunOptions, checks: &mut Checks) -> Result<Value, CliError> {
    let p = s.params()?;
    let curve = s.curve()?;
    let tols = if s.rel_tols.is_empty() {
        DEFAULT_REL_TOLS.to_vec()
    } else {
        s.rel_tols.clone()
    };
    let base = integrator(s, opts);
    let mut residuals = Vec::with_capacity(tols.len());
    for &rel in &tols {
        let io = IntegratorOptions {
            rel_tol: rel,
            abs_tol: rel * 1e-2,
            ..base
        };
        let traj = evolve(&curve, &p, &io).map_err(flow_err)?;
        residuals.push(dissipation_residual(&traj).map_err(flow_err)?);
    }
    let (first, last) = (residuals[0], residuals[residuals.len() - 1]);
    let shrink = first / last.max(f64::MIN_POSITIVE);
    if let Some(bound) = s.checks.dissipation_residual {
        checks.at_most("dissipation_residual", first, bound);
    }
    if let Some(factor) = s.checks.min_shrink {
        checks.push(
            "min_shrink",
            shrink >= factor,
            format!("{first:e} / {last:e} = {shrink:e} >= {factor}"),
        );
    }
    Ok(json!({"rel_tols": tols, "residuals": residuals, "shrink": shrink}))
}
