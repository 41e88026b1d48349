//! Scenario files: JSON descriptions of one run and its declared checks.

use std::path::Path;
use std::sync::Arc;

use crystal_flow::analysis::{
    double_rectangle_curve, is_square_anisotropy, make_stationary_square_aniso, make_stationary_square_aniso_with,
    make_translating_square_aniso, StationaryClass, TranslatingKind,
};
use crystal_flow::flow::{IntegratorOptions, Status};
use crystal_flow::{AdmissibleCurve, Anisotropy, FlowParams, Topology, Vec2};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Simulate,
    Catalog,
    Classify,
    TranslatingCheck,
    VerifyIdentity,
    Audit,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Simulate => "simulate",
            Action::Catalog => "catalog",
            Action::Classify => "classify",
            Action::TranslatingCheck => "translating-check",
            Action::VerifyIdentity => "verify-identity",
            Action::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Square,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnisotropySpec {
    Preset(Preset),
    /// Regular polygon with this many sides.
    Regular(usize),
    Vertices(Vec<[f64; 2]>),
}

impl AnisotropySpec {
    pub fn build(&self) -> Result<Anisotropy, CliError> {
        let a = match self {
            Self::Preset(Preset::Square) => Ok(Anisotropy::square()),
            Self::Regular(n) => Anisotropy::regular(*n),
            Self::Vertices(v) => Anisotropy::from_vertices(&points(v)),
        };
        a.map_err(|e| CliError::Build(e.to_string()))
    }
}

fn points(v: &[[f64; 2]]) -> Vec<Vec2> {
    v.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSpec {
    pub points: Vec<[f64; 2]>,
    pub topology: Topology,
    /// Directions of the two half-lines of an unbounded curve.
    #[serde(default)]
    pub rays: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub facets: Vec<usize>,
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub start: [f64; 2],
    pub topology: Topology,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarySpec {
    pub class: StationaryClass,
    #[serde(default)]
    pub free: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSpec {
    Polygon(PolygonSpec),
    Walk(WalkSpec),
    /// The Wulff shape scaled by `radius`.
    Wulff {
        radius: f64,
    },
    Stationary(StationarySpec),
    Translating(TranslatingKind),
    DoubleRectangle([f64; 9]),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSpec {
    pub alpha: f64,
    pub window_radius: f64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            window_radius: 100.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Write the per-sample CSV series.
    pub series: Option<bool>,
    /// Times at which to write curve snapshots; defaults to the first and last sample.
    pub snapshots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueTol {
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuesTol {
    pub values: Vec<f64>,
    pub tol: f64,
}

/// Assertions evaluated under `--check`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub status: Option<Status>,
    pub final_lengths: Option<ValuesTol>,
    /// Every bounded segment of the final curve has this length.
    pub final_length_all: Option<ValueTol>,
    pub energy_nonincreasing: Option<bool>,
    pub max_restarts: Option<usize>,
    pub min_restarts: Option<usize>,
    pub dissipation_residual: Option<f64>,
    pub stationary_limit: Option<bool>,
    /// Bound on stationarity or identity residuals, or the translation residual.
    pub residual: Option<f64>,
    pub round_trip: Option<bool>,
    pub class: Option<StationaryClass>,
    pub accepted: Option<bool>,
    pub velocity: Option<ValueTol>,
    /// Required factor by which the dissipation residual shrinks across the tolerance sweep.
    pub min_shrink: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub class: StationaryClass,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub free: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub action: Option<Action>,
    #[serde(default)]
    pub anisotropy: Option<AnisotropySpec>,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub checks: Checks,
    /// Largest random height added to each bounded segment, drawn from `--seed`.
    #[serde(default)]
    pub perturbation: Option<f64>,
    #[serde(default)]
    pub catalog: Vec<CatalogEntry>,
    /// Polygon side counts for the identity sweep.
    #[serde(default)]
    pub sides: Vec<usize>,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
    /// Relative tolerances for the dissipation audit, coarsest first.
    #[serde(default)]
    pub rel_tols: Vec<f64>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        if s.schema != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                s.schema
            )));
        }
        if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name.starts_with('.') {
            return Err(CliError::Schema(format!("invalid scenario name {:?}", s.name)));
        }
        Ok(s)
    }

    pub fn params(&self) -> Result<FlowParams, CliError> {
        FlowParams::new(self.params.alpha, self.params.window_radius).map_err(|e| CliError::Build(e.to_string()))
    }

    pub fn anisotropy(&self) -> Result<Anisotropy, CliError> {
        self.anisotropy
            .as_ref()
            .map(AnisotropySpec::build)
            .unwrap_or_else(|| Ok(Anisotropy::square()))
    }

    pub fn curve(&self) -> Result<AdmissibleCurve, CliError> {
        let spec = self
            .curve
            .as_ref()
            .ok_or_else(|| CliError::Schema("scenario needs a curve".into()))?;
        let aniso = Arc::new(self.anisotropy()?);
        let build = |e: &dyn std::fmt::Display| CliError::Build(e.to_string());
        let alpha = self.params.alpha;
        let square_only = |what: &str| -> Result<(), CliError> {
            if is_square_anisotropy(&aniso) {
                Ok(())
            } else {
                Err(CliError::Build(format!("{what} curves need the square anisotropy")))
            }
        };
        match spec {
            CurveSpec::Polygon(p) => {
                let rays = p
                    .rays
                    .map(|r| [Vec2::new(r[0][0], r[0][1]), Vec2::new(r[1][0], r[1][1])]);
                AdmissibleCurve::from_vertices(aniso, p.topology, &points(&p.points), rays).map_err(|e| build(&e))
            }
            CurveSpec::Walk(w) => AdmissibleCurve::from_walk(
                aniso,
                w.topology,
                &w.facets,
                &w.lengths,
                Vec2::new(w.start[0], w.start[1]),
            )
            .map_err(|e| build(&e)),
            CurveSpec::Wulff { radius } => {
                if !(*radius > 0.0) {
                    return Err(CliError::Build("radius must be positive".into()));
                }
                let pts: Vec<Vec2> = aniso.vertices().iter().map(|v| v * *radius).collect();
                AdmissibleCurve::from_vertices(aniso, Topology::Closed, &pts, None).map_err(|e| build(&e))
            }
            CurveSpec::Stationary(s) => {
                square_only("stationary")?;
                match &s.free {
                    Some(free) => make_stationary_square_aniso_with(&s.class, alpha, free),
                    None => make_stationary_square_aniso(&s.class, alpha),
                }
                .map_err(|e| build(&e))
            }
            CurveSpec::Translating(kind) => {
                square_only("translating")?;
                make_translating_square_aniso(kind, alpha)
                    .map(|t| t.curve)
                    .map_err(|e| build(&e))
            }
            CurveSpec::DoubleRectangle(lengths) => {
                square_only("double rectangle")?;
                double_rectangle_curve(lengths).map_err(|e| build(&e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses() {
        let s = Scenario::parse(r#"{"schema": 1, "name": "w", "curve": {"wulff": {"radius": 2.0}}}"#).unwrap();
        let c = s.curve().unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.lengths().iter().all(|l| (l - 4.0).abs() < 1e-12));
        assert_eq!(s.params().unwrap().alpha, 1.0);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let err = Scenario::parse(r#"{"schema": 7, "name": "w"}"#).unwrap_err();
        assert!(matches!(err, CliError::Schema(_)));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = Scenario::parse(r#"{"schema": 1, "name": "w", "bogus": 1}"#).unwrap_err();
        assert!(matches!(err, CliError::Schema(_)));
    }

    #[test]
    fn generator_curves_need_square() {
        let s = Scenario::parse(
            r#"{"schema": 1, "name": "g", "anisotropy": {"regular": 6},
                "curve": {"stationary": {"class": {"kind": "wulff_square", "closed": true}}}}"#,
        )
        .unwrap();
        assert!(matches!(s.curve(), Err(CliError::Build(_))));
    }

    #[test]
    fn integrator_options_merge_with_defaults() {
        let s = Scenario::parse(r#"{"schema": 1, "name": "w", "integrator": {"max_time": 3.0}}"#).unwrap();
        assert_eq!(s.integrator.max_time, 3.0);
        assert_eq!(s.integrator.rel_tol, IntegratorOptions::default().rel_tol);
    }

    #[test]
    fn names_cannot_escape_the_output_directory() {
        assert!(Scenario::parse(r#"{"schema": 1, "name": "../x"}"#).is_err());
    }
}
