//! Translating curves for the square anisotropy, and a check for arbitrary curves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::anisotropy::Anisotropy;
use crate::curve::{AdmissibleCurve, Topology};
use crate::energy::FlowParams;
use crate::flow::{rhs, FlowState};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranslatingKind {
    SingleStep { lambda: f64 },
    ConvexRect { a: f64 },
    Pocket { a: f64, lambda: f64 },
    ConvexChain { m: usize, a: f64 },
}

#[derive(Debug, Clone)]
pub struct TranslatingCurve {
    pub curve: AdmissibleCurve,
    pub velocity: f64,
    pub direction: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranslationReport {
    pub direction: Vec2,
    pub velocity: f64,
    /// Largest deviation of the rates from `velocity * <direction, normal>`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    ClosedCurve,
    NoNormalComponent,
    NonPositiveVelocity,
    ResidualTooLarge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TranslationVerdict {
    Accepted(TranslationReport),
    Rejected {
        reason: RejectReason,
        report: Option<TranslationReport>,
    },
}

impl TranslationVerdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Self::Accepted(_))
    }

    pub fn report(&self) -> Option<&TranslationReport> {
        match self {
            Self::Accepted(r) => Some(r),
            Self::Rejected { report, .. } => report.as_ref(),
        }
    }
}

/// Fits `rates = lambda * <eta, normal>` over the bounded segments of `curve`.
pub fn translation_check(
    curve: &AdmissibleCurve,
    p: &FlowParams,
    eta: Vec2,
    tol: f64,
) -> Result<TranslationVerdict, AnalysisError> {
    if curve.is_closed() {
        return Ok(TranslationVerdict::Rejected {
            reason: RejectReason::ClosedCurve,
            report: None,
        });
    }
    let eta = eta.normalize();
    let segs = curve.segments();
    let n = segs.len();
    if segs[0].normal.dot(&eta).abs() > 1e-9 || segs[n - 1].normal.dot(&eta).abs() > 1e-9 {
        return Err(AnalysisError::HalfLinesNotParallel);
    }
    let rates = rhs(&FlowState::new(curve.clone()), p)?;
    let u: Vec<f64> = segs.iter().map(|s| s.normal.dot(&eta)).collect();
    let uu: f64 = curve.bounded().map(|i| u[i] * u[i]).sum();
    if uu < 1e-24 {
        return Ok(TranslationVerdict::Rejected {
            reason: RejectReason::NoNormalComponent,
            report: None,
        });
    }
    let lambda = curve.bounded().map(|i| rates[i] * u[i]).sum::<f64>() / uu;
    let residual = curve
        .bounded()
        .map(|i| (rates[i] - lambda * u[i]).abs())
        .fold(0.0, f64::max);
    let report = TranslationReport {
        direction: eta,
        velocity: lambda,
        residual,
    };
    Ok(if !(lambda > 0.0) {
        TranslationVerdict::Rejected {
            reason: RejectReason::NonPositiveVelocity,
            report: Some(report),
        }
    } else if residual > tol {
        TranslationVerdict::Rejected {
            reason: RejectReason::ResidualTooLarge,
            report: Some(report),
        }
    } else {
        TranslationVerdict::Accepted(report)
    })
}

fn out_of_range(msg: String) -> AnalysisError {
    AnalysisError::ParamOutOfRange(msg)
}

/// Facets of a walk whose second segment lies on the top facet.
fn facets_from_steps(steps: &[i8]) -> Vec<usize> {
    let mut f = vec![(0 - steps[0] as i64).rem_euclid(4) as usize];
    for &s in steps {
        let last = *f.last().unwrap() as i64;
        f.push((last + s as i64).rem_euclid(4) as usize);
    }
    f
}

fn build(steps: &[i8], lengths: &[f64]) -> Result<AdmissibleCurve, AnalysisError> {
    if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(out_of_range(format!("segment length {l} is not positive")));
    }
    let aniso = Arc::new(Anisotropy::square());
    Ok(AdmissibleCurve::from_walk(
        aniso,
        Topology::Unbounded,
        &facets_from_steps(steps),
        lengths,
        Vec2::zeros(),
    )?)
}

/// Inverse squared lengths of the odd segments of a convex chain, indexed by 1-based position.
pub(crate) fn chain_odd_inverse_squares(m: usize, a: f64, b: f64) -> Vec<(usize, f64)> {
    let n = 4 * m + 3;
    let mut out = Vec::new();
    for j in (3..=n - 2).step_by(2) {
        let x = if m.is_multiple_of(2) {
            let k = (m / 2) as f64;
            let j = if j <= 2 * m + 3 { j } else { 4 * m + 4 - j };
            let i = ((j - j % 4) / 4) as f64;
            if j % 4 == 3 {
                (k - i) * a - (2.0 * k - 2.0 * i - 1.0) * b / 2.0
            } else {
                (2.0 * k - 2.0 * i + 1.0) * b / 2.0 - (k - i) * a
            }
        } else {
            let k = ((m - 1) / 2) as f64;
            let j = if j <= 2 * m + 3 { j } else { 4 * m + 4 - j };
            if j % 4 == 3 {
                let i = ((j - 3) / 4) as f64;
                (2.0 * k - 2.0 * i + 1.0) * a / 2.0 - (k - i) * b
            } else {
                let i = ((j - 5) / 4) as f64;
                (k - i) * b - (2.0 * k - 2.0 * i - 1.0) * a / 2.0
            }
        };
        out.push((j, x));
    }
    out
}

/// Builds a translating curve moving upward with the returned velocity.
pub fn make_translating_square_aniso(kind: &TranslatingKind, alpha: f64) -> Result<TranslatingCurve, AnalysisError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(out_of_range("alpha must be positive".into()));
    }
    let s = (2.0 * alpha).sqrt();
    let (curve, velocity) = match *kind {
        TranslatingKind::SingleStep { lambda } => {
            if !(lambda > 0.0 && lambda < 2.0 / s) {
                return Err(out_of_range(format!("lambda {lambda} outside (0, {})", 2.0 / s)));
            }
            let lengths = [s, (2.0 * alpha / (1.0 - lambda * s / 2.0)).sqrt(), 2.0 / lambda - s];
            (build(&[-1, -1, -1, 1], &lengths)?, lambda)
        }
        TranslatingKind::ConvexRect { a } => {
            if !(a > s && a < (4.0 * alpha).sqrt()) {
                return Err(out_of_range(format!("a = {a} outside (sqrt(2 alpha), sqrt(4 alpha))")));
            }
            let p = 1.0 - 2.0 * alpha / (a * a);
            let q = 4.0 * alpha / (a * a) - 1.0;
            let lambda = ((1.0 / (2.0 * alpha)) / (1.0 / (4.0 * p * p) + 1.0 / (4.0 * q * q))).sqrt();
            let side = 2.0 * p / lambda;
            let lengths = [side, a, 2.0 * q / lambda, a, side];
            (build(&[-1; 6], &lengths)?, lambda)
        }
        TranslatingKind::Pocket { a, lambda } => {
            let rest = 2.0 - lambda * s - lambda * a;
            if !(a > 0.0 && lambda > 0.0 && rest > 0.0) {
                return Err(out_of_range(format!(
                    "need a > 0 and 0 < lambda < 2 / (a + sqrt(2 alpha)), got a = {a}, lambda = {lambda}"
                )));
            }
            let lengths = [
                a,
                (4.0 * alpha / (lambda * a)).sqrt(),
                s,
                (4.0 * alpha / rest).sqrt(),
                rest / lambda,
            ];
            (build(&[-1, 1, 1, 1, 1, -1], &lengths)?, lambda)
        }
        TranslatingKind::ConvexChain { m, a } => {
            let (mf, lo, hi) = (
                m as f64,
                1.0 / (2.0 * alpha),
                (m as f64 + 1.0) / (2.0 * m as f64 * alpha),
            );
            if m == 0 || !(a > lo && a < hi) {
                return Err(out_of_range(format!(
                    "need m >= 1 and {lo} < a < {hi}, got m = {m}, a = {a}"
                )));
            }
            let b = mf * a / (mf + 1.0);
            let (p, q) = (2.0 * a * alpha - 1.0, 1.0 - 2.0 * b * alpha);
            let lambda = ((1.0 / (2.0 * alpha)) / (1.0 / (4.0 * p * p) + 1.0 / (4.0 * q * q))).sqrt();
            let n = 4 * m + 3;
            let mut lengths = vec![0.0; n - 2];
            for j in (2..=n - 1).step_by(2) {
                lengths[j - 2] = if j % 4 == 0 { 2.0 * p / lambda } else { 2.0 * q / lambda };
            }
            for (j, x) in chain_odd_inverse_squares(m, a, b) {
                if !(x > 0.0) {
                    return Err(out_of_range(format!("segment {j} would have 1/L^2 = {x}")));
                }
                lengths[j - 2] = 1.0 / x.sqrt();
            }
            (build(&vec![-1; n - 1], &lengths)?, lambda)
        }
    };
    Ok(TranslatingCurve {
        curve,
        velocity,
        direction: Vec2::new(0.0, 1.0),
    })
}

/// Two convex rectangles joined by a concave pocket; `lengths` covers the nine bounded segments.
pub fn double_rectangle_curve(lengths: &[f64; 9]) -> Result<AdmissibleCurve, AnalysisError> {
    build(&[-1, 1, 1, 1, 1, -1, -1, -1, -1, -1], lengths)
}
