//! Stationarity and translation checks, the square catalog, and convergence monitoring.

mod square;
mod translating;

use std::collections::VecDeque;

use thiserror::Error;

use crate::curve::{AdmissibleCurve, CurveError};
use crate::energy::{self, EnergyError, FlowParams};
use crate::flow::{FlowError, FlowState, IntegratorOptions, Sample, Trajectory};

pub use square::{
    classify_stationary_square, close_walk, free_length_count, is_square_anisotropy, make_stationary_square_aniso,
    make_stationary_square_aniso_with, StationaryClass, StationaryKind,
};
pub use translating::{
    double_rectangle_curve, make_translating_square_aniso, translation_check, RejectReason, TranslatingCurve,
    TranslatingKind, TranslationReport, TranslationVerdict,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("curve is not stationary (residual {0:e})")]
    NotStationary(f64),
    #[error("anisotropy is not the square [-1, 1]^2")]
    NotSquare,
    #[error("invalid class parameters: {0}")]
    InvalidClassParams(String),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("half-lines are not parallel to the translation direction")]
    HalfLinesNotParallel,
}

/// Largest `|g_i L_i|` over bounded segments.
pub fn stationarity_residual(curve: &AdmissibleCurve, p: &FlowParams) -> Result<f64, AnalysisError> {
    Ok(energy::stationarity_residual(curve, p.alpha)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorVerdict {
    Continue,
    Converged,
    /// Rates have settled at a nonzero profile, or heights left every bounded region.
    Diverging,
}

/// Settled rates count as translation only above this multiple of the stationarity tolerance.
pub const TRANSLATION_SPEED_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
struct Entry {
    t: f64,
    h: Vec<f64>,
    rates: Vec<f64>,
}

/// Watches a trailing time window of samples from one epoch.
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    tol: f64,
    window: f64,
    min_samples: usize,
    divergence_factor: f64,
    scale: f64,
    history: VecDeque<Entry>,
}

impl ConvergenceMonitor {
    /// `scale` is a length comparable to the curve size.
    pub fn new(opts: &IntegratorOptions, scale: f64) -> Self {
        Self {
            tol: opts.stationarity_tol,
            window: opts.window(),
            min_samples: opts.min_window_samples.max(2),
            divergence_factor: opts.divergence_factor,
            scale,
            history: VecDeque::new(),
        }
    }

    /// Forgets the history, e.g. after a restart changed the segment count.
    pub fn reset(&mut self, scale: f64) {
        self.scale = scale;
        self.history.clear();
    }

    pub fn observe(&mut self, s: &Sample) -> MonitorVerdict {
        if self.history.back().is_some_and(|e| e.h.len() != s.h.len()) {
            self.history.clear();
        }
        self.history.push_back(Entry {
            t: s.t,
            h: s.h.clone(),
            rates: s.rates.clone(),
        });
        // keep one entry at or before the window start so the window is fully covered
        while self.history.len() > self.min_samples && self.history[1].t <= s.t - self.window {
            self.history.pop_front();
        }

        let max_h = s.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max_h > self.divergence_factor * self.scale {
            return MonitorVerdict::Diverging;
        }
        let span = s.t - self.history[0].t;
        if self.history.len() < self.min_samples || span < self.window {
            return MonitorVerdict::Continue;
        }
        let max_rate = |e: &Entry| e.rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if self.history.iter().all(|e| max_rate(e) < self.tol) {
            let n = s.h.len();
            let variation = (0..n)
                .map(|i| {
                    self.history
                        .iter()
                        .zip(self.history.iter().skip(1))
                        .map(|(a, b)| (b.h[i] - a.h[i]).abs())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            if variation < self.tol * self.window.max(span) {
                return MonitorVerdict::Converged;
            }
            return MonitorVerdict::Continue;
        }
        let oldest = &self.history[0];
        let drift = self
            .history
            .iter()
            .flat_map(|e| e.rates.iter().zip(&oldest.rates).map(|(r, r0)| (r - r0).abs()))
            .fold(0.0, f64::max);
        // only unbounded curves can translate, and only at a speed well above the tolerance
        let unbounded = s.lengths.iter().any(|l| !l.is_finite());
        if unbounded && drift < self.tol && max_rate(self.history.back().unwrap()) > TRANSLATION_SPEED_FACTOR * self.tol
        {
            return MonitorVerdict::Diverging;
        }
        MonitorVerdict::Continue
    }
}

/// Replays a recorded trajectory through a fresh monitor.
pub fn convergence_status(traj: &Trajectory, opts: &IntegratorOptions) -> MonitorVerdict {
    let scale = traj
        .epochs
        .first()
        .map(|e| e.reference.diameter().max(e.reference.total_length()))
        .unwrap_or(1.0);
    let mut monitor = ConvergenceMonitor::new(opts, scale);
    let mut verdict = MonitorVerdict::Continue;
    for s in &traj.samples {
        verdict = monitor.observe(s);
        if verdict != MonitorVerdict::Continue {
            break;
        }
    }
    verdict
}

/// Segments with `c = 0` shorter than this multiple of their vanish threshold count as degenerate.
pub const DEGENERATE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub curve: AdmissibleCurve,
    /// Stationarity residual over nondegenerate segments.
    pub residual: f64,
    /// Bounded `c = 0` segments that have shrunk to their threshold.
    pub degenerate: Vec<usize>,
    pub stationary: bool,
    pub generalized: bool,
}

pub fn limit_report(
    state: &FlowState,
    p: &FlowParams,
    opts: &IntegratorOptions,
    thresholds: &[f64],
) -> Result<LimitReport, FlowError> {
    let reference = &state.reference;
    let lengths = state.lengths();
    let g = energy::gradient_from_lengths(reference, p.alpha, &lengths)?;
    let segs = reference.segments();
    let degenerate: Vec<usize> = reference
        .bounded()
        .filter(|&i| segs[i].transition == 0 && lengths[i] < DEGENERATE_FACTOR * thresholds[i])
        .collect();
    let residual = reference
        .bounded()
        .filter(|i| !degenerate.contains(i))
        .map(|i| (g[i] * lengths[i]).abs())
        .fold(0.0, f64::max);
    // rates below tol bound the residual by tol times length over support
    let a = reference.anisotropy();
    let min_support = a.facets().iter().map(|f| f.support).fold(f64::INFINITY, f64::min);
    let max_len = reference.bounded().map(|i| lengths[i]).fold(0.0, f64::max);
    let accept = 10.0 * opts.stationarity_tol * (max_len / min_support).max(1.0);
    let ok = residual <= accept;
    Ok(LimitReport {
        curve: reference.reconstruct_with_floor(&state.h, 0.0)?,
        residual,
        stationary: ok && degenerate.is_empty(),
        generalized: ok && !degenerate.is_empty(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::Anisotropy;
    use crate::curve::Topology;
    use crate::Vec2;
    use std::sync::Arc;

    fn square_curve(r: f64) -> AdmissibleCurve {
        let pts = [Vec2::new(-r, r), Vec2::new(r, r), Vec2::new(r, -r), Vec2::new(-r, -r)];
        AdmissibleCurve::from_vertices(Arc::new(Anisotropy::square()), Topology::Closed, &pts, None).unwrap()
    }

    fn sample(t: f64, h: Vec<f64>, rates: Vec<f64>) -> Sample {
        Sample {
            t,
            epoch: 0,
            lengths: vec![1.0; h.len()],
            h,
            energy: None,
            rates,
            dissipated: 0.0,
        }
    }

    #[test]
    fn residual_matches_plug_in_values() {
        let p = FlowParams::new(1.0, 10.0).unwrap();
        assert!(stationarity_residual(&square_curve(1.0), &p).unwrap() < 1e-12);
        let r = stationarity_residual(&square_curve(2.0), &p).unwrap();
        assert!((r - 1.5).abs() < 1e-12);
    }

    #[test]
    fn monitor_needs_full_window() {
        let opts = IntegratorOptions {
            max_time: 10.0,
            ..Default::default()
        };
        let mut m = ConvergenceMonitor::new(&opts, 1.0);
        for k in 0..5 {
            assert_eq!(
                m.observe(&sample(k as f64 * 0.01, vec![0.0; 4], vec![0.0; 4])),
                MonitorVerdict::Continue
            );
        }
        let mut last = MonitorVerdict::Continue;
        for k in 0..20 {
            last = m.observe(&sample(0.05 + k as f64 * 0.05, vec![0.0; 4], vec![0.0; 4]));
        }
        assert_eq!(last, MonitorVerdict::Converged);
    }

    #[test]
    fn monitor_flags_settled_nonzero_rates() {
        let opts = IntegratorOptions {
            max_time: 10.0,
            ..Default::default()
        };
        let mut m = ConvergenceMonitor::new(&opts, 1.0);
        let mut last = MonitorVerdict::Continue;
        for k in 0..60 {
            let t = k as f64 * 0.02;
            let mut s = sample(t, vec![0.0, t, 0.0], vec![0.0, 1.0, 0.0]);
            s.lengths = vec![f64::INFINITY, 1.0, f64::INFINITY];
            last = m.observe(&s);
        }
        assert_eq!(last, MonitorVerdict::Diverging);
    }

    #[test]
    fn monitor_resets_on_dimension_change() {
        let opts = IntegratorOptions {
            max_time: 1.0,
            ..Default::default()
        };
        let mut m = ConvergenceMonitor::new(&opts, 1.0);
        for k in 0..20 {
            m.observe(&sample(k as f64 * 0.01, vec![0.0; 4], vec![1.0; 4]));
        }
        assert_eq!(
            m.observe(&sample(0.3, vec![0.0; 3], vec![0.0; 3])),
            MonitorVerdict::Continue
        );
    }
}
