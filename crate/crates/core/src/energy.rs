//! Crystalline elastic energy, its first variation, and related identities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anisotropy::Anisotropy;
use crate::curve::AdmissibleCurve;

/// Absolute tolerance on the stationarity residual.
pub const STATIONARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("window of radius {radius} does not contain vertex at distance {distance}")]
    WindowTooSmall { radius: f64, distance: f64 },
    #[error("segment {0} has non-positive length")]
    ZeroLengthSegment(usize),
    #[error("facets {0}, {1}, {2} do not form an admissible triple")]
    InvalidTriple(usize, usize, usize),
    #[error("curves are not parallel")]
    NotParallel,
    #[error("curve is not stationary (residual {0})")]
    NotStationary(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Weight of the curvature term.
    pub alpha: f64,
    /// Radius of the centred disc that localises the energy of unbounded curves.
    pub window_radius: f64,
}

impl FlowParams {
    pub fn new(alpha: f64, window_radius: f64) -> Result<Self, EnergyError> {
        if !(alpha > 0.0) {
            return Err(EnergyError::InvalidParams(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(window_radius > 0.0) {
            return Err(EnergyError::InvalidParams(format!(
                "window radius must be positive, got {window_radius}"
            )));
        }
        Ok(Self { alpha, window_radius })
    }
}

/// Squared facet length times the support value.
pub fn facet_weight(a: &Anisotropy, facet: usize) -> f64 {
    let f = &a.facets()[facet];
    f.length * f.length * f.support
}

/// Lengths of the two half-lines inside the window, first half-line first.
pub fn window_clips(curve: &AdmissibleCurve, p: &FlowParams) -> Result<Option<[f64; 2]>, EnergyError> {
    let Some(rays) = curve.rays() else {
        return Ok(None);
    };
    let r = p.window_radius;
    if let Some(v) = curve.vertices().iter().find(|v| v.norm() >= r) {
        return Err(EnergyError::WindowTooSmall {
            radius: r,
            distance: v.norm(),
        });
    }
    let verts = curve.vertices();
    let bases = [verts[0], verts[verts.len() - 1]];
    let mut out = [0.0; 2];
    for k in 0..2 {
        let (g, d) = (bases[k], rays[k]);
        let gd = g.dot(&d);
        out[k] = -gd + (gd * gd - g.norm_squared() + r * r).sqrt();
    }
    Ok(Some(out))
}

/// Energy of a curve parallel to `curve` with the given bounded lengths and half-line clips.
pub(crate) fn energy_from_lengths(
    curve: &AdmissibleCurve,
    alpha: f64,
    lengths: &[f64],
    clips: Option<[f64; 2]>,
) -> f64 {
    let a = curve.anisotropy();
    let mut total = 0.0;
    for i in curve.bounded() {
        let s = &curve.segments()[i];
        let support = a.facets()[s.facet].support;
        let c2 = (s.transition as f64).powi(2);
        let fl = a.facets()[s.facet].length;
        total += support * (lengths[i] + alpha * c2 * fl * fl / lengths[i]);
    }
    if let Some(clips) = clips {
        let n = curve.len();
        for (k, i) in [0, n - 1].into_iter().enumerate() {
            total += a.facets()[curve.segments()[i].facet].support * clips[k];
        }
    }
    total
}

/// Crystalline elastic energy, localised to the window for unbounded curves.
pub fn elastic_energy(curve: &AdmissibleCurve, p: &FlowParams) -> Result<f64, EnergyError> {
    let clips = window_clips(curve, p)?;
    let lengths = curve.lengths();
    Ok(energy_from_lengths(curve, p.alpha, &lengths, clips))
}

/// Energy gradient per segment for a curve parallel to `curve` with the given lengths.
///
/// Entry `i` times `lengths[i]` is the derivative of the energy when segment `i` alone
/// moves outward; half-line entries are zero.
pub fn gradient_from_lengths(curve: &AdmissibleCurve, alpha: f64, lengths: &[f64]) -> Result<Vec<f64>, EnergyError> {
    let a = curve.anisotropy();
    let n = curve.len();
    let segs = curve.segments();
    let mut g = vec![0.0; n];
    for i in curve.bounded() {
        if !(lengths[i] > 0.0) {
            return Err(EnergyError::ZeroLengthSegment(i));
        }
    }
    // c_j^2 delta_j / L_j^2, zero for half-lines
    let bend: Vec<f64> = (0..n)
        .map(|j| {
            let c = segs[j].transition;
            if c == 0 {
                0.0
            } else {
                facet_weight(a, segs[j].facet) / (lengths[j] * lengths[j])
            }
        })
        .collect();
    for i in curve.bounded() {
        let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
        let (t0, t1) = (curve.theta(i), curve.theta(i + 1));
        let s = &segs[i];
        let fl = a.facets()[s.facet].length;
        let li = lengths[i];
        let bracket = bend[prev] / t0.sin() + bend[i] * (1.0 / t0.tan() + 1.0 / t1.tan()) + bend[next] / t1.sin();
        g[i] = s.transition as f64 * fl / li + alpha / li * bracket;
    }
    Ok(g)
}

/// First variation of the energy at `curve`.
pub fn first_variation(curve: &AdmissibleCurve, p: &FlowParams) -> Result<Vec<f64>, EnergyError> {
    gradient_from_lengths(curve, p.alpha, &curve.lengths())
}

/// Three consecutive facet assignments around a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetTriple {
    pub prev: usize,
    pub mid: usize,
    pub next: usize,
}

/// Residual of the geometric identity relating support values, angles and facet length.
pub fn facet_identity_residual(a: &Anisotropy, t: FacetTriple) -> Result<f64, EnergyError> {
    let bad = || EnergyError::InvalidTriple(t.prev, t.mid, t.next);
    if t.prev.max(t.mid).max(t.next) >= a.facet_count() {
        return Err(bad());
    }
    let s0 = a.step(t.prev, t.mid).ok_or_else(bad)?;
    let s1 = a.step(t.mid, t.next).ok_or_else(bad)?;
    let t0 = a.junction_angle(t.prev, t.mid).ok_or_else(bad)?;
    let t1 = a.junction_angle(t.mid, t.next).ok_or_else(bad)?;
    let c = if s0 == s1 { s0 as f64 } else { 0.0 };
    let f = a.facets();
    Ok(f[t.prev].support / t0.sin()
        + f[t.mid].support * (1.0 / t0.tan() + 1.0 / t1.tan())
        + f[t.next].support / t1.sin()
        + c * f[t.mid].length)
}

/// Every admissible triple of `a`: convex, concave and both mixed orders.
pub fn admissible_triples(a: &Anisotropy) -> Vec<FacetTriple> {
    let mut out = Vec::new();
    for mid in 0..a.facet_count() {
        for d0 in [-1i8, 1] {
            for d1 in [-1i8, 1] {
                out.push(FacetTriple {
                    prev: a.neighbour(mid, -d0),
                    mid,
                    next: a.neighbour(mid, d1),
                });
            }
        }
    }
    out
}

/// Largest `|g_i L_i|` over bounded segments; zero exactly on stationary curves.
pub fn stationarity_residual(curve: &AdmissibleCurve, alpha: f64) -> Result<f64, EnergyError> {
    let lengths = curve.lengths();
    let g = gradient_from_lengths(curve, alpha, &lengths)?;
    Ok(curve.bounded().map(|i| (g[i] * lengths[i]).abs()).fold(0.0, f64::max))
}

/// Energy excess of `other` over the parallel stationary curve `stationary`.
pub fn stationary_energy_gap(
    stationary: &AdmissibleCurve,
    other: &AdmissibleCurve,
    p: &FlowParams,
) -> Result<f64, EnergyError> {
    if !stationary.is_parallel_to(other) {
        return Err(EnergyError::NotParallel);
    }
    let res = stationarity_residual(stationary, p.alpha)?;
    if res > STATIONARY_TOL {
        return Err(EnergyError::NotStationary(res));
    }
    let a = stationary.anisotropy();
    let mut gap = 0.0;
    for i in stationary.bounded() {
        let s = &stationary.segments()[i];
        if s.transition == 0 {
            continue;
        }
        let (l, lb) = (s.length, other.segments()[i].length);
        gap += facet_weight(a, s.facet) * (lb - l).powi(2) / (l * l * lb);
    }
    Ok(p.alpha * gap)
}
