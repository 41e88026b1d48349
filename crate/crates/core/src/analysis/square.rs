//! Stationary curves for the square anisotropy `[-1, 1]^2`.
//!
//! Facets are numbered clockwise from the top: normals `e2, e1, -e2, -e1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::anisotropy::Anisotropy;
use crate::curve::{AdmissibleCurve, Topology};
use crate::energy::{self, STATIONARY_TOL};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StationaryKind {
    Staircase,
    RightAngleChain { m: usize },
    DoubleRightAngleChain { m: usize, a: f64, b: f64 },
    WulffSquare,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryClass {
    #[serde(flatten)]
    pub kind: StationaryKind,
    pub closed: bool,
}

impl StationaryClass {
    pub fn new(kind: StationaryKind, closed: bool) -> Self {
        Self { kind, closed }
    }

    /// Equality with a relative tolerance on the chain lengths.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        use StationaryKind::*;
        let close = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0);
        self.closed == other.closed
            && match (self.kind, other.kind) {
                (DoubleRightAngleChain { m, a, b }, DoubleRightAngleChain { m: m2, a: a2, b: b2 }) => {
                    m == m2 && close(a, a2) && close(b, b2)
                }
                (x, y) => x == y,
            }
    }
}

pub fn is_square_anisotropy(a: &Anisotropy) -> bool {
    let reference = Anisotropy::square();
    a.facet_count() == 4
        && a.facets()
            .iter()
            .zip(reference.facets())
            .all(|(f, g)| (f.normal - g.normal).norm() < 1e-12 && (f.support - g.support).abs() < 1e-12)
}

fn square() -> Arc<Anisotropy> {
    Arc::new(Anisotropy::square())
}

fn walk_facets(start: usize, steps: &[i8]) -> Vec<usize> {
    let mut f = vec![start];
    for &s in steps {
        let last = *f.last().unwrap() as i64;
        f.push((last + s as i64).rem_euclid(4) as usize);
    }
    f
}

/// `count` blocks of `len` equal steps with alternating sign, starting positive.
fn block_steps(count: usize, len: usize) -> Vec<i8> {
    (0..count * len)
        .map(|k| if (k / len).is_multiple_of(2) { 1 } else { -1 })
        .collect()
}

/// Closes a walk by solving for the lengths marked `None` (one or two of them).
pub fn close_walk(
    anisotropy: Arc<Anisotropy>,
    facets: &[usize],
    lengths: &[Option<f64>],
    start: Vec2,
) -> Result<AdmissibleCurve, AnalysisError> {
    let unknown: Vec<usize> = (0..lengths.len()).filter(|&i| lengths[i].is_none()).collect();
    let gap: Vec2 = facets
        .iter()
        .zip(lengths)
        .filter_map(|(&f, l)| l.map(|l| l * anisotropy.tangent(f)))
        .sum();
    let solved: Vec<f64> = match unknown.as_slice() {
        [i] => {
            let t = anisotropy.tangent(facets[*i]);
            let l = -gap.dot(&t);
            if (gap + l * t).norm() > 1e-9 * gap.norm().max(1.0) {
                return Err(AnalysisError::InvalidClassParams("walk cannot be closed".into()));
            }
            vec![l]
        }
        [i, j] => {
            let (t0, t1) = (anisotropy.tangent(facets[*i]), anisotropy.tangent(facets[*j]));
            let m = nalgebra::Matrix2::from_columns(&[t0, t1]);
            let x = m
                .lu()
                .solve(&(-gap))
                .ok_or_else(|| AnalysisError::InvalidClassParams("closing directions are parallel".into()))?;
            vec![x[0], x[1]]
        }
        _ => {
            return Err(AnalysisError::InvalidClassParams(format!(
                "need one or two unknown lengths, got {}",
                unknown.len()
            )))
        }
    };
    if let Some(&l) = solved.iter().find(|&&l| !(l > 0.0)) {
        return Err(AnalysisError::InvalidClassParams(format!(
            "closing length {l} is not positive"
        )));
    }
    let mut full: Vec<f64> = lengths.iter().map(|l| l.unwrap_or(0.0)).collect();
    for (&i, &l) in unknown.iter().zip(&solved) {
        full[i] = l;
    }
    Ok(AdmissibleCurve::from_walk(
        anisotropy,
        Topology::Closed,
        facets,
        &full,
        start,
    )?)
}

fn check_lengths(free: &[f64], expected: usize) -> Result<(), AnalysisError> {
    if free.len() != expected {
        return Err(AnalysisError::InvalidClassParams(format!(
            "expected {expected} free lengths, got {}",
            free.len()
        )));
    }
    if let Some(l) = free.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(AnalysisError::InvalidClassParams(format!("length {l} is not positive")));
    }
    Ok(())
}

/// Number of free lengths `make_stationary_square_aniso_with` expects.
pub fn free_length_count(class: &StationaryClass) -> Option<usize> {
    use StationaryKind::*;
    match (class.kind, class.closed) {
        (RightAngleChain { m }, false) => Some(m.saturating_sub(1)),
        (RightAngleChain { m }, true) => Some(2 * m.saturating_sub(1)),
        (DoubleRightAngleChain { m, .. }, false) => Some(m.saturating_sub(1)),
        (DoubleRightAngleChain { m, .. }, true) => Some((2 * m).saturating_sub(1)),
        (WulffSquare, true) => Some(0),
        _ => None,
    }
}

/// Default free lengths: unit staircase steps with five bounded segments, connectors
/// matching the symmetric closed configurations.
pub fn make_stationary_square_aniso(class: &StationaryClass, alpha: f64) -> Result<AdmissibleCurve, AnalysisError> {
    let s = (2.0 * alpha).sqrt();
    let free = match class.kind {
        StationaryKind::Staircase => vec![1.0; 5],
        StationaryKind::RightAngleChain { .. } if class.closed => {
            vec![2.0 * s; free_length_count(class).unwrap_or(0)]
        }
        StationaryKind::DoubleRightAngleChain { .. } if class.closed => vec![s; free_length_count(class).unwrap_or(0)],
        _ => vec![2.0 * s; free_length_count(class).unwrap_or(0)],
    };
    make_stationary_square_aniso_with(class, alpha, &free)
}

/// Builds a stationary curve of the given class.
///
/// `free` lists the unconstrained lengths in walk order: every bounded segment of a
/// staircase, or the connectors of a chain (all but the closing ones for closed chains).
pub fn make_stationary_square_aniso_with(
    class: &StationaryClass,
    alpha: f64,
    free: &[f64],
) -> Result<AdmissibleCurve, AnalysisError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(AnalysisError::InvalidClassParams("alpha must be positive".into()));
    }
    let s = (2.0 * alpha).sqrt();
    let aniso = square();
    let origin = Vec2::zeros();
    match (class.kind, class.closed) {
        (StationaryKind::Staircase, false) => {
            if free.is_empty() {
                return Err(AnalysisError::InvalidClassParams(
                    "staircase needs a bounded segment".into(),
                ));
            }
            check_lengths(free, free.len())?;
            let steps: Vec<i8> = (0..=free.len()).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect();
            let facets = walk_facets(0, &steps);
            Ok(AdmissibleCurve::from_walk(
                aniso,
                Topology::Unbounded,
                &facets,
                free,
                origin,
            )?)
        }
        (StationaryKind::WulffSquare, true) => {
            check_lengths(free, 0)?;
            let side = (4.0 * alpha).sqrt();
            let facets = [0, 1, 2, 3];
            let start = Vec2::new(-side / 2.0, side / 2.0);
            Ok(AdmissibleCurve::from_walk(
                aniso,
                Topology::Closed,
                &facets,
                &[side; 4],
                start,
            )?)
        }
        (StationaryKind::RightAngleChain { m }, closed) if m >= 1 => {
            check_lengths(free, free_length_count(class).unwrap())?;
            if closed {
                let n = 6 * m;
                let facets = walk_facets(0, &block_steps(2 * m, 3)[..n - 1]);
                let mut connectors = free.iter().map(|&l| Some(l)).chain([None, None]);
                let lengths: Vec<Option<f64>> = (0..n)
                    .map(|i| {
                        if i % 3 == 0 {
                            connectors.next().unwrap()
                        } else {
                            Some(s)
                        }
                    })
                    .collect();
                close_walk(aniso, &facets, &lengths, origin)
            } else {
                let n = 3 * m + 1;
                let facets = walk_facets(0, &block_steps(m, 3));
                let mut connectors = free.iter();
                let lengths: Vec<f64> = (1..n - 1)
                    .map(|i| if i % 3 == 0 { *connectors.next().unwrap() } else { s })
                    .collect();
                Ok(AdmissibleCurve::from_walk(
                    aniso,
                    Topology::Unbounded,
                    &facets,
                    &lengths,
                    origin,
                )?)
            }
        }
        (StationaryKind::DoubleRightAngleChain { m, a, b }, closed) if m >= 1 => {
            if !(a > 0.0 && b > 0.0) {
                return Err(AnalysisError::InvalidClassParams(
                    "side lengths must be positive".into(),
                ));
            }
            let constraint = 1.0 / (a * a) + 1.0 / (b * b) - 1.0 / (2.0 * alpha);
            if constraint.abs() > 1e-12 / alpha {
                return Err(AnalysisError::InvalidClassParams(format!(
                    "1/a^2 + 1/b^2 differs from 1/(2 alpha) by {constraint:e}"
                )));
            }
            check_lengths(free, free_length_count(class).unwrap())?;
            let side = |block: usize, first: bool| if block.is_multiple_of(2) == first { a } else { b };
            if closed {
                if (a - b).abs() > 1e-12 * a.max(b) {
                    return Err(AnalysisError::InvalidClassParams(
                        "closed double right-angle chains need a = b".into(),
                    ));
                }
                let n = 8 * m;
                let facets = walk_facets(0, &block_steps(2 * m, 4)[..n - 1]);
                let mut connectors = free.iter().map(|&l| Some(l)).chain([None]);
                let lengths: Vec<Option<f64>> = (0..n)
                    .map(|i| match i % 4 {
                        0 => connectors.next().unwrap(),
                        1 => Some(side(i / 4, true)),
                        2 => Some(s),
                        _ => Some(side(i / 4, false)),
                    })
                    .collect();
                close_walk(aniso, &facets, &lengths, origin)
            } else {
                let n = 4 * m + 1;
                let facets = walk_facets(0, &block_steps(m, 4));
                let mut connectors = free.iter();
                let lengths: Vec<f64> = (1..n - 1)
                    .map(|i| match i % 4 {
                        0 => *connectors.next().unwrap(),
                        1 => side(i / 4, true),
                        2 => s,
                        _ => side(i / 4, false),
                    })
                    .collect();
                Ok(AdmissibleCurve::from_walk(
                    aniso,
                    Topology::Unbounded,
                    &facets,
                    &lengths,
                    origin,
                )?)
            }
        }
        _ => Err(AnalysisError::InvalidClassParams(format!(
            "no {} curve of kind {:?}",
            if class.closed { "closed" } else { "unbounded" },
            class.kind
        ))),
    }
}

/// `c` matches `count` blocks of `len`: a zero followed by `len - 1` entries of alternating sign.
fn matches_blocks(c: &[i8], len: usize) -> Option<usize> {
    if !c.len().is_multiple_of(len) || c.is_empty() {
        return None;
    }
    let ok = c.iter().enumerate().all(|(i, &x)| {
        let sign = if (i / len).is_multiple_of(2) { 1 } else { -1 };
        if i % len == 0 {
            x == 0
        } else {
            x == sign
        }
    });
    ok.then_some(c.len() / len)
}

/// Identifies the stationary class of a curve in the square anisotropy.
pub fn classify_stationary_square(curve: &AdmissibleCurve, alpha: f64) -> Result<StationaryClass, AnalysisError> {
    if !is_square_anisotropy(curve.anisotropy()) {
        return Err(AnalysisError::NotSquare);
    }
    let residual = energy::stationarity_residual(curve, alpha)?;
    if residual > STATIONARY_TOL {
        return Err(AnalysisError::NotStationary(residual));
    }
    let closed = curve.is_closed();
    let mut c = curve.transitions();
    let mut lengths = curve.lengths();
    let n = c.len();
    if closed {
        if let Some(k) = (0..n).find(|&k| c[k] == 0 && c[(k + 1) % n] != 0) {
            c.rotate_left(k);
            lengths.rotate_left(k);
        }
    }
    if let Some(&first) = c.iter().find(|&&x| x != 0) {
        if first < 0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let kind = if !closed && c.iter().all(|&x| x == 0) {
        StationaryKind::Staircase
    } else if closed && c.iter().all(|&x| x == 1) {
        StationaryKind::WulffSquare
    } else {
        // unbounded chains end on a half-line, so drop it before matching blocks
        let body = if closed { &c[..] } else { &c[..n - 1] };
        if let Some(blocks) = matches_blocks(body, 3).filter(|&k| !closed || k % 2 == 0) {
            StationaryKind::RightAngleChain {
                m: if closed { blocks / 2 } else { blocks },
            }
        } else if let Some(blocks) = matches_blocks(body, 4).filter(|&k| !closed || k % 2 == 0) {
            StationaryKind::DoubleRightAngleChain {
                m: if closed { blocks / 2 } else { blocks },
                a: lengths[1],
                b: lengths[3],
            }
        } else {
            StationaryKind::Unclassified
        }
    };
    Ok(StationaryClass { kind, closed })
}
