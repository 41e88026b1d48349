//! Admissible polygonal curves, their combinatorics, and parallel displacement by signed heights.

use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anisotropy::{clockwise_angle, cross, rot_ccw, Anisotropy};
use crate::Vec2;

/// Angle tolerance when matching a segment normal to a facet normal.
pub const NORMAL_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("bad topology: {0}")]
    BadTopology(String),
    #[error("segment {0} is degenerate")]
    DegenerateSegment(usize),
    #[error("segment {segment} is not admissible: {reason}")]
    NotAdmissible { segment: usize, reason: String },
    #[error("segment {segment} collapsed to length {length}")]
    SegmentCollapse { segment: usize, length: f64 },
    #[error("expected {expected} heights, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("half-line {0} must have zero height")]
    HalfLineHeight(usize),
    #[error("segment index {index} out of range for {count} segments")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("operation needs a closed curve")]
    NotClosed,
    #[error("curves are not parallel")]
    NotParallel,
    #[error("walk does not close up (gap {0})")]
    OpenWalk(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Closed,
    /// First and last segments are half-lines.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub facet: usize,
    pub normal: Vec2,
    /// Euclidean length, infinite for half-lines.
    pub length: f64,
    /// Value of `<x, normal>` for every point `x` of the segment.
    pub offset: f64,
    pub transition: i8,
}

/// Signed heights, one per segment, zero on half-lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightVector(Vec<f64>);

impl HeightVector {
    pub fn zeros(curve: &AdmissibleCurve) -> Self {
        Self(vec![0.0; curve.len()])
    }

    pub fn new(curve: &AdmissibleCurve, values: Vec<f64>) -> Result<Self, CurveError> {
        curve.check_heights(&values)?;
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for HeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Polygonal curve whose consecutive segments lie on adjacent facets of the Wulff shape.
///
/// Junction `j` sits between segments `j - 1` and `j`; for closed curves indices wrap,
/// for unbounded curves junctions `0` and `n` are the ends at infinity.
#[derive(Debug, Clone)]
pub struct AdmissibleCurve {
    anisotropy: Arc<Anisotropy>,
    topology: Topology,
    segments: Vec<Segment>,
    junctions: Vec<Vec2>,
    turns: Vec<i8>,
    theta: Vec<f64>,
}

fn intersect(n1: &Vec2, p1: f64, n2: &Vec2, p2: f64) -> Vec2 {
    let det = cross(n1, n2);
    Vec2::new((p1 * n2.y - p2 * n1.y) / det, (n1.x * p2 - n2.x * p1) / det)
}

impl AdmissibleCurve {
    /// Builds a curve from its vertices.
    ///
    /// Closed curves list every vertex once, segment `i` running from vertex `i` to `i + 1`.
    /// Unbounded curves list the interior vertices; `rays` gives the direction of each
    /// half-line pointing away from its base vertex, first half-line first.
    pub fn from_vertices(
        anisotropy: Arc<Anisotropy>,
        topology: Topology,
        vertices: &[Vec2],
        rays: Option<[Vec2; 2]>,
    ) -> Result<Self, CurveError> {
        let mut dirs: Vec<(Vec2, Vec2)> = Vec::new();
        match topology {
            Topology::Closed => {
                if rays.is_some() {
                    return Err(CurveError::BadTopology("closed curve with rays".into()));
                }
                let m = vertices.len();
                if m < 3 {
                    return Err(CurveError::BadTopology(format!(
                        "closed curve needs 3 vertices, got {m}"
                    )));
                }
                for i in 0..m {
                    let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                    dirs.push((b - a, (a + b) / 2.0));
                }
            }
            Topology::Unbounded => {
                let [first, last] =
                    rays.ok_or_else(|| CurveError::BadTopology("unbounded curve without rays".into()))?;
                let m = vertices.len();
                if m < 1 {
                    return Err(CurveError::BadTopology("unbounded curve needs a vertex".into()));
                }
                dirs.push((-first, vertices[0]));
                for i in 0..m - 1 {
                    let (a, b) = (vertices[i], vertices[i + 1]);
                    dirs.push((b - a, (a + b) / 2.0));
                }
                dirs.push((last, vertices[m - 1]));
            }
        }

        let scale = vertices
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(dirs.iter().map(|d| d.0.norm()).fold(0.0, f64::max));
        let mut facets = Vec::with_capacity(dirs.len());
        let mut offsets = Vec::with_capacity(dirs.len());
        for (i, (d, anchor)) in dirs.iter().enumerate() {
            if d.norm() <= 1e-12 * scale {
                return Err(CurveError::DegenerateSegment(i));
            }
            let normal = rot_ccw(d);
            let f = anisotropy
                .match_normal(&normal, NORMAL_MATCH_TOL)
                .ok_or_else(|| CurveError::NotAdmissible {
                    segment: i,
                    reason: "normal matches no facet".into(),
                })?;
            facets.push(f);
            offsets.push(anchor.dot(&anisotropy.facets()[f].normal));
        }
        Self::from_lines(anisotropy, topology, &facets, &offsets, 0.0)
    }

    /// Builds a curve from the facet and line offset of every segment.
    ///
    /// Fails with `SegmentCollapse` when a bounded segment is not longer than `floor`.
    pub fn from_lines(
        anisotropy: Arc<Anisotropy>,
        topology: Topology,
        facets: &[usize],
        offsets: &[f64],
        floor: f64,
    ) -> Result<Self, CurveError> {
        let n = facets.len();
        if offsets.len() != n {
            return Err(CurveError::DimensionMismatch {
                expected: n,
                got: offsets.len(),
            });
        }
        match topology {
            Topology::Closed if n < 3 => {
                return Err(CurveError::BadTopology(format!(
                    "closed curve needs 3 segments, got {n}"
                )))
            }
            Topology::Unbounded if n < 2 => {
                return Err(CurveError::BadTopology(format!(
                    "unbounded curve needs 2 segments, got {n}"
                )))
            }
            _ => {}
        }
        if let Some(&f) = facets.iter().find(|&&f| f >= anisotropy.facet_count()) {
            return Err(CurveError::NotAdmissible {
                segment: f,
                reason: "facet index out of range".into(),
            });
        }
        let closed = topology == Topology::Closed;

        let mut turns = vec![0i8; n + 1];
        let mut theta = vec![0.0; n + 1];
        for j in 0..=n {
            if !closed && (j == 0 || j == n) {
                continue;
            }
            let (a, b) = (facets[(j + n - 1) % n], facets[j % n]);
            if a == b {
                return Err(CurveError::DegenerateSegment(j % n));
            }
            let s = anisotropy.step(a, b).ok_or_else(|| CurveError::NotAdmissible {
                segment: j % n,
                reason: format!("facets {a} and {b} are not adjacent"),
            })?;
            turns[j] = s;
            theta[j] = anisotropy.junction_angle(a, b).expect("adjacent facets");
        }

        let fs = anisotropy.facets();
        let mut junctions = vec![Vec2::zeros(); n + 1];
        for j in 0..=n {
            if turns[j] != 0 {
                let (a, b) = ((j + n - 1) % n, j % n);
                junctions[j] = intersect(&fs[facets[a]].normal, offsets[a], &fs[facets[b]].normal, offsets[b]);
            }
        }
        if closed {
            junctions[n] = junctions[0];
        }

        let mut segments = Vec::with_capacity(n);
        for i in 0..n {
            let f = &fs[facets[i]];
            let bounded = closed || (i > 0 && i + 1 < n);
            let length = if bounded {
                let l = (junctions[i + 1] - junctions[i]).dot(&anisotropy.tangent(facets[i]));
                if l <= floor {
                    return Err(CurveError::SegmentCollapse { segment: i, length: l });
                }
                l
            } else {
                f64::INFINITY
            };
            let transition = if turns[i] != 0 && turns[i] == turns[i + 1] {
                turns[i]
            } else {
                0
            };
            segments.push(Segment {
                facet: facets[i],
                normal: f.normal,
                length,
                offset: offsets[i],
                transition,
            });
        }

        Ok(Self {
            anisotropy,
            topology,
            segments,
            junctions,
            turns,
            theta,
        })
    }

    /// Builds a curve by walking along facet tangents from `start`.
    ///
    /// For closed curves `lengths` has one entry per segment and the walk must return to
    /// `start`. For unbounded curves `lengths` covers the bounded segments only and `start`
    /// is the base vertex of the first half-line.
    pub fn from_walk(
        anisotropy: Arc<Anisotropy>,
        topology: Topology,
        facets: &[usize],
        lengths: &[f64],
        start: Vec2,
    ) -> Result<Self, CurveError> {
        let n = facets.len();
        let bounded: Vec<usize> = match topology {
            Topology::Closed => (0..n).collect(),
            Topology::Unbounded => (1..n.saturating_sub(1)).collect(),
        };
        if lengths.len() != bounded.len() {
            return Err(CurveError::DimensionMismatch {
                expected: bounded.len(),
                got: lengths.len(),
            });
        }
        if let Some(&f) = facets.iter().find(|&&f| f >= anisotropy.facet_count()) {
            return Err(CurveError::NotAdmissible {
                segment: f,
                reason: "facet index out of range".into(),
            });
        }
        let mut pts = vec![start];
        for (&i, &l) in bounded.iter().zip(lengths) {
            let last = *pts.last().unwrap();
            pts.push(last + l * anisotropy.tangent(facets[i]));
        }
        match topology {
            Topology::Closed => {
                let gap = (pts[n] - start).norm();
                let total: f64 = lengths.iter().sum();
                if gap > 1e-9 * total.max(1.0) {
                    return Err(CurveError::OpenWalk(gap));
                }
                pts.pop();
                Self::from_vertices(anisotropy, topology, &pts, None)
            }
            Topology::Unbounded => {
                if n < 2 {
                    return Err(CurveError::BadTopology("unbounded curve needs 2 segments".into()));
                }
                let rays = [-anisotropy.tangent(facets[0]), anisotropy.tangent(facets[n - 1])];
                Self::from_vertices(anisotropy, topology, &pts, Some(rays))
            }
        }
    }

    pub fn anisotropy(&self) -> &Arc<Anisotropy> {
        &self.anisotropy
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_closed(&self) -> bool {
        self.topology == Topology::Closed
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> Result<&Segment, CurveError> {
        self.segments.get(i).ok_or(CurveError::IndexOutOfRange {
            index: i,
            count: self.segments.len(),
        })
    }

    pub fn facets(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.facet).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.offset).collect()
    }

    pub fn is_bounded(&self, i: usize) -> bool {
        self.is_closed() || (i > 0 && i + 1 < self.len())
    }

    /// Indices of the bounded segments.
    pub fn bounded(&self) -> std::ops::Range<usize> {
        if self.is_closed() {
            0..self.len()
        } else {
            1..self.len() - 1
        }
    }

    /// Finite vertices in traversal order.
    pub fn vertices(&self) -> Vec<Vec2> {
        let n = self.len();
        if self.is_closed() {
            self.junctions[..n].to_vec()
        } else {
            self.junctions[1..n].to_vec()
        }
    }

    /// Start point of segment `i` (the base vertex for the last half-line).
    pub fn junction(&self, j: usize) -> Option<Vec2> {
        (self.turns.get(j).copied().unwrap_or(0) != 0).then(|| self.junctions[j])
    }

    /// Directions of the two half-lines, pointing away from their base vertices.
    pub fn rays(&self) -> Option<[Vec2; 2]> {
        if self.is_closed() {
            return None;
        }
        let n = self.len();
        let a = &self.anisotropy;
        Some([
            -a.tangent(self.segments[0].facet),
            a.tangent(self.segments[n - 1].facet),
        ])
    }

    /// Angle at junction `j`, in (0, 2pi) minus pi; zero at the ends of unbounded curves.
    pub fn theta(&self, j: usize) -> f64 {
        self.theta[j]
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    /// Facet step at junction `j`: `+1` when the normal turns clockwise, `-1` otherwise.
    pub fn turn(&self, j: usize) -> i8 {
        self.turns[j]
    }

    pub fn transition_number(&self, i: usize) -> Result<i8, CurveError> {
        Ok(self.segment(i)?.transition)
    }

    pub fn transitions(&self) -> Vec<i8> {
        self.segments.iter().map(|s| s.transition).collect()
    }

    pub fn crystalline_curvature(&self, i: usize) -> Result<f64, CurveError> {
        let s = self.segment(i)?;
        if s.transition == 0 || !self.is_bounded(i) {
            return Ok(0.0);
        }
        Ok(s.transition as f64 * self.anisotropy.facets()[s.facet].length / s.length)
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.length).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.bounded().map(|i| self.segments[i].length).sum()
    }

    pub(crate) fn check_heights(&self, h: &[f64]) -> Result<(), CurveError> {
        if h.len() != self.len() {
            return Err(CurveError::DimensionMismatch {
                expected: self.len(),
                got: h.len(),
            });
        }
        if !self.is_closed() {
            for i in [0, self.len() - 1] {
                if h[i] != 0.0 {
                    return Err(CurveError::HalfLineHeight(i));
                }
            }
        }
        Ok(())
    }

    /// Lengths of the parallel curve at heights `h`; half-lines stay infinite.
    ///
    /// Values are not checked for positivity.
    pub fn lengths_from_heights(&self, h: &[f64]) -> Result<Vec<f64>, CurveError> {
        self.check_heights(h)?;
        let n = self.len();
        let mut out = self.lengths();
        for i in self.bounded() {
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            let (t0, t1) = (self.theta[i], self.theta[i + 1]);
            let shift = h[prev] / t0.sin() + h[i] * (1.0 / t0.tan() + 1.0 / t1.tan()) + h[next] / t1.sin();
            out[i] -= shift;
        }
        Ok(out)
    }

    /// Parallel curve at heights `h`, rejecting bounded lengths at or below `floor`.
    pub fn reconstruct_with_floor(&self, h: &[f64], floor: f64) -> Result<Self, CurveError> {
        self.check_heights(h)?;
        let offsets: Vec<f64> = self.segments.iter().zip(h).map(|(s, d)| s.offset + d).collect();
        Self::from_lines(self.anisotropy.clone(), self.topology, &self.facets(), &offsets, floor)
    }

    /// Parallel curve at heights `h` with the default collapse floor.
    pub fn reconstruct_parallel(&self, h: &[f64]) -> Result<Self, CurveError> {
        self.reconstruct_with_floor(h, self.length_floor())
    }

    /// Lengths at or below this count as collapsed.
    pub fn length_floor(&self) -> f64 {
        1e-12 * self.total_length()
    }

    pub fn is_parallel_to(&self, other: &Self) -> bool {
        self.topology == other.topology
            && self.len() == other.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.facet == b.facet)
    }

    /// Signed heights of `other` measured from `self`.
    pub fn heights_to(&self, other: &Self) -> Result<Vec<f64>, CurveError> {
        if !self.is_parallel_to(other) {
            return Err(CurveError::NotParallel);
        }
        Ok(self
            .segments
            .iter()
            .zip(&other.segments)
            .enumerate()
            .map(|(i, (a, b))| if self.is_bounded(i) { b.offset - a.offset } else { 0.0 })
            .collect())
    }

    /// Number of turns of the normal around the Wulff shape.
    pub fn curve_index(&self) -> Result<i64, CurveError> {
        if !self.is_closed() {
            return Err(CurveError::NotClosed);
        }
        let net: i64 = self.turns[..self.len()].iter().map(|&t| t as i64).sum();
        Ok(net / self.anisotropy.facet_count() as i64)
    }

    pub fn is_convex(&self) -> bool {
        let mut cs = self.bounded().map(|i| self.segments[i].transition);
        match cs.next() {
            Some(first) if first != 0 => cs.all(|c| c == first),
            _ => false,
        }
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> Result<Self, CurveError> {
        let a = &self.anisotropy;
        let n = self.len();
        let mut facets = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for s in self.segments.iter().rev() {
            let f = a
                .match_normal(&(-s.normal), NORMAL_MATCH_TOL)
                .ok_or_else(|| CurveError::NotAdmissible {
                    segment: s.facet,
                    reason: "Wulff shape is not centrally symmetric".into(),
                })?;
            facets.push(f);
            offsets.push(-s.offset);
        }
        Self::from_lines(a.clone(), self.topology, &facets, &offsets, 0.0)
    }

    /// Curve shifted by `v`.
    pub fn translated(&self, v: &Vec2) -> Self {
        let offsets: Vec<f64> = self.segments.iter().map(|s| s.offset + s.normal.dot(v)).collect();
        Self::from_lines(
            self.anisotropy.clone(),
            self.topology,
            &self.facets(),
            &offsets,
            f64::NEG_INFINITY,
        )
        .expect("translation preserves admissibility")
    }

    /// Cyclic relabelling so that segment `k` comes first.
    pub fn rotated_start(&self, k: usize) -> Result<Self, CurveError> {
        if !self.is_closed() {
            return Err(CurveError::NotClosed);
        }
        let n = self.len();
        let facets: Vec<usize> = (0..n).map(|i| self.segments[(i + k) % n].facet).collect();
        let offsets: Vec<f64> = (0..n).map(|i| self.segments[(i + k) % n].offset).collect();
        Self::from_lines(self.anisotropy.clone(), self.topology, &facets, &offsets, 0.0)
    }

    /// Vertices as a polyline; half-lines are cut at distance `ray_length` from their base.
    pub fn polyline(&self, ray_length: f64) -> Vec<Vec2> {
        let mut pts = self.vertices();
        if let Some([first, last]) = self.rays() {
            let (a, b) = (pts[0] + ray_length * first, pts[pts.len() - 1] + ray_length * last);
            pts.insert(0, a);
            pts.push(b);
        } else if let Some(&p) = pts.first() {
            pts.push(p);
        }
        pts
    }

    /// Diameter of the finite vertex set.
    pub fn diameter(&self) -> f64 {
        let v = self.vertices();
        v.iter()
            .flat_map(|p| v.iter().map(move |q| (p - q).norm()))
            .fold(0.0, f64::max)
    }

    /// Signed clockwise rotation from the normal of segment `i - 1` to that of segment `i`.
    pub fn normal_rotation(&self, j: usize) -> f64 {
        let n = self.len();
        clockwise_angle(&self.segments[(j + n - 1) % n].normal, &self.segments[j % n].normal)
    }
}
