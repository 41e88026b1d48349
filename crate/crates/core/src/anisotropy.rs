//! Crystalline anisotropies given by a convex polygonal Wulff shape.

use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnisotropyError {
    #[error("Wulff shape needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("Wulff shape is not strictly convex at vertex {0}")]
    NonConvexWulff(usize),
    #[error("origin is not strictly inside the Wulff shape (facet {0})")]
    OriginOutside(usize),
    #[error("degenerate facet at vertex {0}")]
    DegenerateFacet(usize),
    #[error("facet index {index} out of range for {count} facets")]
    IndexOutOfRange { index: usize, count: usize },
}

/// One edge of the Wulff polygon, from vertex `j` to vertex `j + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Facet {
    /// Outward unit normal.
    pub normal: Vec2,
    /// Euclidean length of the facet.
    pub length: f64,
    /// Distance from the origin to the facet line, i.e. the dual gauge at `normal`.
    pub support: f64,
    /// Clockwise rotation from this normal to the next facet's normal, in (0, pi).
    pub turn_to_next: f64,
}

/// Convex polygonal Wulff shape, stored clockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anisotropy {
    vertices: Vec<Vec2>,
    facets: Vec<Facet>,
    #[serde(skip)]
    vertex_angles: Vec<f64>,
}

pub(crate) fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counterclockwise quarter turn.
pub(crate) fn rot_ccw(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Clockwise quarter turn.
pub(crate) fn rot_cw(v: &Vec2) -> Vec2 {
    Vec2::new(v.y, -v.x)
}

/// Signed clockwise angle from `a` to `b`, in (-pi, pi].
pub(crate) fn clockwise_angle(a: &Vec2, b: &Vec2) -> f64 {
    (-cross(a, b)).atan2(a.dot(b))
}

impl Anisotropy {
    /// Builds the anisotropy from the Wulff polygon's vertices in either orientation.
    pub fn from_vertices(points: &[Vec2]) -> Result<Self, AnisotropyError> {
        let diameter = points
            .iter()
            .flat_map(|p| points.iter().map(move |q| (p - q).norm()))
            .fold(0.0, f64::max);
        let merge_tol = 1e-12 * diameter;
        let mut vertices: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if vertices.last().is_none_or(|q| (p - q).norm() > merge_tol) {
                vertices.push(*p);
            }
        }
        while vertices.len() > 1 && (vertices[0] - vertices[vertices.len() - 1]).norm() <= merge_tol {
            vertices.pop();
        }
        let n = vertices.len();
        if n < 3 {
            return Err(AnisotropyError::TooFewVertices(n));
        }

        let area2: f64 = (0..n).map(|i| cross(&vertices[i], &vertices[(i + 1) % n])).sum();
        if area2 > 0.0 {
            vertices.reverse();
        }

        let mut facets = Vec::with_capacity(n);
        for j in 0..n {
            let edge = vertices[(j + 1) % n] - vertices[j];
            let length = edge.norm();
            let normal = rot_ccw(&edge) / length;
            facets.push(Facet {
                normal,
                length,
                support: vertices[j].dot(&normal),
                turn_to_next: 0.0,
            });
        }

        let mut total_turn = 0.0;
        for j in 0..n {
            let k = (j + 1) % n;
            let e1 = vertices[k] - vertices[j];
            let e2 = vertices[(k + 1) % n] - vertices[k];
            let c = cross(&e1, &e2);
            if c.abs() <= 1e-12 * e1.norm() * e2.norm() {
                return Err(AnisotropyError::DegenerateFacet(k));
            }
            if c > 0.0 {
                return Err(AnisotropyError::NonConvexWulff(k));
            }
            let turn = clockwise_angle(&facets[j].normal, &facets[k].normal);
            facets[j].turn_to_next = turn;
            total_turn += turn;
        }
        // A star polygon turns right everywhere but winds more than once.
        if (total_turn - TAU).abs() > 1e-9 {
            return Err(AnisotropyError::NonConvexWulff(0));
        }
        if let Some(j) = facets.iter().position(|f| f.support <= 0.0) {
            return Err(AnisotropyError::OriginOutside(j));
        }

        let mut vertex_angles = Vec::with_capacity(n + 1);
        let mut angle = vertices[0].y.atan2(vertices[0].x);
        vertex_angles.push(angle);
        for j in 1..=n {
            let v = vertices[j % n];
            let gap = (angle - v.y.atan2(v.x)).rem_euclid(TAU);
            angle -= gap;
            vertex_angles.push(angle);
        }

        Ok(Self {
            vertices,
            facets,
            vertex_angles,
        })
    }

    /// The square `[-1, 1]^2`.
    pub fn square() -> Self {
        Self::from_vertices(&[
            Vec2::new(-1.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(-1.0, -1.0),
        ])
        .expect("square is a valid Wulff shape")
    }

    /// Regular polygon with `sides` vertices on the unit circle, one of them at `(0, 1)`.
    pub fn regular(sides: usize) -> Result<Self, AnisotropyError> {
        let pts: Vec<Vec2> = (0..sides)
            .map(|k| {
                let a = PI / 2.0 - TAU * k as f64 / sides as f64;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        Self::from_vertices(&pts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn facet(&self, j: usize) -> Result<&Facet, AnisotropyError> {
        self.facets.get(j).ok_or(AnisotropyError::IndexOutOfRange {
            index: j,
            count: self.facets.len(),
        })
    }

    /// Gauge whose unit ball is the Wulff shape.
    pub fn phi(&self, x: &Vec2) -> f64 {
        if x.x == 0.0 && x.y == 0.0 {
            return 0.0;
        }
        let a0 = self.vertex_angles[0];
        let ang = a0 - (a0 - x.y.atan2(x.x)).rem_euclid(TAU);
        let p = self.vertex_angles[1..].partition_point(|&a| a > ang);
        let j = p.min(self.facets.len() - 1);
        let f = &self.facets[j];
        x.dot(&f.normal) / f.support
    }

    /// Support function of the Wulff shape.
    pub fn phi_dual(&self, x: &Vec2) -> f64 {
        self.vertices.iter().map(|v| x.dot(v)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether facets `j` and `k` share a vertex.
    pub fn facets_adjacent(&self, j: usize, k: usize) -> Result<bool, AnisotropyError> {
        self.facet(j)?;
        self.facet(k)?;
        Ok(self.step(j, k).is_some())
    }

    /// `+1` when `k` follows `j` clockwise, `-1` when it precedes it, `None` otherwise.
    pub fn step(&self, j: usize, k: usize) -> Option<i8> {
        let n = self.facets.len();
        if k == (j + 1) % n {
            Some(1)
        } else if j == (k + 1) % n {
            Some(-1)
        } else {
            None
        }
    }

    /// Angle of a curve turning from a segment on facet `a` to one on facet `b`.
    ///
    /// Lies in (pi, 2pi) for a clockwise step and in (0, pi) for a counterclockwise one.
    pub fn junction_angle(&self, a: usize, b: usize) -> Option<f64> {
        let s = self.step(a, b)?;
        let psi = if s > 0 {
            self.facets[a].turn_to_next
        } else {
            self.facets[b].turn_to_next
        };
        Some(PI + s as f64 * psi)
    }

    /// Facet reached from `j` by one step in direction `dir` (+1 clockwise).
    pub fn neighbour(&self, j: usize, dir: i8) -> usize {
        let n = self.facets.len();
        (j + n).wrapping_add_signed(dir as isize) % n
    }

    /// Index of the facet whose normal is within `tol` radians of `normal`.
    pub fn match_normal(&self, normal: &Vec2, tol: f64) -> Option<usize> {
        let u = normal.normalize();
        self.facets
            .iter()
            .position(|f| clockwise_angle(&f.normal, &u).abs() < tol)
    }

    /// Unit tangent of facet `j` in clockwise traversal.
    pub fn tangent(&self, j: usize) -> Vec2 {
        rot_cw(&self.facets[j].normal)
    }

    /// Constants `(c, C)` with `c |x| <= phi(x) <= C |x|`.
    pub fn norm_bounds(&self) -> (f64, f64) {
        let outer = self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let inner = self.facets.iter().map(|f| f.support).fold(f64::INFINITY, f64::min);
        (1.0 / outer, 1.0 / inner)
    }

    pub fn diameter(&self) -> f64 {
        self.vertices
            .iter()
            .flat_map(|p| self.vertices.iter().map(move |q| (p - q).norm()))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> Anisotropy {
        Anisotropy::from_vertices(&[Vec2::new(-1.0, -1.0), Vec2::new(3.0, -0.5), Vec2::new(0.0, 2.0)]).unwrap()
    }

    #[test]
    fn square_facets() {
        let a = Anisotropy::square();
        assert_eq!(a.facet_count(), 4);
        for f in a.facets() {
            assert!((f.length - 2.0).abs() < 1e-15);
            assert!((f.support - 1.0).abs() < 1e-15);
            assert!((f.turn_to_next - PI / 2.0).abs() < 1e-15);
        }
        assert!((a.facets()[0].normal - Vec2::new(0.0, 1.0)).norm() < 1e-15);
        assert!((a.facets()[1].normal - Vec2::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn counterclockwise_input_is_reoriented() {
        let cw = Anisotropy::square();
        let ccw = Anisotropy::from_vertices(&[
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ])
        .unwrap();
        for f in ccw.facets() {
            assert!(cw.match_normal(&f.normal, 1e-12).is_some());
            assert!((f.support - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_supports_distinct() {
        let a = triangle();
        let s: Vec<f64> = a.facets().iter().map(|f| f.support).collect();
        assert!((s[0] - s[1]).abs() > 1e-3 && (s[1] - s[2]).abs() > 1e-3 && (s[0] - s[2]).abs() > 1e-3);
        // support is the distance from the origin to the facet line
        for (j, f) in a.facets().iter().enumerate() {
            let p = a.vertices()[j];
            let q = a.vertices()[(j + 1) % 3];
            let dist = cross(&(q - p), &(-p)).abs() / (q - p).norm();
            assert!((dist - f.support).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_polygons() {
        let collinear = [
            Vec2::new(-1.0, -1.0),
            Vec2::new(0.0, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(matches!(
            Anisotropy::from_vertices(&collinear),
            Err(AnisotropyError::DegenerateFacet(_))
        ));
        let dart = [
            Vec2::new(-1.0, -1.0),
            Vec2::new(0.0, 0.5),
            Vec2::new(1.0, -1.0),
            Vec2::new(0.0, 2.0),
        ];
        assert!(matches!(
            Anisotropy::from_vertices(&dart),
            Err(AnisotropyError::NonConvexWulff(_))
        ));
        let shifted = [Vec2::new(1.0, 1.0), Vec2::new(3.0, 1.0), Vec2::new(2.0, 3.0)];
        assert!(matches!(
            Anisotropy::from_vertices(&shifted),
            Err(AnisotropyError::OriginOutside(_))
        ));
        let pentagram: Vec<Vec2> = (0..5)
            .map(|k| {
                let a = PI / 2.0 - 2.0 * TAU * k as f64 / 5.0;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        assert!(Anisotropy::from_vertices(&pentagram).is_err());
        assert!(matches!(
            Anisotropy::from_vertices(&[Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]),
            Err(AnisotropyError::TooFewVertices(2))
        ));
    }

    #[test]
    fn near_duplicate_vertices_merge() {
        let a = Anisotropy::from_vertices(&[
            Vec2::new(-1.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 1.0 + 1e-14),
            Vec2::new(1.0, -1.0),
            Vec2::new(-1.0, -1.0),
            Vec2::new(-1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(a.facet_count(), 4);
    }

    #[test]
    fn gauge_values() {
        let a = Anisotropy::square();
        assert_eq!(a.phi(&Vec2::new(1.0, 0.0)), 1.0);
        assert_eq!(a.phi(&Vec2::zeros()), 0.0);
        assert!((a.phi(&Vec2::new(2.0, 2.0)) - 2.0).abs() < 1e-15);
        assert!((a.phi(&Vec2::new(-0.3, 0.7)) - 0.7).abs() < 1e-15);
        assert_eq!(a.phi_dual(&Vec2::new(1.0, 0.0)), 1.0);
        assert_eq!(a.phi_dual(&Vec2::zeros()), 0.0);
        assert_eq!(a.phi_dual(&Vec2::new(1.0, 1.0)), 2.0);
    }

    #[test]
    fn adjacency() {
        let a = Anisotropy::square();
        assert!(a.facets_adjacent(0, 1).unwrap());
        assert!(!a.facets_adjacent(0, 2).unwrap());
        assert!(a.facets_adjacent(0, 3).unwrap());
        assert!(matches!(
            a.facets_adjacent(0, 4),
            Err(AnisotropyError::IndexOutOfRange { index: 4, count: 4 })
        ));
        assert_eq!(a.neighbour(0, -1), 3);
        assert_eq!(a.neighbour(3, 1), 0);
    }

    #[test]
    fn facet_vertices_on_unit_level() {
        for a in [Anisotropy::square(), triangle(), Anisotropy::regular(7).unwrap()] {
            for v in a.vertices() {
                assert!((a.phi(v) - 1.0).abs() < 1e-12);
            }
            for (j, f) in a.facets().iter().enumerate() {
                assert!((a.phi_dual(&f.normal) - f.support).abs() < 1e-12);
                let mid = (a.vertices()[j] + a.vertices()[(j + 1) % a.facet_count()]) / 2.0;
                assert!((a.phi(&mid) - 1.0).abs() < 1e-12);
            }
        }
    }

    fn gauge_by_facets(a: &Anisotropy, x: &Vec2) -> f64 {
        a.facets()
            .iter()
            .map(|f| x.dot(&f.normal) / f.support)
            .fold(0.0, f64::max)
    }

    fn arb_aniso() -> impl Strategy<Value = Anisotropy> {
        prop_oneof![
            Just(Anisotropy::square()),
            (3usize..12).prop_map(|n| Anisotropy::regular(n).unwrap()),
            Just(triangle()),
        ]
    }

    proptest! {
        #[test]
        fn gauge_matches_facet_maximum(a in arb_aniso(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let v = Vec2::new(x, y);
            let phi = a.phi(&v);
            prop_assert!((phi - gauge_by_facets(&a, &v)).abs() <= 1e-12 * (1.0 + phi));
            let (lo, hi) = a.norm_bounds();
            prop_assert!(lo * v.norm() <= phi * (1.0 + 1e-12) + 1e-15);
            prop_assert!(phi <= hi * v.norm() * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn gauge_homogeneous(a in arb_aniso(), x in -5.0..5.0f64, y in -5.0..5.0f64, t in 0.0..10.0f64) {
            let v = Vec2::new(x, y);
            let lhs = a.phi(&(v * t));
            let rhs = t * a.phi(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn gauge_convex(a in arb_aniso(), p in prop::array::uniform4(-5.0..5.0f64)) {
            let x = Vec2::new(p[0], p[1]);
            let y = Vec2::new(p[2], p[3]);
            prop_assert!(a.phi(&((x + y) / 2.0)) <= (a.phi(&x) + a.phi(&y)) / 2.0 + 1e-12);
        }

        #[test]
        fn dual_is_vertex_maximum(a in arb_aniso(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let v = Vec2::new(x, y);
            let brute = a.vertices().iter().map(|w| v.dot(w)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(a.phi_dual(&v), brute);
        }
    }
}
