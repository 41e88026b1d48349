//! Crystalline elastic flow of admissible polygonal curves.
//!
//! Curves are polygons whose edges are parallel to facets of a polygonal Wulff shape.
//! The flow moves every segment along its normal; the state is the vector of signed
//! heights relative to a reference curve.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod anisotropy;
pub mod curve;
pub mod energy;
pub mod flow;

pub use anisotropy::{Anisotropy, AnisotropyError, Facet};
pub use curve::{AdmissibleCurve, CurveError, HeightVector, Segment, Topology};
pub use energy::{EnergyError, FlowParams};

pub type Vec2 = nalgebra::Vector2<f64>;
