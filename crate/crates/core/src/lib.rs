//! Centro-affine invariants of smooth convex bodies.
//!
//! Bodies are described by support functions on S¹ or S². Everything else
//! (curvatures, cone measures, p-affine surface areas, polar bodies and the
//! inequality checks built on them) is computed by quadrature and spectral
//! differentiation on a [`sphere::Grid`].

pub mod body;
pub mod error;
pub mod families;
pub mod flowcheck;
pub mod geometry;
pub mod invariants;
pub mod optimize;
pub mod sphere;
pub mod suite;

pub use error::{Error, Result};
