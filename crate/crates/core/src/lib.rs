//! Numerical toolkit for polynomial diffeomorphisms of the plane: periodic
//! orbit census, Green's functions, invariant manifold charts and tangency
//! detection, combined into a maximal-entropy / hyperbolicity verdict.

pub mod app;
pub mod greens;
pub mod manifold;
pub mod map;
pub mod periodic;
pub mod render;
pub mod scalar;
pub mod tangency;
pub mod verify;

