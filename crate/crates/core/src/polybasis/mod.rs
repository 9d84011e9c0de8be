//! Reference-element quadrature and polynomial bases.

pub mod basis;
pub mod h1;
pub mod hdiv;
pub mod poly;
pub mod quadrature;

pub use basis::{FacetProjector, ScalarBasis};
pub use h1::{build_h1_hierarchical, H1Entity, H1HierBasis};
pub use hdiv::{build_hdiv_basis, HdivBasis, HdivFamily};
pub use quadrature::{simplex_quadrature, QuadratureRule};
