//! Brute-force cross-checks on small discrete instances.

pub mod concave;
pub mod hull;
pub mod polytope;
pub mod simplex;

pub use concave::{direct_concave_max, ConcaveMax};
pub use hull::{hull_membership, HULL_TOL};
pub use polytope::{submeasure_lp, CouplingPolytope};
