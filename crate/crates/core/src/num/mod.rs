//! Probability vectors, Shannon entropy, densities of integer sets, and the
//! quantitative entropy bounds used by the rest of the crate.
//!
//! Entropies are in nats throughout.

mod density;
mod intersect;
mod prob;
mod uniformity;

pub use density::{default_checkpoints, density_estimate, DensityEstimate, FiniteTimeSet};
pub use intersect::{best_k_intersection, FiniteSpace, IntersectionChoice, EXHAUSTIVE_LIMIT};
pub use prob::{entropy_of, entropy_term, shannon_entropy, ProbVector, PROB_TOL};
pub use uniformity::uniformity_bound;
