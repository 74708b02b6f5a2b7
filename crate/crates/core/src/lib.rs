//! Sandpile groups and p-ranks of random bipartite graphs.
//!
//! The crate is layered bottom-up:
//!
//! - [`gfp`]: dense linear algebra over `Z/pZ` (rank, corank, Schur complements).
//! - [`bigraph`]: the random bipartite model `G(n, alpha, q)` and its Laplacians.
//! - [`sandpile`]: Smith normal form, invariant factors, p-ranks, spanning trees.
//! - [`theory`]: exact binomial machinery and the predicted p-rank law.
//! - [`reduction`]: the truncated Laplacian `Delta_1`, the matrix `M` and the
//!   Schur-complement corank pipeline.
//! - [`harness`]: seeded Monte Carlo experiments and comparison statistics.
//! - [`oracle`]: brute-force reference computations used for verification.

pub mod bigraph;
pub mod gfp;
pub mod harness;
pub mod integer;
pub mod oracle;
pub mod reduction;
pub mod sandpile;
mod snf;
pub mod theory;
