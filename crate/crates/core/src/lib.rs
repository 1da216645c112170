//! Solvers and optimality certificates for extremal affine positions of
//! log-concave functions.
//!
//! A *position* of a function `g` on `R^d` is an affine image with height
//! scaling, `h(x) = alpha * g(A^-1 (x - a))`. Given a second function `f`,
//! the library computes
//!
//! * the largest `s`-integral position of `g` below `f` (the John
//!   `s`-problem), and
//! * the smallest `s`-integral position of `g` above `f` (the Löwner
//!   `s`-problem),
//!
//! as convex semi-infinite programs solved by a cutting-plane exchange
//! method, and then verifies (or refutes) optimality through contact-pair
//! certificates: weighted families of touching points and lifting normals
//! that must reproduce the identity operator, the scalar `s`, and a zero
//! translation. When no certificate exists the library produces a
//! separating direction and an explicit ascent step that improves the
//! position.
//!
//! Modules mirror the pipeline:
//!
//! * [`model`] — representations and numeric oracles of the supported
//!   log-concave function classes, envelopes, assumption checks;
//! * [`polar`] — Legendre transform / log-conjugate machinery;
//! * [`contact`] — lifting normal cones, contact pairs, extended operators;
//! * [`positions`] — the group action, closed-form `s`-integrals,
//!   feasibility margins, interpolation and perturbation;
//! * [`solver`] — the cutting-plane John and Löwner solvers;
//! * [`certificate`] — contact extraction, weight recovery, separation,
//!   power transforms and the classical (indicator) reduction.

pub mod certificate;
pub mod contact;
pub mod envelope;
pub mod error;
pub mod extreal;
pub mod geom;
pub mod model;
pub mod nnls;
pub mod oracle;
pub mod polar;
pub mod positions;
pub mod quad;
pub mod search;
pub mod solver;
pub mod subproblem;

pub use error::Error;
pub use extreal::ExtReal;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
