//! Numerical toolkit for smoothness analysis on finite metric measure spaces.
//!
//! The crate realises, on finite discretisations of metric measure spaces,
//! the standard machinery of Besov and potential spaces:
//!
//! * [`space`] — point clouds with a metric, weights, exact ball queries,
//!   scaling-exponent estimation, and subset embeddings carrying their own
//!   measure;
//! * [`generators`] — reference geometries (grids, Sierpinski-gasket
//!   prefractals and their dilates, Cantor sets, products);
//! * [`besov`] — the integrated modulus of continuity and Besov norms built
//!   from it, with dyadic and quadrature discretisations that validate each
//!   other;
//! * [`whitney`] — disjoint-ball covers of the complement of a closed subset
//!   together with subordinate Lipschitz partitions of unity, all geometric
//!   conclusions re-verified exhaustively at construction time;
//! * [`trace`] — the averaging extension operator built on a Whitney cover,
//!   restriction by Lebesgue averages, and harnesses measuring operator
//!   norms across refinement levels;
//! * [`aoi`] — symmetric Markov averaging kernels at every scale, their
//!   derived band-pass operators, Bessel-type potential kernels, fractional
//!   derivatives, and the empirical checks of their size and smoothness
//!   bounds;
//! * [`interp`] — K- and J-functionals, real-interpolation norms, a
//!   calibrated band-pass decomposition, and harnesses comparing Besov norms
//!   against interpolation norms between potential spaces.
//!
//! Everything is deterministic: randomised sweeps draw from seeded
//! generators, iteration orders are fixed, and repeated runs produce
//! identical bytes.  All operations are pure; nothing mutates a space after
//! construction.
//!
//! Infinite-volume model spaces are represented by finite truncations; every
//! report that depends on large-scale structure records the truncation
//! diameter alongside its results.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod aoi;
pub mod besov;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod generators;
pub mod interp;
pub mod io;
pub mod quad;
pub mod space;
pub mod trace;
pub mod whitney;

pub use error::{Error, Result};
