//! Numerical laboratory for sample-and-query (SQ) access.
//!
//! The crate bundles
//!
//! * [`oracle`]: SQ access over dense and implicit exponential-size vectors,
//!   with capability gating and exact call accounting;
//! * [`instances`]: the minus-sign, real-vector-search and unnormalized
//!   minus-sign problem families, plus Haar sampling;
//! * [`learners`]: constant-query classical solvers and the sample-only
//!   baseline;
//! * [`discrimination`]: density operators, trace norms and Helstrom
//!   discrimination;
//! * [`moments`]: exact Haar moment operators over the real and complex
//!   spheres in the symmetric-subspace basis;
//! * [`circuit`]: a small statevector simulator for the strong-simulation
//!   identity and the encoding comparison;
//! * [`experiment`]: seeded sweeps and CSV / JSON-lines output.

pub mod circuit;
pub mod discrimination;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod learners;
pub mod linalg;
pub mod moments;
pub mod oracle;
pub mod seed;
pub mod stats;
pub mod vector_io;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use oracle::{Capabilities, Capability, DenseVector, ImplicitKind, ImplicitVector, OracleStats, SqHandle};
