//! Numerical toolkit for compressing collective quantum measurements.
//!
//! The library is organized in layers:
//!
//! * [`linalg`] — dense complex-matrix substrate: Hermitian eigendecomposition
//!   with a deterministic eigenbasis convention, operator square roots and
//!   pseudo-inverse square roots, tensor products, partial traces, norms, and
//!   Löwner-order checks.
//! * [`quantum`] — states, ensembles, POVMs, entropies, the canonical
//!   ensemble / pretty-good-measurement duality, and post-measurement
//!   analysis of Kraus instruments.
//! * [`typicality`] — frequency-typical projectors, conditional typical
//!   projectors, and typical sequence sets with their quantitative bounds.
//! * [`pipeline`] — marginal POVMs, the closeness conditions C0–C5, and the
//!   staged sub-POVM construction a^{⊗l} → B → C → D → E → A with seeded
//!   random selection and remainder distribution.
//! * [`bounds`] — entropy-inequality checkers, the outcome-count lower
//!   bound, an operator large-deviation Monte Carlo, and the Holevo-bound
//!   apparatus built on dual (ensemble, measurement) triples.
//! * [`io`] — JSON interchange schemas and CSV report formatting used by the
//!   command-line harness.
//!
//! All logarithms and exponentials are base 2; entropies are in bits.

pub mod bounds;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod quantum;
pub mod tol;
pub mod typicality;

pub use bounds::{ChainReport, ChernoffReport, HolevoCheck, Triple};
pub use error::{Error, Result};
pub use io::ExperimentConfig;
pub use linalg::{CMatrix, Spectrum};
pub use pipeline::{CompressionConfig, CompressionResult, SourceData};
pub use quantum::{DensityMatrix, Ensemble, FidelityMatrix, KrausInstrument, Povm, SubPovm};
