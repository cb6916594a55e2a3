//! Ad hoc retrieval with document subspaces and query density operators.
//!
//! Documents are represented by the subspace spanned by their fragment
//! vectors, queries by a density operator built from per-term densities, and
//! relevance is the trace probability `tr(ρ_q Ŝ_d)`. BM25 supplies the
//! candidate set that the trace score re-ranks.

pub mod corpus;
pub mod docspace;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod querydensity;
pub mod retrieval;
pub mod synth;
pub mod termdensity;

pub use error::{Error, Result};
