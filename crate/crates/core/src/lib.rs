//! Piecewise-linear isometric embeddings of Euclidean polyhedra.
//!
//! The crate works with finite metric simplicial complexes whose simplices are
//! flat, and with maps into `R^N` that are linear on some triangulation. It can
//! certify shortness through Gram forms, push vertex images into general
//! position while staying short, estimate pullback metrics on sample graphs,
//! fold graph maps into exact path isometries, and run the two embedding
//! constructions (split local-embedding + fold, and the alternating
//! contract/perturb/fold sequence) for one-dimensional complexes.

pub mod complex;
pub mod error;
pub mod fold;
pub mod form;
pub mod genpos;
pub mod intersect;
pub mod io;
pub mod pipeline;
pub mod plmap;
pub mod pullback;
pub mod schedule;

pub use complex::{BarycentricPoint, ShellIndex, Simplex, SimplicialComplex, SubComplex, ValidationReport};
pub use error::{Error, Result};
pub use form::QuadraticForm;
pub use plmap::PLMap;
pub use schedule::EpsSchedule;
