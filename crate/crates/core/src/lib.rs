//! Biclustered matrix completion: fill in a partially observed matrix by
//! smoothing it along row and column similarity graphs, and choose the two
//! smoothing strengths by minimizing an information criterion.

pub mod completion;
pub mod dense;
pub mod error;
pub mod graph;
pub mod io;
pub mod cli;
pub mod linalg;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod solver;
pub mod system;

pub use dense::Matrix;
pub use error::{Error, Result};
pub use graph::{ComponentPartition, LaplacianMatrix, WeightedGraph};
pub use system::{Mask, ObservedMatrix, PenaltyParams, SystemOperator};
