//! Computational substrate shared by the metric engines and the
//! tracking pipeline: sparse co-occurrence counting and exact
//! assignment solving.

pub mod assignment;
pub mod cooccur;

pub use assignment::{solve_assignment, Assignment};
pub use cooccur::{accumulate_tube, cooccurrence, iou, CooccurrenceTable};
