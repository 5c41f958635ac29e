//! Desk-scale coarse geometry of finitely generated groups and finite metric
//! spaces: word metrics and growth, Rips 2-complexes with loop certificates,
//! metric lattices, Følner probes, bounded presentations and splitting
//! classifiers for semidirect products.

pub mod groups;
pub mod growth;
pub mod metric;
pub mod numeric;
pub mod rips;
pub mod splitting;

pub use metric::{FiniteMetricSpace, MapSample, MetricError};
pub use numeric::{Real, TOLERANCE};
