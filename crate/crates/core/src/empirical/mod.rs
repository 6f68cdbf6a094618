//! Weighted empirical measures, reference laws on ℝ, W₁ distances and
//! cross-replication statistics.

pub mod law;
pub mod measure;
pub mod stats;
pub mod wasserstein;

pub use law::AnalyticLaw1D;
pub use measure::{WeightSource, WeightedEmpiricalMeasure};
pub use stats::{merge_statistics, SummaryStats};
pub use wasserstein::{wasserstein1_atoms_to_law, wasserstein1_discrete};
