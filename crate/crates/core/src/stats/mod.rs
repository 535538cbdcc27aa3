//! Correlation, contingency and regression statistics.

mod chisq;
mod correlation;
mod grid;
mod ols;
pub mod special;
mod strategy;

use thiserror::Error;

pub use chisq::{chi_square, ChiSquareResult, ContingencyTable};
pub use correlation::{
    average_ranks, pearson, pearson_test, spearman, spearman_with, t_approximation_p, PValueMethod,
    RankCorrelation, MAX_EXACT_N,
};
pub use grid::{
    stars, trait_metric_table, GridCell, GridOptions, Metric, TraitMetricGrid, TraitObservation, GRID_STAR_LEVELS,
};
pub use ols::{ols_regress, RegressionResult};
pub use strategy::{frequency_filter, StrategyMap, BUNDLED_STRATEGY_MAP, OTHER_STRATEGY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("series is constant; correlation undefined")]
    ConstantSeries,
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("exact permutation test limited to n <= {MAX_EXACT_N}, got {0}")]
    TooLargeForExact(usize),
    #[error("contingency table must be at least 2x2, got {0}x{1}")]
    TableTooSmall(usize, usize),
    #[error("rows have inconsistent lengths")]
    RaggedTable,
    #[error("a row or column total is zero")]
    ZeroMarginal,
    #[error("strategy map line {line}: {message}")]
    MapParse { line: usize, message: String },
}
