//! Metrics, λ selection, the simulated and benchmark experiment protocols,
//! and significance testing.

mod experiment;
mod grid;
mod metrics;
mod ranksum;
mod records;

pub use experiment::{
    aggregate_benchmark, run_benchmark, run_depth_sweep, run_sample_sweep, AggregateCell, AggregateRow,
    BenchmarkSummary, CellKey, CellOutput, DatasetSkip, ExperimentConfig, ExperimentKind, ExperimentResult,
    RunControl, DEFAULT_LAMBDA_GRID,
};
pub use grid::{grid_search_lambda, CvRow, GridSearch};
pub use metrics::{mse, r2};
pub use ranksum::{rank_sum_test, RankSumResult, EXACT_LIMIT};
pub use records::{
    cell_seed, read_records_csv, read_reference_csv, write_aggregate_csv, write_records_csv, write_timings_csv,
    CellTiming, ReferenceScore, ResultRecord, PUBLISHED_REFERENCE_CSV,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{fit_cart, fit_ridge_odt};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::tree::{fit_fc_odt, ObliqueTree, SplitCriteria, VariantFlags};

/// Learners the harness can train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FcOdt,
    RidgeOdt,
    Cart,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::FcOdt, Method::RidgeOdt, Method::Cart];

    pub fn name(self) -> &'static str {
        match self {
            Method::FcOdt => "fc_odt",
            Method::RidgeOdt => "ridge_odt",
            Method::Cart => "cart",
        }
    }

    pub fn uses_lambda(self) -> bool {
        self != Method::Cart
    }

    pub fn fit(self, data: &Dataset, lambda: f64, criteria: &SplitCriteria) -> Result<ObliqueTree> {
        match self {
            Method::FcOdt => fit_fc_odt(data, lambda, criteria, VariantFlags::FC_ODT),
            Method::RidgeOdt => fit_ridge_odt(data, lambda, criteria),
            Method::Cart => fit_cart(data, criteria),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?} (expected fc_odt, ridge_odt or cart)")))
    }
}
