//! Comparison learners built on the shared growth loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::tree::{fit_fc_odt, fit_tree, ObliqueTree, SplitCriteria, Splitter, VariantFlags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RidgeOdt,
    Cart,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::RidgeOdt => "ridge_odt",
            BaselineKind::Cart => "cart",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge_odt" => Ok(BaselineKind::RidgeOdt),
            "cart" => Ok(BaselineKind::Cart),
            other => Err(Error::invalid(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Oblique ridge splits without concatenation or residual targets; leaves
/// hold plain means.
pub fn fit_ridge_odt(data: &Dataset, lambda: f64, criteria: &SplitCriteria) -> Result<ObliqueTree> {
    fit_fc_odt(data, lambda, criteria, VariantFlags::PLAIN)
}

/// Axis-parallel CART with mean leaves.
pub fn fit_cart(data: &Dataset, criteria: &SplitCriteria) -> Result<ObliqueTree> {
    fit_tree(data, Splitter::Axis, criteria, VariantFlags::PLAIN)
}

/// `lambda` is ignored for CART.
pub fn fit_baseline(kind: BaselineKind, data: &Dataset, lambda: f64, criteria: &SplitCriteria) -> Result<ObliqueTree> {
    match kind {
        BaselineKind::RidgeOdt => fit_ridge_odt(data, lambda, criteria),
        BaselineKind::Cart => fit_cart(data, criteria),
    }
}
