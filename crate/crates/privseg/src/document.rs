//! The JSON problem document read by every subcommand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Market, ValueGrid};
use crate::pricing::check_beta;
use crate::segmentation::PricedPart;

/// Version written into every JSON output.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub values: Vec<f64>,
    pub aggregate: Vec<f64>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Vec<SegmentEntry>>,
}

/// One segment of a supplied segmentation. `price_index` counts from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub weight: f64,
    pub market: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_index: Option<usize>,
}

/// Segment weight, market and optional 0-based price.
pub type SegmentSpec = (f64, Market, Option<usize>);

/// A validated document.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub grid: ValueGrid,
    pub x_star: Market,
    pub beta: f64,
}

impl ProblemDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDocument =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("problem document: {e}")))?;
        if let Some(v) = doc.schema {
            if v != SCHEMA_VERSION {
                return Err(Error::invalid(format!("unsupported schema version {v}")));
            }
        }
        Ok(doc)
    }

    pub fn problem(&self) -> Result<Problem> {
        let grid = ValueGrid::new(self.values.clone())?;
        if self.aggregate.len() != grid.k() {
            return Err(Error::invalid(format!(
                "aggregate has {} entries for {} values",
                self.aggregate.len(),
                grid.k()
            )));
        }
        let x_star = Market::new(self.aggregate.clone())?;
        check_beta(self.beta)?;
        Ok(Problem { grid, x_star, beta: self.beta })
    }

    /// Segments with 0-based prices; `None` where no price was given.
    pub fn segments(&self, grid: &ValueGrid) -> Result<Option<Vec<SegmentSpec>>> {
        let Some(entries) = &self.segmentation else { return Ok(None) };
        let mut out = Vec::with_capacity(entries.len());
        for e in entries {
            let market = Market::new(e.market.clone())?;
            grid.check_market(&market)?;
            let price = match e.price_index {
                Some(0) => return Err(Error::invalid("price_index counts from 1")),
                Some(i) => {
                    grid.check_index(i - 1)?;
                    Some(i - 1)
                }
                None => None,
            };
            out.push((e.weight, market, price));
        }
        Ok(Some(out))
    }
}

impl From<&PricedPart> for SegmentEntry {
    fn from(p: &PricedPart) -> Self {
        SegmentEntry { weight: p.weight, market: p.market.mass().to_vec(), price_index: Some(p.price + 1) }
    }
}
