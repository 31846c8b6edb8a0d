//! Attainable consumer and producer surplus under third-degree price
//! discrimination when the producer only sees markets through a
//! randomized-response mask: with probability `β` the observed market is
//! replaced by a uniform draw from the simplex.
//!
//! Most callers start from [`geometry::surplus_set`], which needs the point
//! earned on masked observations from [`measure::shift_vector`].

pub mod analysis;
pub mod cli;
pub mod document;
pub mod error;
pub mod geometry;
pub mod measure;
pub mod model;
pub mod oracle;
pub mod polygon;
pub mod pricing;
pub mod render;
pub mod segmentation;
pub mod simulation;

pub use error::{Error, Result};
pub use model::{Market, Segmentation, SurplusPoint, ValueGrid};
pub use polygon::SurplusPolygon;
