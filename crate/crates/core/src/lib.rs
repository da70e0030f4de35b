//! Day-ahead gas demand forecasting.
//!
//! The pipeline runs from a validated daily series ([`dataset`]) through
//! calendar-aware features ([`calendar`], [`features`]) to base forecasters
//! ([`models`]), their aggregation ([`ensemble`]) and a rolling yearly
//! evaluation ([`backtest`]). [`synthgen`] produces series with known
//! structure for end-to-end checks.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod backtest;
pub mod calendar;
pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod models;
pub mod synthgen;

pub use error::{Error, Result};
