//! Two-asset market analysis toolkit: OHLCV ingestion, factor
//! engineering, Pearson/PCA/CCA analysis with significance tests, and
//! OLS forecasting of the second asset's returns from the first asset's
//! features. All numerics are implemented in this crate.

pub mod cca;
pub mod error;
pub mod features;
pub mod linalg;
pub mod market_data;
pub mod pca;
pub mod pipeline;
pub mod regression;

pub use error::{Error, ErrorClass, Result};
