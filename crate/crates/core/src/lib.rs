pub mod data;
pub mod dataset;
pub mod embedding;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod report;

pub use dataset::OrderedDataset;
pub use error::{Error, Result};
