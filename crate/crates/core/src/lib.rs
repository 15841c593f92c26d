//! Attribute-controlled comparison corpora: category-based matching, balance
//! diagnostics, and controlled group statistics.

pub mod analyze;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod groups;
pub mod matchers;
pub mod propensity;
pub mod simulate;
pub mod stats;
pub mod text;
pub mod vectorize;

pub use error::{Error, Result};
