//! Identification and estimation of heterogeneous production sets from
//! profit data.

pub mod convex;
pub mod counterfactual;
pub mod error;
pub mod estimation;
pub mod lp;
pub mod numeric;
pub mod pipeline;
pub mod profit_id;
pub mod proxy;
pub mod technology;

pub use error::{Error, Result};
