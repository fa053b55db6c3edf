pub mod api;
pub mod derivatives;
pub mod error;
pub mod instances;
pub mod lp;
pub mod oracles;
pub mod sets;
pub mod solve;
pub mod suite;

pub use error::{Error, Result};
