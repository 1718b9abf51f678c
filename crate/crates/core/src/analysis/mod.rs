//! Diagnostics: PS checks, product structure, log-profile fits and the
//! violation search.

mod product;
mod ps1d;
mod recursion;
mod search;

pub use product::*;
pub use ps1d::*;
pub use recursion::*;
pub use search::*;
