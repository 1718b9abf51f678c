pub mod analysis;
pub mod error;
pub mod flow;
pub mod io;
pub mod numeric;
pub mod perimeter;
pub mod sets;
pub mod symmetrize;
pub mod weights;

pub use error::{Error, Result};
