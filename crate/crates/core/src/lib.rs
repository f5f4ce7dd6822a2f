//! Matrix product quantum channels and their purifying matrix product
//! isometries: construction, spectral analysis, canonical forms, brickwork
//! circuits, scaled-isometry block structure and implementation protocols,
//! all cross-checked against dense brute force at small sizes.

pub mod error;
pub mod linalg;
pub mod tensor;
pub mod mp;
pub mod transfer;
pub mod oracle;
pub mod brickwork;
pub mod smpi;
pub mod protocol;
pub mod path;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
pub use tensor::DenseTensor;
