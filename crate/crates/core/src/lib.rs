//! High-frequency focused network (HFFN) for lightweight single-image
//! super-resolution, with the tensor engine, reverse-mode differentiation,
//! budget accounting, image metrics and a small trainer it needs.

pub mod autodiff;
pub mod blocks;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
