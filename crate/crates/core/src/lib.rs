pub mod bounds;
pub mod budget;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod decoder;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod pgm;
pub mod typicality;

pub use budget::Budget;
pub use channel::{holevo_chi, BuiltinChannel, CqChannel};
pub use error::{Error, Result};
