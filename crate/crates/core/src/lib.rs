pub mod analysis;
pub mod codes;
pub mod designers;
pub mod error;
mod lsq;
pub mod metrics;
pub mod mm_engine;
pub mod scenario;
pub mod seqcore;

pub use error::{Error, Result};
