pub mod codegen;
pub mod deps;
pub mod error;
pub mod randprog;
pub mod rnn;
pub mod schedule;
pub mod set;
pub mod sparse;
pub mod timing;

pub use error::{Error, Result};
