//! Loop generation and execution.

mod ast;
mod exec;
mod lower;
mod reference;
mod store;

pub use ast::{Bound, LoopAst, Node};
pub use exec::{execute, workers_from_env, ExecOptions, WORKERS_ENV};
pub use lower::{lower, lower_checked};
pub use reference::run_reference;
pub use store::{Buffer, BufferStore, Data, Val};
