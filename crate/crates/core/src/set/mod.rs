//! Parametric integer sets and maps with affine and quasi-affine constraints.

pub mod expr;
pub mod formula;
pub mod parse;
pub mod poly;
pub mod relation;
pub mod space;

pub use expr::{floor_div, floor_mod, Divisor, Env, Expr, Linear, Lookup};
pub use formula::{Formula, RelOp, Universe};
pub use parse::{parse_expr, parse_expr_with, parse_formula};
pub use relation::{compose, lex_lt_relation, Relation};
pub use space::{BoundingBox, IntegerSet, Params, UNBOUNDED};
