use std::fmt::Write as _;

use crate::schedule::{Program, Tag};
use crate::set::{Env, Expr, Formula, Linear};
use crate::error::{Error, Result};

/// Loop bound: the lower bound is `min` over alternatives of `max` over the
/// expressions; the upper bound is `max` over alternatives of `min`. Upper
/// bounds are inclusive. Several alternatives appear only when statements
/// with different ranges share a loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Bound {
    pub alts: Vec<Vec<Expr>>,
}

impl Bound {
    pub fn single(exprs: Vec<Expr>) -> Self {
        Bound { alts: vec![exprs] }
    }

    pub fn eval_lower(&self, env: &Env) -> Result<i64> {
        self.eval(env, true)
    }

    pub fn eval_upper(&self, env: &Env) -> Result<i64> {
        self.eval(env, false)
    }

    fn eval(&self, env: &Env, lower: bool) -> Result<i64> {
        if self.alts.is_empty() || self.alts.iter().any(|a| a.is_empty()) {
            return Err(Error::Invalid("loop bound without expressions".into()));
        }
        let mut outer: Option<i64> = None;
        for alt in &self.alts {
            let mut inner: Option<i64> = None;
            for e in alt {
                let v = e.eval(env)?;
                inner = Some(match inner {
                    None => v,
                    Some(x) if lower => x.max(v),
                    Some(x) => x.min(v),
                });
            }
            let v = inner.expect("non-empty");
            outer = Some(match outer {
                None => v,
                Some(x) if lower => x.min(v),
                Some(x) => x.max(v),
            });
        }
        Ok(outer.expect("non-empty"))
    }

    fn rename(&mut self, from: &str, to: &str) {
        for alt in &mut self.alts {
            for e in alt {
                *e = e.rename(from, to);
            }
        }
    }

    fn show(&self, lower: bool) -> String {
        let shift = |e: &Expr| if lower { e.clone() } else { Linear::of(&(e.clone() + 1)).to_expr() };
        let alt = |a: &Vec<Expr>| {
            let parts: Vec<String> = a.iter().map(|e| shift(e).to_string()).collect();
            if parts.len() == 1 {
                parts[0].clone()
            } else {
                format!("{}({})", if lower { "max" } else { "min" }, parts.join(", "))
            }
        };
        let parts: Vec<String> = self.alts.iter().map(alt).collect();
        if parts.len() == 1 {
            parts[0].clone()
        } else {
            format!("{}({})", if lower { "min" } else { "max" }, parts.join(", "))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Seq(Vec<Node>),
    Loop { var: String, lower: Bound, upper: Bound, tag: Tag, body: Box<Node> },
    /// `symbol = buffer[index]`, a run-time loop bound.
    Bind { symbol: String, buffer: String, index: Vec<Expr>, body: Box<Node> },
    Guard { cond: Formula, body: Box<Node> },
    /// One instance of computation `comp` with iterators given in terms of
    /// the enclosing loop variables.
    Stmt { comp: usize, iters: Vec<Expr> },
    /// Concrete instances in execution order (fallback lowering).
    Instances(Vec<(usize, Vec<i64>)>),
}

impl Node {
    pub(crate) fn rename(&mut self, from: &str, to: &str) {
        match self {
            Node::Seq(xs) => xs.iter_mut().for_each(|x| x.rename(from, to)),
            Node::Loop { var, lower, upper, body, .. } => {
                lower.rename(from, to);
                upper.rename(from, to);
                if var != from {
                    body.rename(from, to);
                }
            }
            Node::Bind { index, body, .. } => {
                for e in index.iter_mut() {
                    *e = e.rename(from, to);
                }
                body.rename(from, to);
            }
            Node::Guard { cond, body } => {
                *cond = cond.rename(&[(from.to_string(), to.to_string())]);
                body.rename(from, to);
            }
            Node::Stmt { iters, .. } => {
                for e in iters.iter_mut() {
                    *e = e.rename(from, to);
                }
            }
            Node::Instances(_) => {}
        }
    }

    /// Number of loop nodes, for shape assertions.
    pub fn loop_count(&self) -> usize {
        match self {
            Node::Seq(xs) => xs.iter().map(|x| x.loop_count()).sum(),
            Node::Loop { body, .. } => 1 + body.loop_count(),
            Node::Bind { body, .. } | Node::Guard { body, .. } => body.loop_count(),
            Node::Stmt { .. } | Node::Instances(_) => 0,
        }
    }
}

/// Lowered program: a loop tree over the computations of its source.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopAst {
    pub root: Node,
    pub warnings: Vec<String>,
}

impl LoopAst {
    /// Pseudocode in the style `for (i in 0..N)` with exclusive upper bounds.
    pub fn emit_source(&self, prog: &Program) -> String {
        let mut out = String::new();
        for w in &self.warnings {
            let _ = writeln!(out, "// warning: {w}");
        }
        emit(&self.root, prog, 0, &mut out);
        out
    }
}

fn emit(node: &Node, prog: &Program, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        Node::Seq(xs) => xs.iter().for_each(|x| emit(x, prog, depth, out)),
        Node::Loop { var, lower, upper, tag, body } => {
            let prefix = match tag {
                Tag::Seq => String::new(),
                Tag::Cpu => "parallel ".to_string(),
                Tag::Vec(w) => format!("vector({w}) "),
            };
            let _ = writeln!(out, "{pad}{prefix}for ({var} in {}..{})", lower.show(true), upper.show(false));
            emit(body, prog, depth + 1, out);
        }
        Node::Bind { symbol, buffer, index, body } => {
            let idx: String = index.iter().map(|e| format!("[{e}]")).collect();
            let _ = writeln!(out, "{pad}{symbol} = {buffer}{idx};");
            emit(body, prog, depth, out);
        }
        Node::Guard { cond, body } => {
            let _ = writeln!(out, "{pad}if ({cond})");
            emit(body, prog, depth + 1, out);
        }
        Node::Stmt { comp, iters } => {
            let c = &prog.comps[*comp];
            let map: Vec<(String, Expr)> =
                c.iterators().iter().cloned().zip(iters.iter().map(|e| e.normalize())).collect();
            let op = if c.reduction { "+=" } else { "=" };
            let _ = writeln!(
                out,
                "{pad}{}: {} {op} {};",
                c.name,
                c.write.substitute(&map),
                c.body.substitute(&map)
            );
        }
        Node::Instances(list) => {
            let _ = writeln!(out, "{pad}// {} enumerated instances", list.len());
            for (ci, it) in list {
                let t: Vec<String> = it.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{pad}{}({});", prog.comps[*ci].name, t.join(", "));
            }
        }
    }
}
