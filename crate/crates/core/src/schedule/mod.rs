//! Computations (iteration domain, body, accesses) and the per-computation
//! time-processor vectors that order their instances.

mod commands;
pub mod nest;
mod scan;
mod vector;

use std::fmt;

use crate::error::{Error, Result};
use crate::set::{Env, Expr, IntegerSet, Lookup, Params};

pub use commands::{Command, Selection};
pub use vector::{Entry, ScheduleVector, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElemKind {
    F32,
    F64,
    I32,
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElemKind::F32 => "f32",
            ElemKind::F64 => "f64",
            ElemKind::I32 => "i32",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BufferDecl {
    pub name: String,
    pub kind: ElemKind,
    pub shape: Vec<Expr>,
}

impl BufferDecl {
    pub fn extents(&self, params: &Params) -> Result<Vec<usize>> {
        let env = |n: &str| params.get(n);
        self.shape
            .iter()
            .map(|e| {
                let v = e.eval(&env)?;
                if v <= 0 {
                    return Err(Error::Shape(format!("buffer `{}` has extent {v}", self.name)));
                }
                Ok(v as usize)
            })
            .collect()
    }
}

/// One subscript of an access. `Indirect` adds an entry loaded from an
/// index table, e.g. the pre-linearized column offsets of a CSR matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Index {
    Affine(Expr),
    Indirect { offset: Expr, table: String, at: Vec<Expr> },
}

impl Index {
    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Index::Affine(e) => e.collect_vars(out),
            Index::Indirect { offset, at, .. } => {
                offset.collect_vars(out);
                for e in at {
                    e.collect_vars(out);
                }
            }
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Affine(e) => write!(f, "{e}"),
            Index::Indirect { offset, table, at } => {
                if offset.as_const() != Some(0) {
                    write!(f, "{offset} + ")?;
                }
                write!(f, "{table}")?;
                for e in at {
                    write!(f, "[{e}]")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Access {
    pub buffer: String,
    pub index: Vec<Index>,
}

impl Access {
    pub fn affine(buffer: impl Into<String>, index: Vec<Expr>) -> Self {
        Access { buffer: buffer.into(), index: index.into_iter().map(Index::Affine).collect() }
    }

    pub fn is_indirect(&self) -> bool {
        self.index.iter().any(|i| matches!(i, Index::Indirect { .. }))
    }

    pub fn substitute(&self, map: &[(String, Expr)]) -> Access {
        let index = self
            .index
            .iter()
            .map(|i| match i {
                Index::Affine(e) => Index::Affine(e.substitute_all(map)),
                Index::Indirect { offset, table, at } => Index::Indirect {
                    offset: offset.substitute_all(map),
                    table: table.clone(),
                    at: at.iter().map(|e| e.substitute_all(map)).collect(),
                },
            })
            .collect();
        Access { buffer: self.buffer.clone(), index }
    }
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.buffer)?;
        for i in &self.index {
            write!(f, "[{i}]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    /// 1 when lhs < rhs, else 0.
    Lt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Exp,
    Tanh,
    Sigmoid,
}

/// Expression tree of a computation body.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    /// Iterator, parameter or integer index arithmetic.
    Affine(Expr),
    Load(Access),
    Bin(BinOp, Box<Value>, Box<Value>),
    Un(UnOp, Box<Value>),
    /// `cond != 0 ? a : b`
    Select(Box<Value>, Box<Value>, Box<Value>),
}

impl Value {
    pub fn iter(name: &str) -> Value {
        Value::Affine(Expr::var(name))
    }

    pub fn load(buffer: &str, index: Vec<Expr>) -> Value {
        Value::Load(Access::affine(buffer, index))
    }

    pub fn bin(op: BinOp, a: Value, b: Value) -> Value {
        Value::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnOp, a: Value) -> Value {
        Value::Un(op, Box::new(a))
    }

    pub fn loads(&self) -> Vec<&Access> {
        let mut out = Vec::new();
        self.visit(&mut |v| {
            if let Value::Load(a) = v {
                out.push(a);
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Value)) {
        f(self);
        match self {
            Value::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Value::Un(_, a) => a.visit(f),
            Value::Select(c, a, b) => {
                c.visit(f);
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        self.visit(&mut |v| match v {
            Value::Affine(e) => e.collect_vars(out),
            Value::Load(a) => {
                for i in &a.index {
                    i.collect_vars(out);
                }
            }
            _ => {}
        });
    }

    pub fn substitute(&self, map: &[(String, Expr)]) -> Value {
        match self {
            Value::Affine(e) => Value::Affine(e.substitute_all(map)),
            Value::Load(a) => Value::Load(a.substitute(map)),
            Value::Bin(op, a, b) => Value::bin(*op, a.substitute(map), b.substitute(map)),
            Value::Un(op, a) => Value::un(*op, a.substitute(map)),
            Value::Select(c, a, b) => Value::Select(
                Box::new(c.substitute(map)),
                Box::new(a.substitute(map)),
                Box::new(b.substitute(map)),
            ),
            other => other.clone(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let (prec, op) = match self {
            Value::Bin(BinOp::Add, ..) => (1, " + "),
            Value::Bin(BinOp::Sub, ..) => (1, " - "),
            Value::Bin(BinOp::Mul, ..) => (2, " * "),
            Value::Bin(BinOp::Div, ..) => (2, " / "),
            Value::Bin(BinOp::Lt, ..) => (0, " < "),
            Value::Affine(e) if matches!(e, Expr::Add(..)) => (1, ""),
            _ => (3, ""),
        };
        let paren = prec < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Value::Int(v) => write!(f, "{v}")?,
            Value::Float(v) => write!(f, "{v:?}")?,
            Value::Affine(e) => write!(f, "{e}")?,
            Value::Load(a) => write!(f, "{a}")?,
            Value::Bin(BinOp::Min, a, b) => write!(f, "min({a}, {b})")?,
            Value::Bin(BinOp::Max, a, b) => write!(f, "max({a}, {b})")?,
            Value::Bin(_, a, b) => {
                a.fmt_prec(f, prec)?;
                f.write_str(op)?;
                b.fmt_prec(f, prec + 1)?;
            }
            Value::Un(UnOp::Neg, a) => {
                f.write_str("-")?;
                a.fmt_prec(f, 3)?;
            }
            Value::Un(op, a) => {
                let name = match op {
                    UnOp::Exp => "exp",
                    UnOp::Tanh => "tanh",
                    _ => "sigmoid",
                };
                write!(f, "{name}({a})")?;
            }
            Value::Select(c, a, b) => write!(f, "select({c}, {a}, {b})")?,
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundRole {
    Lower,
    Upper,
}

/// A loop bound only known at run time: `symbol = buffer[index]`. The
/// symbol appears as a parameter of the owning domain.
#[derive(Clone, Debug, PartialEq)]
pub struct OpaqueBound {
    pub symbol: String,
    pub role: BoundRole,
    pub buffer: String,
    pub index: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Computation {
    pub name: String,
    pub domain: IntegerSet,
    pub body: Value,
    pub write: Access,
    /// `write += body` instead of `write = body`.
    pub reduction: bool,
    pub opaque: Vec<OpaqueBound>,
}

impl Computation {
    pub fn new(domain: IntegerSet, write: Access, body: Value) -> Self {
        Computation {
            name: domain.name().to_string(),
            domain,
            body,
            write,
            reduction: false,
            opaque: Vec::new(),
        }
    }

    pub fn accumulate(mut self) -> Self {
        self.reduction = true;
        self
    }

    pub fn with_opaque(mut self, bound: OpaqueBound) -> Self {
        self.opaque.push(bound);
        self
    }

    pub fn iterators(&self) -> &[String] {
        self.domain.vars()
    }

    /// True when accesses or bounds escape the affine fragment.
    pub fn is_nonaffine(&self) -> bool {
        !self.opaque.is_empty()
            || self.write.is_indirect()
            || self.body.loads().iter().any(|a| a.is_indirect())
    }

    /// Buffer reads in evaluation order; the accumulator comes first for
    /// reductions.
    pub fn reads(&self) -> Vec<&Access> {
        let mut out = Vec::new();
        if self.reduction {
            out.push(&self.write);
        }
        out.extend(self.body.loads());
        out
    }

    pub fn iteration(&self, env: &impl Lookup) -> Result<Vec<i64>> {
        self.iterators()
            .iter()
            .map(|v| env.lookup(v).ok_or_else(|| Error::Unbound(v.clone())))
            .collect()
    }
}

impl fmt::Display for Computation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.reduction { "+=" } else { "=" };
        write!(f, "{}({}): {} {op} {}", self.name, self.iterators().join(", "), self.write, self.body)
    }
}

/// Buffers, computations, one schedule per computation and parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub buffers: Vec<BufferDecl>,
    pub comps: Vec<Computation>,
    pub schedules: Vec<ScheduleVector>,
    pub params: Params,
    /// Allow reordering of `+=` updates to the same accumulator.
    pub associative_reduction: bool,
}

impl Program {
    pub fn new(params: Params) -> Self {
        Program {
            buffers: Vec::new(),
            comps: Vec::new(),
            schedules: Vec::new(),
            params,
            associative_reduction: false,
        }
    }

    pub fn constants(&self) -> Vec<(String, i64)> {
        self.params.iter().map(|(n, v)| (n.to_string(), v)).collect()
    }

    pub fn add_buffer(&mut self, name: &str, kind: ElemKind, shape: &[&str]) -> Result<()> {
        if self.buffer(name).is_some() {
            return Err(Error::Invalid(format!("buffer `{name}` declared twice")));
        }
        let shape = shape.iter().map(|s| crate::set::parse_expr(s)).collect::<Result<_>>()?;
        self.buffers.push(BufferDecl { name: name.to_string(), kind, shape });
        Ok(())
    }

    /// Append a computation with the sequential schedule `(iters..., k)`.
    pub fn add(&mut self, comp: Computation) -> Result<()> {
        if self.comp_index(&comp.name).is_some() {
            return Err(Error::Invalid(format!("computation `{}` defined twice", comp.name)));
        }
        let symbols: Vec<&str> = comp.opaque.iter().map(|o| o.symbol.as_str()).collect();
        let mut used = Vec::new();
        comp.body.collect_vars(&mut used);
        for i in &comp.write.index {
            i.collect_vars(&mut used);
        }
        for o in &comp.opaque {
            for e in &o.index {
                e.collect_vars(&mut used);
            }
        }
        for v in used.iter().chain(comp.domain.params()) {
            let known = comp.iterators().contains(v)
                || self.params.get(v).is_some()
                || symbols.contains(&v.as_str());
            if !known {
                return Err(Error::Unbound(format!("{v} (in computation {})", comp.name)));
            }
        }
        let mut accesses = comp.reads();
        accesses.push(&comp.write);
        for a in accesses {
            let decl = self
                .buffer(&a.buffer)
                .ok_or_else(|| Error::Unknown { kind: "buffer", name: a.buffer.clone() })?;
            if decl.shape.len() != a.index.len() {
                return Err(Error::Arity { expected: decl.shape.len(), got: a.index.len() });
            }
        }
        let k = self.comps.len() as i64;
        let mut entries: Vec<Entry> =
            comp.iterators().iter().map(|v| Entry::Dyn(Expr::var(v.clone()), Tag::Seq)).collect();
        entries.push(Entry::Static(k));
        self.schedules.push(ScheduleVector { comp: comp.name.clone(), entries });
        self.comps.push(comp);
        self.pad();
        Ok(())
    }

    pub fn buffer(&self, name: &str) -> Option<&BufferDecl> {
        self.buffers.iter().find(|b| b.name == name)
    }

    pub fn comp_index(&self, name: &str) -> Option<usize> {
        self.comps.iter().position(|c| c.name == name)
    }

    pub fn comp(&self, name: &str) -> Result<&Computation> {
        self.comp_index(name)
            .map(|i| &self.comps[i])
            .ok_or_else(|| Error::Unknown { kind: "computation", name: name.to_string() })
    }

    pub fn schedule(&self, name: &str) -> Result<&ScheduleVector> {
        Ok(&self.schedules[self.comp_index(name).ok_or_else(|| Error::Unknown {
            kind: "computation",
            name: name.to_string(),
        })?])
    }

    pub fn is_nonaffine(&self) -> bool {
        self.comps.iter().any(|c| c.is_nonaffine())
    }

    /// Reset every schedule to `(iters..., position in order)`.
    pub fn default_schedule(&self, order: &[&str]) -> Result<Program> {
        let mut seen = vec![false; self.comps.len()];
        for name in order {
            let i = self.comp_index(name).ok_or_else(|| Error::Unknown {
                kind: "computation",
                name: name.to_string(),
            })?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Schedule(format!("`{name}` listed twice")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Schedule(format!("`{}` missing from order", self.comps[i].name)));
        }
        let mut p = self.clone();
        for (k, name) in order.iter().enumerate() {
            let i = self.comp_index(name).expect("checked above");
            let mut entries: Vec<Entry> = self.comps[i]
                .iterators()
                .iter()
                .map(|v| Entry::Dyn(Expr::var(v.clone()), Tag::Seq))
                .collect();
            entries.push(Entry::Static(k as i64));
            p.schedules[i].entries = entries;
        }
        p.pad();
        Ok(p)
    }

    /// Append trailing `Static(0)` so that all vectors have equal length.
    pub(crate) fn pad(&mut self) {
        let n = self.schedules.iter().map(|s| s.entries.len()).max().unwrap_or(0);
        for s in &mut self.schedules {
            while s.entries.len() < n {
                s.entries.push(Entry::Static(0));
            }
        }
    }

    pub fn dump_schedules(&self) -> String {
        let mut out = String::new();
        for s in &self.schedules {
            out.push_str(&s.dump());
            out.push('\n');
        }
        out
    }

    /// Base environment holding every parameter value.
    pub fn param_env(&self) -> Env {
        let mut env = Env::new();
        for (n, v) in self.params.iter() {
            env.push(n, v);
        }
        env
    }

    /// All instances `(computation, iteration)` sorted by schedule time.
    /// `load` resolves opaque bounds.
    pub fn timed_instances(
        &self,
        load: &mut dyn FnMut(&str, &[i64]) -> Result<i64>,
    ) -> Result<Vec<TimedInstance>> {
        let mut out = Vec::new();
        for (ci, comp) in self.comps.iter().enumerate() {
            let sched = &self.schedules[ci];
            comp.scan(&self.params, load, &mut |env| {
                out.push(TimedInstance {
                    comp: ci,
                    iter: comp.iteration(env)?,
                    time: sched.eval(env)?,
                });
                Ok(())
            })?;
        }
        out.sort_by(|a, b| a.time.cmp(&b.time).then(a.comp.cmp(&b.comp)));
        Ok(out)
    }

    /// Every instance gets a distinct schedule vector.
    pub fn check_bijective(&self) -> Result<()> {
        let inst = self.timed_instances(&mut |b, _| {
            Err(Error::NonAffineComputation(format!("bound loaded from `{b}`")))
        })?;
        for w in inst.windows(2) {
            if w[0].time == w[1].time {
                return Err(Error::Schedule(format!(
                    "{}{:?} and {}{:?} share time {:?}",
                    self.comps[w[0].comp].name, w[0].iter, self.comps[w[1].comp].name, w[1].iter, w[0].time
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedInstance {
    pub comp: usize,
    pub iter: Vec<i64>,
    pub time: Vec<i64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_statements() -> Program {
        let mut p = Program::new(Params::new().with("N", 3).with("M", 2));
        p.add_buffer("A", ElemKind::I32, &["N", "M"]).unwrap();
        for s in ["S1", "S2"] {
            let d = IntegerSet::parse(&format!("[N, M] -> {{{s}(i,j): 0<=i<N and 0<=j<M}}")).unwrap();
            let body = Value::bin(BinOp::Add, Value::load("A", vec!["i".into(), "j".into()]), Value::Int(1));
            p.add(Computation::new(d, Access::affine("A", vec!["i".into(), "j".into()]), body)).unwrap();
        }
        p
    }

    #[test]
    fn sequential_default() {
        let p = two_statements();
        assert_eq!(p.dump_schedules(), "S1: (i, j, 0)\nS2: (i, j, 1)\n");
        let q = p.default_schedule(&["S2", "S1"]).unwrap();
        assert_eq!(q.dump_schedules(), "S1: (i, j, 1)\nS2: (i, j, 0)\n");
        assert!(p.default_schedule(&["S1"]).is_err());
        assert!(p.default_schedule(&["S1", "S3"]).is_err());
    }

    #[test]
    fn three_statements_get_consecutive_statics() {
        let mut p = two_statements();
        let d = IntegerSet::parse("[N, M] -> {S3(i,j): 0<=i<N and 0<=j<M}").unwrap();
        p.add(Computation::new(d, Access::affine("A", vec!["i".into(), "j".into()]), Value::Int(0)))
            .unwrap();
        let statics: Vec<_> = p.schedules.iter().map(|s| s.entries[2].clone()).collect();
        assert_eq!(statics, vec![Entry::Static(0), Entry::Static(1), Entry::Static(2)]);
    }

    #[test]
    fn rejects_unknown_names() {
        let mut p = two_statements();
        let d = IntegerSet::parse("{S9(i): 0<=i<3}").unwrap();
        let c = Computation::new(d, Access::affine("Z", vec!["i".into()]), Value::Int(0));
        assert!(matches!(p.add(c), Err(Error::Unknown { .. })));
        let d = IntegerSet::parse("{S9(i): 0<=i<3}").unwrap();
        let c = Computation::new(d, Access::affine("A", vec!["i".into(), "q".into()]), Value::Int(0));
        assert!(matches!(p.add(c), Err(Error::Unbound(_))));
    }

    #[test]
    fn instances_are_time_sorted() {
        let p = two_statements();
        let inst = p.timed_instances(&mut |_, _| unreachable!()).unwrap();
        assert_eq!(inst.len(), 12);
        assert_eq!((inst[0].comp, inst[1].comp), (0, 1));
        assert_eq!(inst[2].iter, vec![0, 1]);
        p.check_bijective().unwrap();
    }

    #[test]
    fn body_display() {
        let v = Value::bin(
            BinOp::Mul,
            Value::bin(BinOp::Add, Value::load("A", vec!["i".into()]), Value::Int(1)),
            Value::un(UnOp::Tanh, Value::iter("j")),
        );
        assert_eq!(v.to_string(), "(A[i] + 1) * tanh(j)");
    }
}
