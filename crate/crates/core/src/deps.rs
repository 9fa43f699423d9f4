//! Instance-level dependence analysis and schedule legality.
//!
//! Dependences are found by walking every instance in original schedule
//! order and tracking, per memory address, the last write group and the
//! reads since. Flow edges are value-based (only the last writer feeds a
//! read); anti and output edges link consecutive accesses, which is enough
//! for legality because order is transitive.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::schedule::{Access, Index, Program, Selection, Tag};
use crate::set::{parse_expr_with, Env};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepKind {
    Flow,
    Anti,
    Output,
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepKind::Flow => "flow",
            DepKind::Anti => "anti",
            DepKind::Output => "output",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceRef {
    pub comp: String,
    pub iter: Vec<i64>,
}

fn fmt_tuple(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for InstanceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.comp, fmt_tuple(&self.iter))
    }
}

/// Field order gives the canonical edge order used for dumps and witnesses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DependenceEdge {
    pub source: InstanceRef,
    pub sink: InstanceRef,
    pub kind: DepKind,
    pub buffer: String,
    pub addr: Vec<i64>,
}

impl fmt::Display for DependenceEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> {} via {}", self.kind, self.source, self.sink, self.buffer)?;
        for a in &self.addr {
            write!(f, "[{a}]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependenceGraph {
    pub edges: Vec<DependenceEdge>,
}

impl DependenceGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn of_kind(&self, kind: DepKind) -> impl Iterator<Item = &DependenceEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// One line per edge, in canonical order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Legal,
    Illegal(DependenceEdge),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParallelVerdict {
    Parallel,
    Carried(DependenceEdge),
}

pub(crate) fn eval_access(a: &Access, env: &Env) -> Result<Vec<i64>> {
    a.index
        .iter()
        .map(|i| match i {
            Index::Affine(e) => e.eval(env),
            Index::Indirect { .. } => {
                Err(Error::NonAffineComputation(format!("indirect subscript on `{}`", a.buffer)))
            }
        })
        .collect()
}

fn instance_env(prog: &Program, comp: usize, iter: &[i64]) -> Env {
    let mut env = prog.param_env();
    for (v, x) in prog.comps[comp].iterators().iter().zip(iter) {
        env.push(v.clone(), *x);
    }
    env
}

#[derive(Default)]
struct AddrState {
    group: Vec<usize>,
    /// Computation of an associative reduction run, if `group` is one.
    run_of: Option<usize>,
    prev_group: Vec<usize>,
    reads_before: Vec<usize>,
    reads_after: Vec<usize>,
}

/// All dependences of `prog`, ordered by its current schedules.
pub fn compute_dependences(prog: &Program) -> Result<DependenceGraph> {
    if let Some(c) = prog.comps.iter().find(|c| c.is_nonaffine()) {
        return Err(Error::NonAffineComputation(format!("computation `{}`", c.name)));
    }
    let inst = prog.timed_instances(&mut |b, _| {
        Err(Error::NonAffineComputation(format!("bound loaded from `{b}`")))
    })?;
    let extents: HashMap<&str, Vec<usize>> = prog
        .buffers
        .iter()
        .map(|b| Ok((b.name.as_str(), b.extents(&prog.params)?)))
        .collect::<Result<_>>()?;
    let checked = |a: &Access, env: &Env| -> Result<(String, Vec<i64>)> {
        let addr = eval_access(a, env)?;
        let ext = &extents[a.buffer.as_str()];
        if addr.iter().zip(ext).any(|(x, e)| *x < 0 || *x as usize >= *e) {
            return Err(Error::OutOfBounds { buffer: a.buffer.clone(), index: addr });
        }
        Ok((a.buffer.clone(), addr))
    };

    let mut state: HashMap<(String, Vec<i64>), AddrState> = HashMap::new();
    let mut raw: Vec<(usize, usize, DepKind, String, Vec<i64>)> = Vec::new();
    for (n, ti) in inst.iter().enumerate() {
        let comp = &prog.comps[ti.comp];
        let env = instance_env(prog, ti.comp, &ti.iter);
        let assoc = comp.reduction && prog.associative_reduction;
        let target = checked(&comp.write, &env)?;
        for a in comp.body.loads() {
            let key = checked(a, &env)?;
            let st = state.entry(key.clone()).or_default();
            for &w in &st.group {
                raw.push((w, n, DepKind::Flow, key.0.clone(), key.1.clone()));
            }
            st.reads_after.push(n);
        }
        let st = state.entry(target.clone()).or_default();
        let (buf, addr) = target;
        if assoc && st.run_of == Some(ti.comp) && st.reads_after.is_empty() {
            // Extends a reorderable run: depend on what preceded the run.
            for &w in &st.prev_group {
                raw.push((w, n, DepKind::Flow, buf.clone(), addr.clone()));
                raw.push((w, n, DepKind::Output, buf.clone(), addr.clone()));
            }
            for &r in &st.reads_before {
                raw.push((r, n, DepKind::Anti, buf.clone(), addr.clone()));
            }
            st.group.push(n);
            continue;
        }
        for &w in &st.group {
            if comp.reduction {
                raw.push((w, n, DepKind::Flow, buf.clone(), addr.clone()));
            }
            raw.push((w, n, DepKind::Output, buf.clone(), addr.clone()));
        }
        for &r in &st.reads_after {
            if r != n {
                raw.push((r, n, DepKind::Anti, buf.clone(), addr.clone()));
            }
        }
        st.prev_group = std::mem::replace(&mut st.group, vec![n]);
        st.reads_before = std::mem::take(&mut st.reads_after);
        st.run_of = assoc.then_some(ti.comp);
    }
    let at = |k: usize| InstanceRef { comp: prog.comps[inst[k].comp].name.clone(), iter: inst[k].iter.clone() };
    let mut edges: Vec<DependenceEdge> = raw
        .into_iter()
        .map(|(s, t, kind, buffer, addr)| DependenceEdge { source: at(s), sink: at(t), kind, buffer, addr })
        .collect();
    edges.sort();
    edges.dedup();
    Ok(DependenceGraph { edges })
}

fn time_of(prog: &Program, r: &InstanceRef) -> Result<(usize, Vec<i64>)> {
    let ci = prog
        .comp_index(&r.comp)
        .ok_or_else(|| Error::Unknown { kind: "computation", name: r.comp.clone() })?;
    let env = instance_env(prog, ci, &r.iter);
    Ok((ci, prog.schedules[ci].eval(&env)?))
}

/// Legal iff every edge source runs strictly before its sink under the
/// schedules of `prog`. The witness is the smallest violating edge.
pub fn check_legality(prog: &Program, deps: &DependenceGraph) -> Result<Verdict> {
    for e in &deps.edges {
        let (_, ts) = time_of(prog, &e.source)?;
        let (_, tk) = time_of(prog, &e.sink)?;
        if ts >= tk {
            return Ok(Verdict::Illegal(e.clone()));
        }
    }
    Ok(Verdict::Legal)
}

/// Whether the tagged dimension `dim` of the selected computations carries
/// a dependence: equal time prefix above it and different values at it.
pub fn check_parallel(
    prog: &Program,
    deps: &DependenceGraph,
    sel: &Selection,
    dim: &str,
) -> Result<ParallelVerdict> {
    let target = parse_expr_with(dim, &prog.constants())?;
    let names: Vec<&str> = if sel.0.is_empty() {
        prog.comps.iter().map(|c| c.name.as_str()).collect()
    } else {
        sel.0.iter().map(|s| s.as_str()).collect()
    };
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for name in &names {
        let s = prog.schedule(name)?;
        let p = s
            .find(&target)
            .ok_or_else(|| Error::Schedule(format!("dimension `{dim}` not found in {}", s.dump())))?;
        if s.entries[p].tag() == Tag::Seq {
            return Err(Error::Schedule(format!("dimension `{dim}` of {name} is not tagged cpu or vec")));
        }
        pos.insert(name, p);
    }
    for e in &deps.edges {
        let p = match (pos.get(e.sink.comp.as_str()), pos.get(e.source.comp.as_str())) {
            (Some(p), _) | (None, Some(p)) => *p,
            (None, None) => continue,
        };
        let (_, ts) = time_of(prog, &e.source)?;
        let (_, tk) = time_of(prog, &e.sink)?;
        if ts[..p] == tk[..p] && ts[p] != tk[p] {
            return Ok(ParallelVerdict::Carried(e.clone()));
        }
    }
    Ok(ParallelVerdict::Parallel)
}
