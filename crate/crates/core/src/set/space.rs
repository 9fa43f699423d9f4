//! Named integer tuple sets `{ S(i, j) : f(i, j, p) }`.

use std::fmt;

use super::expr::{Env, Expr};
use super::formula::{Formula, Universe};
use super::parse::parse_space;
use super::poly::System;
use crate::error::{Error, Result};

/// Concrete parameter values plus the range scanned by unbounded quantifiers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    values: Vec<(String, i64)>,
    universe: Universe,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: i64) -> Self {
        self.set(name, value);
        self
    }

    pub fn with_universe(mut self, lo: i64, hi: i64) -> Self {
        self.universe = Universe { lo, hi };
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: i64) {
        let name = name.into();
        match self.values.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.values.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.values.iter().map(|(n, v)| (n.as_str(), *v))
    }

    /// Environment holding exactly `names`, all of which must be bound.
    pub(crate) fn env_for(&self, names: &[String]) -> Result<Env> {
        let mut env = Env::new();
        for n in names {
            let v = self.get(n).ok_or_else(|| Error::Unbound(n.clone()))?;
            env.push(n.clone(), v);
        }
        Ok(env)
    }
}

/// Inclusive per-dimension bounds used to make enumeration finite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    dims: Vec<(i64, i64)>,
}

/// Marker for a dimension with no finite bound.
pub const UNBOUNDED: (i64, i64) = (i64::MIN, i64::MAX);

const MAX_POINTS: u128 = 50_000_000;

impl BoundingBox {
    pub fn new(dims: Vec<(i64, i64)>) -> Self {
        BoundingBox { dims }
    }

    pub fn cube(dim: usize, lo: i64, hi: i64) -> Self {
        BoundingBox { dims: vec![(lo, hi); dim] }
    }

    pub fn dims(&self) -> &[(i64, i64)] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, t: &[i64]) -> bool {
        t.len() == self.dims.len() && t.iter().zip(&self.dims).all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn hull(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            dims: self
                .dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| (a.0.min(b.0), a.1.max(b.1)))
                .collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        let mut total: u128 = 1;
        for (i, (lo, hi)) in self.dims.iter().enumerate() {
            if *lo == i64::MIN || *hi == i64::MAX {
                return Err(Error::UnboundedBox(i));
            }
            if hi < lo {
                return Ok(());
            }
            total = total.saturating_mul((*hi as i128 - *lo as i128 + 1) as u128);
        }
        if total > MAX_POINTS {
            return Err(Error::Invalid(format!("box of {total} points is too large to enumerate")));
        }
        Ok(())
    }

    /// All points of the box in lexicographic order.
    pub fn points(&self) -> Result<Vec<Vec<i64>>> {
        self.check_finite()?;
        let mut out = Vec::new();
        self.for_each(|p| {
            out.push(p.to_vec());
            Ok(())
        })?;
        Ok(out)
    }

    pub(crate) fn for_each(&self, mut f: impl FnMut(&[i64]) -> Result<()>) -> Result<()> {
        self.check_finite()?;
        if self.dims.iter().any(|(lo, hi)| hi < lo) {
            return Ok(());
        }
        let mut cur: Vec<i64> = self.dims.iter().map(|d| d.0).collect();
        if cur.is_empty() {
            return f(&cur);
        }
        loop {
            f(&cur)?;
            let mut k = cur.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                if cur[k] < self.dims[k].1 {
                    cur[k] += 1;
                    for (j, c) in cur.iter_mut().enumerate().skip(k + 1) {
                        *c = self.dims[j].0;
                    }
                    break;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegerSet {
    name: String,
    vars: Vec<String>,
    params: Vec<String>,
    constraint: Formula,
}

pub(crate) fn merge_names(a: &[String], b: &[String]) -> Vec<String> {
    let mut out = a.to_vec();
    for n in b {
        if !out.contains(n) {
            out.push(n.clone());
        }
    }
    out
}

impl IntegerSet {
    /// Free variables of `constraint` that are not tuple variables become
    /// parameters, appended after `params` in first-occurrence order.
    pub fn new(
        name: impl Into<String>,
        vars: Vec<String>,
        params: Vec<String>,
        constraint: Formula,
    ) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::Invalid(format!("tuple variable `{v}` repeated")));
            }
            if params.contains(v) {
                return Err(Error::Invalid(format!("`{v}` is both a tuple variable and a parameter")));
            }
        }
        let free: Vec<String> =
            constraint.free_vars().into_iter().filter(|v| !vars.contains(v)).collect();
        let params = merge_names(&params, &free);
        Ok(IntegerSet { name: name.into(), vars, params, constraint })
    }

    pub fn universe(name: impl Into<String>, vars: &[&str]) -> Self {
        IntegerSet {
            name: name.into(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            params: Vec::new(),
            constraint: Formula::True,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_space(text)?;
        if raw.range.is_some() {
            return Err(Error::Syntax { pos: 0, msg: "expected a set, found a relation".into() });
        }
        let (name, entries) = raw.domain;
        let mut vars = Vec::new();
        for (e, pos) in entries {
            match e {
                Expr::Var(v) if !vars.contains(&v) => vars.push(v),
                other => {
                    return Err(Error::Syntax {
                        pos,
                        msg: format!("set tuple entries must be distinct variables, found `{other}`"),
                    })
                }
            }
        }
        IntegerSet::new(name.unwrap_or_default(), vars, raw.params, raw.constraint)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn constraint(&self) -> &Formula {
        &self.constraint
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same set with tuple variables renamed positionally.
    pub fn renamed(&self, vars: &[String]) -> Result<IntegerSet> {
        if vars.len() != self.dim() {
            return Err(Error::Arity { expected: self.dim(), got: vars.len() });
        }
        let map: Vec<(String, Expr)> = self
            .vars
            .iter()
            .zip(vars)
            .map(|(a, b)| (a.clone(), Expr::var(b.clone())))
            .collect();
        IntegerSet::new(self.name.clone(), vars.to_vec(), self.params.clone(), self.constraint.substitute(&map))
    }

    pub fn is_element(&self, t: &[i64], params: &Params) -> Result<bool> {
        if t.len() != self.dim() {
            return Err(Error::Arity { expected: self.dim(), got: t.len() });
        }
        let mut env = params.env_for(&self.params)?;
        for (v, x) in self.vars.iter().zip(t) {
            env.push(v.clone(), *x);
        }
        self.constraint.eval(&mut env, params.universe())
    }

    /// Members inside `bbox`, in lexicographic order.
    pub fn enumerate(&self, params: &Params, bbox: &BoundingBox) -> Result<Vec<Vec<i64>>> {
        if bbox.len() != self.dim() {
            return Err(Error::Arity { expected: self.dim(), got: bbox.len() });
        }
        let mut env = params.env_for(&self.params)?;
        let base = env.len();
        for v in &self.vars {
            env.push(v.clone(), 0);
        }
        let universe = params.universe();
        let mut out = Vec::new();
        bbox.for_each(|p| {
            for (k, x) in p.iter().enumerate() {
                env.set_at(base + k, *x);
            }
            if self.constraint.eval(&mut env, universe)? {
                out.push(p.to_vec());
            }
            Ok(())
        })?;
        Ok(out)
    }

    /// Smallest box implied by the affine conjuncts of the constraint.
    /// Non-affine conjuncts are ignored, so the box may be loose but never
    /// misses a member.
    pub fn bounding_box(&self, params: &Params) -> Result<BoundingBox> {
        let mut sys = System::new(merge_names(&self.vars, &self.params));
        sys.add_formula(&self.constraint, true)
            .map_err(|e| Error::Invalid(format!("cannot bound {}: {e:?}", self.name)))?;
        for (k, p) in self.params.iter().enumerate() {
            let v = params.get(p).ok_or_else(|| Error::Unbound(p.clone()))?;
            sys.fix(self.dim() + k, v);
        }
        let mut dims = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let mut s = sys.clone();
            for other in 0..self.dim() {
                if other != d {
                    s = s.projected(other);
                }
            }
            if s.is_trivially_infeasible() {
                return Ok(BoundingBox::new(vec![(1, 0); self.dim()]));
            }
            let (lows, ups) = s.bounds(d);
            let eval = |e: &Expr| e.eval(&Env::new());
            let lo = lows.iter().map(eval).collect::<Result<Vec<_>>>()?.into_iter().max();
            let hi = ups.iter().map(eval).collect::<Result<Vec<_>>>()?.into_iter().min();
            match (lo, hi) {
                (Some(lo), Some(hi)) => dims.push((lo, hi)),
                _ => return Err(Error::UnboundedBox(d)),
            }
        }
        Ok(BoundingBox::new(dims))
    }

    fn aligned(&self, other: &IntegerSet) -> Result<Formula> {
        if self.dim() != other.dim() {
            return Err(Error::SpaceMismatch(format!(
                "dimension {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        if self.name != other.name {
            return Err(Error::SpaceMismatch(format!("tuple name `{}` vs `{}`", self.name, other.name)));
        }
        Ok(other.renamed(&self.vars)?.constraint)
    }

    fn combine(&self, other: &IntegerSet, f: impl FnOnce(Formula, Formula) -> Formula) -> Result<IntegerSet> {
        let rhs = self.aligned(other)?;
        IntegerSet::new(
            self.name.clone(),
            self.vars.clone(),
            merge_names(&self.params, &other.params),
            f(self.constraint.clone(), rhs),
        )
    }

    pub fn intersect(&self, other: &IntegerSet) -> Result<IntegerSet> {
        self.combine(other, |a, b| Formula::and([a, b]))
    }

    pub fn union(&self, other: &IntegerSet) -> Result<IntegerSet> {
        self.combine(other, |a, b| Formula::or([a, b]))
    }

    pub fn subtract(&self, other: &IntegerSet) -> Result<IntegerSet> {
        self.combine(other, |a, b| Formula::and([a, Formula::not(b)]))
    }

    pub fn is_empty(&self, params: &Params, bbox: &BoundingBox) -> Result<bool> {
        Ok(self.enumerate(params, bbox)?.is_empty())
    }

    pub fn is_subset(&self, other: &IntegerSet, params: &Params, bbox: &BoundingBox) -> Result<bool> {
        self.subtract(other)?.is_empty(params, bbox)
    }
}

pub(crate) fn fmt_space_prefix(f: &mut fmt::Formatter<'_>, params: &[String]) -> fmt::Result {
    if !params.is_empty() {
        write!(f, "[{}] -> ", params.join(", "))?;
    }
    Ok(())
}

impl fmt::Display for IntegerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_space_prefix(f, &self.params)?;
        write!(f, "{{ {}({})", self.name, self.vars.join(", "))?;
        if self.constraint != Formula::True {
            write!(f, " : {}", self.constraint)?;
        }
        f.write_str(" }")
    }
}
