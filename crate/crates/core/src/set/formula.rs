//! Presburger formulas over quasi-affine terms.

use std::fmt;

use super::expr::{floor_div, Env, Expr};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl RelOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Eq => a == b,
            RelOp::Ge => a >= b,
            RelOp::Gt => a > b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Eq => "=",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Expr, RelOp, Expr),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

/// Inclusive range scanned by quantifiers that no conjunct bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Universe {
    pub lo: i64,
    pub hi: i64,
}

impl Default for Universe {
    fn default() -> Self {
        Universe { lo: -64, hi: 64 }
    }
}

fn floor_div_any(n: i64, d: i64) -> i64 {
    if d < 0 {
        floor_div(-n, -d)
    } else {
        floor_div(n, d)
    }
}

fn ceil_div_any(n: i64, d: i64) -> i64 {
    -floor_div_any(-n, d)
}

impl Formula {
    pub fn atom(a: impl Into<Expr>, op: RelOp, b: impl Into<Expr>) -> Formula {
        Formula::Atom(a.into(), op, b.into())
    }

    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn exists(vars: &[String], body: Formula) -> Formula {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Formula::Exists(v.clone(), Box::new(acc)))
    }

    /// Evaluate with every free variable bound in `env`.
    pub fn eval(&self, env: &mut Env, universe: Universe) -> Result<bool> {
        match self {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(a, op, b) => Ok(op.holds(a.eval(env)?, b.eval(env)?)),
            Formula::And(parts) => {
                for p in parts {
                    if !p.eval(env, universe)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(parts) => {
                for p in parts {
                    if p.eval(env, universe)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Not(f) => Ok(!f.eval(env, universe)?),
            Formula::Exists(v, body) => {
                let Some((lo, hi)) = body.range_for(v, env, universe) else {
                    return Ok(false);
                };
                let mark = env.len();
                env.push(v.clone(), lo);
                let mut found = false;
                for x in lo..=hi {
                    env.set_at(mark, x);
                    if body.eval(env, universe)? {
                        found = true;
                        break;
                    }
                }
                env.truncate(mark);
                Ok(found)
            }
            Formula::Forall(v, body) => {
                let mark = env.len();
                env.push(v.clone(), universe.lo);
                let mut all = true;
                for x in universe.lo..=universe.hi {
                    env.set_at(mark, x);
                    if !body.eval(env, universe)? {
                        all = false;
                        break;
                    }
                }
                env.truncate(mark);
                Ok(all)
            }
        }
    }

    /// Values of `v` outside the returned range falsify some top-level
    /// conjunct of `self`; `None` means no value can satisfy it.
    fn range_for(&self, v: &str, env: &Env, universe: Universe) -> Option<(i64, i64)> {
        let mut lo = universe.lo;
        let mut hi = universe.hi;
        let mut atoms = Vec::new();
        self.bounding_atoms(&mut Vec::new(), &mut atoms);
        for c in atoms {
            let Formula::Atom(a, op, b) = c else { continue };
            let Some((ka, ca)) = a.linear_in(v, env) else { continue };
            let Some((kb, cb)) = b.linear_in(v, env) else { continue };
            // k*v + c  op  0
            let k = ka - kb;
            let c0 = ca - cb;
            if k == 0 {
                if !op.holds(c0, 0) {
                    return None;
                }
                continue;
            }
            let (upper, lower) = match op {
                RelOp::Lt => (Some(-c0 - 1), None),
                RelOp::Le => (Some(-c0), None),
                RelOp::Gt => (None, Some(-c0 + 1)),
                RelOp::Ge => (None, Some(-c0)),
                RelOp::Eq => {
                    if (-c0) % k != 0 {
                        return None;
                    }
                    let x = -c0 / k;
                    lo = lo.max(x);
                    hi = hi.min(x);
                    continue;
                }
            };
            // k*v <= u  or  k*v >= l
            if let Some(u) = upper {
                if k > 0 {
                    hi = hi.min(floor_div_any(u, k));
                } else {
                    lo = lo.max(ceil_div_any(u, k));
                }
            }
            if let Some(l) = lower {
                if k > 0 {
                    lo = lo.max(ceil_div_any(l, k));
                } else {
                    hi = hi.min(floor_div_any(l, k));
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Atoms that must hold for `self` to hold, looking through nested
    /// conjunctions and existentials; atoms mentioning an inner bound
    /// variable are skipped.
    fn bounding_atoms<'a>(&'a self, inner: &mut Vec<&'a str>, out: &mut Vec<&'a Formula>) {
        match self {
            Formula::And(parts) => {
                for p in parts {
                    p.bounding_atoms(inner, out);
                }
            }
            Formula::Atom(a, _, b) => {
                if !inner.iter().any(|v| a.mentions(v) || b.mentions(v)) {
                    out.push(self);
                }
            }
            Formula::Exists(v, body) => {
                inner.push(v);
                body.bounding_atoms(inner, out);
                inner.pop();
            }
            _ => {}
        }
    }

    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a, _, b) => {
                for v in a.vars().into_iter().chain(b.vars()) {
                    if !bound.contains(&v) && !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
            Formula::And(ps) | Formula::Or(ps) => {
                for p in ps {
                    p.collect_free(bound, out);
                }
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    fn all_names(&self, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a, _, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(|p| p.all_names(out)),
            Formula::Not(f) => f.all_names(out),
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
                f.all_names(out);
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of free variables.
    pub fn substitute(&self, map: &[(String, Expr)]) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(a, op, b) => Formula::Atom(a.substitute_all(map), *op, b.substitute_all(map)),
            Formula::And(ps) => Formula::And(ps.iter().map(|p| p.substitute(map)).collect()),
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| p.substitute(map)).collect()),
            Formula::Not(f) => Formula::Not(Box::new(f.substitute(map))),
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                let inner: Vec<(String, Expr)> =
                    map.iter().filter(|(n, _)| n != v).cloned().collect();
                let captured = inner.iter().any(|(_, e)| e.mentions(v));
                let (name, body) = if captured {
                    let mut taken = Vec::new();
                    f.all_names(&mut taken);
                    for (n, e) in &inner {
                        taken.push(n.clone());
                        e.collect_vars(&mut taken);
                    }
                    let fresh = fresh_name(v, &taken);
                    let renamed = f.substitute(&[(v.clone(), Expr::var(fresh.clone()))]);
                    (fresh, renamed)
                } else {
                    (v.clone(), (**f).clone())
                };
                let body = Box::new(body.substitute(&inner));
                match self {
                    Formula::Exists(..) => Formula::Exists(name, body),
                    _ => Formula::Forall(name, body),
                }
            }
        }
    }

    pub fn rename(&self, renames: &[(String, String)]) -> Formula {
        let map: Vec<(String, Expr)> = renames
            .iter()
            .map(|(a, b)| (a.clone(), Expr::var(b.clone())))
            .collect();
        self.substitute(&map)
    }

    /// Top-level conjuncts (a non-conjunction is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(ps) => ps.iter().flat_map(|p| p.conjuncts()).collect(),
            Formula::True => Vec::new(),
            other => vec![other],
        }
    }

    fn level(&self) -> u8 {
        match self {
            Formula::Or(_) => 1,
            Formula::And(_) => 2,
            Formula::Exists(..) | Formula::Forall(..) => 0,
            _ => 3,
        }
    }

    fn fmt_in(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.level() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Formula::True => f.write_str("true")?,
            Formula::False => f.write_str("false")?,
            Formula::Atom(a, op, b) => write!(f, "{a} {} {b}", op.symbol())?,
            Formula::And(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    p.fmt_in(f, 3)?;
                }
            }
            Formula::Or(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" or ")?;
                    }
                    p.fmt_in(f, 2)?;
                }
            }
            Formula::Not(inner) => {
                f.write_str("not ")?;
                inner.fmt_in(f, 3)?;
            }
            Formula::Exists(v, body) => {
                write!(f, "exists {v}. ")?;
                body.fmt_in(f, 0)?;
            }
            Formula::Forall(v, body) => {
                write!(f, "forall {v}. ")?;
                body.fmt_in(f, 0)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_in(f, 0)
    }
}

pub(crate) fn fresh_name(base: &str, taken: &[String]) -> String {
    let mut candidate = format!("{base}'");
    while taken.iter().any(|t| *t == candidate) {
        candidate.push('\'');
    }
    candidate
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn exists_uses_conjunct_bounds() {
        // exists k. i = 2k
        let f = Formula::Exists(
            "k".into(),
            Box::new(Formula::atom(v("i"), RelOp::Eq, v("k").scaled(2))),
        );
        let tiny = Universe { lo: -1, hi: 1 };
        let mut env = Env::new();
        env.push("i", 4);
        // k = 2 is outside the universe, so the equality is what decides.
        assert!(!f.eval(&mut env, tiny).unwrap());
        assert!(f.eval(&mut env, Universe::default()).unwrap());
        env.set_at(0, 5);
        assert!(!f.eval(&mut env, Universe::default()).unwrap());
    }

    #[test]
    fn forall_scans_universe() {
        // forall k. k*0 <= i
        let f = Formula::Forall(
            "k".into(),
            Box::new(Formula::atom(v("k").scaled(0), RelOp::Le, v("i"))),
        );
        let mut env = Env::new();
        env.push("i", 0);
        assert!(f.eval(&mut env, Universe::default()).unwrap());
        env.set_at(0, -1);
        assert!(!f.eval(&mut env, Universe::default()).unwrap());
    }

    #[test]
    fn substitution_avoids_capture() {
        // exists k. k = i   with i := k + 1 must not capture.
        let f = Formula::Exists("k".into(), Box::new(Formula::atom(v("k"), RelOp::Eq, v("i"))));
        let g = f.substitute(&[("i".into(), v("k") + 1)]);
        assert_eq!(g.free_vars(), vec!["k".to_string()]);
        let mut env = Env::new();
        env.push("k", 3);
        assert!(g.eval(&mut env, Universe::default()).unwrap());
    }

    #[test]
    fn display_parenthesizes_or_inside_and() {
        let f = Formula::and([
            Formula::or([
                Formula::atom(v("i"), RelOp::Lt, 0),
                Formula::atom(v("i"), RelOp::Gt, 5),
            ]),
            Formula::atom(v("j"), RelOp::Eq, 1),
        ]);
        assert_eq!(f.to_string(), "(i < 0 or i > 5) and j = 1");
    }
}
