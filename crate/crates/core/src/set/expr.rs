//! Quasi-affine integer expressions.
//!
//! Products always carry a literal factor and `/`, `%` always divide by a
//! positive literal, so every expression stays inside Presburger arithmetic
//! once div/mod are expanded. Division is floor division and `%` is always
//! non-negative.

use std::fmt;
use std::ops;

use crate::error::{Error, Result};

/// Positive literal divisor of a `/` or `%` node.
///
/// The optional label is only used for printing, so that a split by a named
/// constant `N = 4` prints as `i/N` instead of `i/4`. Equality ignores it.
#[derive(Clone, Debug, Eq)]
pub struct Divisor {
    value: i64,
    label: Option<String>,
}

impl Divisor {
    pub fn new(value: i64) -> Result<Self> {
        if value <= 0 {
            return Err(Error::NonAffine {
                pos: 0,
                msg: format!("divisor must be a positive literal, got {value}"),
            });
        }
        Ok(Divisor { value, label: None })
    }

    pub fn named(value: i64, label: impl Into<String>) -> Result<Self> {
        let mut d = Divisor::new(value)?;
        d.label = Some(label.into());
        Ok(d)
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }
}

impl PartialEq for Divisor {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl std::hash::Hash for Divisor {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.value.hash(state);
    }
}

impl fmt::Display for Divisor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => f.write_str(l),
            None => write!(f, "{}", self.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    /// Literal times expression; there is no var*var node.
    Mul(i64, Box<Expr>),
    Div(Box<Expr>, Divisor),
    Mod(Box<Expr>, Divisor),
}

pub fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

pub fn floor_mod(a: i64, b: i64) -> i64 {
    a.rem_euclid(b)
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn scaled(self, k: i64) -> Expr {
        Expr::Mul(k, Box::new(self))
    }

    pub fn fdiv(self, d: Divisor) -> Expr {
        Expr::Div(Box::new(self), d)
    }

    pub fn fmod(self, d: Divisor) -> Expr {
        Expr::Mod(Box::new(self), d)
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<i64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, env: &impl Lookup) -> Result<i64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => env.lookup(v).ok_or_else(|| Error::Unbound(v.clone()))?,
            Expr::Neg(e) => e.eval(env)?.wrapping_neg(),
            Expr::Add(a, b) => a.eval(env)?.wrapping_add(b.eval(env)?),
            Expr::Mul(k, e) => k.wrapping_mul(e.eval(env)?),
            Expr::Div(e, d) => floor_div(e.eval(env)?, d.value),
            Expr::Mod(e, d) => floor_mod(e.eval(env)?, d.value),
        })
    }

    /// Free variables in first-occurrence order.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                if !out.iter().any(|o| o == v) {
                    out.push(v.clone());
                }
            }
            Expr::Neg(e) | Expr::Mul(_, e) | Expr::Div(e, _) | Expr::Mod(e, _) => {
                e.collect_vars(out)
            }
            Expr::Add(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == name,
            Expr::Neg(e) | Expr::Mul(_, e) | Expr::Div(e, _) | Expr::Mod(e, _) => e.mentions(name),
            Expr::Add(a, b) => a.mentions(name) || b.mentions(name),
        }
    }

    pub fn has_div_mod(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Div(..) | Expr::Mod(..) => true,
            Expr::Neg(e) | Expr::Mul(_, e) => e.has_div_mod(),
            Expr::Add(a, b) => a.has_div_mod() || b.has_div_mod(),
        }
    }

    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(name, with))),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.substitute(name, with)),
                Box::new(b.substitute(name, with)),
            ),
            Expr::Mul(k, e) => Expr::Mul(*k, Box::new(e.substitute(name, with))),
            Expr::Div(e, d) => Expr::Div(Box::new(e.substitute(name, with)), d.clone()),
            Expr::Mod(e, d) => Expr::Mod(Box::new(e.substitute(name, with)), d.clone()),
        }
    }

    /// Simultaneous substitution of several variables.
    pub fn substitute_all(&self, map: &[(String, Expr)]) -> Expr {
        match self {
            Expr::Var(v) => match map.iter().find(|(n, _)| n == v) {
                Some((_, e)) => e.clone(),
                None => self.clone(),
            },
            Expr::Const(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute_all(map))),
            Expr::Add(a, b) => {
                Expr::Add(Box::new(a.substitute_all(map)), Box::new(b.substitute_all(map)))
            }
            Expr::Mul(k, e) => Expr::Mul(*k, Box::new(e.substitute_all(map))),
            Expr::Div(e, d) => Expr::Div(Box::new(e.substitute_all(map)), d.clone()),
            Expr::Mod(e, d) => Expr::Mod(Box::new(e.substitute_all(map)), d.clone()),
        }
    }

    pub fn rename(&self, from: &str, to: &str) -> Expr {
        self.substitute(from, &Expr::var(to))
    }

    /// Coefficient/constant view of `self` as `coeff*name + rest`, where
    /// `rest` is evaluated in `env`. `None` when `name` occurs under a
    /// div/mod or `rest` mentions an unbound variable.
    pub(crate) fn linear_in(&self, name: &str, env: &impl Lookup) -> Option<(i64, i64)> {
        match self {
            Expr::Const(c) => Some((0, *c)),
            Expr::Var(v) if v == name => Some((1, 0)),
            Expr::Var(v) => env.lookup(v).map(|x| (0, x)),
            Expr::Neg(e) => e.linear_in(name, env).map(|(a, b)| (-a, -b)),
            Expr::Add(x, y) => {
                let (a1, b1) = x.linear_in(name, env)?;
                let (a2, b2) = y.linear_in(name, env)?;
                Some((a1 + a2, b1 + b2))
            }
            Expr::Mul(k, e) => e.linear_in(name, env).map(|(a, b)| (k * a, k * b)),
            Expr::Div(..) | Expr::Mod(..) => {
                if self.mentions(name) {
                    None
                } else {
                    self.eval(env).ok().map(|v| (0, v))
                }
            }
        }
    }

    /// Canonical form: affine parts folded into `c1*t1 + ... + k` with terms
    /// in first-occurrence order; div/mod nodes normalized inside.
    pub fn normalize(&self) -> Expr {
        Linear::of(self).to_expr()
    }

    /// Semantic equality up to normalization.
    pub fn same_as(&self, other: &Expr) -> bool {
        let d = Linear::of(&(self.clone() - other.clone()));
        d.terms.is_empty() && d.constant == 0
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) => 1,
            Expr::Mul(..) | Expr::Div(..) | Expr::Mod(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0 => 3,
            Expr::Const(_) | Expr::Var(_) => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Var(v) => f.write_str(v)?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_prec(f, 3)?;
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                match b.as_ref() {
                    Expr::Neg(inner) => {
                        f.write_str(" - ")?;
                        inner.fmt_prec(f, 2)?;
                    }
                    Expr::Const(c) if *c < 0 => write!(f, " - {}", c.unsigned_abs())?,
                    Expr::Mul(k, inner) if *k < 0 => {
                        f.write_str(" - ")?;
                        if *k != -1 {
                            write!(f, "{}*", k.unsigned_abs())?;
                        }
                        inner.fmt_prec(f, 3)?;
                    }
                    _ => {
                        f.write_str(" + ")?;
                        b.fmt_prec(f, 2)?;
                    }
                }
            }
            Expr::Mul(k, e) => {
                if *k == -1 {
                    f.write_str("-")?;
                } else {
                    write!(f, "{k}*")?;
                }
                e.fmt_prec(f, 3)?;
            }
            Expr::Div(e, d) => {
                e.fmt_prec(f, 3)?;
                write!(f, "/{d}")?;
            }
            Expr::Mod(e, d) => {
                e.fmt_prec(f, 3)?;
                write!(f, "%{d}")?;
            }
        }
        if p < min {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(Expr::Neg(Box::new(rhs))))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl ops::Add<i64> for Expr {
    type Output = Expr;
    fn add(self, rhs: i64) -> Expr {
        self + Expr::Const(rhs)
    }
}

impl ops::Sub<i64> for Expr {
    type Output = Expr;
    fn sub(self, rhs: i64) -> Expr {
        self + Expr::Const(-rhs)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::Const(v)
    }
}

impl From<&str> for Expr {
    fn from(v: &str) -> Self {
        Expr::Var(v.to_string())
    }
}

/// Name → value lookup used during evaluation.
pub trait Lookup {
    fn lookup(&self, name: &str) -> Option<i64>;
}

impl<F: Fn(&str) -> Option<i64>> Lookup for F {
    fn lookup(&self, name: &str) -> Option<i64> {
        self(name)
    }
}

/// A scoped stack of variable bindings; later bindings shadow earlier ones.
#[derive(Clone, Debug, Default)]
pub struct Env {
    names: Vec<String>,
    values: Vec<i64>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: i64) {
        self.names.push(name.into());
        self.values.push(value);
    }

    pub fn pop(&mut self) {
        self.names.pop();
        self.values.pop();
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.names.truncate(len);
        self.values.truncate(len);
    }

    pub fn set_at(&mut self, idx: usize, value: i64) {
        self.values[idx] = value;
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.names
            .iter()
            .rposition(|n| n == name)
            .map(|i| self.values[i])
    }
}

impl Lookup for Env {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.get(name)
    }
}

/// Sum of `coeff * term` plus a constant; terms are variables or
/// div/mod nodes (compared structurally).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Linear {
    pub terms: Vec<(Expr, i64)>,
    pub constant: i64,
}

impl Linear {
    pub fn zero() -> Self {
        Linear { terms: Vec::new(), constant: 0 }
    }

    pub fn of(e: &Expr) -> Linear {
        let mut l = Linear::zero();
        l.accumulate(e, 1);
        l.terms.retain(|(_, c)| *c != 0);
        l
    }

    fn add_term(&mut self, t: Expr, k: i64) {
        if let Some(slot) = self.terms.iter_mut().find(|(x, _)| *x == t) {
            slot.1 += k;
        } else {
            self.terms.push((t, k));
        }
    }

    fn accumulate(&mut self, e: &Expr, k: i64) {
        match e {
            Expr::Const(c) => self.constant += k * c,
            Expr::Var(_) => self.add_term(e.clone(), k),
            Expr::Neg(x) => self.accumulate(x, -k),
            Expr::Add(a, b) => {
                self.accumulate(a, k);
                self.accumulate(b, k);
            }
            Expr::Mul(m, x) => self.accumulate(x, k * m),
            Expr::Div(x, d) => {
                let inner = x.normalize();
                if let Some(c) = inner.as_const() {
                    self.constant += k * floor_div(c, d.value);
                } else if d.value == 1 {
                    self.accumulate(&inner, k);
                } else {
                    self.add_term(Expr::Div(Box::new(inner), d.clone()), k);
                }
            }
            Expr::Mod(x, d) => {
                let inner = x.normalize();
                if let Some(c) = inner.as_const() {
                    self.constant += k * floor_mod(c, d.value);
                } else if d.value != 1 {
                    self.add_term(Expr::Mod(Box::new(inner), d.clone()), k);
                }
            }
        }
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.terms
            .iter()
            .find(|(t, _)| t.as_var() == Some(name))
            .map(|(_, c)| *c)
            .unwrap_or(0)
    }

    pub fn is_affine(&self) -> bool {
        self.terms.iter().all(|(t, _)| t.as_var().is_some())
    }

    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        for (t, c) in &self.terms {
            let term = match *c {
                1 => t.clone(),
                -1 if acc.is_none() => Expr::Neg(Box::new(t.clone())),
                _ => Expr::Mul(*c, Box::new(t.clone())),
            };
            acc = Some(match acc {
                None => term,
                Some(a) => match term {
                    Expr::Mul(k, x) if k == -1 => a - *x,
                    other => a + other,
                },
            });
        }
        match acc {
            None => Expr::Const(self.constant),
            Some(a) if self.constant == 0 => a,
            Some(a) => a + Expr::Const(self.constant),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, i64)]) -> Env {
        let mut e = Env::new();
        for (n, v) in pairs {
            e.push(*n, *v);
        }
        e
    }

    #[test]
    fn floor_semantics_for_negatives() {
        let d = Divisor::new(3).unwrap();
        let e = Expr::var("i").fdiv(d.clone());
        let m = Expr::var("i").fmod(d);
        assert_eq!(e.eval(&env(&[("i", -1)])).unwrap(), -1);
        assert_eq!(m.eval(&env(&[("i", -1)])).unwrap(), 2);
        assert_eq!(e.eval(&env(&[("i", 7)])).unwrap(), 2);
        assert_eq!(m.eval(&env(&[("i", 7)])).unwrap(), 1);
    }

    #[test]
    fn divisor_rejects_nonpositive() {
        assert!(Divisor::new(0).is_err());
        assert!(Divisor::new(-2).is_err());
    }

    #[test]
    fn printing() {
        let n = Divisor::named(4, "N").unwrap();
        assert_eq!(Expr::var("i").fdiv(n.clone()).to_string(), "i/N");
        assert_eq!(Expr::var("i").fmod(n).to_string(), "i%N");
        let e = Expr::var("t") + Expr::var("l");
        assert_eq!(e.to_string(), "t + l");
        let e = Expr::var("w") - Expr::var("T") + 1;
        assert_eq!(e.to_string(), "w - T + 1");
        let e = (Expr::var("i") + Expr::var("j")).fdiv(Divisor::new(2).unwrap());
        assert_eq!(e.to_string(), "(i + j)/2");
        assert_eq!((-Expr::var("i")).to_string(), "-i");
        assert_eq!((Expr::var("a") + Expr::var("b").scaled(-2)).to_string(), "a - 2*b");
    }

    #[test]
    fn normalize_folds_affine_parts() {
        let e = Expr::var("w") - Expr::var("l") + 1 - Expr::var("w") + Expr::var("l").scaled(2);
        assert_eq!(e.normalize().to_string(), "l + 1");
        let a = Expr::var("t") + Expr::var("l");
        let b = Expr::var("l") + Expr::var("t");
        assert!(a.same_as(&b));
        assert_eq!(Expr::Const(7).fdiv(Divisor::new(2).unwrap()).normalize(), Expr::Const(3));
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let e = Expr::var("q") + 1;
        assert_eq!(e.eval(&Env::new()), Err(Error::Unbound("q".into())));
    }

    #[test]
    fn linear_in_extracts_coefficients() {
        let e = Expr::var("k").scaled(2) - Expr::var("i") + 3;
        let en = env(&[("i", 4)]);
        assert_eq!(e.linear_in("k", &en), Some((2, -1)));
        let m = Expr::var("k").fmod(Divisor::new(2).unwrap());
        assert_eq!(m.linear_in("k", &en), None);
    }
}
