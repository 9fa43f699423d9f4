//! Scheduling commands. Each returns a new program; the input is untouched.
//!
//! Dimensions are named by expression text (`i`, `i%N`, `t + l`) and matched
//! against dynamic entries after normalization. Parameter names may be used
//! as split factors, in which case they print symbolically (`i/N`).

use std::fmt;

use super::{Entry, Program, Tag};
use crate::error::{Error, Result};
use crate::set::{parse_expr_with, Divisor, Expr, Linear};

/// Computations a command applies to; empty means all of them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Selection(pub Vec<String>);

impl Selection {
    pub fn all() -> Self {
        Selection(Vec::new())
    }

    pub fn of(names: &[&str]) -> Self {
        Selection(names.iter().map(|s| s.to_string()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Interchange { a: String, b: String },
    Split { dim: String, factor: String },
    Tile { a: String, b: String, na: String, nb: String },
    Fission { depth: usize, classes: Vec<Vec<String>> },
    Skew { a: String, b: String, factor: i64 },
    Reverse { dim: String },
    Parallelize { dim: String },
    Vectorize { dim: String, width: u32 },
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Interchange { a, b } => write!(f, "interchange {a} {b}"),
            Command::Split { dim, factor } => write!(f, "split {dim} {factor}"),
            Command::Tile { a, b, na, nb } => write!(f, "tile {a} {b} {na} {nb}"),
            Command::Fission { depth, classes } => {
                let cs: Vec<String> = classes.iter().map(|c| c.join(",")).collect();
                write!(f, "fission {depth} {}", cs.join(" | "))
            }
            Command::Skew { a, b, factor } => write!(f, "skew {a} {b} {factor}"),
            Command::Reverse { dim } => write!(f, "reverse {dim}"),
            Command::Parallelize { dim } => write!(f, "parallelize {dim}"),
            Command::Vectorize { dim, width } => write!(f, "vectorize {dim} {width}"),
        }
    }
}

impl Command {
    /// Parse one script line: `[on S1,S2:] verb args...`. Dimension
    /// arguments must not contain spaces.
    pub fn parse(line: &str) -> Result<(Selection, Command)> {
        let bad = |msg: &str| Error::Syntax { pos: 0, msg: format!("{msg}: `{line}`") };
        let mut text = line.trim();
        let mut sel = Selection::all();
        if let Some(rest) = text.strip_prefix("on ") {
            let (names, rest) = rest.split_once(':').ok_or_else(|| bad("missing `:` after selection"))?;
            sel = Selection(names.split(',').map(|s| s.trim().to_string()).collect());
            text = rest.trim();
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        let Some((&verb, args)) = words.split_first() else {
            return Err(bad("empty command"));
        };
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(bad(&format!("`{verb}` takes {n} arguments")))
            }
        };
        let s = |i: usize| args[i].to_string();
        let cmd = match verb {
            "interchange" => {
                want(2)?;
                Command::Interchange { a: s(0), b: s(1) }
            }
            "split" | "strip-mine" => {
                want(2)?;
                Command::Split { dim: s(0), factor: s(1) }
            }
            "tile" => {
                want(4)?;
                Command::Tile { a: s(0), b: s(1), na: s(2), nb: s(3) }
            }
            "fission" => {
                let (d, rest) = args.split_first().ok_or_else(|| bad("missing depth"))?;
                let depth = d.parse().map_err(|_| bad("depth must be an integer"))?;
                let classes = rest
                    .join(" ")
                    .split('|')
                    .map(|c| c.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect())
                    .collect();
                Command::Fission { depth, classes }
            }
            "skew" => {
                want(3)?;
                let factor = args[2].parse().map_err(|_| bad("skew factor must be an integer"))?;
                Command::Skew { a: s(0), b: s(1), factor }
            }
            "reverse" => {
                want(1)?;
                Command::Reverse { dim: s(0) }
            }
            "parallelize" => {
                want(1)?;
                Command::Parallelize { dim: s(0) }
            }
            "vectorize" => {
                want(2)?;
                let width = args[1].parse().map_err(|_| bad("width must be an integer"))?;
                Command::Vectorize { dim: s(0), width }
            }
            _ => return Err(bad("unknown command")),
        };
        Ok((sel, cmd))
    }
}

impl Program {
    fn targets(&self, sel: &Selection) -> Result<Vec<usize>> {
        if sel.0.is_empty() {
            return Ok((0..self.comps.len()).collect());
        }
        sel.0
            .iter()
            .map(|n| {
                self.comp_index(n)
                    .ok_or_else(|| Error::Unknown { kind: "computation", name: n.clone() })
            })
            .collect()
    }

    fn dim_expr(&self, text: &str) -> Result<Expr> {
        parse_expr_with(text, &self.constants())
    }

    fn divisor(&self, text: &str) -> Result<Divisor> {
        let d = match text.trim().parse::<i64>() {
            Ok(v) => Divisor::new(v),
            Err(_) => {
                let v = self
                    .params
                    .get(text.trim())
                    .ok_or_else(|| Error::Unbound(text.trim().to_string()))?;
                Divisor::named(v, text.trim())
            }
        }
        .map_err(|_| Error::Schedule(format!("factor `{text}` must be at least 2")))?;
        if d.value() < 2 {
            return Err(Error::Schedule(format!("factor `{text}` must be at least 2")));
        }
        Ok(d)
    }

    fn position(&self, ci: usize, dim: &Expr) -> Result<usize> {
        self.schedules[ci].find(dim).ok_or_else(|| {
            Error::Schedule(format!("dimension `{dim}` not found in {}", self.schedules[ci].dump()))
        })
    }

    pub fn apply(&self, sel: &Selection, cmd: &Command) -> Result<Program> {
        match cmd {
            Command::Interchange { a, b } => self.interchange(sel, a, b),
            Command::Split { dim, factor } => self.split(sel, dim, factor),
            Command::Tile { a, b, na, nb } => self.tile(sel, a, b, na, nb),
            Command::Fission { depth, classes } => {
                let cs: Vec<Vec<&str>> =
                    classes.iter().map(|c| c.iter().map(|s| s.as_str()).collect()).collect();
                let refs: Vec<&[&str]> = cs.iter().map(|c| c.as_slice()).collect();
                self.fission(*depth, &refs)
            }
            Command::Skew { a, b, factor } => self.skew(sel, a, b, *factor),
            Command::Reverse { dim } => self.reverse(sel, dim),
            Command::Parallelize { dim } => self.parallelize(sel, dim),
            Command::Vectorize { dim, width } => self.vectorize(sel, dim, *width),
        }
    }

    /// Apply a script of commands separated by newlines or `;`. Text after
    /// `#` is ignored.
    pub fn run_script(&self, script: &str) -> Result<Program> {
        let mut p = self.clone();
        for line in script.lines() {
            let line = line.split('#').next().unwrap_or("");
            for part in line.split(';') {
                if part.trim().is_empty() {
                    continue;
                }
                let (sel, cmd) = Command::parse(part)?;
                p = p.apply(&sel, &cmd)?;
            }
        }
        Ok(p)
    }

    pub fn interchange(&self, sel: &Selection, a: &str, b: &str) -> Result<Program> {
        let (ea, eb) = (self.dim_expr(a)?, self.dim_expr(b)?);
        let mut p = self.clone();
        for ci in self.targets(sel)? {
            let (pa, pb) = (self.position(ci, &ea)?, self.position(ci, &eb)?);
            p.schedules[ci].entries.swap(pa, pb);
        }
        Ok(p)
    }

    /// Strip-mine `dim` into `dim/N, dim%N`.
    pub fn split(&self, sel: &Selection, dim: &str, factor: &str) -> Result<Program> {
        let e = self.dim_expr(dim)?;
        let d = self.divisor(factor)?;
        let mut p = self.clone();
        for ci in self.targets(sel)? {
            let pos = self.position(ci, &e)?;
            let entries = &mut p.schedules[ci].entries;
            let Entry::Dyn(x, tag) = entries[pos].clone() else { unreachable!() };
            if tag != Tag::Seq {
                return Err(Error::Schedule(format!("cannot split tagged dimension `{x}`")));
            }
            entries[pos] = Entry::Dyn(x.clone().fdiv(d.clone()), Tag::Seq);
            entries.insert(pos + 1, Entry::Dyn(x.fmod(d.clone()), Tag::Seq));
        }
        p.pad();
        Ok(p)
    }

    /// `split a; split b; interchange a%Na b/Nb` on adjacent dimensions.
    pub fn tile(&self, sel: &Selection, a: &str, b: &str, na: &str, nb: &str) -> Result<Program> {
        let (ea, eb) = (self.dim_expr(a)?, self.dim_expr(b)?);
        for ci in self.targets(sel)? {
            if self.position(ci, &eb)? != self.position(ci, &ea)? + 1 {
                return Err(Error::Schedule(format!(
                    "tile needs `{a}` directly followed by `{b}` in {}",
                    self.schedules[ci].dump()
                )));
            }
        }
        let (da, db) = (self.divisor(na)?, self.divisor(nb)?);
        let p = self.split(sel, a, na)?.split(sel, b, nb)?;
        let inner_a = ea.fmod(da).to_string();
        let outer_b = eb.fdiv(db).to_string();
        p.interchange(sel, &inner_a, &outer_b)
    }

    /// Insert `Static(class)` at vector position `depth` for every
    /// computation; `classes` must partition all computations.
    pub fn fission(&self, depth: usize, classes: &[&[&str]]) -> Result<Program> {
        let mut class_of = vec![None; self.comps.len()];
        for (k, class) in classes.iter().enumerate() {
            for name in *class {
                let ci = self
                    .comp_index(name)
                    .ok_or_else(|| Error::Unknown { kind: "computation", name: name.to_string() })?;
                if class_of[ci].replace(k).is_some() {
                    return Err(Error::Schedule(format!("`{name}` appears in two classes")));
                }
            }
        }
        if let Some(ci) = class_of.iter().position(|c| c.is_none()) {
            return Err(Error::Schedule(format!("`{}` missing from fission partition", self.comps[ci].name)));
        }
        let len = self.schedules.first().map_or(0, |s| s.entries.len());
        if depth > len {
            return Err(Error::Schedule(format!("fission depth {depth} exceeds vector length {len}")));
        }
        let mut p = self.clone();
        for (ci, s) in p.schedules.iter_mut().enumerate() {
            s.entries.insert(depth, Entry::Static(class_of[ci].expect("checked") as i64));
        }
        p.drop_redundant_trailing_static();
        Ok(p)
    }

    /// Remove the last position when it is static everywhere and every pair
    /// of computations is already separated by an earlier static.
    fn drop_redundant_trailing_static(&mut self) {
        let Some(n) = self.schedules.first().map(|s| s.entries.len()) else { return };
        if n < 2 || !self.schedules.iter().all(|s| s.entries[n - 1].is_static()) {
            return;
        }
        let separated = |a: &[Entry], b: &[Entry]| {
            a[..n - 1]
                .iter()
                .zip(&b[..n - 1])
                .any(|(x, y)| matches!((x, y), (Entry::Static(u), Entry::Static(v)) if u != v))
        };
        for (i, a) in self.schedules.iter().enumerate() {
            for b in &self.schedules[i + 1..] {
                if !separated(&a.entries, &b.entries) {
                    return;
                }
            }
        }
        for s in &mut self.schedules {
            s.entries.pop();
        }
    }

    /// Replace dimension `a` by `a + f*b`.
    pub fn skew(&self, sel: &Selection, a: &str, b: &str, factor: i64) -> Result<Program> {
        if factor == 0 {
            return Err(Error::Schedule("skew factor must be non-zero".into()));
        }
        let (ea, eb) = (self.dim_expr(a)?, self.dim_expr(b)?);
        let mut p = self.clone();
        for ci in self.targets(sel)? {
            let pa = self.position(ci, &ea)?;
            let pb = self.position(ci, &eb)?;
            if pa == pb {
                return Err(Error::Schedule(format!("cannot skew `{a}` by itself")));
            }
            let Entry::Dyn(xa, tag) = self.schedules[ci].entries[pa].clone() else { unreachable!() };
            let xb = self.schedules[ci].entries[pb].expr().expect("dynamic").clone();
            let skewed = Linear::of(&(xa + xb.scaled(factor))).to_expr();
            p.schedules[ci].entries[pa] = Entry::Dyn(skewed, tag);
        }
        Ok(p)
    }

    /// Run dimension `dim` backwards.
    pub fn reverse(&self, sel: &Selection, dim: &str) -> Result<Program> {
        let e = self.dim_expr(dim)?;
        let mut p = self.clone();
        for ci in self.targets(sel)? {
            let pos = self.position(ci, &e)?;
            let Entry::Dyn(x, tag) = self.schedules[ci].entries[pos].clone() else { unreachable!() };
            p.schedules[ci].entries[pos] = Entry::Dyn(Linear::of(&-x).to_expr(), tag);
        }
        Ok(p)
    }

    fn tag_entry(&self, sel: &Selection, dim: &Expr, tag: Tag) -> Result<Program> {
        let mut p = self.clone();
        for ci in self.targets(sel)? {
            let pos = self.position(ci, dim)?;
            let entries = &mut p.schedules[ci].entries;
            let Entry::Dyn(x, old) = entries[pos].clone() else { unreachable!() };
            if old != Tag::Seq {
                return Err(Error::Schedule(format!("`{x}` is already tagged")));
            }
            entries[pos] = Entry::Dyn(x, tag);
            p.schedules[ci].validate()?;
        }
        Ok(p)
    }

    pub fn parallelize(&self, sel: &Selection, dim: &str) -> Result<Program> {
        self.tag_entry(sel, &self.dim_expr(dim)?, Tag::Cpu)
    }

    /// Split `dim` by `width`, move the lane dimension last and tag it.
    pub fn vectorize(&self, sel: &Selection, dim: &str, width: u32) -> Result<Program> {
        if width < 2 {
            return Err(Error::Schedule(format!("vector width {width} below 2")));
        }
        let w = width.to_string();
        let mut p = self.split(sel, dim, &w)?;
        let lane = self.dim_expr(dim)?.fmod(Divisor::new(width as i64)?);
        for ci in self.targets(sel)? {
            let pos = p.position(ci, &lane)?;
            let entries = &mut p.schedules[ci].entries;
            let e = entries.remove(pos);
            entries.push(e);
        }
        p.tag_entry(sel, &lane, Tag::Vec(width))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::nest::two_statement_nest;

    fn dump(p: &Program) -> String {
        p.dump_schedules()
    }

    #[test]
    fn interchange_is_an_involution() {
        let p = two_statement_nest();
        let q = p.interchange(&Selection::all(), "i", "j").unwrap();
        assert_eq!(dump(&q), "S1: (j, i, 0)\nS2: (j, i, 1)\n");
        assert_eq!(q.interchange(&Selection::all(), "i", "j").unwrap(), p);
        assert_eq!(p.interchange(&Selection::all(), "i", "i").unwrap(), p);
    }

    #[test]
    fn split_rejects_degenerate_factor() {
        let p = two_statement_nest();
        assert!(p.split(&Selection::all(), "i", "1").is_err());
        assert!(p.split(&Selection::all(), "k", "2").is_err());
    }

    #[test]
    fn tile_orders_block_dims_first() {
        let p = two_statement_nest().run_script("tile i j 2 2").unwrap();
        assert_eq!(dump(&p), "S1: (i/2, j/2, i%2, j%2, 0)\nS2: (i/2, j/2, i%2, j%2, 1)\n");
        p.check_bijective().unwrap();
        let err = two_statement_nest().run_script("on S1: interchange i j; tile j 0 2 2");
        assert!(err.is_err());
    }

    #[test]
    fn skew_and_unskew() {
        let p = two_statement_nest();
        let s = p.skew(&Selection::all(), "j", "i", 1).unwrap();
        assert_eq!(s.schedules[0].dump(), "S1: (i, j + i, 0)");
        let back = s.skew(&Selection::all(), "j + i", "i", -1).unwrap();
        assert_eq!(back.schedules[0].dump(), "S1: (i, j, 0)");
        assert!(p.skew(&Selection::all(), "j", "i", 0).is_err());
    }

    #[test]
    fn reverse_negates() {
        let p = two_statement_nest().run_script("reverse i").unwrap();
        assert_eq!(p.schedules[1].dump(), "S2: (-i, j, 1)");
        p.check_bijective().unwrap();
    }

    #[test]
    fn tagging_errors() {
        let p = two_statement_nest().run_script("parallelize i").unwrap();
        assert!(p.parallelize(&Selection::all(), "i").is_err());
        assert!(p.parallelize(&Selection::all(), "j").is_err());
        assert!(two_statement_nest().vectorize(&Selection::all(), "j", 1).is_err());
    }

    #[test]
    fn fission_partition_checks() {
        let p = two_statement_nest();
        assert!(p.fission(1, &[&["S1"]]).is_err());
        assert!(p.fission(9, &[&["S1"], &["S2"]]).is_err());
        let single = p.fission(1, &[&["S1", "S2"]]).unwrap();
        assert_eq!(dump(&single), "S1: (i, 0, j, 0)\nS2: (i, 0, j, 1)\n");
    }

    #[test]
    fn script_parsing() {
        let (sel, cmd) = Command::parse("on S1, S2: fission 1 S1 | S2").unwrap();
        assert_eq!(sel, Selection::of(&["S1", "S2"]));
        assert_eq!(cmd.to_string(), "fission 1 S1 | S2");
        assert!(Command::parse("twist i").is_err());
        assert!(Command::parse("split i").is_err());
    }
}
