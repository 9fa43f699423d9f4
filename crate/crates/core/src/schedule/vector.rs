use std::fmt;

use crate::error::{Error, Result};
use crate::set::{parse_expr_with, Expr, Formula, IntegerSet, Lookup, RelOp, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Seq,
    Cpu,
    Vec(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Static(i64),
    Dyn(Expr, Tag),
}

impl Entry {
    pub fn is_static(&self) -> bool {
        matches!(self, Entry::Static(_))
    }

    pub fn expr(&self) -> Option<&Expr> {
        match self {
            Entry::Dyn(e, _) => Some(e),
            Entry::Static(_) => None,
        }
    }

    pub fn tag(&self) -> Tag {
        match self {
            Entry::Dyn(_, t) => *t,
            Entry::Static(_) => Tag::Seq,
        }
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, tagged: bool) -> fmt::Result {
        match self {
            Entry::Static(v) => write!(f, "{v}"),
            Entry::Dyn(e, tag) => {
                write!(f, "{e}")?;
                match (tag, tagged) {
                    (Tag::Seq, _) => Ok(()),
                    (Tag::Cpu, false) => f.write_str("@cpu"),
                    (Tag::Vec(w), false) => write!(f, "@vec{w}"),
                    (Tag::Cpu, true) => f.write_str(" (cpu)"),
                    (Tag::Vec(_), true) => f.write_str(" (vec)"),
                }
            }
        }
    }
}

/// Time-processor vector of one computation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleVector {
    pub comp: String,
    pub entries: Vec<Entry>,
}

struct Shown<'a>(&'a ScheduleVector, bool);

impl fmt::Display for Shown<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: (", self.0.comp)?;
        for (k, e) in self.0.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            e.fmt_with(f, self.1)?;
        }
        f.write_str(")")
    }
}

impl ScheduleVector {
    pub fn eval(&self, env: &impl Lookup) -> Result<Vec<i64>> {
        self.entries
            .iter()
            .map(|e| match e {
                Entry::Static(v) => Ok(*v),
                Entry::Dyn(x, _) => x.eval(env),
            })
            .collect()
    }

    /// Position of the dynamic entry equal to `dim` after normalization.
    pub fn find(&self, dim: &Expr) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| matches!(e, Entry::Dyn(x, _) if x.same_as(dim)))
    }

    pub fn dyn_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_static()).count()
    }

    /// Stable dump line, e.g. `S1: (i%P@cpu, j, i/P, 0)`.
    pub fn dump(&self) -> String {
        Shown(self, false).to_string()
    }

    /// Rendering with parenthesized tags, e.g. `S1: (i, j/4, 0, j%4 (vec))`.
    pub fn tagged_text(&self) -> String {
        Shown(self, true).to_string()
    }

    /// Parse one line of [`ScheduleVector::dump`] output.
    pub fn parse_dump(line: &str, constants: &[(String, i64)]) -> Result<ScheduleVector> {
        let bad = |msg: &str| Error::Syntax { pos: 0, msg: format!("{msg} in `{line}`") };
        let (name, rest) = line.split_once(':').ok_or_else(|| bad("missing `:`"))?;
        let rest = rest.trim();
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| bad("expected parenthesized entries"))?;
        let mut parts = Vec::new();
        let (mut depth, mut start) = (0i32, 0usize);
        for (i, ch) in inner.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(&inner[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        parts.push(&inner[start..]);
        let mut entries = Vec::new();
        for p in parts {
            let p = p.trim();
            let (text, tag) = match p.rsplit_once('@') {
                Some((t, "cpu")) => (t, Tag::Cpu),
                Some((t, v)) if v.starts_with("vec") => {
                    let w: u32 = v[3..].parse().map_err(|_| bad("bad vector width"))?;
                    (t, Tag::Vec(w))
                }
                Some(_) => return Err(bad("unknown tag")),
                None => (p, Tag::Seq),
            };
            let e = parse_expr_with(text, constants)?;
            entries.push(match (e.as_const(), tag) {
                (Some(v), Tag::Seq) => Entry::Static(v),
                (Some(_), _) => return Err(bad("tagged static entry")),
                (None, t) => Entry::Dyn(e, t),
            });
        }
        let sv = ScheduleVector { comp: name.trim().to_string(), entries };
        sv.validate()?;
        Ok(sv)
    }

    pub fn validate(&self) -> Result<()> {
        let cpu = self.entries.iter().filter(|e| e.tag() == Tag::Cpu).count();
        let vec = self.entries.iter().filter(|e| matches!(e.tag(), Tag::Vec(_))).count();
        if cpu > 1 || vec > 1 {
            return Err(Error::Schedule(format!("{}: at most one cpu and one vec entry", self.comp)));
        }
        if self.entries.iter().any(|e| matches!(e.tag(), Tag::Vec(w) if w < 2)) {
            return Err(Error::Schedule(format!("{}: vector width below 2", self.comp)));
        }
        Ok(())
    }

    /// The schedule as a map from the iteration domain to time vectors.
    pub fn to_relation(&self, domain: &IntegerSet) -> Result<Relation> {
        let outs: Vec<String> = (0..self.entries.len()).map(|k| format!("_t{k}")).collect();
        let eqs = self.entries.iter().zip(&outs).map(|(e, o)| {
            let rhs = match e {
                Entry::Static(v) => Expr::int(*v),
                Entry::Dyn(x, _) => x.clone(),
            };
            Formula::atom(Expr::var(o.clone()), RelOp::Eq, rhs)
        });
        let f = Formula::and(eqs.chain([domain.constraint().clone()]));
        Relation::new(
            domain.name(),
            domain.vars().to_vec(),
            "T",
            outs,
            domain.params().to_vec(),
            f,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::{BoundingBox, Params};

    fn consts() -> Vec<(String, i64)> {
        vec![("P".into(), 2), ("N".into(), 4)]
    }

    #[test]
    fn dump_round_trip() {
        for line in ["S1: (i%P@cpu, j, i/P, 0)", "S2: (i, j/4, 1, j%4@vec4)", "C: (t + l, l, 0)"] {
            let sv = ScheduleVector::parse_dump(line, &consts()).unwrap();
            assert_eq!(sv.dump(), line);
        }
    }

    #[test]
    fn tagged_rendering() {
        let sv = ScheduleVector::parse_dump("S1: (i%P@cpu, j, i/P, 0)", &consts()).unwrap();
        assert_eq!(sv.tagged_text(), "S1: (i%P (cpu), j, i/P, 0)");
    }

    #[test]
    fn rejects_double_tags() {
        assert!(ScheduleVector::parse_dump("S: (i@cpu, j@cpu)", &[]).is_err());
        assert!(ScheduleVector::parse_dump("S: (i@vec1, j)", &[]).is_err());
        assert!(ScheduleVector::parse_dump("S: (i@gpu)", &[]).is_err());
    }

    #[test]
    fn relation_bridge_matches_eval() {
        let d = IntegerSet::parse("{S(i,j): 0<=i<3 and 0<=j<2}").unwrap();
        let sv = ScheduleVector::parse_dump("S: (j, i + j, 0)", &[]).unwrap();
        let r = sv.to_relation(&d).unwrap();
        let p = Params::new();
        let pairs = r
            .enumerate(&p, &BoundingBox::cube(2, 0, 3), &BoundingBox::cube(3, 0, 4))
            .unwrap();
        assert_eq!(pairs.len(), 6);
        for (s, t) in pairs {
            assert_eq!(t, vec![s[1], s[0] + s[1], 0]);
        }
    }
}
