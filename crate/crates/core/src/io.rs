//! Plain-text file formats.
//!
//! All formats are whitespace separated; text after `#` on a line is ignored.
//!
//! | kind | layout |
//! |------|--------|
//! | function table | `p n R`, then `p^n` labels in canonical order |
//! | real table | `p n`, then `p^n` reals |
//! | constraint | `p l m R`, `m` rows of `l` coefficients, `m` labels; a collection is a sequence of blocks |
//! | factor | `p n C`, then one line per polynomial: `k` followed by `k` groups `coeff e_1 .. e_n` |
//!
//! ```
//! use affinv::io::{format_function_table, parse_function_table};
//!
//! let text = "2 2 3\n1 2 3 3\n";
//! let f = parse_function_table(text).unwrap();
//! assert_eq!(f.label(2), 3);
//! assert_eq!(format_function_table(&f), text);
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{FieldParams, FunctionTable, RealTable};
use crate::forms::{AffineConstraint, ConstraintCollection, InducedConstraint};
use crate::poly::{Polynomial, PolynomialFactor};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (i + 1, t))
            })
            .collect();
        Tokens { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items.get(self.pos).or(self.items.last()).map_or(1, |t| t.0)
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let Some(&(line, tok)) = self.items.get(self.pos) else {
            return Err(Error::Parse {
                line: self.line(),
                msg: format!("unexpected end of input, expected {what}"),
            });
        };
        self.pos += 1;
        tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("expected {what}, found {tok:?}"),
        })
    }

    fn at_end(&self) -> bool {
        self.pos >= self.items.len()
    }

    fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(Error::Parse {
                line: self.line(),
                msg: "trailing tokens".into(),
            })
        }
    }

    fn wrap<T>(&self, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                line: self.line(),
                msg: other.to_string(),
            },
        })
    }
}

fn header(t: &mut Tokens) -> Result<FieldParams> {
    let p = t.next("p")?;
    let n = t.next("n")?;
    let fp = FieldParams::new(p, n);
    t.wrap(fp)
}

pub fn parse_function_table(text: &str) -> Result<FunctionTable> {
    let mut t = Tokens::new(text);
    let fp = header(&mut t)?;
    let r = t.next("R")?;
    let values = (0..fp.size()).map(|_| t.next("label")).collect::<Result<Vec<u32>>>()?;
    t.finish()?;
    let f = FunctionTable::new(fp, r, values);
    t.wrap(f)
}

pub fn format_function_table(f: &FunctionTable) -> String {
    let labels: Vec<String> = f.values().iter().map(u32::to_string).collect();
    format!("{} {} {}\n{}\n", f.params().p(), f.params().n(), f.range(), labels.join(" "))
}

pub fn parse_real_table(text: &str) -> Result<RealTable> {
    let mut t = Tokens::new(text);
    let fp = header(&mut t)?;
    let values = (0..fp.size()).map(|_| t.next("real")).collect::<Result<Vec<f64>>>()?;
    t.finish()?;
    let f = RealTable::new(fp, values);
    t.wrap(f)
}

/// Uses the shortest representation that parses back to the same `f64`.
pub fn format_real_table(f: &RealTable) -> String {
    let vals: Vec<String> = f.values().iter().map(f64::to_string).collect();
    format!("{} {}\n{}\n", f.params().p(), f.params().n(), vals.join(" "))
}

/// A parsed constraint file: the members and the largest declared range.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFile {
    pub collection: ConstraintCollection,
    pub range: u32,
}

pub fn parse_constraints(text: &str) -> Result<ConstraintFile> {
    let mut t = Tokens::new(text);
    let mut members = Vec::new();
    let mut range = 0;
    while !t.at_end() {
        let p: u32 = t.next("p")?;
        let ell: usize = t.next("l")?;
        let m: usize = t.next("m")?;
        let r: u32 = t.next("R")?;
        let rows = (0..m)
            .map(|_| (0..ell).map(|_| t.next("coefficient")).collect::<Result<Vec<u32>>>())
            .collect::<Result<Vec<_>>>()?;
        let sigma = (0..m).map(|_| t.next("label")).collect::<Result<Vec<u32>>>()?;
        if let Some(&bad) = sigma.iter().find(|&&s| s == 0 || s > r) {
            return Err(Error::Parse {
                line: t.line(),
                msg: format!("label {bad} outside [1, {r}]"),
            });
        }
        let ic = AffineConstraint::new(p, rows).and_then(|a| InducedConstraint::new(a, sigma));
        members.push(t.wrap(ic)?);
        range = range.max(r);
    }
    if members.windows(2).any(|w| w[0].constraint().p() != w[1].constraint().p()) {
        return Err(Error::Parse {
            line: 1,
            msg: "members over different fields".into(),
        });
    }
    Ok(ConstraintFile {
        collection: ConstraintCollection::new(members),
        range,
    })
}

pub fn format_constraint(ic: &InducedConstraint, range: u32) -> String {
    let a = ic.constraint();
    let mut s = format!("{} {} {} {}\n", a.p(), a.ell(), a.m(), range);
    for row in a.rows() {
        s.push_str(&join(&row));
        s.push('\n');
    }
    s.push_str(&join(ic.sigma()));
    s.push('\n');
    s
}

pub fn format_constraints(c: &ConstraintCollection, range: u32) -> String {
    c.members().iter().map(|ic| format_constraint(ic, range)).collect::<Vec<_>>().join("\n")
}

pub fn parse_factor(text: &str) -> Result<PolynomialFactor> {
    let mut t = Tokens::new(text);
    let fp = header(&mut t)?;
    let c: usize = t.next("C")?;
    let mut polys = Vec::with_capacity(c);
    for _ in 0..c {
        let k: usize = t.next("term count")?;
        let mut terms = Vec::with_capacity(k);
        for _ in 0..k {
            let coeff = t.next("coefficient")?;
            let e = (0..fp.n()).map(|_| t.next("exponent")).collect::<Result<Vec<u32>>>()?;
            terms.push((coeff, e));
        }
        let q = Polynomial::from_terms(fp.p(), fp.n(), terms);
        polys.push(t.wrap(q)?);
    }
    t.finish()?;
    let b = PolynomialFactor::new(fp, polys);
    t.wrap(b)
}

pub fn format_factor(b: &PolynomialFactor) -> String {
    let fp = b.params();
    let mut s = format!("{} {} {}\n", fp.p(), fp.n(), b.len());
    for q in b.polys() {
        let mut parts = vec![q.num_terms().to_string()];
        for (e, c) in q.terms() {
            parts.push(c.to_string());
            parts.push(join(e));
        }
        s.push_str(&parts.join(" "));
        s.push('\n');
    }
    s
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_function_table(path: impl AsRef<Path>) -> Result<FunctionTable> {
    parse_function_table(&read(path.as_ref())?)
}

pub fn load_real_table(path: impl AsRef<Path>) -> Result<RealTable> {
    parse_real_table(&read(path.as_ref())?)
}

pub fn load_constraints(path: impl AsRef<Path>) -> Result<ConstraintFile> {
    parse_constraints(&read(path.as_ref())?)
}

pub fn load_factor(path: impl AsRef<Path>) -> Result<PolynomialFactor> {
    parse_factor(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn function_table_errors() {
        assert!(matches!(parse_function_table("2 2 2\n1 2 1"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_function_table("2 2 2\n1 2 1 3"), Err(Error::Parse { .. })));
        assert!(matches!(parse_function_table("4 2 2\n1 1 1 1"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_function_table("2 1 2 # small\n1 2 # labels\n").is_ok());
        assert!(parse_function_table("2 1 2\n1 2 2").is_err());
    }

    #[test]
    fn constraint_round_trip() {
        let text = "2 3 4 2\n1 0 0\n1 1 0\n1 0 1\n1 1 1\n1 2 2 2\n";
        let c = parse_constraints(text).unwrap();
        assert_eq!(c.range, 2);
        assert_eq!(c.collection.len(), 1);
        assert_eq!(format_constraints(&c.collection, 2), text);
        let family = ConstraintCollection::degree_one(3).unwrap();
        let back = parse_constraints(&format_constraints(&family, 3)).unwrap();
        assert_eq!(back.collection, family);
        assert!(parse_constraints("2 2 2 2\n0 1\n1 1\n1 1\n").is_err());
        assert!(parse_constraints("2 2 2 1\n1 0\n1 1\n1 2\n").is_err());
    }

    #[test]
    fn factor_round_trip() {
        let fp = FieldParams::new(3, 3).unwrap();
        let q = Polynomial::from_terms(3, 3, [(2, vec![2, 0, 1]), (1, vec![0, 1, 0]), (1, vec![0, 0, 0])]).unwrap();
        let b = PolynomialFactor::new(fp, vec![q, Polynomial::linear(3, &[1, 0, 2])]).unwrap();
        let text = format_factor(&b);
        assert_eq!(parse_factor(&text).unwrap(), b);
        let empty = PolynomialFactor::trivial(fp);
        assert_eq!(format_factor(&empty), "3 3 0\n");
        assert_eq!(parse_factor("3 3 0\n").unwrap(), empty);
        assert!(parse_factor("2 2 1\n1 1 1\n").is_err());
    }

    proptest! {
        #[test]
        fn function_tables_round_trip(p in prop::sample::select(vec![2u32, 3, 5]), n in 0usize..4, r in 1u32..6, seed in any::<u64>()) {
            let fp = FieldParams::new(p, n).unwrap();
            let values: Vec<u32> = (0..fp.size()).map(|i| ((seed >> (i % 60)) as u32 + i as u32) % r + 1).collect();
            let f = FunctionTable::new(fp, r, values).unwrap();
            let text = format_function_table(&f);
            prop_assert_eq!(parse_function_table(&text).unwrap(), f.clone());
            prop_assert_eq!(format_function_table(&parse_function_table(&text).unwrap()), text);
        }

        #[test]
        fn real_tables_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 9)) {
            let f = RealTable::new(FieldParams::new(3, 2).unwrap(), values).unwrap();
            let back = parse_real_table(&format_real_table(&f)).unwrap();
            prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
