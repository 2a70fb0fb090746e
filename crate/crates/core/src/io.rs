//! Plain-text relation files.
//!
//! ```text
//! @relation H over D3(a,b,c)
//! 1 2 3 4
//! a b b a
//! b a a b
//! ```
//!
//! The line after the header lists the attributes (it is blank for a 0-ary
//! relation). Each further line is one tuple, columns in the order of that
//! line; `()` is the empty tuple. `#` starts a comment and blank rows are ignored.
//! [`render`] writes attributes in canonical order and tuples sorted, so
//! `render(parse(render(r))) == render(r)` byte for byte.

use crate::error::{Error, Result};
use crate::relation::{Attr, Domain, Relation, Scheme, Tuple};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationFile {
    pub name: String,
    pub relation: Relation,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(String, Arc<Domain>)> {
    let rest = line
        .strip_prefix("@relation")
        .ok_or_else(|| Error::syntax(lineno, 1, "expected `@relation NAME over DOMAIN(...)`"))?;
    let mut words = rest.trim_start().splitn(3, char::is_whitespace);
    let name = words.next().filter(|w| !w.is_empty());
    let over = words.next();
    let dom = words.next().map(str::trim);
    let (Some(name), Some("over"), Some(dom)) = (name, over, dom) else {
        return Err(Error::syntax(lineno, 1, "expected `@relation NAME over DOMAIN(...)`"));
    };
    let col = line.find(dom).unwrap_or(0) + 1;
    let open = dom.find('(').ok_or_else(|| Error::syntax(lineno, col, "domain needs `(`"))?;
    let inner = dom[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::syntax(lineno, col + dom.len(), "domain needs a closing `)`"))?;
    let elements: Vec<&str> = inner.split(',').map(str::trim).collect();
    let domain = Domain::new(dom[..open].trim(), elements).map_err(|e| match e {
        Error::InvalidRelation(m) => Error::syntax(lineno, col, m),
        e => e,
    })?;
    Ok((name.to_string(), domain))
}

/// Parses one relation file.
pub fn parse(text: &str) -> Result<RelationFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = loop {
        match lines.next() {
            Some((_, l)) if strip_comment(l).trim().is_empty() => continue,
            Some((n, l)) => break (n, strip_comment(l).trim()),
            None => return Err(Error::syntax(1, 1, "empty relation file")),
        }
    };
    let (name, domain) = parse_header(header, hline)?;

    let (aline, attr_text) = match lines.next() {
        Some((n, l)) => (n, strip_comment(l)),
        None => (hline + 1, ""),
    };
    let names: Vec<&str> = attr_text.split_whitespace().collect();
    let scheme: Scheme = names.iter().map(Attr::new).collect();
    if scheme.len() != names.len() {
        return Err(Error::syntax(aline, 1, "attribute names repeat"));
    }
    // file column -> canonical position
    let target: Vec<usize> =
        names.iter().map(|s| scheme.position(&Attr::new(s)).expect("attribute just inserted")).collect();

    let mut tuples = Vec::new();
    for (n, raw) in lines {
        let row = strip_comment(raw).trim();
        if row.is_empty() {
            continue;
        }
        let cells: Vec<&str> = if row == "()" { Vec::new() } else { row.split_whitespace().collect() };
        if cells.len() != names.len() {
            return Err(Error::syntax(n, 1, format!("row has {} entries, expected {}", cells.len(), names.len())));
        }
        let mut t: Tuple = vec![0; cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            let e = domain.index_of(cell).ok_or_else(|| {
                Error::syntax(
                    n,
                    raw.find(cell).unwrap_or(0) + 1,
                    format!("`{cell}` is not an element of {}", domain.name()),
                )
            })?;
            t[target[c]] = e;
        }
        tuples.push(t);
    }
    Ok(RelationFile { name, relation: Relation::new(domain, scheme, tuples)? })
}

/// Canonical text form of a relation.
pub fn render(name: &str, r: &Relation) -> String {
    let mut out = String::new();
    writeln!(out, "@relation {name} over {}", r.domain()).unwrap();
    let attrs: Vec<&str> = r.scheme().iter().map(Attr::name).collect();
    writeln!(out, "{}", attrs.join(" ")).unwrap();
    for t in r.tuples() {
        if t.is_empty() {
            out.push_str("()\n");
        } else {
            writeln!(out, "{}", r.describe(t).join(" ")).unwrap();
        }
    }
    out
}

pub fn read(path: &Path) -> Result<RelationFile> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(path: &Path, name: &str, r: &Relation) -> Result<()> {
    std::fs::write(path, render(name, r))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: &str = "@relation H over D3(a,b,c)\n1 2 3 4\na b b a\nb a a b\nb c b c\nc b c b\n";

    #[test]
    fn round_trip_is_bit_exact() {
        let f = parse(H).unwrap();
        assert_eq!(f.name, "H");
        assert_eq!(f.relation.len(), 4);
        assert_eq!(render(&f.name, &f.relation), H);
    }

    #[test]
    fn columns_follow_the_attribute_line() {
        let f = parse("# swapped\n@relation P over D(a,b)\ny x\na b # row\n\n").unwrap();
        assert_eq!(render("P", &f.relation), "@relation P over D(a,b)\nx y\nb a\n");
    }

    #[test]
    fn zero_ary_relations() {
        let t = "@relation T over D(a)\n\n()\n";
        let f = parse(t).unwrap();
        assert_eq!(f.relation.len(), 1);
        assert_eq!(f.relation.arity(), 0);
        assert_eq!(render("T", &f.relation), t);
        let empty = parse("@relation F over D(a)\n\n").unwrap();
        assert!(empty.relation.is_empty());
    }

    #[test]
    fn errors_carry_positions() {
        match parse("@relation R over D(a,b)\n1 2\na c\n") {
            Err(Error::Syntax { line: 3, column: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("@relation R D(a)\n"), Err(Error::Syntax { line: 1, .. })));
        assert!(matches!(parse("@relation R over D(a,b)\n1 2\na\n"), Err(Error::Syntax { line: 3, .. })));
    }
}
