//! Attributed relations over a finite domain.
//!
//! A [`Relation`] is a set of tuples over a [`Scheme`], i.e. maps from a finite
//! attribute set into a [`Domain`]. Tuples are stored as value vectors indexed by
//! the scheme's canonical attribute order; that order is a storage detail and
//! never carries meaning. Every operation is a pure function of its inputs.

use crate::caps;
use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

/// Index of a domain element.
pub type Elem = u8;

/// Values of one tuple, listed in the canonical order of its scheme.
pub type Tuple = Vec<Elem>;

/// A named finite set of element symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    name: String,
    elements: Vec<String>,
}

impl Domain {
    pub fn new<S: Into<String>>(name: impl Into<String>, elements: impl IntoIterator<Item = S>) -> Result<Arc<Domain>> {
        let name = name.into();
        let elements: Vec<String> = elements.into_iter().map(Into::into).collect();
        if elements.is_empty() {
            return Err(Error::InvalidRelation(format!("domain `{name}` has no elements")));
        }
        let cap = caps::current().max_domain.min(Elem::MAX as usize);
        if elements.len() > cap {
            return Err(Error::CapExceeded { what: "domain size", value: elements.len() as u128, cap: cap as u128 });
        }
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !valid_symbol(e) {
                return Err(Error::InvalidRelation(format!("`{e}` is not a valid element symbol")));
            }
            if !seen.insert(e.as_str()) {
                return Err(Error::InvalidRelation(format!("element `{e}` is repeated")));
            }
        }
        Ok(Arc::new(Domain { name, elements }))
    }

    /// A domain `D<d>` whose elements are the letters `a`, `b`, `c`, ...
    pub fn letters(d: usize) -> Result<Arc<Domain>> {
        let elements = (0..d).map(|i| if i < 26 { ((b'a' + i as u8) as char).to_string() } else { format!("e{i}") });
        Domain::new(format!("D{d}"), elements)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn element(&self, e: Elem) -> &str {
        &self.elements[e as usize]
    }

    pub fn index_of(&self, symbol: &str) -> Option<Elem> {
        self.elements.iter().position(|e| e == symbol).map(|i| i as Elem)
    }

    pub(crate) fn render_tuple(&self, t: &[Elem]) -> Vec<String> {
        t.iter().map(|&e| self.element(e).to_string()).collect()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.elements.join(","))
    }
}

fn valid_symbol(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_whitespace() && !matches!(c, ',' | '(' | ')' | '#'))
}

/// Compares strings so that digit runs order numerically: `x2 < x10`, `2 < 10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let la = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let lb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (&a[..la], &b[..lb]);
                let ta = trim_zeros(da);
                let tb = trim_zeros(db);
                let ord = ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb)).then(la.cmp(&lb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[la..];
                b = &b[lb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(s: &[u8]) -> &[u8] {
    let z = s.iter().take_while(|&&c| c == b'0').count();
    &s[z.min(s.len().saturating_sub(1))..]
}

/// An attribute name. Attributes compare by name, in natural order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Attr(Arc<str>);

impl Attr {
    pub fn new(name: impl AsRef<str>) -> Attr {
        Attr(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl Ord for Attr {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for Attr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Attr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl From<&str> for Attr {
    fn from(s: &str) -> Attr {
        Attr::new(s)
    }
}

/// A finite set of attributes, kept sorted.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scheme(Vec<Attr>);

impl Scheme {
    pub fn new<A: Into<Attr>>(attrs: impl IntoIterator<Item = A>) -> Scheme {
        attrs.into_iter().map(Into::into).collect()
    }

    pub fn empty() -> Scheme {
        Scheme(Vec::new())
    }

    /// `{1, 2, ..., n}`.
    pub fn numbered(n: usize) -> Scheme {
        Scheme((1..=n).map(|i| Attr::new(i.to_string())).collect())
    }

    /// Parses a comma separated attribute list such as `1,2` (blank means empty).
    pub fn parse_list(s: &str) -> Scheme {
        Scheme::new(s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(Attr::new))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn attrs(&self) -> &[Attr] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Attr> {
        self.0.iter()
    }

    pub fn position(&self, a: &Attr) -> Option<usize> {
        self.0.binary_search(a).ok()
    }

    pub fn contains(&self, a: &Attr) -> bool {
        self.position(a).is_some()
    }

    pub fn is_subset(&self, other: &Scheme) -> bool {
        self.0.iter().all(|a| other.contains(a))
    }

    pub fn is_disjoint(&self, other: &Scheme) -> bool {
        self.0.iter().all(|a| !other.contains(a))
    }

    pub fn union(&self, other: &Scheme) -> Scheme {
        self.0.iter().chain(other.0.iter()).cloned().collect()
    }

    pub fn intersection(&self, other: &Scheme) -> Scheme {
        Scheme(self.0.iter().filter(|a| other.contains(a)).cloned().collect())
    }

    pub fn difference(&self, other: &Scheme) -> Scheme {
        Scheme(self.0.iter().filter(|a| !other.contains(a)).cloned().collect())
    }

    /// Positions of `sub`'s attributes inside `self`.
    pub(crate) fn positions_of(&self, sub: &Scheme) -> Result<Vec<usize>> {
        sub.0
            .iter()
            .map(|a| {
                self.position(a)
                    .ok_or_else(|| Error::UnknownAttribute { attr: a.to_string(), scheme: self.to_string() })
            })
            .collect()
    }
}

impl<A: Into<Attr>> FromIterator<A> for Scheme {
    fn from_iter<I: IntoIterator<Item = A>>(iter: I) -> Self {
        let mut v: Vec<Attr> = iter.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        Scheme(v)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Scheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        Ok(Scheme::new(names.iter().map(Attr::new)))
    }
}

impl fmt::Debug for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The four standard relations available on every domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StandardKind {
    Empty,
    Universal,
    Identity,
    Diversity,
}

/// Lexicographic enumeration of `{0..d}^n`, last position fastest.
pub fn all_tuples(d: usize, n: usize) -> impl Iterator<Item = Tuple> {
    let total = if d == 0 && n > 0 { 0 } else { (d as u128).pow(n as u32) };
    let mut next: Option<Tuple> = if total == 0 { None } else { Some(vec![0; n]) };
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        let mut i = n;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if (succ[i] as usize) + 1 < d {
                succ[i] += 1;
                next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    })
}

/// A subset of `D^Σ`.
#[derive(Clone)]
pub struct Relation {
    domain: Arc<Domain>,
    scheme: Scheme,
    tuples: BTreeSet<Tuple>,
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain)
            && self.scheme == other.scheme
            && self.tuples == other.tuples
    }
}

impl Eq for Relation {}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Relation{} over {} [", self.scheme, self.domain.name())?;
        for (i, t) in self.tuples.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "({})", self.domain.render_tuple(t).join(","))?;
        }
        write!(f, "]")
    }
}

impl Relation {
    /// Builds a relation, checking every tuple against the scheme and domain.
    pub fn new(domain: Arc<Domain>, scheme: Scheme, tuples: impl IntoIterator<Item = Tuple>) -> Result<Relation> {
        let n = scheme.len();
        let d = domain.size();
        let mut set = BTreeSet::new();
        for t in tuples {
            if t.len() != n {
                return Err(Error::InvalidRelation(format!("tuple of length {} over a scheme of arity {n}", t.len())));
            }
            if let Some(&e) = t.iter().find(|&&e| e as usize >= d) {
                return Err(Error::InvalidRelation(format!("element index {e} is outside domain {}", domain.name())));
            }
            set.insert(t);
        }
        Ok(Relation { domain, scheme, tuples: set })
    }

    /// Builds a relation from rows of element names, columns in canonical scheme order.
    pub fn from_rows<R, S>(domain: Arc<Domain>, scheme: Scheme, rows: R) -> Result<Relation>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tuples = Vec::new();
        for row in rows {
            let t = row
                .into_iter()
                .map(|s| {
                    domain.index_of(s.as_ref()).ok_or_else(|| {
                        Error::InvalidRelation(format!("`{}` is not an element of {}", s.as_ref(), domain.name()))
                    })
                })
                .collect::<Result<Tuple>>()?;
            tuples.push(t);
        }
        Relation::new(domain, scheme, tuples)
    }

    /// Unchecked constructor for internal producers that already guarantee the invariants.
    pub(crate) fn from_set(domain: Arc<Domain>, scheme: Scheme, tuples: BTreeSet<Tuple>) -> Relation {
        debug_assert!(tuples.iter().all(|t| t.len() == scheme.len()));
        Relation { domain, scheme, tuples }
    }

    pub fn empty(domain: Arc<Domain>, scheme: Scheme) -> Relation {
        Relation { domain, scheme, tuples: BTreeSet::new() }
    }

    /// The 0-ary relations: TRUE holds the empty tuple, FALSE holds nothing.
    pub fn truth(domain: Arc<Domain>, value: bool) -> Relation {
        let mut tuples = BTreeSet::new();
        if value {
            tuples.insert(Vec::new());
        }
        Relation { domain, scheme: Scheme::empty(), tuples }
    }

    /// `∅`, `U`, `I` or `D` over `scheme`, relativized to `restrict` when given.
    pub fn standard(
        kind: StandardKind,
        scheme: Scheme,
        domain: Arc<Domain>,
        restrict: Option<&[Elem]>,
    ) -> Result<Relation> {
        let d = domain.size();
        let allowed: Vec<Elem> = match restrict {
            Some(r) => {
                if let Some(&bad) = r.iter().find(|&&e| e as usize >= d) {
                    return Err(Error::InvalidRelation(format!(
                        "restriction element {bad} is outside domain {}",
                        domain.name()
                    )));
                }
                let set: BTreeSet<Elem> = r.iter().copied().collect();
                set.into_iter().collect()
            }
            None => (0..d as Elem).collect(),
        };
        let n = scheme.len();
        let tuples: BTreeSet<Tuple> = match kind {
            StandardKind::Empty => BTreeSet::new(),
            StandardKind::Identity => {
                if n == 0 {
                    // every empty tuple is trivially constant
                    std::iter::once(Vec::new()).collect()
                } else {
                    allowed.iter().map(|&e| vec![e; n]).collect()
                }
            }
            StandardKind::Universal | StandardKind::Diversity => {
                caps::current().check_power(allowed.len(), n)?;
                all_tuples(allowed.len(), n)
                    .map(|t| t.into_iter().map(|i| allowed[i as usize]).collect::<Tuple>())
                    .filter(|t| kind == StandardKind::Universal || pairwise_distinct(t))
                    .collect()
            }
        };
        Ok(Relation { domain, scheme, tuples })
    }

    pub fn universal(domain: Arc<Domain>, scheme: Scheme) -> Result<Relation> {
        Relation::standard(StandardKind::Universal, scheme, domain, None)
    }

    pub fn identity(domain: Arc<Domain>, scheme: Scheme) -> Relation {
        Relation::standard(StandardKind::Identity, scheme, domain, None)
            .expect("identity relations need no enumeration")
    }

    pub fn diversity(domain: Arc<Domain>, scheme: Scheme) -> Result<Relation> {
        Relation::standard(StandardKind::Diversity, scheme, domain, None)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn arity(&self) -> usize {
        self.scheme.len()
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        self.tuples.contains(t)
    }

    /// `|D|^arity`, saturating.
    pub fn power_size(&self) -> u128 {
        (self.domain.size() as u128).saturating_pow(self.arity() as u32)
    }

    pub fn is_universal(&self) -> bool {
        self.len() as u128 == self.power_size()
    }

    /// The tuple `t` as a map from attributes to element names.
    pub fn describe(&self, t: &[Elem]) -> Vec<String> {
        self.domain.render_tuple(t)
    }

    fn same_domain(&self, other: &Relation) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch { left: self.domain.to_string(), right: other.domain.to_string() })
        }
    }

    /// `π_Λ R`.
    pub fn project(&self, onto: &Scheme) -> Result<Relation> {
        let pos = self.scheme.positions_of(onto)?;
        let tuples = self.tuples.iter().map(|t| pos.iter().map(|&i| t[i]).collect()).collect();
        Ok(Relation::from_set(self.domain.clone(), onto.clone(), tuples))
    }

    /// `σ_{x_Λ = α} R`; `values` lists `α` in the canonical order of `on`.
    pub fn select(&self, on: &Scheme, values: &[Elem]) -> Result<Relation> {
        if values.len() != on.len() {
            return Err(Error::InvalidRelation(format!(
                "selection on {on} needs {} values, got {}",
                on.len(),
                values.len()
            )));
        }
        let sel = self.scheme.positions_of(on)?;
        let rest_scheme = self.scheme.difference(on);
        let rest = self.scheme.positions_of(&rest_scheme)?;
        let tuples = self
            .tuples
            .iter()
            .filter(|t| sel.iter().zip(values).all(|(&i, &v)| t[i] == v))
            .map(|t| rest.iter().map(|&i| t[i]).collect())
            .collect();
        Ok(Relation::from_set(self.domain.clone(), rest_scheme, tuples))
    }

    /// `¬R`, the complement in `D^Σ`.
    pub fn complement(&self) -> Result<Relation> {
        caps::current().check_power(self.domain.size(), self.arity())?;
        let tuples = all_tuples(self.domain.size(), self.arity()).filter(|t| !self.tuples.contains(t)).collect();
        Ok(Relation::from_set(self.domain.clone(), self.scheme.clone(), tuples))
    }

    pub fn union(&self, other: &Relation) -> Result<Relation> {
        self.same_domain(other)?;
        if self.scheme != other.scheme {
            return Err(Error::SchemeMismatch(format!("union of {} and {}", self.scheme, other.scheme)));
        }
        let tuples = self.tuples.union(&other.tuples).cloned().collect();
        Ok(Relation::from_set(self.domain.clone(), self.scheme.clone(), tuples))
    }

    /// Renames attributes; the map must be injective on this scheme.
    /// Attributes absent from the map keep their names.
    pub fn rename(&self, map: &BTreeMap<Attr, Attr>) -> Result<Relation> {
        let new_names: Vec<Attr> =
            self.scheme.iter().map(|a| map.get(a).cloned().unwrap_or_else(|| a.clone())).collect();
        let new_scheme: Scheme = new_names.iter().cloned().collect();
        if new_scheme.len() != new_names.len() {
            return Err(Error::SchemeMismatch(format!("renaming {} is not injective", self.scheme)));
        }
        // new_scheme position of each old column
        let target: Vec<usize> = new_names.iter().map(|a| new_scheme.position(a).expect("present")).collect();
        let tuples = self
            .tuples
            .iter()
            .map(|t| {
                let mut out = vec![0; t.len()];
                for (i, &v) in t.iter().enumerate() {
                    out[target[i]] = v;
                }
                out
            })
            .collect();
        Ok(Relation::from_set(self.domain.clone(), new_scheme, tuples))
    }

    /// Natural join of two relations.
    pub fn join(&self, other: &Relation) -> Result<Relation> {
        self.same_domain(other)?;
        let scheme = self.scheme.union(&other.scheme);
        let shared = self.scheme.intersection(&other.scheme);
        let left_key = self.scheme.positions_of(&shared)?;
        let right_key = other.scheme.positions_of(&shared)?;
        // each output column: (from_left, index)
        let layout: Vec<(bool, usize)> = scheme
            .iter()
            .map(|a| match self.scheme.position(a) {
                Some(i) => (true, i),
                None => (false, other.scheme.position(a).expect("attribute from union")),
            })
            .collect();

        let mut index: HashMap<Vec<Elem>, Vec<&Tuple>> = HashMap::new();
        for t in &other.tuples {
            index.entry(right_key.iter().map(|&i| t[i]).collect()).or_default().push(t);
        }
        let mut tuples = BTreeSet::new();
        for l in &self.tuples {
            let key: Vec<Elem> = left_key.iter().map(|&i| l[i]).collect();
            if let Some(matches) = index.get(&key) {
                for r in matches {
                    tuples.insert(layout.iter().map(|&(left, i)| if left { l[i] } else { r[i] }).collect());
                }
            }
        }
        Ok(Relation::from_set(self.domain.clone(), scheme, tuples))
    }

    /// `R_1 ⋈ ... ⋈ R_m`.
    pub fn join_all(rs: &[Relation]) -> Result<Relation> {
        let (first, rest) = rs.split_first().ok_or(Error::EmptyInput("join"))?;
        // smallest-first keeps intermediate results small; the result is order independent
        let mut order: Vec<&Relation> = rest.iter().collect();
        order.sort_by_key(|r| r.len());
        order.into_iter().try_fold(first.clone(), |acc, r| acc.join(r))
    }

    /// Cartesian product; schemes must be pairwise disjoint.
    pub fn cartesian(rs: &[Relation]) -> Result<Relation> {
        let mut seen = Scheme::empty();
        for r in rs {
            if let Some(a) = r.scheme.iter().find(|a| seen.contains(a)) {
                return Err(Error::SchemeCollision { attr: a.to_string() });
            }
            seen = seen.union(&r.scheme);
        }
        Relation::join_all(rs).map_err(|e| match e {
            Error::EmptyInput(_) => Error::EmptyInput("cartesian product"),
            e => e,
        })
    }

    /// `π_keep [R_1 ⋈ ... ⋈ R_m]`.
    pub fn projoin(rs: &[Relation], keep: &Scheme) -> Result<Relation> {
        Relation::join_all(rs)?.project(keep)
    }

    /// Peirce's relative product: the two-factor pure projoin.
    pub fn relative_product(p: &Relation, q: &Relation) -> Result<Relation> {
        p.same_domain(q)?;
        let keep = p.scheme.union(&q.scheme).difference(&p.scheme.intersection(&q.scheme));
        p.join(q)?.project(&keep)
    }

    /// Bond of bondable factors: every attribute shared by two factors is projected out.
    pub fn bond(rs: &[Relation]) -> Result<Relation> {
        let mut count: BTreeMap<&Attr, usize> = BTreeMap::new();
        for r in rs {
            for a in r.scheme.iter() {
                *count.entry(a).or_default() += 1;
            }
        }
        if let Some((a, &c)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::NotBondable { attr: a.to_string(), count: c });
        }
        let keep: Scheme = count.iter().filter(|(_, &c)| c == 1).map(|(a, _)| (*a).clone()).collect();
        Relation::projoin(rs, &keep)
    }
}

fn pairwise_distinct(t: &[Elem]) -> bool {
    let mut seen = [false; 256];
    t.iter().all(|&e| !std::mem::replace(&mut seen[e as usize], true))
}

/// Scheme-aware set equality; errors when the domains differ.
pub fn equal_relations(a: &Relation, b: &Relation) -> Result<bool> {
    a.same_domain(b)?;
    Ok(a.scheme == b.scheme && a.tuples == b.tuples)
}

pub fn count_tuples(r: &Relation) -> usize {
    r.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> Arc<Domain> {
        Domain::letters(n).unwrap()
    }

    fn rel(dom: &Arc<Domain>, scheme: &str, rows: &[&str]) -> Relation {
        Relation::from_rows(
            dom.clone(),
            Scheme::parse_list(scheme),
            rows.iter().map(|r| r.split_whitespace().collect::<Vec<_>>()),
        )
        .unwrap()
    }

    #[test]
    fn natural_order() {
        assert_eq!(natural_cmp("x2", "x10"), Ordering::Less);
        assert_eq!(natural_cmp("10", "9"), Ordering::Greater);
        assert_eq!(natural_cmp("t", "t1"), Ordering::Less);
        assert_eq!(natural_cmp("a", "a"), Ordering::Equal);
        let s = Scheme::new(["10", "2", "1"]);
        assert_eq!(s.to_string(), "{1,2,10}");
    }

    #[test]
    fn standard_relations() {
        let dom = d(2);
        let i3 = Relation::identity(dom.clone(), Scheme::numbered(3));
        assert_eq!(i3, rel(&dom, "1,2,3", &["a a a", "b b b"]));
        let d3 = Relation::diversity(dom.clone(), Scheme::numbered(3)).unwrap();
        assert!(d3.is_empty());
        let u2 = Relation::universal(dom.clone(), Scheme::numbered(2)).unwrap();
        assert_eq!(u2.len(), 4);
        let rel_id = Relation::standard(StandardKind::Identity, Scheme::numbered(2), d(3), Some(&[2])).unwrap();
        assert_eq!(rel_id.len(), 1);
        assert!(rel_id.contains(&[2, 2]));
        let d3on3 = Relation::diversity(d(3), Scheme::numbered(3)).unwrap();
        assert_eq!(d3on3.len(), 6);
    }

    #[test]
    fn projection_and_selection() {
        let dom = d(3);
        let r = rel(&dom, "1,2,3", &["a b b", "a b c"]);
        let p = r.project(&Scheme::parse_list("1,3")).unwrap();
        assert_eq!(p, rel(&dom, "1,3", &["a b", "a c"]));
        assert_eq!(r.project(r.scheme()).unwrap(), r);
        let t = r.project(&Scheme::empty()).unwrap();
        assert_eq!(t, Relation::truth(dom.clone(), true));
        assert_eq!(
            Relation::empty(dom.clone(), Scheme::numbered(2)).project(&Scheme::empty()).unwrap(),
            Relation::truth(dom.clone(), false)
        );
        assert!(matches!(r.project(&Scheme::parse_list("4")), Err(Error::UnknownAttribute { .. })));

        let s = r.select(&Scheme::parse_list("1"), &[0]).unwrap();
        assert_eq!(s, rel(&dom, "2,3", &["b b", "b c"]));
        assert_eq!(r.select(&Scheme::empty(), &[]).unwrap(), r);
        let none = r.select(&Scheme::parse_list("1"), &[2]).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.scheme(), &Scheme::parse_list("2,3"));
    }

    #[test]
    fn complement_cases() {
        let dom = d(2);
        let i3 = Relation::identity(dom.clone(), Scheme::numbered(3));
        let not = i3.complement().unwrap();
        assert_eq!(not.len(), 6);
        assert_eq!(not.complement().unwrap(), i3);
        let e = Relation::empty(dom.clone(), Scheme::numbered(2));
        assert_eq!(e.complement().unwrap(), Relation::universal(dom, Scheme::numbered(2)).unwrap());
    }

    #[test]
    fn cartesian_cases() {
        let dom = d(2);
        let a = rel(&dom, "1", &["a"]);
        let b = rel(&dom, "2", &["b"]);
        assert_eq!(Relation::cartesian(&[a.clone(), b]).unwrap(), rel(&dom, "1,2", &["a b"]));
        let t = Relation::truth(dom.clone(), true);
        assert_eq!(Relation::cartesian(&[a.clone(), t]).unwrap(), a);
        let ab = rel(&dom, "2", &["a", "b"]);
        assert_eq!(Relation::cartesian(&[a.clone(), ab]).unwrap(), rel(&dom, "1,2", &["a a", "a b"]));
        assert!(matches!(Relation::cartesian(&[a.clone(), a]), Err(Error::SchemeCollision { .. })));
    }

    #[test]
    fn join_of_table_example() {
        let dom = d(2);
        let r12 = rel(&dom, "1,2", &["a a", "a b", "b a"]);
        let r13 = rel(&dom, "1,3", &["a a", "a b", "b b"]);
        let r = rel(&dom, "1,2,3", &["a a a", "a a b", "a b a", "a b b", "b a b"]);
        assert_eq!(Relation::join_all(&[r12, r13]).unwrap(), r);
        let u = Relation::universal(dom, Scheme::numbered(3)).unwrap();
        assert_eq!(r.join(&u).unwrap(), r);
    }

    #[test]
    fn relative_product_cases() {
        let dom = d(3);
        let p = Relation::identity(dom.clone(), Scheme::new(["x", "y"]));
        let q = Relation::identity(dom.clone(), Scheme::new(["y", "z"]));
        assert_eq!(
            Relation::relative_product(&p, &q).unwrap(),
            Relation::identity(dom.clone(), Scheme::new(["x", "z"]))
        );
        let a = rel(&dom, "x", &["a", "b"]);
        let b = rel(&dom, "y", &["c"]);
        assert_eq!(Relation::relative_product(&a, &b).unwrap(), Relation::cartesian(&[a, b]).unwrap());
    }

    #[test]
    fn relative_product_ternary_with_binary() {
        // only the row with t = a meets the binary factor
        let dom = d(2);
        let p = rel(&dom, "t,x,y", &["b a a", "a b a"]);
        let q = rel(&dom, "t,z", &["a b"]);
        let out = Relation::relative_product(&p, &q).unwrap();
        assert_eq!(out, rel(&dom, "x,y,z", &["b a b"]));
    }

    #[test]
    fn bond_checks_bondability() {
        let dom = d(2);
        let p = Relation::identity(dom.clone(), Scheme::new(["t", "a"]));
        let q = Relation::identity(dom.clone(), Scheme::new(["t", "b"]));
        let r = Relation::identity(dom.clone(), Scheme::new(["t", "c"]));
        assert!(matches!(Relation::bond(&[p.clone(), q.clone(), r]), Err(Error::NotBondable { count: 3, .. })));
        assert_eq!(Relation::bond(&[p.clone(), q.clone()]).unwrap(), Relation::relative_product(&p, &q).unwrap());
    }

    #[test]
    fn rename_and_equality() {
        let dom = d(2);
        let r = rel(&dom, "1,2", &["a b"]);
        let map: BTreeMap<Attr, Attr> = [("1".into(), "y".into()), ("2".into(), "x".into())].into();
        let s = r.rename(&map).unwrap();
        assert_eq!(s, rel(&dom, "x,y", &["b a"]));
        let bad: BTreeMap<Attr, Attr> = [("1".into(), "2".into())].into();
        assert!(r.rename(&bad).is_err());
        assert!(equal_relations(&r, &r).unwrap());
        let other = Relation::empty(Domain::new("E", ["a", "b"]).unwrap(), Scheme::numbered(2));
        assert!(matches!(equal_relations(&r, &other), Err(Error::DomainMismatch { .. })));
        assert_eq!(count_tuples(&Relation::identity(d(2), Scheme::numbered(3)).complement().unwrap()), 6);
    }

    #[test]
    fn tuples_enumerate_lexicographically() {
        let all: Vec<Tuple> = all_tuples(2, 2).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(all_tuples(3, 0).count(), 1);
    }
}
