//! Functional and multivalued dependencies, keys and key admission.

use crate::caps;
use crate::error::{Error, Result, Witness};
use crate::par::{self, Exec};
use crate::relation::{Attr, Elem, Relation, Scheme, Tuple};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Disjoint nonempty blocks; the ground set is their union.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub blocks: Vec<Scheme>,
}

impl Partition {
    pub fn new(blocks: Vec<Scheme>) -> Partition {
        let mut blocks = blocks;
        blocks.sort();
        Partition { blocks }
    }

    /// Singleton blocks, one per attribute.
    pub fn singletons(s: &Scheme) -> Partition {
        Partition::new(s.iter().map(|a| Scheme::new([a.clone()])).collect())
    }

    /// Parses `1,2|3|4` into blocks `{1,2}`, `{3}`, `{4}`.
    pub fn parse(text: &str) -> Partition {
        Partition::new(text.split('|').map(Scheme::parse_list).filter(|b| !b.is_empty()).collect())
    }

    pub fn ground(&self) -> Scheme {
        self.blocks.iter().fold(Scheme::empty(), |acc, b| acc.union(b))
    }

    /// Checks that the blocks are nonempty, pairwise disjoint and cover `ground` exactly.
    pub fn validate(&self, ground: &Scheme) -> Result<()> {
        let mut seen = Scheme::empty();
        for b in &self.blocks {
            if b.is_empty() {
                return Err(Error::InvalidPartition("a block is empty".into()));
            }
            if !b.is_disjoint(&seen) {
                return Err(Error::InvalidPartition(format!("block {b} overlaps another block")));
            }
            seen = seen.union(b);
        }
        if &seen != ground {
            return Err(Error::InvalidPartition(format!("blocks cover {seen} but must cover {ground}")));
        }
        Ok(())
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, "|")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DependencyKind {
    Functional,
    Key,
    Multikey,
    Mvd,
    AdmitsKey,
}

/// Outcome of a dependency check. A failed check always carries a witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependencyReport {
    pub kind: DependencyKind,
    pub lhs: Scheme,
    pub rhs: Vec<Scheme>,
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl DependencyReport {
    /// One-line text form, e.g. `fd {1} -> {2,3}: fails; present (a,a,b) (a,b,a)`.
    pub fn to_line(&self) -> String {
        let rhs: Vec<String> = self.rhs.iter().map(|s| s.to_string()).collect();
        let head = match self.kind {
            DependencyKind::Functional => format!("fd {} -> {}", self.lhs, rhs.join("")),
            DependencyKind::Key => format!("key {}", self.lhs),
            DependencyKind::Multikey => format!("multikey {}", self.lhs),
            DependencyKind::Mvd => format!("mvd {} ->> {}", self.lhs, rhs.join("|")),
            DependencyKind::AdmitsKey => format!("admits {}-key", self.lhs.len()),
        };
        let mut line = format!("{head}: {}", if self.holds { "holds" } else { "fails" });
        if let Some(w) = &self.witness {
            let rows: Vec<String> = w.present.iter().map(|t| format!("({})", t.join(","))).collect();
            line.push_str(&format!("; present {}", rows.join(" ")));
            if let Some(m) = &w.missing {
                line.push_str(&format!("; missing ({})", m.join(",")));
            }
        }
        line
    }
}

fn positions(r: &Relation, s: &Scheme) -> Result<Vec<usize>> {
    let pos = s
        .iter()
        .map(|a| {
            r.scheme()
                .position(a)
                .ok_or_else(|| Error::UnknownAttribute { attr: a.to_string(), scheme: r.scheme().to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pos)
}

fn pick(t: &[Elem], pos: &[usize]) -> Vec<Elem> {
    pos.iter().map(|&i| t[i]).collect()
}

/// Minimal violating pair `(a, b)`, `a < b`, of `Λ → M`.
fn fd_violation(r: &Relation, lhs: &[usize], rhs: &[usize]) -> Option<(Tuple, Tuple)> {
    let mut groups: BTreeMap<Vec<Elem>, Vec<&Tuple>> = BTreeMap::new();
    for t in r.tuples() {
        groups.entry(pick(t, lhs)).or_default().push(t);
    }
    groups
        .values()
        .filter_map(|g| {
            let a = g[0];
            let ma = pick(a, rhs);
            g.iter().find(|b| pick(b, rhs) != ma).map(|b| (a.clone(), (*b).clone()))
        })
        .min()
}

/// Does `Λ → M` hold in `R`?
pub fn functional_dep(r: &Relation, lhs: &Scheme, rhs: &Scheme) -> Result<DependencyReport> {
    let (lp, rp) = (positions(r, lhs)?, positions(r, rhs)?);
    let violation = fd_violation(r, &lp, &rp);
    Ok(DependencyReport {
        kind: DependencyKind::Functional,
        lhs: lhs.clone(),
        rhs: vec![rhs.clone()],
        holds: violation.is_none(),
        witness: violation.map(|(a, b)| Witness { present: vec![r.describe(&a), r.describe(&b)], missing: None }),
    })
}

/// Is `K` a key, i.e. does `K → Σ \ K` hold?
pub fn key_report(r: &Relation, key: &Scheme) -> Result<DependencyReport> {
    let rest = r.scheme().difference(key);
    let mut rep = functional_dep(r, key, &rest)?;
    rep.kind = DependencyKind::Key;
    Ok(rep)
}

pub fn is_key(r: &Relation, key: &Scheme) -> Result<bool> {
    Ok(key_report(r, key)?.holds)
}

/// `k`-subsets of `0..n` in colex order.
pub(crate) fn colex_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        // advance to the next combination in colex order
        let mut i = 0;
        while i < k && (i + 1 < k && c[i] + 1 == c[i + 1] || i + 1 == k && c[i] + 1 == n) {
            i += 1;
        }
        if i == k {
            return out;
        }
        c[i] += 1;
        for (j, v) in c.iter_mut().enumerate().take(i) {
            *v = j;
        }
    }
}

/// All `k`-keys of `R`, in colex order of their canonical positions.
pub fn find_keys(r: &Relation, k: usize) -> Vec<Scheme> {
    let attrs = r.scheme().attrs();
    let all: Vec<usize> = (0..attrs.len()).collect();
    colex_subsets(attrs.len(), k)
        .into_iter()
        .filter(|sub| {
            let rest: Vec<usize> = all.iter().copied().filter(|i| !sub.contains(i)).collect();
            fd_violation(r, sub, &rest).is_none()
        })
        .map(|sub| Scheme::new(sub.iter().map(|&i| attrs[i].clone())))
        .collect()
}

/// `|R| ≤ d^k`: the relation is a projection of one with a `k`-key.
pub fn admits_key(r: &Relation, k: usize) -> bool {
    let bound = (r.domain().size() as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    r.len() as u128 <= bound
}

pub fn admits_key_report(r: &Relation, k: usize) -> DependencyReport {
    DependencyReport {
        kind: DependencyKind::AdmitsKey,
        lhs: Scheme::new((1..=k).map(|i| Attr::new(format!("t{i}")))),
        rhs: vec![r.scheme().clone()],
        holds: admits_key(r, k),
        witness: None,
    }
}

/// Product of block projection sizes, saturating.
fn product_size(r: &Relation, blocks: &[Scheme]) -> Result<u128> {
    blocks.iter().try_fold(1u128, |acc, b| Ok(acc.saturating_mul(r.project(b)?.len() as u128)))
}

/// Is `R` the Cartesian product of its projections onto `blocks`?
///
/// `R` is always contained in that product, so comparing sizes decides it.
pub fn is_cartesian_over(r: &Relation, blocks: &Partition) -> Result<bool> {
    blocks.validate(r.scheme())?;
    Ok(product_size(r, &blocks.blocks)? == r.len() as u128)
}

/// Minimal tuple of `Π π_b R` missing from `R`, with one source row per block.
fn missing_from_product(r: &Relation, blocks: &[Scheme]) -> Result<Option<(Tuple, Vec<Tuple>)>> {
    let size = product_size(r, blocks)?;
    if size == r.len() as u128 {
        return Ok(None);
    }
    let limit = caps::current().max_cells as u128;
    if size > limit {
        return Err(Error::CapExceeded { what: "block product", value: size, cap: limit });
    }
    let n = r.arity();
    let pos: Vec<Vec<usize>> = blocks.iter().map(|b| positions(r, b)).collect::<Result<_>>()?;
    let parts: Vec<Vec<Tuple>> =
        blocks.iter().map(|b| r.project(b).map(|p| p.tuples().iter().cloned().collect())).collect::<Result<_>>()?;
    let mut best: Option<Tuple> = None;
    let mut idx = vec![0usize; parts.len()];
    'outer: loop {
        let mut t = vec![0; n];
        for (bi, &choice) in idx.iter().enumerate() {
            for (k, &p) in pos[bi].iter().enumerate() {
                t[p] = parts[bi][choice][k];
            }
        }
        if !r.contains(&t) && best.as_ref().is_none_or(|b| &t < b) {
            best = Some(t);
        }
        for bi in (0..idx.len()).rev() {
            idx[bi] += 1;
            if idx[bi] < parts[bi].len() {
                continue 'outer;
            }
            idx[bi] = 0;
        }
        break;
    }
    let missing = best.expect("product is strictly larger than the relation");
    let sources = pos
        .iter()
        .map(|p| {
            let want = pick(&missing, p);
            r.tuples().iter().find(|t| pick(t, p) == want).expect("value comes from a projection").clone()
        })
        .collect();
    Ok(Some((missing, sources)))
}

/// Does `M ↠ Λ_1 ∪ ... ∪ Λ_m` hold? `blocks` must partition `Σ \ M`.
pub fn mvd_holds(r: &Relation, m: &Scheme, blocks: &Partition) -> Result<DependencyReport> {
    mvd_holds_with(Exec::default(), r, m, blocks)
}

pub fn mvd_holds_with(exec: Exec, r: &Relation, m: &Scheme, blocks: &Partition) -> Result<DependencyReport> {
    positions(r, m)?;
    blocks.validate(&r.scheme().difference(m))?;
    // each selection is checked as a relation over Σ (the M columns are constant)
    let full_blocks: Vec<Scheme> = std::iter::once(m.clone()).chain(blocks.blocks.iter().cloned()).collect();
    let alphas: Vec<Tuple> = r.project(m)?.tuples().iter().cloned().collect();
    let mpos = positions(r, m)?;
    let results = par::map(exec, alphas, |alpha| -> Result<Option<(Tuple, Vec<Tuple>)>> {
        let rows: BTreeSet<Tuple> = r.tuples().iter().filter(|t| pick(t, &mpos) == alpha).cloned().collect();
        let sel = Relation::from_set(r.domain().clone(), r.scheme().clone(), rows);
        missing_from_product(&sel, &full_blocks)
    });
    let mut worst: Option<(Tuple, Vec<Tuple>)> = None;
    for res in results {
        if let Some(v) = res? {
            if worst.as_ref().is_none_or(|w| v.0 < w.0) {
                worst = Some(v);
            }
        }
    }
    let kind = if blocks.blocks.iter().all(|b| b.len() == 1) && !m.is_empty() {
        DependencyKind::Multikey
    } else {
        DependencyKind::Mvd
    };
    Ok(DependencyReport {
        kind,
        lhs: m.clone(),
        rhs: blocks.blocks.clone(),
        holds: worst.is_none(),
        witness: worst.map(|(missing, sources)| Witness {
            present: sources.iter().map(|t| r.describe(t)).collect(),
            missing: Some(r.describe(&missing)),
        }),
    })
}

/// Is `K` a multikey: is every selection on `K` a product of unaries?
pub fn multikey_report(r: &Relation, key: &Scheme) -> Result<DependencyReport> {
    let rest = r.scheme().difference(key);
    let mut rep = mvd_holds(r, key, &Partition::singletons(&rest))?;
    rep.kind = DependencyKind::Multikey;
    Ok(rep)
}
