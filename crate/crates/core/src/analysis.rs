//! Exhaustive deciders at desk scale: degeneracy, join reducibility, relative
//! products through Boolean rank, one-parameter ternary projoins, and censuses.

use crate::caps;
use crate::dependencies::{colex_subsets, Partition};
use crate::error::{Error, Result};
use crate::formula::{Atom, Environment, Formula, ReductionCertificate, Var};
use crate::par::{self, Exec};
use crate::reducers;
use crate::relation::{all_tuples, Attr, Domain, Elem, Relation, Scheme, Tuple};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Degeneracy

fn splits_over(r: &Relation, left: &Scheme) -> Result<bool> {
    let right = r.scheme().difference(left);
    Ok(r.project(left)?.len() * r.project(&right)?.len() == r.len())
}

/// A nontrivial bipartition over which `R` is a Cartesian product, if any.
pub fn is_degenerate(r: &Relation) -> Result<Option<Partition>> {
    let blocks = finest_partition(r)?;
    if blocks.blocks.len() < 2 {
        return Ok(None);
    }
    let first = blocks.blocks.iter().find(|b| b.contains(&r.scheme().attrs()[0])).unwrap().clone();
    let rest = r.scheme().difference(&first);
    Ok(Some(Partition::new(vec![first, rest])))
}

/// Plain yes/no degeneracy test, without building the factorization.
pub fn degenerate(r: &Relation) -> Result<bool> {
    let n = r.arity();
    if n < 2 {
        return Ok(false);
    }
    let attrs = r.scheme().attrs();
    // bipartitions up to swapping sides: the left side holds the first attribute
    for size in 1..n {
        for rest in colex_subsets(n - 1, size - 1) {
            let left: Scheme =
                std::iter::once(attrs[0].clone()).chain(rest.iter().map(|&i| attrs[i + 1].clone())).collect();
            if splits_over(r, &left)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The finest partition of the scheme over which `R` is a Cartesian product.
pub fn finest_partition(r: &Relation) -> Result<Partition> {
    let mut blocks = Vec::new();
    let mut current = r.clone();
    while current.arity() > 0 {
        let attrs = current.scheme().attrs().to_vec();
        let n = attrs.len();
        let mut block = current.scheme().clone();
        'search: for size in 1..n {
            for rest in colex_subsets(n - 1, size - 1) {
                let left: Scheme =
                    std::iter::once(attrs[0].clone()).chain(rest.iter().map(|&i| attrs[i + 1].clone())).collect();
                if splits_over(&current, &left)? {
                    block = left;
                    break 'search;
                }
            }
        }
        let remaining = current.scheme().difference(&block);
        current = current.project(&remaining)?;
        blocks.push(block);
    }
    Ok(Partition::new(blocks))
}

/// Factors of the finest Cartesian factorization, in block order.
pub fn finest_factorization(r: &Relation) -> Result<Vec<Relation>> {
    finest_partition(r)?.blocks.iter().map(|b| r.project(b)).collect()
}

// ---------------------------------------------------------------------------
// Joins

/// `⋈_i π_{Σ∖{i}} R`, which contains `R` and equals it iff `R` is join reducible.
pub fn join_of_projections(r: &Relation) -> Result<Relation> {
    let factors: Vec<Relation> = r
        .scheme()
        .iter()
        .map(|a| r.project(&r.scheme().difference(&Scheme::new([a.clone()]))))
        .collect::<Result<_>>()?;
    Relation::join_all(&factors)
}

/// Exact join reducibility, with the canonical certificate when reducible.
pub fn is_join_reducible(r: &Relation) -> Result<Option<ReductionCertificate>> {
    if r.arity() < 2 {
        return Err(Error::refused("arity", format!("join reducibility needs arity >= 2, got {}", r.arity())));
    }
    if join_of_projections(r)? != *r {
        return Ok(None);
    }
    let vars: Vec<Var> = (1..=r.arity()).map(|p| Attr::new(format!("x{p}"))).collect();
    let varmap: BTreeMap<Var, Attr> = vars.iter().cloned().zip(r.scheme().iter().cloned()).collect();
    let mut env = Environment::new(r.domain().clone());
    let mut parts = Vec::new();
    for (p, a) in r.scheme().iter().enumerate() {
        let keep = r.scheme().difference(&Scheme::new([a.clone()]));
        let sym = format!("R{}", p + 1);
        env.insert(sym.clone(), r.project(&keep)?)?;
        let args: Vec<Var> = (0..r.arity()).filter(|&q| q != p).map(|q| vars[q].clone()).collect();
        parts.push(Formula::Atom(Atom { symbol: sym, args }));
    }
    ReductionCertificate::new(r.clone(), Formula::conj(parts), env, varmap).map(Some)
}

/// The two sufficient conditions for join irreducibility and their agreement
/// with the exact test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IrreducibilityReport {
    /// `R` is not universal but every proper projection is.
    pub universal_projections: bool,
    /// `¬R` is nonempty and no unary projection of `¬R` is the whole domain.
    pub proper_complement_projections: bool,
    pub join_reducible: bool,
    pub consistent: bool,
}

pub fn irreducibility_tests(r: &Relation) -> Result<IrreducibilityReport> {
    let n = r.arity();
    let d = r.domain().size() as u128;
    let full = r.power_size();
    let not_universal = (r.len() as u128) < full;
    let mut cond_i = not_universal;
    if n >= 2 {
        for a in r.scheme().iter() {
            let keep = r.scheme().difference(&Scheme::new([a.clone()]));
            if (r.project(&keep)?.len() as u128) < d.pow((n - 1) as u32) {
                cond_i = false;
                break;
            }
        }
    }
    // e ∈ π_i(¬R) iff the slice t_i = e of R is not full
    let slice = if n == 0 { 1 } else { d.pow((n - 1) as u32) };
    let mut counts = vec![vec![0u128; d as usize]; n];
    for t in r.tuples() {
        for (i, &e) in t.iter().enumerate() {
            counts[i][e as usize] += 1;
        }
    }
    let cond_ii = not_universal && counts.iter().all(|c| c.contains(&slice));
    let join_reducible = n >= 2 && join_of_projections(r)? == *r;
    Ok(IrreducibilityReport {
        universal_projections: cond_i,
        proper_complement_projections: cond_ii,
        join_reducible,
        consistent: !(cond_i || cond_ii) || !join_reducible,
    })
}

// ---------------------------------------------------------------------------
// Bit sets and cover search

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Bits {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn or_assign(&mut self, o: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a |= b;
        }
    }
    fn contains_all(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| b & !a == 0)
    }
    /// First bit set in `self` but not in `covered`.
    fn first_outside(&self, covered: &Bits) -> Option<usize> {
        self.0.iter().zip(&covered.0).enumerate().find_map(|(w, (a, b))| {
            let rest = a & !b;
            (rest != 0).then(|| w * 64 + rest.trailing_zeros() as usize)
        })
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b))
    }
}

/// Smallest family of at most `k` shapes whose union is exactly `target`.
/// Every shape must lie inside `target`.
fn cover_search(target: &Bits, shapes: &[Bits], k: usize) -> Option<Vec<usize>> {
    fn go(
        target: &Bits,
        shapes: &[Bits],
        covered: &Bits,
        left: usize,
        chosen: &mut Vec<usize>,
        failed: &mut HashSet<(Bits, usize)>,
    ) -> bool {
        let Some(cell) = target.first_outside(covered) else {
            return true;
        };
        if left == 0 || failed.contains(&(covered.clone(), left)) {
            return false;
        }
        let candidates: Vec<usize> = (0..shapes.len()).filter(|&s| shapes[s].get(cell)).collect();
        for &s in &candidates {
            let mut next = covered.clone();
            next.or_assign(&shapes[s]);
            chosen.push(s);
            if go(target, shapes, &next, left - 1, chosen, failed) {
                return true;
            }
            chosen.pop();
        }
        failed.insert((covered.clone(), left));
        false
    }
    let mut chosen = Vec::new();
    let mut failed = HashSet::new();
    let empty = Bits(vec![0; target.0.len()]);
    go(target, shapes, &empty, k, &mut chosen, &mut failed).then_some(chosen)
}

// ---------------------------------------------------------------------------
// Boolean matrices

/// A 0-1 matrix whose rows and columns are indexed by value tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanMatrix {
    pub row_labels: Vec<Tuple>,
    pub col_labels: Vec<Tuple>,
    rows: Vec<Bits>,
}

/// A rank-1 all-ones submatrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rectangle {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl BooleanMatrix {
    pub fn zeros(rows: usize, cols: usize) -> BooleanMatrix {
        BooleanMatrix {
            row_labels: (0..rows).map(|i| vec![i as Elem]).collect(),
            col_labels: (0..cols).map(|j| vec![j as Elem]).collect(),
            rows: vec![Bits::new(cols); rows],
        }
    }

    pub fn from_rows(rows: &[&[u8]]) -> BooleanMatrix {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = BooleanMatrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0 {
                    m.set(i, j);
                }
            }
        }
        m
    }

    /// The matrix of `R` with rows indexed by `D^left` and columns by `D^right`.
    pub fn of_bipartition(r: &Relation, left: &Scheme) -> Result<BooleanMatrix> {
        let right = r.scheme().difference(left);
        let d = r.domain().size();
        let c = caps::current();
        c.check_power(d, left.len())?;
        c.check_power(d, right.len())?;
        let lpos = r.scheme().positions_of(left)?;
        let rpos = r.scheme().positions_of(&right)?;
        let row_labels: Vec<Tuple> = all_tuples(d, left.len()).collect();
        let col_labels: Vec<Tuple> = all_tuples(d, right.len()).collect();
        let index = |t: &[Elem]| t.iter().fold(0usize, |acc, &e| acc * d + e as usize);
        let mut rows = vec![Bits::new(col_labels.len()); row_labels.len()];
        for t in r.tuples() {
            let i = index(&lpos.iter().map(|&p| t[p]).collect::<Vec<_>>());
            let j = index(&rpos.iter().map(|&p| t[p]).collect::<Vec<_>>());
            rows[i].set(j);
        }
        Ok(BooleanMatrix { row_labels, col_labels, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.rows[i].set(j)
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().map(Bits::count).sum()
    }

    /// All maximal all-ones rectangles of the support.
    pub fn maximal_rectangles(&self) -> Vec<Rectangle> {
        // column sets of maximal rectangles are the intersections of row supports
        let mut closed: BTreeSet<Bits> = self.rows.iter().filter(|r| !r.is_zero()).cloned().collect();
        let mut frontier: Vec<Bits> = closed.iter().cloned().collect();
        while let Some(c) = frontier.pop() {
            for r in &self.rows {
                let x = c.and(r);
                if !x.is_zero() && closed.insert(x.clone()) {
                    frontier.push(x);
                }
            }
        }
        closed
            .into_iter()
            .map(|cols| Rectangle {
                rows: (0..self.n_rows()).filter(|&i| self.rows[i].contains_all(&cols)).collect(),
                cols: cols.ones().collect(),
            })
            .collect()
    }
}

/// Whether the matrix is an OR of at most `k` rank-1 matrices; returns the cover.
pub fn boolean_rank_at_most(m: &BooleanMatrix, k: usize) -> Result<Option<Vec<Rectangle>>> {
    let c = caps::current();
    let cells = (m.n_rows() * m.n_cols()) as u64;
    let ones = m.ones();
    if cells > c.rank_cells && ones > c.rank_ones {
        return Err(Error::CapExceeded {
            what: "Boolean rank search cells",
            value: cells as u128,
            cap: c.rank_cells as u128,
        });
    }
    let width = m.n_cols();
    let flat = |i: usize, j: usize| i * width + j;
    let mut target = Bits::new(cells as usize);
    for i in 0..m.n_rows() {
        for j in m.rows[i].ones() {
            target.set(flat(i, j));
        }
    }
    let rects = m.maximal_rectangles();
    let shapes: Vec<Bits> = rects
        .iter()
        .map(|r| {
            let mut b = Bits::new(cells as usize);
            for &i in &r.rows {
                for &j in &r.cols {
                    b.set(flat(i, j));
                }
            }
            b
        })
        .collect();
    Ok(cover_search(&target, &shapes, k).map(|idx| idx.into_iter().map(|i| rects[i].clone()).collect()))
}

/// Decides `R = ∃t [A(x_left, t) ∧ B(t, x_right)]` with one parameter.
pub fn rel_prod_reducible2(r: &Relation, left: &Scheme) -> Result<Option<ReductionCertificate>> {
    if left.is_empty() || !left.is_subset(r.scheme()) || left == r.scheme() {
        return Err(Error::InvalidPartition(format!("{left} must be a nonempty proper subset of {}", r.scheme())));
    }
    let d = r.domain().size();
    let m = BooleanMatrix::of_bipartition(r, left)?;
    let Some(cover) = boolean_rank_at_most(&m, d)? else {
        return Ok(None);
    };
    let right = r.scheme().difference(left);
    let mut a_rows = BTreeSet::new();
    let mut b_rows = BTreeSet::new();
    for (label, rect) in cover.iter().enumerate() {
        for &i in &rect.rows {
            let mut row = m.row_labels[i].clone();
            row.push(label as Elem);
            a_rows.insert(row);
        }
        for &j in &rect.cols {
            let mut row = vec![label as Elem];
            row.extend_from_slice(&m.col_labels[j]);
            b_rows.insert(row);
        }
    }
    let var = |a: &Attr| Attr::new(format!("x{}", r.scheme().position(a).unwrap() + 1));
    let t = Attr::new("t");
    let mut a_args: Vec<Var> = left.iter().map(var).collect();
    a_args.push(t.clone());
    let mut b_args = vec![t.clone()];
    b_args.extend(right.iter().map(var));
    let domain = r.domain().clone();
    let env = Environment::new(domain.clone())
        .with("A", Relation::new(domain.clone(), Scheme::numbered(left.len() + 1), a_rows)?)?
        .with("B", Relation::new(domain, Scheme::numbered(right.len() + 1), b_rows)?)?;
    let formula = Formula::exists(
        vec![t],
        Formula::conj(vec![
            Formula::Atom(Atom { symbol: "A".into(), args: a_args }),
            Formula::Atom(Atom { symbol: "B".into(), args: b_args }),
        ]),
    );
    let varmap = r.scheme().iter().map(|a| (var(a), a.clone())).collect();
    ReductionCertificate::new(r.clone(), formula, env, varmap).map(Some)
}

// ---------------------------------------------------------------------------
// One-parameter ternary projoins

/// A product `A × B × C` of element sets, stored as bit masks over the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct BoxSets([u32; 3]);

fn members(mask: u32, d: usize) -> impl Iterator<Item = usize> {
    (0..d).filter(move |&e| mask >> e & 1 == 1)
}

/// Decides whether a ternary whose binary projections are all universal is a
/// one-parameter projoin, i.e. a union of at most `|D|` boxes.
pub fn one_param_ternary_projoin(r: &Relation) -> Result<Option<ReductionCertificate>> {
    if r.arity() != 3 {
        return Err(Error::refused("arity", format!("a ternary is required, got arity {}", r.arity())));
    }
    let d = r.domain().size();
    for a in r.scheme().iter() {
        let keep = r.scheme().difference(&Scheme::new([a.clone()]));
        if r.project(&keep)?.len() < d * d {
            return Err(Error::refused(
                "projections-not-universal",
                format!(
                    "the projection onto {keep} is not universal, so factors without the parameter \
                     cannot be discarded and a negative answer would not be conclusive"
                ),
            ));
        }
    }
    let cell = |a: usize, b: usize, c: usize| (a * d + b) * d + c;
    let mut target = Bits::new(d * d * d);
    for t in r.tuples() {
        target.set(cell(t[0] as usize, t[1] as usize, t[2] as usize));
    }
    let full = (1u32 << d) - 1;
    let mut boxes = Vec::new();
    for am in 1..=full {
        for bm in 1..=full {
            let cm = (0..d)
                .filter(|&c| members(am, d).all(|a| members(bm, d).all(|b| target.get(cell(a, b, c)))))
                .fold(0u32, |m, c| m | 1 << c);
            if cm == 0 {
                continue;
            }
            let closed_a = (0..d)
                .filter(|&a| members(bm, d).all(|b| members(cm, d).all(|c| target.get(cell(a, b, c)))))
                .fold(0u32, |m, a| m | 1 << a);
            let closed_b = (0..d)
                .filter(|&b| members(am, d).all(|a| members(cm, d).all(|c| target.get(cell(a, b, c)))))
                .fold(0u32, |m, b| m | 1 << b);
            if closed_a == am && closed_b == bm {
                boxes.push(BoxSets([am, bm, cm]));
            }
        }
    }
    let shapes: Vec<Bits> = boxes
        .iter()
        .map(|bx| {
            let mut s = Bits::new(d * d * d);
            for a in members(bx.0[0], d) {
                for b in members(bx.0[1], d) {
                    for c in members(bx.0[2], d) {
                        s.set(cell(a, b, c));
                    }
                }
            }
            s
        })
        .collect();
    let Some(cover) = cover_search(&target, &shapes, d) else {
        return Ok(None);
    };
    let domain = r.domain().clone();
    let products: Vec<Vec<Relation>> = cover
        .iter()
        .map(|&i| {
            r.scheme()
                .iter()
                .zip(boxes[i].0)
                .map(|(a, mask)| {
                    Relation::new(domain.clone(), Scheme::new([a.clone()]), members(mask, d).map(|e| vec![e as Elem]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    reducers::union_to_projoin(&products, 1).map(Some)
}

// ---------------------------------------------------------------------------
// Censuses

fn big_pow2(e: u64) -> BigUint {
    BigUint::from(1u8) << e
}

fn ser_big<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// `2^(d + d^(n-1) - 1) (2^n - 2)`, the bound on degenerate `n`-aries.
pub fn bound_ndeg(d: usize, n: usize) -> BigUint {
    if n == 0 || d == 0 {
        return BigUint::from(0u8);
    }
    let dn1 = (d as u64).pow((n - 1) as u32);
    (big_pow2(d as u64 + dn1 - 1)) * (big_pow2(n as u64) - BigUint::from(2u8))
}

/// `2^(n d^(n-1))`, the bound on join reducible `n`-aries.
pub fn bound_njred(d: usize, n: usize) -> BigUint {
    if n == 0 {
        return BigUint::from(1u8);
    }
    big_pow2(n as u64 * (d as u64).pow((n - 1) as u32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CensusMode {
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusRow {
    pub d: usize,
    pub n: usize,
    pub mode: CensusMode,
    /// Number of `n`-ary relations, `2^(d^n)`.
    #[serde(serialize_with = "ser_big")]
    pub total: BigUint,
    /// Relations examined: all of them, or the sample size.
    pub examined: u64,
    pub degenerate: u64,
    pub join_reducible: u64,
    #[serde(serialize_with = "ser_big")]
    pub bound_ndeg: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub bound_njred: BigUint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sampled shares with 95% normal-approximation half-widths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<SampleEstimates>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleEstimates {
    pub degenerate_share: f64,
    pub degenerate_half_width: f64,
    pub join_reducible_share: f64,
    pub join_reducible_half_width: f64,
}

pub const CSV_HEADER: &str = "d,n,total,degenerate,join_reducible,bound_ndeg,bound_njred";
pub const SAMPLED_CSV_HEADER: &str =
    "d,n,samples,seed,degenerate,join_reducible,degenerate_share,degenerate_half_width,join_reducible_share,join_reducible_half_width";

impl CensusRow {
    pub fn csv_header(&self) -> &'static str {
        match self.mode {
            CensusMode::Exact => CSV_HEADER,
            CensusMode::Sampled => SAMPLED_CSV_HEADER,
        }
    }

    pub fn to_csv(&self) -> String {
        match (&self.mode, &self.estimates) {
            (CensusMode::Sampled, Some(e)) => format!(
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                self.d,
                self.n,
                self.examined,
                self.seed.unwrap_or_default(),
                self.degenerate,
                self.join_reducible,
                e.degenerate_share,
                e.degenerate_half_width,
                e.join_reducible_share,
                e.join_reducible_half_width
            ),
            _ => format!(
                "{},{},{},{},{},{},{}",
                self.d, self.n, self.total, self.degenerate, self.join_reducible, self.bound_ndeg, self.bound_njred
            ),
        }
    }
}

fn classify_mask(domain: &Arc<Domain>, scheme: &Scheme, cells: &[Tuple], bits: &Bits) -> Result<[u64; 2]> {
    let r = Relation::new(domain.clone(), scheme.clone(), bits.ones().map(|i| cells[i].clone()))?;
    let deg = degenerate(&r)?;
    let jred = r.arity() >= 2 && join_of_projections(&r)? == r;
    Ok([deg as u64, jred as u64])
}

fn census_setup(d: usize, n: usize) -> Result<(Arc<Domain>, Scheme, Vec<Tuple>)> {
    if n == 0 {
        return Err(Error::refused("arity", "a census needs n >= 1"));
    }
    let domain = Domain::letters(d)?;
    caps::current().check_power(d, n)?;
    Ok((domain, Scheme::numbered(n), all_tuples(d, n).collect()))
}

/// Exact census of all `2^(d^n)` relations.
pub fn census(d: usize, n: usize, exec: Exec) -> Result<CensusRow> {
    let cap = caps::current().census_cells;
    let cells_n = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if cells_n > cap as u128 {
        return Err(Error::CapExceeded { what: "exact census cells d^n", value: cells_n, cap: cap as u128 });
    }
    let (domain, scheme, cells) = census_setup(d, n)?;
    let total_masks = 1u64 << cells.len();
    let failure = std::sync::Mutex::new(None);
    let counts = par::sum_range(exec, total_masks, |mask| {
        let mut bits = Bits::new(cells.len());
        for i in 0..cells.len() {
            if mask >> i & 1 == 1 {
                bits.set(i);
            }
        }
        classify_mask(&domain, &scheme, &cells, &bits).unwrap_or_else(|e| {
            *failure.lock().unwrap() = Some(e);
            [0, 0]
        })
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let row = CensusRow {
        d,
        n,
        mode: CensusMode::Exact,
        total: big_pow2(cells.len() as u64),
        examined: total_masks,
        degenerate: counts[0],
        join_reducible: counts[1],
        bound_ndeg: bound_ndeg(d, n),
        bound_njred: bound_njred(d, n),
        seed: None,
        estimates: None,
    };
    check_bounds(&row)?;
    Ok(row)
}

fn check_bounds(row: &CensusRow) -> Result<()> {
    let deg = BigUint::from(row.degenerate);
    let jred = BigUint::from(row.join_reducible);
    if deg > row.bound_ndeg || jred > row.bound_njred || row.degenerate > row.join_reducible {
        return Err(Error::Verification(format!("census counts violate the bounds: {}", row.to_csv())));
    }
    Ok(())
}

pub const DEFAULT_SEED: u64 = 0x5eed;

/// Census over `samples` relations drawn uniformly (each tuple present with
/// probability 1/2). Sample `i` uses stream `i` of the seeded generator, so
/// results do not depend on the thread count.
pub fn census_sampled(d: usize, n: usize, samples: u64, seed: u64, exec: Exec) -> Result<CensusRow> {
    let cap = caps::current().sample_cells;
    let cells_n = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if cells_n > cap as u128 {
        return Err(Error::CapExceeded { what: "sampled census cells d^n", value: cells_n, cap: cap as u128 });
    }
    if samples == 0 {
        return Err(Error::EmptyInput("sample"));
    }
    let (domain, scheme, cells) = census_setup(d, n)?;
    let failure = std::sync::Mutex::new(None);
    let counts = par::sum_range(exec, samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let mut bits = Bits::new(cells.len());
        for c in 0..cells.len() {
            if rng.gen::<bool>() {
                bits.set(c);
            }
        }
        classify_mask(&domain, &scheme, &cells, &bits).unwrap_or_else(|e| {
            *failure.lock().unwrap() = Some(e);
            [0, 0]
        })
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let share = |k: u64| {
        let p = k as f64 / samples as f64;
        (p, 1.96 * (p * (1.0 - p) / samples as f64).sqrt())
    };
    let (ds, dh) = share(counts[0]);
    let (js, jh) = share(counts[1]);
    Ok(CensusRow {
        d,
        n,
        mode: CensusMode::Sampled,
        total: big_pow2(cells.len() as u64),
        examined: samples,
        degenerate: counts[0],
        join_reducible: counts[1],
        bound_ndeg: bound_ndeg(d, n),
        bound_njred: bound_njred(d, n),
        seed: Some(seed),
        estimates: Some(SampleEstimates {
            degenerate_share: ds,
            degenerate_half_width: dh,
            join_reducible_share: js,
            join_reducible_half_width: jh,
        }),
    })
}

// ---------------------------------------------------------------------------
// Ternary oracles

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub test: String,
    pub outcome: String,
}

impl Evidence {
    pub fn new(test: &str, outcome: impl Into<String>) -> Evidence {
        Evidence { test: test.to_string(), outcome: outcome.into() }
    }
}

/// Bounds for a ternary's ternarity and teridentity ternarity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TernaryOracleReport {
    pub degenerate: bool,
    pub ter: usize,
    pub ter_i3_lower: usize,
    /// `None` when no decomposition with teridentities was found.
    pub ter_i3_upper: Option<usize>,
    pub evidence: Vec<Evidence>,
}

pub fn ternary_oracle_suite(r: &Relation) -> Result<TernaryOracleReport> {
    if r.arity() != 3 {
        return Err(Error::refused("arity", format!("a ternary is required, got arity {}", r.arity())));
    }
    let mut evidence = Vec::new();
    if let Some(p) = is_degenerate(r)? {
        evidence.push(Evidence::new("degenerate", format!("Cartesian over {p}")));
        return Ok(TernaryOracleReport { degenerate: true, ter: 0, ter_i3_lower: 0, ter_i3_upper: Some(0), evidence });
    }
    evidence.push(Evidence::new("degenerate", "no: bond irreducible, ter = 1"));
    let mut lower = 1;
    let mut upper = None;
    if *r == Relation::identity(r.domain().clone(), r.scheme().clone()) {
        evidence.push(Evidence::new("teridentity", "R is the teridentity"));
        upper = Some(1);
    } else if r.len() <= r.domain().size() {
        evidence.push(Evidence::new(
            "hypostatic",
            format!("|R| = {} <= |D|: one teridentity bonded with three binaries", r.len()),
        ));
        upper = Some(1);
    }
    match one_param_ternary_projoin(r) {
        Ok(Some(_)) => {
            evidence.push(Evidence::new("one-parameter projoin", "yes: one teridentity suffices"));
            upper = Some(1);
        }
        Ok(None) => {
            evidence.push(Evidence::new(
                "one-parameter projoin",
                "no: a single teridentity is impossible, and the count is odd, so at least 3",
            ));
            lower = 3;
        }
        Err(Error::Refused(why)) => {
            evidence.push(Evidence::new("one-parameter projoin", format!("not applicable {why}")));
        }
        Err(e) => return Err(e),
    }
    Ok(TernaryOracleReport { degenerate: false, ter: 1, ter_i3_lower: lower, ter_i3_upper: upper, evidence })
}
