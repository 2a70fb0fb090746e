//! Projoin graphs, bonding diagrams, bond explication and merging, bond graphs,
//! and ternarity bounds.

use crate::analysis::{self, Evidence};
use crate::dependencies;
use crate::error::{Error, Result};
use crate::formula::{
    classify, evaluate, fresh_var, normalize, Atom, Environment, FlatFormula, Formula, ReductionCertificate, Var,
};
use crate::reducers;
use crate::relation::{Attr, Relation, Scheme, Tuple};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

fn ser_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ser_atoms<S: serde::Serializer>(atoms: &[Atom], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(atoms.iter().map(|a| a.to_string()))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

// ---------------------------------------------------------------------------
// Projoin graphs

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttributeVertex {
    pub var: Var,
    pub free: bool,
}

/// Bipartite graph of predicate and attribute vertices, one edge per occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProjoinGraph {
    #[serde(serialize_with = "ser_atoms")]
    pub predicates: Vec<Atom>,
    pub attributes: Vec<AttributeVertex>,
    /// `(predicate, attribute)` per argument position.
    pub edges: Vec<(usize, usize)>,
}

impl ProjoinGraph {
    pub fn build(ff: &FlatFormula) -> ProjoinGraph {
        let occ = ff.occurrences();
        let attributes: Vec<AttributeVertex> =
            occ.keys().map(|v| AttributeVertex { var: v.clone(), free: !ff.is_bound(v) }).collect();
        let index: BTreeMap<&Var, usize> = occ.keys().enumerate().map(|(i, v)| (v, i)).collect();
        let edges = ff
            .atoms
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.args.iter().map(move |v| (i, v)))
            .map(|(i, v)| (i, index[v]))
            .collect();
        ProjoinGraph { predicates: ff.atoms.clone(), attributes, edges }
    }

    pub fn of_formula(f: &Formula) -> ProjoinGraph {
        ProjoinGraph::build(&normalize(f))
    }

    pub fn degree(&self, attribute: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == attribute).count()
    }

    /// Degree, plus one for the stem of a free attribute.
    pub fn valency(&self, attribute: usize) -> usize {
        self.degree(attribute) + self.attributes[attribute].free as usize
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph projoin {\n  edge [dir=none];\n");
        for (i, a) in self.predicates.iter().enumerate() {
            writeln!(out, "  p{i} [shape=box, label={}];", quote(&a.symbol)).unwrap();
        }
        for (i, v) in self.attributes.iter().enumerate() {
            let style = if v.free { "shape=circle" } else { "shape=circle, style=filled, fillcolor=gray" };
            writeln!(out, "  a{i} [{style}, label={}];", quote(v.var.name())).unwrap();
            if v.free {
                writeln!(out, "  s{i} [shape=point, style=invis];\n  a{i} -> s{i};").unwrap();
            }
        }
        for (p, a) in &self.edges {
            writeln!(out, "  p{p} -> a{a};").unwrap();
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// Bonding diagrams

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Node {
    Predicate(usize),
    Branch(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiagramEdge {
    pub label: Var,
    pub ends: (Node, Node),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchPoint {
    pub label: Var,
    pub free: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LooseEnd {
    pub label: Var,
    pub at: Node,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeadEnd {
    pub label: Var,
    pub predicate: usize,
}

/// The projoin graph with bivalent attribute vertices turned into edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BondingDiagram {
    #[serde(serialize_with = "ser_atoms")]
    pub predicates: Vec<Atom>,
    pub branch_points: Vec<BranchPoint>,
    pub edges: Vec<DiagramEdge>,
    pub loose_ends: Vec<LooseEnd>,
    pub dead_ends: Vec<DeadEnd>,
}

impl BondingDiagram {
    pub fn from_graph(g: &ProjoinGraph) -> BondingDiagram {
        let mut d = BondingDiagram {
            predicates: g.predicates.clone(),
            branch_points: Vec::new(),
            edges: Vec::new(),
            loose_ends: Vec::new(),
            dead_ends: Vec::new(),
        };
        for (i, v) in g.attributes.iter().enumerate() {
            let preds: Vec<usize> = g.edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
            let label = v.var.clone();
            match (v.free, preds.len()) {
                (false, 2) => {
                    d.edges.push(DiagramEdge { label, ends: (Node::Predicate(preds[0]), Node::Predicate(preds[1])) })
                }
                (true, 1) => d.loose_ends.push(LooseEnd { label, at: Node::Predicate(preds[0]) }),
                (false, 1) => d.dead_ends.push(DeadEnd { label, predicate: preds[0] }),
                (_, 0) => {}
                (free, _) => {
                    let b = Node::Branch(d.branch_points.len());
                    d.branch_points.push(BranchPoint { label: label.clone(), free });
                    for &p in &preds {
                        d.edges.push(DiagramEdge { label: label.clone(), ends: (Node::Predicate(p), b) });
                    }
                    if free {
                        d.loose_ends.push(LooseEnd { label, at: b });
                    }
                }
            }
        }
        d
    }

    pub fn of_formula(f: &Formula) -> BondingDiagram {
        BondingDiagram::from_graph(&ProjoinGraph::of_formula(f))
    }

    /// No branch points and no dead ends.
    pub fn is_bond_diagram(&self) -> bool {
        self.branch_points.is_empty() && self.dead_ends.is_empty()
    }

    fn node_id(n: Node) -> String {
        match n {
            Node::Predicate(i) => format!("p{i}"),
            Node::Branch(i) => format!("b{i}"),
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph bonding {\n  edge [dir=none];\n");
        for (i, a) in self.predicates.iter().enumerate() {
            writeln!(out, "  p{i} [shape=box, label={}];", quote(&a.symbol)).unwrap();
        }
        for (i, b) in self.branch_points.iter().enumerate() {
            writeln!(out, "  b{i} [shape=point, width=0.1, xlabel={}];", quote(b.label.name())).unwrap();
        }
        for (i, e) in self.dead_ends.iter().enumerate() {
            writeln!(out, "  d{i} [shape=circle, width=0.1, label=\"\"];").unwrap();
            writeln!(out, "  p{} -> d{i} [label={}];", e.predicate, quote(e.label.name())).unwrap();
        }
        for e in &self.edges {
            writeln!(
                out,
                "  {} -> {} [label={}];",
                Self::node_id(e.ends.0),
                Self::node_id(e.ends.1),
                quote(e.label.name())
            )
            .unwrap();
        }
        for (i, l) in self.loose_ends.iter().enumerate() {
            writeln!(out, "  l{i} [shape=point, style=invis];").unwrap();
            writeln!(out, "  {} -> l{i} [label={}];", Self::node_id(l.at), quote(l.label.name())).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// Bond graphs

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum GraphVertex {
    Predicate,
    Branch,
    Pendant,
}

/// Plain multigraph: the diagram with a pendant vertex at every loose end and dead end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BondGraph {
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BondStats {
    pub v: usize,
    pub e: usize,
    /// Cyclomatic number `E - V + K`.
    pub c: usize,
    pub k: usize,
    pub i: usize,
    pub ii: usize,
    pub iii: usize,
    /// Vertices of degree above 3.
    pub higher: usize,
    pub isolated: usize,
    pub listing: bool,
    pub handshake: bool,
    /// `III - I = 2(C - K)`; only defined for subcubic graphs without isolated vertices.
    pub iii_minus_i: Option<bool>,
}

impl BondGraph {
    pub fn from_diagram(d: &BondingDiagram) -> BondGraph {
        let p = d.predicates.len();
        let mut vertices = vec![GraphVertex::Predicate; p];
        vertices.extend(std::iter::repeat_n(GraphVertex::Branch, d.branch_points.len()));
        let id = |n: Node| match n {
            Node::Predicate(i) => i,
            Node::Branch(i) => p + i,
        };
        let mut edges: Vec<(usize, usize)> = d.edges.iter().map(|e| (id(e.ends.0), id(e.ends.1))).collect();
        for l in &d.loose_ends {
            vertices.push(GraphVertex::Pendant);
            edges.push((id(l.at), vertices.len() - 1));
        }
        for e in &d.dead_ends {
            vertices.push(GraphVertex::Pendant);
            edges.push((e.predicate, vertices.len() - 1));
        }
        BondGraph { vertices, edges }
    }

    pub fn of_formula(f: &Formula) -> BondGraph {
        BondGraph::from_diagram(&BondingDiagram::of_formula(f))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        let mut k = self.vertices.len();
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                k -= 1;
            }
        }
        k
    }

    pub fn stats(&self) -> BondStats {
        let deg = self.degrees();
        let v = self.vertices.len();
        let e = self.edges.len();
        let k = self.components();
        let c = e + k - v;
        let count = |n: usize| deg.iter().filter(|&&x| x == n).count();
        let (isolated, i, ii, iii) = (count(0), count(1), count(2), count(3));
        let higher = deg.iter().filter(|&&x| x > 3).count();
        let listing = v as i64 - e as i64 + c as i64 - k as i64 == 0;
        let mut handshake = deg.iter().sum::<usize>() == 2 * e;
        let subcubic = higher == 0 && isolated == 0;
        if subcubic {
            handshake &= i + ii + iii == v && i + 2 * ii + 3 * iii == 2 * e;
        }
        let iii_minus_i = subcubic.then(|| iii as i64 - i as i64 == 2 * (c as i64 - k as i64));
        BondStats { v, e, c, k, i, ii, iii, higher, isolated, listing, handshake, iii_minus_i }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph bond {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let shape = match v {
                GraphVertex::Predicate => "circle",
                GraphVertex::Branch => "point",
                GraphVertex::Pendant => "point",
            };
            writeln!(out, "  n{i} [shape={shape}, label=\"\"];").unwrap();
        }
        for (a, b) in &self.edges {
            writeln!(out, "  n{a} -- n{b};").unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Bond graph statistics of a formula's bonding diagram.
pub fn bond_graph_stats(f: &Formula) -> BondStats {
    BondGraph::of_formula(f).stats()
}

// ---------------------------------------------------------------------------
// Explication

/// One argument position of a factor with absorbed dead ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Slot {
    Keep,
    /// Projected out; positions with the same index must hold equal values.
    Absorb(usize),
}

/// `symbol(kept) := ∃absorbed source(...)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProjectedFactor {
    pub symbol: String,
    pub source: String,
    pub slots: Vec<Slot>,
}

impl ProjectedFactor {
    pub fn compute(&self, source: &Relation) -> Result<Relation> {
        if source.arity() != self.slots.len() {
            return Err(Error::ArityMismatch {
                symbol: self.source.clone(),
                expected: self.slots.len(),
                found: source.arity(),
            });
        }
        let kept = self.slots.iter().filter(|s| **s == Slot::Keep).count();
        let mut rows = BTreeSet::new();
        'rows: for t in source.tuples() {
            let mut seen: BTreeMap<usize, u8> = BTreeMap::new();
            let mut row: Tuple = Vec::with_capacity(kept);
            for (&s, &e) in self.slots.iter().zip(t) {
                match s {
                    Slot::Keep => row.push(e),
                    Slot::Absorb(k) => {
                        if *seen.entry(k).or_insert(e) != e {
                            continue 'rows;
                        }
                    }
                }
            }
            rows.insert(row);
        }
        Relation::new(source.domain().clone(), Scheme::numbered(kept), rows)
    }
}

/// A bond formula together with the definitions of the factors it adds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Explication {
    #[serde(serialize_with = "ser_display")]
    pub formula: Formula,
    pub teridentity: String,
    pub teridentities: usize,
    pub projected: Vec<ProjectedFactor>,
}

impl Explication {
    /// `env` extended by the projected factors and the teridentity, restricted
    /// to the symbols of the explicated formula.
    pub fn extend(&self, env: &Environment) -> Result<Environment> {
        let mut out = env.clone();
        for p in &self.projected {
            let r = p.compute(env.get(&p.source)?)?;
            out.insert(p.symbol.clone(), r)?;
        }
        if self.teridentities > 0 {
            match env.get(&self.teridentity) {
                Ok(r) if is_identity(r, 3) => {}
                Ok(_) => {
                    return Err(Error::SchemeMismatch(format!(
                        "`{}` is bound to a relation other than the teridentity",
                        self.teridentity
                    )))
                }
                Err(_) => {
                    out.insert(self.teridentity.clone(), Relation::identity(env.domain().clone(), Scheme::numbered(3)))?
                }
            }
        }
        Ok(out.restricted_to(&self.formula))
    }
}

/// Whether `r` is the identity relation of the given arity.
pub fn is_identity(r: &Relation, arity: usize) -> bool {
    r.arity() == arity && r.len() == r.domain().size() && r.tuples().iter().all(|t| t.windows(2).all(|w| w[0] == w[1]))
}

fn fresh_symbol_in(taken: &BTreeSet<String>, base: &str) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..).map(|i| format!("{base}{i}")).find(|s| !taken.contains(s)).unwrap()
}

fn symbols_of(ff: &FlatFormula) -> BTreeSet<String> {
    ff.atoms.iter().map(|a| a.symbol.clone()).collect()
}

/// Teridentity chain `I3(l0,l1,c1) & I3(c1,l2,c2) & ... & I3(c,l_{m-2},l_{m-1})`
/// over `list` (at least three variables); returns atoms and the new link variables.
fn teridentity_chain(symbol: &str, list: &[Var], fresh: &mut impl FnMut() -> Var) -> (Vec<Atom>, Vec<Var>) {
    let m = list.len();
    let links: Vec<Var> = (0..m - 3).map(|_| fresh()).collect();
    let atom = |args: [&Var; 3]| Atom { symbol: symbol.to_string(), args: args.into_iter().cloned().collect() };
    if m == 3 {
        return (vec![atom([&list[0], &list[1], &list[2]])], links);
    }
    let mut atoms = vec![atom([&list[0], &list[1], &links[0]])];
    for i in 1..m - 3 {
        atoms.push(atom([&links[i - 1], &list[i + 1], &links[i]]));
    }
    atoms.push(atom([&links[m - 4], &list[m - 2], &list[m - 1]]));
    (atoms, links)
}

/// Rewrites a normalized projoin as a bond: bound variables confined to one
/// atom are projected into a `Sym~` factor, and every variable shared beyond a
/// plain edge is relayed through a chain of teridentities named `teridentity`.
/// Symbols in `taken` are not reused for the projected factors.
pub fn explicate_flat(ff: &FlatFormula, taken: &BTreeSet<String>, teridentity: &str) -> Explication {
    let counts = ff.atom_counts();
    let absorbed: BTreeSet<&Var> = ff.bound.iter().filter(|v| counts.get(*v).copied().unwrap_or(0) == 1).collect();

    let mut taken: BTreeSet<String> = taken.iter().cloned().chain(symbols_of(ff)).collect();
    taken.insert(teridentity.to_string());
    let mut projected: Vec<ProjectedFactor> = Vec::new();
    let mut atoms: Vec<Atom> = Vec::new();
    for a in &ff.atoms {
        if !a.args.iter().any(|v| absorbed.contains(v)) {
            atoms.push(a.clone());
            continue;
        }
        let mut ids: Vec<&Var> = Vec::new();
        let slots: Vec<Slot> = a
            .args
            .iter()
            .map(|v| {
                if !absorbed.contains(v) {
                    return Slot::Keep;
                }
                let k = ids.iter().position(|w| *w == v).unwrap_or_else(|| {
                    ids.push(v);
                    ids.len() - 1
                });
                Slot::Absorb(k)
            })
            .collect();
        let symbol = match projected.iter().find(|p| p.source == a.symbol && p.slots == slots) {
            Some(p) => p.symbol.clone(),
            None => {
                let s = fresh_symbol_in(&taken, &format!("{}~", a.symbol));
                taken.insert(s.clone());
                projected.push(ProjectedFactor { symbol: s.clone(), source: a.symbol.clone(), slots: slots.clone() });
                s
            }
        };
        let args = a.args.iter().zip(&slots).filter(|(_, s)| **s == Slot::Keep).map(|(v, _)| v.clone()).collect();
        atoms.push(Atom { symbol, args });
    }

    let mut used: BTreeSet<Var> = ff.atoms.iter().flat_map(|a| a.args.iter().cloned()).collect();
    used.extend(ff.bound.iter().cloned());
    let mut bound: Vec<Var> = ff.bound.iter().filter(|v| !absorbed.contains(v)).cloned().collect();
    let flat = FlatFormula { bound: bound.clone(), atoms: atoms.clone() };
    let mut chains: Vec<Atom> = Vec::new();
    for (v, occ) in flat.occurrences() {
        let free = !ff.is_bound(&v);
        let needed = if free { 2 } else { 3 };
        if occ.len() < needed {
            continue;
        }
        let mut fresh = || {
            let y = fresh_var(v.name(), |c| used.contains(c));
            used.insert(y.clone());
            y
        };
        let ys: Vec<Var> = occ.iter().map(|_| fresh()).collect();
        for (&(a, p), y) in occ.iter().zip(&ys) {
            atoms[a].args[p] = y.clone();
        }
        let list: Vec<Var> = if free {
            std::iter::once(ys[0].clone()).chain(std::iter::once(v.clone())).chain(ys[1..].iter().cloned()).collect()
        } else {
            bound.retain(|b| b != &v);
            ys.clone()
        };
        let (chain, links) = teridentity_chain(teridentity, &list, &mut fresh);
        bound.extend(ys);
        bound.extend(links);
        chains.extend(chain);
    }
    let teridentities = chains.len();
    chains.extend(atoms);
    Explication {
        formula: FlatFormula { bound, atoms: chains }.to_formula(),
        teridentity: teridentity.to_string(),
        teridentities,
        projected,
    }
}

/// The symbol to use for the teridentity: an existing `I3` bound to the
/// teridentity, otherwise a fresh name.
fn teridentity_symbol(env: &Environment, taken: &BTreeSet<String>) -> String {
    match env.get("I3") {
        Ok(r) if is_identity(r, 3) => "I3".to_string(),
        _ => {
            let all: BTreeSet<String> = taken.iter().cloned().chain(env.symbols().cloned()).collect();
            fresh_symbol_in(&all, "I3")
        }
    }
}

/// Explicates `f` and extends `env` with the factors it introduces.
pub fn explicate(f: &Formula, env: &Environment) -> Result<(Explication, Environment)> {
    let ff = normalize(f);
    let mut taken: BTreeSet<String> = env.symbols().cloned().collect();
    let ter = teridentity_symbol(env, &symbols_of(&ff));
    taken.remove(&ter);
    let ex = explicate_flat(&ff, &taken, &ter);
    let env = ex.extend(env)?;
    Ok((ex, env))
}

pub fn explicate_certificate(c: &ReductionCertificate) -> Result<ReductionCertificate> {
    let (ex, env) = explicate(&c.formula, &c.env)?;
    ReductionCertificate::new(c.target.clone(), ex.formula, env, c.varmap.clone())
}

/// Removes the teridentities of a bond: the variables of each connected group
/// of teridentity atoms become one variable. A group holding several free
/// variables keeps their equalities as binary identities.
pub fn de_explicate(f: &Formula, env: &Environment) -> Result<(Formula, Environment)> {
    let ff = normalize(f);
    let mut is_ter = Vec::with_capacity(ff.atoms.len());
    for a in &ff.atoms {
        is_ter.push(a.args.len() == 3 && is_identity(env.get(&a.symbol)?, 3));
    }
    let vars: Vec<Var> = ff.occurrences().into_keys().collect();
    let index: BTreeMap<&Var, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, _) in ff.atoms.iter().zip(&is_ter).filter(|(_, t)| **t) {
        for w in a.args.windows(2) {
            let (x, y) = (find(&mut parent, index[&w[0]]), find(&mut parent, index[&w[1]]));
            parent[x] = y;
        }
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..vars.len() {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(i);
    }
    let mut rep: Vec<Var> = vars.clone();
    let mut equalities: Vec<(Var, Var)> = Vec::new();
    for members in classes.values() {
        let free: Vec<&Var> = members.iter().map(|&i| &vars[i]).filter(|v| !ff.is_bound(v)).collect();
        let chosen = free.first().copied().unwrap_or(&vars[members[0]]).clone();
        for other in free.iter().skip(1) {
            equalities.push((chosen.clone(), (*other).clone()));
        }
        for &i in members {
            rep[i] = chosen.clone();
        }
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let kept: BTreeSet<&Var> = ff
        .atoms
        .iter()
        .zip(&is_ter)
        .filter(|(_, t)| !**t)
        .flat_map(|(a, _)| a.args.iter().map(|v| &rep[index[v]]))
        .collect();
    // a free variable left only in teridentities stays free as I2(x,x)
    for members in classes.values() {
        let r = &rep[members[0]];
        if !ff.is_bound(r) && !kept.contains(r) && !equalities.iter().any(|(x, _)| x == r) {
            equalities.push((r.clone(), r.clone()));
        }
    }
    let mut out_env = env.restricted_to(f);
    if !equalities.is_empty() {
        let taken: BTreeSet<String> = env.symbols().cloned().chain(symbols_of(&ff)).collect();
        let i2 = match env.get("I2") {
            Ok(r) if is_identity(r, 2) => "I2".to_string(),
            _ => fresh_symbol_in(&taken, "I2"),
        };
        out_env.insert(i2.clone(), Relation::identity(env.domain().clone(), Scheme::numbered(2)))?;
        for (x, y) in equalities {
            atoms.push(Atom { symbol: i2.clone(), args: vec![x, y] });
        }
    }
    for (a, _) in ff.atoms.iter().zip(&is_ter).filter(|(_, t)| !**t) {
        atoms.push(Atom { symbol: a.symbol.clone(), args: a.args.iter().map(|v| rep[index[v]].clone()).collect() });
    }
    let occurring: BTreeSet<&Var> = atoms.iter().flat_map(|a| a.args.iter()).collect();
    let mut bound: Vec<Var> = Vec::new();
    for v in &ff.bound {
        let r = &rep[index[v]];
        if ff.is_bound(r) && occurring.contains(r) && !bound.contains(r) {
            bound.push(r.clone());
        }
    }
    let formula = FlatFormula { bound, atoms }.to_formula();
    let out_env = out_env.restricted_to(&formula);
    Ok((formula, out_env))
}

pub fn de_explicate_certificate(c: &ReductionCertificate) -> Result<ReductionCertificate> {
    let (f, env) = de_explicate(&c.formula, &c.env)?;
    ReductionCertificate::new(c.target.clone(), f, env, c.varmap.clone())
}

// ---------------------------------------------------------------------------
// Proter+ count

/// `Σ ter(R_i) + Σ (m_j - 1) + Σ max(n_k - 2, 0)` after absorbing dead ends,
/// counting occurrences. `None` when a factor still has arity above 3.
pub fn proter_count(ff: &FlatFormula) -> Option<usize> {
    let counts = ff.atom_counts();
    let single: BTreeSet<&Var> = ff.bound.iter().filter(|v| counts.get(*v).copied().unwrap_or(0) == 1).collect();
    let mut total = 0;
    for a in &ff.atoms {
        match a.args.iter().filter(|v| !single.contains(v)).count() {
            0..=2 => {}
            3 => total += 1,
            _ => return None,
        }
    }
    for (v, occ) in ff.occurrences() {
        if single.contains(&v) {
            continue;
        }
        total += if ff.is_bound(&v) { occ.len().saturating_sub(2) } else { occ.len() - 1 };
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// Merging

#[derive(Clone, Debug, Serialize)]
pub struct MergeReport {
    #[serde(skip)]
    pub certificate: ReductionCertificate,
    pub formula: String,
    pub merges: usize,
    pub ternaries_before: usize,
    pub ternaries_after: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Repeatedly replaces two factors sharing bound variables by their relative
/// product whenever the result stays subternaric and no ternary is added:
/// multiedges first, then unaries, then binaries. Closed true results are dropped.
pub fn merge_complete(c: &ReductionCertificate) -> Result<MergeReport> {
    let class = c.classify();
    if !class.bond || class.max_arity > 3 {
        return Err(Error::refused(
            "not-subternaric-bond",
            format!(
                "merging needs a bond of factors with arity <= 3, got a {} with max arity {}",
                class.kind, class.max_arity
            ),
        ));
    }
    let mut ff = normalize(&c.formula);
    let mut env = c.env.restricted_to(&c.formula);
    let before = class.ternaries;
    let mut merges = 0;
    loop {
        let mut best: Option<((u8, usize, usize), Vec<Var>)> = None;
        for i in 0..ff.atoms.len() {
            for j in i + 1..ff.atoms.len() {
                let (a, b) = (&ff.atoms[i], &ff.atoms[j]);
                let shared: Vec<Var> =
                    a.args.iter().filter(|v| ff.is_bound(v) && b.args.contains(v)).cloned().collect();
                if shared.is_empty() {
                    continue;
                }
                let arity = a.args.len() + b.args.len() - 2 * shared.len();
                let ternaries = (a.args.len() == 3) as usize + (b.args.len() == 3) as usize;
                if arity > 3 || (arity == 3) as usize > ternaries {
                    continue;
                }
                let prio = if shared.len() >= 2 {
                    0
                } else if a.args.len().min(b.args.len()) == 1 {
                    1
                } else if a.args.len() == 2 && b.args.len() == 2 {
                    2
                } else {
                    3
                };
                let key = (prio, i, j);
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, shared));
                }
            }
        }
        let Some(((_, i, j), shared)) = best else { break };
        let (a, b) = (ff.atoms[i].clone(), ff.atoms[j].clone());
        let keep: Vec<Var> = a.args.iter().chain(&b.args).filter(|v| !shared.contains(v)).cloned().collect();
        let pair = Formula::exists(shared.clone(), Formula::conj(vec![Formula::Atom(a), Formula::Atom(b)]));
        let value = evaluate(&pair, &env, &keep)?;
        let rename: BTreeMap<Attr, Attr> =
            keep.iter().enumerate().map(|(k, v)| (v.clone(), Attr::new((k + 1).to_string()))).collect();
        let value = value.rename(&rename)?;
        ff.atoms.remove(j);
        ff.bound.retain(|v| !shared.contains(v));
        if keep.is_empty() && !value.is_empty() {
            ff.atoms.remove(i);
        } else {
            let symbol = env.fresh_symbol("M");
            env.insert(symbol.clone(), value)?;
            ff.atoms[i] = Atom { symbol, args: keep };
        }
        merges += 1;
    }
    let formula = ff.to_formula();
    let env = env.restricted_to(&formula);
    let certificate = ReductionCertificate::new(c.target.clone(), formula, env, c.varmap.clone())?;
    let after = certificate.classify().ternaries;
    let n = c.target.arity();
    let note = (n >= 2 && c.target.len() <= c.target.domain().size() && after > n - 2).then(|| {
        format!(
            "not minimal: {after} ternaries, but |R| <= |D| and hypostatic abstraction with one parameter needs only {}",
            n - 2
        )
    });
    Ok(MergeReport {
        formula: certificate.formula.to_string(),
        certificate,
        merges,
        ternaries_before: before,
        ternaries_after: after,
        note,
    })
}

// ---------------------------------------------------------------------------
// Ternarity

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn of(n: usize) -> Parity {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Bounds `lower <= ter(R) <= upper`; `upper` is `None` when no subternaric
/// bond reduction was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TernarityReport {
    pub arity: usize,
    pub lower: usize,
    pub upper: Option<usize>,
    /// Parity of the ternarity, known when `R` has no unary Cartesian factor.
    pub parity: Option<Parity>,
    pub evidence: Vec<Evidence>,
}

impl TernarityReport {
    pub fn exact(&self) -> Option<usize> {
        (self.upper == Some(self.lower)).then_some(self.lower)
    }
}

/// Ternary count of a certificate after explication and merging, if subternaric.
pub fn subternaric_count(c: &ReductionCertificate) -> Result<Option<usize>> {
    let ex = explicate_certificate(c)?;
    let class = ex.classify();
    if class.max_arity > 3 {
        return Ok(None);
    }
    Ok(Some(merge_complete(&ex)?.ternaries_after))
}

/// Ternarity bounds from degeneracy, arity, parity and the Herzberger test,
/// against reductions built here (one-parameter hypostatic abstraction, a
/// 2-key join, two-parameter hypostatic abstraction) and those supplied.
pub fn ternarity_bounds(r: &Relation, certs: &[ReductionCertificate]) -> Result<TernarityReport> {
    let n = r.arity();
    let mut evidence = Vec::new();
    if n <= 2 {
        evidence.push(Evidence::new("arity", format!("arity {n} <= 2, no ternaries needed")));
        return Ok(TernarityReport { arity: n, lower: 0, upper: Some(0), parity: None, evidence });
    }
    let partition = analysis::finest_partition(r)?;
    let unary_factor = partition.blocks.iter().any(|b| b.len() == 1);
    let parity = (!unary_factor).then(|| Parity::of(n));
    let mut lower;
    let mut upper: Option<usize> = None;
    let offer =
        |upper: &mut Option<usize>, what: String, count: Option<usize>, evidence: &mut Vec<Evidence>| match count {
            Some(k) => {
                evidence.push(Evidence::new(&what, format!("{k} ternaries")));
                *upper = Some(upper.map_or(k, |u| u.min(k)));
            }
            None => evidence.push(Evidence::new(&what, "not subternaric")),
        };
    if partition.blocks.len() > 1 {
        evidence.push(Evidence::new("degenerate", format!("Cartesian over {partition}")));
        lower = 0;
        let mut sum = Some(0);
        for b in &partition.blocks {
            let sub = ternarity_bounds(&r.project(b)?, &[])?;
            lower += sub.lower;
            sum = sum.zip(sub.upper).map(|(s, u)| s + u);
            evidence.push(Evidence::new(&format!("factor {b}"), format!("[{}, {:?}]", sub.lower, sub.upper)));
        }
        if let Some(s) = sum {
            offer(&mut upper, "Cartesian factors".into(), Some(s), &mut evidence);
        }
    } else {
        lower = n - 2;
        evidence.push(Evidence::new("non-degenerate", format!("ter >= n - 2 = {lower}")));
        if n == 3 {
            offer(&mut upper, "itself".into(), Some(1), &mut evidence);
        }
        if n == 4 && lower == 2 {
            let mut all_no = true;
            for other in r.scheme().attrs()[1..].iter() {
                let left = Scheme::new([r.scheme().attrs()[0].clone(), other.clone()]);
                match analysis::rel_prod_reducible2(r, &left) {
                    Ok(Some(c)) => {
                        all_no = false;
                        offer(
                            &mut upper,
                            format!("relative product over {left}"),
                            Some(c.classify().ternaries),
                            &mut evidence,
                        );
                    }
                    Ok(None) => evidence.push(Evidence::new(
                        &format!("relative product over {left}"),
                        "no: not a relative product of two ternaries",
                    )),
                    Err(e) => {
                        all_no = false;
                        evidence
                            .push(Evidence::new(&format!("relative product over {left}"), format!("undecided: {e}")));
                    }
                }
            }
            if all_no {
                lower = 4;
                evidence.push(Evidence::new("two ternaries", "impossible for every pair bipartition, so ter > 2"));
            }
        }
    }
    if let Some(p) = parity {
        if Parity::of(lower) != p {
            lower += 1;
        }
    }
    let done = |upper: &Option<usize>| *upper == Some(lower);
    let d = r.domain().size();
    if !done(&upper) && r.len() <= d {
        let c = reducers::hypostatic_abstraction(r, 1)?;
        offer(&mut upper, "hypostatic abstraction, k = 1".into(), subternaric_count(&c)?, &mut evidence);
    }
    if !done(&upper) {
        if let Some(key) = dependencies::find_keys(r, 2).into_iter().find(|k| k.len() < n) {
            let c = reducers::key_reduction(r, &key)?;
            offer(&mut upper, format!("2-key {key} join"), subternaric_count(&c)?, &mut evidence);
        }
    }
    if !done(&upper) && (r.len() as u128) <= (d as u128).pow(2) {
        let c = reducers::hypostatic_abstraction(r, 2)?;
        offer(&mut upper, "hypostatic abstraction, k = 2".into(), subternaric_count(&c)?, &mut evidence);
    }
    for (i, c) in certs.iter().enumerate() {
        let v = c.check();
        if !v.valid {
            evidence.push(Evidence::new(&format!("certificate {}", i + 1), "invalid, ignored"));
            continue;
        }
        if let Some(p) = proter_count(&normalize(&c.formula)) {
            evidence.push(Evidence::new(&format!("certificate {} Proter+", i + 1), format!("ter <= {p}")));
        }
        offer(&mut upper, format!("certificate {}", i + 1), subternaric_count(c)?, &mut evidence);
    }
    if let (Some(u), Some(p)) = (upper, parity) {
        if Parity::of(u) != p && u > lower {
            upper = Some(u - 1);
        }
    }
    Ok(TernarityReport { arity: n, lower, upper, parity, evidence })
}

/// Classification string of an explicated formula, for reports.
pub fn explicated_kind(f: &Formula, env: &Environment) -> Result<String> {
    let (ex, _) = explicate(f, env)?;
    Ok(classify(&ex.formula).kind.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{evaluate_free, FormulaKind};
    use crate::relation::Domain;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn rel(d: usize, scheme: &str, rows: &[&str]) -> Relation {
        Relation::from_rows(
            Domain::letters(d).unwrap(),
            Scheme::parse_list(scheme),
            rows.iter().map(|r| r.split_whitespace().collect::<Vec<_>>()),
        )
        .unwrap()
    }

    #[test]
    fn projoin_graphs() {
        let a = ProjoinGraph::of_formula(&f("exists t . P(x1) & Q(x1,t) & R(t,x2)"));
        assert_eq!((a.predicates.len(), a.attributes.len(), a.edges.len()), (3, 3, 5));
        let x1 = a.attributes.iter().position(|v| v.var.name() == "x1").unwrap();
        assert_eq!(a.valency(x1), 3);
        let single = ProjoinGraph::of_formula(&f("P(x)"));
        assert_eq!((single.predicates.len(), single.attributes.len(), single.edges.len()), (1, 1, 1));
        let b = ProjoinGraph::of_formula(&f("exists s t . P(x1,s,t) & Q(s,t,x2)"));
        assert_eq!(b.edges.len(), 6);
    }

    #[test]
    fn bonding_diagrams() {
        let a = BondingDiagram::of_formula(&f("exists t . P(x1) & Q(x1,t) & R(t,x2)"));
        assert_eq!(a.branch_points, vec![BranchPoint { label: "x1".into(), free: true }]);
        assert_eq!(a.loose_ends.len(), 2);
        assert_eq!(a.edges.len(), 3);
        let b = BondingDiagram::of_formula(&f("exists s t . P(x1,s,t) & Q(s,t,x2)"));
        let between: Vec<_> = b.edges.iter().filter(|e| e.ends == (Node::Predicate(0), Node::Predicate(1))).collect();
        assert_eq!(between.len(), 2);
        assert!(b.is_bond_diagram());
    }

    #[test]
    fn explication_example() {
        let d = Domain::letters(2).unwrap();
        let env = Environment::new(d.clone())
            .with("P", rel(2, "1,2,3,4", &["a a b a", "b b b a", "a b a a"]))
            .unwrap()
            .with("Q", rel(2, "1,2,3,4", &["b a a a", "a b b a", "b b a b"]))
            .unwrap();
        let src = f("exists t . P(t,x1,x2,t) & (exists s . Q(x2,x3,s,t))");
        let (ex, env2) = explicate(&src, &env).unwrap();
        assert_eq!(
            ex.formula.to_string(),
            "exists t_1 t_2 t_3 x2_1 x2_2 . I3(t_1,t_2,t_3) & I3(x2_1,x2,x2_2) & P(t_1,x1,x2_1,t_2) & Q~(x2_2,x3,t_3)"
        );
        assert_eq!(ex.teridentities, 2);
        assert_eq!(classify(&ex.formula).kind, FormulaKind::Bond);
        assert_eq!(evaluate_free(&ex.formula, &env2).unwrap(), evaluate_free(&src, &env).unwrap());
    }

    #[test]
    fn explicating_a_hypostatic_ternary() {
        let gives = rel(3, "1,2,3", &["a b c", "b c a", "c a b"]);
        let c = reducers::hypostatic_abstraction(&gives, 1).unwrap();
        let e = explicate_certificate(&c).unwrap();
        let class = e.classify();
        assert_eq!(class.kind, FormulaKind::Bond);
        assert_eq!(class.factor_arities.iter().filter(|&&a| a == 2).count(), 3);
        assert_eq!(class.ternaries, 1);
        let bond = f("exists t . P(x,t) & Q(t,y)");
        let env = Environment::new(Domain::letters(2).unwrap())
            .with("P", rel(2, "1,2", &["a b"]))
            .unwrap()
            .with("Q", rel(2, "1,2", &["b a"]))
            .unwrap();
        assert_eq!(explicate(&bond, &env).unwrap().0.formula, bond);
    }

    #[test]
    fn de_explication() {
        let d = Domain::letters(2).unwrap();
        let chain = reducers::identity_chain(&d, 4).unwrap();
        let back = de_explicate_certificate(&chain).unwrap();
        assert!(back.formula.is_quantifier_free());
        assert_eq!(back.formula.to_string(), "I2(x1,x2) & I2(x1,x3) & I2(x1,x4)");
        let bond = f("exists t . P(x,t) & Q(t,y)");
        let env =
            Environment::new(d).with("P", rel(2, "1,2", &["a b"])).unwrap().with("Q", rel(2, "1,2", &["b a"])).unwrap();
        assert_eq!(de_explicate(&bond, &env).unwrap().0, bond);
    }

    #[test]
    fn bond_graph_laws() {
        let d = Domain::letters(2).unwrap();
        let chain = reducers::identity_chain(&d, 4).unwrap();
        let s = bond_graph_stats(&chain.formula);
        assert_eq!((s.i, s.iii, s.c, s.k), (4, 2, 0, 1));
        assert_eq!(s.iii_minus_i, Some(true));
        let square = f("exists a b c e . I3(x1,a,e) & I3(x2,a,b) & I3(x3,b,c) & I3(x4,c,e)");
        let s = bond_graph_stats(&square);
        assert_eq!((s.i, s.iii, s.c, s.k), (4, 4, 1, 1));
        assert!(s.listing && s.handshake && s.iii_minus_i == Some(true));
        let s = bond_graph_stats(&f("B(x,y)"));
        assert_eq!((s.i, s.iii), (2, 0));
    }

    #[test]
    fn merging() {
        let d = Domain::letters(2).unwrap();
        let i4 = Relation::identity(d.clone(), Scheme::numbered(4));
        let square = f("exists a b c e . I3(x1,a,e) & I3(x2,a,b) & I3(x3,b,c) & I3(x4,c,e)");
        let env = Environment::new(d.clone()).with("I3", Relation::identity(d.clone(), Scheme::numbered(3))).unwrap();
        let varmap = (1..=4).map(|i| (Attr::new(format!("x{i}")), Attr::new(i.to_string()))).collect();
        let c = ReductionCertificate::new(i4, square, env, varmap).unwrap();
        let m = merge_complete(&c).unwrap();
        assert_eq!((m.merges, m.ternaries_after), (0, 4));
        assert!(m.note.as_deref().unwrap().contains("only 2"));

        let u = Relation::universal(d.clone(), Scheme::numbered(2)).unwrap();
        let t = rel(2, "1,2,3", &["a a b", "b b a", "a b a"]);
        let env = Environment::new(d.clone()).with("P", t.clone()).unwrap().with("Q", t).unwrap();
        let multi = f("exists s t . P(x1,s,t) & Q(s,t,x2)");
        let target = evaluate_free(&multi, &env).unwrap();
        let c = ReductionCertificate::identity_mapped(target, multi, env).unwrap();
        let m = merge_complete(&c).unwrap();
        assert_eq!(m.certificate.classify().factor_arities, vec![2]);

        let env = Environment::new(d.clone())
            .with("U", rel(2, "1", &["a"]))
            .unwrap()
            .with("B", u)
            .unwrap()
            .with("T", rel(2, "1,2,3", &["a a b", "b b a"]))
            .unwrap();
        let pendant = f("exists s t . U(s) & B(s,t) & T(t,x1,x2)");
        let target = evaluate_free(&pendant, &env).unwrap();
        let c = ReductionCertificate::identity_mapped(target, pendant, env).unwrap();
        let m = merge_complete(&c).unwrap();
        assert_eq!(m.certificate.classify().factor_arities, vec![2]);
    }

    #[test]
    fn proter() {
        let ff = normalize(&f("exists t . P(t,x1,x2,t) & (exists s . Q(x2,x3,s,t))"));
        assert_eq!(proter_count(&ff), None);
        let ff = normalize(&f("exists t . A(t,x1) & B(t,x2) & C(t,x3) & D(t,x4)"));
        assert_eq!(proter_count(&ff), Some(2));
    }

    #[test]
    fn ternarity() {
        let h = rel(3, "1,2,3,4", &["a b b a", "b a a b", "c b c b", "b c b c"]);
        let rep = ternarity_bounds(&h, &[]).unwrap();
        assert_eq!((rep.lower, rep.upper), (4, Some(4)), "{:?}", rep.evidence);
        assert_eq!(rep.parity, Some(Parity::Even));
        let d = Domain::letters(3).unwrap();
        let i2 = Relation::identity(d.clone(), Scheme::numbered(2));
        assert_eq!(ternarity_bounds(&i2, &[]).unwrap().exact(), Some(0));
        let i5 = Relation::identity(d, Scheme::numbered(5));
        assert_eq!(ternarity_bounds(&i5, &[]).unwrap().exact(), Some(3));
    }

    #[test]
    fn dot_is_deterministic() {
        let g = f("exists t . P(x1) & Q(x1,t) & R(t,x2)");
        let a = BondingDiagram::of_formula(&g).to_dot();
        assert_eq!(a, BondingDiagram::of_formula(&g).to_dot());
        assert!(a.contains("b0 [shape=point"));
        assert_eq!(
            BondingDiagram::of_formula(&Formula::conj(vec![])).to_dot(),
            "digraph bonding {\n  edge [dir=none];\n}\n"
        );
        assert!(BondGraph::of_formula(&g).to_dot().starts_with("graph bond {"));
    }
}
