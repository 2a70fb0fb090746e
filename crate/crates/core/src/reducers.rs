//! Constructive reductions. Each returns a certificate verified by evaluation,
//! or a [`Refusal`] naming the hypothesis that failed.
//!
//! Conventions: the target attribute in canonical position `p` (1-based) is
//! carried by variable `x<p>`; parameters are `t1, t2, ...`. Factors built
//! from scratch have positional attributes `1..m`, parameters first.

use crate::dependencies::{self, Partition};
use crate::error::{Error, Refusal, Result};
use crate::formula::{fresh_var, Atom, Environment, Formula, ReductionCertificate, Var};
use crate::relation::{Attr, Domain, Elem, Relation, Scheme, Tuple};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

fn refuse<T>(refusal: Refusal) -> Result<T> {
    Err(Error::Refused(refusal))
}

/// `x<p>` for each canonical position, and the map back to attributes.
fn position_vars(s: &Scheme) -> (Vec<Var>, BTreeMap<Var, Attr>) {
    let vars: Vec<Var> = (1..=s.len()).map(|p| Attr::new(format!("x{p}"))).collect();
    let map = vars.iter().cloned().zip(s.iter().cloned()).collect();
    (vars, map)
}

fn params(k: usize) -> Vec<Var> {
    (1..=k).map(|i| Attr::new(format!("t{i}"))).collect()
}

/// The `i`-th `k`-tuple over `{0..d}` in colex order (first coordinate fastest).
pub fn colex_label(i: usize, d: usize, k: usize) -> Vec<Elem> {
    let mut rest = i;
    (0..k)
        .map(|_| {
            let e = (rest % d) as Elem;
            rest /= d;
            e
        })
        .collect()
}

fn capacity(d: usize, k: usize) -> u128 {
    (d as u128).checked_pow(k as u32).unwrap_or(u128::MAX)
}

fn atom(symbol: &str, args: &[Var]) -> Formula {
    Formula::Atom(Atom { symbol: symbol.to_string(), args: args.to_vec() })
}

/// Join of `π_{K ∪ {i}} R` over `i ∉ K`, for a key `K`.
pub fn key_reduction(r: &Relation, key: &Scheme) -> Result<ReductionCertificate> {
    if !key.is_subset(r.scheme()) {
        let missing = key.difference(r.scheme());
        return Err(Error::UnknownAttribute { attr: missing.attrs()[0].to_string(), scheme: r.scheme().to_string() });
    }
    if key == r.scheme() {
        return refuse(Refusal::new(
            "key-is-whole-scheme",
            format!("the key {key} is the whole scheme, so the only factor would be R itself"),
        ));
    }
    let rep = dependencies::key_report(r, key)?;
    if !rep.holds {
        return refuse(
            Refusal::new("not-a-key", format!("{key} does not determine the other attributes"))
                .with_witness(rep.witness),
        );
    }
    let (vars, varmap) = position_vars(r.scheme());
    let mut env = Environment::new(r.domain().clone());
    let mut parts = Vec::new();
    for (p, a) in r.scheme().iter().enumerate() {
        if key.contains(a) {
            continue;
        }
        let fs = key.union(&Scheme::new([a.clone()]));
        let sym = format!("R{}", p + 1);
        let args: Vec<Var> = fs.iter().map(|b| vars[r.scheme().position(b).unwrap()].clone()).collect();
        env.insert(sym.clone(), r.project(&fs)?)?;
        parts.push(atom(&sym, &args));
    }
    ReductionCertificate::new(r.clone(), Formula::conj(parts), env, varmap)
}

/// Join of `π_{M ∪ Λ_i} R`, valid exactly when `M ↠ Λ_1 ∪ ... ∪ Λ_m` holds.
pub fn fagin_decompose(r: &Relation, m: &Scheme, blocks: &Partition) -> Result<ReductionCertificate> {
    let rep = dependencies::mvd_holds(r, m, blocks)?;
    if !rep.holds {
        return refuse(
            Refusal::new("mvd-fails", format!("{m} ->> {blocks} is not a multivalued dependency"))
                .with_witness(rep.witness),
        );
    }
    let (vars, varmap) = position_vars(r.scheme());
    let mut env = Environment::new(r.domain().clone());
    let mut parts = Vec::new();
    for (i, b) in blocks.blocks.iter().enumerate() {
        let fs = m.union(b);
        let sym = format!("R{}", i + 1);
        let args: Vec<Var> = fs.iter().map(|a| vars[r.scheme().position(a).unwrap()].clone()).collect();
        env.insert(sym.clone(), r.project(&fs)?)?;
        parts.push(atom(&sym, &args));
    }
    ReductionCertificate::new(r.clone(), Formula::conj(parts), env, varmap)
}

/// The augmented relation: each tuple of `R` prefixed by a distinct colex label in `D^k`.
///
/// The scheme is `t1..tk` followed by the attributes of `R`.
pub fn hypostatic_augmented(r: &Relation, k: usize) -> Result<Relation> {
    let d = r.domain().size();
    if r.len() as u128 > capacity(d, k) {
        return refuse(Refusal::new(
            "cardinality",
            format!("|R| = {} > {} = |D|^{k}, so no {k}-key can be admitted", r.len(), capacity(d, k)),
        ));
    }
    let t = params(k);
    if let Some(clash) = t.iter().find(|v| r.scheme().contains(v)) {
        return Err(Error::SchemeCollision { attr: clash.to_string() });
    }
    let scheme = r.scheme().union(&Scheme::new(t.iter().cloned()));
    let tpos: Vec<usize> = t.iter().map(|v| scheme.position(v).unwrap()).collect();
    let rpos: Vec<usize> = r.scheme().iter().map(|a| scheme.position(a).unwrap()).collect();
    let width = scheme.len();
    let tuples = r.tuples().iter().enumerate().map(|(i, row)| {
        let mut out = vec![0; width];
        for (j, e) in colex_label(i, d, k).into_iter().enumerate() {
            out[tpos[j]] = e;
        }
        for (j, &e) in row.iter().enumerate() {
            out[rpos[j]] = e;
        }
        out
    });
    Relation::new(r.domain().clone(), scheme, tuples)
}

/// `R = ∃t1..tk [R_1(t, x1) ∧ ... ∧ R_n(t, xn)]` whenever `|R| ≤ d^k`.
pub fn hypostatic_abstraction(r: &Relation, k: usize) -> Result<ReductionCertificate> {
    if r.arity() == 0 {
        return refuse(Refusal::new("nullary", "a 0-ary relation has no attributes to abstract"));
    }
    let d = r.domain().size();
    if r.len() as u128 > capacity(d, k) {
        return refuse(Refusal::new(
            "cardinality",
            format!("|R| = {} > {} = |D|^{k}, so no {k}-key can be admitted", r.len(), capacity(d, k)),
        ));
    }
    let (vars, varmap) = position_vars(r.scheme());
    let t = params(k);
    let factor_scheme = Scheme::numbered(k + 1);
    let mut factors: Vec<BTreeSet<Tuple>> = vec![BTreeSet::new(); r.arity()];
    for (i, row) in r.tuples().iter().enumerate() {
        let label = colex_label(i, d, k);
        for (p, &e) in row.iter().enumerate() {
            let mut f = label.clone();
            f.push(e);
            factors[p].insert(f);
        }
    }
    let mut env = Environment::new(r.domain().clone());
    let mut parts = Vec::new();
    for (p, rows) in factors.into_iter().enumerate() {
        let sym = format!("R{}", p + 1);
        env.insert(sym.clone(), Relation::new(r.domain().clone(), factor_scheme.clone(), rows)?)?;
        let mut args = t.clone();
        args.push(vars[p].clone());
        parts.push(atom(&sym, &args));
    }
    ReductionCertificate::new(r.clone(), Formula::exists(t, Formula::conj(parts)), env, varmap)
}

/// Certificate for `¬R` from a join certificate of `R`: the De Morgan disjuncts
/// are indexed by distinct parameter tuples, turning the union into a projoin.
pub fn neg_join_projoin(cert: &ReductionCertificate, k: usize) -> Result<ReductionCertificate> {
    if !cert.formula.is_quantifier_free() {
        return refuse(Refusal::new(
            "not-a-join",
            "the input certificate has quantifiers; a join certificate is required",
        ));
    }
    let target = &cert.target;
    let n = target.arity();
    let d = target.domain().size();
    let atoms: Vec<Atom> = cert.formula.atoms().into_iter().cloned().collect();
    let big_n = atoms.len();
    let l = atoms.iter().map(|a| a.vars().len()).max().unwrap_or(0);
    if big_n as u128 > capacity(d, k) {
        return refuse(Refusal::new("too-many-factors", format!("N = {big_n} > {} = |D|^{k}", capacity(d, k))));
    }
    if k + l > n.saturating_sub(1) {
        return refuse(Refusal::new("arity", format!("k + l = {k} + {l} = {} > {} = n - 1", k + l, n as isize - 1)));
    }
    let used = cert.formula.all_vars();
    let mut t: Vec<Var> = Vec::new();
    for i in 1..=k {
        let name = Attr::new(format!("t{i}"));
        let v = if used.contains(&name) || t.contains(&name) {
            fresh_var(name.name(), |c| used.contains(c) || t.contains(c))
        } else {
            name
        };
        t.push(v);
    }
    let domain = target.domain().clone();
    // each atom as a relation over its distinct variables, and its complement
    let mut negs = Vec::new();
    let mut var_lists = Vec::new();
    for a in &atoms {
        let single = Formula::Atom(a.clone());
        let value = crate::formula::evaluate_free(&single, &cert.env)?;
        var_lists.push(value.scheme().attrs().to_vec());
        negs.push(value.complement()?);
    }
    let mut env = Environment::new(domain.clone());
    let mut parts = Vec::new();
    for i in 0..big_n {
        let vi = &var_lists[i];
        let width = k + vi.len();
        let mut rows = BTreeSet::new();
        for j in 0..big_n {
            let label = colex_label(j, d, k);
            if i == j {
                for y in negs[i].tuples() {
                    let mut row = label.clone();
                    row.extend_from_slice(y);
                    rows.insert(row);
                }
            } else {
                crate::caps::current().check_power(d, vi.len())?;
                for y in crate::relation::all_tuples(d, vi.len()) {
                    let mut row = label.clone();
                    row.extend(y);
                    rows.insert(row);
                }
            }
        }
        let sym = format!("G{}", i + 1);
        env.insert(sym.clone(), Relation::new(domain.clone(), Scheme::numbered(width), rows)?)?;
        let mut args = t.clone();
        args.extend(vi.iter().cloned());
        parts.push(atom(&sym, &args));
    }
    let formula = Formula::exists(t, Formula::conj(parts));
    ReductionCertificate::new(target.complement()?, formula, env, cert.varmap.clone())
}

/// Union of Cartesian products over one common partition, as a projoin with
/// `k` parameters. `products[j][i]` is the `i`-th factor of the `j`-th product.
pub fn union_to_projoin(products: &[Vec<Relation>], k: usize) -> Result<ReductionCertificate> {
    let first = products.first().ok_or(Error::EmptyInput("union of products"))?;
    let domain: Arc<Domain> = first.first().ok_or(Error::EmptyInput("Cartesian product"))?.domain().clone();
    let blocks: Vec<Scheme> = first.iter().map(|f| f.scheme().clone()).collect();
    for p in products {
        let these: Vec<Scheme> = p.iter().map(|f| f.scheme().clone()).collect();
        if these != blocks {
            return Err(Error::SchemeMismatch(format!(
                "every product must use the blocks {:?}, found {:?}",
                blocks, these
            )));
        }
    }
    let d = domain.size();
    if products.len() as u128 > capacity(d, k) {
        return refuse(Refusal::new(
            "too-many-terms",
            format!("{} products > {} = |D|^{k} parameter values", products.len(), capacity(d, k)),
        ));
    }
    let mut target: Option<Relation> = None;
    for p in products {
        let prod = Relation::cartesian(p)?;
        target = Some(match target {
            None => prod,
            Some(acc) => acc.union(&prod)?,
        });
    }
    let target = target.unwrap();
    let (vars, varmap) = position_vars(target.scheme());
    let t = params(k);
    let mut env = Environment::new(domain.clone());
    let mut parts = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        let mut rows = BTreeSet::new();
        for (j, p) in products.iter().enumerate() {
            let label = colex_label(j, d, k);
            for y in p[i].tuples() {
                let mut row = label.clone();
                row.extend_from_slice(y);
                rows.insert(row);
            }
        }
        let sym = format!("F{}", i + 1);
        env.insert(sym.clone(), Relation::new(domain.clone(), Scheme::numbered(k + b.len()), rows)?)?;
        let mut args = t.clone();
        args.extend(b.iter().map(|a| vars[target.scheme().position(a).unwrap()].clone()));
        parts.push(atom(&sym, &args));
    }
    ReductionCertificate::new(target, Formula::exists(t, Formula::conj(parts)), env, varmap)
}

/// `I_n` as a chain of `n - 2` teridentities.
pub fn identity_chain(domain: &Arc<Domain>, n: usize) -> Result<ReductionCertificate> {
    if n < 3 {
        return refuse(Refusal::new("arity", format!("the chain needs n >= 3, got {n}")));
    }
    let target = Relation::identity(domain.clone(), Scheme::numbered(n));
    let (x, varmap) = position_vars(target.scheme());
    let env = Environment::new(domain.clone()).with("I3", Relation::identity(domain.clone(), Scheme::numbered(3)))?;
    let t = params(n - 3);
    let formula = if n == 3 {
        atom("I3", &x)
    } else {
        let mut parts = vec![atom("I3", &[x[0].clone(), x[1].clone(), t[0].clone()])];
        for i in 1..n - 3 {
            parts.push(atom("I3", &[t[i - 1].clone(), x[i + 1].clone(), t[i].clone()]));
        }
        parts.push(atom("I3", &[t[n - 4].clone(), x[n - 2].clone(), x[n - 1].clone()]));
        Formula::exists(t, Formula::conj(parts))
    };
    ReductionCertificate::new(target, formula, env, varmap)
}

/// `D_n` as the join of pairwise diversity binaries `x_i ≠ x_j`, `i < j`.
pub fn pairwise_diversity_join(domain: &Arc<Domain>, n: usize) -> Result<ReductionCertificate> {
    let target = Relation::diversity(domain.clone(), Scheme::numbered(n))?;
    let (x, varmap) = position_vars(target.scheme());
    let env = Environment::new(domain.clone()).with("D2", Relation::diversity(domain.clone(), Scheme::numbered(2))?)?;
    let mut parts = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            parts.push(atom("D2", &[x[i].clone(), x[j].clone()]));
        }
    }
    ReductionCertificate::new(target, Formula::conj(parts), env, varmap)
}
