//! Primitive positive formulas: atoms, conjunction and existential quantification.
//!
//! Text grammar:
//!
//! ```text
//! formula := 'exists' var+ '.' formula | conj
//! conj    := primary ('&' primary)*
//! primary := atom | '(' formula ')' | 'exists' var+ '.' formula | 'true'
//! atom    := SYMBOL '(' [var (',' var)*] ')'
//! ```
//!
//! Variables match `[a-z][a-z0-9_]*`, symbols `[A-Z][A-Za-z0-9_~]*`. The
//! quantified variables may be separated by spaces or commas, and a
//! quantifier extends as far right as possible.

use crate::error::{Error, Result};
use crate::io;
use crate::relation::{Attr, Domain, Elem, Relation, Scheme, Tuple};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Variables are named like attributes; a formula's value has its free variables as scheme.
pub type Var = Attr;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub symbol: String,
    pub args: Vec<Var>,
}

impl Atom {
    pub fn new(symbol: impl Into<String>, args: impl IntoIterator<Item = impl AsRef<str>>) -> Atom {
        Atom { symbol: symbol.into(), args: args.into_iter().map(Attr::new).collect() }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.args.iter().cloned().collect()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.args.iter().map(Attr::name).collect();
        write!(f, "{}({})", self.symbol, args.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Conj(Vec<Formula>),
    Exists(Vec<Var>, Box<Formula>),
}

impl Formula {
    /// Conjunction that collapses a single conjunct to itself.
    pub fn conj(mut parts: Vec<Formula>) -> Formula {
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Conj(parts)
        }
    }

    /// `exists vars . body`, or `body` when `vars` is empty.
    pub fn exists(vars: Vec<Var>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn parse(text: &str) -> Result<Formula> {
        Parser::new(text)?.parse_all()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        match self {
            Formula::Atom(a) => a.vars(),
            Formula::Conj(parts) => parts.iter().flat_map(Formula::free_vars).collect(),
            Formula::Exists(vars, body) => {
                let mut free = body.free_vars();
                for v in vars {
                    free.remove(v);
                }
                free
            }
        }
    }

    /// Every variable name used anywhere, free or bound.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        match self {
            Formula::Atom(a) => a.vars(),
            Formula::Conj(parts) => parts.iter().flat_map(Formula::all_vars).collect(),
            Formula::Exists(vars, body) => {
                let mut all = body.all_vars();
                all.extend(vars.iter().cloned());
                all
            }
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Formula::Atom(a) => vec![a],
            Formula::Conj(parts) => parts.iter().flat_map(Formula::atoms).collect(),
            Formula::Exists(_, body) => body.atoms(),
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Atom(_) => true,
            Formula::Conj(parts) => parts.iter().all(Formula::is_quantifier_free),
            Formula::Exists(..) => false,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Conj(parts) if parts.is_empty() => write!(f, "true"),
            Formula::Conj(parts) => {
                if nested {
                    write!(f, "(")?;
                }
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    p.fmt_prec(f, !matches!(p, Formula::Atom(_)))?;
                }
                if nested {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Formula::Exists(vars, body) => {
                if nested {
                    write!(f, "(")?;
                }
                let names: Vec<&str> = vars.iter().map(Attr::name).collect();
                write!(f, "exists {} . ", names.join(" "))?;
                body.fmt_prec(f, false)?;
                if nested {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Exists,
    True,
    Var(String),
    Sym(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Amp,
    End,
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    at: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize, usize)>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let (ln, col) = (li + 1, i + 1);
            let c = chars[i];
            let simple = match c {
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '.' => Some(Tok::Dot),
                '&' => Some(Tok::Amp),
                _ => None,
            };
            if let Some(t) = simple {
                out.push((t, ln, col));
                i += 1;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_lowercase() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_lowercase() || chars[i].is_ascii_digit() || chars[i] == '_')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "exists" => Tok::Exists,
                    "true" => Tok::True,
                    _ => Tok::Var(word),
                };
                out.push((tok, ln, col));
            } else if c.is_ascii_uppercase() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '~') {
                    i += 1;
                }
                out.push((Tok::Sym(chars[start..i].iter().collect()), ln, col));
            } else {
                return Err(Error::syntax(ln, col, format!("unexpected character `{c}`")));
            }
        }
    }
    let (l, c) = out.last().map(|&(_, l, c)| (l, c + 1)).unwrap_or((1, 1));
    out.push((Tok::End, l, c));
    Ok(out)
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        Ok(Parser { toks: lex(text)?, at: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.at];
        (l, c)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (l, c) = self.pos();
        Err(Error::syntax(l, c, msg))
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn parse_all(&mut self) -> Result<Formula> {
        let f = self.formula()?;
        if *self.peek() != Tok::End {
            return self.fail("unexpected trailing input");
        }
        Ok(f)
    }

    fn formula(&mut self) -> Result<Formula> {
        if *self.peek() == Tok::Exists {
            self.quantified()
        } else {
            self.conj()
        }
    }

    fn quantified(&mut self) -> Result<Formula> {
        self.bump();
        let mut vars: Vec<(Var, (usize, usize))> = Vec::new();
        loop {
            let p = self.pos();
            match self.bump() {
                Tok::Var(v) => vars.push((Attr::new(v), p)),
                Tok::Comma if !vars.is_empty() => continue,
                Tok::Dot if !vars.is_empty() => break,
                _ => {
                    self.at -= 1;
                    return self.fail("expected a variable or `.`");
                }
            }
        }
        let body = self.formula()?;
        let used = body.free_vars();
        let mut seen = BTreeSet::new();
        for (v, (l, c)) in &vars {
            if !seen.insert(v.clone()) {
                return Err(Error::syntax(*l, *c, format!("variable `{v}` is quantified twice")));
            }
            if !used.contains(v) {
                return Err(Error::syntax(*l, *c, format!("quantified variable `{v}` does not occur in its scope")));
            }
        }
        Ok(Formula::Exists(vars.into_iter().map(|(v, _)| v).collect(), Box::new(body)))
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut parts = vec![self.primary()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.primary()?);
        }
        Ok(Formula::conj(parts))
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Exists => self.quantified(),
            Tok::True => {
                self.bump();
                Ok(Formula::Conj(Vec::new()))
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Sym(s) => {
                self.bump();
                self.expect(Tok::LParen, "`(` after a relation symbol")?;
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        match self.bump() {
                            Tok::Var(v) => args.push(Attr::new(v)),
                            _ => {
                                self.at -= 1;
                                return self.fail("expected a variable");
                            }
                        }
                        match self.bump() {
                            Tok::Comma => continue,
                            Tok::RParen => break,
                            _ => {
                                self.at -= 1;
                                return self.fail("expected `,` or `)`");
                            }
                        }
                    }
                } else {
                    self.bump();
                }
                Ok(Formula::Atom(Atom { symbol: s, args }))
            }
            Tok::End => self.fail("unexpected end of formula"),
            _ => self.fail("expected an atom, `(` or `exists`"),
        }
    }
}

// ---------------------------------------------------------------------------
// Environments and evaluation

/// Relation symbols bound to relations over one domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Environment {
    domain: Arc<Domain>,
    relations: BTreeMap<String, Relation>,
}

impl Environment {
    pub fn new(domain: Arc<Domain>) -> Environment {
        Environment { domain, relations: BTreeMap::new() }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn insert(&mut self, symbol: impl Into<String>, r: Relation) -> Result<()> {
        if r.domain() != &self.domain && **r.domain() != *self.domain {
            return Err(Error::DomainMismatch { left: self.domain.to_string(), right: r.domain().to_string() });
        }
        self.relations.insert(symbol.into(), r);
        Ok(())
    }

    pub fn with(mut self, symbol: impl Into<String>, r: Relation) -> Result<Environment> {
        self.insert(symbol, r)?;
        Ok(self)
    }

    pub fn get(&self, symbol: &str) -> Result<&Relation> {
        self.relations.get(symbol).ok_or_else(|| Error::UnboundSymbol(symbol.to_string()))
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.relations.contains_key(symbol)
    }

    pub fn remove(&mut self, symbol: &str) -> Option<Relation> {
        self.relations.remove(symbol)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Relation)> {
        self.relations.iter()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &String> {
        self.relations.keys()
    }

    /// `base`, or `base2`, `base3`, ... if taken.
    pub fn fresh_symbol(&self, base: &str) -> String {
        if !self.contains(base) {
            return base.to_string();
        }
        (2..).map(|i| format!("{base}{i}")).find(|s| !self.contains(s)).unwrap()
    }

    /// Keeps only the symbols used by `f`.
    pub fn restricted_to(&self, f: &Formula) -> Environment {
        let used: BTreeSet<&str> = f.atoms().iter().map(|a| a.symbol.as_str()).collect();
        Environment {
            domain: self.domain.clone(),
            relations: self
                .relations
                .iter()
                .filter(|(s, _)| used.contains(s.as_str()))
                .map(|(s, r)| (s.clone(), r.clone()))
                .collect(),
        }
    }
}

fn eval_atom(a: &Atom, env: &Environment) -> Result<Relation> {
    let r = env.get(&a.symbol)?;
    if r.arity() != a.args.len() {
        return Err(Error::ArityMismatch { symbol: a.symbol.clone(), expected: r.arity(), found: a.args.len() });
    }
    let scheme: Scheme = a.args.iter().cloned().collect();
    let target: Vec<usize> = a.args.iter().map(|v| scheme.position(v).unwrap()).collect();
    let mut tuples = BTreeSet::new();
    'rows: for t in r.tuples() {
        let mut out: Vec<Option<Elem>> = vec![None; scheme.len()];
        for (i, &e) in t.iter().enumerate() {
            match out[target[i]] {
                Some(prev) if prev != e => continue 'rows,
                _ => out[target[i]] = Some(e),
            }
        }
        tuples.insert(out.into_iter().map(Option::unwrap).collect::<Tuple>());
    }
    Ok(Relation::from_set(env.domain.clone(), scheme, tuples))
}

/// Evaluates `f` keeping only the free variables listed in `needed`.
fn eval_needed(f: &Formula, env: &Environment, needed: &BTreeSet<Var>) -> Result<Relation> {
    match f {
        Formula::Atom(a) => {
            let r = eval_atom(a, env)?;
            let keep: Scheme = r.scheme().iter().filter(|v| needed.contains(v)).cloned().collect();
            if keep.len() == r.arity() {
                Ok(r)
            } else {
                r.project(&keep)
            }
        }
        Formula::Exists(vars, body) => {
            let mut inner = needed.clone();
            for v in vars {
                inner.remove(v);
            }
            eval_needed(body, env, &inner)
        }
        Formula::Conj(parts) => {
            if parts.is_empty() {
                return Ok(Relation::truth(env.domain.clone(), true));
            }
            let frees: Vec<BTreeSet<Var>> = parts.iter().map(Formula::free_vars).collect();
            let mut evaluated = Vec::with_capacity(parts.len());
            for (i, p) in parts.iter().enumerate() {
                let mut want = needed.clone();
                for (j, other) in frees.iter().enumerate() {
                    if i != j {
                        want.extend(frees[i].intersection(other).cloned());
                    }
                }
                evaluated.push(eval_needed(p, env, &want)?);
            }
            join_projecting(evaluated, needed)
        }
    }
}

/// Joins greedily, dropping each variable as soon as no remaining factor mentions it.
fn join_projecting(mut rest: Vec<Relation>, needed: &BTreeSet<Var>) -> Result<Relation> {
    rest.sort_by_key(|r| r.len());
    let mut acc = rest.remove(0);
    while !rest.is_empty() {
        // prefer a factor connected to what we have, then the smallest
        let idx = rest
            .iter()
            .enumerate()
            .max_by_key(|(_, r)| {
                let shared = r.scheme().intersection(acc.scheme()).len();
                (shared > 0, std::cmp::Reverse(r.len()))
            })
            .map(|(i, _)| i)
            .unwrap();
        let next = rest.remove(idx);
        acc = acc.join(&next)?;
        if acc.is_empty() {
            let scheme: Scheme = rest
                .iter()
                .flat_map(|r| r.scheme().iter().cloned())
                .chain(acc.scheme().iter().cloned())
                .filter(|v| needed.contains(v))
                .collect();
            return Ok(Relation::empty(acc.domain().clone(), scheme));
        }
        let later: BTreeSet<&Var> = rest.iter().flat_map(|r| r.scheme().iter()).collect();
        let keep: Scheme = acc.scheme().iter().filter(|v| needed.contains(*v) || later.contains(v)).cloned().collect();
        if keep.len() < acc.arity() {
            acc = acc.project(&keep)?;
        }
    }
    Ok(acc)
}

/// The relation over the free variables of `f` of all satisfying assignments.
///
/// `free_order` must list exactly the free variables of `f`; it pins the
/// correspondence between variables and result attributes.
pub fn evaluate(f: &Formula, env: &Environment, free_order: &[Var]) -> Result<Relation> {
    let free = f.free_vars();
    let listed: BTreeSet<Var> = free_order.iter().cloned().collect();
    if listed.len() != free_order.len() || listed != free {
        let names = |s: &BTreeSet<Var>| s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        return Err(Error::FreeVariables(format!(
            "formula has free variables {{{}}} but {{{}}} were listed",
            names(&free),
            free_order.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        )));
    }
    for a in f.atoms() {
        let r = env.get(&a.symbol)?;
        if r.arity() != a.args.len() {
            return Err(Error::ArityMismatch { symbol: a.symbol.clone(), expected: r.arity(), found: a.args.len() });
        }
    }
    eval_needed(f, env, &free)
}

/// Evaluates with the free variables in canonical order.
pub fn evaluate_free(f: &Formula, env: &Environment) -> Result<Relation> {
    let order: Vec<Var> = f.free_vars().into_iter().collect();
    evaluate(f, env, &order)
}

// ---------------------------------------------------------------------------
// Normal form and classification

/// Prenex form `exists bound . atom & ... & atom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatFormula {
    pub bound: Vec<Var>,
    pub atoms: Vec<Atom>,
}

impl FlatFormula {
    pub fn to_formula(&self) -> Formula {
        let body = Formula::conj(self.atoms.iter().cloned().map(Formula::Atom).collect());
        Formula::exists(self.bound.clone(), body)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let bound: BTreeSet<&Var> = self.bound.iter().collect();
        self.atoms.iter().flat_map(|a| a.args.iter()).filter(|v| !bound.contains(v)).cloned().collect()
    }

    pub fn is_bound(&self, v: &Var) -> bool {
        self.bound.contains(v)
    }

    /// Occurrences `(atom, position)` of every variable, in order.
    pub fn occurrences(&self) -> BTreeMap<Var, Vec<(usize, usize)>> {
        let mut occ: BTreeMap<Var, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, a) in self.atoms.iter().enumerate() {
            for (p, v) in a.args.iter().enumerate() {
                occ.entry(v.clone()).or_default().push((i, p));
            }
        }
        occ
    }

    /// Number of distinct atoms each variable occurs in.
    pub fn atom_counts(&self) -> BTreeMap<Var, usize> {
        self.occurrences()
            .into_iter()
            .map(|(v, occ)| {
                let atoms: BTreeSet<usize> = occ.iter().map(|&(a, _)| a).collect();
                (v, atoms.len())
            })
            .collect()
    }
}

/// Prenex normal form. Bound variables are renamed only when they clash with
/// another variable of the same name elsewhere in the formula.
pub fn normalize(f: &Formula) -> FlatFormula {
    let mut taken: BTreeSet<Var> = f.free_vars();
    let all = f.all_vars();
    let mut out = FlatFormula { bound: Vec::new(), atoms: Vec::new() };
    flatten(f, &BTreeMap::new(), &mut taken, &all, &mut out);
    out
}

fn flatten(
    f: &Formula,
    subst: &BTreeMap<Var, Var>,
    taken: &mut BTreeSet<Var>,
    all: &BTreeSet<Var>,
    out: &mut FlatFormula,
) {
    match f {
        Formula::Atom(a) => out.atoms.push(Atom {
            symbol: a.symbol.clone(),
            args: a.args.iter().map(|v| subst.get(v).cloned().unwrap_or_else(|| v.clone())).collect(),
        }),
        Formula::Conj(parts) => {
            for p in parts {
                flatten(p, subst, taken, all, out);
            }
        }
        Formula::Exists(vars, body) => {
            let mut inner = subst.clone();
            for v in vars {
                let name = if taken.contains(v) {
                    fresh_var(v.name(), |c| taken.contains(c) || all.contains(c))
                } else {
                    v.clone()
                };
                taken.insert(name.clone());
                out.bound.push(name.clone());
                inner.insert(v.clone(), name);
            }
            flatten(body, &inner, taken, all, out);
        }
    }
}

/// `base_1`, `base_2`, ... : the first name not rejected by `used`.
pub(crate) fn fresh_var(base: &str, used: impl Fn(&Var) -> bool) -> Var {
    (1..).map(|i| Attr::new(format!("{base}_{i}"))).find(|c| !used(c)).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum FormulaKind {
    Cartesian,
    Bond,
    PureProjoin,
    Join,
    Projoin,
}

impl fmt::Display for FormulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormulaKind::Cartesian => "cartesian",
            FormulaKind::Bond => "bond",
            FormulaKind::PureProjoin => "pureProjoin",
            FormulaKind::Join => "join",
            FormulaKind::Projoin => "projoin",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    /// The most specific class.
    pub kind: FormulaKind,
    pub cartesian: bool,
    pub join: bool,
    pub pure_projoin: bool,
    pub bond: bool,
    /// Number of quantified variables.
    pub parameters: usize,
    pub factor_arities: Vec<usize>,
    pub max_arity: usize,
    pub ternaries: usize,
}

/// Classifies a formula after normalization.
pub fn classify(f: &Formula) -> Classification {
    classify_flat(&normalize(f))
}

pub fn classify_flat(ff: &FlatFormula) -> Classification {
    let occ = ff.occurrences();
    let counts = ff.atom_counts();
    let quantifier_free = ff.bound.is_empty();
    let shared: BTreeSet<&Var> = counts.iter().filter(|(_, &c)| c >= 2).map(|(v, _)| v).collect();
    let bound: BTreeSet<&Var> = ff.bound.iter().collect();
    let cartesian = quantifier_free && shared.is_empty();
    let pure_projoin = bound == shared;
    let bond = pure_projoin
        && occ.iter().all(|(v, o)| if bound.contains(v) { o.len() == 2 && o[0].0 != o[1].0 } else { o.len() == 1 });
    let kind = if cartesian {
        FormulaKind::Cartesian
    } else if bond {
        FormulaKind::Bond
    } else if pure_projoin {
        FormulaKind::PureProjoin
    } else if quantifier_free {
        FormulaKind::Join
    } else {
        FormulaKind::Projoin
    };
    let factor_arities: Vec<usize> = ff.atoms.iter().map(|a| a.args.len()).collect();
    Classification {
        kind,
        cartesian,
        join: quantifier_free,
        pure_projoin,
        bond,
        parameters: ff.bound.len(),
        max_arity: factor_arities.iter().copied().max().unwrap_or(0),
        ternaries: factor_arities.iter().filter(|&&a| a == 3).count(),
        factor_arities,
    }
}

// ---------------------------------------------------------------------------
// Certificates

/// A formula and factor relations whose value, renamed by `varmap`, is `target`.
#[derive(Clone, Debug)]
pub struct ReductionCertificate {
    pub target: Relation,
    pub formula: Formula,
    pub env: Environment,
    /// Free variable to target attribute; a bijection.
    pub varmap: BTreeMap<Var, Attr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub valid: bool,
    pub class: Classification,
    /// Every factor has arity strictly between 0 and the target's arity.
    pub reducible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReductionCertificate {
    /// Builds a certificate and checks it by evaluation.
    pub fn new(
        target: Relation,
        formula: Formula,
        env: Environment,
        varmap: BTreeMap<Var, Attr>,
    ) -> Result<ReductionCertificate> {
        let c = ReductionCertificate::unchecked(target, formula, env, varmap);
        let value = c.evaluate()?;
        if value != c.target {
            return Err(Error::Verification(format!(
                "formula `{}` evaluates to {} tuples, target has {}",
                c.formula,
                value.len(),
                c.target.len()
            )));
        }
        Ok(c)
    }

    /// Builds a certificate whose free variables are named after the target's attributes.
    pub fn identity_mapped(target: Relation, formula: Formula, env: Environment) -> Result<ReductionCertificate> {
        let varmap = formula.free_vars().into_iter().map(|v| (v.clone(), v)).collect();
        ReductionCertificate::new(target, formula, env, varmap)
    }

    /// Builds without verification, e.g. when loading from disk; see [`Self::check`].
    pub fn unchecked(
        target: Relation,
        formula: Formula,
        env: Environment,
        varmap: BTreeMap<Var, Attr>,
    ) -> ReductionCertificate {
        ReductionCertificate { target, formula, env, varmap }
    }

    /// Value of the formula renamed onto the target's attributes.
    pub fn evaluate(&self) -> Result<Relation> {
        let free = self.formula.free_vars();
        let keys: BTreeSet<Var> = self.varmap.keys().cloned().collect();
        let image: Scheme = self.varmap.values().cloned().collect();
        if keys != free || image.len() != self.varmap.len() || &image != self.target.scheme() {
            return Err(Error::FreeVariables(format!(
                "variable map {:?} is not a bijection between the free variables and {}",
                self.varmap,
                self.target.scheme()
            )));
        }
        let order: Vec<Var> = free.into_iter().collect();
        evaluate(&self.formula, &self.env, &order)?.rename(&self.varmap)
    }

    pub fn classify(&self) -> Classification {
        classify(&self.formula)
    }

    /// Re-evaluates the formula and reports validity, class and reducibility.
    pub fn check(&self) -> Verdict {
        let class = self.classify();
        let n = self.target.arity();
        let reducible = class.factor_arities.iter().all(|&a| a > 0 && a < n);
        let (valid, error) = match self.evaluate() {
            Ok(v) if v == self.target => (true, None),
            Ok(v) => (false, Some(format!("formula value has {} tuples, target has {}", v.len(), self.target.len()))),
            Err(e) => (false, Some(e.to_string())),
        };
        let note = (valid && !reducible).then(|| "decomposition but not a reduction".to_string());
        Verdict { valid, class, reducible, note, error }
    }

    /// Writes `certificate.json`, `target.rel` and one `.rel` file per factor into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write(&dir.join("target.rel"), "target", &self.target)?;
        let mut env = BTreeMap::new();
        for (sym, r) in self.env.iter() {
            let file = format!("{sym}.rel");
            io::write(&dir.join(&file), sym, r)?;
            env.insert(sym.clone(), file);
        }
        let manifest = BundleManifest {
            target: "target.rel".into(),
            formula: self.formula.to_string(),
            env,
            varmap: self.varmap.iter().map(|(v, a)| (v.to_string(), a.to_string())).collect(),
        };
        std::fs::write(dir.join("certificate.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    /// Loads a bundle written by [`Self::write_bundle`] without verifying it.
    pub fn read_bundle(dir: &Path) -> Result<ReductionCertificate> {
        let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("certificate.json"))?)?;
        let target = io::read(&dir.join(&manifest.target))?.relation;
        let formula = Formula::parse(&manifest.formula)?;
        let mut env = Environment::new(target.domain().clone());
        for (sym, file) in &manifest.env {
            env.insert(sym.clone(), io::read(&dir.join(file))?.relation)?;
        }
        let varmap = manifest.varmap.iter().map(|(v, a)| (Attr::new(v), Attr::new(a))).collect();
        Ok(ReductionCertificate::unchecked(target, formula, env, varmap))
    }
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    target: String,
    formula: String,
    env: BTreeMap<String, String>,
    varmap: BTreeMap<String, String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<Var> {
        names.iter().map(Attr::new).collect()
    }

    #[test]
    fn parses_and_renders() {
        let f = Formula::parse("exists t . P(t,x1) & Q(t,x2) & R(t,x3)").unwrap();
        match &f {
            Formula::Exists(v, body) => {
                assert_eq!(v, &vars(&["t"]));
                assert!(matches!(**body, Formula::Conj(ref p) if p.len() == 3));
            }
            _ => panic!("expected a quantifier"),
        }
        assert_eq!(f.to_string(), "exists t . P(t,x1) & Q(t,x2) & R(t,x3)");
        let g = Formula::parse("P(x) & Q(y)").unwrap();
        assert!(g.is_quantifier_free());
        let nested = Formula::parse("exists s . exists t . P(t,x1,x2,t) & Q(x2,x3,s,t)").unwrap();
        assert!(matches!(nested, Formula::Exists(_, ref b) if matches!(**b, Formula::Exists(..))));
        for text in [
            "exists s t . P(x1,s,t) & Q(s,t,x2)",
            "exists t . P(t,x1,x2,t) & (exists s . Q(x2,x3,s,t))",
            "P(x) & (Q(x) & R(y))",
            "Z()",
            "true",
        ] {
            let parsed = Formula::parse(text).unwrap();
            assert_eq!(parsed.to_string(), text);
            assert_eq!(Formula::parse(&parsed.to_string()).unwrap(), parsed);
        }
        assert_eq!(Formula::parse("exists s,t . Q~(s,t)").unwrap().to_string(), "exists s t . Q~(s,t)");
    }

    #[test]
    fn syntax_errors_have_positions() {
        match Formula::parse("P(x) &\n  Q(x") {
            Err(Error::Syntax { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Formula::parse("exists t . P(x)"), Err(Error::Syntax { column: 8, .. })));
        assert!(matches!(Formula::parse("P(X)"), Err(Error::Syntax { column: 3, .. })));
        assert!(matches!(Formula::parse("P(x) Q(y)"), Err(Error::Syntax { .. })));
    }

    fn env2() -> Environment {
        let d = Domain::letters(2).unwrap();
        let mut env = Environment::new(d.clone());
        env.insert("I2", Relation::identity(d.clone(), Scheme::numbered(2))).unwrap();
        env.insert("U1", Relation::universal(d.clone(), Scheme::numbered(1)).unwrap()).unwrap();
        env.insert("D2", Relation::diversity(d, Scheme::numbered(2)).unwrap()).unwrap();
        env
    }

    #[test]
    fn evaluates_identity_join() {
        let env = env2();
        let f = Formula::parse("I2(x1,x3) & I2(x2,x3)").unwrap();
        let r = evaluate(&f, &env, &vars(&["x1", "x2", "x3"])).unwrap();
        let i3 = Relation::identity(env.domain().clone(), Scheme::new(["x1", "x2", "x3"]));
        assert_eq!(r, i3);
    }

    #[test]
    fn closed_formula_is_true() {
        let env = env2();
        let f = Formula::parse("exists t . U1(t)").unwrap();
        let r = evaluate(&f, &env, &[]).unwrap();
        assert_eq!(r, Relation::truth(env.domain().clone(), true));
        let g = Formula::parse("exists t . D2(t,t)").unwrap();
        assert_eq!(evaluate(&g, &env, &[]).unwrap(), Relation::truth(env.domain().clone(), false));
    }

    #[test]
    fn diversity_as_pairwise_join() {
        let d = Domain::letters(3).unwrap();
        let env = Environment::new(d.clone())
            .with("D2", Relation::diversity(d.clone(), Scheme::numbered(2)).unwrap())
            .unwrap();
        let f = Formula::parse("D2(x1,x2) & D2(x1,x3) & D2(x2,x3)").unwrap();
        let r = evaluate_free(&f, &env).unwrap();
        assert_eq!(r.len(), 6);
        assert_eq!(r, Relation::diversity(d, Scheme::new(["x1", "x2", "x3"])).unwrap());
    }

    #[test]
    fn repeated_variables_select_diagonals() {
        let d = Domain::letters(2).unwrap();
        let u2 = Relation::universal(d.clone(), Scheme::numbered(2)).unwrap();
        let env = Environment::new(d.clone()).with("U", u2).unwrap();
        let r = evaluate_free(&Formula::parse("U(x,x)").unwrap(), &env).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.arity(), 1);
    }

    #[test]
    fn evaluation_errors() {
        let env = env2();
        let f = Formula::parse("I2(x,y)").unwrap();
        assert!(matches!(evaluate(&f, &env, &vars(&["x"])), Err(Error::FreeVariables(_))));
        let g = Formula::parse("I2(x)").unwrap();
        assert!(matches!(evaluate(&g, &env, &vars(&["x"])), Err(Error::ArityMismatch { .. })));
        let h = Formula::parse("W(x)").unwrap();
        assert!(matches!(evaluate(&h, &env, &vars(&["x"])), Err(Error::UnboundSymbol(_))));
    }

    #[test]
    fn shadowing_is_respected() {
        let env = env2();
        // the inner x is a different variable from the outer one
        let f = Formula::parse("D2(x,y) & (exists x . I2(x,y))").unwrap();
        assert_eq!(evaluate_free(&f, &env).unwrap().len(), 2);
        let flat = normalize(&f);
        assert_eq!(flat.bound, vars(&["x_1"]));
        assert_eq!(evaluate_free(&flat.to_formula(), &env).unwrap(), evaluate_free(&f, &env).unwrap());
    }

    #[test]
    fn normalization_lifts_quantifiers() {
        let f = Formula::parse("exists t . P(t,x1,x2,t) & (exists s . Q(x2,x3,s,t))").unwrap();
        let flat = normalize(&f);
        assert_eq!(flat.bound, vars(&["t", "s"]));
        assert_eq!(flat.to_formula().to_string(), "exists t s . P(t,x1,x2,t) & Q(x2,x3,s,t)");
        let already = Formula::parse("exists t . A(t,x) & B(t,y)").unwrap();
        assert_eq!(normalize(&already).to_formula(), already);
    }

    #[test]
    fn classification() {
        let c = classify(&Formula::parse("A(x) & B(y,z)").unwrap());
        assert_eq!(c.kind, FormulaKind::Cartesian);
        assert!(c.bond);
        let hyp = classify(&Formula::parse("exists t . R1(t,x1) & R2(t,x2) & R3(t,x3)").unwrap());
        assert!(!hyp.bond);
        assert_eq!(hyp.kind, FormulaKind::PureProjoin);
        assert_eq!(hyp.parameters, 1);
        let chain = classify(&Formula::parse("exists t1 . I3(x1,x2,t1) & I3(t1,x3,x4)").unwrap());
        assert_eq!(chain.kind, FormulaKind::Bond);
        assert_eq!(chain.ternaries, 2);
        let join = classify(&Formula::parse("A(x,y) & B(x,z)").unwrap());
        assert_eq!(join.kind, FormulaKind::Join);
        let proj = classify(&Formula::parse("exists t . P(x,t) & Q(y,z)").unwrap());
        assert_eq!(proj.kind, FormulaKind::Projoin);
        let not_bond = classify(&Formula::parse("exists t . P(x,t) & Q(x,t)").unwrap());
        assert!(!not_bond.bond);
    }

    #[test]
    fn certificates_verify_and_detect_tampering() {
        let d = Domain::letters(2).unwrap();
        let i3 = Relation::identity(d.clone(), Scheme::numbered(3));
        let env = Environment::new(d.clone()).with("I2", Relation::identity(d.clone(), Scheme::numbered(2))).unwrap();
        let f = Formula::parse("I2(x1,x3) & I2(x2,x3)").unwrap();
        let varmap = [("x1", "1"), ("x2", "2"), ("x3", "3")]
            .into_iter()
            .map(|(a, b)| (Attr::new(a), Attr::new(b)))
            .collect::<BTreeMap<_, _>>();
        let cert = ReductionCertificate::new(i3.clone(), f.clone(), env.clone(), varmap.clone()).unwrap();
        let v = cert.check();
        assert!(v.valid && v.reducible && v.note.is_none());

        let mut bad = env.clone();
        bad.insert("I2", Relation::universal(d.clone(), Scheme::numbered(2)).unwrap()).unwrap();
        let tampered = ReductionCertificate::unchecked(i3.clone(), f.clone(), bad.clone(), varmap.clone());
        assert!(!tampered.check().valid);
        assert!(matches!(ReductionCertificate::new(i3.clone(), f, bad, varmap), Err(Error::Verification(_))));

        let whole = Environment::new(d.clone()).with("R", i3.clone()).unwrap();
        let trivial = ReductionCertificate::identity_mapped(
            Relation::identity(d.clone(), Scheme::new(["x", "y", "z"])),
            Formula::parse("R(x,y,z)").unwrap(),
            whole,
        )
        .unwrap();
        let v = trivial.check();
        assert!(v.valid && !v.reducible);
        assert_eq!(v.note.as_deref(), Some("decomposition but not a reduction"));
    }

    #[test]
    fn bundles_round_trip() {
        let d = Domain::letters(2).unwrap();
        let env = Environment::new(d.clone()).with("I2", Relation::identity(d.clone(), Scheme::numbered(2))).unwrap();
        let target = Relation::identity(d, Scheme::new(["x", "y", "z"]));
        let cert =
            ReductionCertificate::identity_mapped(target, Formula::parse("I2(x,z) & I2(y,z)").unwrap(), env).unwrap();
        let dir = std::env::temp_dir().join(format!("relred-bundle-{}", std::process::id()));
        cert.write_bundle(&dir).unwrap();
        let back = ReductionCertificate::read_bundle(&dir).unwrap();
        assert!(back.check().valid);
        assert_eq!(back.formula, cert.formula);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
