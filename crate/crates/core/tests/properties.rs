use proptest::prelude::*;
use relred::analysis;
use relred::dependencies::{self, Partition};
use relred::diagrams::{self, BondGraph};
use relred::formula::{classify, evaluate_free, Atom, FlatFormula, Var};
use relred::relation::all_tuples;
use relred::{reducers, Attr, Domain, Environment, Relation, Scheme};
use std::collections::BTreeSet;
use std::sync::Arc;

fn letters(d: usize) -> Arc<Domain> {
    Domain::letters(d).unwrap()
}

fn relation(d: usize, scheme: Scheme, mask: u64) -> Relation {
    let n = scheme.len();
    let rows: BTreeSet<Vec<u8>> =
        all_tuples(d, n).enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, t)| t).collect();
    Relation::new(letters(d), scheme, rows).unwrap()
}

fn sparse(d: usize, n: usize, rows: &[Vec<u8>]) -> Relation {
    let rows: BTreeSet<Vec<u8>> = rows.iter().map(|r| r.iter().take(n).map(|e| e % d as u8).collect()).collect();
    Relation::new(letters(d), Scheme::numbered(n), rows).unwrap()
}

const SYMBOLS: [(&str, usize); 3] = [("P", 2), ("Q", 3), ("R", 1)];

fn formula_strategy() -> impl Strategy<Value = FlatFormula> {
    prop::collection::vec((0..3usize, prop::collection::vec(0..7usize, 3)), 1..=4).prop_map(|spec| {
        let pool: Vec<Var> = ["x1", "x2", "x3", "t1", "t2", "t3", "t4"].iter().map(Attr::new).collect();
        let atoms: Vec<Atom> = spec
            .iter()
            .map(|(s, args)| {
                let (sym, arity) = SYMBOLS[*s];
                Atom { symbol: sym.into(), args: args[..arity].iter().map(|&i| pool[i].clone()).collect() }
            })
            .collect();
        let used: BTreeSet<&Var> = atoms.iter().flat_map(|a| a.args.iter()).collect();
        let bound = pool[3..].iter().filter(|v| used.contains(v)).cloned().collect();
        FlatFormula { bound, atoms }
    })
}

fn environment(d: usize, masks: [u64; 3]) -> Environment {
    let mut env = Environment::new(letters(d));
    for ((sym, arity), mask) in SYMBOLS.iter().zip(masks) {
        env.insert(*sym, relation(d, Scheme::numbered(*arity), mask)).unwrap();
    }
    env
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn join_laws(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let r = relation(2, Scheme::parse_list("x,y"), a);
        let s = relation(2, Scheme::parse_list("y,z"), b);
        let t = relation(2, Scheme::parse_list("z,w"), c);
        prop_assert_eq!(r.join(&s).unwrap(), s.join(&r).unwrap());
        prop_assert_eq!(r.join(&s).unwrap().join(&t).unwrap(), r.join(&s.join(&t).unwrap()).unwrap());
        prop_assert_eq!(r.join(&t).unwrap(), Relation::cartesian(&[r.clone(), t.clone()]).unwrap());
    }

    #[test]
    fn projections_cover(mask in any::<u64>(), cover in 0usize..4) {
        let r = relation(2, Scheme::numbered(4), mask);
        let covers = [["1,2", "2,3", "3,4"], ["1,2,3", "2,3,4", "1,4"], ["1", "2,3", "3,4"], ["1,2,3", "4", "1,2,3"]];
        let parts: Vec<Relation> = covers[cover].iter().map(|s| r.project(&Scheme::parse_list(s)).unwrap()).collect();
        let joined = Relation::join_all(&parts).unwrap();
        prop_assert!(r.tuples().iter().all(|t| joined.contains(t)));
    }

    #[test]
    fn cartesian_test_matches_construction(mask in any::<u64>(), which in 0usize..3) {
        let r = relation(2, Scheme::numbered(3), mask);
        let p = Partition::parse(["1|2,3", "1,2|3", "1|2|3"][which]);
        let projections: Vec<Relation> = p.blocks.iter().map(|b| r.project(b).unwrap()).collect();
        let rebuilt = Relation::cartesian(&projections).unwrap();
        prop_assert_eq!(dependencies::is_cartesian_over(&r, &p).unwrap(), rebuilt == r);
    }

    #[test]
    fn keys_bound_cardinality(rows in prop::collection::vec(prop::collection::vec(0u8..3, 4), 1..30)) {
        let r = sparse(3, 4, &rows);
        for k in 1..=3 {
            for key in dependencies::find_keys(&r, k) {
                prop_assert!(r.len() <= 3usize.pow(key.len() as u32));
            }
        }
    }

    #[test]
    fn hypostatic_parameter_is_a_key(d in 2usize..5, n in 2usize..6, rows in prop::collection::vec(prop::collection::vec(0u8..5, 6), 1..5)) {
        let rows: Vec<Vec<u8>> = rows.into_iter().take(d).collect();
        let r = sparse(d, n, &rows);
        let aug = reducers::hypostatic_augmented(&r, 1).unwrap();
        prop_assert!(dependencies::is_key(&aug, &Scheme::parse_list("t1")).unwrap());
    }

    #[test]
    fn explication_preserves_value_at_d3(ff in formula_strategy(), masks in any::<[u64; 3]>()) {
        let f = ff.to_formula();
        let env = environment(3, masks);
        let (ex, extended) = diagrams::explicate(&f, &env).unwrap();
        prop_assert_eq!(evaluate_free(&ex.formula, &extended).unwrap(), evaluate_free(&f, &env).unwrap());
        let s = BondGraph::of_formula(&ex.formula).stats();
        prop_assert!(s.listing && s.handshake);
    }

    #[test]
    fn merging_keeps_value_and_ternaries(ff in formula_strategy(), masks in any::<[u64; 3]>()) {
        let f = ff.to_formula();
        let env = environment(2, masks);
        let (ex, extended) = diagrams::explicate(&f, &env).unwrap();
        let target = evaluate_free(&ex.formula, &extended).unwrap();
        let c = relred::ReductionCertificate::identity_mapped(target.clone(), ex.formula.clone(), extended).unwrap();
        let m = diagrams::merge_complete(&c).unwrap();
        prop_assert!(m.ternaries_after <= m.ternaries_before);
        prop_assert!(m.certificate.classify().max_arity <= 3);
        prop_assert_eq!(m.certificate.evaluate().unwrap(), c.evaluate().unwrap());
    }

    #[test]
    fn ternarity_of_small_relations(d in 2usize..=5, n in 3usize..=6, rows in prop::collection::vec(prop::collection::vec(0u8..5, 6), 1..=5)) {
        let rows: Vec<Vec<u8>> = rows.into_iter().take(d).collect();
        let r = sparse(d, n, &rows);
        prop_assume!(analysis::is_degenerate(&r).unwrap().is_none());
        let t = diagrams::ternarity_bounds(&r, &[]).unwrap();
        prop_assert_eq!((t.lower, t.upper), (n - 2, Some(n - 2)));
    }

    #[test]
    fn relative_products_of_two(mask in any::<u16>(), left in 0usize..3) {
        let r = relation(2, Scheme::numbered(4), mask as u64);
        let block = Scheme::parse_list(["1,2", "1,3", "1,4"][left]);
        let m = analysis::BooleanMatrix::of_bipartition(&r, &block).unwrap();
        prop_assume!(m.ones() <= 12);
        let found = analysis::rel_prod_reducible2(&r, &block).unwrap();
        match &found {
            Some(c) => prop_assert!(c.check().valid),
            None => prop_assert!(!rectangle_cover_exists(&m, 2)),
        }
    }
}

/// Exponential check: is `m` an OR of at most `k` all-ones rectangles?
fn rectangle_cover_exists(m: &analysis::BooleanMatrix, k: usize) -> bool {
    let (rows, cols) = (m.n_rows(), m.n_cols());
    let mut rects: Vec<(u32, u32)> = Vec::new();
    for rs in 1u32..1 << rows {
        for cs in 1u32..1 << cols {
            let inside = (0..rows)
                .filter(|i| rs >> i & 1 == 1)
                .all(|i| (0..cols).filter(|j| cs >> j & 1 == 1).all(|j| m.get(i, j)));
            if inside {
                rects.push((rs, cs));
            }
        }
    }
    let target: Vec<u32> = (0..rows).map(|i| (0..cols).filter(|&j| m.get(i, j)).fold(0, |a, j| a | 1 << j)).collect();
    let covers = |chosen: &[(u32, u32)]| {
        (0..rows).all(|i| chosen.iter().filter(|(rs, _)| rs >> i & 1 == 1).fold(0, |a, (_, cs)| a | cs) == target[i])
    };
    if covers(&[]) {
        return true;
    }
    (1..=k).any(|size| match size {
        1 => rects.iter().any(|&r| covers(&[r])),
        _ => rects.iter().enumerate().any(|(i, &a)| rects[i..].iter().any(|&b| covers(&[a, b]))),
    })
}

#[test]
fn irreducibility_conditions_are_consistent() {
    for n in 2..=3 {
        for mask in 0..1u64 << (1 << n) {
            let r = relation(2, Scheme::numbered(n), mask);
            let rep = analysis::irreducibility_tests(&r).unwrap();
            assert!(rep.consistent, "n={n} mask={mask}");
        }
    }
}

#[test]
fn identity_chains_on_every_domain() {
    for d in 1..=5 {
        for n in 3..=7 {
            let c = reducers::identity_chain(&letters(d), n).unwrap();
            assert_eq!(c.evaluate().unwrap(), Relation::identity(letters(d), Scheme::numbered(n)));
        }
    }
}

#[test]
fn disconnected_diagrams_are_cartesian() {
    let f = relred::Formula::parse("exists t . P(x1,t) & Q(t,x2,x3) & R(x4)").unwrap();
    let left = relred::Formula::parse("exists t . P(x1,t) & Q(t,x2,x3)").unwrap();
    let right = relred::Formula::parse("R(x4)").unwrap();
    assert!(classify(&f).bond);
    assert_eq!(BondGraph::of_formula(&f).stats().k, 2);
    for seed in 0..64u64 {
        let env = environment(2, [seed.wrapping_mul(0x9e37_79b9), seed.rotate_left(7) ^ 0xa5a5, seed]);
        let whole = evaluate_free(&f, &env).unwrap();
        let parts =
            Relation::cartesian(&[evaluate_free(&left, &env).unwrap(), evaluate_free(&right, &env).unwrap()]).unwrap();
        assert_eq!(whole, parts);
    }
}
