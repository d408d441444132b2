use std::sync::Arc;

use proptest::prelude::*;

use liftedq::limits::Limits;
use liftedq::logspace;
use liftedq::model::bool_range;
use liftedq::wfomc::{brute_wmc, compile, Clause, Literal, WfomcProblem};
use liftedq::{Constraint, Domain, Logvar, Relation, Term, ValueSet, Vocab};

fn vocab(n: usize) -> Arc<Vocab> {
    let rel = |name: &str, params: Vec<usize>| Relation { name: name.into(), params, range: bool_range() };
    Arc::new(Vocab {
        domains: vec![Domain { name: "D".into(), constants: (0..n).map(|i| format!("d{i}")).collect() }],
        relations: vec![rel("S", vec![0]), rel("T", vec![0]), rel("R", vec![0, 0])],
        ranges: Vec::new(),
    })
}

#[derive(Clone, Debug)]
struct Spec {
    n: usize,
    weights: Vec<(f64, f64)>,
    clauses: Vec<(bool, Option<u32>, Vec<(usize, u8, u8, bool)>)>,
}

/// A term code: 0 is X, 1 is Y, 2 + c is constant c.
fn term(code: u8, n: usize) -> Term {
    match code {
        0 => Term::Var(0),
        1 => Term::Var(1),
        c => Term::Const((c as usize - 2).min(n - 1) as u32),
    }
}

fn problem(s: &Spec) -> WfomcProblem {
    let v = vocab(s.n);
    let mut p = WfomcProblem::reduce(&v, &[]).unwrap();
    for (i, &(t, f)) in s.weights.iter().enumerate() {
        p.predicates[i].w_true = t.ln();
        p.predicates[i].w_false = f.ln();
    }
    for (distinct, restrict, lits) in &s.clauses {
        let n = s.n as u32;
        let vars = vec![Logvar::new("X", 0, n), Logvar::new("Y", 0, n)];
        let allowed = vec![restrict.map(|c| ValueSet::new((0..n).filter(|&k| k != c.min(n - 1)).collect())), None];
        let pairs: Vec<(usize, usize)> = if *distinct { vec![(0, 1)] } else { Vec::new() };
        let literals = lits
            .iter()
            .map(|&(pred, a, b, positive)| {
                let terms = if pred == 2 { vec![term(a, s.n), term(b, s.n)] } else { vec![term(a, s.n)] };
                Literal { pred, terms, positive }
            })
            .collect();
        p.clauses.push(Clause { constraint: Constraint::product(vars, allowed, pairs), literals });
    }
    p
}

fn spec() -> impl Strategy<Value = Spec> {
    let lit = (0usize..3, 0u8..4, 0u8..4, any::<bool>());
    let clause = (any::<bool>(), prop::option::of(0u32..3), prop::collection::vec(lit, 1..4));
    (2usize..4, prop::collection::vec((0.2f64..3.0, 0.2f64..3.0), 3), prop::collection::vec(clause, 0..4))
        .prop_map(|(n, weights, clauses)| Spec { n, weights, clauses })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn compiled_count_equals_brute_force(s in spec()) {
        let p = problem(&s);
        let want = brute_wmc(&p, 20).unwrap();
        let c = compile(&p, &Limits::default()).unwrap().smooth(&p).unwrap();
        let v = c.validate();
        prop_assert!(v.ok(), "{:?}", v.witness);
        let got = c.eval(&p);
        prop_assert!(logspace::close(got, want, 1e-9), "{} vs {}\n{}\n{}", got, want, p.describe(), c.dump(&p));
    }
}
