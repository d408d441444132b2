use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liftedq::logspace;
use liftedq::lve::{
    absorb, count_convert, count_convert_pair, count_normalise, expand, ground_ln_weight, ground_logvar,
    merge_duplicates, multiply, split, sum_out,
};
use liftedq::model::{
    parse_model, Arg, Atom, Constraint, Evidence, GroundAtom, Logvar, Parfactor, Term, ValueSet, Vocab,
};

const P: usize = 0;
const Q: usize = 1;
const R: usize = 2;

fn vocab() -> Vocab {
    let m = parse_model("domain D = {a, b, c};\nrange level = {low, mid, high};\nprv P(D), Q(D): level, R(D, D);\n")
        .unwrap();
    (*m.vocab).clone()
}

fn atom(rel: usize, terms: &[Term]) -> Arg {
    Arg::Atom(Atom {
        rel,
        terms: terms.to_vec(),
    })
}

fn set_of(mask: u8) -> ValueSet {
    ValueSet::new((0..3).filter(|i| mask & (1 << i) != 0).collect())
}

#[derive(Clone, Debug)]
struct Spec {
    arity: usize,
    masks: [u8; 2],
    distinct: bool,
    args: Vec<usize>,
    table_seed: u64,
    zero: bool,
}

fn spec() -> impl Strategy<Value = Spec> {
    (
        1usize..=2,
        1u8..8,
        1u8..8,
        any::<bool>(),
        prop::collection::vec(0usize..7, 1..4),
        any::<u64>(),
        prop::bool::weighted(0.2),
    )
        .prop_map(|(arity, m0, m1, distinct, args, table_seed, zero)| Spec {
            arity,
            masks: [m0, m1],
            distinct,
            args,
            table_seed,
            zero,
        })
}

fn candidate(k: usize, arity: usize) -> Arg {
    let x = Term::Var(0);
    let y = if arity == 2 { Term::Var(1) } else { Term::Var(0) };
    match k {
        0 => atom(P, &[x]),
        1 => atom(Q, &[x]),
        2 => atom(R, &[x, y]),
        3 => atom(P, &[y]),
        4 => atom(Q, &[y]),
        5 => atom(P, &[Term::Const(1)]),
        _ => atom(R, &[y, Term::Const(2)]),
    }
}

fn build(vocab: &Vocab, s: &Spec) -> Parfactor {
    let vars: Vec<Logvar> = (0..s.arity).map(|i| Logvar::new(["X", "Y"][i], 0, 3)).collect();
    let allowed = (0..s.arity).map(|i| Some(set_of(s.masks[i]))).collect();
    let distinct = if s.arity == 2 && s.distinct {
        vec![(0, 1)]
    } else {
        vec![]
    };
    let constraint = Constraint::product(vars, allowed, distinct);
    let args: Vec<Arg> = s.args.iter().map(|&k| candidate(k, s.arity)).collect();
    random_parfactor(vocab, "g", constraint, args, s.table_seed, s.zero)
}

fn random_parfactor(
    vocab: &Vocab,
    name: &str,
    constraint: Constraint,
    args: Vec<Arg>,
    seed: u64,
    zero: bool,
) -> Parfactor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = args.iter().map(|a| a.size(vocab)).product();
    let table = (0..len)
        .map(|_| {
            if zero && rng.gen_bool(0.2) {
                logspace::ZERO
            } else {
                rng.gen_range(0.1f64..3.0).ln()
            }
        })
        .collect();
    Parfactor {
        name: name.into(),
        constraint,
        args,
        table,
    }
}

fn atoms_of(ps: &[Parfactor]) -> BTreeSet<GroundAtom> {
    let mut out = BTreeSet::new();
    for g in ps {
        for a in &g.args {
            match a {
                Arg::Atom(x) => {
                    for t in g.constraint.expand() {
                        out.insert(x.ground(&t));
                    }
                }
                Arg::Count(c) => out.extend(c.ground_atoms()),
            }
        }
    }
    out
}

/// Every joint state of `atoms` when there are at most 4096, otherwise
/// `count` seeded random states.
fn samples(vocab: &Vocab, atoms: &BTreeSet<GroundAtom>, seed: u64, count: usize) -> Vec<HashMap<GroundAtom, usize>> {
    let sizes: Vec<usize> = atoms.iter().map(|a| vocab.range_size(a.rel)).collect();
    let states = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&n| n <= 4096));
    if let Some(states) = states {
        return (0..states)
            .map(|i| {
                atoms
                    .iter()
                    .cloned()
                    .zip(liftedq::model::row_values(&sizes, i))
                    .collect()
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            atoms
                .iter()
                .map(|a| (a.clone(), rng.gen_range(0..vocab.range_size(a.rel))))
                .collect()
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a == logspace::ZERO && b == logspace::ZERO) || (a - b).abs() < 1e-9
}

fn same_weight(vocab: &Vocab, before: &[Parfactor], after: &[Parfactor], seed: u64) -> Result<(), TestCaseError> {
    let mut atoms = atoms_of(before);
    atoms.extend(atoms_of(after));
    for a in samples(vocab, &atoms, seed, 256) {
        let (x, y) = (ground_ln_weight(vocab, before, &a), ground_ln_weight(vocab, after, &a));
        prop_assert!(close(x, y), "{x} vs {y}");
    }
    Ok(())
}

/// Checks that summing `before` over `elim` gives `after`.
fn marginal_weight(
    vocab: &Vocab,
    before: &[Parfactor],
    after: &[Parfactor],
    elim: &BTreeSet<GroundAtom>,
    seed: u64,
) -> Result<(), TestCaseError> {
    let elim: Vec<GroundAtom> = elim.iter().cloned().collect();
    let sizes: Vec<usize> = elim.iter().map(|a| vocab.range_size(a.rel)).collect();
    let total: usize = sizes.iter().product();
    let rest: BTreeSet<GroundAtom> = atoms_of(before).into_iter().filter(|a| !elim.contains(a)).collect();
    for mut a in samples(vocab, &rest, seed, 16) {
        let mut terms = Vec::with_capacity(total);
        for i in 0..total {
            for (k, v) in liftedq::model::row_values(&sizes, i).into_iter().enumerate() {
                a.insert(elim[k].clone(), v);
            }
            terms.push(ground_ln_weight(vocab, before, &a));
        }
        let want = logspace::sum(terms);
        let got = ground_ln_weight(vocab, after, &a);
        prop_assert!(close(want, got), "{want} vs {got}");
    }
    Ok(())
}

#[allow(dead_code)]
pub const OPERATORS: [&str; 11] = [
    "split",
    "ground_logvar",
    "count_convert",
    "count_convert_pair",
    "expand",
    "multiply",
    "sum_out_atom",
    "sum_out_counting",
    "count_normalise",
    "merge_duplicates",
    "absorb",
];

/// Runs `cases` random instances of the soundness check of operator `name`.
pub fn check_operator(name: &str, cases: u32) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    match name {
        "split" => runner
            .run(&(spec(), 0u8..8, any::<u64>()), |(s, part, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                let set = g.constraint.allowed_set(0);
                let inside = set.intersect(&set_of(part));
                let parts: Vec<Constraint> = [inside.clone(), set.minus(&inside)]
                    .iter()
                    .map(|p| g.constraint.restrict(0, p))
                    .filter(|c| c.count() > 0)
                    .collect();
                let out = split(&g, &parts).unwrap();
                same_weight(&v, &[g], &out, seed)?;
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "ground_logvar" => runner
            .run(&(spec(), any::<u64>()), |(s, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                let out = ground_logvar(&g, s.arity - 1);
                prop_assert_eq!(
                    out.len(),
                    g.constraint
                        .expand()
                        .iter()
                        .map(|t| t[s.arity - 1])
                        .collect::<BTreeSet<_>>()
                        .len()
                );
                same_weight(&v, &[g], &out, seed)?;
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "count_convert" => runner
            .run(&(spec(), any::<u64>()), |(s, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                if let Ok(out) = count_convert(&v, &g, s.arity - 1) {
                    same_weight(&v, &[g], &[out], seed)?;
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "count_convert_pair" => runner
            .run(
                &(
                    1u8..8,
                    prop::sample::select(vec![P, Q]),
                    any::<bool>(),
                    any::<u64>(),
                    any::<u64>(),
                ),
                |(mask, rel, extra, tseed, seed)| {
                    let v = vocab();
                    let vars = vec![Logvar::new("X", 0, 3), Logvar::new("Y", 0, 3)];
                    let c = Constraint::product(vars, vec![Some(set_of(mask)); 2], [(0, 1)]);
                    let mut args = vec![atom(rel, &[Term::Var(0)]), atom(rel, &[Term::Var(1)])];
                    if extra {
                        args.insert(1, atom(P, &[Term::Const(0)]));
                    }
                    let g = random_parfactor(&v, "g", c, args, tseed, false);
                    let out = count_convert_pair(&v, &g, 0, 1).unwrap();
                    same_weight(&v, &[g], &[out], seed)?;
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
        "expand" => runner
            .run(&(spec(), 0usize..3, any::<u64>()), |(s, pick, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                if let Ok(c) = count_convert(&v, &g, s.arity - 1) {
                    let (k, crv) = c
                        .args
                        .iter()
                        .enumerate()
                        .find_map(|(k, a)| match a {
                            Arg::Count(crv) => Some((k, crv.clone())),
                            _ => None,
                        })
                        .unwrap();
                    let consts: Vec<u32> = crv.over.allowed_set(0).iter().collect();
                    let out = expand(&v, &c, k, consts[pick % consts.len()]).unwrap();
                    same_weight(&v, &[c], &[out], seed)?;
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "multiply" => runner
            .run(
                &(spec(), 0usize..2, any::<u64>(), any::<u64>()),
                |(s, k, tseed, seed)| {
                    let v = vocab();
                    let g1 = build(&v, &s);
                    let c2 = g1.constraint.project(&[0]);
                    let args = vec![[atom(P, &[Term::Var(0)]), atom(Q, &[Term::Var(0)])][k].clone()];
                    let g2 = random_parfactor(&v, "h", c2, args, tseed, false);
                    // a non-uniform share of g2 per g1 instance is a precondition failure
                    if let Ok(out) = multiply(&v, &g1, &g2) {
                        same_weight(&v, &[g1, g2], &[out], seed)?;
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
        "sum_out_atom" => runner
            .run(&(spec(), any::<u64>()), |(s, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                let full = g
                    .args
                    .iter()
                    .position(|a| matches!(a, Arg::Atom(x) if x.vars().len() == s.arity));
                if let Some(i) = full {
                    if let Ok(out) = sum_out(&v, &g, i) {
                        let elim = atoms_of(&[Parfactor {
                            args: vec![g.args[i].clone()],
                            table: vec![0.0; g.args[i].size(&v)],
                            ..g.clone()
                        }]);
                        marginal_weight(&v, &[g], &[out], &elim, seed)?;
                    }
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "sum_out_counting" => runner
            .run(
                &(1u8..8, prop::sample::select(vec![P, Q]), any::<u64>(), any::<u64>()),
                |(mask, rel, tseed, seed)| {
                    let v = vocab();
                    let c = Constraint::product(vec![Logvar::new("X", 0, 3)], vec![Some(set_of(mask))], []);
                    let g = random_parfactor(
                        &v,
                        "g",
                        c,
                        vec![atom(rel, &[Term::Var(0)]), atom(R, &[Term::Const(0), Term::Const(1)])],
                        tseed,
                        true,
                    );
                    let converted = count_convert(&v, &g, 0).unwrap();
                    let out = sum_out(&v, &converted, 0).unwrap();
                    let Arg::Count(crv) = &converted.args[0] else {
                        unreachable!()
                    };
                    let elim: BTreeSet<GroundAtom> = crv.ground_atoms().into_iter().collect();
                    marginal_weight(&v, &[g], &[out], &elim, seed)?;
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
        "count_normalise" => runner
            .run(&(spec(), any::<u64>()), |(s, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                let out = count_normalise(&g, &[0]).unwrap();
                same_weight(&v, &[g], &out, seed)?;
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "merge_duplicates" => runner
            .run(&(spec(), any::<u64>()), |(s, seed)| {
                let v = vocab();
                let mut spec2 = s.clone();
                spec2.args.push(s.args[0]);
                let g = build(&v, &spec2);
                let out = merge_duplicates(&v, g.clone());
                prop_assert!(out.args.len() < g.args.len());
                same_weight(&v, &[g], &[out], seed)?;
                Ok(())
            })
            .map_err(|e| e.to_string()),
        "absorb" => runner
            .run(&(spec(), 0u32..3, 0usize..2, any::<u64>()), |(s, c, value, seed)| {
                let v = vocab();
                let g = build(&v, &s);
                let item = Evidence::ground(P, vec![c], value);
                let out = absorb(&v, &g, &item).unwrap();
                let observed = GroundAtom { rel: P, args: vec![c] };
                let mut atoms = atoms_of(std::slice::from_ref(&g));
                atoms.extend(atoms_of(&out));
                for mut a in samples(&v, &atoms, seed, 32) {
                    a.insert(observed.clone(), value);
                    let (x, y) = (
                        ground_ln_weight(&v, std::slice::from_ref(&g), &a),
                        ground_ln_weight(&v, &out, &a),
                    );
                    prop_assert!(close(x, y), "{x} vs {y}");
                }
                prop_assert!(atoms_of(&out).iter().all(|a| *a != observed));
                Ok(())
            })
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown operator {other}")),
    }
}
