use liftedq::bench::{bench_queries, example_evidence, gen_model, Family};
use liftedq::limits::Limits;
use liftedq::model::{gr_size, parse_model, parse_queries};
use liftedq::oracle::{
    brute_log_partition, brute_marginals, ground_model, jt_marginals, ve_log_partition, ve_marginal,
};
use liftedq::{Evidence, Model};

fn agree_all(m: &Model, ev: &Evidence) {
    let limits = Limits::default();
    let g = ground_model(m, ev, &limits).unwrap();
    let queries = bench_queries(m, None);
    let jt = jt_marginals(&g, &queries, &limits).unwrap();
    let ve: Vec<_> = queries.iter().map(|q| ve_marginal(&g, q, &limits).unwrap()).collect();
    for (v, j) in ve.iter().zip(&jt) {
        assert!(v.max_abs_diff(j) < 1e-9);
    }
    // the large family exceeds the enumeration guard
    if let Ok(brute) = brute_marginals(&g, &queries, &limits) {
        for (b, v) in brute.iter().zip(&ve) {
            assert!(b.max_abs_diff(v) < 1e-9);
        }
        let zb = brute_log_partition(&g, &limits).unwrap();
        let zv = ve_log_partition(&g, &limits).unwrap();
        assert!((zb - zv).abs() < 1e-9);
    }
}

#[test]
fn gex_grounding_counts() {
    let m = gen_model(Family::Gex, 2).unwrap();
    let g = ground_model(&m, &Evidence::default(), &Limits::default()).unwrap();
    assert_eq!(g.factors.len(), 12);
    assert_eq!(g.randvars.len(), 10);
    for n in [2u64, 3, 5, 10] {
        let m = gen_model(Family::Gex, n as usize).unwrap();
        assert_eq!(gr_size(&m), 2 * n * (n - 1) + 4 * n);
        let m = gen_model(Family::Gexp, n as usize).unwrap();
        assert_eq!(gr_size(&m), 2 * n * n + 4 * n);
    }
}

#[test]
fn large_family_grounding_sizes() {
    assert_eq!(gr_size(&gen_model(Family::Gl, 2).unwrap()), 52);
    assert_eq!(gr_size(&gen_model(Family::Glp, 2).unwrap()), 56);
    assert_eq!(gen_model(Family::Gl, 2).unwrap().parfactors.len(), 20);
}

#[test]
fn single_factor_marginal() {
    let m = parse_model("prv A(); parfactor g () on A() table { (true)=2; (false)=1; };").unwrap();
    let limits = Limits::default();
    let g = ground_model(&m, &Evidence::default(), &limits).unwrap();
    let q = parse_queries("A()", &m.vocab).unwrap();
    let d = brute_marginals(&g, &q, &limits).unwrap();
    assert!((d[0].probs[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((brute_log_partition(&g, &limits).unwrap() - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn chain_and_disconnected_components() {
    let text = "prv A(), B(), C(), D();
        parfactor f1 () on A(), B() table { (true,true)=2; (true,false)=1; (false,true)=0.5; (false,false)=3; };
        parfactor f2 () on B(), C() table { (true,true)=1; (true,false)=4; (false,true)=2; (false,false)=1; };
        parfactor f3 () on D() table { (true)=7; (false)=1; };";
    let m = parse_model(text).unwrap();
    agree_all(&m, &Evidence::default());
    let limits = Limits::default();
    let g = ground_model(&m, &Evidence::default(), &limits).unwrap();
    let q = parse_queries("A()", &m.vocab).unwrap();
    let a = ve_marginal(&g, &q[0], &limits).unwrap();
    let m2 = parse_model(&text.replace("(true)=7", "(true)=0.1")).unwrap();
    let g2 = ground_model(&m2, &Evidence::default(), &limits).unwrap();
    let b = ve_marginal(&g2, &q[0], &limits).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
}

#[test]
fn engines_agree_on_benchmark_models() {
    for (family, n) in [(Family::Gex, 2), (Family::Gex, 3), (Family::Gexp, 2), (Family::Gl, 2)] {
        let m = gen_model(family, n).unwrap();
        agree_all(&m, &Evidence::default());
        agree_all(&m, &example_evidence(&m).unwrap());
    }
}

#[test]
fn evidence_zeroes_rows_and_conditions() {
    let m = gen_model(Family::Gex, 2).unwrap();
    let limits = Limits::default();
    let ev = liftedq::model::parse_evidence("Smokes(p2)=true;", &m.vocab).unwrap();
    let g = ground_model(&m, &ev, &limits).unwrap();
    let s = g.randvar(&m.vocab.parse_ground("Smokes(p2)").unwrap()).unwrap();
    for f in g.factors.iter().filter(|f| f.factor.vars.contains(&s)) {
        let pos = f.factor.vars.iter().position(|&v| v == s).unwrap();
        for (i, x) in f.factor.table.iter().enumerate() {
            let vals = liftedq::model::row_values(&f.factor.card, i);
            if vals[pos] == 1 {
                assert_eq!(*x, f64::NEG_INFINITY);
            }
        }
    }
    // conditioning equals the ratio of joint sums
    let q = parse_queries("Cancer(p1)", &m.vocab).unwrap();
    let cond = brute_marginals(&g, &q, &limits).unwrap()[0].probs[0];
    let ev2 = liftedq::model::parse_evidence("Smokes(p2)=true; Cancer(p1)=true;", &m.vocab).unwrap();
    let z_e = brute_log_partition(&g, &limits).unwrap();
    let z_qe = brute_log_partition(&ground_model(&m, &ev2, &limits).unwrap(), &limits).unwrap();
    assert!((cond - (z_qe - z_e).exp()).abs() < 1e-12);
}

#[test]
fn exchangeable_constants() {
    let m = gen_model(Family::Gex, 3).unwrap();
    let limits = Limits::default();
    let g = ground_model(&m, &Evidence::default(), &limits).unwrap();
    let q = parse_queries("Asthma(p1)\nAsthma(p3)\nFriends(p1,p2)\nFriends(p3,p1)", &m.vocab).unwrap();
    let d = brute_marginals(&g, &q, &limits).unwrap();
    assert!(d[0].max_abs_diff(&d[1]) < 1e-12);
    assert!(d[2].max_abs_diff(&d[3]) < 1e-12);
}

#[test]
fn guards_surface_as_errors() {
    let m = gen_model(Family::Gex, 1000).unwrap();
    let err = ground_model(&m, &Evidence::default(), &Limits::default()).unwrap_err();
    assert!(matches!(err, liftedq::Error::Guard(_)));
    let m = gen_model(Family::Gex, 8).unwrap();
    let g = ground_model(&m, &Evidence::default(), &Limits::default()).unwrap();
    let q = bench_queries(&m, None);
    assert!(matches!(brute_marginals(&g, &q, &Limits::default()), Err(liftedq::Error::Guard(_))));
}

#[test]
fn zero_evidence_is_reported() {
    let m = parse_model("prv A(); parfactor g () on A() table { (true)=0; (false)=1; }; ").unwrap();
    let limits = Limits::default();
    let ev = liftedq::model::parse_evidence("A()=true;", &m.vocab).unwrap();
    let g = ground_model(&m, &ev, &limits).unwrap();
    let q = parse_queries("A()", &m.vocab).unwrap();
    assert_eq!(brute_marginals(&g, &q, &limits).unwrap_err(), liftedq::Error::ZeroEvidence);
    assert_eq!(ve_marginal(&g, &q[0], &limits).unwrap_err(), liftedq::Error::ZeroEvidence);
}

#[test]
fn tree_model_cliques_are_factor_scopes() {
    let text = "prv A(), B(), C();
        parfactor f1 () on A(), B() table { (true,true)=2; (true,false)=1; (false,true)=0.5; (false,false)=3; };
        parfactor f2 () on B(), C() table { (true,true)=1; (true,false)=4; (false,true)=2; (false,false)=1; };";
    let m = parse_model(text).unwrap();
    let limits = Limits::default();
    let g = ground_model(&m, &Evidence::default(), &limits).unwrap();
    let tree = liftedq::oracle::JunctionTree::build(&g, &[], &limits).unwrap();
    let mut cliques = tree.cliques.clone();
    cliques.sort();
    let mut scopes: Vec<Vec<usize>> = g.factors.iter().map(|f| f.factor.vars.clone()).collect();
    scopes.sort();
    assert_eq!(cliques, scopes);
    assert!((tree.log_z - brute_log_partition(&g, &limits).unwrap()).abs() < 1e-12);
}
