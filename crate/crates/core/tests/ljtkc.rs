use std::collections::BTreeSet;

use liftedq::bench::{bench_queries, example_evidence, gen_model, Family};
use liftedq::limits::Limits;
use liftedq::ljtkc::{ljtkc_answer, precompute, LjtkcOptions};
use liftedq::lve::{JustDiff, Trace};
use liftedq::model::{gr_instances, prv_instances, Arg};
use liftedq::oracle::{ground_model, universe_size, ve_log_partition, ve_marginal};
use liftedq::{Error, Evidence, GroundAtom, Model, Query};

fn agrees(m: &Model, ev: &Evidence) {
    let limits = Limits::default();
    let g = ground_model(m, ev, &limits).unwrap();
    let p = precompute(m, ev, &LjtkcOptions::default()).unwrap();
    for q in bench_queries(m, None) {
        let want = ve_marginal(&g, &q, &limits).unwrap();
        let got = p.answer(&q).unwrap_or_else(|e| panic!("{}: {e}", q.display(&m.vocab)));
        assert!(got.max_abs_diff(&want) < 1e-9, "{}: {:?} vs {:?}", q.display(&m.vocab), got.probs, want.probs);
    }
}

#[test]
fn matches_oracle_on_benchmark_models() {
    for (family, n) in [(Family::Gex, 2), (Family::Gex, 3), (Family::Gexp, 2), (Family::Gexp, 3), (Family::Gl, 2)] {
        let m = gen_model(family, n).unwrap();
        agrees(&m, &Evidence::default());
        agrees(&m, &example_evidence(&m).unwrap());
    }
}

/// Ground atoms mentioned by a set of parfactors.
fn mentioned(ps: &[liftedq::Parfactor]) -> BTreeSet<GroundAtom> {
    let mut out = BTreeSet::new();
    for g in ps {
        for a in &g.args {
            if let Arg::Atom(at) = a {
                out.extend(prv_instances(at, &g.constraint));
            }
        }
    }
    out
}

#[test]
fn denominators_equal_partition_function_up_to_free_atoms() {
    let limits = Limits::default();
    for n in [2, 3] {
        let m = gen_model(Family::Gex, n).unwrap();
        let g = ground_model(&m, &Evidence::default(), &limits).unwrap();
        let universe = universe_size(&m.vocab) as usize;
        let in_model = mentioned(&m.parfactors).len();
        let z = ve_log_partition(&g, &limits).unwrap() - (universe - in_model) as f64 * 2f64.ln();
        let p = precompute(&m, &Evidence::default(), &LjtkcOptions::default()).unwrap();
        assert_eq!(p.clusters.len(), 3);
        for i in 0..3 {
            let free = universe - mentioned(&p.clusters[i].submodel).len();
            let c = p.denominator(i).unwrap().ln - free as f64 * 2f64.ln();
            assert!((c - z).abs() < 1e-9, "n={n} C{}: {c} vs {z}", i + 1);
        }
        assert!(gr_instances(&m.parfactors[0]).len() == n * (n - 1));
    }
}

#[test]
fn answer_does_not_depend_on_the_parcluster() {
    for ev in [false, true] {
        let m = gen_model(Family::Gex, 3).unwrap();
        let e = if ev { example_evidence(&m).unwrap() } else { Evidence::default() };
        let p = precompute(&m, &e, &LjtkcOptions::default()).unwrap();
        let smokes = m.vocab.relation_id("Smokes").unwrap();
        let q = Query::single(GroundAtom { rel: smokes, args: vec![0] });
        let answers: Vec<_> = p.jtree.covering(smokes).into_iter().map(|i| p.answer_at(i, &q).unwrap()).collect();
        assert_eq!(answers.len(), 3);
        for a in &answers[1..] {
            assert!(a.max_abs_diff(&answers[0]) < 1e-9);
        }
    }
}

#[test]
fn observed_query_is_certain() {
    let m = gen_model(Family::Gex, 3).unwrap();
    let e = example_evidence(&m).unwrap();
    let obs = e.ground_map().unwrap();
    let (atom, &v) = obs.iter().next().unwrap();
    let mut trace = Trace::default();
    let d = ljtkc_answer(&m, &Query::single(atom.clone()), &e, JustDiff::Ground, &Limits::default(), &mut trace).unwrap();
    assert_eq!(d.probs[v], 1.0);
}

#[test]
fn multi_term_queries_are_rejected() {
    let m = gen_model(Family::Gex, 2).unwrap();
    let p = precompute(&m, &Evidence::default(), &LjtkcOptions::default()).unwrap();
    let q = Query { terms: vec![GroundAtom { rel: 0, args: vec![0] }, GroundAtom { rel: 0, args: vec![1] }] };
    assert_eq!(p.answer(&q).unwrap_err(), Error::MultiTermQuery);
}

#[test]
fn counters_do_not_grow_with_the_domain() {
    let mut seen = Vec::new();
    for n in [10, 100] {
        let m = gen_model(Family::Gex, n).unwrap();
        let p = precompute(&m, &Evidence::default(), &LjtkcOptions::default()).unwrap();
        assert_eq!(p.jtree.trace.count("ground_logvar"), 0);
        seen.push((p.jtree.trace.len(), p.circuit_nodes()));
    }
    assert_eq!(seen[0], seen[1]);
}
