use liftedq::bench::{bench_queries, example_evidence, gen_model, Family};
use liftedq::limits::Limits;
use liftedq::lve::{lve_answer, JustDiff, Trace};
use liftedq::oracle::{ground_model, ve_marginal};
use liftedq::{Evidence, Model};

fn agrees(m: &Model, ev: &Evidence, policy: JustDiff) {
    let limits = Limits::default();
    let g = ground_model(m, ev, &limits).unwrap();
    for q in bench_queries(m, None) {
        let want = ve_marginal(&g, &q, &limits).unwrap();
        let mut trace = Trace::default();
        let got = lve_answer(m, &q, ev, policy, &limits, &mut trace)
            .unwrap_or_else(|e| panic!("{}: {e}", q.display(&m.vocab)));
        assert!(
            got.max_abs_diff(&want) < 1e-9,
            "{}: {:?} vs {:?}",
            q.display(&m.vocab),
            got.probs,
            want.probs
        );
    }
}

#[test]
fn matches_oracle_on_benchmark_models() {
    for (family, n) in [(Family::Gex, 2), (Family::Gex, 3), (Family::Gexp, 2), (Family::Gexp, 3), (Family::Gl, 2)] {
        let m = gen_model(family, n).unwrap();
        let ev = example_evidence(&m).unwrap();
        for policy in [JustDiff::Ground, JustDiff::Count] {
            agrees(&m, &Evidence::default(), policy);
            agrees(&m, &ev, policy);
        }
    }
}
