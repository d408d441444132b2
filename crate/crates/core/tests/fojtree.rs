use std::collections::BTreeSet;

use liftedq::bench::{bench_queries, example_evidence, gen_model, Family};
use liftedq::fojtree::{construct, ljt_answer, FoJtree};
use liftedq::limits::Limits;
use liftedq::lve::{JustDiff, Trace};
use liftedq::model::parse_model;
use liftedq::oracle::{ground_model, ve_marginal};
use liftedq::{Evidence, GroundAtom, Model, Query};

fn rel(m: &Model, name: &str) -> usize {
    m.vocab.relation_id(name).unwrap()
}

#[test]
fn ljt_matches_oracle() {
    let limits = Limits::default();
    for (family, n) in [(Family::Gex, 2), (Family::Gex, 3), (Family::Gexp, 2), (Family::Gexp, 3), (Family::Gl, 2)] {
        let m = gen_model(family, n).unwrap();
        for ev in [Evidence::default(), example_evidence(&m).unwrap()] {
            let g = ground_model(&m, &ev, &limits).unwrap();
            for q in bench_queries(&m, None) {
                let want = ve_marginal(&g, &q, &limits).unwrap();
                let mut t = Trace::default();
                let got = ljt_answer(&m, &q, &ev, JustDiff::Ground, &limits, &mut t).unwrap();
                assert!(got.max_abs_diff(&want) < 1e-9, "{:?} {}", family, q.display(&m.vocab));
            }
        }
    }
}

#[test]
fn every_covering_cluster_gives_the_same_answer() {
    let limits = Limits::default();
    let m = gen_model(Family::Gex, 3).unwrap();
    let mut j = construct(&m);
    j.enter_evidence(&example_evidence(&m).unwrap()).unwrap();
    j.pass_messages(JustDiff::Ground, &limits).unwrap();
    let q = Query::single(GroundAtom { rel: rel(&m, "Smokes"), args: vec![0] });
    let covering = j.covering(rel(&m, "Smokes"));
    assert_eq!(covering.len(), 3);
    let answers: Vec<_> = covering
        .iter()
        .map(|&c| j.answer_at(c, &q, JustDiff::Ground, &limits, &mut Trace::default()).unwrap())
        .collect();
    for a in &answers[1..] {
        assert!(a.max_abs_diff(&answers[0]) < 1e-9);
    }
}

#[test]
fn messages_eliminate_the_non_separator_prvs() {
    let m = gen_model(Family::Gex, 4).unwrap();
    let mut j = construct(&m);
    j.pass_messages(JustDiff::Ground, &Limits::default()).unwrap();
    let smokes = rel(&m, "Smokes");
    let mut sums: BTreeSet<String> = BTreeSet::new();
    for line in &j.trace.lines {
        if line.op == "sum_out" {
            sums.insert(line.target.split('(').next().unwrap().to_string());
        }
    }
    assert_eq!(sums, ["Asthma", "Cancer", "Friends"].iter().map(|s| s.to_string()).collect());
    assert_eq!(j.trace.count("ground_logvar"), 0);
    for c in &j.nodes {
        for msg in c.inbox.values() {
            assert!(msg.iter().all(|g| g.args.iter().all(|a| a.rel() == smokes)));
        }
    }
}

#[test]
fn evidence_reaches_only_covering_clusters() {
    let m = gen_model(Family::Gex, 3).unwrap();
    let before = construct(&m);
    let mut j = before.clone();
    let ev = Evidence { items: vec![Evidence::ground(rel(&m, "Asthma"), vec![0], 0)] };
    j.enter_evidence(&ev).unwrap();
    let changed: Vec<usize> = (0..j.nodes.len())
        .filter(|&i| {
            let names = |t: &FoJtree| t.nodes[i].local.iter().map(|g| (g.name.clone(), g.table.clone())).collect::<Vec<_>>();
            names(&j) != names(&before)
        })
        .collect();
    assert_eq!(changed.len(), 1);
    assert!(j.nodes[changed[0]].prvs.contains(&rel(&m, "Asthma")));

    let mut k = before.clone();
    k.enter_evidence(&Evidence::default()).unwrap();
    assert_eq!(k.dump(), before.dump());
}

#[test]
fn verifier_reports_violations_with_witnesses() {
    let m = gen_model(Family::Gex, 2).unwrap();
    let j = construct(&m);
    assert!(j.verify(&m).passed());

    // g0 moved into a cluster without Friends
    let mut bad = j.clone();
    let home = bad.nodes.iter().position(|c| c.local.iter().any(|g| g.name == "g0")).unwrap();
    let g0 = bad.nodes[home].local.iter().position(|g| g.name == "g0").unwrap();
    let g = bad.nodes[home].local.remove(g0);
    let other = bad.nodes.iter().position(|c| !c.prvs.contains(&rel(&m, "Friends"))).unwrap();
    bad.nodes[other].local.push(g);
    let r = bad.verify(&m);
    assert!(!r.check("partition").unwrap().passed);
    assert_eq!(r.check("partition").unwrap().witness.as_deref(), Some("g0"));

    // path C1 - C2 - C3 with Smokes missing in the middle
    let s = rel(&m, "Smokes");
    let clusters = vec![
        BTreeSet::from([s, rel(&m, "Asthma")]),
        BTreeSet::from([rel(&m, "Friends")]),
        BTreeSet::from([s, rel(&m, "Cancer")]),
    ];
    let path = FoJtree::from_parts(m.vocab.clone(), clusters, vec![(0, 1), (1, 2)], vec![vec![]; 3]);
    let r = path.verify(&m);
    assert!(!r.check("running_intersection").unwrap().passed);
    assert_eq!(r.check("running_intersection").unwrap().witness.as_deref(), Some("Smokes"));
}

#[test]
fn single_parfactor_model_is_one_cluster() {
    let m = parse_model("domain D = {a, b};\nprv P(D);\nparfactor g (X:D) on P(X)\n  table { (true)=2; (false)=1; };\n").unwrap();
    let j = construct(&m);
    assert_eq!(j.nodes.len(), 1);
    assert!(j.edges.is_empty());
    let q = Query::single(GroundAtom { rel: 0, args: vec![1] });
    let d = ljt_answer(&m, &q, &Evidence::default(), JustDiff::Ground, &Limits::default(), &mut Trace::default()).unwrap();
    assert!((d.probs[0] - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn observed_query_is_deterministic() {
    let m = gen_model(Family::Gex, 3).unwrap();
    let ev = example_evidence(&m).unwrap();
    let q = Query::single(GroundAtom { rel: rel(&m, "Smokes"), args: vec![1] });
    let d = ljt_answer(&m, &q, &ev, JustDiff::Ground, &Limits::default(), &mut Trace::default()).unwrap();
    assert_eq!(d.probs, vec![1.0, 0.0]);
}

#[test]
fn dump_lists_clusters_and_edges() {
    let m = gen_model(Family::Gex, 2).unwrap();
    let text = construct(&m).dump();
    assert_eq!(text.lines().filter(|l| l.starts_with("parcluster")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("edge")).count(), 2);
    assert!(text.contains("separator {Smokes(person)}"));
}
