//! Acceptance criteria, one pass/fail line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liftedq::bench::{bench_queries, example_evidence, gen_model, Family};
use liftedq::engines::{cross_engine_check, run, Engine, RunOptions};
use liftedq::fojtree::construct;
use liftedq::limits::Limits;
use liftedq::ljtkc::{precompute, LjtkcOptions};
use liftedq::logspace;
use liftedq::lve::{lve_answer, JustDiff, Trace};
use liftedq::model::{bool_range, gr_size};
use liftedq::oracle::{brute_log_partition, ground_model};
use liftedq::wfomc::{brute_wmc, compile, count, Clause, Literal, WfomcProblem};
use liftedq::{Constraint, Domain, Error, Evidence, GroundAtom, Logvar, Model, Query, Relation, Term, ValueSet, Vocab};

/// Engine agreement on marginals.
const AGREEMENT: f64 = 1e-9;
/// Relative tolerance of weighted model counts and of Σ numerators = denominator.
const WMC_REL: f64 = 1e-9;
/// Wall-clock budget of the soundness suite.
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(60);
/// Slack on the growth of query-answering arithmetic beyond linear.
const LINEAR_SLACK: f64 = 1.05;
/// Random instances per LVE operator.
const OPERATOR_CASES: u32 = 200;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(m: &Model, set: &BTreeSet<usize>) -> BTreeSet<String> {
    set.iter().map(|&r| m.vocab.relations[r].name.clone()).collect()
}

fn grounding_sizes() -> Verdict {
    let want = [(Family::Gex, 2, 12), (Family::Gex, 1000, 2_002_000), (Family::Gexp, 2, 16), (Family::Gexp, 1000, 2_004_000)];
    let mut seen = Vec::new();
    for (family, n, size) in want {
        let got = gr_size(&gen_model(family, n).map_err(|e| e.to_string())?);
        ensure(got == size, || format!("{} n={n}: {got} != {size}", family.name()))?;
        seen.push(format!("{} n={n}: {got}", family.name()));
    }
    Ok(seen.join(", "))
}

fn jtree_shape() -> Verdict {
    let m = gen_model(Family::Gex, 3).map_err(|e| e.to_string())?;
    let j = construct(&m);
    let mut sets: Vec<Vec<String>> = j.nodes.iter().map(|c| names(&m, &c.prvs).into_iter().collect()).collect();
    sets.sort();
    let want = vec![vec!["Asthma", "Smokes"], vec!["Cancer", "Smokes"], vec!["Friends", "Smokes"]];
    ensure(sets == want, || format!("gex parclusters {sets:?}"))?;
    ensure(j.edges.len() == 2, || format!("gex has {} edges", j.edges.len()))?;
    for &(a, b) in &j.edges {
        let sep = names(&m, &j.separator(a, b));
        ensure(sep == BTreeSet::from(["Smokes".to_string()]), || format!("separator {sep:?}"))?;
    }
    let report = j.verify(&m);
    ensure(report.passed(), || format!("gex properties {:?}", report.checks))?;
    let l = gen_model(Family::Gl, 2).map_err(|e| e.to_string())?;
    let jl = construct(&l);
    let largest = jl.nodes.iter().map(|c| c.prvs.len()).max().unwrap_or(0);
    ensure(jl.nodes.len() == 6 && largest == 5, || format!("gl: {} parclusters, largest {largest}", jl.nodes.len()))?;
    ensure(jl.verify(&l).passed(), || "gl properties violated".into())?;
    Ok("gex 3 parclusters joined by {Smokes}, gl 6 parclusters of at most 5 PRVs".into())
}

/// Benchmark corpus instances at oracle sizes, with and without the
/// example evidence.
fn corpus() -> Vec<(String, Model, Evidence)> {
    let mut out = Vec::new();
    for (family, n) in [(Family::Gex, 2), (Family::Gex, 3), (Family::Gexp, 2), (Family::Gexp, 3), (Family::Gl, 2)] {
        let m = gen_model(family, n).expect("benchmark model");
        let e = example_evidence(&m).expect("example evidence");
        out.push((format!("{} n={n}", family.name()), m.clone(), Evidence::default()));
        out.push((format!("{} n={n} +evidence", family.name()), m, e));
    }
    out
}

fn soundness() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    let mut guarded = Vec::new();
    for (name, m, e) in corpus() {
        let r = cross_engine_check(&m, &bench_queries(&m, None), &e, &RunOptions::default());
        ensure(r.passed(), || format!("{name}: {:?}", r.flagged))?;
        worst = worst.max(r.max_deviation);
        for c in &r.cells {
            match &c.result {
                Ok(_) => cells += 1,
                Err(Error::Guard(_)) => guarded.push(format!("{} on {name}", c.engine)),
                Err(err) => return Err(format!("{name}: {} failed: {err}", c.engine)),
            }
        }
        // only the enumeration oracle may hit its guard, and only on the large family
        ensure(guarded.iter().all(|g| g.starts_with("oracle on gl")), || format!("guard trips: {guarded:?}"))?;
    }
    let elapsed = start.elapsed();
    ensure(worst <= AGREEMENT, || format!("max deviation {worst:e}"))?;
    ensure(elapsed < SOUNDNESS_BUDGET, || format!("took {elapsed:?}"))?;
    guarded.sort();
    guarded.dedup();
    Ok(format!(
        "{cells} answers, max deviation {worst:.1e}, {:.1}s{}",
        elapsed.as_secs_f64(),
        if guarded.is_empty() { String::new() } else { format!(", guarded: {}", guarded.join(", ")) }
    ))
}

fn unary_vocab(n: usize, rels: &[(&str, usize)]) -> Arc<Vocab> {
    Arc::new(Vocab {
        domains: vec![Domain { name: "D".into(), constants: (0..n).map(|i| format!("d{i}")).collect() }],
        relations: rels
            .iter()
            .map(|&(name, arity)| Relation { name: name.into(), params: vec![0; arity], range: bool_range() })
            .collect(),
        ranges: Vec::new(),
    })
}

fn clause(n: usize, distinct: bool, restrict: Option<u32>, literals: Vec<Literal>) -> Clause {
    let n = n as u32;
    let vars = vec![Logvar::new("X", 0, n), Logvar::new("Y", 0, n)];
    let allowed = vec![restrict.map(|c| ValueSet::new((0..n).filter(|&k| k != c).collect())), None];
    let pairs: Vec<(usize, usize)> = if distinct { vec![(0, 1)] } else { Vec::new() };
    Clause { constraint: Constraint::product(vars, allowed, pairs), literals }
}

fn lit(pred: usize, terms: &[Term], positive: bool) -> Literal {
    Literal { pred, terms: terms.to_vec(), positive }
}

/// A seeded random clausal theory over `S/1, T/1, R/2`.
fn random_theory(seed: u64) -> WfomcProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..4);
    let mut p = WfomcProblem::reduce(&unary_vocab(n, &[("S", 1), ("T", 1), ("R", 2)]), &[]).expect("boolean vocab");
    for pred in &mut p.predicates {
        pred.w_true = rng.gen_range(0.2f64..3.0).ln();
        pred.w_false = rng.gen_range(0.2f64..3.0).ln();
    }
    let term = |rng: &mut ChaCha8Rng| match rng.gen_range(0..4) {
        0 => Term::Var(0),
        1 => Term::Var(1),
        _ => Term::Const(rng.gen_range(0..n as u32)),
    };
    for _ in 0..rng.gen_range(1..4) {
        let literals = (0..rng.gen_range(1..4))
            .map(|_| {
                let pred = rng.gen_range(0..3);
                let terms: Vec<Term> = (0..if pred == 2 { 2 } else { 1 }).map(|_| term(&mut rng)).collect();
                lit(pred, &terms, rng.gen_bool(0.5))
            })
            .collect();
        let restrict = rng.gen_bool(0.3).then(|| rng.gen_range(0..n as u32));
        p.clauses.push(clause(n, rng.gen_bool(0.5), restrict, literals));
    }
    p
}

fn wfomc_correctness() -> Verdict {
    let limits = Limits::default();
    let (x, y) = (Term::Var(0), Term::Var(1));
    let mut theories: Vec<(String, WfomcProblem, f64)> = Vec::new();
    for (family, ev) in [(Family::Gex, false), (Family::Gex, true), (Family::Gexp, false), (Family::Gexp, true)] {
        let m = gen_model(family, 2).map_err(|e| e.to_string())?;
        let e = if ev { example_evidence(&m).map_err(|e| e.to_string())? } else { Evidence::default() };
        let mut p = WfomcProblem::reduce(&m.vocab, &m.parfactors).map_err(|e| e.to_string())?;
        p.add_evidence(&e).map_err(|e| e.to_string())?;
        // exhaustive enumeration of the original randvars
        let g = ground_model(&m, &e, &limits).map_err(|e| e.to_string())?;
        let want = brute_log_partition(&g, &limits).map_err(|e| e.to_string())?;
        theories.push((format!("{} n=2{}", family.name(), if ev { " +evidence" } else { "" }), p, want));
    }
    let mut named = Vec::new();
    let v = unary_vocab(4, &[("S", 1)]);
    let mut amo = WfomcProblem::reduce(&v, &[]).map_err(|e| e.to_string())?;
    amo.clauses.push(clause(4, true, None, vec![lit(0, &[x], true), lit(0, &[y], true)]));
    named.push(("at most one false", amo));
    let v = unary_vocab(3, &[("S", 1), ("R", 2)]);
    let mut smokers = WfomcProblem::reduce(&v, &[]).map_err(|e| e.to_string())?;
    smokers.predicates[0].w_true = 2f64.ln();
    smokers.predicates[1].w_false = 0.5f64.ln();
    smokers.clauses.push(clause(3, false, None, vec![lit(0, &[x], false), lit(1, &[x, y], false), lit(0, &[y], true)]));
    named.push(("friends of smokers smoke", smokers));
    let v = unary_vocab(3, &[("S", 1), ("T", 1)]);
    let mut implies = WfomcProblem::reduce(&v, &[]).map_err(|e| e.to_string())?;
    implies.predicates[1].w_true = 3f64.ln();
    implies.clauses.push(clause(3, false, Some(0), vec![lit(0, &[x], false), lit(1, &[x], true)]));
    implies.clauses.push(clause(3, false, None, vec![lit(0, &[Term::Const(1)], true)]));
    named.push(("restricted implication with a unit", implies));
    for (name, p) in named {
        let want = brute_wmc(&p, limits.brute_bits).map_err(|e| e.to_string())?;
        theories.push((name.to_string(), p, want));
    }
    for seed in 0..20 {
        let p = random_theory(seed);
        let want = brute_wmc(&p, limits.brute_bits).map_err(|e| e.to_string())?;
        theories.push((format!("random #{seed}"), p, want));
    }
    for (name, p, want) in &theories {
        let c = compile(p, &limits).and_then(|c| c.smooth(p)).map_err(|e| format!("{name}: {e}"))?;
        let v = c.validate();
        ensure(v.ok(), || format!("{name}: invalid circuit: {:?}", v.witness))?;
        let got = c.eval(p);
        ensure(logspace::close(got, *want, WMC_REL), || format!("{name}: ln {got} vs {want}"))?;
    }
    Ok(format!("{} theories match exhaustive counts, all circuits decomposable and deterministic", theories.len()))
}

fn counters() -> Verdict {
    let mut seen = Vec::new();
    for n in [10, 100, 1000] {
        let m = gen_model(Family::Gex, n).map_err(|e| e.to_string())?;
        let p = precompute(&m, &Evidence::default(), &LjtkcOptions::default()).map_err(|e| e.to_string())?;
        for q in bench_queries(&m, None) {
            p.answer(&q).map_err(|e| e.to_string())?;
        }
        ensure(p.jtree.trace.count("ground_logvar") == 0, || format!("n={n}: message passing grounds"))?;
        seen.push((n, p.jtree.trace.len(), p.circuit_nodes() + p.numerator_nodes(), p.ops()));
    }
    ensure(seen.iter().all(|s| s.1 == seen[0].1), || format!("LVE operator counts {seen:?}"))?;
    ensure(seen.iter().all(|s| s.2 == seen[0].2), || format!("circuit node counts {seen:?}"))?;
    // operations per added domain element must not increase with n
    let growth = |i: usize| (seen[i + 1].3 as f64 - seen[i].3 as f64) / (seen[i + 1].0 - seen[i].0) as f64;
    ensure(growth(0) > 0.0, || format!("arithmetic does not grow: {seen:?}"))?;
    ensure(growth(1) <= growth(0) * LINEAR_SLACK, || format!("arithmetic grows faster than linearly: {seen:?}"))?;

    let mut lve_ground = Vec::new();
    for n in [2, 4, 8] {
        let m = gen_model(Family::Gex, n).map_err(|e| e.to_string())?;
        let smokes = m.vocab.relation_id("Smokes").expect("Smokes");
        let q = Query::single(GroundAtom { rel: smokes, args: vec![0] });
        let mut trace = Trace::default();
        lve_answer(&m, &q, &Evidence::default(), JustDiff::Ground, &Limits::default(), &mut trace)
            .map_err(|e| e.to_string())?;
        let kc = run(Engine::Ljtkc, &m, &q, &Evidence::default(), &RunOptions::default()).map_err(|e| e.to_string())?;
        ensure(kc.trace.count("ground_logvar") == 0, || format!("ljtkc grounds at n={n}"))?;
        lve_ground.push(trace.count("ground_logvar"));
    }
    ensure(lve_ground.windows(2).all(|w| w[0] < w[1]), || format!("lve ground_logvar counts {lve_ground:?}"))?;
    Ok(format!(
        "ljtkc gex n=10/100/1000: {} LVE ops, {} circuit nodes, arithmetic {}/{}/{}; lve Smokes(p1) ground_logvar n=2/4/8: {:?}, ljtkc: 0",
        seen[0].1, seen[0].2, seen[0].3, seen[1].3, seen[2].3, lve_ground
    ))
}

/// Largest log-space gap between Σ numerators and the denominator.
fn numerator_gap(p: &WfomcProblem, term: &GroundAtom, den: f64) -> Result<f64, String> {
    let limits = Limits::default();
    let mut nums = Vec::new();
    for v in 0..2 {
        let mut q = p.clone();
        q.add_unit(term, v);
        nums.push(count(&q, &limits).map_err(|e| e.to_string())?.ln);
    }
    Ok((logspace::sum(nums) - den).abs() / den.abs().max(1.0))
}

fn ratio_consistency() -> Verdict {
    let limits = Limits::default();
    let (mut gap, mut spread): (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    for (name, m, e) in corpus() {
        let observed = e.ground_map().map_err(|e| e.to_string())?;
        let mut fokc = WfomcProblem::reduce(&m.vocab, &m.parfactors).map_err(|e| e.to_string())?;
        fokc.add_evidence(&e).map_err(|e| e.to_string())?;
        let fokc_den = count(&fokc, &limits).map_err(|e| e.to_string())?.ln;
        let p = precompute(&m, &e, &LjtkcOptions::default()).map_err(|e| e.to_string())?;
        for q in bench_queries(&m, None) {
            let t = &q.terms[0];
            if observed.contains_key(t) {
                continue;
            }
            gap = gap.max(numerator_gap(&fokc, t, fokc_den)?);
            let homes = p.jtree.covering(t.rel);
            let mut answers = Vec::new();
            for &i in &homes {
                let den = p.denominator(i).map_err(|e| e.to_string())?.ln;
                gap = gap.max(numerator_gap(&p.clusters[i].problem, t, den)?);
                answers.push(p.answer_at(i, &q).map_err(|e| format!("{name}: {e}"))?);
            }
            for a in &answers[1..] {
                spread = spread.max(a.max_abs_diff(&answers[0]));
            }
            checked += 1;
        }
    }
    ensure(gap <= WMC_REL, || format!("numerators miss the denominator by {gap:e}"))?;
    ensure(spread <= AGREEMENT, || format!("parcluster choice changes answers by {spread:e}"))?;
    Ok(format!("{checked} queries, numerator gap {gap:.1e}, parcluster spread {spread:.1e}"))
}

fn operator_soundness() -> Verdict {
    for op in common::OPERATORS {
        common::check_operator(op, OPERATOR_CASES).map_err(|e| format!("{op}: {e}"))?;
    }
    Ok(format!("{} operators x {OPERATOR_CASES} instances", common::OPERATORS.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("grounding sizes", grounding_sizes),
        ("FO jtree shape", jtree_shape),
        ("engine soundness", soundness),
        ("WFOMC correctness", wfomc_correctness),
        ("lifted-complexity counters", counters),
        ("ratio consistency", ratio_consistency),
        ("LVE operator soundness", operator_soundness),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                println!("criterion {} {name}: FAIL ({why})", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
