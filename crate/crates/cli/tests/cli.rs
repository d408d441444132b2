use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn liftedq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liftedq")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn query(engine: &str, model: &str, queries: &str, evidence: Option<&str>) -> Output {
    let (m, q) = (data(model), data(queries));
    let mut args = vec!["query", "--engine", engine, "--model", &m, "--queries", &q];
    let e = evidence.map(data);
    if let Some(e) = &e {
        args.extend(["--evidence", e]);
    }
    liftedq(&args)
}

#[test]
fn coin_golden_is_two_thirds() {
    let o = query("oracle", "coin.lq", "coin.q", None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "query,value,probability\nA(),true,0.666666666667\nA(),false,0.333333333333\n");
}

#[test]
fn every_engine_reproduces_the_golden_file() {
    let golden = std::fs::read_to_string(data("gex2.golden.csv")).unwrap();
    for engine in ["oracle", "jt", "ve", "lve", "ljt", "fokc", "ljtkc"] {
        let o = query(engine, "gex2.lq", "gex2.q", None);
        assert_eq!(o.status.code(), Some(0), "{engine}");
        let got = stdout(&o);
        for (a, b) in got.lines().zip(golden.lines()).skip(1) {
            let (pa, pb) = (a.rsplit(',').next().unwrap(), b.rsplit(',').next().unwrap());
            let (x, y): (f64, f64) = (pa.parse().unwrap(), pb.parse().unwrap());
            assert!((x - y).abs() < 1e-11, "{engine}: {a} vs {b}");
            assert_eq!(a.rsplit_once(',').unwrap().0, b.rsplit_once(',').unwrap().0);
        }
        assert_eq!(got.lines().count(), golden.lines().count());
    }
}

#[test]
fn observed_query_is_certain() {
    let o = query("ljtkc", "running_example.lq", "running_example.q", Some("running_example.ev"));
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("\"Friends(eve,bob)\",true,1\n"), "{out}");
    assert!(out.contains("Smokes(bob),true,1\n"), "{out}");
}

#[test]
fn trace_lines_have_four_fields() {
    let path = std::env::temp_dir().join(format!("liftedq-trace-{}.csv", std::process::id()));
    let (m, q) = (data("gex2.lq"), data("gex2.q"));
    let p = path.to_string_lossy().into_owned();
    let o = liftedq(&["query", "--engine", "lve", "--model", &m, "--queries", &q, "--lve-justdiff=count", "--trace", &p]);
    assert_eq!(o.status.code(), Some(0));
    let trace = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(!trace.is_empty());
    for line in trace.lines() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 4, "{line}");
        f[3].parse::<u64>().unwrap();
    }
}

#[test]
fn exit_codes() {
    assert_eq!(liftedq(&["query", "--engine", "bogus"]).status.code(), Some(1));
    assert_eq!(liftedq(&["parse", &data("missing.lq")]).status.code(), Some(1));
    assert_eq!(liftedq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(liftedq(&["--help"]).status.code(), Some(0));
    assert_eq!(liftedq(&["parse", &data("coin.q")]).status.code(), Some(2));
    assert_eq!(query("ve", "coin.lq", "gex2.q", None).status.code(), Some(2));
    assert_eq!(query("ljtkc", "impossible.lq", "impossible.q", Some("impossible.ev")).status.code(), Some(3));
    assert_eq!(query("oracle", "wide.lq", "wide.q", None).status.code(), Some(4));
}

#[test]
fn parse_round_trips() {
    let o = liftedq(&["parse", &data("running_example.lq")]);
    assert_eq!(o.status.code(), Some(0));
    let path = std::env::temp_dir().join(format!("liftedq-print-{}.lq", std::process::id()));
    std::fs::write(&path, stdout(&o)).unwrap();
    let again = liftedq(&["parse", &path.to_string_lossy()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(stdout(&again), stdout(&o));
    let v = liftedq(&["validate", &data("running_example.lq"), "--evidence", &data("running_example.ev")]);
    assert_eq!(stdout(&v), "ok: 1 domains, 4 relations, 6 parfactors, 2 evidence items, gr_size 24\n");
}

#[test]
fn ground_counts_factors() {
    let o = liftedq(&["ground", &data("gex2.lq")]);
    let out = stdout(&o);
    assert!(out.starts_with("randvars 10\nfactors 12\n"), "{out}");
    assert_eq!(out.lines().count(), 2 + 12);
}

#[test]
fn jtree_matches_running_example() {
    let o = liftedq(&["jtree", &data("running_example.lq")]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.contains("{Smokes(person), Friends(person,person)}"));
    assert!(out.contains("{Smokes(person), Cancer(person)}"));
    assert_eq!(out.matches(": ok").count(), 4);
    let d = liftedq(&["jtree", "--dump", &data("running_example.lq"), "--evidence", &data("running_example.ev")]);
    let dump = stdout(&d);
    assert_eq!(dump.matches("edge ").count(), 2);
    assert!(dump.contains("message C"), "{dump}");
}

#[test]
fn compile_dump_is_stable() {
    let args = ["compile", "--dump", &data("gex2.lq")];
    let (a, b) = (liftedq(&args), liftedq(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let out = stdout(&a);
    assert!(out.starts_with("n"), "{out}");
    assert!(out.contains("decomposable true\ndeterministic true\n"));
}

#[test]
fn check_reports_agreement() {
    let (m, q, e) = (data("running_example.lq"), data("running_example.q"), data("running_example.ev"));
    let o = liftedq(&["check", "--model", &m, "--queries", &q, "--evidence", &e]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains('\t')).count(), 4 * 7);
    assert!(!out.contains("FLAG"));
}

#[test]
fn bench_emits_csv_and_gnuplot() {
    let path = std::env::temp_dir().join(format!("liftedq-bench-{}.dat", std::process::id()));
    let p = path.to_string_lossy().into_owned();
    let o = liftedq(&["bench", "--family", "gex", "--sizes", "2,3", "--engines", "ve,ljtkc", "--repetitions", "1", "--gnuplot", &p]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,n,gr_size,engine,query,median_ms,mean_ms,lve_ops,ground_logvar,circuit_nodes,circuit_ops,status,verified"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 2 * 4);
    assert!(rows.iter().all(|r| r.ends_with(",ok,true")));
    let plot = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(plot.matches("# ljtkc ").count(), 4);
    assert_eq!(liftedq(&["bench", "--family", "gxx"]).status.code(), Some(1));
    assert_eq!(liftedq(&["bench", "--sizes", "0", "--repetitions", "1"]).status.code(), Some(2));
}
