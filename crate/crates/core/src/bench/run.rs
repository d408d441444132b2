use std::fmt::Write;
use std::time::Instant;

use serde::Serialize;

use crate::engines::{run, Engine, Outcome, RunOptions};
use crate::error::{Error, Result};
use crate::model::{gr_size, Distribution, Evidence, Model, Query};
use crate::oracle::{ground_model, ve_marginal};

use super::{bench_queries, gen_model, Family};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub engines: Vec<Engine>,
    pub repetitions: usize,
    /// Seed for random query groundings; `None` grounds with the first constants.
    pub seed: Option<u64>,
    pub options: RunOptions,
    /// Runs the engine cells of one size on separate threads.
    pub concurrent: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            family: Family::Gex,
            sizes: vec![2],
            engines: vec![Engine::Jt, Engine::Ve, Engine::Lve, Engine::Ljt, Engine::Fokc, Engine::Ljtkc],
            repetitions: 5,
            seed: None,
            options: RunOptions::default(),
            concurrent: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Guard,
    /// The engine failed for another reason.
    Error,
    /// The answer differs from the ground reference.
    Mismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub family: &'static str,
    pub n: usize,
    pub gr_size: u64,
    pub engine: &'static str,
    pub query: String,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub lve_ops: usize,
    pub ground_logvar: usize,
    pub circuit_nodes: usize,
    pub circuit_ops: u64,
    pub status: Status,
    pub verified: bool,
}

/// Ground reference marginals, when the grounding guards admit them.
fn reference(m: &Model, queries: &[Query], opts: &RunOptions) -> Vec<Option<Distribution>> {
    let Ok(g) = ground_model(m, &Evidence::default(), &opts.limits) else {
        return vec![None; queries.len()];
    };
    queries.iter().map(|q| ve_marginal(&g, q, &opts.limits).ok()).collect()
}

fn cell(
    cfg: &BenchConfig,
    m: &Model,
    engine: Engine,
    q: &Query,
    want: Option<&Distribution>,
    base: BenchRow,
) -> BenchRow {
    let mut times = Vec::new();
    let mut first: Option<Result<Outcome>> = None;
    for _ in 0..cfg.repetitions.max(1) {
        let start = Instant::now();
        let r = run(engine, m, q, &Evidence::default(), &cfg.options);
        times.push(start.elapsed().as_secs_f64() * 1e3);
        let failed = r.is_err();
        if first.is_none() {
            first = Some(r);
        }
        if failed {
            break;
        }
    }
    times.sort_by(f64::total_cmp);
    let us = |ms: f64| (ms * 1e3).round() / 1e3;
    let mut row = BenchRow {
        median_ms: us(times[times.len() / 2]),
        mean_ms: us(times.iter().sum::<f64>() / times.len() as f64),
        ..base
    };
    match first.expect("at least one repetition") {
        Ok(o) => {
            row.lve_ops = o.trace.len();
            row.ground_logvar = o.trace.count("ground_logvar");
            row.circuit_nodes = o.circuit_nodes;
            row.circuit_ops = o.circuit_ops;
            row.verified = want.is_some_and(|w| w.max_abs_diff(&o.dist) < 1e-9);
            row.status = if want.is_some() && !row.verified { Status::Mismatch } else { Status::Ok };
        }
        Err(Error::Guard(_)) => row.status = Status::Guard,
        Err(_) => row.status = Status::Error,
    }
    row
}

/// Times every engine on every benchmark query at every size.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.iter().any(|&n| n == 0) || cfg.repetitions == 0 {
        return Err(Error::Validation("sizes and repetitions must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let m = gen_model(cfg.family, n)?;
        let queries = bench_queries(&m, cfg.seed);
        let want = reference(&m, &queries, &cfg.options);
        let base = |engine: Engine, q: &Query| BenchRow {
            family: cfg.family.name(),
            n,
            gr_size: gr_size(&m),
            engine: engine.name(),
            query: q.display(&m.vocab),
            median_ms: 0.0,
            mean_ms: 0.0,
            lve_ops: 0,
            ground_logvar: 0,
            circuit_nodes: 0,
            circuit_ops: 0,
            status: Status::Ok,
            verified: false,
        };
        let cells: Vec<(Engine, usize)> =
            cfg.engines.iter().flat_map(|&e| (0..queries.len()).map(move |i| (e, i))).collect();
        let one = |&(e, i): &(Engine, usize)| cell(cfg, &m, e, &queries[i], want[i].as_ref(), base(e, &queries[i]));
        if cfg.concurrent {
            std::thread::scope(|s| {
                let handles: Vec<_> = cells.iter().map(|c| s.spawn(move || one(c))).collect();
                rows.extend(handles.into_iter().map(|h| h.join().expect("bench cell panicked")));
            });
        } else {
            rows.extend(cells.iter().map(one));
        }
    }
    Ok(rows)
}

/// Rows as CSV with a header line.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    if rows.is_empty() {
        w.write_record([
            "family", "n", "gr_size", "engine", "query", "median_ms", "mean_ms", "lve_ops", "ground_logvar",
            "circuit_nodes", "circuit_ops", "status", "verified",
        ])
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// One gnuplot data block per engine and query, `n median_ms mean_ms`,
/// blocks separated by two blank lines; cells that did not finish are
/// left out.
pub fn to_gnuplot(rows: &[BenchRow]) -> String {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.engine, r.query.as_str())) {
            keys.push((r.engine, r.query.as_str()));
        }
    }
    let mut out = String::new();
    for (i, (engine, query)) in keys.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {engine} {query}");
        let _ = writeln!(out, "# n median_ms mean_ms");
        for r in rows.iter().filter(|r| r.engine == *engine && r.query == *query && r.status == Status::Ok) {
            let _ = writeln!(out, "{} {:.6} {:.6}", r.n, r.median_ms, r.mean_ms);
        }
    }
    out
}
