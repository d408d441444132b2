use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use liftedq::bench::{run_bench, to_csv, to_gnuplot, BenchConfig, Family};
use liftedq::engines::{cross_engine_check, run, Engine, RunOptions};
use liftedq::fojtree::construct;
use liftedq::limits::Limits;
use liftedq::lve::{JustDiff, Trace};
use liftedq::model::{gr_size, parse_evidence, parse_model, parse_queries, print_answers, print_model};
use liftedq::oracle::ground_model;
use liftedq::wfomc::{compile, WfomcProblem};
use liftedq::{Error, Evidence, Model};

#[derive(Parser)]
#[command(name = "liftedq", version, about = "Exact lifted inference over parfactor models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a model and print it back in canonical form.
    Parse { model: PathBuf },
    /// Check a model (and evidence) for consistency.
    Validate {
        model: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
    },
    /// Ground a model into a propositional factor graph.
    Ground(ModelArgs),
    /// Build the first-order junction tree of a model.
    Jtree {
        model: PathBuf,
        /// Print the full tree, messages included after passing.
        #[arg(long)]
        dump: bool,
        /// Enter this evidence and pass messages before dumping.
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long = "lve-justdiff", default_value = "ground", value_parser = parse_justdiff)]
        justdiff: JustDiff,
    },
    /// Compile the model's weighted model counting problem into a circuit.
    Compile {
        #[command(flatten)]
        args: ModelArgs,
        /// Print the circuit as indented text.
        #[arg(long)]
        dump: bool,
    },
    /// Answer queries with one engine.
    Query {
        #[arg(long, value_parser = parse_engine)]
        engine: Engine,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long = "lve-justdiff", default_value = "ground", value_parser = parse_justdiff)]
        justdiff: JustDiff,
        /// Write lifted operator applications as `op,parfactor,target,cost` lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Answer queries with every engine and compare.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long = "lve-justdiff", default_value = "ground", value_parser = parse_justdiff)]
        justdiff: JustDiff,
    },
    /// Time engines on a benchmark family over growing domains.
    Bench {
        #[arg(long, default_value = "gex", value_parser = parse_family)]
        family: Family,
        #[arg(long, value_delimiter = ',', default_value = "2,10,100,1000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_engine, default_value = "jt,ve,lve,ljt,fokc,ljtkc")]
        engines: Vec<Engine>,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Ground the queries at random; without it, with the first constants.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "lve-justdiff", default_value = "ground", value_parser = parse_justdiff)]
        justdiff: JustDiff,
        /// CSV output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// gnuplot data file.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
        /// Run the cells of one size concurrently.
        #[arg(long)]
        concurrent: bool,
    },
}

#[derive(Args)]
struct ModelArgs {
    model: PathBuf,
    #[arg(long)]
    evidence: Option<PathBuf>,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    Engine::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Engine::ALL.iter().map(|e| e.name()).collect();
        format!("unknown engine `{s}` (one of {})", names.join(", "))
    })
}

fn parse_justdiff(s: &str) -> Result<JustDiff, String> {
    JustDiff::parse(s).ok_or_else(|| format!("expected `ground` or `count`, got `{s}`"))
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::parse(s).map_err(|e| e.to_string())
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Guard(_) => 4,
            e if e.is_input_error() || matches!(e, Error::UnknownFamily(_)) => 2,
            _ => 3,
        };
        Failure { code, err: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 1, err }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load(model: &Path, evidence: Option<&Path>) -> Result<(Model, Evidence), Failure> {
    let m = parse_model(&read(model)?)?;
    let mut e = m.evidence.clone();
    if let Some(path) = evidence {
        e.items.extend(parse_evidence(&read(path)?, &m.vocab)?.items);
    }
    e.ground_map()?;
    Ok((m, e))
}

fn options(policy: JustDiff) -> RunOptions {
    RunOptions { policy, limits: Limits::default() }
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Parse { model } => {
            let m = parse_model(&read(&model)?)?;
            print!("{}", print_model(&m));
        }
        Cmd::Validate { model, evidence } => {
            let (m, e) = load(&model, evidence.as_deref())?;
            println!(
                "ok: {} domains, {} relations, {} parfactors, {} evidence items, gr_size {}",
                m.vocab.domains.len(),
                m.vocab.relations.len(),
                m.parfactors.len(),
                e.items.len(),
                gr_size(&m)
            );
        }
        Cmd::Ground(args) => {
            let (m, e) = load(&args.model, args.evidence.as_deref())?;
            let g = ground_model(&m, &e, &Limits::default())?;
            println!("randvars {}", g.randvars.len());
            println!("factors {}", g.factors.len());
            for f in &g.factors {
                let names: Vec<String> = f.factor.vars.iter().map(|&v| g.name(v)).collect();
                println!("{}: {}", f.source, names.join(", "));
            }
        }
        Cmd::Jtree { model, dump, evidence, justdiff } => {
            let (m, e) = load(&model, evidence.as_deref())?;
            let mut j = construct(&m);
            let report = j.verify(&m);
            if evidence.is_some() || !m.evidence.is_empty() {
                j.enter_evidence(&e)?;
                j.pass_messages(justdiff, &Limits::default())?;
            }
            if dump {
                print!("{}", j.dump());
                for node in &j.nodes {
                    for (from, msgs) in &node.inbox {
                        for g in msgs {
                            println!("message C{} -> C{}: {}", from + 1, node.id + 1, g.display(&m.vocab).replace('\n', " "));
                        }
                    }
                }
            } else {
                for node in &j.nodes {
                    println!("C{} {{{}}}", node.id + 1, j.prv_list(&node.prvs));
                }
            }
            for c in &report.checks {
                println!("property {}: {}", c.name, if c.passed { "ok" } else { "violated" });
            }
            if !report.passed() {
                return Err(Error::Internal("junction tree properties violated".into()).into());
            }
        }
        Cmd::Compile { args, dump } => {
            let (m, e) = load(&args.model, args.evidence.as_deref())?;
            let limits = Limits::default();
            let mut p = WfomcProblem::reduce(&m.vocab, &m.parfactors)?;
            p.add_evidence(&e)?;
            let c = compile(&p, &limits)?.smooth(&p)?;
            let v = c.validate();
            if dump {
                print!("{}", c.dump(&p));
            }
            println!("nodes {}", c.node_count());
            println!("decomposable {}", v.decomposable);
            println!("deterministic {}", v.deterministic);
            println!("ln_wmc {}", c.eval(&p));
            if let Some(w) = v.witness {
                return Err(Error::Internal(w).into());
            }
        }
        Cmd::Query { engine, model, queries, evidence, justdiff, trace } => {
            let (m, e) = load(&model, evidence.as_deref())?;
            let qs = parse_queries(&read(&queries)?, &m.vocab)?;
            let opts = options(justdiff);
            let mut answers = Vec::new();
            let mut all = Trace::default();
            for q in &qs {
                let o = run(engine, &m, q, &e, &opts)?;
                all.extend(&o.trace);
                answers.push(o.dist);
            }
            print!("{}", print_answers(&m.vocab, &answers));
            if let Some(path) = trace {
                write(&path, &all.to_csv())?;
            }
        }
        Cmd::Check { model, queries, evidence, justdiff } => {
            let (m, e) = load(&model, evidence.as_deref())?;
            let qs = parse_queries(&read(&queries)?, &m.vocab)?;
            let r = cross_engine_check(&m, &qs, &e, &options(justdiff));
            for c in &r.cells {
                let q = r.queries[c.query].display(&m.vocab);
                match &c.result {
                    Ok(d) => {
                        let probs: Vec<String> = d.probs.iter().map(|p| liftedq::model::format_sig(*p, 12)).collect();
                        println!("{q}\t{}\t{}", c.engine, probs.join(" "));
                    }
                    Err(err) => println!("{q}\t{}\terror: {err}", c.engine),
                }
            }
            println!("max deviation {:e}", r.max_deviation);
            for f in &r.flagged {
                println!("FLAG {f}");
            }
            if !r.passed() {
                return Err(Error::Internal(format!("{} disagreements", r.flagged.len())).into());
            }
        }
        Cmd::Bench { family, sizes, engines, repetitions, seed, justdiff, out, gnuplot, concurrent } => {
            let cfg = BenchConfig { family, sizes, engines, repetitions, seed, options: options(justdiff), concurrent };
            let rows = run_bench(&cfg)?;
            let csv = to_csv(&rows);
            match out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
            if let Some(path) = gnuplot {
                write(&path, &to_gnuplot(&rows))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
