use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::{parse_model, Evidence, Model, Query};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Gex,
    Gexp,
    Gl,
    Glp,
}

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        match s {
            "gex" => Ok(Family::Gex),
            "gexp" => Ok(Family::Gexp),
            "gl" => Ok(Family::Gl),
            "glp" => Ok(Family::Glp),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gex => "gex",
            Family::Gexp => "gexp",
            Family::Gl => "gl",
            Family::Glp => "glp",
        }
    }

    /// Whether the friends pair ranges over a second, fresh domain.
    fn own_domain(self) -> bool {
        matches!(self, Family::Gexp | Family::Glp)
    }

    fn large(self) -> bool {
        matches!(self, Family::Gl | Family::Glp)
    }
}

fn domain(out: &mut String, name: &str, prefix: &str, n: usize) {
    let consts: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
    let _ = writeln!(out, "domain {name} = {{{}}};", consts.join(", "));
}

fn table(out: &mut String, arity: usize, values: &[f64]) {
    let _ = writeln!(out, "  table {{");
    for (i, v) in values.iter().enumerate() {
        let row: Vec<&str> = (0..arity)
            .map(|k| if (i >> (arity - 1 - k)) & 1 == 0 { "true" } else { "false" })
            .collect();
        let _ = writeln!(out, "    ({})={};", row.join(","), v);
    }
    let _ = writeln!(out, "  }};");
}

/// Fixed pseudo-random potentials in [0.25, 3.0] for the larger families.
fn potentials(seed: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| 0.25 + ((seed * 37 + i * 11 + 5) % 12) as f64 * 0.25).collect()
}

/// Benchmark model of the given family over domains of size `n`.
pub fn gen_model(family: Family, n: usize) -> Result<Model> {
    if n == 0 {
        return Err(Error::Validation("domain size must be positive".into()));
    }
    let mut s = String::new();
    domain(&mut s, "person", "p", n);
    let (ydom, yrel) = if family.own_domain() {
        domain(&mut s, "other", "q", n);
        let _ = writeln!(s, "prv SmokesY(other);");
        ("other", "SmokesY")
    } else {
        ("person", "Smokes")
    };
    let _ = writeln!(s, "prv Smokes(person), Friends(person, {ydom}), Asthma(person), Cancer(person);");
    let scope = if family.own_domain() {
        format!("(X:person, Y:{ydom})")
    } else {
        "(X:person, Y:person | X != Y)".to_string()
    };
    let _ = writeln!(s, "parfactor g0 {scope} on Friends(X,Y), Smokes(X), {yrel}(Y)");
    table(&mut s, 3, &[3.0, 1.0, 1.0, 2.0, 0.5, 1.5, 1.2, 0.8]);
    let _ = writeln!(s, "parfactor g1 {scope} on Friends(X,Y)");
    table(&mut s, 1, &[0.4, 1.2]);
    let _ = writeln!(s, "parfactor g2 (X:person) on Smokes(X)");
    table(&mut s, 1, &[1.5, 1.0]);
    let _ = writeln!(s, "parfactor g3 (X:person) on Cancer(X)");
    table(&mut s, 1, &[0.8, 1.3]);
    let _ = writeln!(s, "parfactor g4 (X:person) on Smokes(X), Asthma(X)");
    table(&mut s, 2, &[2.0, 0.5, 0.7, 1.1]);
    let _ = writeln!(s, "parfactor g5 (X:person) on Smokes(X), Cancer(X)");
    table(&mut s, 2, &[1.8, 0.6, 0.9, 1.4]);
    if family.large() {
        domain(&mut s, "drug", "d", n);
        domain(&mut s, "company", "c", n);
        let _ = writeln!(
            s,
            "prv Cough(person), Wheeze(person), Exercise(person), Hospital(person), Treat(person, drug), \
             Drinks(person), Stress(person), Job(person, company);"
        );
        let extra: [(&str, &str, &str); 14] = [
            ("g6", "(X:person)", "Smokes(X), Asthma(X), Cough(X)"),
            ("g7", "(X:person)", "Smokes(X), Wheeze(X), Exercise(X)"),
            ("g8", "(X:person)", "Asthma(X), Wheeze(X), Exercise(X)"),
            ("g9", "(X:person)", "Cough(X), Wheeze(X), Exercise(X)"),
            ("g10", "(X:person)", "Asthma(X)"),
            ("g11", "(X:person)", "Exercise(X)"),
            ("g12", "(X:person)", "Smokes(X), Hospital(X), Cancer(X)"),
            ("g13", "(X:person, M:drug)", "Smokes(X), Hospital(X), Treat(X,M)"),
            ("g14", "(X:person, M:drug)", "Treat(X,M)"),
            ("g15", "(X:person, M:drug)", "Hospital(X), Treat(X,M)"),
            ("g16", "(X:person)", "Smokes(X), Drinks(X), Stress(X)"),
            ("g17", "(X:person, J:company)", "Smokes(X), Stress(X), Job(X,J)"),
            ("g18", "(X:person, J:company)", "Stress(X), Job(X,J)"),
            ("g19", "(X:person, J:company)", "Job(X,J)"),
        ];
        for (i, (name, scope, args)) in extra.iter().enumerate() {
            let arity = args.split("),").count();
            let _ = writeln!(s, "parfactor {name} {scope} on {args}");
            table(&mut s, arity, &potentials(i, 1 << arity));
        }
    }
    parse_model(&s)
}

/// One single-term query per relation, grounded with the first constants of
/// each domain, or with seeded random constants when `seed` is given.
pub fn bench_queries(m: &Model, seed: Option<u64>) -> Vec<Query> {
    use rand::{Rng, SeedableRng};
    let vocab = &*m.vocab;
    let mut rng = seed.map(rand_chacha::ChaCha8Rng::seed_from_u64);
    vocab
        .relations
        .iter()
        .enumerate()
        .filter(|(_, r)| r.name != "SmokesY")
        .map(|(rel, r)| {
            let mut args = Vec::new();
            for (k, &d) in r.params.iter().enumerate() {
                let size = vocab.domain_size(d);
                let c = match rng.as_mut() {
                    Some(rng) => rng.gen_range(0..size),
                    // the second person argument names a different constant
                    None if k > 0 && d == r.params[0] => 1.min(size - 1),
                    None => 0,
                };
                args.push(c);
            }
            if let Some(rng) = rng.as_mut() {
                if r.params.len() == 2 && r.params[0] == r.params[1] && vocab.domain_size(r.params[0]) > 1 {
                    while args[1] == args[0] {
                        args[1] = rng.gen_range(0..vocab.domain_size(r.params[1]));
                    }
                }
            }
            Query::single(crate::model::GroundAtom { rel, args })
        })
        .collect()
}

/// The running example's evidence `Friends(eve,bob), Smokes(bob)` with eve
/// and bob played by the first two people.
pub fn example_evidence(m: &Model) -> Result<Evidence> {
    let vocab = &*m.vocab;
    let person = vocab.domain_id("person").ok_or_else(|| Error::UndeclaredDomain("person".into()))?;
    if vocab.domain_size(person) < 2 {
        return Err(Error::Validation("example evidence needs two people".into()));
    }
    let friends = vocab.relation_id("Friends").ok_or_else(|| Error::UnknownRelation("Friends".into()))?;
    let smokes = vocab.relation_id("Smokes").ok_or_else(|| Error::UnknownRelation("Smokes".into()))?;
    Ok(Evidence { items: vec![Evidence::ground(friends, vec![0, 1], 0), Evidence::ground(smokes, vec![1], 0)] })
}
