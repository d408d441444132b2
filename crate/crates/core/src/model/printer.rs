use std::fmt::Write;

use super::{row_values, Arg, Constraint, Distribution, Evidence, Model, Vocab};

/// `x` with `digits` significant digits, trailing zeros dropped.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..16).contains(&exp) {
        let s = format!("{:.*e}", digits - 1, x);
        let (mant, e) = s.split_once('e').expect("scientific notation");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        return format!("{mant}e{e}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Answers as `query,value,probability` CSV with 12 significant digits.
pub fn print_answers(vocab: &Vocab, answers: &[Distribution]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "value", "probability"]).expect("in-memory csv write");
    for d in answers {
        let name = d.terms.iter().map(|t| vocab.ground_name(t)).collect::<Vec<_>>().join(", ");
        for (i, p) in d.probs.iter().enumerate() {
            w.write_record([name.as_str(), &d.row_label(vocab, i), &format_sig(*p, 12)]).expect("in-memory csv write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

fn scope(vocab: &Vocab, c: &Constraint) -> String {
    let vars: Vec<String> =
        c.vars.iter().map(|v| format!("{}:{}", v.name, vocab.domains[v.domain].name)).collect();
    let cond = c.describe(vocab);
    if cond.is_empty() {
        format!("({})", vars.join(", "))
    } else {
        format!("({} | {})", vars.join(", "), cond)
    }
}

fn format_potential(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        "0".to_string()
    } else {
        format_sig(ln.exp(), 15)
    }
}

/// Prints a model in the model language; `parse_model` reads it back.
pub fn print_model(m: &Model) -> String {
    let vocab = &*m.vocab;
    let mut out = String::new();
    for d in &vocab.domains {
        let _ = writeln!(out, "domain {} = {{{}}};", d.name, d.constants.join(", "));
    }
    for (name, values) in &vocab.ranges {
        let _ = writeln!(out, "range {} = {{{}}};", name, values.join(", "));
    }
    for r in &vocab.relations {
        let params: Vec<&str> = r.params.iter().map(|&d| vocab.domains[d].name.as_str()).collect();
        let range = vocab.ranges.iter().find(|(_, v)| *v == r.range).map(|(n, _)| n.as_str());
        match range {
            Some(n) if !r.is_boolean() => {
                let _ = writeln!(out, "prv {}({}): {};", r.name, params.join(", "), n);
            }
            _ => {
                let _ = writeln!(out, "prv {}({});", r.name, params.join(", "));
            }
        }
    }
    for g in &m.parfactors {
        let args: Vec<String> = g.args.iter().map(|a| a.display(vocab, g.vars())).collect();
        let _ = writeln!(out, "parfactor {} {}", g.name, scope(vocab, &g.constraint));
        let _ = writeln!(out, "  on {}", args.join(", "));
        let sizes = g.arg_sizes(vocab);
        let _ = writeln!(out, "  table {{");
        for (i, v) in g.table.iter().enumerate() {
            let vals = row_values(&sizes, i);
            let labels: Vec<String> = vals
                .iter()
                .zip(&g.args)
                .map(|(&x, a)| match a {
                    Arg::Atom(atom) => vocab.relations[atom.rel].range[x].clone(),
                    Arg::Count(_) => format!("h{x}"),
                })
                .collect();
            let _ = writeln!(out, "    ({})={};", labels.join(","), format_potential(*v));
        }
        let _ = writeln!(out, "  }};");
    }
    if !m.evidence.is_empty() {
        out.push_str(&print_evidence(vocab, &m.evidence));
    }
    out
}

pub fn print_evidence(vocab: &Vocab, ev: &Evidence) -> String {
    let mut out = String::new();
    for item in &ev.items {
        let value = &vocab.relations[item.atom.rel].range[item.value];
        let atom = item.atom.display(vocab, &item.constraint.vars);
        if item.constraint.arity() == 0 {
            let _ = writeln!(out, "evidence {atom}={value};");
        } else {
            let _ = writeln!(out, "evidence for {} {atom}={value};", scope(vocab, &item.constraint));
        }
    }
    out
}
