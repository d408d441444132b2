//! Recursive-descent parser for the model language.
//!
//! ```text
//! domain person = {alice, eve, bob};
//! range level = {low, mid, high};
//! prv Smokes(person), Friends(person, person), Risk(person): level;
//! parfactor g0 (X:person, Y:person | X != Y)
//!   on Friends(X,Y), Smokes(X), Smokes(Y)
//!   table { (true,true,true)=1.5; ... };
//! evidence Smokes(bob)=true, for (X:person | X in {alice}) Risk(X)=low;
//! ```

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::logspace;

use super::{
    bool_range, row_index, Arg, Atom, Constraint, Domain, Evidence, EvidenceItem, Logvar, Model,
    Parfactor, Query, Relation, Term, ValueSet, Vocab,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token { tok: Tok::Ident(s), line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(s.chars().last(), Some('e' | 'E'));
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    s.push(d);
                    i += 1;
                    col += 1;
                } else {
                    break;
                }
            }
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line,
                col: start_col,
                msg: format!("malformed number `{s}`"),
            })?;
            out.push(Token { tok: Tok::Num(v), line, col: start_col });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym: Option<&'static str> = if two == "!=" {
            Some("!=")
        } else {
            match c {
                '{' => Some("{"),
                '}' => Some("}"),
                '(' => Some("("),
                ')' => Some(")"),
                ',' => Some(","),
                ';' => Some(";"),
                '=' => Some("="),
                '|' => Some("|"),
                ':' => Some(":"),
                '-' => Some("-"),
                _ => None,
            }
        };
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), line, col: start_col });
            }
            None => {
                return Err(Error::Parse { line, col, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        let toks = lex(text)?;
        let lines = text.lines().count().max(1);
        let last_len = text.lines().last().map(|l| l.chars().count()).unwrap_or(0);
        Ok(Parser { toks, pos: 0, end: (lines, last_len + 1) })
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(Error::Parse { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let neg = self.eat_sym("-");
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => self.err("expected number"),
        }
    }

    /// `{a, b, c}`
    fn ident_set(&mut self) -> Result<Vec<String>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        if !self.peek_sym("}") {
            loop {
                out.push(self.ident()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    /// `(a, b)`
    fn ident_tuple(&mut self) -> Result<Vec<String>> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if !self.peek_sym(")") {
            loop {
                out.push(self.ident()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(out)
    }
}

pub fn parse_model(text: &str) -> Result<Model> {
    let mut p = Parser::new(text)?;
    let mut vocab = Vocab::default();
    let mut parfactors: Vec<Parfactor> = Vec::new();
    let mut evidence = Evidence::default();
    let mut seen = BTreeSet::new();
    while !p.at_end() {
        let (line, col) = p.here();
        let kw = p.ident()?;
        match kw.as_str() {
            "domain" => {
                let name = p.ident()?;
                p.expect_sym("=")?;
                let constants = p.ident_set()?;
                p.expect_sym(";")?;
                if vocab.domain_id(&name).is_some() {
                    return Err(Error::Parse { line, col, msg: format!("domain {name} declared twice") });
                }
                vocab.domains.push(Domain { name, constants });
            }
            "range" => {
                let name = p.ident()?;
                p.expect_sym("=")?;
                let values = p.ident_set()?;
                p.expect_sym(";")?;
                if name == "bool" || vocab.ranges.iter().any(|(n, _)| *n == name) {
                    return Err(Error::Parse { line, col, msg: format!("range {name} declared twice") });
                }
                vocab.ranges.push((name, values));
            }
            "prv" => loop {
                let name = p.ident()?;
                let params = p.ident_tuple()?;
                let params = params
                    .iter()
                    .map(|d| vocab.domain_id(d).ok_or_else(|| Error::UndeclaredDomain(d.clone())))
                    .collect::<Result<Vec<_>>>()?;
                let range = if p.eat_sym(":") {
                    let r = p.ident()?;
                    if r == "bool" {
                        bool_range()
                    } else {
                        vocab
                            .ranges
                            .iter()
                            .find(|(n, _)| *n == r)
                            .map(|(_, v)| v.clone())
                            .ok_or_else(|| Error::Validation(format!("undeclared range {r}")))?
                    }
                } else {
                    bool_range()
                };
                if vocab.relation_id(&name).is_some() {
                    return Err(Error::Parse { line, col, msg: format!("relation {name} declared twice") });
                }
                vocab.relations.push(Relation { name, params, range });
                if p.eat_sym(";") {
                    break;
                }
                p.expect_sym(",")?;
            },
            "parfactor" => {
                let g = parse_parfactor(&mut p, &vocab)?;
                if !seen.insert(g.name.clone()) {
                    return Err(Error::DuplicateParfactor(g.name));
                }
                parfactors.push(g);
            }
            "evidence" => {
                evidence.items.extend(parse_evidence_items(&mut p, &vocab)?);
            }
            other => return Err(Error::Parse { line, col, msg: format!("unexpected `{other}`") }),
        }
    }
    let model = Model { vocab: std::sync::Arc::new(vocab), parfactors, evidence };
    model.validate()?;
    Ok(model)
}

/// Logvar declarations and conditions: `X:person, Y:person | X != Y, X in {a}`.
fn parse_scope(p: &mut Parser, vocab: &Vocab) -> Result<Constraint> {
    p.expect_sym("(")?;
    let mut vars: Vec<Logvar> = Vec::new();
    if !p.peek_sym(")") && !p.peek_sym("|") {
        loop {
            let name = p.ident()?;
            p.expect_sym(":")?;
            let dom = p.ident()?;
            let d = vocab.domain_id(&dom).ok_or_else(|| Error::UndeclaredDomain(dom.clone()))?;
            if vars.iter().any(|v| v.name == name) {
                return p.err(format!("logvar {name} declared twice"));
            }
            vars.push(Logvar::new(name, d, vocab.domain_size(d)));
            if !p.eat_sym(",") {
                break;
            }
        }
    }
    let mut allowed: Vec<Option<ValueSet>> = vec![None; vars.len()];
    let mut distinct = Vec::new();
    let mut tuples: Option<BTreeSet<Vec<u32>>> = None;
    if p.eat_sym("|") {
        loop {
            if p.peek_ident("in") {
                p.pos += 1;
                p.expect_sym("{")?;
                let mut set = BTreeSet::new();
                loop {
                    let t = p.ident_tuple()?;
                    if t.len() != vars.len() {
                        return p.err(format!("tuple needs {} values", vars.len()));
                    }
                    let mut row = Vec::with_capacity(t.len());
                    for (c, v) in t.iter().zip(&vars) {
                        row.push(vocab.constant_id(v.domain, c).ok_or_else(|| {
                            Error::Validation(format!("constant {c} not in domain of {}", v.name))
                        })?);
                    }
                    set.insert(row);
                    if !p.eat_sym(",") {
                        break;
                    }
                }
                p.expect_sym("}")?;
                if set.is_empty() {
                    return Err(Error::Validation("explicit constraint without tuples".into()));
                }
                tuples = Some(match tuples {
                    Some(prev) => prev.intersection(&set).cloned().collect(),
                    None => set,
                });
            } else {
                let a = p.ident()?;
                let ai = vars
                    .iter()
                    .position(|v| v.name == a)
                    .ok_or_else(|| Error::UndeclaredLogvar(a.clone()))?;
                if p.eat_sym("!=") {
                    let b = p.ident()?;
                    let bi = vars
                        .iter()
                        .position(|v| v.name == b)
                        .ok_or_else(|| Error::UndeclaredLogvar(b.clone()))?;
                    if ai == bi {
                        return Err(Error::Validation(format!("{a} != {a} is unsatisfiable")));
                    }
                    if vars[ai].domain != vars[bi].domain {
                        return Err(Error::Validation(format!("{a} and {b} range over different domains")));
                    }
                    distinct.push((ai, bi));
                } else if p.peek_ident("in") {
                    p.pos += 1;
                    let names = p.ident_set()?;
                    let vals = names
                        .iter()
                        .map(|c| {
                            vocab.constant_id(vars[ai].domain, c).ok_or_else(|| {
                                Error::Validation(format!("constant {c} not in domain of {a}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let set = ValueSet::new(vals);
                    allowed[ai] = Some(match allowed[ai].take() {
                        Some(prev) => prev.intersect(&set),
                        None => set,
                    });
                } else {
                    return p.err("expected `!=` or `in`");
                }
            }
            if !p.eat_sym(",") {
                break;
            }
        }
    }
    p.expect_sym(")")?;
    let product = Constraint::product(vars.clone(), allowed, distinct);
    let c = match tuples {
        Some(set) => Constraint::tuples(vars, set.into_iter().filter(|t| product.contains(t)).collect()),
        None => product,
    };
    if c.arity() > 0 && c.count() == 0 {
        return Err(Error::Validation("constraint admits no tuples".into()));
    }
    Ok(c)
}

fn parse_atom(p: &mut Parser, vocab: &Vocab, vars: &[Logvar]) -> Result<Atom> {
    let name = p.ident()?;
    let rel = vocab.relation_id(&name).ok_or_else(|| Error::UnknownRelation(name.clone()))?;
    let args = p.ident_tuple()?;
    let params = &vocab.relations[rel].params;
    if args.len() != params.len() {
        return Err(Error::Validation(format!("{name} expects {} arguments", params.len())));
    }
    let mut terms = Vec::with_capacity(args.len());
    for (a, &d) in args.iter().zip(params) {
        if let Some(i) = vars.iter().position(|v| v.name == *a) {
            terms.push(Term::Var(i));
        } else if let Some(c) = vocab.constant_id(d, a) {
            terms.push(Term::Const(c));
        } else {
            return Err(Error::UndeclaredLogvar(a.clone()));
        }
    }
    Ok(Atom { rel, terms })
}

fn parse_parfactor(p: &mut Parser, vocab: &Vocab) -> Result<Parfactor> {
    let name = p.ident()?;
    let constraint = parse_scope(p, vocab)?;
    let mut atoms = Vec::new();
    if !p.peek_ident("on") {
        return p.err("expected `on`");
    }
    p.pos += 1;
    if !p.peek_ident("table") {
        loop {
            atoms.push(parse_atom(p, vocab, &constraint.vars)?);
            if !p.eat_sym(",") {
                break;
            }
        }
    }
    if !p.peek_ident("table") {
        return p.err("expected `table`");
    }
    p.pos += 1;
    let sizes: Vec<usize> = atoms.iter().map(|a| vocab.range_size(a.rel)).collect();
    let len: usize = sizes.iter().product();
    let mut table: Vec<Option<f64>> = vec![None; len];
    let mut rows = 0usize;
    p.expect_sym("{")?;
    while !p.peek_sym("}") {
        let vals = p.ident_tuple()?;
        if vals.len() != atoms.len() {
            return p.err(format!("row needs {} values", atoms.len()));
        }
        let mut idx = Vec::with_capacity(vals.len());
        for (v, a) in vals.iter().zip(&atoms) {
            idx.push(vocab.value_id(a.rel, v).ok_or_else(|| {
                Error::Validation(format!("value {v} outside range of {}", vocab.relations[a.rel].name))
            })?);
        }
        p.expect_sym("=")?;
        let x = p.number()?;
        p.expect_sym(";")?;
        if x < 0.0 || !x.is_finite() {
            return Err(Error::Validation(format!("parfactor {name}: potentials must be non-negative")));
        }
        let i = row_index(&sizes, &idx);
        if table[i].is_some() {
            return Err(Error::Validation(format!("parfactor {name}: row given twice")));
        }
        table[i] = Some(logspace::ln(x));
        rows += 1;
    }
    p.expect_sym("}")?;
    p.expect_sym(";")?;
    if rows != len {
        return Err(Error::TableSize { parfactor: name, expected: len, found: rows });
    }
    Ok(Parfactor {
        name,
        constraint,
        args: atoms.into_iter().map(Arg::Atom).collect(),
        table: table.into_iter().map(|v| v.expect("all rows present")).collect(),
    })
}

fn parse_evidence_items(p: &mut Parser, vocab: &Vocab) -> Result<Vec<EvidenceItem>> {
    let mut items = Vec::new();
    loop {
        let constraint = if p.peek_ident("for") {
            p.pos += 1;
            parse_scope(p, vocab)?
        } else {
            Constraint::empty_vars()
        };
        let atom = parse_atom(p, vocab, &constraint.vars)?;
        p.expect_sym("=")?;
        let v = p.ident()?;
        let value = vocab.value_id(atom.rel, &v).ok_or_else(|| {
            Error::Validation(format!("value {v} outside range of {}", vocab.relations[atom.rel].name))
        })?;
        items.push(EvidenceItem { atom, constraint, value });
        if p.eat_sym(";") {
            break;
        }
        p.expect_sym(",")?;
    }
    Ok(items)
}

/// Evidence file: `evidence` statements (the keyword is optional).
pub fn parse_evidence(text: &str, vocab: &Vocab) -> Result<Evidence> {
    let mut p = Parser::new(text)?;
    let mut ev = Evidence::default();
    while !p.at_end() {
        if p.peek_ident("evidence") {
            p.pos += 1;
        }
        ev.items.extend(parse_evidence_items(&mut p, vocab)?);
    }
    Ok(ev)
}

/// Query file: one query per line; a line may join several ground terms
/// with `,` for a joint query.
pub fn parse_queries(text: &str, vocab: &Vocab) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut terms = Vec::new();
        let mut depth = 0;
        let mut start = 0;
        let bytes: Vec<char> = line.chars().collect();
        for (i, &c) in bytes.iter().enumerate() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    let piece: String = bytes[start..i].iter().collect();
                    terms.push(piece);
                    start = i + 1;
                }
                _ => {}
            }
        }
        terms.push(bytes[start..].iter().collect());
        let terms = terms
            .iter()
            .map(|t| {
                vocab.parse_ground(t).map_err(|e| match e {
                    Error::UnknownRelation(r) => Error::Parse {
                        line: ln + 1,
                        col: 1,
                        msg: format!("unknown relation {r}"),
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Query { terms });
    }
    Ok(out)
}
