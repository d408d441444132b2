//! Parameterised models: vocabulary, atoms, parfactors, evidence and queries.

mod constraint;
mod ground;
mod parser;
mod printer;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use constraint::{Constraint, ConstraintKind, Logvar, ValueSet};
pub use ground::{gr_instances, gr_size, parfactor_gr_size, prv_instances};
pub use parser::{parse_evidence, parse_model, parse_queries};
pub use printer::{format_sig, print_answers, print_evidence, print_model};

pub type DomId = usize;
pub type RelId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub constants: Vec<String>,
}

impl Domain {
    pub fn size(&self) -> u32 {
        self.constants.len() as u32
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub params: Vec<DomId>,
    pub range: Vec<String>,
}

impl Relation {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn is_boolean(&self) -> bool {
        self.range.len() == 2 && self.range[0] == "true" && self.range[1] == "false"
    }
}

/// Domains and relations shared by a model and everything derived from it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    pub domains: Vec<Domain>,
    pub relations: Vec<Relation>,
    /// Named ranges other than the predefined `bool`, in declaration order.
    pub ranges: Vec<(String, Vec<String>)>,
}

pub fn bool_range() -> Vec<String> {
    vec!["true".to_string(), "false".to_string()]
}

impl Vocab {
    pub fn domain_id(&self, name: &str) -> Option<DomId> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelId> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn constant_id(&self, dom: DomId, name: &str) -> Option<u32> {
        self.domains[dom].constants.iter().position(|c| c == name).map(|i| i as u32)
    }

    pub fn constant_name(&self, dom: DomId, c: u32) -> &str {
        &self.domains[dom].constants[c as usize]
    }

    pub fn domain_size(&self, dom: DomId) -> u32 {
        self.domains[dom].size()
    }

    pub fn range_size(&self, rel: RelId) -> usize {
        self.relations[rel].range.len()
    }

    pub fn value_id(&self, rel: RelId, value: &str) -> Option<usize> {
        self.relations[rel].range.iter().position(|v| v == value)
    }

    pub fn ground_name(&self, g: &GroundAtom) -> String {
        let rel = &self.relations[g.rel];
        let args: Vec<&str> =
            g.args.iter().zip(&rel.params).map(|(&c, &d)| self.constant_name(d, c)).collect();
        format!("{}({})", rel.name, args.join(","))
    }

    /// Parses `Rel(c1,c2)` into a ground atom.
    pub fn parse_ground(&self, text: &str) -> Result<GroundAtom> {
        let text = text.trim();
        let (name, rest) = match text.find('(') {
            Some(i) => (&text[..i], &text[i + 1..]),
            None => (text, ")"),
        };
        let name = name.trim();
        let rel = self.relation_id(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))?;
        let inner = rest
            .trim()
            .strip_suffix(')')
            .ok_or_else(|| Error::UnknownRandvar(text.to_string()))?;
        let parts: Vec<&str> =
            if inner.trim().is_empty() { Vec::new() } else { inner.split(',').map(str::trim).collect() };
        let params = &self.relations[rel].params;
        if parts.len() != params.len() {
            return Err(Error::UnknownRandvar(text.to_string()));
        }
        let args = parts
            .iter()
            .zip(params)
            .map(|(p, &d)| self.constant_id(d, p).ok_or_else(|| Error::UnknownRandvar(text.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundAtom { rel, args })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Index into the logvars of the enclosing constraint.
    Var(usize),
    Const(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub rel: RelId,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for t in &self.terms {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Const(_)))
    }

    /// Instantiates the atom under an assignment of the logvars.
    pub fn ground(&self, assignment: &[u32]) -> GroundAtom {
        GroundAtom {
            rel: self.rel,
            args: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => assignment[*v],
                    Term::Const(c) => *c,
                })
                .collect(),
        }
    }

    pub fn map_vars(&self, f: impl Fn(usize) -> Term) -> Atom {
        Atom {
            rel: self.rel,
            terms: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => f(*v),
                    c => *c,
                })
                .collect(),
        }
    }

    pub fn display(&self, vocab: &Vocab, vars: &[Logvar]) -> String {
        let rel = &vocab.relations[self.rel];
        let args: Vec<String> = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| match t {
                Term::Var(v) => vars[*v].name.clone(),
                Term::Const(c) => vocab.constant_name(rel.params[i], *c).to_string(),
            })
            .collect();
        format!("{}({})", rel.name, args.join(","))
    }
}

/// Counting randvar `#_X[A(..X..)]`. The counted logvar is variable 0 of
/// `over`, which restricts it to an allowed set; the atom mentions no other
/// logvar.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Crv {
    pub atom: Atom,
    pub over: Constraint,
}

impl Crv {
    /// Number of ground atoms counted.
    pub fn count(&self) -> u64 {
        self.over.count()
    }

    pub fn ground_atoms(&self) -> Vec<GroundAtom> {
        self.over.expand().iter().map(|t| self.atom.ground(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Arg {
    Atom(Atom),
    Count(Crv),
}

impl Arg {
    pub fn rel(&self) -> RelId {
        match self {
            Arg::Atom(a) => a.rel,
            Arg::Count(c) => c.atom.rel,
        }
    }

    /// Number of values of the argument.
    pub fn size(&self, vocab: &Vocab) -> usize {
        match self {
            Arg::Atom(a) => vocab.range_size(a.rel),
            Arg::Count(c) => {
                crate::histogram::histogram_count(c.count() as u32, vocab.range_size(c.atom.rel))
            }
        }
    }

    pub fn vars(&self) -> Vec<usize> {
        match self {
            Arg::Atom(a) => a.vars(),
            Arg::Count(_) => Vec::new(),
        }
    }

    pub fn display(&self, vocab: &Vocab, vars: &[Logvar]) -> String {
        match self {
            Arg::Atom(a) => a.display(vocab, vars),
            Arg::Count(c) => {
                let inner = c.atom.display(vocab, &c.over.vars);
                let cond = c.over.describe(vocab);
                if cond.is_empty() {
                    format!("#{}[{}]", c.over.vars[0].name, inner)
                } else {
                    format!("#{}[{} | {}]", c.over.vars[0].name, inner, cond)
                }
            }
        }
    }
}

/// `∀X: φ(A) | C` with the potential stored as natural logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct Parfactor {
    pub name: String,
    pub constraint: Constraint,
    pub args: Vec<Arg>,
    pub table: Vec<f64>,
}

impl Parfactor {
    pub fn vars(&self) -> &[Logvar] {
        &self.constraint.vars
    }

    pub fn arg_sizes(&self, vocab: &Vocab) -> Vec<usize> {
        self.args.iter().map(|a| a.size(vocab)).collect()
    }

    pub fn table_len(&self, vocab: &Vocab) -> usize {
        self.arg_sizes(vocab).iter().product()
    }

    /// Logvars appearing in some argument.
    pub fn used_vars(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.args.iter().flat_map(|a| a.vars()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn relations(&self) -> Vec<RelId> {
        let mut out: Vec<RelId> = self.args.iter().map(Arg::rel).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn has_counting(&self) -> bool {
        self.args.iter().any(|a| matches!(a, Arg::Count(_)))
    }

    /// Constant parfactor over no arguments.
    pub fn scalar(name: impl Into<String>, ln_value: f64) -> Self {
        Parfactor { name: name.into(), constraint: Constraint::empty_vars(), args: Vec::new(), table: vec![ln_value] }
    }

    pub fn display(&self, vocab: &Vocab) -> String {
        let vars: Vec<String> = self
            .vars()
            .iter()
            .map(|v| format!("{}:{}", v.name, vocab.domains[v.domain].name))
            .collect();
        let args: Vec<String> = self.args.iter().map(|a| a.display(vocab, self.vars())).collect();
        let cond = self.constraint.describe(vocab);
        let head = if cond.is_empty() { vars.join(", ") } else { format!("{} | {}", vars.join(", "), cond) };
        format!("{} ({}) on {}", self.name, head, args.join(", "))
    }
}

/// Row-major index helper: the first argument varies slowest.
pub fn row_index(sizes: &[usize], values: &[usize]) -> usize {
    let mut idx = 0;
    for (s, v) in sizes.iter().zip(values) {
        idx = idx * s + v;
    }
    idx
}

/// Inverse of [`row_index`].
pub fn row_values(sizes: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for i in (0..sizes.len()).rev() {
        out[i] = idx % sizes[i];
        idx /= sizes[i];
    }
    out
}

/// One observation: every instance of `atom` admitted by `constraint` takes
/// value `value` (an index into the relation's range).
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceItem {
    pub atom: Atom,
    pub constraint: Constraint,
    pub value: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evidence {
    pub items: Vec<EvidenceItem>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ground(rel: RelId, args: Vec<u32>, value: usize) -> EvidenceItem {
        EvidenceItem {
            atom: Atom { rel, terms: args.into_iter().map(Term::Const).collect() },
            constraint: Constraint::empty_vars(),
            value,
        }
    }

    /// Observed value per ground atom. Errors on conflicting observations.
    pub fn ground_map(&self) -> Result<BTreeMap<GroundAtom, usize>> {
        let mut map = BTreeMap::new();
        for item in &self.items {
            for t in item.constraint.expand() {
                let g = item.atom.ground(&t);
                if let Some(prev) = map.insert(g.clone(), item.value) {
                    if prev != item.value {
                        return Err(Error::Validation(format!(
                            "conflicting evidence on relation {} {:?}",
                            g.rel, g.args
                        )));
                    }
                }
            }
        }
        Ok(map)
    }

    /// Evidence with the given ground atoms removed.
    pub fn without(&self, atoms: &[GroundAtom]) -> Evidence {
        let mut items = Vec::new();
        for item in &self.items {
            if item.atom.is_ground() && item.constraint.arity() == 0 {
                if !atoms.contains(&item.atom.ground(&[])) {
                    items.push(item.clone());
                }
                continue;
            }
            let hits = atoms.iter().any(|a| {
                item.constraint.expand().iter().any(|t| &item.atom.ground(t) == a)
            });
            if !hits {
                items.push(item.clone());
                continue;
            }
            for t in item.constraint.expand() {
                let g = item.atom.ground(&t);
                if !atoms.contains(&g) {
                    items.push(Evidence::ground(g.rel, g.args, item.value));
                }
            }
        }
        Evidence { items }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub rel: RelId,
    pub args: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub terms: Vec<GroundAtom>,
}

impl Query {
    pub fn single(g: GroundAtom) -> Self {
        Query { terms: vec![g] }
    }

    pub fn display(&self, vocab: &Vocab) -> String {
        self.terms.iter().map(|t| vocab.ground_name(t)).collect::<Vec<_>>().join(", ")
    }
}

/// Joint distribution over the query terms, row-major over their ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub terms: Vec<GroundAtom>,
    pub shape: Vec<usize>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn uniform(terms: Vec<GroundAtom>, shape: Vec<usize>) -> Self {
        let len: usize = shape.iter().product();
        Distribution { terms, shape, probs: vec![1.0 / len as f64; len] }
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        if self.probs.len() != other.probs.len() {
            return f64::INFINITY;
        }
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Labels of row `i`, e.g. `true,false`.
    pub fn row_label(&self, vocab: &Vocab, i: usize) -> String {
        let vals = row_values(&self.shape, i);
        vals.iter()
            .zip(&self.terms)
            .map(|(&v, t)| vocab.relations[t.rel].range[v].clone())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// A validated model.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub vocab: Arc<Vocab>,
    pub parfactors: Vec<Parfactor>,
    pub evidence: Evidence,
}

impl Model {
    pub fn new(vocab: Vocab, parfactors: Vec<Parfactor>) -> Result<Self> {
        let m = Model { vocab: Arc::new(vocab), parfactors, evidence: Evidence::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let vocab = &*self.vocab;
        for d in &vocab.domains {
            if d.constants.is_empty() {
                return Err(Error::Validation(format!("domain {} is empty", d.name)));
            }
            let mut seen = std::collections::BTreeSet::new();
            for c in &d.constants {
                if !seen.insert(c) {
                    return Err(Error::Validation(format!("constant {c} repeated in domain {}", d.name)));
                }
            }
        }
        for r in &vocab.relations {
            if r.range.len() < 2 {
                return Err(Error::Validation(format!("relation {} needs at least two values", r.name)));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for g in &self.parfactors {
            if !names.insert(g.name.clone()) {
                return Err(Error::DuplicateParfactor(g.name.clone()));
            }
            validate_parfactor(vocab, g)?;
        }
        for item in &self.evidence.items {
            check_atom(vocab, &item.atom, &item.constraint.vars)?;
            if item.value >= vocab.range_size(item.atom.rel) {
                return Err(Error::Validation("evidence value outside range".into()));
            }
        }
        self.evidence.ground_map()?;
        Ok(())
    }

    pub fn with_evidence(&self, evidence: Evidence) -> Result<Model> {
        let m = Model { evidence, ..self.clone() };
        m.validate()?;
        Ok(m)
    }

    pub fn relation_ids(&self) -> Vec<RelId> {
        let mut out: Vec<RelId> = self.parfactors.iter().flat_map(|g| g.relations()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Compares with tolerance on potentials (printing goes through linear space).
    pub fn structurally_eq(&self, other: &Model) -> bool {
        self.vocab == other.vocab
            && self.evidence == other.evidence
            && self.parfactors.len() == other.parfactors.len()
            && self.parfactors.iter().zip(&other.parfactors).all(|(a, b)| {
                a.name == b.name
                    && a.constraint == b.constraint
                    && a.args == b.args
                    && a.table.len() == b.table.len()
                    && a.table.iter().zip(&b.table).all(|(x, y)| {
                        x == y || (x - y).abs() <= 1e-12 * x.abs().max(1.0)
                    })
            })
    }

    pub fn parfactor(&self, name: &str) -> Option<&Parfactor> {
        self.parfactors.iter().find(|g| g.name == name)
    }
}

fn check_atom(vocab: &Vocab, atom: &Atom, vars: &[Logvar]) -> Result<()> {
    let rel = vocab
        .relations
        .get(atom.rel)
        .ok_or_else(|| Error::UnknownRelation(format!("#{}", atom.rel)))?;
    if rel.arity() != atom.terms.len() {
        return Err(Error::Validation(format!("{} expects {} arguments", rel.name, rel.arity())));
    }
    for (t, &d) in atom.terms.iter().zip(&rel.params) {
        match t {
            Term::Var(v) => {
                let lv = vars.get(*v).ok_or_else(|| Error::UndeclaredLogvar(format!("#{v}")))?;
                if lv.domain != d {
                    return Err(Error::Validation(format!(
                        "logvar {} has domain {} but {} expects {}",
                        lv.name, vocab.domains[lv.domain].name, rel.name, vocab.domains[d].name
                    )));
                }
            }
            Term::Const(c) => {
                if *c >= vocab.domain_size(d) {
                    return Err(Error::Validation(format!("constant outside domain in {}", rel.name)));
                }
            }
        }
    }
    Ok(())
}

pub fn validate_parfactor(vocab: &Vocab, g: &Parfactor) -> Result<()> {
    for v in g.vars() {
        if v.domain >= vocab.domains.len() || v.size != vocab.domain_size(v.domain) {
            return Err(Error::UndeclaredDomain(v.name.clone()));
        }
    }
    for a in &g.args {
        match a {
            Arg::Atom(atom) => check_atom(vocab, atom, g.vars())?,
            Arg::Count(c) => check_atom(vocab, &c.atom, &c.over.vars)?,
        }
    }
    let expected = g.table_len(vocab);
    if g.table.len() != expected {
        return Err(Error::TableSize { parfactor: g.name.clone(), expected, found: g.table.len() });
    }
    if g.table.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Validation(format!("parfactor {} has an invalid potential", g.name)));
    }
    if g.table.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::AllZeroTable(g.name.clone()));
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "#{c}"),
        }
    }
}
