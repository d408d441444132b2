use std::collections::BTreeSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::histogram::ln_binomial;
use crate::logspace::{self, ZERO};

use super::WfomcProblem;

pub type NodeId = usize;

/// `c + Σ coeff · k_var` over the counts bound by enclosing counting nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SizeExpr {
    pub c: i64,
    pub vars: Vec<(usize, i64)>,
}

impl SizeExpr {
    pub fn konst(c: i64) -> Self {
        SizeExpr { c, vars: Vec::new() }
    }

    pub fn var(v: usize) -> Self {
        SizeExpr { c: 0, vars: vec![(v, 1)] }
    }

    pub fn as_const(&self) -> Option<i64> {
        self.vars.is_empty().then_some(self.c)
    }

    pub fn plus(&self, other: &SizeExpr, sign: i64) -> SizeExpr {
        let mut vars = self.vars.clone();
        for &(v, k) in &other.vars {
            match vars.iter_mut().find(|(w, _)| *w == v) {
                Some(e) => e.1 += sign * k,
                None => vars.push((v, sign * k)),
            }
        }
        vars.retain(|&(_, k)| k != 0);
        vars.sort_unstable();
        SizeExpr { c: self.c + sign * other.c, vars }
    }

    pub fn offset(&self, d: i64) -> SizeExpr {
        SizeExpr { c: self.c + d, vars: self.vars.clone() }
    }

    pub fn eval(&self, env: &[u64]) -> i64 {
        self.c + self.vars.iter().map(|&(v, k)| k * env[v] as i64).sum::<i64>()
    }
}

impl std::fmt::Display for SizeExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        for &(v, k) in &self.vars {
            match k {
                1 if s.is_empty() => s.push_str(&format!("k{v}")),
                1 => s.push_str(&format!("+k{v}")),
                -1 => s.push_str(&format!("-k{v}")),
                k if k > 0 && !s.is_empty() => s.push_str(&format!("+{k}k{v}")),
                k => s.push_str(&format!("{k}k{v}")),
            }
        }
        if s.is_empty() {
            write!(f, "{}", self.c)
        } else if self.c > 0 {
            write!(f, "{s}+{}", self.c)
        } else if self.c < 0 {
            write!(f, "{s}{}", self.c)
        } else {
            write!(f, "{s}")
        }
    }
}

/// Product of size expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly(pub Vec<SizeExpr>);

impl Poly {
    pub fn one() -> Self {
        Poly(Vec::new())
    }

    pub fn eval(&self, env: &[u64]) -> f64 {
        self.0.iter().map(|e| e.eval(env) as f64).product()
    }

    pub fn as_const(&self) -> Option<f64> {
        self.0.iter().map(|e| e.as_const().map(|c| c as f64)).product()
    }
}

impl std::fmt::Display for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|e| if e.vars.is_empty() || (e.c == 0 && e.vars.len() == 1) { e.to_string() } else { format!("({e})") }).collect();
        write!(f, "{}", parts.join("*"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    True,
    False,
    /// `ln` of a constant factor.
    Const(f64),
    /// Every atom of `atoms` fixed to `positive`: weight `w^count`.
    Leaf { pred: usize, positive: bool, atoms: String, count: Poly },
    /// Atoms left unconstrained: `(w_T + w_F)^count`.
    Free { pred: usize, atoms: String, count: Poly },
    And(Vec<NodeId>),
    /// Shannon split; the first child of each branch is the splitting leaf.
    Or(Vec<NodeId>),
    /// `zero` when `count` evaluates to zero, `positive` otherwise.
    Cond { count: Poly, zero: NodeId, positive: NodeId },
    /// `child^mult`: one isomorphic copy per element of a domain part.
    SetConj { part: String, mult: SizeExpr, child: NodeId },
    /// `Σ_{k=0}^{bound} C(bound,k) · child[k_var := k]`.
    CountDisj { atoms: String, var: usize, bound: SizeExpr, child: NodeId },
    /// As `CountDisj` with one compiled child per count.
    CountDisjExplicit { atoms: String, bound: u64, children: Vec<NodeId> },
}

/// Atom class covered by a node: predicate, description and size.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopeItem {
    pub pred: usize,
    pub atoms: String,
    pub count: Poly,
}

#[derive(Clone, Debug, Default)]
pub struct Circuit {
    pub nodes: Vec<Node>,
    pub scopes: Vec<Vec<ScopeItem>>,
    pub root: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Validation {
    pub decomposable: bool,
    pub deterministic: bool,
    pub witness: Option<String>,
}

impl Validation {
    pub fn ok(&self) -> bool {
        self.decomposable && self.deterministic
    }
}

impl Circuit {
    pub fn add(&mut self, node: Node, scope: Vec<ScopeItem>) -> NodeId {
        self.nodes.push(node);
        self.scopes.push(scope);
        self.nodes.len() - 1
    }

    fn children(&self, id: NodeId) -> Vec<NodeId> {
        match &self.nodes[id] {
            Node::And(cs) | Node::Or(cs) | Node::CountDisjExplicit { children: cs, .. } => cs.clone(),
            Node::Cond { zero, positive, .. } => vec![*zero, *positive],
            Node::SetConj { child, .. } | Node::CountDisj { child, .. } => vec![*child],
            _ => Vec::new(),
        }
    }

    fn reachable(&self) -> Vec<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                stack.extend(self.children(u));
            }
        }
        seen.into_iter().collect()
    }

    /// Nodes reachable from the root.
    pub fn node_count(&self) -> usize {
        self.reachable().len()
    }

    /// Adds free nodes for every ground atom of `p` the root does not cover.
    pub fn smooth(mut self, p: &WfomcProblem) -> Result<Circuit> {
        let mut covered = vec![0f64; p.predicates.len()];
        for s in &self.scopes[self.root] {
            covered[s.pred] += s.count.as_const().ok_or_else(|| Error::Internal("symbolic root scope".into()))?;
        }
        let mut free = Vec::new();
        for (pred, &c) in covered.iter().enumerate() {
            let missing = p.support_len(pred) as f64 - c;
            if missing < -0.5 {
                return Err(Error::Internal(format!("{} covered {c} times", p.predicates[pred].name)));
            }
            if missing > 0.5 {
                let item = ScopeItem {
                    pred,
                    atoms: format!("{}(rest)", p.predicates[pred].name),
                    count: Poly(vec![SizeExpr::konst(missing.round() as i64)]),
                };
                free.push(self.add(Node::Free { pred, atoms: item.atoms.clone(), count: item.count.clone() }, vec![item]));
            }
        }
        if !free.is_empty() {
            let mut scope = self.scopes[self.root].clone();
            for &f in &free {
                scope.extend(self.scopes[f].iter().cloned());
            }
            free.insert(0, self.root);
            self.root = self.add(Node::And(free), scope);
        }
        Ok(self)
    }

    /// `ln` WFOMC under the weights of `p`, with the number of arithmetic
    /// operations performed.
    pub fn eval_counted(&self, p: &WfomcProblem) -> (f64, u64) {
        let mut ops = 0;
        let v = self.eval_at(self.root, p, &mut Vec::new(), &mut ops);
        (v, ops)
    }

    pub fn eval(&self, p: &WfomcProblem) -> f64 {
        self.eval_counted(p).0
    }

    fn eval_at(&self, id: NodeId, p: &WfomcProblem, env: &mut Vec<u64>, ops: &mut u64) -> f64 {
        *ops += 1;
        match &self.nodes[id] {
            Node::True => 0.0,
            Node::False => ZERO,
            Node::Const(c) => *c,
            Node::Leaf { pred, positive, count, .. } => {
                let w = if *positive { p.predicates[*pred].w_true } else { p.predicates[*pred].w_false };
                logspace::pow(w, count.eval(env))
            }
            Node::Free { pred, count, .. } => {
                let w = logspace::add(p.predicates[*pred].w_true, p.predicates[*pred].w_false);
                logspace::pow(w, count.eval(env))
            }
            Node::And(cs) => {
                let mut acc = 0.0;
                for &c in cs {
                    acc += self.eval_at(c, p, env, ops);
                    if acc == ZERO {
                        return ZERO;
                    }
                }
                acc
            }
            Node::Or(cs) => {
                let vals: Vec<f64> = cs.iter().map(|&c| self.eval_at(c, p, env, ops)).collect();
                logspace::sum(vals)
            }
            Node::Cond { count, zero, positive } => {
                if count.eval(env) > 0.0 {
                    self.eval_at(*positive, p, env, ops)
                } else {
                    self.eval_at(*zero, p, env, ops)
                }
            }
            Node::SetConj { mult, child, .. } => {
                let m = mult.eval(env);
                if m <= 0 {
                    0.0
                } else {
                    logspace::pow(self.eval_at(*child, p, env, ops), m as f64)
                }
            }
            Node::CountDisj { bound, child, var, .. } => {
                let n = bound.eval(env).max(0) as u64;
                debug_assert_eq!(*var, env.len());
                let mut vals = Vec::with_capacity(n as usize + 1);
                for k in 0..=n {
                    env.push(k);
                    vals.push(ln_binomial(n, k) + self.eval_at(*child, p, env, ops));
                    env.pop();
                }
                *ops += n + 1;
                logspace::sum(vals)
            }
            Node::CountDisjExplicit { bound, children, .. } => {
                let vals: Vec<f64> = children
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| ln_binomial(*bound, k as u64) + self.eval_at(c, p, env, ops))
                    .collect();
                logspace::sum(vals)
            }
        }
    }

    /// Checks that conjunctions have disjoint atom classes and that every
    /// disjunction splits on a literal or a count.
    pub fn validate(&self) -> Validation {
        let mut v = Validation { decomposable: true, deterministic: true, witness: None };
        for id in self.reachable() {
            match &self.nodes[id] {
                Node::And(cs) => {
                    let mut seen = BTreeSet::new();
                    for &c in cs {
                        for s in &self.scopes[c] {
                            if !seen.insert((s.pred, s.atoms.clone())) && v.decomposable {
                                v.decomposable = false;
                                v.witness = Some(format!("n{id}: {} shared by two conjuncts", s.atoms));
                            }
                        }
                    }
                }
                Node::Or(cs) => {
                    let split: Vec<Option<(String, bool)>> = cs
                        .iter()
                        .map(|&c| match &self.nodes[c] {
                            Node::And(gs) => match gs.first().map(|&g| &self.nodes[g]) {
                                Some(Node::Leaf { atoms, positive, .. }) => Some((atoms.clone(), *positive)),
                                _ => None,
                            },
                            _ => None,
                        })
                        .collect();
                    let ok = split.len() == 2
                        && matches!((&split[0], &split[1]), (Some((a, x)), Some((b, y))) if a == b && x != y);
                    if !ok && v.deterministic {
                        v.deterministic = false;
                        v.witness = Some(format!("n{id}: branches do not split on one literal"));
                    }
                }
                Node::CountDisj { child, atoms, .. } => {
                    let ok = matches!(&self.nodes[*child], Node::And(gs) if gs.len() >= 2
                        && matches!(&self.nodes[gs[0]], Node::Leaf { positive: true, .. })
                        && matches!(&self.nodes[gs[1]], Node::Leaf { positive: false, .. }));
                    if !ok && v.deterministic {
                        v.deterministic = false;
                        v.witness = Some(format!("n{id}: count over {atoms} is not fixed by its child"));
                    }
                }
                _ => {}
            }
        }
        v
    }

    /// Indented text, one node per line.
    pub fn dump(&self, p: &WfomcProblem) -> String {
        let mut out = String::new();
        self.dump_at(self.root, 0, p, &mut out);
        out
    }

    fn dump_at(&self, id: NodeId, depth: usize, p: &WfomcProblem, out: &mut String) {
        let pad = "  ".repeat(depth);
        let name = |pred: usize| &p.predicates[pred].name;
        let line = match &self.nodes[id] {
            Node::True => "true".to_string(),
            Node::False => "false".to_string(),
            Node::Const(c) => format!("const {}", c.exp()),
            Node::Leaf { positive, atoms, count, .. } => {
                format!("leaf {}{} x{}", if *positive { "" } else { "!" }, atoms, count)
            }
            Node::Free { pred, atoms, count } => format!("free {} x{} ({})", atoms, count, name(*pred)),
            Node::And(_) => "and".to_string(),
            Node::Or(_) => "or".to_string(),
            Node::Cond { count, .. } => format!("cond {count} > 0"),
            Node::SetConj { part, mult, .. } => format!("setconj {part} m={mult}"),
            Node::CountDisj { atoms, var, bound, .. } => format!("countdisj {atoms} k{var}=0..{bound}"),
            Node::CountDisjExplicit { atoms, bound, .. } => format!("countdisj {atoms} k=0..{bound} explicit"),
        };
        let _ = writeln!(out, "{pad}n{id} {line}");
        for c in self.children(id) {
            self.dump_at(c, depth + 1, p, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bool_range, Domain, Relation, Vocab};
    use std::sync::Arc;

    fn problem(w: (f64, f64)) -> WfomcProblem {
        let vocab = Vocab {
            domains: vec![Domain { name: "D".into(), constants: vec!["a".into(), "b".into()] }],
            relations: vec![Relation { name: "S".into(), params: vec![0], range: bool_range() }],
            ranges: Vec::new(),
        };
        let mut p = WfomcProblem::reduce(&Arc::new(vocab), &[]).unwrap();
        p.predicates[0].w_true = w.0.ln();
        p.predicates[0].w_false = w.1.ln();
        p
    }

    #[test]
    fn set_conjunction_exponentiates() {
        let p = problem((1.0, 1.0));
        let mut c = Circuit::default();
        let child = c.add(Node::Const(3f64.ln()), Vec::new());
        c.root = c.add(Node::SetConj { part: "D".into(), mult: SizeExpr::konst(4), child }, Vec::new());
        assert!((c.eval(&p).exp() - 81.0).abs() < 1e-9);
    }

    #[test]
    fn counting_sums_binomials() {
        let p = problem((1.0, 1.0));
        let mut c = Circuit::default();
        let child = c.add(Node::True, Vec::new());
        c.root = c.add(Node::CountDisj { atoms: "S".into(), var: 0, bound: SizeExpr::konst(2), child }, Vec::new());
        assert!((c.eval(&p).exp() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn smoothing_adds_missing_atoms() {
        let p = problem((2.0, 3.0));
        let mut c = Circuit::default();
        c.root = c.add(Node::True, Vec::new());
        let c = c.smooth(&p).unwrap();
        assert!((c.eval(&p).exp() - 25.0).abs() < 1e-9);
        let q = problem((1.0, 1.0));
        let mut d = Circuit::default();
        let leaf = ScopeItem { pred: 0, atoms: "S(a)".into(), count: Poly(vec![SizeExpr::konst(1)]) };
        d.root = d.add(Node::Leaf { pred: 0, positive: true, atoms: "S(a)".into(), count: leaf.count.clone() }, vec![leaf]);
        assert!((d.smooth(&q).unwrap().eval(&q).exp() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn size_expressions_combine() {
        let n = SizeExpr::konst(10);
        let rest = n.plus(&SizeExpr::var(0), -1);
        assert_eq!(rest.eval(&[3]), 7);
        assert_eq!(rest.to_string(), "-k0+10");
        assert_eq!(Poly(vec![rest.clone(), rest.offset(-1)]).eval(&[3]), 42.0);
    }
}
