use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::lve::{absorb_all, distribution, eliminate, JustDiff, Keep, Trace};
use crate::model::{Distribution, Evidence, Model, Parfactor, Query};

use super::{construct, FoJtree};

impl FoJtree {
    /// Lets every local model whose parcluster covers an evidence PRV absorb it.
    pub fn enter_evidence(&mut self, e: &Evidence) -> Result<()> {
        for item in &e.items {
            if item.atom.rel >= self.vocab.relations.len() {
                return Err(Error::UnknownRelation(format!("relation #{}", item.atom.rel)));
            }
        }
        for i in 0..self.nodes.len() {
            let items: Vec<_> = e.items.iter().filter(|it| self.nodes[i].prvs.contains(&it.atom.rel)).cloned().collect();
            if items.is_empty() {
                continue;
            }
            let local = std::mem::take(&mut self.nodes[i].local);
            self.nodes[i].local = absorb_all(&self.vocab, local, &Evidence { items }, &mut self.trace)?;
        }
        Ok(())
    }

    /// Parent of every node in a traversal rooted at `root`, and the
    /// traversal order.
    fn rooted(&self, root: usize) -> (Vec<Option<usize>>, Vec<usize>) {
        let mut parent = vec![None; self.nodes.len()];
        let mut order = vec![root];
        let mut seen = vec![false; self.nodes.len()];
        seen[root] = true;
        let mut k = 0;
        while k < order.len() {
            let u = order[k];
            for v in self.neighbours(u) {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    order.push(v);
                }
            }
            k += 1;
        }
        (parent, order)
    }

    fn send(&mut self, from: usize, to: usize, policy: JustDiff, limits: &Limits) -> Result<()> {
        let sep = self.separator(from, to);
        let node = &self.nodes[from];
        let mut ps = node.local.clone();
        for (s, msg) in &node.inbox {
            if *s != to {
                ps.extend(msg.iter().cloned());
            }
        }
        let out = eliminate(&self.vocab, ps, &Keep::Relations(sep.clone()), policy, limits, &mut self.trace)?;
        for g in &out {
            if let Some(a) = g.args.iter().find(|a| !sep.contains(&a.rel())) {
                return Err(Error::Internal(format!(
                    "message C{}->C{} mentions {} outside the separator",
                    from + 1,
                    to + 1,
                    self.vocab.relations[a.rel()].name
                )));
            }
        }
        self.nodes[to].inbox.insert(from, out);
        Ok(())
    }

    /// Inward pass to the center, then outward back to the periphery.
    pub fn pass_messages(&mut self, policy: JustDiff, limits: &Limits) -> Result<()> {
        let center = self.center();
        let (parent, order) = self.rooted(center);
        for &u in order.iter().rev() {
            if let Some(p) = parent[u] {
                self.send(u, p, policy, limits)?;
            }
        }
        for &u in &order {
            if let Some(p) = parent[u] {
                self.send(p, u, policy, limits)?;
            }
        }
        self.passed = true;
        Ok(())
    }

    /// Local models of `nodes` plus the messages entering them from outside.
    pub fn submodel(&self, nodes: &BTreeSet<usize>) -> Vec<Parfactor> {
        let mut out = Vec::new();
        for &i in nodes {
            out.extend(self.nodes[i].local.iter().cloned());
            for (s, msg) in &self.nodes[i].inbox {
                if !nodes.contains(s) {
                    out.extend(msg.iter().cloned());
                }
            }
        }
        out
    }

    /// Smallest subtree joining the lowest-id parcluster covering each term.
    pub fn subtree(&self, q: &Query) -> Result<BTreeSet<usize>> {
        let mut picks = Vec::new();
        for t in &q.terms {
            let c = self.covering(t.rel);
            let first = *c.first().ok_or_else(|| Error::Uncovered(self.vocab.ground_name(t)))?;
            picks.push(first);
        }
        let Some(&root) = picks.first() else {
            return Ok(BTreeSet::from([self.center()]));
        };
        let (parent, _) = self.rooted(root);
        let mut out = BTreeSet::from([root]);
        for &p in &picks {
            let mut u = p;
            while out.insert(u) {
                u = parent[u].expect("connected tree");
            }
        }
        Ok(out)
    }

    fn answer_on(&self, nodes: &BTreeSet<usize>, q: &Query, policy: JustDiff, limits: &Limits, trace: &mut Trace) -> Result<Distribution> {
        if !self.passed && self.nodes.len() > 1 {
            return Err(Error::Precondition("messages have not been passed".into()));
        }
        let ps = self.submodel(nodes);
        let rest = eliminate(&self.vocab, ps, &Keep::Atoms(q.terms.clone()), policy, limits, trace)?;
        distribution(&self.vocab, &rest, &q.terms)
    }

    /// Answers `q` on the submodel of its covering subtree. Query terms must
    /// be unobserved.
    pub fn answer(&self, q: &Query, policy: JustDiff, limits: &Limits, trace: &mut Trace) -> Result<Distribution> {
        let nodes = self.subtree(q)?;
        self.answer_on(&nodes, q, policy, limits, trace)
    }

    /// Answers `q` inside parcluster `node` alone.
    pub fn answer_at(&self, node: usize, q: &Query, policy: JustDiff, limits: &Limits, trace: &mut Trace) -> Result<Distribution> {
        if let Some(t) = q.terms.iter().find(|t| !self.nodes[node].prvs.contains(&t.rel)) {
            return Err(Error::Uncovered(format!("{} in C{}", self.vocab.ground_name(t), node + 1)));
        }
        self.answer_on(&BTreeSet::from([node]), q, policy, limits, trace)
    }
}

/// Builds the tree, enters `evidence`, passes messages and answers `query`.
pub fn ljt_answer(
    m: &Model,
    query: &Query,
    evidence: &Evidence,
    policy: JustDiff,
    limits: &Limits,
    trace: &mut Trace,
) -> Result<Distribution> {
    let mut j = construct(m);
    j.enter_evidence(evidence)?;
    j.pass_messages(policy, limits)?;
    trace.extend(&j.trace);
    crate::engines::answer_unobserved(m, query, evidence, |q| j.answer(q, policy, limits, trace))
}
