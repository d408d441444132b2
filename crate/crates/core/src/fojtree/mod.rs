//! First-order junction trees over PRV classes and the lifted junction tree
//! algorithm.
//!
//! PRVs are identified by relation, so `Smokes(X)` and `Smokes(Y)` over one
//! domain belong to the same class.

mod build;
mod ljt;

pub use build::construct;
pub use ljt::ljt_answer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::Arc;

use crate::lve::Trace;
use crate::model::{Model, Parfactor, RelId, Vocab};

#[derive(Clone, Debug)]
pub struct Parcluster {
    pub id: usize,
    pub prvs: BTreeSet<RelId>,
    pub local: Vec<Parfactor>,
    /// Messages received, keyed by sender.
    pub inbox: BTreeMap<usize, Vec<Parfactor>>,
}

#[derive(Clone, Debug)]
pub struct FoJtree {
    pub vocab: Arc<Vocab>,
    pub nodes: Vec<Parcluster>,
    pub edges: Vec<(usize, usize)>,
    /// Operator applications of evidence entering and message passing.
    pub trace: Trace,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub checks: Vec<PropertyCheck>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl FoJtree {
    /// Tree from explicit clusters, edges and local models.
    pub fn from_parts(
        vocab: Arc<Vocab>,
        clusters: Vec<BTreeSet<RelId>>,
        edges: Vec<(usize, usize)>,
        locals: Vec<Vec<Parfactor>>,
    ) -> FoJtree {
        let nodes = clusters
            .into_iter()
            .zip(locals)
            .enumerate()
            .map(|(id, (prvs, local))| Parcluster { id, prvs, local, inbox: BTreeMap::new() })
            .collect();
        FoJtree { vocab, nodes, edges, trace: Trace::default(), passed: false }
    }

    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| if a == i { Some(b) } else if b == i { Some(a) } else { None })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn separator(&self, i: usize, j: usize) -> BTreeSet<RelId> {
        self.nodes[i].prvs.intersection(&self.nodes[j].prvs).copied().collect()
    }

    /// Parclusters containing relation `rel`, by id.
    pub fn covering(&self, rel: RelId) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.prvs.contains(&rel)).map(|n| n.id).collect()
    }

    fn distances(&self, from: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        dist[from] = Some(0);
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for v in self.neighbours(u) {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Node of minimum eccentricity, lowest id on ties.
    pub fn center(&self) -> usize {
        (0..self.nodes.len())
            .min_by_key(|&i| (self.distances(i).iter().map(|d| d.unwrap_or(usize::MAX)).max().unwrap_or(0), i))
            .unwrap_or(0)
    }

    /// Checks the structure and the three jtree properties against `m`.
    pub fn verify(&self, m: &Model) -> Report {
        let vocab = &self.vocab;
        let mut checks = Vec::new();

        let n = self.nodes.len();
        let connected = n == 0 || self.distances(0).iter().all(Option::is_some);
        let tree = connected && self.edges.len() + 1 == n.max(1);
        checks.push(PropertyCheck {
            name: "tree",
            passed: tree,
            witness: (!tree).then(|| format!("{} nodes, {} edges, connected={connected}", n, self.edges.len())),
        });

        let used: BTreeSet<RelId> = m.parfactors.iter().flat_map(|g| g.relations()).collect();
        let stray = self.nodes.iter().find_map(|c| c.prvs.iter().find(|r| !used.contains(r)).map(|r| (c.id, *r)));
        checks.push(PropertyCheck {
            name: "cover",
            passed: stray.is_none(),
            witness: stray.map(|(c, r)| format!("C{} holds {}", c + 1, vocab.relations[r].name)),
        });

        let mut witness = None;
        for g in &m.parfactors {
            let holders: Vec<&Parcluster> =
                self.nodes.iter().filter(|c| c.local.iter().any(|l| l.name == g.name)).collect();
            let covered = holders.len() == 1 && g.relations().iter().all(|r| holders[0].prvs.contains(r));
            if !covered {
                witness = Some(g.name.clone());
                break;
            }
        }
        checks.push(PropertyCheck { name: "partition", passed: witness.is_none(), witness });

        let mut witness = None;
        let rels: BTreeSet<RelId> = self.nodes.iter().flat_map(|c| c.prvs.iter().copied()).collect();
        for r in rels {
            let holders = self.covering(r);
            // holders must induce a connected subgraph
            let mut seen = BTreeSet::from([holders[0]]);
            let mut stack = vec![holders[0]];
            while let Some(u) = stack.pop() {
                for v in self.neighbours(u) {
                    if holders.contains(&v) && seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
            if seen.len() != holders.len() {
                witness = Some(vocab.relations[r].name.clone());
                break;
            }
        }
        checks.push(PropertyCheck { name: "running_intersection", passed: witness.is_none(), witness });
        Report { checks }
    }

    pub fn prv_list(&self, set: &BTreeSet<RelId>) -> String {
        set.iter()
            .map(|&r| {
                let rel = &self.vocab.relations[r];
                let params: Vec<&str> = rel.params.iter().map(|&d| self.vocab.domains[d].name.as_str()).collect();
                format!("{}({})", rel.name, params.join(","))
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// One line per parcluster and per edge.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.nodes {
            let names: Vec<&str> = c.local.iter().map(|g| g.name.as_str()).collect();
            let _ = writeln!(out, "parcluster C{} {{{}}} | true ; local {}", c.id + 1, self.prv_list(&c.prvs), names.join(" "));
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "edge C{} C{} separator {{{}}}", a + 1, b + 1, self.prv_list(&self.separator(a, b)));
        }
        out
    }
}
