use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::logspace;
use crate::model::{Distribution, Query};

use super::ve::{eliminate, interaction_graph};
use super::{query_vars, to_distribution, Factor, GroundFactorGraph};

/// Calibrated propositional junction tree.
#[derive(Clone, Debug)]
pub struct JunctionTree {
    pub cliques: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub beliefs: Vec<Factor>,
    pub log_z: f64,
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

impl JunctionTree {
    /// Triangulates so that every set in `extra` lies in one clique, then
    /// calibrates with a collect and a distribute pass.
    pub fn build(g: &GroundFactorGraph, extra: &[Vec<usize>], limits: &Limits) -> Result<Self> {
        let adj = interaction_graph(g, extra);
        let (_, elim) = eliminate(g, adj, &BTreeSet::new());
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        let mut holders: HashMap<usize, Vec<usize>> = HashMap::new();
        for c in elim {
            let covered = holders
                .get(&c[0])
                .is_some_and(|ids| ids.iter().any(|&i| is_subset(&c, &cliques[i])));
            if covered {
                continue;
            }
            let size = c.iter().try_fold(1usize, |a, &v| a.checked_mul(g.card[v])).unwrap_or(usize::MAX);
            if size > limits.table_entries {
                return Err(Error::Guard(format!("junction tree clique over {} randvars", c.len())));
            }
            for &v in &c {
                holders.entry(v).or_default().push(cliques.len());
            }
            cliques.push(c);
        }

        // maximum spanning tree on separator size
        let mut cand: BTreeSet<(usize, usize)> = BTreeSet::new();
        for ids in holders.values() {
            for (k, &i) in ids.iter().enumerate() {
                for &j in &ids[k + 1..] {
                    cand.insert((i.min(j), i.max(j)));
                }
            }
        }
        let mut weighted: Vec<(usize, usize, usize)> =
            cand.into_iter().map(|(i, j)| (intersect(&cliques[i], &cliques[j]).len(), i, j)).collect();
        weighted.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut parent: Vec<usize> = (0..cliques.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        let mut edges = Vec::new();
        for (_, i, j) in weighted {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                edges.push((i, j));
            }
        }
        for i in 1..cliques.len() {
            let (r0, ri) = (find(&mut parent, 0), find(&mut parent, i));
            if r0 != ri {
                parent[ri] = r0;
                edges.push((0, i));
            }
        }

        let mut pots: Vec<Factor> = cliques
            .iter()
            .map(|c| Factor { vars: c.clone(), card: c.iter().map(|&v| g.card[v]).collect(), table: vec![0.0; c.iter().map(|&v| g.card[v]).product()] })
            .collect();
        let mut scalar = 0.0;
        for f in &g.factors {
            let f = &f.factor;
            let home = match f.vars.first() {
                None => None,
                Some(v) => holders[v].iter().copied().find(|&i| is_subset(&f.vars, &cliques[i])),
            };
            match home {
                Some(i) => pots[i] = pots[i].product(f, limits.table_entries)?,
                None if f.vars.is_empty() => scalar += f.table[0],
                None => return Err(Error::Internal("factor not covered by a clique".into())),
            }
        }

        let n = cliques.len();
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in &edges {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
        // preorder from clique 0
        let mut order = Vec::new();
        let mut up: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        if n > 0 {
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(c) = stack.pop() {
                order.push(c);
                for &d in &nbrs[c] {
                    if !seen[d] {
                        seen[d] = true;
                        up[d] = Some(c);
                        stack.push(d);
                    }
                }
            }
        }
        let mut msgs: HashMap<(usize, usize), Factor> = HashMap::new();
        let send = |from: usize, to: usize, msgs: &HashMap<(usize, usize), Factor>| -> Result<Factor> {
            let mut acc = pots[from].clone();
            for &d in &nbrs[from] {
                if d != to {
                    acc = acc.product(&msgs[&(d, from)], limits.table_entries)?;
                }
            }
            Ok(acc.marginal(&intersect(&cliques[from], &cliques[to])))
        };
        for &c in order.iter().rev() {
            if let Some(p) = up[c] {
                let m = send(c, p, &msgs)?;
                msgs.insert((c, p), m);
            }
        }
        for &c in &order {
            for &d in &nbrs[c] {
                if up[d] == Some(c) {
                    let m = send(c, d, &msgs)?;
                    msgs.insert((c, d), m);
                }
            }
        }
        let mut beliefs = Vec::with_capacity(n);
        for c in 0..n {
            let mut b = pots[c].clone();
            for &d in &nbrs[c] {
                b = b.product(&msgs[&(d, c)], limits.table_entries)?;
            }
            beliefs.push(b);
        }
        let mentioned: BTreeSet<usize> = cliques.iter().flatten().copied().collect();
        let free: f64 = (0..g.randvars.len())
            .filter(|v| !mentioned.contains(v))
            .map(|v| (g.card[v] as f64).ln())
            .sum();
        let root = beliefs.first().map_or(0.0, |b| logspace::sum(b.table.iter().copied()));
        Ok(JunctionTree { cliques, edges, beliefs, log_z: root + scalar + free })
    }

    /// Lowest-id clique containing all of `vars`.
    pub fn covering(&self, vars: &[usize]) -> Option<usize> {
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        self.cliques.iter().position(|c| is_subset(&sorted, c))
    }
}

pub fn jt_marginals(g: &GroundFactorGraph, queries: &[Query], limits: &Limits) -> Result<Vec<Distribution>> {
    let qvars: Vec<Vec<usize>> = queries.iter().map(|q| query_vars(g, q)).collect::<Result<_>>()?;
    let extra: Vec<Vec<usize>> = qvars
        .iter()
        .map(|v| {
            let mut s = v.clone();
            s.sort_unstable();
            s
        })
        .collect();
    let tree = JunctionTree::build(g, &extra, limits)?;
    queries
        .iter()
        .zip(&qvars)
        .map(|(q, vars)| {
            let c = tree.covering(vars).ok_or_else(|| Error::Internal("query not in a clique".into()))?;
            to_distribution(g, q, vars, &tree.beliefs[c])
        })
        .collect()
}
