use std::collections::BTreeSet;

use crate::model::{Model, RelId};

use super::FoJtree;

/// Clusters induced by min-fill elimination on the relation moral graph,
/// keeping only maximal ones.
fn clusters(m: &Model) -> Vec<BTreeSet<RelId>> {
    let rels: BTreeSet<RelId> = m.parfactors.iter().flat_map(|g| g.relations()).collect();
    let nrel = m.vocab.relations.len();
    let mut adj: Vec<BTreeSet<RelId>> = vec![BTreeSet::new(); nrel];
    for g in &m.parfactors {
        let rs = g.relations();
        for &a in &rs {
            for &b in &rs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut alive = rels.clone();
    let mut out: Vec<BTreeSet<RelId>> = Vec::new();
    while !alive.is_empty() {
        let fill = |v: RelId| {
            let ns: Vec<RelId> = adj[v].iter().copied().collect();
            let mut f = 0;
            for (i, &a) in ns.iter().enumerate() {
                for &b in &ns[i + 1..] {
                    if !adj[a].contains(&b) {
                        f += 1;
                    }
                }
            }
            f
        };
        let v = *alive.iter().min_by_key(|&&v| (fill(v), v)).expect("non-empty");
        let mut clique = adj[v].clone();
        clique.insert(v);
        let ns: Vec<RelId> = adj[v].iter().copied().collect();
        for &a in &ns {
            for &b in &ns {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&v);
        }
        alive.remove(&v);
        if !out.iter().any(|c| clique.is_subset(c)) {
            out.retain(|c| !c.is_subset(&clique));
            out.push(clique);
        }
    }
    out
}

/// Builds an FO jtree for `m`: clusters from min-fill, a maximum spanning
/// tree on separator size, each parfactor in the first covering cluster.
pub fn construct(m: &Model) -> FoJtree {
    let mut cs = clusters(m);
    if cs.is_empty() {
        cs.push(BTreeSet::new());
    }
    let n = cs.len();
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((cs[i].intersection(&cs[j]).count(), i, j));
        }
    }
    pairs.sort_by_key(|&(w, i, j)| (std::cmp::Reverse(w), i, j));
    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    let mut edges = Vec::new();
    for (_, i, j) in pairs {
        let (a, b) = (find(&mut root, i), find(&mut root, j));
        if a != b {
            root[a] = b;
            edges.push((i, j));
        }
    }
    let mut locals = vec![Vec::new(); n];
    for g in &m.parfactors {
        let rs = g.relations();
        let home = cs.iter().position(|c| rs.iter().all(|r| c.contains(r))).unwrap_or(0);
        locals[home].push(g.clone());
    }
    FoJtree::from_parts(m.vocab.clone(), cs, edges, locals)
}
