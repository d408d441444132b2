use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::error::Result;
use crate::limits::Limits;
use crate::model::{Distribution, Query};

use super::{query_vars, to_distribution, Factor, GroundFactorGraph};

/// Interaction graph over the randvars that factors mention.
pub(crate) fn interaction_graph(g: &GroundFactorGraph, cliques: &[Vec<usize>]) -> HashMap<usize, BTreeSet<usize>> {
    let mut adj: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let scopes = g.factors.iter().map(|f| f.factor.vars.as_slice()).chain(cliques.iter().map(Vec::as_slice));
    for vars in scopes {
        for &a in vars {
            let e = adj.entry(a).or_default();
            e.extend(vars.iter().copied().filter(|&b| b != a));
        }
    }
    adj
}

fn fill_in(adj: &HashMap<usize, BTreeSet<usize>>, v: usize) -> usize {
    let nb: Vec<usize> = adj[&v].iter().copied().collect();
    let mut fill = 0;
    for (i, a) in nb.iter().enumerate() {
        for b in &nb[i + 1..] {
            if !adj[a].contains(b) {
                fill += 1;
            }
        }
    }
    fill
}

/// Min-fill elimination order over `adj`, skipping `keep`. Ties go to the
/// lexicographically smaller randvar name. Returns the order and the
/// elimination clique of each eliminated var.
pub(crate) fn eliminate(
    g: &GroundFactorGraph,
    mut adj: HashMap<usize, BTreeSet<usize>>,
    keep: &BTreeSet<usize>,
) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut names: Vec<usize> = adj.keys().copied().collect();
    names.sort_by_cached_key(|&v| g.name(v));
    let rank: HashMap<usize, usize> = names.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut heap: BinaryHeap<Reverse<(usize, usize, usize)>> = adj
        .keys()
        .filter(|v| !keep.contains(v))
        .map(|&v| Reverse((fill_in(&adj, v), rank[&v], v)))
        .collect();
    let mut done = BTreeSet::new();
    let (mut order, mut cliques) = (Vec::new(), Vec::new());
    while let Some(Reverse((fill, r, v))) = heap.pop() {
        if done.contains(&v) {
            continue;
        }
        let now = fill_in(&adj, v);
        if now != fill {
            heap.push(Reverse((now, r, v)));
            continue;
        }
        let nb: Vec<usize> = adj[&v].iter().copied().collect();
        for &a in &nb {
            let set = adj.get_mut(&a).unwrap();
            set.remove(&v);
            set.extend(nb.iter().copied().filter(|&b| b != a));
        }
        adj.remove(&v);
        done.insert(v);
        let mut clique = nb;
        clique.push(v);
        clique.sort_unstable();
        cliques.push(clique);
        order.push(v);
    }
    (order, cliques)
}

/// Min-fill order over every factor-mentioned randvar outside `keep`.
pub fn min_fill_order(g: &GroundFactorGraph, keep: &[usize]) -> Vec<usize> {
    let keep: BTreeSet<usize> = keep.iter().copied().collect();
    eliminate(g, interaction_graph(g, &[]), &keep).0
}

fn run(g: &GroundFactorGraph, keep: &[usize], limits: &Limits) -> Result<Factor> {
    let order = min_fill_order(g, keep);
    let mut slots: Vec<Option<Factor>> = g.factors.iter().map(|f| Some(f.factor.clone())).collect();
    let mut by_var: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for (i, f) in g.factors.iter().enumerate() {
        for &v in &f.factor.vars {
            by_var.entry(v).or_default().insert(i);
        }
    }
    for v in order {
        let ids = by_var.remove(&v).unwrap_or_default();
        let mut acc = Factor::unit();
        for i in &ids {
            let f = slots[*i].take().expect("factor live");
            for u in &f.vars {
                if let Some(s) = by_var.get_mut(u) {
                    s.remove(i);
                }
            }
            acc = acc.product(&f, limits.table_entries)?;
        }
        let out = acc.sum_out(v);
        let id = slots.len();
        for &u in &out.vars {
            by_var.entry(u).or_default().insert(id);
        }
        slots.push(Some(out));
    }
    let mut acc = Factor::unit();
    for f in slots.into_iter().flatten() {
        acc = acc.product(&f, limits.table_entries)?;
    }
    Ok(acc)
}

/// `ln Z` by variable elimination.
pub fn ve_log_partition(g: &GroundFactorGraph, limits: &Limits) -> Result<f64> {
    let f = run(g, &[], limits)?;
    let mentioned: BTreeSet<usize> = g.factors.iter().flat_map(|f| f.factor.vars.iter().copied()).collect();
    let free: f64 = (0..g.randvars.len())
        .filter(|v| !mentioned.contains(v))
        .map(|v| (g.card[v] as f64).ln())
        .sum();
    Ok(crate::logspace::sum(f.table.iter().copied()) + free)
}

pub fn ve_marginal(g: &GroundFactorGraph, q: &Query, limits: &Limits) -> Result<Distribution> {
    let vars = query_vars(g, q)?;
    let f = run(g, &vars, limits)?;
    to_distribution(g, q, &vars, &f)
}
