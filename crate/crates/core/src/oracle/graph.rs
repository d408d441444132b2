use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::logspace::ZERO;
use crate::model::{row_index, Arg, Evidence, GroundAtom, Model, Vocab};

use super::factor::Factor;

#[derive(Clone, Debug)]
pub struct GroundFactor {
    /// Parfactor the factor was grounded from.
    pub source: String,
    pub factor: Factor,
}

/// Propositional factor graph. Its randvars are every ground atom of every
/// declared relation; atoms that no factor mentions are free.
#[derive(Clone, Debug)]
pub struct GroundFactorGraph {
    pub vocab: Arc<Vocab>,
    pub randvars: Vec<GroundAtom>,
    pub index: HashMap<GroundAtom, usize>,
    pub card: Vec<usize>,
    pub factors: Vec<GroundFactor>,
}

impl GroundFactorGraph {
    pub fn randvar(&self, g: &GroundAtom) -> Result<usize> {
        self.index.get(g).copied().ok_or_else(|| Error::UnknownRandvar(self.vocab.ground_name(g)))
    }

    pub fn name(&self, v: usize) -> String {
        self.vocab.ground_name(&self.randvars[v])
    }
}

/// Number of ground atoms over the full domains of all relations.
pub fn universe_size(vocab: &Vocab) -> u128 {
    vocab
        .relations
        .iter()
        .map(|r| r.params.iter().map(|&d| vocab.domain_size(d) as u128).product::<u128>())
        .sum()
}

/// Grounds every parfactor; evidence zeroes the rows it contradicts.
pub fn ground_model(m: &Model, e: &Evidence, limits: &Limits) -> Result<GroundFactorGraph> {
    let vocab = m.vocab.clone();
    if universe_size(&vocab) > limits.ground_randvars as u128 {
        return Err(Error::Guard(format!(
            "grounding needs {} randvars (limit {})",
            universe_size(&vocab),
            limits.ground_randvars
        )));
    }
    let mut randvars = Vec::new();
    let mut card = Vec::new();
    for (rel, r) in vocab.relations.iter().enumerate() {
        let sizes: Vec<usize> = r.params.iter().map(|&d| vocab.domain_size(d) as usize).collect();
        let total: usize = sizes.iter().product();
        for i in 0..total {
            let vals = crate::model::row_values(&sizes, i);
            randvars.push(GroundAtom { rel, args: vals.into_iter().map(|v| v as u32).collect() });
            card.push(r.range.len());
        }
    }
    let index: HashMap<GroundAtom, usize> =
        randvars.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
    let gr: u64 = crate::model::gr_size(m);
    if gr as usize > limits.ground_randvars.saturating_mul(4) {
        return Err(Error::Guard(format!("grounding needs {gr} factors")));
    }

    let mut factors = Vec::new();
    for g in &m.parfactors {
        let sizes = g.arg_sizes(&vocab);
        for t in g.constraint.expand() {
            // ground randvars of each argument
            let arg_vars: Vec<Vec<usize>> = g
                .args
                .iter()
                .map(|a| match a {
                    Arg::Atom(atom) => vec![index[&atom.ground(&t)]],
                    Arg::Count(c) => c.ground_atoms().iter().map(|x| index[x]).collect(),
                })
                .collect();
            let mut vars: Vec<usize> = arg_vars.iter().flatten().copied().collect();
            vars.sort_unstable();
            vars.dedup();
            let vcard: Vec<usize> = vars.iter().map(|&v| card[v]).collect();
            let len = vcard.iter().try_fold(1usize, |a, &c| a.checked_mul(c)).unwrap_or(usize::MAX);
            if len > limits.table_entries {
                return Err(Error::Guard(format!("ground factor of {} is too large", g.name)));
            }
            let mut table = Vec::with_capacity(len);
            for i in 0..len {
                let vals = crate::model::row_values(&vcard, i);
                let value_of = |v: usize| vals[vars.binary_search(&v).expect("var present")];
                let row: Vec<usize> = g
                    .args
                    .iter()
                    .zip(&arg_vars)
                    .map(|(a, av)| match a {
                        Arg::Atom(_) => value_of(av[0]),
                        Arg::Count(c) => {
                            let r = vocab.range_size(c.atom.rel);
                            let mut h = vec![0u32; r];
                            for &v in av {
                                h[value_of(v)] += 1;
                            }
                            crate::histogram::histogram_index(&h)
                        }
                    })
                    .collect();
                table.push(g.table[row_index(&sizes, &row)]);
            }
            factors.push(GroundFactor { source: g.name.clone(), factor: Factor { vars, card: vcard, table } });
        }
    }

    let observed: BTreeMap<GroundAtom, usize> = e.ground_map()?;
    let mut touched = vec![false; randvars.len()];
    let obs: HashMap<usize, usize> = observed
        .iter()
        .map(|(g, &v)| index.get(g).map(|&i| (i, v)).ok_or_else(|| Error::UnknownRandvar(vocab.ground_name(g))))
        .collect::<Result<_>>()?;
    for f in factors.iter_mut() {
        let positions: Vec<(usize, usize)> = f
            .factor
            .vars
            .iter()
            .enumerate()
            .filter_map(|(k, v)| obs.get(v).map(|&val| (k, val)))
            .collect();
        if positions.is_empty() {
            continue;
        }
        for &(k, _) in &positions {
            touched[f.factor.vars[k]] = true;
        }
        let fc = f.factor.card.clone();
        for (i, slot) in f.factor.table.iter_mut().enumerate() {
            let vals = crate::model::row_values(&fc, i);
            if positions.iter().any(|&(k, val)| vals[k] != val) {
                *slot = ZERO;
            }
        }
    }
    for (&v, &val) in &obs {
        if !touched[v] {
            let mut table = vec![ZERO; card[v]];
            table[val] = 0.0;
            factors.push(GroundFactor {
                source: "evidence".into(),
                factor: Factor { vars: vec![v], card: vec![card[v]], table },
            });
        }
    }
    Ok(GroundFactorGraph { vocab, randvars, index, card, factors })
}
