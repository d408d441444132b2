//! Dense propositional factors over ground randvars (log space).

use crate::error::{Error, Result};
use crate::logspace::{self, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    /// Randvar ids, sorted ascending and unique.
    pub vars: Vec<usize>,
    pub card: Vec<usize>,
    pub table: Vec<f64>,
}

impl Factor {
    pub fn unit() -> Self {
        Factor { vars: Vec::new(), card: Vec::new(), table: vec![0.0] }
    }

    /// Builds a factor from arbitrary-order variables, reordering the table.
    pub fn from_unsorted(vars: &[usize], card: &[usize], table: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        let svars: Vec<usize> = order.iter().map(|&i| vars[i]).collect();
        let scard: Vec<usize> = order.iter().map(|&i| card[i]).collect();
        let len = table.len();
        let mut out = vec![ZERO; len];
        let mut vals = vec![0usize; vars.len()];
        for (i, slot) in out.iter_mut().enumerate() {
            // i indexes the sorted layout; recover original layout index
            let mut rest = i;
            for k in (0..svars.len()).rev() {
                vals[order[k]] = rest % scard[k];
                rest /= scard[k];
            }
            let mut idx = 0;
            for (k, &v) in vals.iter().enumerate() {
                idx = idx * card[k] + v;
            }
            *slot = table[idx];
        }
        Factor { vars: svars, card: scard, table: out }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.card[i + 1];
        }
        s
    }

    pub fn product(&self, other: &Factor, limit: usize) -> Result<Factor> {
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        for (v, c) in other.vars.iter().zip(&other.card) {
            if let Err(pos) = vars.binary_search(v) {
                vars.insert(pos, *v);
                card.insert(pos, *c);
            }
        }
        let len: usize = card.iter().try_fold(1usize, |a, &c| a.checked_mul(c)).unwrap_or(usize::MAX);
        if len > limit {
            return Err(Error::Guard(format!("factor with {} randvars exceeds table limit", vars.len())));
        }
        let map = |f: &Factor| -> Vec<usize> {
            // stride of each output var inside f (0 if absent)
            let fs = f.strides();
            vars.iter().map(|v| f.vars.binary_search(v).map(|i| fs[i]).unwrap_or(0)).collect()
        };
        let (sa, sb) = (map(self), map(other));
        let mut table = vec![0.0; len];
        let mut vals = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for slot in table.iter_mut() {
            *slot = self.table[ia] + other.table[ib];
            for k in (0..vars.len()).rev() {
                vals[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if vals[k] < card[k] {
                    break;
                }
                ia -= sa[k] * card[k];
                ib -= sb[k] * card[k];
                vals[k] = 0;
            }
        }
        Ok(Factor { vars, card, table })
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let strides = self.strides();
        let c = self.card[pos];
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        vars.remove(pos);
        card.remove(pos);
        let len: usize = card.iter().product();
        let inner = strides[pos];
        let mut table = Vec::with_capacity(len);
        for i in 0..len {
            let hi = i / inner;
            let lo = i % inner;
            let base = hi * inner * c + lo;
            table.push(logspace::sum((0..c).map(|k| self.table[base + k * inner])));
        }
        Factor { vars, card, table }
    }

    /// Marginal over `keep` (sorted subset of `vars`).
    pub fn marginal(&self, keep: &[usize]) -> Factor {
        let mut f = self.clone();
        for v in self.vars.iter().filter(|v| !keep.contains(v)) {
            f = f.sum_out(*v);
        }
        f
    }

    /// Table over `order` (a permutation of `vars`), row-major.
    pub fn table_in_order(&self, order: &[usize]) -> Vec<f64> {
        let strides = self.strides();
        let pos: Vec<usize> = order.iter().map(|v| self.vars.binary_search(v).expect("var present")).collect();
        let card: Vec<usize> = pos.iter().map(|&p| self.card[p]).collect();
        let len: usize = card.iter().product();
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            let mut rest = i;
            let mut idx = 0;
            for k in (0..order.len()).rev() {
                idx += (rest % card[k]) * strides[pos[k]];
                rest /= card[k];
            }
            out.push(self.table[idx]);
        }
        out
    }
}
