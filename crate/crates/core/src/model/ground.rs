use std::collections::BTreeSet;

use super::{Atom, Constraint, GroundAtom, Model, Parfactor};

/// Logvar assignments of the ground factors of `g`, one per constraint tuple.
pub fn gr_instances(g: &Parfactor) -> Vec<Vec<u32>> {
    g.constraint.expand()
}

/// Ground randvars represented by `atom` under `constraint`.
pub fn prv_instances(atom: &Atom, constraint: &Constraint) -> BTreeSet<GroundAtom> {
    constraint.expand().iter().map(|t| atom.ground(t)).collect()
}

pub fn parfactor_gr_size(g: &Parfactor) -> u64 {
    g.constraint.count()
}

/// Number of ground factors of the model.
pub fn gr_size(m: &Model) -> u64 {
    m.parfactors.iter().map(parfactor_gr_size).sum()
}
