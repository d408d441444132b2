//! Lifted operators. Each one preserves the ground semantics of its input:
//! the product of the ground factors before and after agrees on every joint
//! assignment.

use crate::error::{Error, Result};
use crate::histogram::{histogram_index, histograms, ln_multiplicity};
use crate::logspace::{self, ZERO};
use crate::model::{
    row_index, row_values, Arg, Atom, Constraint, ConstraintKind, Crv, EvidenceItem, Logvar, Parfactor, Term,
    ValueSet, Vocab,
};

fn sizes(vocab: &Vocab, args: &[Arg]) -> Vec<usize> {
    args.iter().map(|a| a.size(vocab)).collect()
}

/// Drops logvar `var` from atoms, shifting higher indices down.
fn shift_term(t: Term, var: usize, replacement: Option<u32>) -> Term {
    match t {
        Term::Var(v) if v == var => Term::Const(replacement.expect("logvar still used")),
        Term::Var(v) if v > var => Term::Var(v - 1),
        other => other,
    }
}

fn substitute_args(args: &[Arg], var: usize, c: Option<u32>) -> Vec<Arg> {
    args.iter()
        .map(|a| match a {
            Arg::Atom(atom) => Arg::Atom(atom.map_vars(|v| shift_term(Term::Var(v), var, c))),
            Arg::Count(crv) => Arg::Count(crv.clone()),
        })
        .collect()
}

/// Restricts logvars to new positions: `keep[k]` is the old index of new var `k`.
fn reindex_args(args: &[Arg], keep: &[usize]) -> Vec<Arg> {
    args.iter()
        .map(|a| match a {
            Arg::Atom(atom) => Arg::Atom(atom.map_vars(|v| {
                Term::Var(keep.iter().position(|&k| k == v).expect("logvar kept"))
            })),
            Arg::Count(crv) => Arg::Count(crv.clone()),
        })
        .collect()
}

fn ground_set(crv: &Crv) -> Vec<crate::model::GroundAtom> {
    crv.ground_atoms()
}

/// Whether args `i` and `j` of `g` can denote a common ground randvar.
pub fn may_overlap(g: &Parfactor, i: usize, j: usize) -> bool {
    let (a, b) = (&g.args[i], &g.args[j]);
    if a.rel() != b.rel() {
        return false;
    }
    match (a, b) {
        (Arg::Atom(x), Arg::Atom(y)) => {
            for (s, t) in x.terms.iter().zip(&y.terms) {
                match (s, t) {
                    (Term::Const(p), Term::Const(q)) if p != q => return false,
                    (Term::Var(v), Term::Const(c)) | (Term::Const(c), Term::Var(v)) => {
                        if !g.constraint.allowed_set(*v).contains(*c) {
                            return false;
                        }
                    }
                    (Term::Var(v), Term::Var(w)) if v != w => {
                        let (sv, sw) = (g.constraint.allowed_set(*v), g.constraint.allowed_set(*w));
                        if sv.is_disjoint(&sw) {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
            if x.terms == y.terms {
                return true;
            }
            g.constraint.expand().iter().any(|t| x.ground(t) == y.ground(t))
        }
        (Arg::Atom(x), Arg::Count(c)) | (Arg::Count(c), Arg::Atom(x)) => {
            for (s, t) in x.terms.iter().zip(&c.atom.terms) {
                let theirs = match t {
                    Term::Const(q) => ValueSet::new(vec![*q]),
                    Term::Var(_) => c.over.allowed_set(0),
                };
                let ours = match s {
                    Term::Const(p) => ValueSet::new(vec![*p]),
                    Term::Var(v) => g.constraint.allowed_set(*v),
                };
                if ours.is_disjoint(&theirs) {
                    return false;
                }
            }
            let set = ground_set(c);
            g.constraint.expand().iter().any(|t| set.contains(&x.ground(t)))
        }
        (Arg::Count(c), Arg::Count(d)) => {
            let set = ground_set(c);
            ground_set(d).iter().any(|g| set.contains(g))
        }
    }
}

fn position_sets(g: &Parfactor, a: &Arg) -> Vec<ValueSet> {
    let (atom, c) = match a {
        Arg::Atom(x) => (x, &g.constraint),
        Arg::Count(crv) => (&crv.atom, &crv.over),
    };
    atom.terms
        .iter()
        .map(|t| match t {
            Term::Const(k) => ValueSet::new(vec![*k]),
            Term::Var(v) => c.allowed_set(*v),
        })
        .collect()
}

fn arg_ground_set(g: &Parfactor, a: &Arg) -> std::collections::HashSet<crate::model::GroundAtom> {
    match a {
        Arg::Atom(x) => g.constraint.expand().iter().map(|t| x.ground(t)).collect(),
        Arg::Count(c) => ground_set(c).into_iter().collect(),
    }
}

/// Whether no grounding of arg `i` equals any grounding of arg `j`, across
/// all instances of `g`.
pub fn args_disjoint(g: &Parfactor, i: usize, j: usize) -> bool {
    let (a, b) = (&g.args[i], &g.args[j]);
    if a.rel() != b.rel() {
        return true;
    }
    if position_sets(g, a).iter().zip(&position_sets(g, b)).any(|(s, t)| s.is_disjoint(t)) {
        return true;
    }
    let sa = arg_ground_set(g, a);
    arg_ground_set(g, b).iter().all(|x| !sa.contains(x))
}

/// Eliminates argument `arg` by summing over its values.
///
/// An atom argument must mention every logvar of `g`; the sum is raised to
/// the number of its groundings per assignment of the remaining arguments.
/// A counting argument requires the other arguments to be logvar-free and
/// weighs each histogram by its multiplicity.
pub fn sum_out(vocab: &Vocab, g: &Parfactor, arg: usize) -> Result<Parfactor> {
    if arg >= g.args.len() {
        return Err(Error::Precondition(format!("{} has no argument {arg}", g.name)));
    }
    for j in 0..g.args.len() {
        if j != arg && !args_disjoint(g, arg, j) {
            return Err(Error::Precondition(format!(
                "argument {} of {} shares randvars with argument {}",
                arg, g.name, j
            )));
        }
    }
    let sz = sizes(vocab, &g.args);
    let mut rest_args: Vec<Arg> = g.args.clone();
    rest_args.remove(arg);
    let mut rest_sizes = sz.clone();
    rest_sizes.remove(arg);
    let rest_len: usize = rest_sizes.iter().product();
    match &g.args[arg] {
        Arg::Atom(a) => {
            let avars = a.vars();
            if (0..g.constraint.arity()).any(|v| !avars.contains(&v)) {
                return Err(Error::Precondition(format!(
                    "summed-out argument of {} must mention all logvars",
                    g.name
                )));
            }
            let mut keep: Vec<usize> = rest_args.iter().flat_map(|a| a.vars()).collect();
            keep.sort_unstable();
            keep.dedup();
            let k = g.constraint.count_per_instance(&keep)? as f64;
            let constraint = g.constraint.project(&keep);
            let args = reindex_args(&rest_args, &keep);
            let mut table = Vec::with_capacity(rest_len);
            for i in 0..rest_len {
                let rest = row_values(&rest_sizes, i);
                let s = logspace::sum((0..sz[arg]).map(|v| {
                    let mut row = rest.clone();
                    row.insert(arg, v);
                    g.table[row_index(&sz, &row)]
                }));
                table.push(logspace::pow(s, k));
            }
            Ok(Parfactor { name: g.name.clone(), constraint, args, table })
        }
        Arg::Count(crv) => {
            if !g.used_vars().is_empty() {
                return Err(Error::Precondition(format!(
                    "counting argument of {} is shared by logvar-dependent arguments",
                    g.name
                )));
            }
            let e = g.constraint.count() as f64;
            let hs = histograms(crv.count() as u32, vocab.range_size(crv.atom.rel));
            let mul: Vec<f64> = hs.iter().map(|h| ln_multiplicity(h)).collect();
            let mut table = Vec::with_capacity(rest_len);
            for i in 0..rest_len {
                let rest = row_values(&rest_sizes, i);
                let s = logspace::sum(hs.iter().enumerate().map(|(hi, _)| {
                    let mut row = rest.clone();
                    row.insert(arg, hi);
                    mul[hi] + logspace::pow(g.table[row_index(&sz, &row)], e)
                }));
                table.push(s);
            }
            Ok(Parfactor { name: g.name.clone(), constraint: Constraint::empty_vars(), args: rest_args, table })
        }
    }
}

/// Pointwise product. Logvars are matched by name and those of `g2` must
/// all occur in `g1`, with `g2`'s constraint equal to the projection of
/// `g1`'s. Each ground factor of `g2` is shared out evenly over the ground
/// factors of `g1` that extend it.
pub fn multiply(vocab: &Vocab, g1: &Parfactor, g2: &Parfactor) -> Result<Parfactor> {
    let mut map = Vec::with_capacity(g2.constraint.arity());
    for v in &g2.constraint.vars {
        let i = g1
            .constraint
            .var_index(&v.name)
            .ok_or_else(|| Error::Misaligned(format!("logvar {} of {} missing in {}", v.name, g2.name, g1.name)))?;
        if g1.constraint.vars[i] != *v {
            return Err(Error::Misaligned(format!("logvar {} differs between parfactors", v.name)));
        }
        map.push(i);
    }
    let projected = g1.constraint.project(&map);
    if !projected.equivalent(&g2.constraint) {
        return Err(Error::Misaligned(format!("constraints of {} and {} differ", g1.name, g2.name)));
    }
    let k = g1.constraint.count_per_instance(&map)?.max(1) as f64;
    let mut args = g1.args.clone();
    args.extend(g2.args.iter().map(|a| match a {
        Arg::Atom(atom) => Arg::Atom(atom.map_vars(|v| Term::Var(map[v]))),
        Arg::Count(c) => Arg::Count(c.clone()),
    }));
    let (l1, l2) = (g1.table.len(), g2.table.len());
    let mut table = Vec::with_capacity(l1 * l2);
    for i in 0..l1 {
        for j in 0..l2 {
            let b = g2.table[j];
            let share = if b == ZERO { ZERO } else { b / k };
            table.push(g1.table[i] + share);
        }
    }
    let name = format!("{}*{}", g1.name, g2.name);
    Ok(merge_duplicates(vocab, Parfactor { name, constraint: g1.constraint.clone(), args, table }))
}

fn same_crv(a: &Crv, b: &Crv) -> bool {
    a.atom == b.atom && a.over.allowed_set(0) == b.over.allowed_set(0) && a.over.is_product() && b.over.is_product()
}

/// Collapses arguments that are syntactically the same randvar onto the
/// table diagonal.
pub fn merge_duplicates(vocab: &Vocab, mut g: Parfactor) -> Parfactor {
    loop {
        let mut pair = None;
        'outer: for i in 0..g.args.len() {
            for j in (i + 1)..g.args.len() {
                let same = match (&g.args[i], &g.args[j]) {
                    (Arg::Atom(a), Arg::Atom(b)) => a == b,
                    (Arg::Count(a), Arg::Count(b)) => same_crv(a, b),
                    _ => false,
                };
                if same {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = pair else {
            return g;
        };
        let sz = sizes(vocab, &g.args);
        let mut new_sizes = sz.clone();
        new_sizes.remove(j);
        let len: usize = new_sizes.iter().product();
        let mut table = Vec::with_capacity(len);
        for r in 0..len {
            let mut row = row_values(&new_sizes, r);
            row.insert(j, row[i]);
            table.push(g.table[row_index(&sz, &row)]);
        }
        g.args.remove(j);
        g.table = table;
    }
}

/// Fixes argument `arg` to `value`, removing it.
pub fn fix_arg(vocab: &Vocab, g: &Parfactor, arg: usize, value: usize) -> Parfactor {
    let sz = sizes(vocab, &g.args);
    let mut rest = sz.clone();
    rest.remove(arg);
    let len: usize = rest.iter().product();
    let table = (0..len)
        .map(|i| {
            let mut row = row_values(&rest, i);
            row.insert(arg, value);
            g.table[row_index(&sz, &row)]
        })
        .collect();
    let mut args = g.args.clone();
    args.remove(arg);
    Parfactor { name: g.name.clone(), constraint: g.constraint.clone(), args, table }
}

/// Per-logvar allowed sets describing where an atom meets a product-form
/// evidence item, or `None` when it never does. `Err(())` asks the caller
/// to ground the evidence first.
fn evidence_region(g: &Parfactor, atom: &Atom, ev: &EvidenceItem) -> std::result::Result<Option<Vec<(usize, ValueSet)>>, ()> {
    let ConstraintKind::Product { distinct, .. } = &ev.constraint.kind else {
        return Err(());
    };
    if !distinct.is_empty() {
        return Err(());
    }
    let evars = ev.atom.vars();
    let mentioned: Vec<usize> = ev.atom.terms.iter().filter_map(|t| match t {
        Term::Var(v) => Some(*v),
        _ => None,
    }).collect();
    if mentioned.len() != evars.len() {
        return Err(());
    }
    if (0..ev.constraint.arity()).any(|v| ev.constraint.allowed_set(v).is_empty()) {
        return Ok(None);
    }
    let mut region: Vec<(usize, ValueSet)> = Vec::new();
    for (s, t) in atom.terms.iter().zip(&ev.atom.terms) {
        let set = match t {
            Term::Const(c) => ValueSet::new(vec![*c]),
            Term::Var(y) => ev.constraint.allowed_set(*y),
        };
        match s {
            Term::Const(c) => {
                if !set.contains(*c) {
                    return Ok(None);
                }
            }
            Term::Var(x) => match region.iter_mut().find(|(v, _)| v == x) {
                Some((_, cur)) => *cur = cur.intersect(&set),
                None => region.push((*x, set)),
            },
        }
    }
    // narrow to what the constraint allows so empty hits are detected
    for (x, set) in region.iter_mut() {
        *set = set.intersect(&g.constraint.allowed_set(*x));
        if set.is_empty() {
            return Ok(None);
        }
    }
    Ok(Some(region))
}

/// Absorbs one evidence item: instances that observe it lose the argument
/// (its observed row is selected), the rest keep a restricted constraint.
pub fn absorb(vocab: &Vocab, g: &Parfactor, ev: &EvidenceItem) -> Result<Vec<Parfactor>> {
    if ev.value >= vocab.range_size(ev.atom.rel) {
        return Err(Error::Validation("evidence value outside range".into()));
    }
    let observed: Vec<crate::model::GroundAtom> =
        ev.constraint.expand().iter().map(|t| ev.atom.ground(t)).collect();
    let mut g = g.clone();
    // counting arguments that contain observed randvars give those up first
    while let Some((i, c)) = g.args.iter().enumerate().find_map(|(i, a)| match a {
        Arg::Count(crv) if crv.atom.rel == ev.atom.rel => crv
            .over
            .expand()
            .iter()
            .find(|u| observed.contains(&crv.atom.ground(u)))
            .map(|u| (i, u[0])),
        _ => None,
    }) {
        g = expand(vocab, &g, i, c)?;
    }
    let mut out = Vec::new();
    let mut work: Vec<(Parfactor, usize)> = vec![(g, 0)];
    while let Some((p, start)) = work.pop() {
        let hit = (start..p.args.len()).find(|&i| matches!(&p.args[i], Arg::Atom(a) if a.rel == ev.atom.rel));
        let Some(i) = hit else {
            out.push(p);
            continue;
        };
        let Arg::Atom(atom) = &p.args[i] else { unreachable!() };
        let atom = atom.clone();
        match evidence_region(&p, &atom, ev) {
            Err(()) => {
                let mut parts = vec![p.clone()];
                for t in ev.constraint.expand() {
                    let ga = ev.atom.ground(&t);
                    let item = crate::model::Evidence::ground(ga.rel, ga.args, ev.value);
                    let mut next = Vec::new();
                    for q in &parts {
                        next.extend(absorb(vocab, q, &item)?);
                    }
                    parts = next;
                }
                out.extend(parts);
            }
            Ok(None) => work.push((p, i + 1)),
            Ok(Some(region)) => {
                let mut cur = p.constraint.clone();
                for (x, set) in &region {
                    let outside = cur.allowed_set(*x).minus(set);
                    let miss = cur.restrict(*x, &outside);
                    if miss.count() > 0 {
                        work.push((Parfactor { constraint: miss, ..p.clone() }, i + 1));
                    }
                    cur = cur.restrict(*x, set);
                }
                if cur.count() > 0 {
                    let inside = Parfactor { constraint: cur, ..p.clone() };
                    work.push((fix_arg(vocab, &inside, i, ev.value), i));
                }
            }
        }
    }
    Ok(out)
}

/// Replaces `g` by one parfactor per part. The parts must partition the
/// constraint's tuples and use the same logvars.
pub fn split(g: &Parfactor, parts: &[Constraint]) -> Result<Vec<Parfactor>> {
    let mut total = 0u64;
    let mut seen = std::collections::BTreeSet::new();
    for p in parts {
        if p.vars != g.constraint.vars {
            return Err(Error::InvalidPartition("parts must use the parfactor's logvars".into()));
        }
        for t in p.expand() {
            if !g.constraint.contains(&t) {
                return Err(Error::InvalidPartition("part admits a tuple outside the constraint".into()));
            }
            if !seen.insert(t) {
                return Err(Error::InvalidPartition("parts overlap".into()));
            }
        }
        total += p.count();
    }
    if total != g.constraint.count() {
        return Err(Error::InvalidPartition("parts do not cover the constraint".into()));
    }
    Ok(parts
        .iter()
        .enumerate()
        .filter(|(_, p)| p.count() > 0)
        .map(|(k, p)| Parfactor { name: format!("{}.{k}", g.name), constraint: p.clone(), ..g.clone() })
        .collect())
}

/// Splits `g` so that every part has a uniform number of groundings per
/// assignment of `targets`.
pub fn count_normalise(g: &Parfactor, targets: &[usize]) -> Result<Vec<Parfactor>> {
    if g.constraint.count_per_instance(targets).is_ok() {
        return Ok(vec![g.clone()]);
    }
    let tuples = g.constraint.expand();
    let mut per: std::collections::BTreeMap<Vec<u32>, u64> = std::collections::BTreeMap::new();
    for t in &tuples {
        *per.entry(targets.iter().map(|&i| t[i]).collect()).or_default() += 1;
    }
    let mut groups: std::collections::BTreeMap<u64, std::collections::BTreeSet<Vec<u32>>> = Default::default();
    for t in tuples {
        let k = per[&targets.iter().map(|&i| t[i]).collect::<Vec<_>>()];
        groups.entry(k).or_default().insert(t);
    }
    let parts: Vec<Constraint> =
        groups.into_values().map(|ts| Constraint::tuples(g.constraint.vars.clone(), ts)).collect();
    split(g, &parts)
}

/// Splits one constant `c` off counting argument `arg`: the result has the
/// atom for `c` plus a counting argument over the remaining constants.
pub fn expand(vocab: &Vocab, g: &Parfactor, arg: usize, c: u32) -> Result<Parfactor> {
    let Some(Arg::Count(crv)) = g.args.get(arg) else {
        return Err(Error::NotCountingArg);
    };
    let set = crv.over.allowed_set(0);
    if !crv.over.is_product() || !set.contains(c) {
        return Err(Error::Precondition(format!("constant not counted by argument {arg} of {}", g.name)));
    }
    let r = vocab.range_size(crv.atom.rel);
    let rest_set = set.minus(&ValueSet::new(vec![c]));
    let single = Arg::Atom(crv.atom.map_vars(|_| Term::Const(c)));
    let mut args = g.args.clone();
    let remaining = if rest_set.is_empty() {
        args[arg] = single;
        None
    } else {
        let over = Constraint::product(crv.over.vars.clone(), vec![Some(rest_set.clone())], []);
        args[arg] = single;
        args.insert(arg + 1, Arg::Count(Crv { atom: crv.atom.clone(), over }));
        Some(rest_set.len() as u32)
    };
    let old = sizes(vocab, &g.args);
    let new = sizes(vocab, &args);
    let len: usize = new.iter().product();
    let hs_rest = remaining.map(|m| histograms(m, r));
    let mut table = Vec::with_capacity(len);
    for i in 0..len {
        let row = row_values(&new, i);
        let v = row[arg];
        let mut h = match (&hs_rest, remaining) {
            (Some(hs), Some(_)) => hs[row[arg + 1]].clone(),
            _ => vec![0; r],
        };
        h[v] += 1;
        let mut old_row: Vec<usize> = row.clone();
        if remaining.is_some() {
            old_row.remove(arg + 1);
        }
        old_row[arg] = histogram_index(&h);
        table.push(g.table[row_index(&old, &old_row)]);
    }
    Ok(Parfactor { name: g.name.clone(), constraint: g.constraint.clone(), args, table })
}

/// One parfactor per constant of logvar `var`, with the logvar replaced by
/// that constant.
pub fn ground_logvar(g: &Parfactor, var: usize) -> Vec<Parfactor> {
    let values: std::collections::BTreeSet<u32> = g.constraint.expand().iter().map(|t| t[var]).collect();
    values
        .into_iter()
        .map(|c| Parfactor {
            name: format!("{}.{c}", g.name),
            constraint: g.constraint.substitute(var, c),
            args: substitute_args(&g.args, var, Some(c)),
            table: g.table.clone(),
        })
        .filter(|p| p.constraint.count() > 0)
        .collect()
}

/// Checks that `var` occurs in exactly one argument whose only logvar it is
/// and that no inequality ties it to other logvars.
fn convertible(g: &Parfactor, var: usize) -> Result<usize> {
    let holders: Vec<usize> =
        (0..g.args.len()).filter(|&i| g.args[i].vars().contains(&var)).collect();
    if holders.len() != 1 {
        return Err(Error::Precondition(format!("logvar must occur in exactly one argument of {}", g.name)));
    }
    let i = holders[0];
    let Arg::Atom(a) = &g.args[i] else { unreachable!() };
    if a.vars() != vec![var] {
        return Err(Error::Precondition("counted argument mentions other logvars".into()));
    }
    Ok(i)
}

fn counted(atom: &Atom, var: usize, lv: &Logvar, set: ValueSet) -> Crv {
    Crv {
        atom: atom.map_vars(|v| if v == var { Term::Var(0) } else { Term::Var(v) }),
        over: Constraint::product(vec![lv.clone()], vec![Some(set)], []),
    }
}

/// Replaces the argument holding `var` by a counting randvar over the
/// constants of `var`.
pub fn count_convert(vocab: &Vocab, g: &Parfactor, var: usize) -> Result<Parfactor> {
    let i = convertible(g, var)?;
    let ConstraintKind::Product { distinct, .. } = &g.constraint.kind else {
        return Err(Error::Precondition("count conversion needs a product constraint".into()));
    };
    if distinct.iter().any(|&(a, b)| a == var || b == var) {
        return Err(Error::Precondition("counted logvar is tied by an inequality".into()));
    }
    let Arg::Atom(atom) = &g.args[i] else { unreachable!() };
    let set = g.constraint.allowed_set(var);
    let n = set.len() as u32;
    let crv = counted(atom, var, &g.constraint.vars[var], set);
    let keep: Vec<usize> = (0..g.constraint.arity()).filter(|&v| v != var).collect();
    let constraint = g.constraint.project(&keep);
    let mut args = g.args.clone();
    args[i] = Arg::Count(crv);
    let args = reindex_args(&args, &keep);
    let old = sizes(vocab, &g.args);
    let new = sizes(vocab, &args);
    let hs = histograms(n, vocab.range_size(atom.rel));
    let len: usize = new.iter().product();
    let mut table = Vec::with_capacity(len);
    for r in 0..len {
        let row = row_values(&new, r);
        let h = &hs[row[i]];
        let mut acc = 0.0;
        for (v, &k) in h.iter().enumerate() {
            let mut old_row = row.clone();
            old_row[i] = v;
            acc += logspace::pow(g.table[row_index(&old, &old_row)], k as f64);
        }
        table.push(acc);
    }
    Ok(Parfactor { name: g.name.clone(), constraint, args, table })
}

/// Converts a just-different pair `A(X), A(Y)` with `X != Y` into one
/// counting randvar over `A`.
pub fn count_convert_pair(vocab: &Vocab, g: &Parfactor, x: usize, y: usize) -> Result<Parfactor> {
    let (i, j) = (convertible(g, x)?, convertible(g, y)?);
    let (Arg::Atom(ax), Arg::Atom(ay)) = (&g.args[i], &g.args[j]) else { unreachable!() };
    if ax.map_vars(|v| Term::Var(if v == x { y } else { v })) != *ay {
        return Err(Error::Precondition("pair arguments differ beyond the logvar".into()));
    }
    let ConstraintKind::Product { distinct, .. } = &g.constraint.kind else {
        return Err(Error::Precondition("count conversion needs a product constraint".into()));
    };
    let key = (x.min(y), x.max(y));
    if !distinct.contains(&key)
        || distinct.iter().any(|&p| p != key && [x, y].iter().any(|v| p.0 == *v || p.1 == *v))
    {
        return Err(Error::Precondition("pair logvars must differ from each other only".into()));
    }
    let set = g.constraint.allowed_set(x);
    if set != g.constraint.allowed_set(y) {
        return Err(Error::Precondition("pair logvars range over different constants".into()));
    }
    let n = set.len() as u32;
    let crv = counted(ax, x, &g.constraint.vars[x], set);
    let keep: Vec<usize> = (0..g.constraint.arity()).filter(|&v| v != x && v != y).collect();
    let constraint = g.constraint.project(&keep);
    let (lo, hi) = (i.min(j), i.max(j));
    let mut args = g.args.clone();
    args.remove(hi);
    args[lo] = Arg::Count(crv);
    let args = reindex_args(&args, &keep);
    let old = sizes(vocab, &g.args);
    let new = sizes(vocab, &args);
    let r = vocab.range_size(ax.rel);
    let hs = histograms(n, r);
    let len: usize = new.iter().product();
    let mut table = Vec::with_capacity(len);
    for q in 0..len {
        let row = row_values(&new, q);
        let h = &hs[row[lo]];
        let mut acc = 0.0;
        for v in 0..r {
            for w in 0..r {
                let pairs = h[v] as u64 * h[w] as u64 - if v == w { h[v] as u64 } else { 0 };
                let mut old_row = row.clone();
                old_row.remove(lo);
                if i < j {
                    old_row.insert(i, v);
                    old_row.insert(j, w);
                } else {
                    old_row.insert(j, w);
                    old_row.insert(i, v);
                }
                acc += logspace::pow(g.table[row_index(&old, &old_row)], pairs as f64);
            }
        }
        table.push(acc);
    }
    Ok(Parfactor { name: g.name.clone(), constraint, args, table })
}
