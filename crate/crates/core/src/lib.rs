//! Exact lifted inference over parameterised factor models.
//!
//! The crate bundles several query-answering engines that share one model
//! representation:
//!
//! * [`oracle`]: grounding, brute-force enumeration, propositional variable
//!   elimination and the propositional junction tree (`jt`).
//! * [`lve`]: lifted variable elimination with its operator suite.
//! * [`fojtree`]: first-order junction trees and the lifted junction tree
//!   algorithm (`ljt`).
//! * [`wfomc`]: reduction to weighted first-order model counting, compilation
//!   into first-order d-DNNF circuits and circuit evaluation (`fokc`).
//! * [`ljtkc`]: junction-tree message passing with LVE followed by
//!   per-parcluster knowledge compilation.
//!
//! [`engines`] offers a uniform entry point and a cross-engine agreement
//! check, [`bench`] the benchmark model generators and runner.

pub mod bench;
pub mod engines;
pub mod error;
pub mod fojtree;
pub mod histogram;
pub mod ljtkc;
pub mod logspace;
pub mod limits;
pub mod lve;
pub mod model;
pub mod oracle;
pub mod wfomc;

pub use error::{Error, Result};
pub use model::{
    Arg, Atom, Constraint, Crv, Distribution, Domain, Evidence, EvidenceItem, GroundAtom, Logvar,
    Model, Parfactor, Query, Relation, Term, ValueSet, Vocab,
};
