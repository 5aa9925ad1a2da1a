//! Chase execution and chase-termination analysis for tuple-generating and
//! equality-generating dependencies.
//!
//! The library provides:
//!
//! - a textual format and validated model for constraint sets and instances
//!   ([`parser`], [`model`]);
//! - homomorphism search and constraint satisfaction ([`hom`]);
//! - standard and oblivious chase execution under several scheduling
//!   policies, with a structured step log ([`chase`]);
//! - the position-level dependency and propagation graphs with the weak
//!   acyclicity and safety tests ([`graphs`]);
//! - the firing relations between constraints, chase graphs, and the k-ary
//!   chain relation underlying restriction systems ([`firing`]);
//! - stratification, inductive restriction, and the level hierarchy of
//!   termination conditions, wrapped in a single classifier ([`hierarchy`]);
//! - weakly and restrictedly guarded TGD classes ([`guard`]);
//! - data-dependent analysis: irrelevant constraints for a fixed instance
//!   and the null-provenance monitor with its cyclicity abort ([`datadep`]).

pub mod chase;
pub mod datadep;
pub mod firing;
pub mod graphs;
pub mod guard;
pub mod hierarchy;
pub mod hom;
pub mod model;
pub mod parser;
pub mod scc;

pub use chase::{chase, chase_oblivious, ChaseOutcome, ChaseStatus, SchedulingPolicy};
pub use hierarchy::{classify, ClassificationReport};
pub use model::{Atom, Constraint, ConstraintSet, Instance, Position, Term};
pub use parser::{parse_constraints, parse_instance, serialize_constraints, serialize_instance};
