//! Predicates, scope spaces, instances, samplers and the CSP objective.

mod instance;
mod predicate;
mod space;

pub use instance::{sample_null, sample_planted, Assignment, Instance, RestrictedInstance};
pub use predicate::{character, sign_mask, Predicate, SlotMask, UniformityReport};
pub use space::{falling_factorial, ScopeSpace, VarSet};
