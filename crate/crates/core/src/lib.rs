//! Planning-driven online learning of object properties.
//!
//! The pipeline: a base planning domain is extended with epistemic
//! predicates and meta-operators for observing, exploring, and training;
//! a forward planner drives an agent through a synthetic grid world; the
//! agent collects labeled feature vectors online and trains binary
//! property classifiers, which are then scored against independently
//! generated ground-truth test sets.

pub mod agent;
pub mod eval;
pub mod learn;
pub mod pddl;
pub mod perception;
pub mod planner;
pub mod sim;
