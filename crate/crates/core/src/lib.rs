//! Morphology and reward co-design for a planar quadruped.
//!
//! A debate round edits the body ([`morphology`]), proposes reward programs
//! ([`reward`]), trains a policy per pair ([`policy`]) in the simulator
//! ([`sim`]), grades the result ([`evaluation`]) and records it in the
//! [`archive`]. [`engine`] runs the rounds; [`agents`] supplies the proposals.

pub mod agents;
pub mod archive;
pub mod channels;
pub mod cli;
pub mod engine;
pub mod evaluation;
pub mod morphology;
pub mod plot;
pub mod policy;
pub mod reward;
pub mod seed;
pub mod sim;
