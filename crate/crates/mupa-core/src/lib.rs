//! Core library: formula syntax, S-expression reader/printer, and proof
//! objects for a sequent calculus over arithmetic with interleaved least
//! and greatest fixed points.

pub mod formula;
pub mod proof;
pub mod rules;
pub mod semantics;
pub mod sexpr;
pub mod trace;
pub mod transform;
pub mod translate;
pub mod validity;
