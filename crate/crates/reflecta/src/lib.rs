//! Maximal root subsystems of affine reflection systems.

pub mod ars;
pub mod bitset;
pub mod classify;
pub mod lattice;
pub mod oracle;
pub mod rootsys;
pub mod saito;
