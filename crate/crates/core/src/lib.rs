//! Computational backbone for the Rudvalis moonshine construction.
//!
//! The crate is layered bottom-up: [`qseries`] supplies exact two-variable
//! series, [`frameshape`] turns Frame shapes into theta/eta products,
//! [`weylvoa`] realizes the Weyl-module vertex algebra on truncated bases,
//! [`cwlattice`] builds the Conway-Wales lattice and its quartic invariant,
//! and [`moonshine`] assembles the per-class trace functions.

pub mod cwlattice;
pub mod data;
pub mod frameshape;
pub mod gauss;
pub mod moonshine;
pub mod qseries;
pub mod weylvoa;
