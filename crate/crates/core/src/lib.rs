#![cfg_attr(not(feature = "std"), no_std)]
//! Spectra of Schrodinger operators on equilateral metric graphs by reduction
//! to discrete graph operators, with an independent secular-equation solver
//! and checks of the spectral measure identities.

extern crate alloc;

pub mod coupling;
pub mod discrete;
pub mod graph;
pub mod linalg;
pub mod math;
pub mod measure;
pub mod ode;
pub mod oracle;
pub mod potential;
pub mod spectrum;
pub mod weyl;
