//! Trapped-ion qutrit register toolkit.
//!
//! An axial magnetic field gradient across a linear Coulomb chain makes the
//! hyperfine qutrit transition frequencies position dependent, which both
//! gives per-ion frequency addressing and induces an always-on spin-spin
//! coupling between the qutrits. This crate covers the full desk-scale
//! pipeline built on that mechanism:
//!
//! * [`chain`] — equilibrium positions, normal modes and the pairwise
//!   coupling matrix of the ion chain, plus gradient feasibility bounds;
//! * [`zeeman`] — hyperfine Zeeman (Breit-Rabi) level energies, transition
//!   gradients and the site-dependent coupling operator;
//! * [`gates`] — exact 3x3 gate constructors and SU(3) decomposition;
//! * [`register`] — exact multi-qutrit pulse-program simulation with a
//!   diagonal fast path, plus two-step readout sampling;
//! * [`synthesis`] — two-qutrit gate constructions: phase-gate target,
//!   Fourier-conjugated XOR, pulse-sequence angle optimization and
//!   refocusing plans;
//! * [`program`] — the pulse-program text/JSON formats.

pub mod chain;
pub mod constants;
pub mod error;
pub mod gates;
pub mod program;
pub mod register;
pub mod report;
pub mod simplex;
pub mod species;
pub mod synthesis;
pub mod zeeman;

pub use error::{Error, Result};
pub use species::IonSpecies;
