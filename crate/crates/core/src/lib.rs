//! Numerical workbench for contact triads `(M, λ, J)` and contact instantons
//! on truncated cylinders `[0, L] × S¹`.
//!
//! The crate is organised by workflow:
//!
//! * [`triad`] evaluates the contact form, Reeb field, compatible complex
//!   structure, triad metric and the contact triad connection on the built-in
//!   models (flat `R³`, ellipsoids in `C²`, seeded perturbations of `J`).
//! * [`cylfield`] discretizes maps `w: [0, L] × S¹ → M` and computes pullback
//!   forms, `∂̄^π w`, energies and the asymptotic invariants `T` and `Q`.
//! * [`instanton`] solves `∂̄^π w = 0`, `d(w*λ∘j) = 0` by residual
//!   minimization and builds exact flat-model solutions.
//! * [`reeb`] integrates the Reeb flow, locates closed orbits and assembles the
//!   linearized operator `A_z` along them.
//! * [`decay`] extracts exponential decay rates (three-interval machinery,
//!   Reeb component `θ`, symplectization coordinate `a`).
//! * [`identities`] checks the tensorial identities and inequalities under
//!   mesh refinement.

pub mod config;
pub mod cylfield;
pub mod decay;
pub mod error;
pub mod identities;
pub mod instanton;
pub mod la;
pub mod reeb;
pub mod rng;
pub mod sum;
pub mod triad;

pub use cylfield::{CylinderGrid, EnergyReport, MapField, OneForm, XiSection};
pub use decay::{AReport, DecayOptions, DecayReport, ThetaReport, ThreeInterval};
pub use error::{Error, Result};
pub use identities::{IdentityReport, SuiteReport};
pub use instanton::{BoundaryData, Method, SolveConfig, SolveResult};
pub use reeb::{ClosedOrbit, SpectrumResult};
pub use triad::{Tangent, Triad, TriadPoint, XiFrame};
