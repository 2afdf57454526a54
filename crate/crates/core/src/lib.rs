//! Simulation and analysis of quench dynamics for translation-invariant
//! two-band fermion chains, for both closed (unitary) and open (Lindblad)
//! evolution of mixed states.
//!
//! The central quantity is the generalized Loschmidt overlap amplitude of a
//! density-matrix trajectory: each momentum pair `(k, -k)` carries a
//! four-dimensional Fock space whose density matrix is spectrally decomposed
//! and parallel-transported in time, and the per-mode amplitudes combine into
//! a rate function whose non-analyticities signal dynamical quantum phase
//! transitions. On top of the amplitude pipeline sit the dynamical
//! topological order parameter (winding of the amplitude phase over half the
//! Brillouin zone) and the pseudo-spin winding number of the even-occupation
//! block, which tracks bulk topology changes under engineered dissipation.
//!
//! Modules mirror the processing pipeline:
//!
//! - [`model`]: two-band Hamiltonian families, momentum grids, band overlaps
//! - [`fockspace`]: the `(k, -k)` pair space, spectral frames, transport
//! - [`evolution`]: Liouvillians, propagators, trajectories, steady states
//! - [`gloa`]: amplitude series, rate functions, cusp detection, baselines
//! - [`topology`]: critical times, DTOP, pseudo-spin fields, winding numbers

pub mod error;
pub mod evolution;
pub mod fockspace;
pub mod gloa;
pub mod linalg;
pub mod model;
pub mod topology;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
