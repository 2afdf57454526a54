//! Error taxonomy for the simulation pipeline.
//!
//! Fatal conditions are errors; advisory conditions (log singularities,
//! ill-defined pseudo-spins at isolated momenta) are recorded as flags on the
//! result types instead.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Band energy vanishes, so the unit Bloch vector is undefined.
    #[error("degenerate band: |h_k| = 0 at k = {k} (unit Bloch vector undefined)")]
    DegenerateBand { k: f64 },

    /// Momentum grid construction was asked for too few points.
    #[error("invalid momentum grid: half_count = {half_count}, need at least 2")]
    InvalidGrid { half_count: usize },

    /// Two spectral weights coincide while both carry weight, so the
    /// eigenvector decomposition is ambiguous.
    #[error(
        "degenerate spectrum: eigenvalues {p_a} and {p_b} within {tol} while both above the \
         zero-weight threshold"
    )]
    DegenerateSpectrum { p_a: f64, p_b: f64, tol: f64 },

    /// Consecutive spectral frames could not be matched confidently.
    #[error(
        "eigenvector tracking lost at step {step} (t = {time}): best matched overlap {overlap} \
         below floor {floor}; retry with at least {suggested_steps} time steps"
    )]
    TrackingLost {
        step: usize,
        time: f64,
        overlap: f64,
        floor: f64,
        suggested_steps: usize,
    },

    /// Engineered jump operator with both amplitudes zero.
    #[error("null Lindblad operator: u_k = v_k = 0 at k = {k}")]
    NullLindblad { k: f64 },

    /// A density matrix broke its trace/positivity contract during evolution.
    #[error("non-physical state at step {step} (t = {time}): {what} = {value}, tolerance {tol}")]
    NonPhysical {
        step: usize,
        time: f64,
        what: &'static str,
        value: f64,
        tol: f64,
    },

    /// The Liouvillian null space is not one-dimensional at tolerance.
    #[error(
        "degenerate steady state: second singular value {sigma_next} below uniqueness \
         tolerance {tol}"
    )]
    DegenerateSteadyState { sigma_next: f64, tol: f64 },

    /// Phase unwrapping hit a jump too close to pi to resolve the branch.
    #[error(
        "phase unwrap ambiguity at k = {k}, t = {t}: adjacent jump {jump} rad exceeds \
         threshold {threshold}"
    )]
    UnwrapAmbiguity {
        k: f64,
        t: f64,
        jump: f64,
        threshold: f64,
    },

    /// The quench has no momentum where the pre- and post-quench Bloch
    /// vectors are orthogonal, so no critical times are predicted.
    #[error("no critical mode: initial and final Bloch vectors are never orthogonal on (0, pi)")]
    NoCriticalMode,

    /// The band-overlap slope vanishes at the critical momentum; the jump
    /// rule has no defined sign.
    #[error("zero slope of |e_k|^2 at critical momentum k_c = {k_c}")]
    ZeroSlope { k_c: f64 },

    /// Winding number requested on a field with an ill-defined pseudo-spin.
    #[error(
        "pseudo-spin vanishes at k = {k} (|n| = {norm} <= floor {floor}); winding undefined"
    )]
    SpinVanishes { k: f64, norm: f64, floor: f64 },

    /// No direction is orthogonal to every pseudo-spin on the grid.
    #[error("no chiral symmetry: smallest singular value {sigma_min} exceeds {tol}")]
    NoChiralSymmetry { sigma_min: f64, tol: f64 },

    /// Interferometric amplitude requested for non-unitary evolution.
    #[error("interferometric amplitude is only defined for unitary protocols")]
    NotApplicable,
}
