//! The four-dimensional Fock space of one `(k, -k)` fermion-mode pair.
//!
//! Basis ordering is `(|00>, |11>, |01>, |10>)` in occupations `(n_k, n_-k)`,
//! so the even-parity block occupies indices {0, 1} and the odd block {2, 3}.
//! Besides the ladder operators this module owns the spectral bookkeeping of
//! a density-matrix trajectory: eigendecomposition into weighted branches,
//! step-to-step branch matching, and the discrete parallel-transport phase
//! `exp(-int <phi_j|d/dt phi_j> dt)` accumulated per branch.

use num_complex::Complex;

use crate::error::Error;
use crate::linalg::{eigh, eigh2, fix_phase, C64, M2, M4, V4};
use crate::model::TwoBandModel;
use crate::Result;

/// Weights below this threshold are treated as exact zeros: such branches
/// contribute nothing to the overlap amplitude (the weight enters as
/// `sqrt(p_j(t) p_j(0))`), so neither their basis choice nor degeneracies
/// among them are meaningful.
pub const ZERO_WEIGHT_TOL: f64 = 1e-12;

/// Off-block magnitude below which a density matrix is treated as exactly
/// parity-block-diagonal and diagonalized per 2x2 block.
const BLOCK_TOL: f64 = 1e-13;

const ONE: C64 = Complex::new(1.0, 0.0);

/// Ladder operators of the pair space as explicit 4x4 matrices.
///
/// `a_mk` (annihilation of the `-k` partner) carries the exchange sign
/// `(-1)^{n_k}` because `a_k` is taken first in the operator ordering.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub a_k: M4,
    pub a_mk: M4,
    pub a_k_dag: M4,
    pub a_mk_dag: M4,
}

impl ModeOperators {
    pub fn new() -> Self {
        let mut a_k = M4::zeros();
        a_k[(0, 3)] = ONE; // |10> -> |00>
        a_k[(2, 1)] = ONE; // |11> -> |01>
        let mut a_mk = M4::zeros();
        a_mk[(0, 2)] = ONE; // |01> -> |00>
        a_mk[(3, 1)] = -ONE; // |11> -> -|10>
        ModeOperators {
            a_k_dag: a_k.adjoint(),
            a_mk_dag: a_mk.adjoint(),
            a_k,
            a_mk,
        }
    }

    pub fn number_k(&self) -> M4 {
        self.a_k_dag * self.a_k
    }

    pub fn number_mk(&self) -> M4 {
        self.a_mk_dag * self.a_mk
    }

    /// Pair Hamiltonian for Bloch vector `h`:
    /// `H = h_z (1 - n_k - n_-k) + (h_x - i h_y) a_-k a_k + h.c.`,
    /// which is `h . sigma` on the even block and zero on the odd block.
    pub fn hamiltonian(&self, h: &nalgebra::Vector3<f64>) -> M4 {
        let off = Complex::new(h.x, -h.y);
        let mut m = M4::identity() - self.number_k() - self.number_mk();
        m *= Complex::new(h.z, 0.0);
        let pair = self.a_mk * self.a_k;
        m + pair * off + pair.adjoint() * off.conj()
    }
}

impl Default for ModeOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Even-parity (occupations 00, 11) 2x2 sub-block.
pub fn even_block(m: &M4) -> M2 {
    M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Odd-parity (occupations 01, 10) 2x2 sub-block.
pub fn odd_block(m: &M4) -> M2 {
    M2::new(m[(2, 2)], m[(2, 3)], m[(3, 2)], m[(3, 3)])
}

/// Assemble a block-diagonal pair matrix from even and odd blocks.
pub fn embed_blocks(even: &M2, odd: &M2) -> M4 {
    let mut m = M4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            m[(r, c)] = even[(r, c)];
            m[(r + 2, c + 2)] = odd[(r, c)];
        }
    }
    m
}

/// Largest magnitude among the parity-off-diagonal entries.
pub fn off_block_norm(m: &M4) -> f64 {
    let mut acc: f64 = 0.0;
    for r in 0..2 {
        for c in 2..4 {
            acc = acc.max(m[(r, c)].norm()).max(m[(c, r)].norm());
        }
    }
    acc
}

/// Density matrix of one pair mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDensityMatrix {
    pub matrix: M4,
    pub k: f64,
}

impl ModeDensityMatrix {
    /// Wrap a matrix after checking Hermiticity, unit trace, and positivity.
    pub fn new(matrix: M4, k: f64) -> Result<Self> {
        let rho = ModeDensityMatrix { matrix, k };
        rho.validate(0, 0.0)?;
        Ok(rho)
    }

    pub fn new_unchecked(matrix: M4, k: f64) -> Self {
        ModeDensityMatrix { matrix, k }
    }

    /// Check the density-matrix invariants, reporting the step/time labels
    /// in the error payload.
    pub fn validate(&self, step: usize, time: f64) -> Result<()> {
        let herm = crate::linalg::hermiticity_defect(&self.matrix);
        if herm > 1e-12 {
            return Err(Error::NonPhysical {
                step,
                time,
                what: "hermiticity defect",
                value: herm,
                tol: 1e-12,
            });
        }
        let tr = self.matrix.trace();
        let tr_defect = (tr - ONE).norm();
        if tr_defect > 1e-12 {
            return Err(Error::NonPhysical {
                step,
                time,
                what: "trace defect",
                value: tr_defect,
                tol: 1e-12,
            });
        }
        let min_w = decompose_matrix(&self.matrix)
            .0
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_w < -1e-10 {
            return Err(Error::NonPhysical {
                step,
                time,
                what: "negative eigenvalue",
                value: min_w,
                tol: 1e-10,
            });
        }
        Ok(())
    }
}

/// Thermal state of the pre-quench mode Hamiltonian at inverse temperature
/// `beta`: Boltzmann mixture of the two even-block band states, empty odd
/// block. Weights use the overflow-stable sigmoid form
/// `p_lower = 1 / (1 + exp(-2 beta eps))`.
pub fn thermal_mode_state(model: &TwoBandModel, beta: f64, k: f64) -> Result<ModeDensityMatrix> {
    let eps = model.band_energy(k);
    if eps <= 0.0 {
        return Err(Error::DegenerateBand { k });
    }
    let (_, vecs) = eigh2(&model.bloch_hamiltonian(k));
    let p_lower = 1.0 / (1.0 + (-2.0 * beta * eps).exp());
    let p_upper = 1.0 / (1.0 + (2.0 * beta * eps).exp());
    let norm = p_lower + p_upper;
    let upper = vecs.column(0);
    let lower = vecs.column(1);
    let even = lower * lower.adjoint() * Complex::from(p_lower / norm)
        + upper * upper.adjoint() * Complex::from(p_upper / norm);
    Ok(ModeDensityMatrix::new_unchecked(
        embed_blocks(&even, &M2::zeros()),
        k,
    ))
}

/// Eigendecomposition of a density matrix at one instant: weights in
/// descending order, orthonormal eigenvector columns, and the accumulated
/// parallel-transport phase of each branch.
#[derive(Debug, Clone)]
pub struct SpectralFrame {
    pub weights: [f64; 4],
    /// Eigenvector columns, aligned index-by-index with `weights`.
    pub vectors: M4,
    /// `exp(-int <phi_j | d/dt phi_j> dt)` accumulated so far (unit modulus).
    pub transport: [C64; 4],
}

impl SpectralFrame {
    /// Largest deviation from orthonormality among the vector columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.adjoint() * self.vectors;
        crate::linalg::max_norm(&(g - M4::identity()))
    }

    /// `|| rho - sum_j p_j |phi_j><phi_j| ||_max` against a density matrix.
    pub fn reconstruction_defect(&self, rho: &M4) -> f64 {
        let mut acc = M4::zeros();
        for j in 0..4 {
            let v = self.vectors.column(j);
            acc += v * v.adjoint() * Complex::from(self.weights[j]);
        }
        crate::linalg::max_norm(&(acc - rho))
    }
}

/// Eigendecompose without any degeneracy policing. Parity-block-diagonal
/// matrices take an analytic 2x2 path per block; ties between blocks are
/// broken even-first (stable sort), which is deterministic.
fn decompose_matrix(rho: &M4) -> ([f64; 4], M4) {
    if off_block_norm(rho) <= BLOCK_TOL {
        let (we, ve) = eigh2(&even_block(rho));
        let (wo, vo) = eigh2(&odd_block(rho));
        let mut entries: Vec<(f64, V4)> = Vec::with_capacity(4);
        for j in 0..2 {
            entries.push((
                we[j],
                V4::new(ve[(0, j)], ve[(1, j)], Complex::from(0.0), Complex::from(0.0)),
            ));
        }
        for j in 0..2 {
            entries.push((
                wo[j],
                V4::new(Complex::from(0.0), Complex::from(0.0), vo[(0, j)], vo[(1, j)]),
            ));
        }
        entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut weights = [0.0; 4];
        let mut vectors = M4::zeros();
        for (j, (w, v)) in entries.into_iter().enumerate() {
            weights[j] = w;
            vectors.set_column(j, &v);
        }
        (weights, vectors)
    } else {
        let (w, v) = eigh::<4>(rho);
        ([w[0], w[1], w[2], w[3]], v)
    }
}

/// Diagonalize a density matrix into a fresh frame (transport phases 1,
/// eigenvector phases pinned by the largest-component-real-positive rule).
///
/// Degeneracies are an error only when both clustered weights are
/// meaningfully populated (above [`ZERO_WEIGHT_TOL`]): branches of zero
/// weight never contribute to the overlap amplitude, so their basis
/// ambiguity is harmless.
pub fn spectral_decompose(rho: &ModeDensityMatrix, degeneracy_tol: f64) -> Result<SpectralFrame> {
    let frame = decompose_unchecked(&rho.matrix);
    if let Some((p_a, p_b)) = degenerate_pair(&frame.weights, degeneracy_tol, ZERO_WEIGHT_TOL) {
        return Err(Error::DegenerateSpectrum {
            p_a,
            p_b,
            tol: degeneracy_tol,
        });
    }
    Ok(frame)
}

/// Diagonalize into a frame without the degeneracy check; used for
/// mid-trajectory frames, where branch identity is maintained by matching
/// and ambiguity surfaces as lost tracking instead.
pub fn decompose_unchecked(rho: &M4) -> SpectralFrame {
    let (weights, mut vectors) = decompose_matrix(rho);
    for j in 0..4 {
        let mut v: V4 = vectors.column(j).into_owned();
        fix_phase(&mut v);
        vectors.set_column(j, &v);
    }
    SpectralFrame {
        weights,
        vectors,
        transport: [ONE; 4],
    }
}

/// First descending-adjacent weight pair closer than `tol` with both
/// members above `zero_tol`, if any.
fn degenerate_pair(weights: &[f64; 4], tol: f64, zero_tol: f64) -> Option<(f64, f64)> {
    for j in 0..3 {
        let (a, b) = (weights[j], weights[j + 1]);
        if (a - b).abs() < tol && a > zero_tol && b > zero_tol {
            return Some((a, b));
        }
    }
    None
}

/// Tolerances and hooks controlling trajectory tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// Below this gap, populated eigenvalues count as degenerate.
    pub degeneracy_tol: f64,
    /// Minimum |<phi_j(t_n)|phi_j(t_n+1)>| for a branch to count as tracked.
    pub overlap_floor: f64,
    /// Weights at or below this are exact zeros (see [`ZERO_WEIGHT_TOL`]).
    pub zero_weight_tol: f64,
    /// If set, every raw frame is re-phased with seeded pseudo-random unit
    /// factors before matching. All reported quantities must be unchanged;
    /// this certifies gauge invariance of the pipeline.
    pub gauge_seed: Option<u64>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            degeneracy_tol: 1e-9,
            overlap_floor: 0.5,
            zero_weight_tol: ZERO_WEIGHT_TOL,
            gauge_seed: None,
        }
    }
}

/// Match the branches of `next_raw` to `prev` (best of the 24 index
/// permutations by total overlap magnitude) and extend each branch's
/// transport phase by `conj(phase(<phi_j(prev)|phi_j(next)>))`.
///
/// `initial_weights` are the frame-0 weights of the same trajectory:
/// branches that started empty are exempt from the overlap floor, because
/// they contribute exactly zero amplitude no matter how they are tracked.
/// `step`, `time`, and `total_steps` only label the error payload.
pub fn match_and_transport(
    prev: &SpectralFrame,
    next_raw: &SpectralFrame,
    initial_weights: &[f64; 4],
    step: usize,
    time: f64,
    total_steps: usize,
    opts: &TrajectoryOptions,
) -> Result<SpectralFrame> {
    let mut ovl = [[Complex::from(0.0); 4]; 4];
    for (i, row) in ovl.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = prev.vectors.column(i).dotc(&next_raw.vectors.column(j));
        }
    }
    let mut best_perm = &PERMS4[0];
    let mut best_score = f64::NEG_INFINITY;
    for perm in &PERMS4 {
        // Count only finite magnitudes: one non-finite entry must not poison
        // every permutation's score (NaN comparisons are all false, which
        // would freeze the assignment at the first permutation).
        let score: f64 = (0..4)
            .map(|i| ovl[i][perm[i]].norm())
            .filter(|m| m.is_finite())
            .sum();
        if score > best_score {
            best_score = score;
            best_perm = perm;
        }
    }

    let mut weights = [0.0; 4];
    let mut vectors = M4::zeros();
    let mut transport = [ONE; 4];
    for i in 0..4 {
        let j = best_perm[i];
        weights[i] = next_raw.weights[j];
        vectors.set_column(i, &next_raw.vectors.column(j).into_owned());
        let o = ovl[i][j];
        let mag = o.norm();
        // `!(mag >= floor)` rather than `mag < floor`: a non-finite overlap
        // (from a pathological frame) must fail tracking, not slip through.
        if initial_weights[i] > opts.zero_weight_tol && !(mag >= opts.overlap_floor) {
            return Err(Error::TrackingLost {
                step,
                time,
                overlap: mag,
                floor: opts.overlap_floor,
                suggested_steps: 2 * total_steps,
            });
        }
        // A vanishing overlap can only happen on exempt (zero-amplitude)
        // branches; leave their phase untouched rather than divide by ~0.
        transport[i] = if mag > 1e-14 {
            prev.transport[i] * (o / mag).conj()
        } else {
            prev.transport[i]
        };
    }
    Ok(SpectralFrame {
        weights,
        vectors,
        transport,
    })
}

/// Re-anchor the basis of frame 0's zero-weight subspace by continuity with
/// the following frame. Eigenvectors of exactly-zero eigenvalues are
/// arbitrary within their subspace; choosing them as the projections of the
/// next frame's vectors keeps step 0 -> 1 matching clean. Amplitudes are
/// unaffected (those branches carry zero weight forever).
pub fn anchor_zero_weight_basis(frame0: &mut SpectralFrame, next: &SpectralFrame, zero_tol: f64) {
    let zero: Vec<usize> = (0..4)
        .filter(|&j| frame0.weights[j] <= zero_tol)
        .collect();
    if zero.is_empty() {
        return;
    }
    let mut projector = M4::zeros();
    for &j in &zero {
        let v = frame0.vectors.column(j);
        projector += v * v.adjoint();
    }
    let mut basis: Vec<V4> = Vec::with_capacity(zero.len());
    for j in 0..4 {
        if basis.len() == zero.len() {
            break;
        }
        let mut w: V4 = &projector * next.vectors.column(j);
        for b in &basis {
            let c = b.dotc(&w);
            w -= b * c;
        }
        let n = w.norm();
        if n > 0.3 {
            basis.push(w.unscale(n));
        }
    }
    // If the next frame under-spans the subspace, fill up from the original
    // vectors so the frame stays orthonormal.
    for &j in &zero {
        if basis.len() == zero.len() {
            break;
        }
        let mut w: V4 = frame0.vectors.column(j).into_owned();
        for b in &basis {
            let c = b.dotc(&w);
            w -= b * c;
        }
        let n = w.norm();
        if n > 0.5 {
            basis.push(w.unscale(n));
        }
    }
    for (&j, b) in zero.iter().zip(basis.iter()) {
        frame0.vectors.set_column(j, b);
    }
}

/// Multiply each eigenvector column by a unit factor (gauge change).
pub fn apply_gauge(frame: &mut SpectralFrame, phases: &[C64; 4]) {
    for j in 0..4 {
        let v: V4 = frame.vectors.column(j).into_owned() * phases[j];
        frame.vectors.set_column(j, &v);
    }
}

/// Seeded unit phases for gauge-invariance exercises (splitmix64 stream;
/// deterministic across platforms).
pub fn gauge_phases(seed: u64, step: usize) -> [C64; 4] {
    let mut s = seed ^ (step as u64).wrapping_mul(0xD1B54A32D192ED03);
    core::array::from_fn(|_| {
        let u = splitmix64(&mut s) as f64 / u64::MAX as f64;
        C64::from_polar(1.0, std::f64::consts::TAU * u)
    })
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// One mode's full spectral history on a time grid.
#[derive(Debug, Clone)]
pub struct ModeTrajectory {
    pub k: f64,
    pub times: Vec<f64>,
    /// Branch-matched frames, one per time.
    pub frames: Vec<SpectralFrame>,
    /// The evolved density matrices, one per time.
    pub densities: Vec<M4>,
}

impl ModeTrajectory {
    pub fn initial_weights(&self) -> [f64; 4] {
        self.frames[0].weights
    }

    /// Worst frame-vs-density reconstruction defect along the trajectory.
    pub fn max_reconstruction_defect(&self) -> f64 {
        self.frames
            .iter()
            .zip(self.densities.iter())
            .map(|(f, d)| f.reconstruction_defect(d))
            .fold(0.0, f64::max)
    }
}

const PERMS4: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];
