//! Small dense complex linear algebra shared by the physics modules.
//!
//! Everything here operates on fixed-size matrices (2x2, 4x4 state space,
//! 16x16 superoperators), so routines favor robustness and determinism over
//! asymptotic cleverness.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex;

pub use nalgebra::Vector3;

pub type C64 = Complex<f64>;
pub type M2 = SMatrix<C64, 2, 2>;
pub type M4 = SMatrix<C64, 4, 4>;
pub type M16 = SMatrix<C64, 16, 16>;
pub type V4 = SVector<C64, 4>;
pub type V16 = SVector<C64, 16>;

pub const I_C: C64 = Complex::new(0.0, 1.0);

/// Hermitian part `(m + m†)/2`.
pub fn hermitize<const D: usize>(m: &SMatrix<C64, D, D>) -> SMatrix<C64, D, D> {
    (m + m.adjoint()) * Complex::new(0.5, 0.0)
}

/// Max-norm of the anti-Hermitian part, `‖m − m†‖_max`.
pub fn hermiticity_defect<const D: usize>(m: &SMatrix<C64, D, D>) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Entrywise max-norm.
pub fn max_norm<const D: usize, const E: usize>(m: &SMatrix<C64, D, E>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending and
/// eigenvectors as matching columns. The input is hermitized first; the
/// caller is responsible for feeding a matrix that is Hermitian up to
/// roundoff.
///
/// The iterative solver can emit non-finite eigenvectors on exactly
/// degenerate spectra; when that happens the matrix is retried with a tiny
/// deterministic diagonal perturbation (graded per index, so it splits the
/// degeneracy) that is far below every tolerance used by the callers.
pub fn eigh<const D: usize>(m: &SMatrix<C64, D, D>) -> (SVector<f64, D>, SMatrix<C64, D, D>) {
    let h = hermitize(m);
    let scale = max_norm(&h).max(1.0);
    for attempt in 0..3 {
        let jitter = match attempt {
            0 => 0.0,
            1 => 1e-14 * scale,
            _ => 1e-11 * scale,
        };
        let dyn_h = DMatrix::<C64>::from_fn(D, D, |r, c| {
            let mut z = h[(r, c)];
            if r == c {
                z += Complex::from(jitter * r as f64);
            }
            z
        });
        let se = dyn_h.symmetric_eigen();
        let finite = se.eigenvalues.iter().all(|v| v.is_finite())
            && se.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            continue;
        }
        // Sort descending by eigenvalue.
        let mut order: Vec<usize> = (0..D).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
        let mut vals = SVector::<f64, D>::zeros();
        let mut vecs = SMatrix::<C64, D, D>::zeros();
        for (slot, &src) in order.iter().enumerate() {
            vals[slot] = se.eigenvalues[src];
            for r in 0..D {
                vecs[(r, slot)] = se.eigenvectors[(r, src)];
            }
        }
        return (vals, vecs);
    }
    panic!("eigendecomposition stayed non-finite after diagonal perturbation retries");
}

/// Analytic eigendecomposition of a Hermitian 2x2, eigenvalues descending.
/// Considerably cheaper than the iterative solver; used on the hot
/// trajectory path where density matrices split into 2x2 parity blocks.
pub fn eigh2(m: &M2) -> ([f64; 2], M2) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = (m[(0, 1)] + m[(1, 0)].conj()) * Complex::new(0.5, 0.0);
    let mid = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let hi = mid + half_gap;
    let lo = mid - half_gap;

    let mut vecs = M2::zeros();
    // Degenerate to machine precision means proportional to the identity
    // (half_gap bounds |b| from above), so every basis is an eigenbasis;
    // the axis basis is the stable choice — roundoff in `b` or the diagonal
    // must not steer the eigenvectors, or a degenerate block's basis would
    // change erratically from step to step of a trajectory.
    let scale = a.abs() + d.abs() + b.norm() + f64::MIN_POSITIVE;
    if half_gap <= 1e-14 * scale {
        vecs[(0, 0)] = Complex::new(1.0, 0.0);
        vecs[(1, 1)] = Complex::new(1.0, 0.0);
        return ([hi, lo], vecs);
    }
    // Eigenvector for `hi`: two algebraically equivalent forms, with squared
    // norms (hi-a)*2*half_gap and (hi-d)*2*half_gap; pick the better
    // conditioned one.
    let (v0, v1) = if (hi - a) >= (hi - d) {
        (b, Complex::new(hi - a, 0.0))
    } else {
        (Complex::new(hi - d, 0.0), b.conj())
    };
    let n = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if n == 0.0 {
        // Both forms underflowed (possible one ulp from exact degeneracy
        // when `hi` double-rounds below both diagonals): same identity-like
        // situation as above.
        vecs[(0, 0)] = Complex::new(1.0, 0.0);
        vecs[(1, 1)] = Complex::new(1.0, 0.0);
        return ([hi, lo], vecs);
    }
    let (v0, v1) = (v0 / n, v1 / n);
    vecs[(0, 0)] = v0;
    vecs[(1, 0)] = v1;
    // Orthogonal partner for `lo`.
    vecs[(0, 1)] = -v1.conj();
    vecs[(1, 1)] = v0.conj();
    ([hi, lo], vecs)
}

/// Rotate a vector's global phase so its largest-magnitude component is real
/// positive. Deterministic gauge for freshly computed eigenvectors.
pub fn fix_phase<const D: usize>(v: &mut SVector<C64, D>) {
    let mut best = 0usize;
    let mut best_norm = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let n = z.norm();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    if best_norm > 0.0 {
        let phase = v[best] / best_norm;
        let correction = phase.conj();
        for z in v.iter_mut() {
            *z *= correction;
        }
    }
}

/// Principal square root of a PSD Hermitian matrix via eigendecomposition.
/// Slightly negative eigenvalues (roundoff) are clamped to zero.
pub fn sqrtm_psd<const D: usize>(m: &SMatrix<C64, D, D>) -> SMatrix<C64, D, D> {
    let (vals, vecs) = eigh(m);
    let mut out = SMatrix::<C64, D, D>::zeros();
    for j in 0..D {
        let lam = vals[j].max(0.0).sqrt();
        if lam == 0.0 {
            continue;
        }
        let col = vecs.column(j);
        for r in 0..D {
            for c in 0..D {
                out[(r, c)] += col[r] * col[c].conj() * Complex::new(lam, 0.0);
            }
        }
    }
    out
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn one_norm<const D: usize>(m: &SMatrix<C64, D, D>) -> f64 {
    (0..D)
        .map(|c| (0..D).map(|r| m[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by [13/13] Padé approximation with scaling and
/// squaring (Higham 2005). Exact to roundoff for the matrix sizes used here.
pub fn expm<const D: usize>(a: &SMatrix<C64, D, D>) -> SMatrix<C64, D, D> {
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex::new(0.5f64.powi(s), 0.0);

    let ident = SMatrix::<C64, D, D>::identity();
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let b = |i: usize| Complex::new(PADE13[i], 0.0);
    let u_inner = &a6 * (a6 * b(13) + a4 * b(11) + a2 * b(9))
        + a6 * b(7)
        + a4 * b(5)
        + a2 * b(3)
        + ident * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (a6 * b(12) + a4 * b(10) + a2 * b(8))
        + a6 * b(6)
        + a4 * b(4)
        + a2 * b(2)
        + ident * b(0);

    let lhs = DMatrix::<C64>::from_fn(D, D, |r, c| v[(r, c)] - u[(r, c)]);
    let rhs = DMatrix::<C64>::from_fn(D, D, |r, c| v[(r, c)] + u[(r, c)]);
    let solved = lhs
        .lu()
        .solve(&rhs)
        .expect("Pade denominator is nonsingular for scaled input");
    let mut result = SMatrix::<C64, D, D>::from_fn(|r, c| solved[(r, c)]);
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Right null vector of a square complex matrix via SVD, together with the
/// two smallest singular values `(sigma_min, sigma_next)` for rank checks.
pub fn null_vector<const D: usize>(m: &SMatrix<C64, D, D>) -> (SVector<C64, D>, f64, f64) {
    let dyn_m = DMatrix::<C64>::from_fn(D, D, |r, c| m[(r, c)]);
    let svd = dyn_m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..D).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let smallest = order[0];
    let next = order[1];
    // Rows of v_t are the adjoints of the right singular vectors.
    let mut v = SVector::<C64, D>::zeros();
    for i in 0..D {
        v[i] = v_t[(smallest, i)].conj();
    }
    (
        v,
        svd.singular_values[smallest],
        svd.singular_values[next],
    )
}

/// Column-major vectorization of a 4x4 matrix.
pub fn vec4(m: &M4) -> V16 {
    let mut v = V16::zeros();
    for c in 0..4 {
        for r in 0..4 {
            v[c * 4 + r] = m[(r, c)];
        }
    }
    v
}

/// Inverse of [`vec4`].
pub fn unvec4(v: &V16) -> M4 {
    let mut m = M4::zeros();
    for c in 0..4 {
        for r in 0..4 {
            m[(r, c)] = v[c * 4 + r];
        }
    }
    m
}

/// Kronecker product of two 4x4 matrices, `(a ⊗ b)[(ia*4+ib),(ja*4+jb)] =
/// a[ia,ja] b[ib,jb]`. With column-major vectorization, `vec(A X B) =
/// (Bᵀ ⊗ A) vec(X)`.
pub fn kron4(a: &M4, b: &M4) -> M16 {
    let mut out = M16::zeros();
    for ia in 0..4 {
        for ja in 0..4 {
            let f = a[(ia, ja)];
            if f == Complex::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..4 {
                for jb in 0..4 {
                    out[(ia * 4 + ib, ja * 4 + jb)] = f * b[(ib, jb)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_complex_matrix<const D: usize>(seed: u64) -> SMatrix<C64, D, D> {
        // Tiny deterministic LCG; good enough for smoke inputs.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        SMatrix::<C64, D, D>::from_fn(|_, _| Complex::new(next(), next()))
    }

    #[test]
    fn eigh_reconstructs_hermitian_4x4() {
        let raw = random_complex_matrix::<4>(7);
        let h = hermitize(&raw);
        let (vals, vecs) = eigh(&h);
        let mut rebuilt = M4::zeros();
        for j in 0..4 {
            let col = vecs.column(j);
            for r in 0..4 {
                for c in 0..4 {
                    rebuilt[(r, c)] += col[r] * col[c].conj() * Complex::new(vals[j], 0.0);
                }
            }
        }
        assert!(max_norm(&(rebuilt - h)) < 1e-12);
        for j in 1..4 {
            assert!(vals[j - 1] >= vals[j]);
        }
        // orthonormal columns
        let gram = vecs.adjoint() * vecs;
        assert!(max_norm(&(gram - M4::identity())) < 1e-12);
    }

    #[test]
    fn eigh2_matches_general_solver() {
        for seed in 0..20 {
            let raw = random_complex_matrix::<2>(seed);
            let h = hermitize(&raw);
            let ([hi, lo], vecs) = eigh2(&h);
            let (vals, _) = eigh(&h);
            assert_abs_diff_eq!(hi, vals[0], epsilon = 1e-12);
            assert_abs_diff_eq!(lo, vals[1], epsilon = 1e-12);
            for j in 0..2 {
                let lam = if j == 0 { hi } else { lo };
                let col = vecs.column(j).clone_owned();
                let resid = h * &col - &col * Complex::new(lam, 0.0);
                assert!(resid.norm() < 1e-12);
            }
            let gram = vecs.adjoint() * vecs;
            assert!(max_norm(&(gram - M2::identity())) < 1e-12);
        }
    }

    #[test]
    fn eigh2_stays_finite_at_machine_degeneracy() {
        // Blocks that are the identity up to last-bit noise: one ulp of
        // diagonal mismatch, or a denormal-scale off-diagonal left behind by
        // an LU solve. Eigenvectors must stay finite and orthonormal — the
        // naive normalization underflows to 0/0 here — and the returned
        // basis must be the stable axis basis.
        let q = 0.18704693583090054;
        let cases = [
            (q, q, C64::from(0.0)),
            (q, q - f64::EPSILON * q, C64::from(0.0)),
            (q - f64::EPSILON * q, q, C64::from(0.0)),
            (q, q, Complex::new(0.0, 1e-33)),
            (q, q - f64::EPSILON * q, Complex::new(-3e-300, 1e-307)),
        ];
        for (a, d, b) in cases {
            let mut m = M2::zeros();
            m[(0, 0)] = C64::from(a);
            m[(1, 1)] = C64::from(d);
            m[(0, 1)] = b;
            m[(1, 0)] = b.conj();
            let ([hi, lo], vecs) = eigh2(&m);
            assert!(hi.is_finite() && lo.is_finite());
            assert_abs_diff_eq!(hi, q, epsilon = 1e-15);
            assert_abs_diff_eq!(lo, q, epsilon = 1e-15);
            assert!(vecs.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
            assert!(max_norm(&(vecs - M2::identity())) < 1e-12);
        }
    }

    #[test]
    fn expm_matches_taylor_series() {
        let a = random_complex_matrix::<4>(3) * Complex::new(0.4, 0.0);
        let pade = expm(&a);
        // Taylor reference with enough terms for a small-norm input.
        let mut term = M4::identity();
        let mut sum = M4::identity();
        for n in 1..60 {
            term = term * a * Complex::new(1.0 / n as f64, 0.0);
            sum += term;
        }
        assert!(max_norm(&(pade - sum)) < 1e-13);
    }

    #[test]
    fn expm_handles_large_norm_via_squaring() {
        let raw = random_complex_matrix::<4>(11);
        let h = hermitize(&raw) * Complex::new(40.0, 0.0);
        // exp(-iH) is unitary for Hermitian H regardless of norm.
        let u = expm(&(h * (-I_C)));
        let gram = u.adjoint() * u;
        assert!(max_norm(&(gram - M4::identity())) < 1e-11);
    }

    #[test]
    fn null_vector_finds_kernel() {
        // Build a matrix with a known kernel direction.
        let mut m = random_complex_matrix::<4>(5);
        let (_, vecs) = eigh(&hermitize(&m.clone()));
        let kernel = vecs.column(2).clone_owned();
        // Project out the kernel direction from every row: m <- m (I - kk†)
        let proj = M4::identity() - &kernel * kernel.adjoint();
        m *= proj;
        let (v, sigma_min, sigma_next) = null_vector(&m);
        assert!(sigma_min < 1e-12);
        assert!(sigma_next > 1e-3);
        let overlap = (kernel.adjoint() * v)[(0, 0)].norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn vectorization_consistent_with_kron() {
        let a = random_complex_matrix::<4>(21);
        let x = random_complex_matrix::<4>(22);
        let b = random_complex_matrix::<4>(23);
        let direct = vec4(&(a * x * b));
        let via_kron = kron4(&b.transpose(), &a) * vec4(&x);
        assert!((direct - via_kron).norm() < 1e-12);
    }

    #[test]
    fn sqrtm_squares_back() {
        let raw = random_complex_matrix::<4>(9);
        let psd = &raw * raw.adjoint();
        let root = sqrtm_psd(&psd);
        assert!(max_norm(&(&root * &root - psd)) < 1e-10);
    }

    #[test]
    fn fix_phase_makes_largest_component_real() {
        let mut v = V4::from_fn(|i, _| Complex::new(0.3 * i as f64, 1.0 - 0.2 * i as f64));
        fix_phase(&mut v);
        let mut best = 0;
        for i in 0..4 {
            if v[i].norm() > v[best].norm() {
                best = i;
            }
        }
        assert!(v[best].im.abs() < 1e-15);
        assert!(v[best].re > 0.0);
    }
}
