//! Topological analytics on top of the amplitude pipeline: analytic critical
//! times of a Hamiltonian quench, the dynamical topological order parameter
//! nu_D(t) read off the momentum profile of the geometric phase, and the
//! pseudo-spin winding number nu(t) of the even-occupation block, which is
//! the bulk invariant that dissipative dynamics can change.
//!
//! Conventions. The DTOP is the integer `(phi(pi) - phi(0)) / 2 pi` of an
//! unwrapped, endpoint-pinned phase profile. The pseudo-spin at momentum k
//! is the Bloch vector n of the normalized even block, `rho_even proportional
//! to (I + n.sigma) / 2`; its mirror at -k is `(-n_x, -n_y, n_z)` because
//! reordering the pair basis from (k, -k) to (-k, k) flips the sign of the
//! doubly occupied ket. The winding number counts signed rotations of n_hat
//! about the chiral axis (the common normal of every n_k), accumulated as
//! in-plane angle increments around the full Brillouin zone.

use nalgebra::{Matrix3, Vector3};

use crate::error::Error;
use crate::fockspace::even_block;
use crate::gloa::{geometric_phase_profile, wrap_to_pi, AmplitudeSeries, PhaseProfile};
use crate::linalg::M4;
use crate::model::QuenchProtocol;
use crate::Result;

use std::f64::consts::PI;

/// |n_vec| at or below this is an ill-defined pseudo-spin (no unit vector).
pub const SPIN_FLOOR: f64 = 1e-6;

/// Largest acceptable smallest-singular-value of the pseudo-spin matrix for
/// a chiral axis to exist.
pub const CHIRAL_TOL: f64 = 1e-6;

/// One critical momentum of a quench and its predicted non-analyticity times.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalMode {
    /// Root of h_hat_i . h_hat_f = 0 in (0, pi).
    pub k_c: f64,
    /// Post-quench band energy at `k_c`.
    pub energy: f64,
    /// t_c,n = (2n - 1) pi / (2 energy), n = 1..n_max.
    pub times: Vec<f64>,
}

/// All critical momenta of the Hamiltonian quench underlying `protocol`,
/// found by bracketed bisection of h_hat_i . h_hat_f on (0, pi) to 1e-12,
/// each with its first `n_max` critical times.
///
/// Only the pre- and post-quench Hamiltonians enter; for a dissipative
/// protocol the result is the unperturbed (gamma = 0) prediction.
pub fn critical_times(protocol: &QuenchProtocol, n_max: usize) -> Result<Vec<CriticalMode>> {
    let overlap_dot = |k: f64| -> Option<f64> {
        let hi = protocol.initial.unit_bloch_vector(k).ok()?;
        let hf = protocol.final_model.unit_bloch_vector(k).ok()?;
        Some(hi.dot(&hf))
    };
    const SAMPLES: usize = 4096;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..SAMPLES {
        let k = PI * (j as f64 + 0.5) / SAMPLES as f64;
        let Some(f) = overlap_dot(k) else {
            prev = None;
            continue;
        };
        if f == 0.0 {
            roots.push(k);
            prev = Some((k, f));
            continue;
        }
        if let Some((ka, fa)) = prev {
            if fa.signum() != f.signum() {
                let (mut lo, mut hi, mut flo) = (ka, k, fa);
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    let Some(fm) = overlap_dot(mid) else { break };
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                    } else if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        prev = Some((k, f));
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    if roots.is_empty() {
        return Err(Error::NoCriticalMode);
    }
    Ok(roots
        .into_iter()
        .map(|k_c| {
            let energy = protocol.final_model.band_energy(k_c);
            let times = (1..=n_max)
                .map(|n| (2 * n - 1) as f64 * PI / (2.0 * energy))
                .collect();
            CriticalMode { k_c, energy, times }
        })
        .collect())
}

/// DTOP of one unwrapped phase profile: `(phi(pi) - phi(0)) / 2 pi`. Integer
/// up to round-off because both endpoints are pinned to 0 (mod 2 pi).
pub fn dtop(profile: &PhaseProfile) -> f64 {
    (profile.phases.last().unwrap() - profile.phases[0]) / (2.0 * PI)
}

/// DTOP as a function of time, with the jump list read off the rounded
/// series.
#[derive(Debug, Clone)]
pub struct DtopSeries {
    pub times: Vec<f64>,
    pub nu_d: Vec<f64>,
    /// (time, change) for every step where the rounded DTOP moves; the time
    /// is the midpoint of the step straddling the change.
    pub jumps: Vec<(f64, f64)>,
}

/// |Im G_k| at or below this, for every mode at every time, routes
/// [`dtop_series`] to the real-amplitude branch (|G_k| <= 1 always, so an
/// absolute tolerance suffices).
pub const REAL_AMPLITUDE_TOL: f64 = 1e-9;

/// Evaluate the DTOP at every grid time of the per-mode amplitude series.
///
/// `exempt_ks` and `margin` configure the phase-profile unwrap exactly as in
/// [`geometric_phase_profile`]; pass the critical momenta so the genuine
/// pi-jumps there are not flagged.
///
/// When every amplitude is real (as for dynamics generated by a purely real
/// Liouvillian acting on a real state), the geometric phases are confined to
/// {0, pi} and the profile carries no orientation: any apparent winding
/// would only reflect the unwrap's sign choice at the pi-steps. That case is
/// detected up front and returns the honest answer nu_D = 0 at every time.
pub fn dtop_series(
    per_mode: &[AmplitudeSeries],
    exempt_ks: &[f64],
    margin: f64,
) -> Result<DtopSeries> {
    assert!(!per_mode.is_empty());
    let times = per_mode[0].times.clone();
    let all_real = per_mode
        .iter()
        .all(|s| s.values.iter().all(|g| g.im.abs() <= REAL_AMPLITUDE_TOL));
    if all_real {
        return Ok(DtopSeries {
            nu_d: vec![0.0; times.len()],
            times,
            jumps: Vec::new(),
        });
    }
    let mut nu_d = Vec::with_capacity(times.len());
    for n in 0..times.len() {
        let profile = geometric_phase_profile(per_mode, n, exempt_ks, margin)?;
        nu_d.push(dtop(&profile));
    }
    let mut jumps = Vec::new();
    for i in 0..nu_d.len().saturating_sub(1) {
        let delta = nu_d[i + 1].round() - nu_d[i].round();
        if delta != 0.0 {
            jumps.push((0.5 * (times[i] + times[i + 1]), delta));
        }
    }
    Ok(DtopSeries { times, nu_d, jumps })
}

/// Predicted DTOP change at the critical times of `k_c`:
/// `sgn(d|e_k|^2/dk at k_c) * sgn(beta)`, the slope taken by central
/// difference with step 1e-6.
pub fn dtop_jump_prediction(protocol: &QuenchProtocol, k_c: f64) -> Result<i32> {
    const STEP: f64 = 1e-6;
    let (_, e_plus) = protocol.overlap_coefficients(k_c + STEP)?;
    let (_, e_minus) = protocol.overlap_coefficients(k_c - STEP)?;
    let slope = (e_plus - e_minus) / (2.0 * STEP);
    if slope.abs() < 1e-10 {
        return Err(Error::ZeroSlope { k_c });
    }
    let sign_beta = if protocol.beta > 0.0 {
        1
    } else if protocol.beta < 0.0 {
        -1
    } else {
        0
    };
    Ok(if slope > 0.0 { sign_beta } else { -sign_beta })
}

/// Pseudo-spin Bloch vector of the even block of one pair-mode density
/// matrix: `rho_even / tr(rho_even) = (I + n.sigma) / 2`.
pub fn mode_pseudo_spin(rho: &M4) -> Vector3<f64> {
    let e = even_block(rho);
    let trace = (e[(0, 0)] + e[(1, 1)]).re;
    assert!(
        trace > 1e-12,
        "even-block trace {trace} is not positive; pseudo-spin undefined"
    );
    Vector3::new(
        2.0 * e[(0, 1)].re / trace,
        -2.0 * e[(0, 1)].im / trace,
        (e[(0, 0)] - e[(1, 1)]).re / trace,
    )
}

/// The pseudo-spin field over the full Brillouin zone at one instant.
#[derive(Debug, Clone)]
pub struct PseudoSpinField {
    /// Momenta in ascending order over (-pi, pi], treated as a periodic loop.
    pub ks: Vec<f64>,
    /// Bloch vector of the normalized even block at each momentum.
    pub n_vec: Vec<Vector3<f64>>,
    /// Unit pseudo-spin where |n_vec| exceeds the floor.
    pub n_hat: Vec<Option<Vector3<f64>>>,
    /// Indices into `ks` where the pseudo-spin is ill-defined.
    pub ill_defined: Vec<usize>,
    /// Unit vector orthogonal to every `n_vec`, sign-fixed so its
    /// largest-magnitude component is positive.
    pub chiral_axis: Vector3<f64>,
    /// Smallest singular value of the 3 x N pseudo-spin matrix; the residual
    /// of the chiral-symmetry claim.
    pub sigma_min: f64,
    pub spin_floor: f64,
}

impl PseudoSpinField {
    /// Assemble a field from explicit Bloch vectors on a full-zone grid.
    ///
    /// Fails with `NoChiralSymmetry` if no direction is orthogonal to every
    /// vector within [`CHIRAL_TOL`].
    pub fn from_vectors(
        ks: Vec<f64>,
        n_vec: Vec<Vector3<f64>>,
        spin_floor: f64,
    ) -> Result<Self> {
        assert_eq!(ks.len(), n_vec.len());
        assert!(!ks.is_empty());
        let mut gram = Matrix3::<f64>::zeros();
        for n in &n_vec {
            gram += n * n.transpose();
        }
        let eig = gram.symmetric_eigen();
        let mut smallest = 0;
        for i in 1..3 {
            if eig.eigenvalues[i] < eig.eigenvalues[smallest] {
                smallest = i;
            }
        }
        let sigma_min = eig.eigenvalues[smallest].max(0.0).sqrt();
        if sigma_min > CHIRAL_TOL {
            return Err(Error::NoChiralSymmetry {
                sigma_min,
                tol: CHIRAL_TOL,
            });
        }
        let mut axis: Vector3<f64> = eig.eigenvectors.column(smallest).into_owned();
        axis /= axis.norm();
        let mut i_max = 0;
        for i in 1..3 {
            if axis[i].abs() > axis[i_max].abs() {
                i_max = i;
            }
        }
        if axis[i_max] < 0.0 {
            axis = -axis;
        }
        let mut n_hat = Vec::with_capacity(n_vec.len());
        let mut ill_defined = Vec::new();
        for (i, n) in n_vec.iter().enumerate() {
            let norm = n.norm();
            debug_assert!(norm <= 1.0 + 1e-10, "Bloch-ball violation: |n| = {norm}");
            if norm > spin_floor {
                n_hat.push(Some(n / norm));
            } else {
                n_hat.push(None);
                ill_defined.push(i);
            }
        }
        Ok(Self {
            ks,
            n_vec,
            n_hat,
            ill_defined,
            chiral_axis: axis,
            sigma_min,
            spin_floor,
        })
    }
}

/// Mirror positive-k pseudo-spin vectors to the full zone. Reordering the
/// pair basis `(k, -k) -> (-k, k)` conjugates the even block so that
/// `n(-k) = (-n_x, -n_y, n_z)`; the output grid is `[-k_max .. k_max]`.
pub fn mirror_to_full_zone(
    ks: &[f64],
    ns: &[Vector3<f64>],
) -> (Vec<f64>, Vec<Vector3<f64>>) {
    assert_eq!(ks.len(), ns.len());
    let mut full_ks = Vec::with_capacity(2 * ks.len());
    let mut full_n = Vec::with_capacity(2 * ks.len());
    for (k, n) in ks.iter().zip(ns).rev() {
        full_ks.push(-k);
        full_n.push(Vector3::new(-n.x, -n.y, n.z));
    }
    for (k, n) in ks.iter().zip(ns) {
        full_ks.push(*k);
        full_n.push(*n);
    }
    (full_ks, full_n)
}

/// Pseudo-spin field from positive-k vectors, mirrored to the full zone.
pub fn pseudo_spin_field_from_vectors(
    ks: &[f64],
    ns: &[Vector3<f64>],
    spin_floor: f64,
) -> Result<PseudoSpinField> {
    let (full_ks, full_n) = mirror_to_full_zone(ks, ns);
    PseudoSpinField::from_vectors(full_ks, full_n, spin_floor)
}

/// Pseudo-spin field from pair-mode density matrices on the positive-k grid,
/// mirrored to the full zone with `n(-k) = (-n_x, -n_y, n_z)`.
pub fn pseudo_spin_field(ks: &[f64], rhos: &[M4], spin_floor: f64) -> Result<PseudoSpinField> {
    assert_eq!(ks.len(), rhos.len());
    let ns: Vec<Vector3<f64>> = rhos.iter().map(mode_pseudo_spin).collect();
    pseudo_spin_field_from_vectors(ks, &ns, spin_floor)
}

/// A winding number with its quantization quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub nu: i32,
    /// The un-rounded angle sum over 2 pi.
    pub raw: f64,
}

impl Winding {
    /// |raw - nu|: quadrature distance from exact quantization.
    pub fn deviation(&self) -> f64 {
        (self.raw - self.nu as f64).abs()
    }
}

/// Right-handed in-plane frame (e1, e2) perpendicular to `axis`.
fn in_plane_frame(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let reference = if axis.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let e1 = (reference - axis * reference.dot(axis)).normalize();
    let e2 = axis.cross(&e1);
    (e1, e2)
}

/// Winding of the unit pseudo-spin about the chiral axis, accumulated as
/// wrapped in-plane angle increments around the periodic momentum loop.
/// Exactly quantized up to round-off when the field closes on itself.
pub fn winding_number(field: &PseudoSpinField) -> Result<Winding> {
    if let Some(&i) = field.ill_defined.first() {
        return Err(Error::SpinVanishes {
            k: field.ks[i],
            norm: field.n_vec[i].norm(),
            floor: field.spin_floor,
        });
    }
    let (e1, e2) = in_plane_frame(&field.chiral_axis);
    let angles: Vec<f64> = field
        .n_hat
        .iter()
        .map(|n| {
            let n = n.as_ref().unwrap();
            n.dot(&e2).atan2(n.dot(&e1))
        })
        .collect();
    let m = angles.len();
    let mut total = 0.0;
    for i in 0..m {
        total += wrap_to_pi(angles[(i + 1) % m] - angles[i]);
    }
    let raw = total / (2.0 * PI);
    Ok(Winding {
        nu: raw.round() as i32,
        raw,
    })
}

/// Cross-check form of the winding number: the discretized loop integral
/// `(1/2pi) sum a . (n_hat_i x n_hat_{i+1})`, second-order accurate in the
/// grid spacing rather than exactly quantized.
pub fn winding_integrand_form(field: &PseudoSpinField) -> Result<f64> {
    if let Some(&i) = field.ill_defined.first() {
        return Err(Error::SpinVanishes {
            k: field.ks[i],
            norm: field.n_vec[i].norm(),
            floor: field.spin_floor,
        });
    }
    let m = field.n_hat.len();
    let mut total = 0.0;
    for i in 0..m {
        let a = field.n_hat[i].as_ref().unwrap();
        let b = field.n_hat[(i + 1) % m].as_ref().unwrap();
        total += field.chiral_axis.dot(&a.cross(b));
    }
    Ok(total / (2.0 * PI))
}

/// Localize the minimum of a smooth nonnegative surface (momentum, time) ->
/// value by coordinate-descent golden-section search, used to pin down the
/// instant and momentum where the pseudo-spin length vanishes. Returns
/// (momentum, time, value) with the time bracket shrunk below `t_tol`.
pub fn localize_spin_minimum(
    mut value: impl FnMut(f64, f64) -> f64,
    k_bracket: (f64, f64),
    t_bracket: (f64, f64),
    t_tol: f64,
) -> (f64, f64, f64) {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let golden_min = |f: &mut dyn FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64| -> f64 {
        let mut a = hi - GOLDEN * (hi - lo);
        let mut b = lo + GOLDEN * (hi - lo);
        let (mut fa, mut fb) = (f(a), f(b));
        while hi - lo > tol {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - GOLDEN * (hi - lo);
                fa = f(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + GOLDEN * (hi - lo);
                fb = f(b);
            }
        }
        0.5 * (lo + hi)
    };
    let (mut k, mut t) = (
        0.5 * (k_bracket.0 + k_bracket.1),
        0.5 * (t_bracket.0 + t_bracket.1),
    );
    for _ in 0..8 {
        t = golden_min(
            &mut |tt| value(k, tt),
            t_bracket.0,
            t_bracket.1,
            0.25 * t_tol,
        );
        k = golden_min(&mut |kk| value(kk, t), k_bracket.0, k_bracket.1, 1e-7);
    }
    (k, t, value(k, t))
}
