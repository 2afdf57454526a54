//! Open- and closed-system dynamics of one `(k, -k)` mode pair.
//!
//! Each pair evolves independently under a Lindblad master equation
//! `d rho / dt = -i [H, rho] + sum_j (L_j rho L_j^+ - {L_j^+ L_j, rho} / 2)`
//! on the four-dimensional pair Fock space. The generator is materialized as
//! a 16x16 superoperator acting on column-stacked density matrices, and the
//! trajectory is produced by repeated application of a cached one-step
//! exponential propagator (or, for closed systems, conjugation by the 4x4
//! unitary step).

use num_complex::Complex;

use crate::error::Error;
use crate::fockspace::{
    self, anchor_zero_weight_basis, apply_gauge, decompose_unchecked, gauge_phases,
    match_and_transport, ModeDensityMatrix, ModeOperators, ModeTrajectory, TrajectoryOptions,
};
use crate::linalg::{expm, hermitize, unvec4, vec4, C64, M16, M4};
use crate::model::{QuenchProtocol, TrigSeries, TwoBandModel};
use crate::Result;

const I_IM: C64 = Complex::new(0.0, 1.0);

/// Parameters of the jump operators attached to a quench protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum DissipationSpec {
    /// Closed-system (unitary) evolution.
    None,
    /// Particle exchange with a featureless environment: every mode gains
    /// `L = sqrt(gamma_plus) a^+` (injection) and `L = sqrt(gamma_minus) a`
    /// (leakage), for `a = a_k` and `a_{-k}` alike.
    Natural { gamma_plus: f64, gamma_minus: f64 },
    /// Quasi-local pairing dissipators with a pure dark state per mode.
    Engineered(EngineeredFamily),
}

impl DissipationSpec {
    pub fn natural(gamma_plus: f64, gamma_minus: f64) -> Self {
        assert!(
            gamma_plus >= 0.0 && gamma_minus >= 0.0,
            "dissipation rates must be non-negative"
        );
        assert!(
            gamma_plus + gamma_minus > 0.0,
            "at least one dissipation rate must be positive"
        );
        DissipationSpec::Natural { gamma_plus, gamma_minus }
    }
}

/// Family of engineered jump operators
/// `L_k = v_k a_k^+ - u_k a_{-k}` and `L_{-k} = v_k a_{-k}^+ + u_k a_k`,
/// with `u` odd and `v` even in `k` so the pair `(L_k, L_{-k})` is closed
/// under `k -> -k`. The system Hamiltonian is taken to be zero while these
/// act.
///
/// The amplitudes are trig polynomials; the control parameter `kappa` adds
/// to the constant (s-wave) part of `v`:
///
/// `u_k = scale * sum_m u_sin[m] sin((m+1) k)`
/// `v_k = scale * (kappa + sum_n v_cos[n] cos(n k))`
///
/// The defaults `u_sin = [1]`, `v_cos = [0, -1]` give the p-wave-paired
/// family `u = sin k`, `v = kappa - cos k`, whose dark-state winding changes
/// as `kappa` crosses 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredFamily {
    pub kappa_initial: f64,
    pub kappa_final: f64,
    /// Overall amplitude multiplying both `u` and `v`; the jump rates scale
    /// as its square.
    pub scale: f64,
    pub u_sin: Vec<f64>,
    pub v_cos: Vec<f64>,
}

impl EngineeredFamily {
    /// The default p-wave family at unit scale.
    pub fn p_wave(kappa_initial: f64, kappa_final: f64) -> Self {
        EngineeredFamily {
            kappa_initial,
            kappa_final,
            scale: 1.0,
            u_sin: vec![1.0],
            v_cos: vec![0.0, -1.0],
        }
    }

    /// Odd amplitude `u_k`.
    pub fn u(&self, k: f64) -> f64 {
        let mut acc = 0.0;
        for (m, c) in self.u_sin.iter().enumerate() {
            acc += c * ((m + 1) as f64 * k).sin();
        }
        self.scale * acc
    }

    /// Even amplitude `v_k` at dial setting `kappa`.
    pub fn v(&self, k: f64, kappa: f64) -> f64 {
        let mut acc = kappa;
        for (n, c) in self.v_cos.iter().enumerate() {
            acc += c * (n as f64 * k).cos();
        }
        self.scale * acc
    }

    /// `(u, v)` at dial setting `kappa`, as plain series.
    pub fn series(&self, kappa: f64) -> (TrigSeries, TrigSeries) {
        let u = TrigSeries {
            cos: vec![],
            sin: self.u_sin.iter().map(|c| c * self.scale).collect(),
        };
        let mut cos: Vec<f64> = self.v_cos.iter().map(|c| c * self.scale).collect();
        if cos.is_empty() {
            cos.push(0.0);
        }
        cos[0] += self.scale * kappa;
        let v = TrigSeries { cos, sin: vec![] };
        (u, v)
    }
}

/// Uniform time grid `t_n = n dt`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Self {
        assert!(t_max > 0.0 && steps > 0, "time grid must be non-trivial");
        TimeGrid { t_max, steps }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// The same span sampled `factor` times more finely.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid { t_max: self.t_max, steps: self.steps * factor }
    }
}

/// Lindblad generator of one mode pair, stored as a 16x16 superoperator on
/// column-stacked 4x4 matrices. Purely coherent generators remember their
/// Hamiltonian so propagation can use the cheaper 4x4 unitary step.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub matrix: M16,
    pub k: f64,
    hamiltonian: M4,
    dissipative: bool,
}

impl Liouvillian {
    pub fn is_unitary(&self) -> bool {
        !self.dissipative
    }

    pub fn hamiltonian(&self) -> &M4 {
        &self.hamiltonian
    }

    /// Apply the generator to a density matrix.
    pub fn apply(&self, rho: &M4) -> M4 {
        unvec4(&(self.matrix * vec4(rho)))
    }

    /// `|| L^+ (I) ||`: zero for any trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        (self.matrix.adjoint() * vec4(&M4::identity())).norm()
    }

    /// Add a jump operator `L` (dissipator `L . L^+ - {L^+ L, .} / 2`).
    pub fn add_jump_operator(&mut self, l: &M4) {
        let id = M4::identity();
        let ldl = l.adjoint() * l;
        let half = Complex::from(0.5);
        self.matrix += crate::linalg::kron4(&l.conjugate(), l)
            - crate::linalg::kron4(&id, &ldl) * half
            - crate::linalg::kron4(&ldl.transpose(), &id) * half;
        self.dissipative = true;
    }
}

/// Coherent generator `-i [h_k . sigma, .]` of a two-band model at momentum
/// `k` (zero on the odd-parity block).
pub fn build_hamiltonian_liouvillian(model: &TwoBandModel, k: f64) -> Liouvillian {
    let ops = ModeOperators::new();
    let h = ops.hamiltonian(&model.bloch_vector(k));
    let id = M4::identity();
    let matrix =
        (crate::linalg::kron4(&id, &h) - crate::linalg::kron4(&h.transpose(), &id)) * (-I_IM);
    Liouvillian { matrix, k, hamiltonian: h, dissipative: false }
}

/// Add leakage (`sqrt(gamma_minus) a`) and injection (`sqrt(gamma_plus) a^+`)
/// jump operators on both modes of the pair.
pub fn add_natural_dissipation(
    mut lv: Liouvillian,
    gamma_plus: f64,
    gamma_minus: f64,
    ops: &ModeOperators,
) -> Liouvillian {
    assert!(gamma_plus >= 0.0 && gamma_minus >= 0.0);
    if gamma_minus > 0.0 {
        let s = Complex::from(gamma_minus.sqrt());
        lv.add_jump_operator(&(ops.a_k * s));
        lv.add_jump_operator(&(ops.a_mk * s));
    }
    if gamma_plus > 0.0 {
        let s = Complex::from(gamma_plus.sqrt());
        lv.add_jump_operator(&(ops.a_k_dag * s));
        lv.add_jump_operator(&(ops.a_mk_dag * s));
    }
    lv
}

/// Add the engineered pair of jump operators
/// `L_k = v a_k^+ - u a_{-k}` and `L_{-k} = v a_{-k}^+ + u a_k`.
pub fn add_engineered_dissipation(
    mut lv: Liouvillian,
    u: f64,
    v: f64,
    ops: &ModeOperators,
) -> Result<Liouvillian> {
    if u == 0.0 && v == 0.0 {
        return Err(Error::NullLindblad { k: lv.k });
    }
    let (u, v) = (Complex::from(u), Complex::from(v));
    lv.add_jump_operator(&(ops.a_k_dag * v - ops.a_mk * u));
    lv.add_jump_operator(&(ops.a_mk_dag * v + ops.a_k * u));
    Ok(lv)
}

/// Build the full generator for a protocol at momentum `k`.
pub fn build_liouvillian(protocol: &QuenchProtocol, k: f64) -> Result<Liouvillian> {
    let lv = build_hamiltonian_liouvillian(&protocol.final_model, k);
    let ops = ModeOperators::new();
    match &protocol.dissipation {
        DissipationSpec::None => Ok(lv),
        DissipationSpec::Natural { gamma_plus, gamma_minus } => {
            Ok(add_natural_dissipation(lv, *gamma_plus, *gamma_minus, &ops))
        }
        DissipationSpec::Engineered(family) => {
            add_engineered_dissipation(lv, family.u(k), family.v(k, family.kappa_final), &ops)
        }
    }
}

/// The closed-form mixed-state overlap amplitude of a unitary quench:
/// thermal weights `p_-/p_+` on the lower/upper pre-quench band, each term
/// an interference factor times its dynamic-phase correction,
///
/// `G_k(t) = p_- (gsq e^{i e t} + esq e^{-i e t}) e^{+i e (esq - gsq) t}
///         + p_+ (esq e^{i e t} + gsq e^{-i e t}) e^{-i e (esq - gsq) t}`
///
/// with `e` the post-quench band energy and `(gsq, esq)` the band overlaps.
pub fn closed_form_mode_gloa(protocol: &QuenchProtocol, k: f64, t: f64) -> Result<C64> {
    let eps_i = protocol.initial.band_energy(k);
    if eps_i <= 0.0 {
        return Err(Error::DegenerateBand { k });
    }
    let eps = protocol.final_model.band_energy(k);
    if eps <= 0.0 {
        return Err(Error::DegenerateBand { k });
    }
    let (gsq, esq) = protocol.overlap_coefficients(k)?;
    let beta = protocol.beta;
    let p_lower = 1.0 / (1.0 + (-2.0 * beta * eps_i).exp());
    let p_upper = 1.0 / (1.0 + (2.0 * beta * eps_i).exp());
    let norm = p_lower + p_upper;

    let plus = C64::from_polar(1.0, eps * t);
    let minus = plus.conj();
    let lower_corr = C64::from_polar(1.0, eps * (esq - gsq) * t);
    let term_lower = (plus * gsq + minus * esq) * lower_corr;
    let term_upper = (plus * esq + minus * gsq) * lower_corr.conj();
    Ok(term_lower * (p_lower / norm) + term_upper * (p_upper / norm))
}

/// Propagate a mode state along a time grid, producing the spectrally
/// tracked trajectory. Closed systems step the density matrix by unitary
/// conjugation; open systems apply the cached `exp(L dt)` superoperator.
pub fn evolve_mode(
    rho0: &ModeDensityMatrix,
    lv: &Liouvillian,
    grid: &TimeGrid,
    opts: &TrajectoryOptions,
) -> Result<ModeTrajectory> {
    let dt = grid.dt();
    let steps = grid.steps;

    enum Stepper {
        Unitary(M4),
        Open(M16),
    }
    let stepper = if lv.is_unitary() {
        Stepper::Unitary(expm(&(lv.hamiltonian * (-I_IM * Complex::from(dt)))))
    } else {
        Stepper::Open(expm(&(lv.matrix * Complex::from(dt))))
    };
    let advance = |rho: &M4| -> M4 {
        let next = match &stepper {
            Stepper::Unitary(u) => u * rho * u.adjoint(),
            Stepper::Open(p) => unvec4(&(p * vec4(rho))),
        };
        hermitize(&next)
    };

    let mut frame0 = fockspace::spectral_decompose(rho0, opts.degeneracy_tol)?;
    if let Some(seed) = opts.gauge_seed {
        apply_gauge(&mut frame0, &gauge_phases(seed, 0));
    }

    let mut densities = Vec::with_capacity(steps + 1);
    densities.push(rho0.matrix);
    let mut raw_frames_first = None;

    // First step is computed before frame 0 is committed: the basis of
    // frame 0's zero-weight subspace is anchored to it for continuity.
    if steps >= 1 {
        let rho1 = advance(&rho0.matrix);
        check_physical(&rho1, 1, dt)?;
        let mut raw = decompose_unchecked(&rho1);
        check_weights(&raw.weights, 1, dt)?;
        if let Some(seed) = opts.gauge_seed {
            apply_gauge(&mut raw, &gauge_phases(seed, 1));
        }
        anchor_zero_weight_basis(&mut frame0, &raw, opts.zero_weight_tol);
        densities.push(rho1);
        raw_frames_first = Some(raw);
    }

    let initial_weights = frame0.weights;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(frame0);

    if let Some(raw1) = raw_frames_first {
        let f1 = match_and_transport(&frames[0], &raw1, &initial_weights, 1, dt, steps, opts)?;
        frames.push(f1);
    }

    for n in 2..=steps {
        let t = grid.time(n);
        let rho = advance(densities.last().unwrap());
        check_physical(&rho, n, t)?;
        let mut raw = decompose_unchecked(&rho);
        check_weights(&raw.weights, n, t)?;
        if let Some(seed) = opts.gauge_seed {
            apply_gauge(&mut raw, &gauge_phases(seed, n));
        }
        let f = match_and_transport(frames.last().unwrap(), &raw, &initial_weights, n, t, steps, opts)?;
        densities.push(rho);
        frames.push(f);
    }

    Ok(ModeTrajectory { k: lv.k, times: grid.times(), frames, densities })
}

fn check_physical(rho: &M4, step: usize, time: f64) -> Result<()> {
    let tr = rho.trace();
    let defect = (tr - Complex::from(1.0)).norm();
    if defect > 1e-9 {
        return Err(Error::NonPhysical {
            step,
            time,
            what: "trace defect",
            value: defect,
            tol: 1e-9,
        });
    }
    Ok(())
}

fn check_weights(weights: &[f64; 4], step: usize, time: f64) -> Result<()> {
    let w_min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    if w_min < -1e-9 {
        return Err(Error::NonPhysical {
            step,
            time,
            what: "negative spectral weight",
            value: w_min,
            tol: 1e-9,
        });
    }
    Ok(())
}

/// Evolve a state to an arbitrary time in one shot: unitary conjugation for
/// closed generators, `unvec(expm(t L) vec rho)` otherwise. Exact for the
/// time-independent generators of a sudden quench; no tracking is performed.
pub fn propagate_to(lv: &Liouvillian, rho0: &M4, t: f64) -> M4 {
    let next = if lv.is_unitary() {
        let u = expm(&(lv.hamiltonian * (-I_IM * Complex::from(t))));
        u * rho0 * u.adjoint()
    } else {
        unvec4(&(expm(&(lv.matrix * Complex::from(t))) * vec4(rho0)))
    };
    hermitize(&next)
}

/// The unique stationary state of a dissipative generator, from the
/// smallest singular direction of the superoperator.
pub fn steady_state(lv: &Liouvillian) -> Result<ModeDensityMatrix> {
    let (v, _sigma_min, sigma_next) = crate::linalg::null_vector(&lv.matrix);
    if sigma_next < 1e-8 {
        return Err(Error::DegenerateSteadyState { sigma_next, tol: 1e-8 });
    }
    let mut rho = hermitize(&unvec4(&v));
    let tr = rho.trace().re;
    if tr.abs() < 1e-10 {
        return Err(Error::DegenerateSteadyState { sigma_next, tol: 1e-8 });
    }
    rho.unscale_mut(tr);
    ModeDensityMatrix::new(rho, lv.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{even_block, thermal_mode_state};
    use crate::linalg::max_norm;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn zero_model() -> TwoBandModel {
        TwoBandModel::custom(TrigSeries::default(), TrigSeries::default(), TrigSeries::default())
    }

    /// Overlap amplitude straight from a tracked trajectory:
    /// `sum_j sqrt(p_j(t) p_j(0)) <phi_j(0)|phi_j(t)> transport_j`.
    fn trajectory_amplitude(traj: &ModeTrajectory, n: usize) -> C64 {
        let f0 = &traj.frames[0];
        let f = &traj.frames[n];
        (0..4)
            .map(|j| {
                let w = (f.weights[j].max(0.0) * f0.weights[j].max(0.0)).sqrt();
                if w == 0.0 {
                    return C64::from(0.0);
                }
                f0.vectors.column(j).dotc(&f.vectors.column(j)) * f.transport[j] * w
            })
            .sum()
    }

    #[test]
    fn closed_form_is_one_at_zero_time() {
        let p = QuenchProtocol::unitary(TwoBandModel::tfim(0.0), TwoBandModel::tfim(10.0), 1.0);
        for k in [0.2, 1.0, 2.8] {
            let g = closed_form_mode_gloa(&p, k, 0.0).unwrap();
            assert!((g - C64::from(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn closed_form_identity_quench_is_unity() {
        let p = QuenchProtocol::unitary(TwoBandModel::tfim(0.3), TwoBandModel::tfim(0.3), 0.7);
        for k in [0.4, 1.3] {
            for t in [0.1, 1.0, 5.0] {
                let g = closed_form_mode_gloa(&p, k, t).unwrap();
                assert!((g - C64::from(1.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_critical_mode_is_a_cosine() {
        // h: 0 -> 10 quench: the Bloch vectors are orthogonal where
        // cos k = 1/10, and the amplitude reduces to cos(eps_f t).
        let p = QuenchProtocol::unitary(TwoBandModel::tfim(0.0), TwoBandModel::tfim(10.0), 1.0);
        let k_c = (0.1f64).acos();
        let eps_f = p.final_model.band_energy(k_c);
        assert_abs_diff_eq!(eps_f, 99f64.sqrt(), epsilon = 1e-12);
        for t in [0.05, 0.1, 0.2, 0.33] {
            let g = closed_form_mode_gloa(&p, k_c, t).unwrap();
            assert!((g - C64::from((eps_f * t).cos())).norm() < 1e-12);
        }
        let t_c1 = PI / (2.0 * eps_f);
        let g = closed_form_mode_gloa(&p, k_c, t_c1).unwrap();
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_liouvillian_examples() {
        let lv = build_hamiltonian_liouvillian(&zero_model(), 0.8);
        assert!(max_norm(&lv.matrix) == 0.0);

        let lv = build_hamiltonian_liouvillian(&TwoBandModel::tfim(2.0), 0.8);
        assert!(lv.apply(&M4::identity().scale(0.25)).norm() < 1e-14);
        assert!(lv.trace_defect() < 1e-12);
        assert!(lv.is_unitary());

        // h = z: the even-block coherence rotates at frequency 2 eps = 2.
        let m = TwoBandModel::custom(
            TrigSeries::default(),
            TrigSeries::default(),
            TrigSeries::constant(1.0),
        );
        let lv = build_hamiltonian_liouvillian(&m, 0.3);
        let mut coh = M4::zeros();
        coh[(0, 1)] = C64::from(1.0);
        let out = lv.apply(&coh);
        assert!((out - coh * Complex::new(0.0, -2.0)).norm() < 1e-13);
    }

    #[test]
    fn natural_dissipation_steady_states() {
        let ops = ModeOperators::new();
        let base = || build_hamiltonian_liouvillian(&zero_model(), 0.5);

        // Pure loss empties both modes.
        let lv = add_natural_dissipation(base(), 0.0, 1.0, &ops);
        assert!(lv.trace_defect() < 1e-12);
        let ss = steady_state(&lv).unwrap();
        let mut expect = M4::zeros();
        expect[(0, 0)] = C64::from(1.0);
        assert!(max_norm(&(ss.matrix - expect)) < 1e-10);

        // Pure gain fills both.
        let lv = add_natural_dissipation(base(), 1.0, 0.0, &ops);
        let ss = steady_state(&lv).unwrap();
        let mut expect = M4::zeros();
        expect[(1, 1)] = C64::from(1.0);
        assert!(max_norm(&(ss.matrix - expect)) < 1e-10);

        // Mixed rates: product state with per-mode occupation g+/(g+ + g-).
        let (gp, gm) = (1.0, 3.0);
        let lv = add_natural_dissipation(base(), gp, gm, &ops);
        let ss = steady_state(&lv).unwrap();
        let nbar = gp / (gp + gm);
        let mut expect = M4::zeros();
        expect[(0, 0)] = C64::from((1.0 - nbar) * (1.0 - nbar));
        expect[(1, 1)] = C64::from(nbar * nbar);
        expect[(2, 2)] = C64::from(nbar * (1.0 - nbar));
        expect[(3, 3)] = C64::from(nbar * (1.0 - nbar));
        assert!(max_norm(&(ss.matrix - expect)) < 1e-10);
    }

    #[test]
    fn engineered_dissipation_has_dark_steady_state() {
        let ops = ModeOperators::new();
        let family = EngineeredFamily::p_wave(0.0, 0.5);
        let k = 0.7;
        let (u, v) = (family.u(k), family.v(k, family.kappa_final));
        let lv = add_engineered_dissipation(
            build_hamiltonian_liouvillian(&zero_model(), k),
            u,
            v,
            &ops,
        )
        .unwrap();
        assert!(lv.trace_defect() < 1e-12);
        let ss = steady_state(&lv).unwrap();
        assert!(lv.apply(&ss.matrix).norm() < 1e-10);

        // Dark state: both jump operators annihilate it.
        let l_k = ops.a_k_dag * Complex::from(v) - ops.a_mk * Complex::from(u);
        let l_mk = ops.a_mk_dag * Complex::from(v) + ops.a_k * Complex::from(u);
        assert!((l_k * ss.matrix).norm() < 1e-10);
        assert!((l_mk * ss.matrix).norm() < 1e-10);

        // Even-block pseudo-spin of the dark state:
        // n = (-2uv, 0, u^2 - v^2) / (u^2 + v^2).
        let e = even_block(&ss.matrix);
        let nsq = u * u + v * v;
        assert_abs_diff_eq!((e[(0, 0)] - e[(1, 1)]).re, (u * u - v * v) / nsq, epsilon = 1e-10);
        assert_abs_diff_eq!(2.0 * e[(0, 1)].re, -2.0 * u * v / nsq, epsilon = 1e-10);
        assert_abs_diff_eq!(e[(0, 1)].im, 0.0, epsilon = 1e-10);

        // Degenerate request: u = v = 0.
        assert!(matches!(
            add_engineered_dissipation(
                build_hamiltonian_liouvillian(&zero_model(), 0.0),
                0.0,
                0.0,
                &ops
            ),
            Err(Error::NullLindblad { .. })
        ));
    }

    #[test]
    fn steady_state_rejects_unitary_generators() {
        let lv = build_hamiltonian_liouvillian(&TwoBandModel::tfim(2.0), 0.9);
        assert!(matches!(
            steady_state(&lv),
            Err(Error::DegenerateSteadyState { .. })
        ));
    }

    #[test]
    fn evolve_is_constant_for_zero_generator() {
        let rho0 = thermal_mode_state(&TwoBandModel::tfim(0.0), 1.0, 0.6).unwrap();
        let lv = build_hamiltonian_liouvillian(&zero_model(), 0.6);
        let grid = TimeGrid::new(1.0, 20);
        let traj = evolve_mode(&rho0, &lv, &grid, &TrajectoryOptions::default()).unwrap();
        for n in 0..=20 {
            assert!(max_norm(&(traj.densities[n] - rho0.matrix)) < 1e-14);
            assert!((trajectory_amplitude(&traj, n) - C64::from(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn evolve_keeps_stationary_populations() {
        // Thermal state of the generator's own Hamiltonian: populations and
        // amplitude stay put up to a phase of modulus one.
        let model = TwoBandModel::tfim(1.7);
        let rho0 = thermal_mode_state(&model, 0.8, 1.1).unwrap();
        let lv = build_hamiltonian_liouvillian(&model, 1.1);
        let grid = TimeGrid::new(2.0, 50);
        let traj = evolve_mode(&rho0, &lv, &grid, &TrajectoryOptions::default()).unwrap();
        let w0 = traj.frames[0].weights;
        for f in &traj.frames {
            for j in 0..4 {
                assert_abs_diff_eq!(f.weights[j], w0[j], epsilon = 1e-12);
            }
        }
        for n in 0..traj.times.len() {
            assert_abs_diff_eq!(trajectory_amplitude(&traj, n).norm(), 1.0, epsilon = 1e-10);
        }
        assert!(traj.max_reconstruction_defect() < 1e-10);
    }

    #[test]
    fn trajectory_amplitude_matches_closed_form() {
        // The central equivalence: spectral tracking reproduces the closed
        // form of the unitary mixed-state amplitude.
        let p = QuenchProtocol::unitary(TwoBandModel::tfim(0.0), TwoBandModel::tfim(2.0), 1.0);
        let k = 0.8;
        let rho0 = thermal_mode_state(&p.initial, p.beta, k).unwrap();
        let lv = build_liouvillian(&p, k).unwrap();
        let grid = TimeGrid::new(1.0, 8000);
        let traj = evolve_mode(&rho0, &lv, &grid, &TrajectoryOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for (n, &t) in traj.times.iter().enumerate() {
            let reference = closed_form_mode_gloa(&p, k, t).unwrap();
            worst = worst.max((trajectory_amplitude(&traj, n) - reference).norm());
        }
        assert!(worst < 1e-8, "worst deviation {worst:.3e}");
    }

    #[test]
    fn natural_dissipation_relaxes_to_rate_equation() {
        // H = 0, rates (0.3, 0.7): after t >> 1/(g+ + g-), the trajectory
        // sits on the analytic product steady state.
        let ops = ModeOperators::new();
        let (gp, gm) = (0.3, 0.7);
        let lv = add_natural_dissipation(
            build_hamiltonian_liouvillian(&zero_model(), 0.4),
            gp,
            gm,
            &ops,
        );
        let rho0 = thermal_mode_state(&TwoBandModel::tfim(0.0), 1.0, 0.4).unwrap();
        let grid = TimeGrid::new(20.0, 4000);
        let traj = evolve_mode(&rho0, &lv, &grid, &TrajectoryOptions::default()).unwrap();
        let nbar = gp / (gp + gm);
        let mut expect = M4::zeros();
        expect[(0, 0)] = C64::from((1.0 - nbar) * (1.0 - nbar));
        expect[(1, 1)] = C64::from(nbar * nbar);
        expect[(2, 2)] = C64::from(nbar * (1.0 - nbar));
        expect[(3, 3)] = C64::from(nbar * (1.0 - nbar));
        assert!(max_norm(&(traj.densities.last().unwrap() - expect)) < 1e-6);

        // And with a Hamiltonian switched on, the long-time state matches
        // the null-vector steady state instead.
        let lv = add_natural_dissipation(
            build_hamiltonian_liouvillian(&TwoBandModel::tfim(2.0), 0.4),
            gp,
            gm,
            &ops,
        );
        let traj = evolve_mode(&rho0, &lv, &grid, &TrajectoryOptions::default()).unwrap();
        let ss = steady_state(&lv).unwrap();
        assert!(max_norm(&(traj.densities.last().unwrap() - ss.matrix)) < 1e-8);
    }

    #[test]
    fn trajectories_preserve_trace_and_positivity() {
        let ops = ModeOperators::new();
        let lv = add_natural_dissipation(
            build_hamiltonian_liouvillian(&TwoBandModel::tfim(10.0), 1.2),
            1.0,
            10.0,
            &ops,
        );
        let rho0 = thermal_mode_state(&TwoBandModel::tfim(0.0), 1.0, 1.2).unwrap();
        let grid = TimeGrid::new(1.2, 2000);
        let traj = evolve_mode(&rho0, &lv, &grid, &TrajectoryOptions::default()).unwrap();
        for (n, rho) in traj.densities.iter().enumerate() {
            assert!((rho.trace() - C64::from(1.0)).norm() < 1e-9);
            let min_w = traj.frames[n].weights.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(min_w > -1e-9);
        }
        assert!(traj.max_reconstruction_defect() < 1e-10);
    }
}
