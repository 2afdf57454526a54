//! Two-band Hamiltonian families, quench protocols, and momentum grids.
//!
//! A translation-invariant two-band chain is described per momentum by a
//! Bloch vector `h_k`, with mode Hamiltonian `h_k . sigma` acting on the
//! even-occupation block of the `(k, -k)` pair space. Energies are in units
//! of the coupling (J = 1) and `hbar` = 1 throughout.

use nalgebra::Vector3;
use num_complex::Complex;

use crate::error::Error;
use crate::evolution::DissipationSpec;
use crate::linalg::M2;
use crate::Result;

/// Truncated trigonometric series `sum_n cos[n] cos(n k) + sum_m sin[m-1] sin(m k)`.
///
/// Used to express custom Bloch-vector components; every component built
/// this way is automatically 2*pi periodic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigSeries {
    /// Coefficients of cos(n k), starting at n = 0 (the constant term).
    pub cos: Vec<f64>,
    /// Coefficients of sin(m k), starting at m = 1.
    pub sin: Vec<f64>,
}

impl TrigSeries {
    pub fn constant(c: f64) -> Self {
        TrigSeries { cos: vec![c], sin: vec![] }
    }

    pub fn eval(&self, k: f64) -> f64 {
        let mut acc = 0.0;
        for (n, c) in self.cos.iter().enumerate() {
            acc += c * (n as f64 * k).cos();
        }
        for (m, s) in self.sin.iter().enumerate() {
            acc += s * ((m + 1) as f64 * k).sin();
        }
        acc
    }
}

/// Model family selector.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Transverse-field Ising chain in fermionic form:
    /// `h_k = (0, sin k, cos k - h)`.
    Tfim { field: f64 },
    /// Arbitrary trig-polynomial Bloch vector.
    Custom {
        hx: TrigSeries,
        hy: TrigSeries,
        hz: TrigSeries,
    },
}

/// A two-band model, i.e. a momentum-resolved Bloch vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBandModel {
    pub kind: ModelKind,
}

impl TwoBandModel {
    pub fn tfim(field: f64) -> Self {
        TwoBandModel { kind: ModelKind::Tfim { field } }
    }

    pub fn custom(hx: TrigSeries, hy: TrigSeries, hz: TrigSeries) -> Self {
        TwoBandModel { kind: ModelKind::Custom { hx, hy, hz } }
    }

    /// The Bloch vector `h_k`.
    pub fn bloch_vector(&self, k: f64) -> Vector3<f64> {
        match &self.kind {
            ModelKind::Tfim { field } => Vector3::new(0.0, k.sin(), k.cos() - field),
            ModelKind::Custom { hx, hy, hz } => {
                Vector3::new(hx.eval(k), hy.eval(k), hz.eval(k))
            }
        }
    }

    /// Band energy `epsilon_k = |h_k| >= 0`.
    pub fn band_energy(&self, k: f64) -> f64 {
        self.bloch_vector(k).norm()
    }

    /// Unit Bloch vector, or `DegenerateBand` where the gap closes.
    pub fn unit_bloch_vector(&self, k: f64) -> Result<Vector3<f64>> {
        let h = self.bloch_vector(k);
        let eps = h.norm();
        if eps <= 0.0 {
            return Err(Error::DegenerateBand { k });
        }
        Ok(h / eps)
    }

    /// The 2x2 mode Hamiltonian `h_k . sigma` on the even block.
    pub fn bloch_hamiltonian(&self, k: f64) -> M2 {
        bloch_matrix(&self.bloch_vector(k))
    }
}

/// `h . sigma` as an explicit 2x2 Hermitian matrix.
pub fn bloch_matrix(h: &Vector3<f64>) -> M2 {
    let (hx, hy, hz) = (h.x, h.y, h.z);
    M2::new(
        Complex::new(hz, 0.0),
        Complex::new(hx, -hy),
        Complex::new(hx, hy),
        Complex::new(-hz, 0.0),
    )
}

/// Squared overlaps between pre- and post-quench band eigenvectors:
/// `gsq = |<f-|i->|^2 = (1 + hi.hf)/2` and `esq = |<f+|i->|^2 = (1 - hi.hf)/2`.
pub fn overlap_coefficients(
    initial: &TwoBandModel,
    final_model: &TwoBandModel,
    k: f64,
) -> Result<(f64, f64)> {
    let hi = initial.unit_bloch_vector(k)?;
    let hf = final_model.unit_bloch_vector(k)?;
    let dot = hi.dot(&hf);
    Ok((0.5 * (1.0 + dot), 0.5 * (1.0 - dot)))
}

/// A sudden quench: thermal preparation under `initial`, evolution under
/// `final_model` (plus optional dissipation).
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchProtocol {
    pub initial: TwoBandModel,
    pub final_model: TwoBandModel,
    /// Inverse temperature of the prepared state; may be negative. Must be
    /// finite: the pure-state limit is approached with large |beta| (weights
    /// saturate to double precision 1 well before |beta * eps| = 40).
    pub beta: f64,
    pub dissipation: DissipationSpec,
}

impl QuenchProtocol {
    pub fn unitary(initial: TwoBandModel, final_model: TwoBandModel, beta: f64) -> Self {
        assert!(beta.is_finite(), "inverse temperature must be finite");
        QuenchProtocol { initial, final_model, beta, dissipation: DissipationSpec::None }
    }

    pub fn with_dissipation(mut self, dissipation: DissipationSpec) -> Self {
        self.dissipation = dissipation;
        self
    }

    pub fn is_unitary(&self) -> bool {
        matches!(self.dissipation, DissipationSpec::None)
    }

    pub fn overlap_coefficients(&self, k: f64) -> Result<(f64, f64)> {
        overlap_coefficients(&self.initial, &self.final_model, k)
    }
}

/// Momentum grid convention on the half Brillouin zone (0, pi).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridConvention {
    /// `k_m = (2m - 1) pi / L` for `m = 1..L/2`, `L = 2 * half_count`.
    /// The natural grid for even-parity sectors of a closed chain.
    Antiperiodic,
    /// `half_count` equispaced points strictly inside (0, pi):
    /// `k_m = m pi / (half_count + 1)`.
    UniformOpen,
}

/// Strictly increasing momenta in (0, pi). The endpoints k = 0 and k = pi
/// are never part of the grid: amplitudes there are pinned analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    half_count: usize,
    convention: GridConvention,
    points: Vec<f64>,
}

impl KGrid {
    pub fn half_count(&self) -> usize {
        self.half_count
    }

    /// Total degrees of freedom `L` (sites) represented by this grid.
    pub fn total_sites(&self) -> usize {
        2 * self.half_count
    }

    pub fn convention(&self) -> GridConvention {
        self.convention
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Uniform spacing between grid momenta.
    pub fn spacing(&self) -> f64 {
        match self.convention {
            GridConvention::Antiperiodic => std::f64::consts::PI / self.half_count as f64,
            GridConvention::UniformOpen => {
                std::f64::consts::PI / (self.half_count + 1) as f64
            }
        }
    }
}

/// Build a momentum grid for `half_count = L/2` pair modes.
pub fn make_k_grid(half_count: usize, convention: GridConvention) -> Result<KGrid> {
    if half_count < 2 {
        return Err(Error::InvalidGrid { half_count });
    }
    let pi = std::f64::consts::PI;
    let points = match convention {
        GridConvention::Antiperiodic => {
            let l = 2 * half_count;
            (1..=half_count)
                .map(|m| (2 * m - 1) as f64 * pi / l as f64)
                .collect()
        }
        GridConvention::UniformOpen => (1..=half_count)
            .map(|m| m as f64 * pi / (half_count + 1) as f64)
            .collect(),
    };
    Ok(KGrid { half_count, convention, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh2;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn tfim_bloch_vector_examples() {
        let m0 = TwoBandModel::tfim(0.0);
        assert_eq!(m0.bloch_vector(0.0), Vector3::new(0.0, 0.0, 1.0));

        let m10 = TwoBandModel::tfim(10.0);
        let h = m10.bloch_vector(PI);
        assert_abs_diff_eq!(h.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.z, -11.0, epsilon = 1e-12);

        let h = m10.bloch_vector(PI / 2.0);
        assert_abs_diff_eq!(h.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.z, -10.0, epsilon = 1e-12);
    }

    #[test]
    fn band_energy_examples() {
        let m0 = TwoBandModel::tfim(0.0);
        for k in [0.3, 1.1, 2.9] {
            assert_abs_diff_eq!(m0.band_energy(k), 1.0, epsilon = 1e-14);
        }
        let m10 = TwoBandModel::tfim(10.0);
        assert_abs_diff_eq!(m10.band_energy(0.0), 9.0, epsilon = 1e-12);
        let k = (0.1f64).acos();
        assert_abs_diff_eq!(m10.band_energy(k), 99f64.sqrt(), epsilon = 1e-12);
    }

    /// Brute-force band overlap: diagonalize both 2x2 Bloch Hamiltonians and
    /// take squared eigenvector overlaps. Independent of the dot-product
    /// formula under test.
    fn overlap_oracle(initial: &TwoBandModel, final_model: &TwoBandModel, k: f64) -> (f64, f64) {
        let (_, vi) = eigh2(&initial.bloch_hamiltonian(k));
        let (_, vf) = eigh2(&final_model.bloch_hamiltonian(k));
        // Column 1 is the lower band (descending eigenvalues).
        let i_lower = vi.column(1);
        let f_lower = vf.column(1);
        let f_upper = vf.column(0);
        let gsq = f_lower.dotc(&i_lower).norm_sqr();
        let esq = f_upper.dotc(&i_lower).norm_sqr();
        (gsq, esq)
    }

    #[test]
    fn overlap_coefficients_examples() {
        let mi = TwoBandModel::tfim(0.0);
        let mf = TwoBandModel::tfim(10.0);

        // k -> 0: anti-aligned Bloch vectors.
        let (gsq, esq) = overlap_coefficients(&mi, &mf, 1e-9).unwrap();
        assert_abs_diff_eq!(gsq, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(esq, 1.0, epsilon = 1e-9);

        let (gsq, esq) = overlap_coefficients(&mi, &mi, 1.234).unwrap();
        assert_abs_diff_eq!(gsq, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(esq, 0.0, epsilon = 1e-14);

        let (gsq, esq) = overlap_coefficients(&mi, &mf, PI / 2.0).unwrap();
        assert_abs_diff_eq!(gsq, 0.5 * (1.0 + 1.0 / 101f64.sqrt()), epsilon = 1e-14);
        assert_abs_diff_eq!(esq, 0.5 * (1.0 - 1.0 / 101f64.sqrt()), epsilon = 1e-14);
        let (gsq_o, esq_o) = overlap_oracle(&mi, &mf, PI / 2.0);
        assert_abs_diff_eq!(gsq, gsq_o, epsilon = 1e-12);
        assert_abs_diff_eq!(esq, esq_o, epsilon = 1e-12);
    }

    #[test]
    fn overlap_degenerate_band_is_an_error() {
        // h = 1 closes the gap at k = 0.
        let mi = TwoBandModel::tfim(1.0);
        let mf = TwoBandModel::tfim(2.0);
        assert!(matches!(
            overlap_coefficients(&mi, &mf, 0.0),
            Err(Error::DegenerateBand { .. })
        ));
    }

    #[test]
    fn k_grid_examples() {
        let g = make_k_grid(2, GridConvention::Antiperiodic).unwrap();
        assert_eq!(g.total_sites(), 4);
        assert_abs_diff_eq!(g.points()[0], PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.points()[1], 3.0 * PI / 4.0, epsilon = 1e-15);

        let g = make_k_grid(3, GridConvention::UniformOpen).unwrap();
        assert_eq!(g.points().len(), 3);
        assert_abs_diff_eq!(g.points()[0], PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.points()[1], PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.points()[2], 3.0 * PI / 4.0, epsilon = 1e-15);

        assert!(matches!(
            make_k_grid(1, GridConvention::Antiperiodic),
            Err(Error::InvalidGrid { .. })
        ));
    }

    #[test]
    fn tfim_unit_bloch_is_z_axis_at_bz_edges() {
        for h in [-3.0, -0.4, 0.0, 0.5, 2.0, 10.0] {
            let m = TwoBandModel::tfim(h);
            for k in [0.0, PI] {
                let u = m.unit_bloch_vector(k).unwrap();
                assert_abs_diff_eq!(u.x, 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(u.y, 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(u.z.abs(), 1.0, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn overlaps_sum_to_one(
            hi in -3.0f64..3.0,
            hf in -3.0f64..3.0,
            k in 1e-3f64..(PI - 1e-3),
        ) {
            let mi = TwoBandModel::tfim(hi);
            let mf = TwoBandModel::tfim(hf);
            if mi.band_energy(k) > 1e-9 && mf.band_energy(k) > 1e-9 {
                let (gsq, esq) = overlap_coefficients(&mi, &mf, k).unwrap();
                prop_assert!((gsq + esq - 1.0).abs() < 1e-14);
                prop_assert!(gsq >= -1e-15 && esq >= -1e-15);
            }
        }

        #[test]
        fn overlap_formula_matches_eigenvector_oracle(
            hi in -3.0f64..3.0,
            hf in -3.0f64..3.0,
        ) {
            let mi = TwoBandModel::tfim(hi);
            let mf = TwoBandModel::tfim(hf);
            for i in 0..100 {
                let k = (i as f64 + 0.5) * PI / 100.0;
                if mi.band_energy(k) > 1e-6 && mf.band_energy(k) > 1e-6 {
                    let (gsq, esq) = overlap_coefficients(&mi, &mf, k).unwrap();
                    let (gsq_o, esq_o) = overlap_oracle(&mi, &mf, k);
                    prop_assert!((gsq - gsq_o).abs() < 1e-12);
                    prop_assert!((esq - esq_o).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn grids_are_sorted_interior(half in 2usize..200) {
            for conv in [GridConvention::Antiperiodic, GridConvention::UniformOpen] {
                let g = make_k_grid(half, conv).unwrap();
                let pts = g.points();
                prop_assert_eq!(pts.len(), half);
                for w in pts.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                prop_assert!(pts[0] > 0.0);
                prop_assert!(*pts.last().unwrap() < PI);
            }
        }
    }
}
