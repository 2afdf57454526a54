//! Experiment configuration: schema, parsing, validation, canonical form.
//!
//! Configs are TOML with four sections (`[protocol]`, `[dissipation]`,
//! `[grid]`, `[analyses]`, `[output]`) under a top-level `name`. Unknown
//! keys are rejected. Every numeric field is validated before any
//! computation starts, including a time-resolution rule: the step must
//! satisfy `dt <= min(0.01 / eps_max, 0.01 / gamma_max)` so that the
//! parallel-transport discretization stays well inside its accuracy budget.
//!
//! The canonical form (validated config re-serialized to TOML) backs the
//! config hash recorded in every output file: identical physics, identical
//! bytes.

use gloa_core::evolution::{DissipationSpec, EngineeredFamily};
use gloa_core::model::{
    make_k_grid, GridConvention, KGrid, QuenchProtocol, TrigSeries, TwoBandModel,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration or invocation problem; maps to exit code 2.
#[derive(Debug, thiserror::Error, PartialEq)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Hamiltonian family of a quench protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Transverse-field Ising chain after Jordan-Wigner; parametrized by
    /// the initial and final fields.
    Tfim,
    /// Zero Hamiltonian with the built-in `(u, v) = (sin k, kappa - cos k)`
    /// pairing-wave jump operators; parametrized by initial and final kappa.
    Engineered,
    /// Explicit trigonometric series for all three Bloch components of the
    /// initial and final Hamiltonians.
    Custom,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Tfim => write!(f, "tfim"),
            Family::Engineered => write!(f, "engineered"),
            Family::Custom => write!(f, "custom"),
        }
    }
}

/// Trigonometric series for one custom model: `h(k) = sum_n cos_coeffs[n]
/// cos(n k) + sum_m sin_coeffs[m-1] sin(m k)` per component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModelConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hx_cos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hx_sin: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hy_cos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hy_sin: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hz_cos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hz_sin: Vec<f64>,
}

impl CustomModelConfig {
    fn to_model(&self) -> TwoBandModel {
        let series = |cos: &[f64], sin: &[f64]| TrigSeries {
            cos: cos.to_vec(),
            sin: sin.to_vec(),
        };
        TwoBandModel::custom(
            series(&self.hx_cos, &self.hx_sin),
            series(&self.hy_cos, &self.hy_sin),
            series(&self.hz_cos, &self.hz_sin),
        )
    }

    fn validate(&self, label: &str) -> Result<(), ConfigError> {
        let arrays = [
            ("hx_cos", &self.hx_cos),
            ("hx_sin", &self.hx_sin),
            ("hy_cos", &self.hy_cos),
            ("hy_sin", &self.hy_sin),
            ("hz_cos", &self.hz_cos),
            ("hz_sin", &self.hz_sin),
        ];
        for (field, coeffs) in arrays {
            if coeffs.len() > 16 {
                return err(format!("protocol.{label}.{field}: at most 16 harmonics"));
            }
            for (i, c) in coeffs.iter().enumerate() {
                if !c.is_finite() {
                    return err(format!("protocol.{label}.{field}[{i}] must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Quench protocol section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub family: Family,
    /// Inverse temperature of the thermal preparation (tfim/custom only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_model: Option<CustomModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_model: Option<CustomModelConfig>,
}

/// Dissipation channel kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationKind {
    #[default]
    None,
    /// Particle leakage at `gamma_minus` and injection at `gamma_plus` on
    /// both modes of each pair.
    Natural,
    /// The built-in pairing-wave jump operators of the engineered family.
    Engineered,
}

/// Dissipation section; the default is a closed (unitary) run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationConfig {
    #[serde(default)]
    pub kind: DissipationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_minus: Option<f64>,
}

/// Momentum and time grid section. `half_count` momenta on the open
/// half-zone (antiperiodic convention) represent a chain of
/// `L = 2 * half_count` sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_count: usize,
    pub t_max: f64,
    pub steps: usize,
}

/// Which analyses to run and emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysesConfig {
    /// Rate function g(t) with derivative and cusp candidates.
    pub rate: bool,
    /// Dynamical topological order parameter nu_D(t).
    pub dtop: bool,
    /// Pseudo-spin winding number nu(t) (chiral-symmetric runs only).
    pub winding: bool,
    /// Fidelity (and, for closed runs, interferometric) rate functions.
    pub baselines: bool,
}

impl Default for AnalysesConfig {
    fn default() -> Self {
        AnalysesConfig {
            rate: true,
            dtop: false,
            winding: false,
            baselines: false,
        }
    }
}

/// Output section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory the CSV files and the manifest are written into.
    pub directory: String,
    /// Total grid levels to run; levels >= 2 add the refinement study
    /// (each level doubles the time steps).
    pub refinement_levels: u32,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".to_string(),
            refinement_levels: 1,
        }
    }
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run name; used as the output file stem.
    pub name: String,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub dissipation: DissipationConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub analyses: AnalysesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Parse and fully validate a TOML config.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical TOML form (fixed section and key order, shortest
    /// round-trip floats). Identical configs have identical canonical
    /// bytes; the config hash is the SHA-256 of this string.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    /// Hex SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_toml().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(out, "{byte:02x}").unwrap();
        }
        out
    }

    /// Check every field; error messages name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_name()?;
        self.validate_protocol()?;
        self.validate_dissipation()?;
        self.validate_grid()?;
        self.validate_analyses()?;
        self.validate_output()?;
        self.validate_resolution()?;
        Ok(())
    }

    fn validate_name(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || self.name.len() > 64 {
            return err("name: must be 1..=64 characters");
        }
        if !self
            .name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
        {
            return err("name: only [a-z0-9_-] (used as the output file stem)");
        }
        Ok(())
    }

    fn validate_protocol(&self) -> Result<(), ConfigError> {
        let p = &self.protocol;
        let finite = |field: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                err(format!("protocol.{field} must be finite"))
            }
        };
        let require = |field: &str, v: Option<f64>| -> Result<f64, ConfigError> {
            v.ok_or_else(|| {
                ConfigError(format!("protocol.{field} is required for family {}", p.family))
            })
        };
        let forbid = |field: &str, absent: bool| -> Result<(), ConfigError> {
            if absent {
                Ok(())
            } else {
                err(format!("protocol.{field} does not apply to family {}", p.family))
            }
        };
        match p.family {
            Family::Tfim => {
                finite("h_initial", require("h_initial", p.h_initial)?)?;
                finite("h_final", require("h_final", p.h_final)?)?;
                finite("beta", require("beta", p.beta)?)?;
                forbid("kappa_initial", p.kappa_initial.is_none())?;
                forbid("kappa_final", p.kappa_final.is_none())?;
                forbid("initial_model", p.initial_model.is_none())?;
                forbid("final_model", p.final_model.is_none())?;
            }
            Family::Engineered => {
                let ki = require("kappa_initial", p.kappa_initial)?;
                let kf = require("kappa_final", p.kappa_final)?;
                finite("kappa_initial", ki)?;
                finite("kappa_final", kf)?;
                if ki < 0.0 || kf < 0.0 {
                    return err("protocol.kappa_*: must be >= 0");
                }
                forbid("beta", p.beta.is_none())?;
                forbid("h_initial", p.h_initial.is_none())?;
                forbid("h_final", p.h_final.is_none())?;
                forbid("initial_model", p.initial_model.is_none())?;
                forbid("final_model", p.final_model.is_none())?;
            }
            Family::Custom => {
                finite("beta", require("beta", p.beta)?)?;
                forbid("h_initial", p.h_initial.is_none())?;
                forbid("h_final", p.h_final.is_none())?;
                forbid("kappa_initial", p.kappa_initial.is_none())?;
                forbid("kappa_final", p.kappa_final.is_none())?;
                match (&p.initial_model, &p.final_model) {
                    (Some(i), Some(f)) => {
                        i.validate("initial_model")?;
                        f.validate("final_model")?;
                    }
                    _ => {
                        return err(
                            "protocol.initial_model and protocol.final_model are required \
                             for family custom",
                        )
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_dissipation(&self) -> Result<(), ConfigError> {
        let d = &self.dissipation;
        match d.kind {
            DissipationKind::None => {
                if d.gamma_plus.is_some() || d.gamma_minus.is_some() {
                    return err("dissipation.gamma_*: only apply to kind = \"natural\"");
                }
                if self.protocol.family == Family::Engineered {
                    return err(
                        "dissipation.kind: family engineered requires kind = \"engineered\"",
                    );
                }
            }
            DissipationKind::Natural => {
                if self.protocol.family == Family::Engineered {
                    return err("dissipation.kind: natural does not combine with family engineered");
                }
                let gp = d
                    .gamma_plus
                    .ok_or_else(|| ConfigError("dissipation.gamma_plus is required".into()))?;
                let gm = d
                    .gamma_minus
                    .ok_or_else(|| ConfigError("dissipation.gamma_minus is required".into()))?;
                if !gp.is_finite() || !gm.is_finite() || gp < 0.0 || gm < 0.0 {
                    return err("dissipation.gamma_*: must be finite and >= 0");
                }
                if gp + gm == 0.0 {
                    return err("dissipation.gamma_*: at least one rate must be positive");
                }
            }
            DissipationKind::Engineered => {
                if self.protocol.family != Family::Engineered {
                    return err("dissipation.kind: engineered requires family engineered");
                }
                if d.gamma_plus.is_some() || d.gamma_minus.is_some() {
                    return err("dissipation.gamma_*: only apply to kind = \"natural\"");
                }
            }
        }
        Ok(())
    }

    fn validate_grid(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.half_count < 2 || g.half_count > 1_000_000 {
            return err("grid.half_count: must be in 2..=1000000");
        }
        if !g.t_max.is_finite() || g.t_max <= 0.0 || g.t_max > 1e3 {
            return err("grid.t_max: must be in (0, 1000]");
        }
        if g.steps < 8 || g.steps > 10_000_000 {
            return err("grid.steps: must be in 8..=10000000");
        }
        Ok(())
    }

    fn validate_analyses(&self) -> Result<(), ConfigError> {
        let a = &self.analyses;
        if !(a.rate || a.dtop || a.winding || a.baselines) {
            return err("analyses: enable at least one of rate, dtop, winding, baselines");
        }
        Ok(())
    }

    fn validate_output(&self) -> Result<(), ConfigError> {
        if self.output.directory.is_empty() {
            return err("output.directory: must be non-empty");
        }
        if !(1..=6).contains(&self.output.refinement_levels) {
            return err("output.refinement_levels: must be in 1..=6");
        }
        Ok(())
    }

    /// Time-resolution rule: `dt <= min(0.01 / eps_max, 0.01 / gamma_max)`,
    /// the scales measured on the actual momentum grid.
    fn validate_resolution(&self) -> Result<(), ConfigError> {
        let kgrid = self.k_grid()?;
        let protocol = self.protocol()?;
        let mut scale: f64 = 0.0;
        for &k in kgrid.points() {
            scale = scale.max(protocol.final_model.band_energy(k));
        }
        match &protocol.dissipation {
            DissipationSpec::None => {}
            DissipationSpec::Natural {
                gamma_plus,
                gamma_minus,
            } => scale = scale.max(gamma_plus.max(*gamma_minus)),
            DissipationSpec::Engineered(family) => {
                for &k in kgrid.points() {
                    let (u, v) = (family.u(k), family.v(k, family.kappa_final));
                    scale = scale.max(u * u + v * v);
                }
            }
        }
        let dt = self.grid.t_max / self.grid.steps as f64;
        if scale > 0.0 && dt > 0.01 / scale {
            let needed = (self.grid.t_max * scale / 0.01).ceil() as usize;
            return err(format!(
                "grid.steps: dt = {dt:.3e} exceeds the resolution rule dt <= 0.01 / {scale:.3} \
                 (need at least {needed} steps)"
            ));
        }
        Ok(())
    }

    /// The momentum grid of this run.
    pub fn k_grid(&self) -> Result<KGrid, ConfigError> {
        make_k_grid(self.grid.half_count, GridConvention::Antiperiodic)
            .map_err(|e| ConfigError(format!("grid.half_count: {e}")))
    }

    /// Build the quench protocol this config describes. Engineered runs use
    /// a zero Hamiltonian: all dynamics comes from the jump operators.
    pub fn protocol(&self) -> Result<QuenchProtocol, ConfigError> {
        self.validate_protocol()?;
        self.validate_dissipation()?;
        let p = &self.protocol;
        let base = match p.family {
            Family::Tfim => QuenchProtocol::unitary(
                TwoBandModel::tfim(p.h_initial.unwrap()),
                TwoBandModel::tfim(p.h_final.unwrap()),
                p.beta.unwrap(),
            ),
            Family::Engineered => {
                let zero = TwoBandModel::custom(
                    TrigSeries::default(),
                    TrigSeries::default(),
                    TrigSeries::default(),
                );
                QuenchProtocol::unitary(zero.clone(), zero, 1.0)
            }
            Family::Custom => QuenchProtocol::unitary(
                p.initial_model.as_ref().unwrap().to_model(),
                p.final_model.as_ref().unwrap().to_model(),
                p.beta.unwrap(),
            ),
        };
        let dissipation = match self.dissipation.kind {
            DissipationKind::None => DissipationSpec::None,
            DissipationKind::Natural => DissipationSpec::natural(
                self.dissipation.gamma_plus.unwrap(),
                self.dissipation.gamma_minus.unwrap(),
            ),
            DissipationKind::Engineered => DissipationSpec::Engineered(EngineeredFamily::p_wave(
                p.kappa_initial.unwrap(),
                p.kappa_final.unwrap(),
            )),
        };
        Ok(base.with_dissipation(dissipation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1a_text() -> &'static str {
        r#"
name = "fig1a"

[protocol]
family = "tfim"
beta = 1.0
h_initial = 0.0
h_final = 10.0

[grid]
half_count = 1000
t_max = 1.2
steps = 4000

[analyses]
rate = true
dtop = true
"#
    }

    #[test]
    fn parses_and_validates_a_complete_config() {
        let config = ExperimentConfig::from_toml_str(fig1a_text()).unwrap();
        assert_eq!(config.name, "fig1a");
        assert_eq!(config.protocol.family, Family::Tfim);
        assert!(config.analyses.dtop);
        assert!(!config.analyses.winding);
        assert_eq!(config.output.refinement_levels, 1);
        let protocol = config.protocol().unwrap();
        assert!(protocol.is_unitary());
        assert_eq!(protocol.beta, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = fig1a_text().replace("[grid]", "wat = 3\n\n[grid]");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(e.0.contains("wat"), "message should name the key: {e}");
        let text = fig1a_text().replace("[analyses]", "[analyses]\nplot = true\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let config = ExperimentConfig::from_toml_str(fig1a_text()).unwrap();
        let canonical = config.to_canonical_toml();
        let reparsed = ExperimentConfig::from_toml_str(&canonical).unwrap();
        assert_eq!(config, reparsed);
        assert_eq!(canonical, reparsed.to_canonical_toml());
        assert_eq!(config.hash(), reparsed.hash());
        assert_eq!(config.hash().len(), 64);
    }

    #[test]
    fn hash_tracks_semantic_changes() {
        let a = ExperimentConfig::from_toml_str(fig1a_text()).unwrap();
        let text = fig1a_text().replace("beta = 1.0", "beta = -1.0");
        let b = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_ne!(a.hash(), b.hash());
        // Formatting-only differences canonicalize away.
        let text = fig1a_text().replace("beta = 1.0", "beta   =    1.0");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn family_field_mismatches_are_named() {
        let text = fig1a_text().replace("h_final = 10.0", "h_final = 10.0\nkappa_final = 1.0");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(e.0.contains("kappa_final"), "{e}");

        let text = fig1a_text().replace("h_final = 10.0", "");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(e.0.contains("h_final"), "{e}");
    }

    #[test]
    fn natural_dissipation_requires_both_rates() {
        let text = fig1a_text().replace(
            "[grid]",
            "[dissipation]\nkind = \"natural\"\ngamma_plus = 0.1\n\n[grid]",
        );
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(e.0.contains("gamma_minus"), "{e}");
    }

    #[test]
    fn engineered_family_and_kind_must_pair() {
        let text = r#"
name = "eng"

[protocol]
family = "engineered"
kappa_initial = 0.0
kappa_final = 10.0

[dissipation]
kind = "engineered"

[grid]
half_count = 100
t_max = 0.25
steps = 4000
"#;
        let config = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(!config.protocol().unwrap().is_unitary());
        // Omitting the dissipation section leaves the run closed, which the
        // engineered family rejects.
        let closed = text.replace("[dissipation]\nkind = \"engineered\"\n", "");
        assert!(ExperimentConfig::from_toml_str(&closed).is_err());
    }

    #[test]
    fn resolution_rule_rejects_coarse_grids() {
        // eps_max = 11 for h_final = 10 demands dt <= 9.09e-4; 100 steps
        // over t_max = 1.2 gives dt = 0.012.
        let text = fig1a_text().replace("steps = 4000", "steps = 100");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(e.0.contains("resolution"), "{e}");
        // The same step count is fine on a proportionally shorter window.
        let text = fig1a_text()
            .replace("steps = 4000", "steps = 100")
            .replace("t_max = 1.2", "t_max = 0.05");
        ExperimentConfig::from_toml_str(&text).unwrap();
    }

    #[test]
    fn analyses_must_not_be_empty() {
        let text = fig1a_text().replace(
            "[analyses]\nrate = true\ndtop = true",
            "[analyses]\nrate = false",
        );
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(e.0.contains("analyses"), "{e}");
    }

    #[test]
    fn custom_family_builds_the_stated_model() {
        let text = r#"
name = "custom-run"

[protocol]
family = "custom"
beta = 0.7

[protocol.initial_model]
hz_cos = [0.5]

[protocol.final_model]
hy_sin = [1.0]
hz_cos = [-0.2, 1.0]

[grid]
half_count = 50
t_max = 1.0
steps = 2000
"#;
        let config = ExperimentConfig::from_toml_str(text).unwrap();
        let protocol = config.protocol().unwrap();
        let h = protocol.final_model.bloch_vector(std::f64::consts::FRAC_PI_2);
        assert!((h.y - 1.0).abs() < 1e-15);
        assert!((h.z - (-0.2)).abs() < 1e-12);
    }
}
