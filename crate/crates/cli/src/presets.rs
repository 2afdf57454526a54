//! Built-in experiment presets.
//!
//! The catalogue mirrors the published figure protocols: `fig1a`/`fig1b`
//! (closed quench across the critical field at beta = +/-1), `fig2a`-`fig2d`
//! (the same quench with natural gain/loss at four rate pairs),
//! `fig3a`-`fig3d` (same rate pairs without crossing the transition,
//! h_i = h_f), and `fig4a`-`fig4c` (engineered dissipative quenches across
//! the steady-state topological transition). `identity` is the trivial
//! null-quench control.
//!
//! The engineered presets use this crate's built-in pairing-wave jump
//! operators `(u, v) = (sin k, kappa - cos k)` — a substitution: the
//! original benchmark operator families are not publicly specified, so
//! these presets reproduce the phenomenon (steady-state winding change with
//! a rate-function non-analyticity), not specific published curves.

use crate::config::{
    AnalysesConfig, DissipationConfig, DissipationKind, ExperimentConfig, Family, GridConfig,
    OutputConfig, ProtocolConfig,
};

/// A named, documented, ready-to-run configuration.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ExperimentConfig,
}

fn protocol_tfim(h_initial: f64, h_final: f64, beta: f64) -> ProtocolConfig {
    ProtocolConfig {
        family: Family::Tfim,
        beta: Some(beta),
        h_initial: Some(h_initial),
        h_final: Some(h_final),
        kappa_initial: None,
        kappa_final: None,
        initial_model: None,
        final_model: None,
    }
}

fn protocol_engineered(kappa_initial: f64, kappa_final: f64) -> ProtocolConfig {
    ProtocolConfig {
        family: Family::Engineered,
        beta: None,
        h_initial: None,
        h_final: None,
        kappa_initial: Some(kappa_initial),
        kappa_final: Some(kappa_final),
        initial_model: None,
        final_model: None,
    }
}

fn natural(gamma_plus: f64, gamma_minus: f64) -> DissipationConfig {
    DissipationConfig {
        kind: DissipationKind::Natural,
        gamma_plus: Some(gamma_plus),
        gamma_minus: Some(gamma_minus),
    }
}

fn engineered_dissipation() -> DissipationConfig {
    DissipationConfig {
        kind: DissipationKind::Engineered,
        gamma_plus: None,
        gamma_minus: None,
    }
}

fn analyses(rate: bool, dtop: bool, winding: bool, baselines: bool) -> AnalysesConfig {
    AnalysesConfig {
        rate,
        dtop,
        winding,
        baselines,
    }
}

fn output(refinement_levels: u32) -> OutputConfig {
    OutputConfig {
        directory: "out".to_string(),
        refinement_levels,
    }
}

fn fig1(name: &'static str, beta: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        protocol: protocol_tfim(0.0, 10.0, beta),
        dissipation: DissipationConfig::default(),
        grid: GridConfig {
            half_count: 1000,
            t_max: 1.2,
            steps: 4000,
        },
        analyses: analyses(true, true, false, false),
        output: output(2),
    }
}

fn fig2(name: &'static str, gamma_plus: f64, gamma_minus: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        protocol: protocol_tfim(0.0, 10.0, 1.0),
        dissipation: natural(gamma_plus, gamma_minus),
        grid: GridConfig {
            half_count: 200,
            t_max: 0.6,
            steps: 1200,
        },
        analyses: analyses(true, false, false, false),
        output: output(2),
    }
}

fn fig3(name: &'static str, gamma_plus: f64, gamma_minus: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        protocol: protocol_tfim(10.0, 10.0, 1.0),
        dissipation: natural(gamma_plus, gamma_minus),
        grid: GridConfig {
            half_count: 200,
            t_max: 0.6,
            steps: 1200,
        },
        analyses: analyses(true, false, false, false),
        output: output(2),
    }
}

fn fig4(
    name: &'static str,
    kappa_initial: f64,
    kappa_final: f64,
    half_count: usize,
    t_max: f64,
    steps: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        protocol: protocol_engineered(kappa_initial, kappa_final),
        dissipation: engineered_dissipation(),
        grid: GridConfig {
            half_count,
            t_max,
            steps,
        },
        analyses: analyses(true, true, true, false),
        output: output(2),
    }
}

/// The full preset catalogue, in listing order.
pub fn catalogue() -> Vec<Preset> {
    vec![
        Preset {
            name: "identity",
            description: "null quench h: 10 -> 10 at beta = 1; g(t) = 0 to numerical precision",
            config: ExperimentConfig {
                name: "identity".to_string(),
                protocol: protocol_tfim(10.0, 10.0, 1.0),
                dissipation: DissipationConfig::default(),
                grid: GridConfig {
                    half_count: 200,
                    t_max: 1.0,
                    steps: 1200,
                },
                analyses: analyses(true, false, false, false),
                output: output(1),
            },
        },
        Preset {
            name: "fig1a",
            description: "closed quench h: 0 -> 10 at beta = 1; rate-function cusps and DTOP staircase",
            config: fig1("fig1a", 1.0),
        },
        Preset {
            name: "fig1b",
            description: "closed quench h: 0 -> 10 at beta = -1; DTOP jumps flip sign",
            config: fig1("fig1b", -1.0),
        },
        Preset {
            name: "fig2a",
            description: "quench h: 0 -> 10 with weak loss (gamma+ = 0.1, gamma- = 1); cusps survive, shifted",
            config: fig2("fig2a", 0.1, 1.0),
        },
        Preset {
            name: "fig2b",
            description: "quench h: 0 -> 10 with weak gain (gamma+ = 1, gamma- = 0.1)",
            config: fig2("fig2b", 1.0, 0.1),
        },
        Preset {
            name: "fig2c",
            description: "quench h: 0 -> 10 with strong loss (gamma+ = 1, gamma- = 10); cusps soften to dg/dt kinks",
            config: fig2("fig2c", 1.0, 10.0),
        },
        Preset {
            name: "fig2d",
            description: "quench h: 0 -> 10 with strong gain (gamma+ = 10, gamma- = 1)",
            config: fig2("fig2d", 10.0, 1.0),
        },
        Preset {
            name: "fig3a",
            description: "same-phase protocol h: 10 -> 10 with gamma+ = 0.1, gamma- = 1; dissipation-only dynamics",
            config: fig3("fig3a", 0.1, 1.0),
        },
        Preset {
            name: "fig3b",
            description: "same-phase protocol h: 10 -> 10 with gamma+ = 1, gamma- = 0.1",
            config: fig3("fig3b", 1.0, 0.1),
        },
        Preset {
            name: "fig3c",
            description: "same-phase protocol h: 10 -> 10 with gamma+ = 1, gamma- = 10",
            config: fig3("fig3c", 1.0, 10.0),
        },
        Preset {
            name: "fig3d",
            description: "same-phase protocol h: 10 -> 10 with gamma+ = 10, gamma- = 1",
            config: fig3("fig3d", 10.0, 1.0),
        },
        Preset {
            name: "fig4a",
            description: "engineered quench kappa: 0 -> 10 (built-in (u, v) = (sin k, kappa - cos k) family, \
                          substituted for the unpublished benchmark operators); winding 2 -> 0 at a confirmed rate non-analyticity",
            config: fig4("fig4a", 0.0, 10.0, 200, 0.25, 4000),
        },
        Preset {
            name: "fig4b",
            description: "engineered quench kappa: 0.5 -> 10 (built-in (u, v) family, substituted); \
                          winding 2 -> 0, finite-grid non-analyticity candidates stay sub-threshold",
            config: fig4("fig4b", 0.5, 10.0, 300, 0.25, 4000),
        },
        Preset {
            name: "fig4c",
            description: "engineered quench kappa: 0 -> 2 (built-in (u, v) family, substituted); slower crossing",
            config: fig4("fig4c", 0.0, 2.0, 200, 2.0, 2000),
        },
    ]
}

/// Look up one preset by name.
pub fn preset(name: &str) -> Option<Preset> {
    catalogue().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_round_trips_through_validation() {
        for p in catalogue() {
            p.config.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(p.config.name, p.name);
            let text = p.config.to_canonical_toml();
            let reparsed = ExperimentConfig::from_toml_str(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(p.config, reparsed, "{}", p.name);
        }
    }

    #[test]
    fn catalogue_covers_the_published_protocols() {
        let names: Vec<&str> = catalogue().iter().map(|p| p.name).collect();
        for required in [
            "identity", "fig1a", "fig1b", "fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b",
            "fig3c", "fig3d", "fig4a", "fig4b", "fig4c",
        ] {
            assert!(names.contains(&required), "missing {required}");
        }
        // fig3: four same-phase presets.
        let fig3: Vec<_> = catalogue()
            .into_iter()
            .filter(|p| p.name.starts_with("fig3"))
            .collect();
        assert_eq!(fig3.len(), 4);
        for p in &fig3 {
            assert_eq!(p.config.protocol.h_initial, Some(10.0));
            assert_eq!(p.config.protocol.h_final, Some(10.0));
        }
        // fig2: the four published rate pairs.
        let pairs: Vec<(f64, f64)> = catalogue()
            .into_iter()
            .filter(|p| p.name.starts_with("fig2"))
            .map(|p| {
                (
                    p.config.dissipation.gamma_plus.unwrap(),
                    p.config.dissipation.gamma_minus.unwrap(),
                )
            })
            .collect();
        assert_eq!(pairs, vec![(0.1, 1.0), (1.0, 0.1), (1.0, 10.0), (10.0, 1.0)]);
    }

    #[test]
    fn engineered_presets_document_the_substitution() {
        for p in catalogue().into_iter().filter(|p| p.name.starts_with("fig4")) {
            assert!(
                p.description.contains("substituted"),
                "{} must state the operator-family substitution",
                p.name
            );
        }
    }

    #[test]
    fn unknown_preset_is_none() {
        assert!(preset("fig9z").is_none());
        assert_eq!(preset("fig1a").unwrap().name, "fig1a");
    }
}
