//! Experiment orchestration: state preparation, evolution, analyses, and
//! deterministic output assembly.
//!
//! A run sweeps the positive-momentum grid mode by mode (ascending k,
//! sequentially — determinism is part of the output contract), streams each
//! mode's amplitude series and any per-mode extras the enabled analyses
//! need, then assembles the rate function, DTOP staircase, winding series,
//! and baseline rate functions on the shared time grid. Closed runs with no
//! density-dependent analyses take the exact closed-form amplitude path;
//! everything else propagates trajectories with spectral tracking.
//!
//! With `refinement_levels >= 2` the run repeats on doubled time grids
//! (rate only) and records which cusp candidates sharpen — the detector
//! that separates genuine non-analyticities from smooth maxima.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Family};
use crate::refine::{refinement_study, ConvergenceReport};
use crate::table::{format_float, ResultTable};
use crate::CliError;
use gloa_core::evolution::{
    add_engineered_dissipation, build_hamiltonian_liouvillian, build_liouvillian, evolve_mode,
    propagate_to, steady_state, DissipationSpec, TimeGrid,
};
use gloa_core::fockspace::{thermal_mode_state, ModeDensityMatrix, ModeOperators, TrajectoryOptions};
use gloa_core::gloa::{
    closed_form_amplitude_series, fidelity_amplitude, interferometric_mode_amplitude,
    mode_gloa_from_trajectory, rate_series_from_log_sum, rate_series_from_magnitudes,
    AmplitudeSeries, RateSeries, LOG_SINGULARITY_TOL,
};
use gloa_core::linalg::Vector3;
use gloa_core::model::{KGrid, QuenchProtocol};
use gloa_core::topology::{
    critical_times, dtop_series, localize_spin_minimum, mode_pseudo_spin,
    pseudo_spin_field_from_vectors, winding_number, SPIN_FLOOR,
};
use gloa_core::Error;

/// Phase-unwrap tolerance for DTOP profiles: jumps above `pi (1 - margin)`
/// away from exempted momenta are treated as undersampling.
pub const UNWRAP_MARGIN: f64 = 0.05;

/// Numerical health measured along every trajectory of a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HealthReport {
    /// max over modes and steps of `|tr rho - 1|`.
    pub max_trace_deviation: f64,
    /// min over modes and steps of the smallest spectral weight.
    pub min_eigenvalue: f64,
    /// max over modes of the frame-vs-density reconstruction defect.
    pub max_reconstruction_defect: f64,
}

/// All per-mode data of one grid level.
pub struct LevelData {
    pub grid: TimeGrid,
    pub per_mode: Vec<AmplitudeSeries>,
    pub rate: RateSeries,
    /// Pseudo-spin vector per mode per time (winding analysis).
    pub spins: Option<Vec<Vec<Vector3<f64>>>>,
    /// Fidelity magnitude per mode per time (baselines analysis).
    pub fidelity: Option<Vec<Vec<f64>>>,
    /// Interferometric magnitude per mode per time (closed baselines).
    pub interferometric: Option<Vec<Vec<f64>>>,
    /// Present when the trajectory path ran.
    pub health: Option<HealthReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub analysis: String,
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalModeSummary {
    pub k_c: f64,
    pub energy: f64,
    /// Critical times inside the run window.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpinMinimum {
    pub k: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingChange {
    pub t_before: f64,
    pub t_after: f64,
    pub nu_before: i32,
    pub nu_after: i32,
    /// Meshless localization of the pseudo-spin zero behind the change.
    pub spin_minimum: SpinMinimum,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingSummary {
    pub chiral_axis: [f64; 3],
    /// Worst in-plane deviation over the run (singular-value units).
    pub max_sigma_min: f64,
    pub initial_nu: i32,
    pub final_nu: i32,
    pub changes: Vec<WindingChange>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DtopSummary {
    pub initial_nu_d: f64,
    pub final_nu_d: f64,
    /// `(time, change)` read off the rounded staircase.
    pub jumps: Vec<(f64, f64)>,
}

/// The run manifest: everything needed to consume the CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub name: String,
    pub config_hash: String,
    pub family: String,
    pub half_count: usize,
    pub total_sites: usize,
    pub t_max: f64,
    pub steps: usize,
    pub dt: f64,
    pub analyses: Vec<String>,
    pub files: Vec<FileEntry>,
    pub critical_modes: Vec<CriticalModeSummary>,
    /// `(time, score)` second-difference outliers of the base-level rate.
    pub cusp_candidates: Vec<(f64, f64)>,
    pub log_singularity_count: usize,
    pub health: Option<HealthReport>,
    pub winding: Option<WindingSummary>,
    pub dtop: Option<DtopSummary>,
    pub refinement: Option<ConvergenceReport>,
}

/// A completed run, ready to write.
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub tables: Vec<ResultTable>,
    pub manifest: Manifest,
}

/// Prepared state of one mode: thermal for closed/natural runs, the
/// initial-operator steady state for engineered runs.
pub fn initial_state(protocol: &QuenchProtocol, k: f64) -> gloa_core::Result<ModeDensityMatrix> {
    match &protocol.dissipation {
        DissipationSpec::Engineered(family) => {
            let lv = build_hamiltonian_liouvillian(&protocol.initial, k);
            let lv = add_engineered_dissipation(
                lv,
                family.u(k),
                family.v(k, family.kappa_initial),
                &ModeOperators::new(),
            )?;
            steady_state(&lv)
        }
        _ => thermal_mode_state(&protocol.initial, protocol.beta, k),
    }
}

struct Needs {
    spins: bool,
    fidelity: bool,
    interferometric: bool,
}

impl Needs {
    fn trajectory(&self, protocol: &QuenchProtocol) -> bool {
        !protocol.is_unitary() || self.spins || self.fidelity
    }
}

/// Compute one full grid level.
fn compute_level(
    protocol: &QuenchProtocol,
    kgrid: &KGrid,
    grid: TimeGrid,
    needs: &Needs,
) -> Result<LevelData, CliError> {
    let times = grid.times();
    let n_times = times.len();
    let trajectory_path = needs.trajectory(protocol);
    let opts = TrajectoryOptions::default();

    let mut per_mode = Vec::with_capacity(kgrid.half_count());
    let mut spins = needs.spins.then(Vec::new);
    let mut fidelity = needs.fidelity.then(Vec::new);
    let mut interferometric = needs.interferometric.then(Vec::new);
    let mut health = trajectory_path.then_some(HealthReport {
        max_trace_deviation: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_reconstruction_defect: 0.0,
    });

    for &k in kgrid.points() {
        if trajectory_path {
            let lv = build_liouvillian(protocol, k)?;
            let rho0 = initial_state(protocol, k)?;
            let traj = evolve_mode(&rho0, &lv, &grid, &opts)?;
            per_mode.push(mode_gloa_from_trajectory(&traj));
            if let Some(h) = health.as_mut() {
                for rho in &traj.densities {
                    let defect = (rho.trace() - gloa_core::linalg::C64::from(1.0)).norm();
                    h.max_trace_deviation = h.max_trace_deviation.max(defect);
                }
                for frame in &traj.frames {
                    let w_min = frame.weights.iter().copied().fold(f64::INFINITY, f64::min);
                    h.min_eigenvalue = h.min_eigenvalue.min(w_min);
                }
                h.max_reconstruction_defect = h
                    .max_reconstruction_defect
                    .max(traj.max_reconstruction_defect());
            }
            if let Some(s) = spins.as_mut() {
                s.push(traj.densities.iter().map(mode_pseudo_spin).collect::<Vec<_>>());
            }
            if let Some(f) = fidelity.as_mut() {
                let rho0 = traj.densities[0];
                f.push(
                    traj.densities
                        .iter()
                        .map(|rho| fidelity_amplitude(&rho0, rho))
                        .collect::<Vec<_>>(),
                );
            }
        } else {
            per_mode.push(closed_form_amplitude_series(protocol, k, &grid)?);
        }
        if let Some(i) = interferometric.as_mut() {
            let mut mags = Vec::with_capacity(n_times);
            for &t in &times {
                mags.push(interferometric_mode_amplitude(protocol, k, t)?.norm());
            }
            i.push(mags);
        }
    }
    let rate = gloa_core::gloa::total_rate_function(&per_mode, kgrid.total_sites());
    Ok(LevelData {
        grid,
        per_mode,
        rate,
        spins,
        fidelity,
        interferometric,
        health,
    })
}

/// Rate series of one refined level, streaming (no per-mode storage).
fn compute_rate_only(
    protocol: &QuenchProtocol,
    kgrid: &KGrid,
    t_max: f64,
    steps: usize,
) -> Result<RateSeries, CliError> {
    let grid = TimeGrid::new(t_max, steps);
    let times = grid.times();
    let mut ln_sum = vec![0.0; times.len()];
    let mut singularities = Vec::new();
    let opts = TrajectoryOptions::default();
    for &k in kgrid.points() {
        let values: Vec<f64> = if protocol.is_unitary() {
            closed_form_amplitude_series(protocol, k, &grid)?
                .values
                .iter()
                .map(|v| v.norm())
                .collect()
        } else {
            let lv = build_liouvillian(protocol, k)?;
            let rho0 = initial_state(protocol, k)?;
            let traj = evolve_mode(&rho0, &lv, &grid, &opts)?;
            mode_gloa_from_trajectory(&traj)
                .values
                .iter()
                .map(|v| v.norm())
                .collect()
        };
        for (n, &g) in values.iter().enumerate() {
            if g < LOG_SINGULARITY_TOL {
                singularities.push((k, times[n]));
            }
            ln_sum[n] += g.max(1e-300).ln();
        }
    }
    Ok(rate_series_from_log_sum(
        &times,
        &ln_sum,
        kgrid.total_sites(),
        singularities,
    ))
}

fn winding_analysis(
    protocol: &QuenchProtocol,
    level: &LevelData,
    ks: &[f64],
) -> Result<(Vec<i32>, Vec<f64>, Vec<f64>, WindingSummary), CliError> {
    let spins = level.spins.as_ref().expect("winding needs spin data");
    let times = &level.rate.times;
    let mut nu = Vec::with_capacity(times.len());
    let mut raw = Vec::with_capacity(times.len());
    let mut min_norm = Vec::with_capacity(times.len());
    let mut axis = [0.0; 3];
    let mut max_sigma: f64 = 0.0;
    for n in 0..times.len() {
        let column: Vec<Vector3<f64>> = spins.iter().map(|m| m[n]).collect();
        let field = pseudo_spin_field_from_vectors(ks, &column, SPIN_FLOOR)?;
        max_sigma = max_sigma.max(field.sigma_min);
        axis = [field.chiral_axis.x, field.chiral_axis.y, field.chiral_axis.z];
        let w = winding_number(&field)?;
        nu.push(w.nu);
        raw.push(w.raw);
        min_norm.push(
            column
                .iter()
                .map(|v| v.norm())
                .fold(f64::INFINITY, f64::min),
        );
    }

    let dk = if ks.len() > 1 { ks[1] - ks[0] } else { 1.0 };
    let dt = times[1] - times[0];
    let mut changes = Vec::new();
    for n in 0..nu.len() - 1 {
        if nu[n + 1] == nu[n] {
            continue;
        }
        // Bracket the spin zero behind this change: coarse argmin of |n|
        // over the two bracketing time columns, then golden-section descent
        // on the exact (k, t) evolution.
        let mut k_best = ks[0];
        let mut best = f64::INFINITY;
        for m in 0..ks.len() {
            for col in [n, n + 1] {
                let norm = spins[m][col].norm();
                if norm < best {
                    best = norm;
                    k_best = ks[m];
                }
            }
        }
        let k_lo = (k_best - 3.0 * dk).max(ks[0]);
        let k_hi = (k_best + 3.0 * dk).min(*ks.last().unwrap());
        let t_lo = times[n] - dt;
        let t_hi = times[n + 1] + dt;
        let value = |k: f64, t: f64| -> f64 {
            let spin = (|| -> gloa_core::Result<f64> {
                let lv = build_liouvillian(protocol, k)?;
                let rho0 = initial_state(protocol, k)?;
                let rho = propagate_to(&lv, &rho0.matrix, t.max(0.0));
                Ok(mode_pseudo_spin(&rho).norm())
            })();
            spin.unwrap_or(f64::INFINITY)
        };
        let (k_min, t_min, v_min) = localize_spin_minimum(value, (k_lo, k_hi), (t_lo, t_hi), 1e-8);
        changes.push(WindingChange {
            t_before: times[n],
            t_after: times[n + 1],
            nu_before: nu[n],
            nu_after: nu[n + 1],
            spin_minimum: SpinMinimum {
                k: k_min,
                t: t_min,
                value: v_min,
            },
        });
    }
    let summary = WindingSummary {
        chiral_axis: axis,
        max_sigma_min: max_sigma,
        initial_nu: nu[0],
        final_nu: *nu.last().unwrap(),
        changes,
    };
    Ok((nu, raw, min_norm, summary))
}

/// Execute a validated config end to end; pure computation, no I/O.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let protocol = config.protocol()?;
    let kgrid = config.k_grid()?;
    let analyses = &config.analyses;
    let needs = Needs {
        spins: analyses.winding,
        fidelity: analyses.baselines,
        interferometric: analyses.baselines && protocol.is_unitary(),
    };
    let grid = TimeGrid::new(config.grid.t_max, config.grid.steps);
    let dt = grid.dt();
    let level = compute_level(&protocol, &kgrid, grid, &needs)?;
    let times = &level.rate.times;

    // Critical modes of the underlying closed quench; engineered runs
    // (zero Hamiltonian) and same-phase quenches legitimately have none.
    let e_max = kgrid
        .points()
        .iter()
        .map(|&k| protocol.final_model.band_energy(k))
        .fold(0.0, f64::max);
    let n_max = 1 + (config.grid.t_max * e_max / std::f64::consts::PI).ceil() as usize;
    let critical = match critical_times(&protocol, n_max) {
        Ok(modes) => modes,
        Err(Error::NoCriticalMode) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let critical_summaries: Vec<CriticalModeSummary> = critical
        .iter()
        .map(|m| CriticalModeSummary {
            k_c: m.k_c,
            energy: m.energy,
            times: m
                .times
                .iter()
                .copied()
                .filter(|&t| t <= config.grid.t_max)
                .collect(),
        })
        .collect();

    let hash = config.hash();
    let meta = |analysis: &str| -> Vec<(&str, String)> {
        vec![
            ("name", config.name.clone()),
            ("analysis", analysis.to_string()),
            ("tool_version", env!("CARGO_PKG_VERSION").to_string()),
            ("config_hash", hash.clone()),
            ("family", config.protocol.family.to_string()),
            ("half_count", config.grid.half_count.to_string()),
            ("total_sites", kgrid.total_sites().to_string()),
            ("t_max", format_float(config.grid.t_max)),
            ("steps", config.grid.steps.to_string()),
            ("dt", format_float(dt)),
        ]
    };

    let mut tables = Vec::new();
    let mut analysis_names = Vec::new();

    if analyses.rate {
        let mut table = ResultTable::new("rate", &["t", "g", "dg_dt"]).with_metadata(&meta("rate"));
        for n in 0..times.len() {
            table.push_row(vec![times[n], level.rate.rate[n], level.rate.derivative[n]]);
        }
        tables.push(table);
        analysis_names.push("rate".to_string());
    }

    // Winding before DTOP: a localized spin zero exempts its momentum from
    // the DTOP unwrap check (the near-pi phase jump there is physical).
    let mut winding_summary = None;
    if analyses.winding {
        let (nu, raw, min_norm, summary) = winding_analysis(&protocol, &level, kgrid.points())?;
        let mut table = ResultTable::new("winding", &["t", "nu", "nu_raw", "min_spin_norm"])
            .with_metadata(&meta("winding"));
        for n in 0..times.len() {
            table.push_row(vec![times[n], nu[n] as f64, raw[n], min_norm[n]]);
        }
        tables.push(table);
        analysis_names.push("winding".to_string());
        winding_summary = Some(summary);
    }

    let mut dtop_summary = None;
    if analyses.dtop {
        let mut exempt: Vec<f64> = critical.iter().map(|m| m.k_c).collect();
        if let Some(w) = &winding_summary {
            exempt.extend(w.changes.iter().map(|c| c.spin_minimum.k));
        }
        let series = dtop_series(&level.per_mode, &exempt, UNWRAP_MARGIN)?;
        let mut table = ResultTable::new("dtop", &["t", "nu_d"]).with_metadata(&meta("dtop"));
        for n in 0..times.len() {
            table.push_row(vec![times[n], series.nu_d[n]]);
        }
        tables.push(table);
        analysis_names.push("dtop".to_string());
        dtop_summary = Some(DtopSummary {
            initial_nu_d: series.nu_d[0],
            final_nu_d: *series.nu_d.last().unwrap(),
            jumps: series.jumps.clone(),
        });
    }

    if analyses.baselines {
        let fid = level.fidelity.as_ref().expect("baselines need fidelity data");
        let fid_rate = rate_series_from_magnitudes(times, kgrid.points(), fid, kgrid.total_sites());
        let (columns, int_rate): (Vec<&str>, Option<RateSeries>) =
            if let Some(int) = level.interferometric.as_ref() {
                let r =
                    rate_series_from_magnitudes(times, kgrid.points(), int, kgrid.total_sites());
                (vec!["t", "g_fidelity", "g_interferometric"], Some(r))
            } else {
                (vec!["t", "g_fidelity"], None)
            };
        let mut table =
            ResultTable::new("baselines", &columns).with_metadata(&meta("baselines"));
        for n in 0..times.len() {
            let mut row = vec![times[n], fid_rate.rate[n]];
            if let Some(r) = &int_rate {
                row.push(r.rate[n]);
            }
            table.push_row(row);
        }
        tables.push(table);
        analysis_names.push("baselines".to_string());
    }

    let refinement = if config.output.refinement_levels >= 2 {
        Some(refinement_study(
            &level.rate,
            config.grid.steps,
            config.output.refinement_levels,
            |steps| compute_rate_only(&protocol, &kgrid, config.grid.t_max, steps),
        )?)
    } else {
        None
    };

    for table in &tables {
        table
            .validate()
            .map_err(|e| CliError::Io(format!("internal table invariant: {e}")))?;
    }

    let files: Vec<FileEntry> = tables
        .iter()
        .map(|t| FileEntry {
            analysis: t.analysis.clone(),
            file: format!("{}_{}.csv", config.name, t.analysis),
            columns: t.columns.clone(),
            rows: t.rows.len(),
        })
        .collect();

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: config.name.clone(),
        config_hash: hash,
        family: config.protocol.family.to_string(),
        half_count: config.grid.half_count,
        total_sites: kgrid.total_sites(),
        t_max: config.grid.t_max,
        steps: config.grid.steps,
        dt,
        analyses: analysis_names,
        files,
        critical_modes: critical_summaries,
        cusp_candidates: level.rate.cusp_candidates.clone(),
        log_singularity_count: level.rate.log_singularities.len(),
        health: level.health,
        winding: winding_summary,
        dtop: dtop_summary,
        refinement,
    };

    Ok(RunOutput {
        config: config.clone(),
        tables,
        manifest,
    })
}

/// Write all CSV files plus the JSON manifest into `dir`; returns the
/// written paths (manifest last).
pub fn write_output(run: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    for (table, entry) in run.tables.iter().zip(&run.manifest.files) {
        let path = dir.join(&entry.file);
        std::fs::write(&path, table.to_csv()).map_err(io)?;
        written.push(path);
    }
    let manifest_path = dir.join(format!("{}_manifest.json", run.config.name));
    let mut body = serde_json::to_string_pretty(&run.manifest)
        .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
    body.push('\n');
    std::fs::write(&manifest_path, body).map_err(io)?;
    written.push(manifest_path);
    Ok(written)
}

/// Is this a config whose underlying quench is closed? (Used by the CLI to
/// phrase run summaries; engineered dynamics never is.)
pub fn is_closed(config: &ExperimentConfig) -> bool {
    config.protocol.family != Family::Engineered
        && config.dissipation.kind == crate::config::DissipationKind::None
}
