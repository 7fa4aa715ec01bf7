//! Sweep orchestration: quantum `r~` and classical `<R_c>` per control value,
//! paired into correspondence points and fitted.
//!
//! Randomness flows from the single config seed through per-task derived
//! streams, so parallel scheduling never changes results and reruns are
//! bit-identical.

use rayon::prelude::*;

use chaosmeter::chaos_measure::{
    build_grid, chaos_measure, ensemble_stats, kt_domain, CellCountMode, ChaosMeasureSample,
    SectionPointCloud,
};
use chaosmeter::dicke_classical::DickeDynamics;
use chaosmeter::dicke_quantum::{
    build_dicke_hamiltonian, scaled_spectrum, select_shell, DickeParams, EnergyShell,
};
use chaosmeter::fit::{
    fit_correspondence, fit_correspondence_free_amplitude, fit_correspondence_weighted, FitResult,
};
use chaosmeter::kt_classical::{kt_trajectory, sample_sphere};
use chaosmeter::kt_quantum::{KtParams, QuasienergySpectrum};
use chaosmeter::rng::{derive_rng, splitmix64};
use chaosmeter::spectral_stats::{rescaled_average, spacing_ratios, RescaledRatio};

use crate::config::{Model, SweepConfig};
use crate::error::{CliError, Result};

/// One paired (classical, quantum) measurement.
#[derive(Clone, Copy, Debug)]
pub struct CorrespondencePoint {
    /// gamma or xi.
    pub control: f64,
    /// `<R_c>`.
    pub x: f64,
    pub x_stderr: f64,
    /// `r~`.
    pub y: f64,
    /// j (kicked top) or N (Dicke).
    pub quantum_size: u32,
    /// N_k (kicks) or T_m (evolution time).
    pub classical_len: f64,
}

/// Classical ensemble measurement at one `(control, length)`.
#[derive(Clone, Debug)]
pub struct RcEnsemble {
    pub samples: Vec<ChaosMeasureSample>,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub m_cells: usize,
    /// Mean same-direction traversal time (Dicke flows only).
    pub traversal_time: Option<f64>,
    /// Section points per trajectory implied by the traversal time.
    pub n_section_points: Option<usize>,
}

/// Quantum measurement at one `(control, size)`.
#[derive(Clone, Debug)]
pub struct QuantumPoint {
    pub control: f64,
    pub size: u32,
    pub rescaled: RescaledRatio,
    /// Quasienergies (kicked top) or scaled shell levels (Dicke).
    pub levels: Vec<f64>,
    /// Full scaled spectrum (Dicke only; kicked top uses `levels`).
    pub full_levels: Option<Vec<f64>>,
    pub shell: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct ClassicalPoint {
    pub control: f64,
    pub len: f64,
    pub ensemble: RcEnsemble,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub quantum: Vec<QuantumPoint>,
    pub classical: Vec<ClassicalPoint>,
    pub points: Vec<CorrespondencePoint>,
    pub fit: Option<FitResult>,
    pub quantum_wall: f64,
    pub classical_wall: f64,
}

fn cell_mode(exact: bool) -> CellCountMode {
    if exact {
        CellCountMode::EntropyMaximizer
    } else {
        CellCountMode::PointCount
    }
}

/// Kicked-top quantum side: full even-sector quasienergy statistics with the
/// circular gap convention.
pub fn kt_quantum_rtilde(
    j: u32,
    beta: f64,
    gamma: f64,
) -> Result<(RescaledRatio, QuasienergySpectrum)> {
    let params = KtParams::new(j, beta, gamma)?;
    let spec = QuasienergySpectrum::compute(params)?;
    let ratios = spacing_ratios(&spec.to_spectrum_sample(), true)?;
    let rescaled = rescaled_average(&ratios)?;
    Ok((rescaled, spec))
}

/// Kicked-top classical side: `n_traj` sphere-uniform initial conditions,
/// `n_kicks` points each, one shared grid.
pub fn kt_rc_ensemble(
    beta: f64,
    gamma: f64,
    n_kicks: usize,
    n_traj: usize,
    seed: u64,
    exact_cells: bool,
) -> Result<RcEnsemble> {
    let grid = build_grid(&kt_domain(), n_kicks, None, cell_mode(exact_cells))?;
    let samples: Vec<ChaosMeasureSample> = (0..n_traj)
        .into_par_iter()
        .map(|idx| {
            let mut rng = derive_rng(seed, idx as u64);
            let s0 = sample_sphere(&mut rng);
            let traj = kt_trajectory(&s0, n_kicks, beta, gamma)?;
            let cloud = SectionPointCloud {
                domain: kt_domain(),
                points: traj.points,
            };
            chaos_measure(&cloud, &grid)
        })
        .collect::<chaosmeter::Result<_>>()?;
    let (mean, std, stderr) = ensemble_stats(&samples)?;
    Ok(RcEnsemble {
        samples,
        mean,
        std,
        stderr,
        m_cells: grid.m_cells,
        traversal_time: None,
        n_section_points: None,
    })
}

/// Dicke quantum side: even-sector shell statistics with linear gaps.
pub fn dicke_quantum_rtilde(
    params: &DickeParams,
    e_center: f64,
    lo_offset: f64,
    hi_offset: f64,
) -> Result<(RescaledRatio, EnergyShell, Vec<f64>)> {
    let h = build_dicke_hamiltonian(params)?;
    let spec = scaled_spectrum(&h, params.j())?;
    let shell = select_shell(&spec, e_center, lo_offset, hi_offset)?;
    let sample = chaosmeter::spectral_stats::SpectrumSample::new(
        shell.levels.clone(),
        chaosmeter::spectral_stats::Provenance::Dicke {
            n_atoms: params.n_atoms,
            n_tr: params.n_tr,
            omega: params.omega,
            omega0: params.omega0,
            xi: params.xi,
        },
    );
    let ratios = spacing_ratios(&sample, false)?;
    let rescaled = rescaled_average(&ratios)?;
    Ok((rescaled, shell, spec.levels))
}

/// Dicke classical side: shell-sampled ensemble, Poincaré sections, shared
/// masked grid sized by `T_m / T_r`.
pub fn dicke_rc_ensemble(
    dynamics: &DickeDynamics,
    energy: f64,
    t_m: f64,
    n_traj: usize,
    seed: u64,
    ode_tol: f64,
    exact_cells: bool,
) -> Result<RcEnsemble> {
    let states = dynamics.sample_shell(energy, n_traj, seed)?;
    struct TrajSection {
        cloud: SectionPointCloud,
        span: f64,
        intervals: usize,
    }
    let sections: Vec<TrajSection> = states
        .par_iter()
        .map(|s0| {
            let traj = dynamics.integrate(s0, t_m, ode_tol)?;
            let crossings = dynamics.poincare_section(&traj, 1);
            let (span, intervals) = if crossings.len() >= 2 {
                (
                    crossings.last().unwrap().t - crossings[0].t,
                    crossings.len() - 1,
                )
            } else {
                (0.0, 0)
            };
            Ok(TrajSection {
                cloud: DickeDynamics::section_cloud(&crossings),
                span,
                intervals,
            })
        })
        .collect::<chaosmeter::Result<_>>()?;

    // pooled mean traversal time across the ensemble
    let total_span: f64 = sections.iter().map(|s| s.span).sum();
    let total_intervals: usize = sections.iter().map(|s| s.intervals).sum();
    if total_intervals == 0 {
        return Err(CliError::Numerical(chaosmeter::Error::InvalidInput(
            format!("no section traversals observed at t_m = {t_m}"),
        )));
    }
    let t_r = total_span / total_intervals as f64;
    let n_m = ((t_m / t_r).round() as usize).max(1);

    let pred = dynamics.shell_predicate(energy);
    let grid = build_grid(
        &chaosmeter::chaos_measure::dicke_domain(),
        n_m,
        Some(&pred),
        cell_mode(exact_cells),
    )?;
    let samples: Vec<ChaosMeasureSample> = sections
        .iter()
        .map(|s| chaos_measure(&s.cloud, &grid))
        .collect::<chaosmeter::Result<_>>()?;
    let (mean, std, stderr) = ensemble_stats(&samples)?;
    Ok(RcEnsemble {
        samples,
        mean,
        std,
        stderr,
        m_cells: grid.m_cells,
        traversal_time: Some(t_r),
        n_section_points: Some(n_m),
    })
}

fn with_control<T>(res: chaosmeter::Result<T>, control: f64) -> Result<T> {
    res.map_err(|e| match e {
        chaosmeter::Error::InvalidInput(msg) => CliError::Config(format!(
            "control value {control}: {msg}"
        )),
        other => CliError::Numerical(chaosmeter::Error::InvalidInput(format!(
            "control value {control}: {other}"
        ))),
    })
}

/// Run the full sweep: every `(control, size)` quantum point, every
/// `(control, length)` classical ensemble, the paired points, and the fit.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let t0 = std::time::Instant::now();

    let mut quantum = Vec::new();
    let mut classical = Vec::new();
    match cfg.model {
        Model::KickedTop => {
            for &j in &cfg.j_values {
                for &gamma in &cfg.controls {
                    let (rescaled, spec) =
                        kt_quantum_rtilde(j, cfg.beta, gamma).map_err(|e| match e {
                            CliError::Numerical(inner) => CliError::Numerical(
                                chaosmeter::Error::InvalidInput(format!(
                                    "gamma = {gamma}, j = {j}: {inner}"
                                )),
                            ),
                            other => other,
                        })?;
                    quantum.push(QuantumPoint {
                        control: gamma,
                        size: j,
                        rescaled,
                        levels: spec.alphas,
                        full_levels: None,
                        shell: None,
                    });
                }
            }
            let quantum_wall = t0.elapsed().as_secs_f64();
            let tc = std::time::Instant::now();
            for (ki, &n_kicks) in cfg.n_kicks.iter().enumerate() {
                for (ci, &gamma) in cfg.controls.iter().enumerate() {
                    let stream = splitmix64(
                        cfg.seed ^ ((ki as u64) << 32) ^ ((ci as u64) << 16) ^ 0x6b74,
                    );
                    let ens = kt_rc_ensemble(
                        cfg.beta,
                        gamma,
                        n_kicks,
                        cfg.ensemble,
                        stream,
                        cfg.exact_cells,
                    )?;
                    classical.push(ClassicalPoint {
                        control: gamma,
                        len: n_kicks as f64,
                        ensemble: ens,
                    });
                }
            }
            let classical_wall = tc.elapsed().as_secs_f64();
            finish_sweep(cfg, quantum, classical, quantum_wall, classical_wall)
        }
        Model::Dicke => {
            for &n in &cfg.n_atoms {
                for &xi in &cfg.controls {
                    let params = with_control(
                        DickeParams::new(n, cfg.omega, cfg.omega0, xi, cfg.n_tr),
                        xi,
                    )?;
                    let (rescaled, shell, full) = dicke_quantum_rtilde(
                        &params,
                        cfg.shell_center,
                        cfg.shell_lo_offset,
                        cfg.shell_hi_offset,
                    )?;
                    quantum.push(QuantumPoint {
                        control: xi,
                        size: n,
                        rescaled,
                        levels: shell.levels.clone(),
                        full_levels: Some(full),
                        shell: Some((shell.lo, shell.hi)),
                    });
                }
            }
            let quantum_wall = t0.elapsed().as_secs_f64();
            let tc = std::time::Instant::now();
            for (ti, &t_m) in cfg.t_m.iter().enumerate() {
                for (ci, &xi) in cfg.controls.iter().enumerate() {
                    let dynamics =
                        with_control(DickeDynamics::new(cfg.omega, cfg.omega0, xi), xi)?;
                    let stream = splitmix64(
                        cfg.seed ^ ((ti as u64) << 32) ^ ((ci as u64) << 16) ^ 0x6463,
                    );
                    let ens = dicke_rc_ensemble(
                        &dynamics,
                        cfg.shell_center,
                        t_m,
                        cfg.ensemble,
                        stream,
                        cfg.ode_tol,
                        cfg.exact_cells,
                    )?;
                    classical.push(ClassicalPoint {
                        control: xi,
                        len: t_m,
                        ensemble: ens,
                    });
                }
            }
            let classical_wall = tc.elapsed().as_secs_f64();
            finish_sweep(cfg, quantum, classical, quantum_wall, classical_wall)
        }
    }
}

fn finish_sweep(
    cfg: &SweepConfig,
    quantum: Vec<QuantumPoint>,
    classical: Vec<ClassicalPoint>,
    quantum_wall: f64,
    classical_wall: f64,
) -> Result<SweepResult> {
    let mut points = Vec::new();
    for q in &quantum {
        for c in &classical {
            if (q.control - c.control).abs() < 1e-12 {
                points.push(CorrespondencePoint {
                    control: q.control,
                    x: c.ensemble.mean,
                    x_stderr: c.ensemble.stderr,
                    y: q.rescaled.r_tilde,
                    quantum_size: q.size,
                    classical_len: c.len,
                });
            }
        }
    }

    let fit = if points.len() >= 3 {
        let data: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
        let f = if cfg.fit_free_amplitude {
            fit_correspondence_free_amplitude(&data)
        } else if cfg.weighted_fit {
            let weighted: Vec<(f64, f64, f64)> = points
                .iter()
                .map(|p| {
                    let w = if p.x_stderr > 0.0 {
                        1.0 / (p.x_stderr * p.x_stderr)
                    } else {
                        1.0
                    };
                    (p.x, p.y, w)
                })
                .collect();
            fit_correspondence_weighted(&weighted, cfg.fit_amplitude)
        } else {
            fit_correspondence(&data, cfg.fit_amplitude)
        };
        Some(f.map_err(CliError::Numerical)?)
    } else {
        None
    };

    Ok(SweepResult {
        quantum,
        classical,
        points,
        fit,
        quantum_wall,
        classical_wall,
    })
}
