//! `chaosmeter`: quantum and finite-time classical chaos measures for the
//! kicked top and the Dicke model.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chaosmeter::dicke_classical::{DickeDynamics, ENERGY_CERTIFIED_TOL};
use chaosmeter::dicke_quantum::{
    build_dicke_hamiltonian_capped, scaled_spectrum, select_shell, truncation_convergence_capped,
    DickeParams,
};
use chaosmeter::kt_classical::{kt_trajectory, phase_avg_lyapunov, sample_sphere};
use chaosmeter::rng::derive_rng;
use chaosmeter::spectral_stats::{histogram, rescaled_average, spacing_ratios};

use chaosmeter_cli::config::{Model, SweepConfig};
use chaosmeter_cli::error::{CliError, Result};
use chaosmeter_cli::output::{self, fmt_len};
use chaosmeter_cli::sweep;

#[derive(Parser)]
#[command(
    name = "chaosmeter",
    version,
    about = "Level-statistics and cell-occupancy chaos measures for the kicked top and Dicke models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Kicked-top quasienergy spectrum and spacing-ratio statistics
    KtQuantum(KtQuantumArgs),
    /// Kicked-top classical trajectories and Lyapunov exponents
    KtClassical(KtClassicalArgs),
    /// Kicked-top finite-time cell-occupancy measure R_c
    KtMeasure(KtMeasureArgs),
    /// Dicke spectrum, energy shell, and spacing-ratio statistics
    DickeQuantum(DickeQuantumArgs),
    /// Dicke classical flow: Poincaré sections and Lyapunov exponents
    DickeClassical(DickeClassicalArgs),
    /// Dicke finite-time cell-occupancy measure R_c
    DickeMeasure(DickeMeasureArgs),
    /// Full correspondence sweep: r~ against <R_c> with the universal fit
    Sweep(SweepArgs),
    /// Fit y = A - exp(-q x^kappa) to existing points CSVs
    Fit(FitArgs),
}

#[derive(Args)]
struct KtQuantumArgs {
    #[arg(long, default_value_t = 400)]
    j: u32,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    beta: f64,
    #[arg(long)]
    gamma: f64,
    /// Also write a ratio histogram with this many bins (0 = skip)
    #[arg(long, default_value_t = 0)]
    bins: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct KtClassicalArgs {
    /// Write phase-portrait trajectories at this kick strength
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    beta: f64,
    #[arg(long, default_value_t = 300)]
    n_kicks: usize,
    #[arg(long, default_value_t = 90)]
    n_traj: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Phase-averaged Lyapunov sweep over these kick strengths
    #[arg(long, value_delimiter = ',')]
    lyapunov_gammas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    lyap_samples: usize,
    #[arg(long, default_value_t = 10_000)]
    lyap_steps: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct KtMeasureArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    n_kicks: usize,
    #[arg(long, default_value_t = 1600)]
    ensemble: usize,
    #[arg(long, default_value_t = 7777)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Size grids by round(N/ln 2) instead of N
    #[arg(long)]
    exact_cells: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DickeQuantumArgs {
    #[arg(long, default_value_t = 30)]
    n_atoms: u32,
    #[arg(long, default_value_t = 160)]
    n_tr: usize,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long, default_value_t = 1.2)]
    shell_center: f64,
    #[arg(long, default_value_t = 0.15)]
    shell_lo: f64,
    #[arg(long, default_value_t = 0.02)]
    shell_hi: f64,
    /// Rebuild with n_tr scaled by this factor and report shell shifts
    #[arg(long)]
    check_truncation: Option<f64>,
    #[arg(long, default_value_t = chaosmeter::dicke_quantum::DEFAULT_DIM_CAP)]
    dim_cap: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DickeClassicalArgs {
    #[arg(long)]
    xi: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    #[arg(long, default_value_t = 1.2)]
    energy: f64,
    #[arg(long, default_value_t = 3000.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1)]
    n_traj: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Integrator tolerance (default keeps the energy drift audited)
    #[arg(long, default_value_t = ENERGY_CERTIFIED_TOL)]
    tol: f64,
    /// Shell-averaged Lyapunov sweep over these couplings
    #[arg(long, value_delimiter = ',')]
    lyapunov_xis: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    lyap_samples: usize,
    #[arg(long, default_value_t = 1000.0)]
    lyap_tmax: f64,
    #[arg(long, default_value_t = 1.0)]
    lyap_renorm: f64,
    #[arg(long, default_value_t = 1e-9)]
    lyap_tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DickeMeasureArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    xis: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    #[arg(long, default_value_t = 1.2)]
    energy: f64,
    #[arg(long, default_value_t = 1000.0)]
    t_m: f64,
    #[arg(long, default_value_t = 400)]
    ensemble: usize,
    #[arg(long, default_value_t = 7777)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    exact_cells: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Model to sweep (may also come from the config file)
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// TOML key-value file overriding the model defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    controls: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    j_values: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    n_kicks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n_atoms: Option<Vec<u32>>,
    #[arg(long)]
    n_tr: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    t_m: Option<Vec<f64>>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    shell_center: Option<f64>,
    #[arg(long)]
    shell_lo: Option<f64>,
    #[arg(long)]
    shell_hi: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    ode_tol: Option<f64>,
    #[arg(long)]
    fit_amplitude: Option<f64>,
    #[arg(long)]
    exact_cells: bool,
    #[arg(long)]
    free_amplitude: bool,
    #[arg(long)]
    weighted_fit: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// One or more points CSVs (header control,x_rc_mean,x_rc_stderr,y_rtilde)
    #[arg(long, value_delimiter = ',', required = true)]
    points: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.02)]
    amplitude: f64,
    #[arg(long)]
    free_amplitude: bool,
    #[arg(long)]
    weighted: bool,
    /// Write the fit as JSON here instead of only printing it
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::KtQuantum(a) => kt_quantum(a),
        Cmd::KtClassical(a) => kt_classical(a),
        Cmd::KtMeasure(a) => kt_measure(a),
        Cmd::DickeQuantum(a) => dicke_quantum(a),
        Cmd::DickeClassical(a) => dicke_classical(a),
        Cmd::DickeMeasure(a) => dicke_measure(a),
        Cmd::Sweep(a) => sweep_cmd(a),
        Cmd::Fit(a) => fit_cmd(a),
    }
}

fn kt_quantum(a: KtQuantumArgs) -> Result<()> {
    let (rescaled, spec) = sweep::kt_quantum_rtilde(a.j, a.beta, a.gamma)?;
    let path = a.out.join(format!("kt_spectrum_j{}_gamma{}.csv", a.j, a.gamma));
    output::write_spectrum_csv(&path, "alpha", &spec.alphas)?;
    println!("spectrum: {} levels -> {}", spec.alphas.len(), path.display());
    println!(
        "mean_r = {:.6}  r_tilde = {:.6}  (refs {:.6}, {:.6})",
        rescaled.mean_r, rescaled.r_tilde, rescaled.ref_poisson, rescaled.ref_wd
    );
    if a.bins > 0 {
        let ratios = spacing_ratios(&spec.to_spectrum_sample(), true)
            .map_err(CliError::Numerical)?;
        let h = histogram(&ratios.ratios, a.bins, (0.0, 1.0)).map_err(CliError::Numerical)?;
        let hist_path = a
            .out
            .join(format!("kt_ratio_hist_j{}_gamma{}.csv", a.j, a.gamma));
        output::write_histogram_csv(&hist_path, "r_mid", &h)?;
        println!("ratio histogram -> {}", hist_path.display());
    }
    Ok(())
}

fn kt_classical(a: KtClassicalArgs) -> Result<()> {
    if a.gamma.is_none() && a.lyapunov_gammas.is_none() {
        return Err(CliError::Config(
            "kt-classical needs --gamma (portrait) and/or --lyapunov-gammas".into(),
        ));
    }
    if let Some(gamma) = a.gamma {
        for idx in 0..a.n_traj {
            let mut rng = derive_rng(a.seed, idx as u64);
            let s0 = sample_sphere(&mut rng);
            let traj = kt_trajectory(&s0, a.n_kicks, a.beta, gamma)?;
            let path = a.out.join(format!("kt_trajectory_{idx:03}.csv"));
            output::write_trajectory_csv(&path, &traj.points)?;
        }
        println!(
            "{} trajectories x {} kicks at gamma = {} -> {}",
            a.n_traj,
            a.n_kicks,
            gamma,
            a.out.display()
        );
    }
    if let Some(gammas) = &a.lyapunov_gammas {
        let mut rows = Vec::new();
        for (i, &gamma) in gammas.iter().enumerate() {
            let est = phase_avg_lyapunov(
                a.beta,
                gamma,
                a.lyap_samples,
                a.lyap_steps,
                a.seed.wrapping_add(i as u64),
            )?;
            println!(
                "gamma = {gamma}: Lambda_m = {:.6} +- {:.6}",
                est.mean, est.stderr
            );
            rows.push((gamma, est));
        }
        let path = a.out.join("kt_lyapunov.csv");
        output::write_lyapunov_csv(&path, "gamma", "lambda", &rows)?;
        println!("lyapunov sweep -> {}", path.display());
    }
    Ok(())
}

fn kt_measure(a: KtMeasureArgs) -> Result<()> {
    for &gamma in &a.gammas {
        let ens = sweep::kt_rc_ensemble(
            a.beta,
            gamma,
            a.n_kicks,
            a.ensemble,
            a.seed,
            a.exact_cells,
        )?;
        let tag = format!("gamma{}_nk{}", gamma, a.n_kicks);
        let samples_path = a.out.join(format!("kt_rc_samples_{tag}.csv"));
        output::write_rc_samples_csv(&samples_path, &ens.samples)?;
        let dist = chaosmeter::chaos_measure::measure_distribution(&ens.samples, a.bins)
            .map_err(CliError::Numerical)?;
        let dist_path = a.out.join(format!("kt_rc_dist_{tag}.csv"));
        output::write_histogram_csv(&dist_path, "r_c_mid", &dist)?;
        println!(
            "gamma = {gamma}: <R_c> = {:.4} +- {:.4} (std {:.4}, {} cells) -> {}",
            ens.mean,
            ens.stderr,
            ens.std,
            ens.m_cells,
            dist_path.display()
        );
    }
    Ok(())
}

fn dicke_quantum(a: DickeQuantumArgs) -> Result<()> {
    let params = DickeParams::new(a.n_atoms, a.omega, a.omega0, a.xi, a.n_tr)?;
    let h = build_dicke_hamiltonian_capped(&params, a.dim_cap)?;
    let spec = scaled_spectrum(&h, params.j()).map_err(CliError::Numerical)?;
    let shell = select_shell(&spec, a.shell_center, a.shell_lo, a.shell_hi)
        .map_err(CliError::Numerical)?;
    let tag = format!("N{}_xi{}", a.n_atoms, a.xi);
    let spec_path = a.out.join(format!("dicke_spectrum_{tag}.csv"));
    output::write_spectrum_csv(&spec_path, "E_scaled", &spec.levels)?;
    let shell_path = a.out.join(format!("dicke_shell_{tag}.csv"));
    output::write_shell_csv(&shell_path, shell.e_center, shell.lo, shell.hi, &shell.levels)?;

    let sample = chaosmeter::spectral_stats::SpectrumSample::synthetic(shell.levels.clone());
    let ratios = spacing_ratios(&sample, false).map_err(CliError::Numerical)?;
    let rescaled = rescaled_average(&ratios).map_err(CliError::Numerical)?;
    println!(
        "sector dim {} -> {} shell levels in [{:.4}, {:.4}]",
        spec.levels.len(),
        shell.count(),
        shell.lo,
        shell.hi
    );
    println!(
        "mean_r = {:.6}  r_tilde = {:.6}  -> {}",
        rescaled.mean_r,
        rescaled.r_tilde,
        shell_path.display()
    );

    if let Some(factor) = a.check_truncation {
        let rep = truncation_convergence_capped(
            &params,
            a.shell_center,
            a.shell_lo,
            a.shell_hi,
            factor,
            a.dim_cap,
        )
        .map_err(CliError::Numerical)?;
        println!(
            "truncation n_tr {} -> {}: shell counts {:?}, max shift {:.3e}, size match {}",
            rep.n_tr.0, rep.n_tr.1, rep.shell_counts, rep.max_shift, rep.size_match
        );
    }
    Ok(())
}

fn dicke_classical(a: DickeClassicalArgs) -> Result<()> {
    let dynamics = DickeDynamics::new(a.omega, a.omega0, a.xi)?;
    let states = dynamics.sample_shell(a.energy, a.n_traj, a.seed)?;
    let mut spans = 0.0;
    let mut intervals = 0usize;
    let mut worst_drift = 0.0f64;
    for (idx, s0) in states.iter().enumerate() {
        let traj = dynamics.integrate(s0, a.t_max, a.tol)?;
        worst_drift = worst_drift.max(traj.max_rel_energy_drift);
        let crossings = dynamics.poincare_section(&traj, 1);
        if crossings.len() >= 2 {
            spans += crossings.last().unwrap().t - crossings[0].t;
            intervals += crossings.len() - 1;
        }
        let path = a.out.join(format!("dicke_section_{idx:03}.csv"));
        output::write_section_csv(&path, &crossings)?;
    }
    println!(
        "{} trajectories, t = {}: max relative energy drift {:.3e}",
        a.n_traj, a.t_max, worst_drift
    );
    if intervals > 0 {
        println!("mean same-direction traversal time T_r = {:.4}", spans / intervals as f64);
    }
    println!("sections -> {}", a.out.display());

    if let Some(xis) = &a.lyapunov_xis {
        let mut rows = Vec::new();
        for (i, &xi) in xis.iter().enumerate() {
            let d = DickeDynamics::new(a.omega, a.omega0, xi)?;
            let est = d.phase_avg_lyapunov(
                a.energy,
                a.lyap_samples,
                a.lyap_tmax,
                a.seed.wrapping_add(1000 + i as u64),
                a.lyap_renorm,
                a.lyap_tol,
            )?;
            println!("xi = {xi}: Upsilon_m = {:.6} +- {:.6}", est.mean, est.stderr);
            rows.push((xi, est));
        }
        let path = a.out.join("dicke_lyapunov.csv");
        output::write_lyapunov_csv(&path, "xi", "upsilon", &rows)?;
        println!("lyapunov sweep -> {}", path.display());
    }
    Ok(())
}

fn dicke_measure(a: DickeMeasureArgs) -> Result<()> {
    for &xi in &a.xis {
        let dynamics = DickeDynamics::new(a.omega, a.omega0, xi)?;
        let ens = sweep::dicke_rc_ensemble(
            &dynamics,
            a.energy,
            a.t_m,
            a.ensemble,
            a.seed,
            a.tol,
            a.exact_cells,
        )?;
        let tag = format!("xi{}_tm{}", xi, fmt_len(a.t_m));
        let samples_path = a.out.join(format!("dicke_rc_samples_{tag}.csv"));
        output::write_rc_samples_csv(&samples_path, &ens.samples)?;
        let dist = chaosmeter::chaos_measure::measure_distribution(&ens.samples, a.bins)
            .map_err(CliError::Numerical)?;
        let dist_path = a.out.join(format!("dicke_rc_dist_{tag}.csv"));
        output::write_histogram_csv(&dist_path, "r_c_mid", &dist)?;
        println!(
            "xi = {xi}: <R_c> = {:.4} +- {:.4} (T_r = {:.3}, N_m = {}) -> {}",
            ens.mean,
            ens.stderr,
            ens.traversal_time.unwrap_or(f64::NAN),
            ens.n_section_points.unwrap_or(0),
            dist_path.display()
        );
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    // model: CLI flag wins, then the config file, else error
    let file_text = match &a.config {
        Some(path) => Some(std::fs::read_to_string(path)?),
        None => None,
    };
    let model = match a.model {
        Some(m) => m,
        None => {
            let Some(text) = &file_text else {
                return Err(CliError::Config(
                    "provide --model or a --config file with a `model` key".into(),
                ));
            };
            let value: toml::Table = text
                .parse()
                .map_err(|e| CliError::Config(format!("config file parse: {e}")))?;
            match value.get("model").and_then(|v| v.as_str()) {
                Some("kicked_top") => Model::KickedTop,
                Some("dicke") => Model::Dicke,
                Some(other) => {
                    return Err(CliError::Config(format!("unknown model `{other}`")))
                }
                None => {
                    return Err(CliError::Config(
                        "config file lacks a `model` key and --model not given".into(),
                    ))
                }
            }
        }
    };

    let mut cfg = SweepConfig::defaults(model);
    if let Some(text) = &file_text {
        cfg = cfg.merged_with_toml(text)?;
        cfg.model = model;
    }
    // explicit flags override the file
    macro_rules! override_opt {
        ($field:ident, $arg:expr) => {
            if let Some(v) = $arg {
                cfg.$field = v;
            }
        };
    }
    override_opt!(controls, a.controls);
    override_opt!(j_values, a.j_values);
    override_opt!(n_kicks, a.n_kicks);
    override_opt!(n_atoms, a.n_atoms);
    override_opt!(n_tr, a.n_tr);
    override_opt!(t_m, a.t_m);
    override_opt!(ensemble, a.ensemble);
    override_opt!(seed, a.seed);
    override_opt!(beta, a.beta);
    override_opt!(omega, a.omega);
    override_opt!(omega0, a.omega0);
    override_opt!(shell_center, a.shell_center);
    override_opt!(shell_lo_offset, a.shell_lo);
    override_opt!(shell_hi_offset, a.shell_hi);
    override_opt!(bins, a.bins);
    override_opt!(ode_tol, a.ode_tol);
    override_opt!(fit_amplitude, a.fit_amplitude);
    if a.exact_cells {
        cfg.exact_cells = true;
    }
    if a.free_amplitude {
        cfg.fit_free_amplitude = true;
    }
    if a.weighted_fit {
        cfg.weighted_fit = true;
    }
    cfg.validate()?;

    let result = sweep::run_sweep(&cfg)?;
    let run_dir = output::emit_outputs(&result, &cfg, &a.out)?;
    println!("sweep {} -> {}", cfg.hash(), run_dir.display());
    println!(
        "{} points ({} quantum, {} classical ensembles)",
        result.points.len(),
        result.quantum.len(),
        result.classical.len()
    );
    if let Some(fit) = &result.fit {
        println!(
            "fit y = {:.4} - exp(-q x^kappa): q = {:.4}, kappa = {:.4}, rss = {:.3e}, converged = {}",
            fit.amplitude, fit.rate, fit.exponent, fit.rss, fit.converged
        );
    }
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &a.points {
        rows.extend(output::read_points_csv(path)?);
    }
    let fit = if a.free_amplitude {
        let data: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.3)).collect();
        chaosmeter::fit::fit_correspondence_free_amplitude(&data)
    } else if a.weighted {
        let data: Vec<(f64, f64, f64)> = rows
            .iter()
            .map(|r| {
                let w = if r.2 > 0.0 { 1.0 / (r.2 * r.2) } else { 1.0 };
                (r.1, r.3, w)
            })
            .collect();
        chaosmeter::fit::fit_correspondence_weighted(&data, a.amplitude)
    } else {
        let data: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.3)).collect();
        chaosmeter::fit::fit_correspondence(&data, a.amplitude)
    }
    .map_err(CliError::Numerical)?;
    println!(
        "fit over {} points: amplitude = {:.4}, q = {:.6}, kappa = {:.6}, rss = {:.3e}, converged = {}",
        fit.n_points, fit.amplitude, fit.rate, fit.exponent, fit.rss, fit.converged
    );
    if let Some(path) = &a.out {
        let summary = output::FitSummary::from(&fit);
        let json = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Config(format!("fit serialization: {e}")))?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, json)?;
        println!("fit -> {}", path.display());
    }
    Ok(())
}
