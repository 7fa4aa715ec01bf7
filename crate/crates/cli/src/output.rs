//! Export formats: CSVs with 17-significant-digit floats and the JSON run
//! summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chaosmeter::chaos_measure::ChaosMeasureSample;
use chaosmeter::dicke_classical::SectionCrossing;
use chaosmeter::fit::FitResult;
use chaosmeter::kt_classical::LyapunovEstimate;
use chaosmeter::spectral_stats::Histogram;

use crate::config::SweepConfig;
use crate::error::Result;
use crate::sweep::{CorrespondencePoint, SweepResult};

/// 17 significant digits, scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Classical-length tag for file names (integer when whole).
pub fn fmt_len(len: f64) -> String {
    if len.fract() == 0.0 {
        format!("{}", len as i64)
    } else {
        format!("{len}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

pub fn write_spectrum_csv(path: &Path, value_name: &str, levels: &[f64]) -> Result<()> {
    let mut s = format!("k,{value_name}\n");
    for (k, v) in levels.iter().enumerate() {
        s.push_str(&format!("{k},{}\n", fmt_float(*v)));
    }
    write_file(path, &s)
}

/// Shell export: window metadata as leading comment lines.
pub fn write_shell_csv(
    path: &Path,
    e_center: f64,
    lo: f64,
    hi: f64,
    levels: &[f64],
) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!("# e_center={}\n", fmt_float(e_center)));
    s.push_str(&format!("# window_lo={}\n", fmt_float(lo)));
    s.push_str(&format!("# window_hi={}\n", fmt_float(hi)));
    s.push_str("k,E_scaled\n");
    for (k, v) in levels.iter().enumerate() {
        s.push_str(&format!("{k},{}\n", fmt_float(*v)));
    }
    write_file(path, &s)
}

pub fn write_histogram_csv(path: &Path, mid_name: &str, hist: &Histogram) -> Result<()> {
    let mut s = format!("{mid_name},density\n");
    for (i, d) in hist.density.iter().enumerate() {
        s.push_str(&format!("{},{}\n", fmt_float(hist.bin_mid(i)), fmt_float(*d)));
    }
    write_file(path, &s)
}

pub fn write_rc_samples_csv(path: &Path, samples: &[ChaosMeasureSample]) -> Result<()> {
    let mut s = String::from("trajectory_id,r_c,m_occupied,n_points,m_cells,p_occ\n");
    for (id, smp) in samples.iter().enumerate() {
        s.push_str(&format!(
            "{id},{},{},{},{},{}\n",
            fmt_float(smp.r_c),
            smp.m_occupied,
            smp.n_points,
            smp.m_cells,
            fmt_float(smp.p_occ)
        ));
    }
    write_file(path, &s)
}

pub fn write_trajectory_csv(path: &Path, points: &[[f64; 2]]) -> Result<()> {
    let mut s = String::from("kick,phi,cos_theta\n");
    for (k, p) in points.iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", k + 1, fmt_float(p[0]), fmt_float(p[1])));
    }
    write_file(path, &s)
}

pub fn write_section_csv(path: &Path, crossings: &[SectionCrossing]) -> Result<()> {
    let mut s = String::from("t,P,Q,direction\n");
    for c in crossings {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(c.t),
            fmt_float(c.P),
            fmt_float(c.Q),
            c.direction
        ));
    }
    write_file(path, &s)
}

pub fn write_lyapunov_csv(
    path: &Path,
    control_name: &str,
    value_name: &str,
    rows: &[(f64, LyapunovEstimate)],
) -> Result<()> {
    let mut s = format!("{control_name},{value_name}_mean,{value_name}_stderr\n");
    for (control, est) in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            fmt_float(*control),
            fmt_float(est.mean),
            fmt_float(est.stderr)
        ));
    }
    write_file(path, &s)
}

pub fn write_points_csv(path: &Path, points: &[&CorrespondencePoint]) -> Result<()> {
    let mut s = String::from("control,x_rc_mean,x_rc_stderr,y_rtilde\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(p.control),
            fmt_float(p.x),
            fmt_float(p.x_stderr),
            fmt_float(p.y)
        ));
    }
    write_file(path, &s)
}

/// Parse a points CSV written by [`write_points_csv`].
pub fn read_points_csv(path: &Path) -> Result<Vec<(f64, f64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(crate::error::CliError::Config(format!(
                "{}: line {} has {} columns, expected 4",
                path.display(),
                i + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| crate::error::CliError::Config(format!("bad float `{s}`: {e}")))
        };
        out.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?, parse(cols[3])?));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitSummary {
    pub amplitude: f64,
    pub exponent_kappa: f64,
    pub rate_q: f64,
    pub rss: f64,
    pub n_points: usize,
    pub converged: bool,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            amplitude: f.amplitude,
            exponent_kappa: f.exponent,
            rate_q: f.rate,
            rss: f.rss,
            n_points: f.n_points,
            converged: f.converged,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub control: f64,
    pub x_rc_mean: f64,
    pub x_rc_stderr: f64,
    pub y_rtilde: f64,
    pub quantum_size: u32,
    pub classical_len: f64,
}

/// Run summary: config echo, fit, provenance, wall times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub config_hash: String,
    pub package_version: String,
    pub reference_mean_poisson: f64,
    pub reference_mean_wigner_dyson: f64,
    pub fit: Option<FitSummary>,
    pub points: Vec<PointSummary>,
    pub wall_seconds_quantum: f64,
    pub wall_seconds_classical: f64,
    pub files: Vec<String>,
}

/// Write every sweep artifact below `out_dir/<config hash>/`; returns the
/// run directory.
pub fn emit_outputs(result: &SweepResult, cfg: &SweepConfig, out_dir: &Path) -> Result<PathBuf> {
    let run_dir = out_dir.join(cfg.hash());
    fs::create_dir_all(&run_dir)?;
    let mut files = Vec::new();

    // paired points, one CSV per (quantum size, classical length) combo
    let mut combos: Vec<(u32, f64)> = result
        .points
        .iter()
        .map(|p| (p.quantum_size, p.classical_len))
        .collect();
    combos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    combos.dedup();
    for (size, len) in combos {
        let name = format!("points_q{}_c{}.csv", size, fmt_len(len));
        let subset: Vec<&CorrespondencePoint> = result
            .points
            .iter()
            .filter(|p| p.quantum_size == size && p.classical_len == len)
            .collect();
        write_points_csv(&run_dir.join(&name), &subset)?;
        files.push(name);
    }

    // spectra
    for q in &result.quantum {
        let name = format!("spectrum_q{}_ctrl{}.csv", q.size, q.control);
        let path = run_dir.join(&name);
        match (&q.full_levels, q.shell) {
            (Some(full), Some((lo, hi))) => {
                write_spectrum_csv(&path, "E_scaled", full)?;
                let shell_name = format!("shell_q{}_ctrl{}.csv", q.size, q.control);
                write_shell_csv(
                    &run_dir.join(&shell_name),
                    0.5 * (lo + hi),
                    lo,
                    hi,
                    &q.levels,
                )?;
                files.push(shell_name);
            }
            _ => write_spectrum_csv(&path, "alpha", &q.levels)?,
        }
        files.push(name);
    }

    // R_c samples and distributions
    for c in &result.classical {
        let tag = format!("ctrl{}_c{}", c.control, fmt_len(c.len));
        let samples_name = format!("rc_samples_{tag}.csv");
        write_rc_samples_csv(&run_dir.join(&samples_name), &c.ensemble.samples)?;
        files.push(samples_name);
        let dist = chaosmeter::chaos_measure::measure_distribution(&c.ensemble.samples, cfg.bins)
            .map_err(crate::error::CliError::Numerical)?;
        let dist_name = format!("rc_dist_{tag}.csv");
        write_histogram_csv(&run_dir.join(&dist_name), "r_c_mid", &dist)?;
        files.push(dist_name);
    }

    let (ref_p, ref_wd) = chaosmeter::spectral_stats::reference_means();
    let summary = SweepSummary {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        reference_mean_poisson: ref_p,
        reference_mean_wigner_dyson: ref_wd,
        fit: result.fit.as_ref().map(FitSummary::from),
        points: result
            .points
            .iter()
            .map(|p| PointSummary {
                control: p.control,
                x_rc_mean: p.x,
                x_rc_stderr: p.x_stderr,
                y_rtilde: p.y,
                quantum_size: p.quantum_size,
                classical_len: p.classical_len,
            })
            .collect(),
        wall_seconds_quantum: result.quantum_wall,
        wall_seconds_classical: result.classical_wall,
        files,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| crate::error::CliError::Config(format!("summary serialization: {e}")))?;
    write_file(&run_dir.join("summary.json"), &json)?;
    Ok(run_dir)
}
