//! Finite-time chaoticity measure `R_c` on coarse-grained phase-space cells.
//!
//! A trajectory is reduced to `N` points on a 2-D section, the section is
//! tiled with `M ~ N` equal cells (the entropy-optimal resolution is
//! `N / ln 2 ~ N`; the plain point count is the working default), and
//!
//! ```text
//! R_c = M_occupied / (p * M),    p = 1 - (1 - 1/M)^N
//! ```
//!
//! compares the occupied-cell count against the expectation `p * M` for `N`
//! uniformly scattered points. Regular trajectories cluster (`R_c` near 0);
//! chaotic ones scatter (`R_c` near 1). Grids may carry an accessibility
//! mask so that energetically forbidden cells (Dicke shells) do not dilute
//! the normalization; masked-cell hits are flagged, not fatal, because cell
//! centers only approximate the region boundary.

use crate::error::{Error, Result};
use crate::spectral_stats::{histogram, Histogram};

/// Rectangular 2-D domain with named axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain2 {
    pub u_name: &'static str,
    pub v_name: &'static str,
    pub u_lo: f64,
    pub u_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl Domain2 {
    pub fn new(
        u_name: &'static str,
        v_name: &'static str,
        u_lo: f64,
        u_hi: f64,
        v_lo: f64,
        v_hi: f64,
    ) -> Self {
        Self {
            u_name,
            v_name,
            u_lo,
            u_hi,
            v_lo,
            v_hi,
        }
    }

    pub fn u_width(&self) -> f64 {
        self.u_hi - self.u_lo
    }

    pub fn v_width(&self) -> f64 {
        self.v_hi - self.v_lo
    }

    pub fn area(&self) -> f64 {
        self.u_width() * self.v_width()
    }
}

impl std::fmt::Display for Domain2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({} in [{}, {}]) x ({} in [{}, {}])",
            self.u_name, self.u_lo, self.u_hi, self.v_name, self.v_lo, self.v_hi
        )
    }
}

/// Kicked-top section domain `(phi, cos theta)`.
pub fn kt_domain() -> Domain2 {
    Domain2::new(
        "phi",
        "cos_theta",
        -std::f64::consts::PI,
        std::f64::consts::PI,
        -1.0,
        1.0,
    )
}

/// Dicke Poincaré-section domain `(Q, P)`.
pub fn dicke_domain() -> Domain2 {
    Domain2::new(
        "Q",
        "P",
        -std::f64::consts::PI,
        std::f64::consts::PI,
        -1.0,
        1.0,
    )
}

/// Finite point set on a section, tagged with its domain.
#[derive(Clone, Debug)]
pub struct SectionPointCloud {
    pub domain: Domain2,
    /// `(u, v)` pairs.
    pub points: Vec<[f64; 2]>,
}

/// Equal-cell tiling of a domain, optionally masked to an accessible region.
#[derive(Clone, Debug)]
pub struct CellGrid {
    pub domain: Domain2,
    pub n_u: usize,
    pub n_v: usize,
    /// `None` means every cell is admissible.
    pub mask: Option<Vec<bool>>,
    /// Number of admissible cells.
    pub m_cells: usize,
}

impl CellGrid {
    pub fn total_cells(&self) -> usize {
        self.n_u * self.n_v
    }

    fn cell_index(&self, u: f64, v: f64) -> Result<usize> {
        let d = &self.domain;
        if u < d.u_lo || u > d.u_hi || v < d.v_lo || v > d.v_hi {
            return Err(Error::OutsideDomain {
                u,
                v,
                domain: d.to_string(),
            });
        }
        let wu = d.u_width() / self.n_u as f64;
        let wv = d.v_width() / self.n_v as f64;
        let iu = (((u - d.u_lo) / wu) as usize).min(self.n_u - 1);
        let iv = (((v - d.v_lo) / wv) as usize).min(self.n_v - 1);
        Ok(iu * self.n_v + iv)
    }

    fn is_admissible(&self, idx: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[idx])
    }
}

/// `p = 1 - (1 - 1/M)^N`, evaluated in log space so large `N` stays exact.
pub fn occupancy_probability(m_cells: usize, n_points: usize) -> f64 {
    assert!(m_cells >= 1 && n_points >= 1);
    // ln(1 - 1/M) * N, then 1 - exp(.)
    let log_miss = (-1.0 / m_cells as f64).ln_1p();
    -f64::exp_m1(n_points as f64 * log_miss)
}

/// Working cell count: the point count itself.
pub fn optimal_cell_count(n_points: usize) -> usize {
    n_points
}

/// Exact entropy maximizer `round(N / ln 2)`.
pub fn optimal_cell_count_exact(n_points: usize) -> usize {
    ((n_points as f64) / std::f64::consts::LN_2).round() as usize
}

/// Which cell-count rule a grid is sized by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CellCountMode {
    #[default]
    PointCount,
    EntropyMaximizer,
}

fn target_cells(n_points: usize, mode: CellCountMode) -> usize {
    match mode {
        CellCountMode::PointCount => optimal_cell_count(n_points),
        CellCountMode::EntropyMaximizer => optimal_cell_count_exact(n_points),
    }
}

/// Grid shape for a total cell budget: cell aspect matched to the domain
/// aspect, `n_u = round(sqrt(M A_u / A_v))`, `n_v = ceil(M / n_u)`.
fn default_shape(domain: &Domain2, m_total: f64) -> (usize, usize) {
    let ratio = domain.u_width() / domain.v_width();
    let n_u = ((m_total * ratio).sqrt().round() as usize).max(1);
    let n_v = ((m_total / n_u as f64).ceil() as usize).max(1);
    (n_u, n_v)
}

fn count_admissible(
    domain: &Domain2,
    n_u: usize,
    n_v: usize,
    accessible: &dyn Fn(f64, f64) -> bool,
) -> Vec<bool> {
    let wu = domain.u_width() / n_u as f64;
    let wv = domain.v_width() / n_v as f64;
    let mut mask = vec![false; n_u * n_v];
    for iu in 0..n_u {
        let uc = domain.u_lo + (iu as f64 + 0.5) * wu;
        for iv in 0..n_v {
            let vc = domain.v_lo + (iv as f64 + 0.5) * wv;
            mask[iu * n_v + iv] = accessible(uc, vc);
        }
    }
    mask
}

/// Build the cell grid for `n_points` section points.
///
/// Without a mask the shape follows the aspect-matched default. With a mask,
/// the total cell budget is rescaled (and the shape locally searched) until
/// the *admissible* count lands within 2% of the target, which keeps the
/// occupancy normalization comparable between masked and unmasked runs.
pub fn build_grid(
    domain: &Domain2,
    n_points: usize,
    accessible: Option<&dyn Fn(f64, f64) -> bool>,
    mode: CellCountMode,
) -> Result<CellGrid> {
    if n_points < 1 {
        return Err(Error::InvalidInput("grid needs n_points >= 1".into()));
    }
    if !(domain.area() > 0.0) {
        return Err(Error::InvalidInput(format!(
            "domain {domain} has empty area"
        )));
    }
    let target = target_cells(n_points, mode);

    let Some(pred) = accessible else {
        let (n_u, n_v) = default_shape(domain, target as f64);
        return Ok(CellGrid {
            domain: domain.clone(),
            n_u,
            n_v,
            mask: None,
            m_cells: n_u * n_v,
        });
    };

    let tol = (0.02 * target as f64).max(1.0);
    let mut m_total = target as f64;
    let mut best: Option<CellGrid> = None;
    let mut zero_rounds = 0usize;
    for _ in 0..40 {
        if m_total > 2e7 {
            break;
        }
        // local shape search around the aspect-matched default
        let (nu0, _) = default_shape(domain, m_total);
        let mut round_best: Option<CellGrid> = None;
        for nu in nu0.saturating_sub(3).max(1)..=nu0 + 3 {
            let nv_lo = ((m_total / nu as f64).floor() as usize).max(1);
            for nv in [nv_lo, nv_lo + 1] {
                let mask = count_admissible(domain, nu, nv, pred);
                let m_cells = mask.iter().filter(|&&b| b).count();
                let cand = CellGrid {
                    domain: domain.clone(),
                    n_u: nu,
                    n_v: nv,
                    mask: Some(mask),
                    m_cells,
                };
                let better = round_best
                    .as_ref()
                    .map(|b| {
                        (cand.m_cells as f64 - target as f64).abs()
                            < (b.m_cells as f64 - target as f64).abs()
                    })
                    .unwrap_or(true);
                if better {
                    round_best = Some(cand);
                }
            }
        }
        let cand = round_best.expect("at least one candidate shape");
        let err = (cand.m_cells as f64 - target as f64).abs();
        let keep = best
            .as_ref()
            .map(|b| err < (b.m_cells as f64 - target as f64).abs())
            .unwrap_or(true);
        if keep {
            best = Some(cand.clone());
        }
        if cand.m_cells == 0 {
            // whole domain inaccessible at this resolution: refine a few
            // times, then give up
            zero_rounds += 1;
            if zero_rounds > 3 {
                break;
            }
            m_total *= 4.0;
            continue;
        }
        if err <= tol {
            break;
        }
        m_total *= target as f64 / cand.m_cells as f64;
    }
    let grid = best.expect("grid search ran");
    if grid.m_cells == 0 {
        return Err(Error::EmptyAdmissible(domain.to_string()));
    }
    Ok(grid)
}

/// Per-trajectory occupancy measurement.
#[derive(Clone, Copy, Debug)]
pub struct ChaosMeasureSample {
    pub r_c: f64,
    pub n_points: usize,
    pub m_cells: usize,
    pub m_occupied: usize,
    pub p_occ: f64,
    /// Points that landed in masked-off cells (boundary artifact, flagged
    /// but still counted in `n_points`).
    pub masked_points: usize,
}

/// Count distinct admissible occupied cells and normalize.
pub fn chaos_measure(points: &SectionPointCloud, grid: &CellGrid) -> Result<ChaosMeasureSample> {
    if points.domain != grid.domain {
        return Err(Error::InvalidInput(format!(
            "point cloud domain {} does not match grid domain {}",
            points.domain, grid.domain
        )));
    }
    let n_points = points.points.len();
    if n_points < 1 {
        return Err(Error::InvalidInput("chaos measure needs >= 1 point".into()));
    }
    let mut occupied = vec![false; grid.total_cells()];
    let mut masked_points = 0usize;
    for p in &points.points {
        let idx = grid.cell_index(p[0], p[1])?;
        if grid.is_admissible(idx) {
            occupied[idx] = true;
        } else {
            masked_points += 1;
        }
    }
    let m_occupied = occupied.iter().filter(|&&b| b).count();
    let p_occ = occupancy_probability(grid.m_cells, n_points);
    Ok(ChaosMeasureSample {
        r_c: m_occupied as f64 / (p_occ * grid.m_cells as f64),
        n_points,
        m_cells: grid.m_cells,
        m_occupied,
        p_occ,
        masked_points,
    })
}

/// Normalized histogram of `R_c` over `[0, max(1.05, max R_c)]`.
pub fn measure_distribution(samples: &[ChaosMeasureSample], bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no measure samples".into()));
    }
    let max_rc = samples.iter().fold(0.0f64, |m, s| m.max(s.r_c));
    let values: Vec<f64> = samples.iter().map(|s| s.r_c).collect();
    histogram(&values, bins, (0.0, max_rc.max(1.05)))
}

/// Ensemble mean of `R_c`.
pub fn ensemble_average(samples: &[ChaosMeasureSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no measure samples".into()));
    }
    Ok(samples.iter().map(|s| s.r_c).sum::<f64>() / samples.len() as f64)
}

/// Mean, population-corrected standard deviation, and standard error of the
/// ensemble `R_c` values.
pub fn ensemble_stats(samples: &[ChaosMeasureSample]) -> Result<(f64, f64, f64)> {
    let mean = ensemble_average(samples)?;
    if samples.len() == 1 {
        return Ok((mean, 0.0, 0.0));
    }
    let n = samples.len() as f64;
    let var = samples
        .iter()
        .map(|s| (s.r_c - mean) * (s.r_c - mean))
        .sum::<f64>()
        / (n - 1.0);
    let std = var.sqrt();
    Ok((mean, std, std / n.sqrt()))
}
