//! Level-spacing-ratio statistics.
//!
//! Ratios `r_k = min(d_{k+1}/d_k, d_k/d_{k+1})` need no unfolding, which is
//! why they are the diagnostic of choice here. Two gap conventions are
//! supported:
//!
//! * `circular`: for phase spectra on `[-pi, pi)` the wraparound gap
//!   `a_0 + 2pi - a_last` is included, so every level contributes one gap and
//!   one ratio;
//! * linear: for ordinary energy levels, `L` levels give `L - 1` gaps and
//!   `L - 2` ratios.
//!
//! Degeneracy policy: a gap smaller than [`ZERO_GAP_TOL`] counts as zero.
//! Two consecutive zero gaps give an undefined ratio `0/0` and the pair is
//! dropped (counted in `n_dropped_zero`); a single zero gap gives `r = 0`.
//! The tolerance (rather than exact equality) is required because degenerate
//! eigenphases come out of the dense solver with ~1e-15 jitter.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gaps at or below this absolute size are treated as exact degeneracies.
pub const ZERO_GAP_TOL: f64 = 1e-12;

/// Where a spectrum came from; carried along for labeling exports.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    KickedTop { j: u32, beta: f64, gamma: f64 },
    Dicke { n_atoms: u32, n_tr: usize, omega: f64, omega0: f64, xi: f64 },
    Synthetic(String),
}

/// Ordered list of real levels (phases or scaled energies).
#[derive(Clone, Debug)]
pub struct SpectrumSample {
    pub levels: Vec<f64>,
    pub provenance: Provenance,
}

impl SpectrumSample {
    pub fn new(levels: Vec<f64>, provenance: Provenance) -> Self {
        Self { levels, provenance }
    }

    pub fn synthetic(levels: Vec<f64>) -> Self {
        Self {
            levels,
            provenance: Provenance::Synthetic("test".into()),
        }
    }
}

/// Spacing ratios extracted from one spectrum.
#[derive(Clone, Debug)]
pub struct RatioSample {
    /// Retained ratios, each in `[0, 1]`.
    pub ratios: Vec<f64>,
    /// Number of source levels.
    pub n_levels: usize,
    /// Whether the wraparound gap was included.
    pub circular: bool,
    /// Count of discarded `0/0` gap pairs.
    pub n_dropped_zero: usize,
}

/// Mean ratio mapped onto the Poisson (0) to Wigner-Dyson (1) axis.
#[derive(Clone, Copy, Debug)]
pub struct RescaledRatio {
    pub mean_r: f64,
    pub r_tilde: f64,
    pub ref_poisson: f64,
    pub ref_wd: f64,
}

/// Reference ratio densities on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefDensity {
    Poisson,
    WignerDyson,
}

/// `P_P(r) = 2/(1+r)^2`, `P_WD(r) = (27/4) (r + r^2) / (1 + r + r^2)^(5/2)`.
pub fn reference_pdf(r: f64, kind: RefDensity) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!(
            "ratio argument {r} outside [0, 1]"
        )));
    }
    Ok(match kind {
        RefDensity::Poisson => 2.0 / ((1.0 + r) * (1.0 + r)),
        RefDensity::WignerDyson => {
            6.75 * (r + r * r) / (1.0 + r + r * r).powf(2.5)
        }
    })
}

/// Adaptive Simpson quadrature with absolute tolerance.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Quadrature-evaluated reference means `(<r>_P, <r>_WD)`, cached.
///
/// Each mean is computed as `int r P dr / int P dr` over `[0, 1]`, i.e.
/// against the density normalized on the folded interval. For the Poisson
/// density the mass factor is exactly 1, giving the closed form
/// `2 ln 2 - 1 ~ 0.3863`; the Wigner-Dyson surmise carries mass 1/2 on
/// `[0, 1]`, and its normalized mean is `4 - 2 sqrt(3) ~ 0.5359`.
pub fn reference_means() -> (f64, f64) {
    static CACHE: OnceLock<(f64, f64)> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let tol = 1e-12;
        let mean_of = |kind: RefDensity| {
            let num = adaptive_simpson(
                &|r| r * reference_pdf(r, kind).expect("r in range"),
                0.0,
                1.0,
                tol,
            );
            let mass = adaptive_simpson(
                &|r| reference_pdf(r, kind).expect("r in range"),
                0.0,
                1.0,
                tol,
            );
            num / mass
        };
        (mean_of(RefDensity::Poisson), mean_of(RefDensity::WignerDyson))
    })
}

/// Exposed for normalization checks: `int_0^1 P dr` at tolerance `tol`.
pub fn reference_pdf_mass(kind: RefDensity, tol: f64) -> f64 {
    adaptive_simpson(&|r| reference_pdf(r, kind).expect("r in range"), 0.0, 1.0, tol)
}

/// Consecutive-gap ratios of a sorted spectrum.
pub fn spacing_ratios(sample: &SpectrumSample, circular: bool) -> Result<RatioSample> {
    spacing_ratios_with_tol(sample, circular, ZERO_GAP_TOL)
}

/// As [`spacing_ratios`] with an explicit zero-gap tolerance.
pub fn spacing_ratios_with_tol(
    sample: &SpectrumSample,
    circular: bool,
    zero_tol: f64,
) -> Result<RatioSample> {
    let levels = &sample.levels;
    let n = levels.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 levels for spacing ratios, got {n}"
        )));
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("levels must be sorted ascending".into()));
    }

    let mut gaps: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    if circular {
        let wrap = levels[0] + 2.0 * std::f64::consts::PI - levels[n - 1];
        if wrap < -zero_tol {
            return Err(Error::InvalidInput(
                "circular spectra must span less than 2 pi".into(),
            ));
        }
        gaps.push(wrap.max(0.0));
    }

    let n_gaps = gaps.len();
    let n_pairs = if circular { n_gaps } else { n_gaps - 1 };
    let mut ratios = Vec::with_capacity(n_pairs);
    let mut dropped = 0usize;
    for k in 0..n_pairs {
        let d0 = gaps[k];
        let d1 = gaps[(k + 1) % n_gaps];
        let z0 = d0 <= zero_tol;
        let z1 = d1 <= zero_tol;
        match (z0, z1) {
            (true, true) => dropped += 1,
            (true, false) | (false, true) => ratios.push(0.0),
            (false, false) => {
                let delta = d1 / d0;
                ratios.push(delta.min(1.0 / delta));
            }
        }
    }

    Ok(RatioSample {
        ratios,
        n_levels: n,
        circular,
        n_dropped_zero: dropped,
    })
}

/// Mean retained ratio and its rescaled value
/// `r~ = |<r> - <r>_P| / (<r>_WD - <r>_P)`.
pub fn rescaled_average(sample: &RatioSample) -> Result<RescaledRatio> {
    if sample.ratios.is_empty() {
        return Err(Error::InvalidInput(
            "no retained ratios: cannot form a mean".into(),
        ));
    }
    let mean_r = sample.ratios.iter().sum::<f64>() / sample.ratios.len() as f64;
    let (ref_poisson, ref_wd) = reference_means();
    Ok(RescaledRatio {
        mean_r,
        r_tilde: (mean_r - ref_poisson).abs() / (ref_wd - ref_poisson),
        ref_poisson,
        ref_wd,
    })
}

/// Equal-width histogram normalized to unit integral.
#[derive(Clone, Debug)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    pub n: usize,
}

impl Histogram {
    pub fn bin_mid(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width
    }

    /// Strict interior local maxima of the density.
    pub fn local_maxima(&self) -> usize {
        let d = &self.density;
        let n = d.len();
        if n < 2 {
            return usize::from(n == 1 && d[0] > 0.0);
        }
        let mut count = 0;
        for i in 0..n {
            let left_ok = i == 0 || d[i] > d[i - 1];
            let right_ok = i == n - 1 || d[i] > d[i + 1];
            if left_ok && right_ok {
                count += 1;
            }
        }
        count
    }
}

/// Bin `values` into `bins` equal cells over `[lo, hi]`; density satisfies
/// `sum(density * width) = 1`.
pub fn histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if values.is_empty() {
        return Err(Error::InvalidInput("histogram of empty input".into()));
    }
    if bins < 1 {
        return Err(Error::InvalidInput("histogram needs bins >= 1".into()));
    }
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!(
            "histogram range [{lo}, {hi}] is empty"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v < lo || v > hi {
            return Err(Error::InvalidInput(format!(
                "value {v} outside histogram range [{lo}, {hi}]"
            )));
        }
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = values.len();
    let density = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * width))
        .collect();
    Ok(Histogram {
        lo,
        hi,
        bin_width: width,
        counts,
        density,
        n,
    })
}
