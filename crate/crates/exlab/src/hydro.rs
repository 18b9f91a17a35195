//! Scaling experiments: the particle system run at a sequence of lattice
//! scales against the closed-form entropy solutions of [`crate::burgers`].
//!
//! The dictionary: a macroscopic profile `u0` is realized at scale `n` as a
//! product measure with density `u0(z/n)` at site `z`, the system runs to
//! microscopic time `n*t`, and block averages or local marginals are compared
//! with the entropy solution `u(t, .)`. Windows are finite, so every scaled
//! experiment carries a halo wide enough that boundary effects cannot reach
//! the observation region within the horizon.
//!
//! The module also hosts the fixed-lattice long-time experiments: the 1D
//! step-profile limit table, corner decay from a packed quadrant, relaxation
//! of a step toward the exponential stationary family, and the drift test
//! showing that a step facing against the mean displacement spreads instead
//! of standing still.

use crate::burgers::{line_description, reduce_dim, BurgersError, MacroProfile};
use crate::dynamics::{
    evolve, sample_product, Boundary, Configuration, DynError, SimClock, Window,
};
use crate::kernels::{
    asep_kernel, axis_pair_kernel, diagonal_drift_kernel, diagonal_lazy_kernel, exponent_balance,
    ExponentVector, LatticeKernel,
};
use crate::measures::{DensityProfile, MeasureError};
use crate::stats::{linear_fit, mann_kendall, mean_sd};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Halo width = `HALO_SAFETY * range * n * t`, rounded up. Information
/// travels at most `range` sites per unit of microscopic time on average, so
/// a factor-4 pad keeps boundary artifacts exponentially unlikely.
pub const HALO_SAFETY: f64 = 4.0;

/// Hard cap on window sizes; guards against configs that would not fit in
/// memory long before they would finish running.
pub const MAX_WINDOW_SITES: usize = 1 << 24;

/// Tolerance handed to the balance check before a relaxation experiment.
pub const BALANCE_TOL: f64 = 1e-9;

const QUADRATURE_TOL: f64 = 1e-7;
const QUADRATURE_DEPTH: u32 = 24;

#[derive(Debug, Error)]
pub enum HydroError {
    #[error("bad experiment: {0}")]
    BadExperiment(String),
    #[error(
        "the profile jumps within {dist:.4} of the probe point, inside the 2/n = {limit:.4} \
         refusal radius; local marginals carry no prediction there"
    )]
    NearDiscontinuity { dist: f64, limit: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynError),
    #[error(transparent)]
    Burgers(#[from] BurgersError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Sites needed on each side of the observation region at scale `n` and
/// macroscopic horizon `time`.
pub fn halo_width(k: &LatticeKernel, n: u32, time: f64) -> i64 {
    let ballistic = HALO_SAFETY * k.range() as f64 * n as f64 * time;
    (ballistic.ceil() as i64).max(k.range()).max(1)
}

/// An axis-aligned macroscopic box with nonempty interior.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroBlock {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl MacroBlock {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<MacroBlock, HydroError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(HydroError::BadExperiment(format!(
                "block corner arities {} / {} disagree or are zero",
                lower.len(),
                upper.len()
            )));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(HydroError::BadExperiment(format!(
                    "degenerate block axis [{l}, {u}]"
                )));
            }
        }
        Ok(MacroBlock { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Inclusive corners of the lattice trace `nB`: all `z` with `z/n` in
    /// the block.
    pub fn lattice_corners(&self, n: u32) -> (Vec<i64>, Vec<i64>) {
        let nf = n as f64;
        let lo = self.lower.iter().map(|l| (l * nf).ceil() as i64).collect();
        let hi = self.upper.iter().map(|u| (u * nf).floor() as i64).collect();
        (lo, hi)
    }
}

/// A scaled comparison between the particle system and the entropy solution.
#[derive(Debug, Clone)]
pub struct HydroExperiment {
    pub kernel: LatticeKernel,
    pub profile: MacroProfile,
    pub scales: Vec<u32>,
    pub time: f64,
    pub block: MacroBlock,
    pub replicates: u32,
    pub seed: u64,
}

impl HydroExperiment {
    pub fn validate(&self) -> Result<(), HydroError> {
        self.profile.validate()?;
        let d = self.kernel.dim();
        if self.block.dim() != d {
            return Err(HydroError::BadExperiment(format!(
                "kernel is {d}-dimensional, block is {}-dimensional",
                self.block.dim()
            )));
        }
        if let Some(pd) = self.profile.dim() {
            if pd != d {
                return Err(HydroError::BadExperiment(format!(
                    "kernel is {d}-dimensional, profile is {pd}-dimensional"
                )));
            }
        }
        if self.scales.is_empty() {
            return Err(HydroError::BadExperiment("no scales requested".into()));
        }
        if self.scales[0] == 0 || self.scales.windows(2).any(|p| p[1] <= p[0]) {
            return Err(HydroError::BadExperiment(
                "scales must be positive and strictly increasing".into(),
            ));
        }
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(HydroError::BadExperiment(format!("bad horizon {}", self.time)));
        }
        if self.replicates < 2 {
            return Err(HydroError::BadExperiment(
                "need at least two replicates for an error bar".into(),
            ));
        }
        for &n in &self.scales {
            self.window_for(n)?;
        }
        Ok(())
    }

    /// The simulation window at scale `n`: the lattice trace of the block
    /// padded by the halo. Also returns the inclusive block corners.
    pub fn window_for(&self, n: u32) -> Result<(Window, Vec<i64>, Vec<i64>), HydroError> {
        let (lo, hi) = self.block.lattice_corners(n);
        for (l, h) in lo.iter().zip(&hi) {
            if l > h {
                return Err(HydroError::BadExperiment(format!(
                    "block traps no lattice sites at scale {n}"
                )));
            }
        }
        let halo = halo_width(&self.kernel, n, self.time);
        let w = boxed_with_margin(&lo, &hi, halo, Boundary::Closed)?;
        Ok((w, lo, hi))
    }
}

/// The standing-shock benchmark: unit-rate rightward kernel over a wedge
/// step (0.2 outside, 0.8 inside, aperture 1). Every horizontal line sees a
/// zero-speed shock, so `u(t, .) = u0` for all `t`; the block is the unit
/// square centered at the origin and the horizon is 1.
pub fn standing_wedge_experiment(scales: Vec<u32>, replicates: u32, seed: u64) -> HydroExperiment {
    HydroExperiment {
        kernel: axis_pair_kernel(1.0, 0.0, 0.0, 0.0),
        profile: MacroProfile::WedgeStep { left: 0.2, right: 0.8, c: 1.0 },
        scales,
        time: 1.0,
        block: MacroBlock::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap(),
        replicates,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAverageRow {
    pub scale: u32,
    pub mean: f64,
    pub stderr: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAverageReport {
    /// `integral of u(t, .) over the block`, by adaptive quadrature.
    pub target: f64,
    pub rows: Vec<BlockAverageRow>,
    pub gaps_decreasing: bool,
}

/// Empirical block averages `n^{-d} sum_{z in nB} eta_{nt}(z)` against the
/// integral of the entropy solution over the block, one row per scale.
pub fn block_average_experiment(e: &HydroExperiment) -> Result<BlockAverageReport, HydroError> {
    e.validate()?;
    let m = e.kernel.mean_vector();
    let target = block_target(&e.profile, &m, e.time, &e.block)?;
    let mut rows = Vec::with_capacity(e.scales.len());
    for (si, &n) in e.scales.iter().enumerate() {
        let (window, lo, hi) = e.window_for(n)?;
        let in_block: Vec<bool> = (0..window.len())
            .map(|i| {
                let z = window.site_at(i);
                z.iter().zip(lo.iter().zip(&hi)).all(|(zi, (l, h))| l <= zi && zi <= h)
            })
            .collect();
        let horizon = [n as f64 * e.time];
        let counts = replicate_series(
            &e.kernel,
            &horizon,
            e.replicates,
            e.seed,
            (si as u64) << 32,
            |clock| Ok(sample_macro(&e.profile, n, &window, clock.rng())),
            |_, cfg| cfg.particle_sites().filter(|&i| in_block[i]).count() as u64,
        )?;
        let norm = (n as f64).powi(window.dim() as i32);
        let values: Vec<f64> = counts.iter().map(|row| row[0] as f64 / norm).collect();
        let (mean, sd) = mean_sd(&values);
        let stderr = sd / (values.len() as f64).sqrt();
        rows.push(BlockAverageRow { scale: n, mean, stderr, gap: (mean - target).abs() });
    }
    let gaps_decreasing = rows.windows(2).all(|p| p[1].gap < p[0].gap);
    Ok(BlockAverageReport { target, rows, gaps_decreasing })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalLimitReport {
    pub scale: u32,
    /// `u(t, x)`: the predicted single-site density.
    pub density: f64,
    pub center_marginal: f64,
    pub pooled_marginal: f64,
    pub max_marginal_deviation: f64,
    pub pooled_pair: f64,
    pub sites: usize,
    pub pairs: usize,
    pub replicates: u32,
}

impl LocalLimitReport {
    pub fn center_deviation(&self) -> f64 {
        (self.center_marginal - self.density).abs()
    }

    pub fn pooled_deviation(&self) -> f64 {
        (self.pooled_marginal - self.density).abs()
    }

    /// Pooled pair estimate against the product value `u^2`.
    pub fn pair_deviation(&self) -> f64 {
        (self.pooled_pair - self.density * self.density).abs()
    }
}

/// Single-site marginals and pair correlations in the radius-`w` box around
/// `[nx]` at the largest requested scale, against the product law at density
/// `u(t, x)`. Refuses points within `2/n` of a jump of `u(t, .)`: the local
/// description carries no prediction at a discontinuity.
pub fn local_limit_experiment(
    e: &HydroExperiment,
    x: &[f64],
    w: i64,
) -> Result<LocalLimitReport, HydroError> {
    e.validate()?;
    let d = e.kernel.dim();
    if x.len() != d || x.iter().any(|v| !v.is_finite()) {
        return Err(HydroError::BadExperiment(format!(
            "probe point must be a finite {d}-vector"
        )));
    }
    if w < 1 {
        return Err(HydroError::BadExperiment("box radius must be at least 1".into()));
    }
    let n = *e.scales.last().unwrap();
    let m = e.kernel.mean_vector();
    if m.iter().all(|&c| c == 0.0) {
        return Err(HydroError::BadExperiment(
            "zero mean displacement: no transport direction to reduce along".into(),
        ));
    }
    let (_, y_rel, desc) = line_description(&e.profile, &m, x)?;
    let limit = 2.0 / n as f64;
    let dist = desc
        .breakpoints(e.time)
        .iter()
        .map(|b| (y_rel - b).abs())
        .fold(f64::INFINITY, f64::min);
    if dist <= limit {
        return Err(HydroError::NearDiscontinuity { dist, limit });
    }
    let density = reduce_dim(&e.profile, &m, e.time, x)?;

    let center: Vec<i64> = x.iter().map(|&xi| (xi * n as f64).round() as i64).collect();
    let lo: Vec<i64> = center.iter().map(|c| c - w).collect();
    let hi: Vec<i64> = center.iter().map(|c| c + w).collect();
    let halo = halo_width(&e.kernel, n, e.time);
    let window = boxed_with_margin(&lo, &hi, halo, Boundary::Closed)?;
    let box_idx: Vec<usize> = (0..window.len())
        .filter(|&i| {
            let z = window.site_at(i);
            z.iter().zip(lo.iter().zip(&hi)).all(|(zi, (l, h))| l <= zi && zi <= h)
        })
        .collect();
    let center_pos = box_idx
        .iter()
        .position(|&i| i == window.index_of(&center).unwrap())
        .unwrap();

    let horizon = [n as f64 * e.time];
    let snaps = replicate_series(
        &e.kernel,
        &horizon,
        e.replicates,
        e.seed,
        0,
        |clock| Ok(sample_macro(&e.profile, n, &window, clock.rng())),
        |_, cfg| box_idx.iter().map(|&i| cfg.occupied(i)).collect::<Vec<bool>>(),
    )?;

    let s = box_idx.len();
    let mut site_counts = vec![0u64; s];
    let mut pair_total = 0u64;
    for row in &snaps {
        let occ = &row[0];
        for i in 0..s {
            if occ[i] {
                site_counts[i] += 1;
                for j in i + 1..s {
                    if occ[j] {
                        pair_total += 1;
                    }
                }
            }
        }
    }
    let reps = snaps.len() as f64;
    let marginals: Vec<f64> = site_counts.iter().map(|&c| c as f64 / reps).collect();
    let pairs = s * (s - 1) / 2;
    Ok(LocalLimitReport {
        scale: n,
        density,
        center_marginal: marginals[center_pos],
        pooled_marginal: marginals.iter().sum::<f64>() / s as f64,
        max_marginal_deviation: marginals
            .iter()
            .map(|m| (m - density).abs())
            .fold(0.0, f64::max),
        pooled_pair: pair_total as f64 / (reps * pairs as f64),
        sites: s,
        pairs,
        replicates: e.replicates,
    })
}

/// Long-time law of a 1D step profile under drift `2p - 1 > 0`, by the
/// sign of the flux difference across the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsepLimitClass {
    /// Step with `right <= 1/2 <= left`: the fan's sonic point parks at the
    /// origin and the local density is 1/2.
    Half,
    /// Shock recedes leftward: the right density takes over.
    RightDensity,
    /// Shock recedes rightward: the left density takes over.
    LeftDensity,
    /// Standing shock (`left + right = 1`, `left < right`): an even mixture
    /// of the two sides, mean 1/2.
    Mixture,
}

/// Classifies the long-time local law at the origin for step data
/// `(left, right)` under rightward drift, with the limiting mean density.
/// Returns `None` for steps the table does not cover (`left = 0, right = 1`).
pub fn asep_limit_class(left: f64, right: f64) -> Option<(AsepLimitClass, f64)> {
    let s = left + right;
    if right <= 0.5 && left >= 0.5 {
        Some((AsepLimitClass::Half, 0.5))
    } else if (s - 1.0).abs() <= 1e-12 {
        if left > 0.0 && left < right {
            Some((AsepLimitClass::Mixture, 0.5))
        } else {
            None
        }
    } else if right >= 0.5 && s > 1.0 {
        Some((AsepLimitClass::RightDensity, right))
    } else if left <= 0.5 && s < 1.0 {
        Some((AsepLimitClass::LeftDensity, left))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsepLimitReport {
    pub times: Vec<f64>,
    /// Mean density of the centered block at each time.
    pub densities: Vec<f64>,
    pub class: AsepLimitClass,
    pub expected: f64,
    pub final_gap: f64,
}

/// 1D drift kernel `p(1) = p, p(-1) = 1 - p` started from a step profile,
/// with step-matched reservoirs at both ends; tracks the density of the
/// centered block toward its classified limit.
pub fn asep_limit_experiment(
    p: f64,
    left: f64,
    right: f64,
    times: &[f64],
    half_window: i64,
    block_half: i64,
    replicates: u32,
    seed: u64,
) -> Result<AsepLimitReport, HydroError> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(HydroError::BadExperiment(format!(
            "needs rightward drift: p in (1/2, 1], got {p}"
        )));
    }
    check_times(times)?;
    if half_window < 1 || block_half < 0 || block_half >= half_window {
        return Err(HydroError::BadExperiment(format!(
            "block half-width {block_half} must sit inside the window half-width {half_window}"
        )));
    }
    if replicates == 0 {
        return Err(HydroError::BadExperiment("no replicates requested".into()));
    }
    let (class, expected) = asep_limit_class(left, right).ok_or_else(|| {
        HydroError::BadExperiment(format!("step ({left}, {right}) is outside the limit table"))
    })?;
    let kernel = asep_kernel(p);
    let profile = DensityProfile::StepV {
        left,
        right,
        v: ExponentVector::new(vec![1.0]),
        threshold: 0.0,
    };
    profile.validate()?;
    let window = Window::boxed(
        vec![-half_window],
        vec![half_window - 1],
        Boundary::Reservoir(profile.clone()),
    )?;
    let in_block: Vec<bool> = (0..window.len())
        .map(|i| window.site_at(i)[0].abs() <= block_half)
        .collect();
    let counts = replicate_series(
        &kernel,
        times,
        replicates,
        seed,
        0,
        |clock| sample_product(&profile, &window, clock.rng()),
        |_, cfg| cfg.particle_sites().filter(|&i| in_block[i]).count() as u64,
    )?;
    let sites = (2 * block_half + 1) as f64;
    let reps = counts.len() as f64;
    let densities: Vec<f64> = (0..times.len())
        .map(|ti| counts.iter().map(|row| row[ti] as f64).sum::<f64>() / (reps * sites))
        .collect();
    let final_gap = (densities.last().unwrap() - expected).abs();
    Ok(AsepLimitReport { times: times.to_vec(), densities, class, expected, final_gap })
}

/// The two planar kernels driving the packed-quadrant experiment; both share
/// the diagonal mean direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagonalVariant {
    /// `p(e1) = p(e2) = p1`, `p(-e1) = p(-e2) = 1/2 - p1`, `p1 in (1/4, 1/2]`.
    Drift(f64),
    /// `p(e1) = p(e2) = p2`, `p(0) = 1 - 2 p2`, `p2 in (0, 1/2]`. Started
    /// from the packed quadrant nothing can ever move.
    Lazy(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandTrend {
    pub j: i64,
    pub z: f64,
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantDecayReport {
    pub js: Vec<i64>,
    pub times: Vec<f64>,
    /// `[time][j]` probability that some site with `z1 + z2 <= j` is occupied.
    pub band_probability: Vec<Vec<f64>>,
    /// `[time][j]` probability that some band site beyond the central
    /// triangle (`z1 < -j` or `z2 < -j`) is occupied.
    pub arm_probability: Vec<Vec<f64>>,
    /// Monotone-trend test of each band series over time, at 95%.
    pub trends: Vec<BandTrend>,
    /// Base `b` of a fitted envelope `C b^{j/3}` over the arm probabilities
    /// maximized over the sampled times; `None` if fewer than two `j` values
    /// give a probability strictly between 0 and 1.
    pub envelope_base: Option<f64>,
    /// Whether every replicate stayed bit-identical to the initial state at
    /// every sampled time.
    pub frozen: bool,
}

struct QuadSnap {
    band: Vec<bool>,
    arm: Vec<bool>,
    unchanged: bool,
}

/// Starts from the fully packed quadrant `z1 >= 0, z2 >= 0` on a closed
/// square window and watches occupancy below the anti-diagonals
/// `z1 + z2 = j`. Under [`DiagonalVariant::Drift`] the corner drains; under
/// [`DiagonalVariant::Lazy`] the configuration is frozen forever.
pub fn quadrant_decay_experiment(
    variant: DiagonalVariant,
    js: &[i64],
    times: &[f64],
    half_window: i64,
    replicates: u32,
    seed: u64,
) -> Result<QuadrantDecayReport, HydroError> {
    if js.is_empty() || js.windows(2).any(|p| p[1] <= p[0]) {
        return Err(HydroError::BadExperiment(
            "band levels must be nonempty and strictly increasing".into(),
        ));
    }
    check_times(times)?;
    if replicates == 0 {
        return Err(HydroError::BadExperiment("no replicates requested".into()));
    }
    let kernel = match variant {
        DiagonalVariant::Drift(p1) => {
            if !(p1 > 0.25 && p1 <= 0.5) {
                return Err(HydroError::BadExperiment(format!(
                    "diagonal drift needs p1 in (1/4, 1/2], got {p1}"
                )));
            }
            diagonal_drift_kernel(p1)
        }
        DiagonalVariant::Lazy(p2) => {
            if !(p2 > 0.0 && p2 <= 0.5) {
                return Err(HydroError::BadExperiment(format!(
                    "lazy diagonal needs p2 in (0, 1/2], got {p2}"
                )));
            }
            diagonal_lazy_kernel(p2)
        }
    };
    let max_j = *js.last().unwrap();
    if half_window < 2 || max_j > half_window - 2 {
        return Err(HydroError::BadExperiment(format!(
            "window half-width {half_window} cannot hold the j = {max_j} band"
        )));
    }
    let window =
        Window::boxed(vec![-half_window; 2], vec![half_window - 1; 2], Boundary::Closed)?;
    let coords: Vec<(i64, i64)> = (0..window.len())
        .map(|i| {
            let z = window.site_at(i);
            (z[0], z[1])
        })
        .collect();
    let initial = Configuration::from_predicate(window.clone(), |z| z[0] >= 0 && z[1] >= 0);
    let init_words: Vec<u64> = initial.occupancy_words().to_vec();

    let snaps = replicate_series(
        &kernel,
        times,
        replicates,
        seed,
        0,
        |_clock| Ok(initial.clone()),
        |_, cfg| {
            let mut band = vec![false; js.len()];
            let mut arm = vec![false; js.len()];
            for idx in cfg.particle_sites() {
                let (z1, z2) = coords[idx];
                let s = z1 + z2;
                for (k, &j) in js.iter().enumerate() {
                    if s <= j {
                        band[k] = true;
                        if z1 < -j || z2 < -j {
                            arm[k] = true;
                        }
                    }
                }
            }
            QuadSnap { band, arm, unchanged: cfg.occupancy_words() == &init_words[..] }
        },
    )?;

    let reps = snaps.len() as f64;
    let frac = |pick: &dyn Fn(&QuadSnap) -> &Vec<bool>| -> Vec<Vec<f64>> {
        (0..times.len())
            .map(|ti| {
                (0..js.len())
                    .map(|k| {
                        snaps.iter().filter(|row| pick(&row[ti])[k]).count() as f64 / reps
                    })
                    .collect()
            })
            .collect()
    };
    let band_probability = frac(&|s: &QuadSnap| &s.band);
    let arm_probability = frac(&|s: &QuadSnap| &s.arm);
    let frozen = snaps.iter().all(|row| row.iter().all(|s| s.unchanged));

    let trends: Vec<BandTrend> = js
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let series: Vec<f64> = band_probability.iter().map(|row| row[k]).collect();
            let t = mann_kendall(&series);
            BandTrend { j, z: t.z, decreasing: t.decreasing_at(0.95) }
        })
        .collect();

    let mut fit_j = Vec::new();
    let mut fit_ln = Vec::new();
    for (k, &j) in js.iter().enumerate() {
        let peak = arm_probability.iter().map(|row| row[k]).fold(0.0, f64::max);
        if peak > 0.0 && peak < 1.0 {
            fit_j.push(j as f64);
            fit_ln.push(peak.ln());
        }
    }
    let envelope_base = if fit_j.len() >= 2 {
        Some((3.0 * linear_fit(&fit_j, &fit_ln).slope).exp())
    } else {
        None
    };

    Ok(QuadrantDecayReport {
        js: js.to_vec(),
        times: times.to_vec(),
        band_probability,
        arm_probability,
        trends,
        envelope_base,
        frozen,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConvergenceReport {
    pub times: Vec<f64>,
    /// Fitted `c` of the exponential family at each time.
    pub fitted_c: Vec<f64>,
    /// Sup of `|marginal - alpha_c|` over sites at least `interior_margin`
    /// from every window face.
    pub residual_interior: Vec<f64>,
    /// Same sup over the whole window, boundary layers included.
    pub residual_full: Vec<f64>,
    /// Expected particle count in the far tail `<x, v> <= -ln(c) - 3|v|`.
    pub blocking_mass: Vec<f64>,
    pub interior_margin: i64,
}

/// Runs a balanced kernel from a step profile between 0/1 reservoirs facing
/// along `v` and fits the marginal field to the exponential stationary
/// family `alpha_c(x) = c e^{<x,v>} / (1 + c e^{<x,v>})` at each time.
/// Periodic on axes orthogonal to `v`, reservoirs on the rest.
#[allow(clippy::too_many_arguments)]
pub fn profile_convergence_experiment(
    kernel: &LatticeKernel,
    v: &ExponentVector,
    half_widths: &[i64],
    times: &[f64],
    initial: &DensityProfile,
    interior_margin: i64,
    replicates: u32,
    seed: u64,
) -> Result<ProfileConvergenceReport, HydroError> {
    let d = kernel.dim();
    if v.components().len() != d || half_widths.len() != d {
        return Err(HydroError::BadExperiment(format!(
            "direction and window must both be {d}-dimensional"
        )));
    }
    if half_widths.iter().any(|&h| h < 1) {
        return Err(HydroError::BadExperiment("window half-widths must be positive".into()));
    }
    check_times(times)?;
    if interior_margin < 0 {
        return Err(HydroError::BadExperiment("interior margin must be nonnegative".into()));
    }
    if replicates == 0 {
        return Err(HydroError::BadExperiment("no replicates requested".into()));
    }
    initial.validate()?;
    if !exponent_balance(kernel, v, BALANCE_TOL) {
        return Err(HydroError::BadExperiment(
            "kernel does not balance along the requested direction".into(),
        ));
    }
    let step = DensityProfile::StepV { left: 0.0, right: 1.0, v: v.clone(), threshold: 0.0 };
    let boundary: Vec<Boundary> = v
        .components()
        .iter()
        .map(|&vi| {
            if vi == 0.0 {
                Boundary::Periodic
            } else {
                Boundary::Reservoir(step.clone())
            }
        })
        .collect();
    let lower: Vec<i64> = half_widths.iter().map(|&h| -h).collect();
    let upper: Vec<i64> = half_widths.to_vec();
    let window = Window::new(lower.clone(), upper.clone(), boundary)?;
    let sites = window.len();
    let dotv: Vec<f64> = (0..sites).map(|i| v.dot(&window.site_at(i))).collect();
    let interior: Vec<bool> = (0..sites)
        .map(|i| {
            let z = window.site_at(i);
            z.iter()
                .zip(lower.iter().zip(&upper))
                .all(|(zi, (l, u))| zi - l >= interior_margin && u - zi >= interior_margin)
        })
        .collect();
    if !interior.iter().any(|&b| b) {
        return Err(HydroError::BadExperiment(
            "interior margin leaves no sites to evaluate".into(),
        ));
    }

    let snaps = replicate_series(
        kernel,
        times,
        replicates,
        seed,
        0,
        |clock| sample_product(initial, &window, clock.rng()),
        |_, cfg| (0..sites).map(|i| cfg.occupied(i)).collect::<Vec<bool>>(),
    )?;
    let reps = snaps.len() as f64;

    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut fitted_c = Vec::with_capacity(times.len());
    let mut residual_interior = Vec::with_capacity(times.len());
    let mut residual_full = Vec::with_capacity(times.len());
    let mut blocking_mass = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let marg: Vec<f64> = (0..sites)
            .map(|i| snaps.iter().filter(|row| row[ti][i]).count() as f64 / reps)
            .collect();
        let sse = |lnc: f64| -> f64 {
            (0..sites)
                .filter(|&i| interior[i])
                .map(|i| {
                    let r = marg[i] - logistic(dotv[i] + lnc);
                    r * r
                })
                .sum()
        };
        let lnc = golden_min(sse, -12.0, 12.0, 90);
        let sup = |restrict: bool| -> f64 {
            (0..sites)
                .filter(|&i| !restrict || interior[i])
                .map(|i| (marg[i] - logistic(dotv[i] + lnc)).abs())
                .fold(0.0, f64::max)
        };
        fitted_c.push(lnc.exp());
        residual_interior.push(sup(true));
        residual_full.push(sup(false));
        let cutoff = -lnc - 3.0 * v.norm();
        blocking_mass.push(
            (0..sites).filter(|&i| dotv[i] <= cutoff).map(|i| marg[i]).sum::<f64>(),
        );
    }
    Ok(ProfileConvergenceReport {
        times: times.to_vec(),
        fitted_c,
        residual_interior,
        residual_full,
        blocking_mass,
        interior_margin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontDriftReport {
    pub times: Vec<f64>,
    /// Interpolated position of the half-density level, in sites along the
    /// unit direction of `v`.
    pub front_position: Vec<f64>,
    /// Inverse slope of the fitted transition profile at each time.
    pub width: Vec<f64>,
    pub front_speed: f64,
    pub width_rate: f64,
    /// `2 |<m, v>| / |v|`: the spread rate of the macroscopic fan.
    pub predicted_width_rate: f64,
}

/// A 0/1 step along `v` facing against the mean displacement does not hold:
/// it spreads as a fan. Tracks the half-density front and the transition
/// width over time on a closed window (periodic on axes orthogonal to `v`).
pub fn front_drift_experiment(
    kernel: &LatticeKernel,
    v: &ExponentVector,
    half_widths: &[i64],
    times: &[f64],
    replicates: u32,
    seed: u64,
) -> Result<FrontDriftReport, HydroError> {
    let d = kernel.dim();
    if v.components().len() != d || half_widths.len() != d {
        return Err(HydroError::BadExperiment(format!(
            "direction and window must both be {d}-dimensional"
        )));
    }
    if half_widths.iter().any(|&h| h < 1) {
        return Err(HydroError::BadExperiment("window half-widths must be positive".into()));
    }
    check_times(times)?;
    if times.len() < 2 || times[0] <= 0.0 {
        return Err(HydroError::BadExperiment(
            "need at least two strictly positive times to fit rates".into(),
        ));
    }
    if replicates == 0 {
        return Err(HydroError::BadExperiment("no replicates requested".into()));
    }
    let m = kernel.mean_vector();
    let mv: f64 = m.iter().zip(v.components()).map(|(a, b)| a * b).sum();
    if mv >= 0.0 {
        return Err(HydroError::BadExperiment(format!(
            "the step must face against the mean drift; <m, v> = {mv:.4} >= 0"
        )));
    }
    let vnorm = v.norm();
    let predicted_width_rate = 2.0 * mv.abs() / vnorm;

    let step = DensityProfile::StepV { left: 0.0, right: 1.0, v: v.clone(), threshold: 0.0 };
    let boundary: Vec<Boundary> = v
        .components()
        .iter()
        .map(|&vi| if vi == 0.0 { Boundary::Periodic } else { Boundary::Closed })
        .collect();
    let lower: Vec<i64> = half_widths.iter().map(|&h| -h).collect();
    let upper: Vec<i64> = half_widths.to_vec();
    let window = Window::new(lower, upper, boundary)?;
    let sites = window.len();

    // Sites collapse onto integer bins along the unit direction of v.
    let bin_of: Vec<i64> = (0..sites)
        .map(|i| (v.dot(&window.site_at(i)) / vnorm).round() as i64)
        .collect();
    let bin_min = *bin_of.iter().min().unwrap();
    let bin_max = *bin_of.iter().max().unwrap();
    let nbins = (bin_max - bin_min + 1) as usize;
    let mut bin_sites = vec![0u64; nbins];
    for &b in &bin_of {
        bin_sites[(b - bin_min) as usize] += 1;
    }

    let snaps = replicate_series(
        kernel,
        times,
        replicates,
        seed,
        0,
        |clock| sample_product(&step, &window, clock.rng()),
        |_, cfg| {
            let mut counts = vec![0u32; nbins];
            for idx in cfg.particle_sites() {
                counts[(bin_of[idx] - bin_min) as usize] += 1;
            }
            counts
        },
    )?;
    let reps = snaps.len() as f64;

    let mut front_position = Vec::with_capacity(times.len());
    let mut width = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let density: Vec<f64> = (0..nbins)
            .map(|b| {
                let total: f64 =
                    snaps.iter().map(|row| row[ti][b] as f64).sum();
                total / (reps * bin_sites[b] as f64)
            })
            .collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in 0..nbins {
            if density[b] >= 0.15 && density[b] <= 0.85 {
                xs.push((bin_min + b as i64) as f64);
                ys.push(density[b]);
            }
        }
        if xs.len() < 2 {
            return Err(HydroError::BadExperiment(format!(
                "transition region too narrow to fit at time {t}; use later times or \
                 more replicates"
            )));
        }
        let fit = linear_fit(&xs, &ys);
        if fit.slope <= 0.0 {
            return Err(HydroError::BadExperiment(format!(
                "transition profile is not increasing at time {t}"
            )));
        }
        front_position.push((0.5 - fit.intercept) / fit.slope);
        width.push(1.0 / fit.slope);
    }
    let front_speed = linear_fit(times, &front_position).slope;
    let width_rate = linear_fit(times, &width).slope;
    Ok(FrontDriftReport {
        times: times.to_vec(),
        front_position,
        width,
        front_speed,
        width_rate,
        predicted_width_rate,
    })
}

/// `integral of u(time, .) over the block` by nested adaptive quadrature of
/// the closed-form line solutions.
pub fn block_target(
    profile: &MacroProfile,
    m_vec: &[f64],
    time: f64,
    block: &MacroBlock,
) -> Result<f64, HydroError> {
    if m_vec.len() != block.dim() {
        return Err(HydroError::BadExperiment(
            "drift and block dimensions disagree".into(),
        ));
    }
    let mut point = vec![0.0; block.dim()];
    let mut err = None;
    let value = integrate_axes(profile, m_vec, time, block, &mut point, 0, &mut err);
    match err {
        Some(e) => Err(e.into()),
        None => Ok(value),
    }
}

fn integrate_axes(
    profile: &MacroProfile,
    m_vec: &[f64],
    time: f64,
    block: &MacroBlock,
    point: &mut Vec<f64>,
    axis: usize,
    err: &mut Option<BurgersError>,
) -> f64 {
    let a = block.lower[axis];
    let b = block.upper[axis];
    let last = axis + 1 == block.dim();
    let mut f = |y: f64| -> f64 {
        point[axis] = y;
        if last {
            match reduce_dim(profile, m_vec, time, point) {
                Ok(v) => v,
                Err(e) => {
                    if err.is_none() {
                        *err = Some(e);
                    }
                    0.0
                }
            }
        } else {
            integrate_axes(profile, m_vec, time, block, point, axis + 1, err)
        }
    };
    adaptive_simpson(&mut f, a, b, QUADRATURE_TOL)
}

fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    simpson_refine(f, a, b, fa, fm, fb, simpson_rule(a, b, fa, fm, fb), tol, QUADRATURE_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine(
    f: &mut dyn FnMut(f64) -> f64,
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
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Product sample of the scaled profile: site `z` occupied with probability
/// `u0(z/n)`.
fn sample_macro(
    profile: &MacroProfile,
    n: u32,
    window: &Window,
    rng: &mut impl Rng,
) -> Configuration {
    let nf = n as f64;
    let mut x = vec![0.0; window.dim()];
    Configuration::from_predicate(window.clone(), |z| {
        for (xi, zi) in x.iter_mut().zip(z) {
            *xi = *zi as f64 / nf;
        }
        rng.gen::<f64>() < profile.value_at(&x)
    })
}

/// Runs `replicates` independent trajectories, recording one value per entry
/// of the nondecreasing `times` list. Replicate `i` runs on stream
/// `(seed, stream_offset + i)`; rows come back in replicate order, so the
/// result does not depend on scheduling.
fn replicate_series<T, I, R>(
    kernel: &LatticeKernel,
    times: &[f64],
    replicates: u32,
    seed: u64,
    stream_offset: u64,
    init: I,
    record: R,
) -> Result<Vec<Vec<T>>, HydroError>
where
    T: Send,
    I: Fn(&mut SimClock) -> Result<Configuration, DynError> + Sync,
    R: Fn(usize, &Configuration) -> T + Sync,
{
    let rows = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<Vec<T>, DynError> {
            let mut clock = SimClock::new(seed, stream_offset + rep as u64);
            let mut cfg = init(&mut clock)?;
            let mut row = Vec::with_capacity(times.len());
            for (i, &t) in times.iter().enumerate() {
                evolve(&mut cfg, kernel, t, &mut clock)?;
                row.push(record(i, &cfg));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows)
}

fn boxed_with_margin(
    lo: &[i64],
    hi: &[i64],
    margin: i64,
    b: Boundary,
) -> Result<Window, HydroError> {
    let wl: Vec<i64> = lo.iter().map(|c| c - margin).collect();
    let wu: Vec<i64> = hi.iter().map(|c| c + margin).collect();
    let mut sites: u128 = 1;
    for (l, u) in wl.iter().zip(&wu) {
        sites = sites.saturating_mul((u - l + 1) as u128);
    }
    if sites > MAX_WINDOW_SITES as u128 {
        return Err(HydroError::BadExperiment(format!(
            "window of {sites} sites exceeds the {MAX_WINDOW_SITES}-site budget; shrink \
             the block, the horizon, or the scale"
        )));
    }
    Ok(Window::boxed(wl, wu, b)?)
}

fn check_times(times: &[f64]) -> Result<(), HydroError> {
    if times.is_empty() {
        return Err(HydroError::BadExperiment("no times requested".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(HydroError::BadExperiment("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|p| p[1] < p[0]) {
        return Err(HydroError::BadExperiment("times must be nondecreasing".into()));
    }
    Ok(())
}

/// Golden-section minimizer; assumes `f` is unimodal on `[a, b]`.
fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: u32) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
