//! Product measures and their stationarity structure.
//!
//! A product measure is described by a density field `alpha(x)` with odds
//! `pi(x) = alpha(x)/(1 - alpha(x))`. For a finite-vertex kernel, the measure
//! is stationary for the exclusion process exactly when, after partitioning
//! the sites into classes of equal density,
//!
//! (a) within each class the outgoing and incoming rate sums agree at every
//!     site, and
//! (b) across classes the odds-weighted rates balance pairwise:
//!     `pi(x) p(x,y) = pi(y) p(y,x)`.
//!
//! Reversibility is the pairwise balance applied to every pair regardless of
//! class, and implies stationarity.

pub mod trees;

use crate::kernels::{ExponentVector, GraphKernel};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("density {alpha} at site index {site} outside (0,1); odds undefined")]
    PiUndefined { site: usize, alpha: f64 },
    #[error("density {0} outside [0,1]")]
    DensityOutOfRange(f64),
    #[error("profile parameter invalid: {0}")]
    BadParameter(String),
    #[error("alpha table has {got} entries, kernel has {want} sites")]
    TableSizeMismatch { got: usize, want: usize },
}

/// A subset of `Z^d` given in closed form, used for indicator density
/// profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// All coordinates nonnegative.
    Quadrant,
    /// Sites with `<x, normal> >= min` (integer inner product).
    HalfSpace { normal: Vec<i64>, min: i64 },
    /// An explicit finite site list.
    FiniteSet(Vec<Vec<i64>>),
}

impl Region {
    pub fn contains(&self, x: &[i64]) -> bool {
        match self {
            Region::Quadrant => x.iter().all(|c| *c >= 0),
            Region::HalfSpace { normal, min } => {
                let dot: i64 = normal.iter().zip(x).map(|(n, c)| n * c).sum();
                dot >= *min
            }
            Region::FiniteSet(sites) => sites.iter().any(|s| s == x),
        }
    }
}

/// Site-density field `alpha(x)` in one of the closed forms the experiments
/// need. Callers validate once via [`DensityProfile::validate`] before use.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityProfile {
    /// `alpha(x) = rho` everywhere.
    Constant(f64),
    /// `alpha(x) = c e^{<x,v>} / (1 + c e^{<x,v>})`: the exponential family
    /// whose odds are `pi(x) = c e^{<x,v>}`.
    ExponentialC { c: f64, v: ExponentVector },
    /// Two-level step across the hyperplane `<x,v> = threshold`: density
    /// `right` on and above it, `left` below.
    StepV { left: f64, right: f64, v: ExponentVector, threshold: f64 },
    /// Explicit finite table. Evaluation outside the table is a caller
    /// error and panics; validate windows against the domain first.
    Table(BTreeMap<Vec<i64>, f64>),
    /// `alpha = inside` on the region, `outside` off it.
    IndicatorSet { region: Region, inside: f64, outside: f64 },
}

impl DensityProfile {
    pub fn validate(&self) -> Result<(), MeasureError> {
        let check01 = |d: f64| {
            if (0.0..=1.0).contains(&d) {
                Ok(())
            } else {
                Err(MeasureError::DensityOutOfRange(d))
            }
        };
        match self {
            DensityProfile::Constant(rho) => check01(*rho),
            DensityProfile::ExponentialC { c, .. } => {
                if *c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(MeasureError::BadParameter(format!(
                        "exponential profile needs c > 0, got {c}"
                    )))
                }
            }
            DensityProfile::StepV { left, right, threshold, .. } => {
                check01(*left)?;
                check01(*right)?;
                if threshold.is_finite() {
                    Ok(())
                } else {
                    Err(MeasureError::BadParameter("non-finite threshold".into()))
                }
            }
            DensityProfile::Table(map) => {
                if map.is_empty() {
                    return Err(MeasureError::BadParameter("empty table".into()));
                }
                map.values().try_for_each(|d| check01(*d))
            }
            DensityProfile::IndicatorSet { inside, outside, .. } => {
                check01(*inside)?;
                check01(*outside)
            }
        }
    }

    /// Evaluate the density at a site.
    pub fn alpha(&self, x: &[i64]) -> f64 {
        match self {
            DensityProfile::Constant(rho) => *rho,
            DensityProfile::ExponentialC { c, v } => logistic(v.dot(x) + c.ln()),
            DensityProfile::StepV { left, right, v, threshold } => {
                if v.dot(x) >= *threshold {
                    *right
                } else {
                    *left
                }
            }
            DensityProfile::Table(map) => *map
                .get(x)
                .unwrap_or_else(|| panic!("site {x:?} outside table profile domain")),
            DensityProfile::IndicatorSet { region, inside, outside } => {
                if region.contains(x) {
                    *inside
                } else {
                    *outside
                }
            }
        }
    }
}

/// Numerically stable `1 / (1 + e^{-z})`.
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Odds `pi = alpha/(1-alpha)` of the profile at a site; densities 0 and 1
/// have no odds and must be handled by the caller (frozen sites).
pub fn pi_of(profile: &DensityProfile, x: &[i64]) -> Result<f64, MeasureError> {
    let a = profile.alpha(x);
    pi_from_alpha(a, 0)
}

fn pi_from_alpha(a: f64, site: usize) -> Result<f64, MeasureError> {
    if a <= 0.0 || a >= 1.0 {
        return Err(MeasureError::PiUndefined { site, alpha: a });
    }
    Ok(a / (1.0 - a))
}

/// Outcome of the finite-kernel stationarity test.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityVerdict {
    pub stationary: bool,
    pub reversible: bool,
    /// Site indices grouped by equal density (within the check tolerance).
    pub partition: Vec<Vec<usize>>,
    /// Sites excluded from the conditions (truncation boundary).
    pub exempted: Vec<usize>,
}

/// Decide stationarity and reversibility of the product measure with
/// densities `alpha` under the finite kernel `k`. All sites participate.
pub fn stationarity_check(
    k: &GraphKernel,
    alpha: &[f64],
    tol: f64,
) -> Result<StationarityVerdict, MeasureError> {
    stationarity_check_exempting(k, alpha, &[], tol)
}

/// [`stationarity_check`] with a set of exempted sites: rows of exempted
/// sites are not required to balance, and pairs touching an exempted site
/// are skipped. Used for depth-truncated trees, where boundary vertices
/// lost edges and cannot satisfy the interior conditions.
pub fn stationarity_check_exempting(
    k: &GraphKernel,
    alpha: &[f64],
    exempted: &[usize],
    tol: f64,
) -> Result<StationarityVerdict, MeasureError> {
    let n = k.n();
    if alpha.len() != n {
        return Err(MeasureError::TableSizeMismatch { got: alpha.len(), want: n });
    }
    let pi: Vec<f64> = alpha
        .iter()
        .enumerate()
        .map(|(i, a)| pi_from_alpha(*a, i))
        .collect::<Result<_, _>>()?;
    let is_exempt = |i: usize| exempted.contains(&i);

    // Partition by density: sort, then cut where the gap exceeds tol.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| alpha[i].partial_cmp(&alpha[j]).unwrap().then(i.cmp(&j)));
    let mut partition: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match partition.last_mut() {
            Some(class) if (alpha[i] - alpha[*class.last().unwrap()]).abs() <= tol => {
                class.push(i)
            }
            _ => partition.push(vec![i]),
        }
    }
    let mut class_of = vec![0usize; n];
    for (ci, class) in partition.iter().enumerate() {
        for &i in class {
            class_of[i] = ci;
        }
    }

    let near = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);

    // (a) within-class flux balance at every non-exempt site.
    let mut stationary = true;
    'cond_a: for class in &partition {
        for &x in class {
            if is_exempt(x) {
                continue;
            }
            let out: f64 = class.iter().map(|&y| k.rate(x, y)).sum();
            let inc: f64 = class.iter().map(|&y| k.rate(y, x)).sum();
            if !near(out, inc) {
                stationary = false;
                break 'cond_a;
            }
        }
    }

    // (b) cross-class odds-weighted balance; also the full reversibility
    // scan (every pair, same-class included).
    let mut reversible = true;
    for x in 0..n {
        for y in (x + 1)..n {
            if is_exempt(x) || is_exempt(y) {
                continue;
            }
            let balanced = near(pi[x] * k.rate(x, y), pi[y] * k.rate(y, x));
            if !balanced {
                reversible = false;
                if class_of[x] != class_of[y] {
                    stationary = false;
                }
            }
        }
    }

    Ok(StationarityVerdict {
        stationary,
        reversible,
        partition,
        exempted: exempted.to_vec(),
    })
}

/// Structured odds families whose extremality among stationary measures is
/// decided by the tail divergence of `sum pi(x) / (1 + pi(x))^2`.
#[derive(Debug, Clone, PartialEq)]
pub enum PiFamily {
    /// Constant odds on an infinite site set.
    Constant { pi: f64 },
    /// `pi(x) = pi0 e^{<x,v>}` on `Z^dim`.
    LatticeExponential { dim: usize, v: ExponentVector, pi0: f64 },
    /// `pi(x_n) = pi0 ratio^n` along a two-sided line.
    LineGeometric { ratio: f64, pi0: f64 },
    /// `pi = pi0 lambda^n` at depth `n` of the rooted binary tree
    /// (2^n vertices at depth n).
    RootedTreeGeometric { lambda: f64, pi0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremality {
    Extremal,
    NotExtremal,
}

/// Relative slack applied at the boundary of the extremality interval so
/// that parameters specified in closed form (e.g. lambda exactly 2 reached
/// through floating-point arithmetic) classify as inside.
const EXTREMALITY_EDGE_TOL: f64 = 1e-9;

/// Decide extremality of the stationary product measure by the closed-form
/// tail test of the series `sum_x pi(x)/(1+pi(x))^2`.
///
/// - constant positive odds: infinitely many equal positive terms, divergent.
/// - geometric odds on a line: both tails decay geometrically, convergent.
/// - exponential odds on `Z^d`, `d >= 2`: level sets of `<x,v>` grow
///   polynomially of degree `d-1 >= 1`, beating the geometric decay in the
///   level, divergent.
/// - rooted binary tree with depth ratio `lambda`: depth-n contribution is
///   `2^n lambda^n / (1+lambda^n pi0)^2 ~ (2 lambda)^n` for `lambda < 1`
///   and `(2/lambda)^n` for `lambda > 1`, divergent exactly when
///   `lambda` lies in `[1/2, 2]`.
pub fn extremality(family: &PiFamily) -> Result<Extremality, MeasureError> {
    let positive = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(MeasureError::BadParameter(format!("{what} must be positive, got {v}")))
        }
    };
    match family {
        PiFamily::Constant { pi } => {
            positive(*pi, "constant odds")?;
            Ok(Extremality::Extremal)
        }
        PiFamily::LatticeExponential { dim, v, pi0 } => {
            positive(*pi0, "odds scale")?;
            if *dim == 0 || v.components().len() != *dim {
                return Err(MeasureError::BadParameter(
                    "exponent dimension mismatch".into(),
                ));
            }
            if v.norm() <= EXTREMALITY_EDGE_TOL {
                return Ok(Extremality::Extremal); // constant odds
            }
            Ok(if *dim >= 2 { Extremality::Extremal } else { Extremality::NotExtremal })
        }
        PiFamily::LineGeometric { ratio, pi0 } => {
            positive(*ratio, "ratio")?;
            positive(*pi0, "odds scale")?;
            if (ratio - 1.0).abs() <= EXTREMALITY_EDGE_TOL {
                Ok(Extremality::Extremal)
            } else {
                Ok(Extremality::NotExtremal)
            }
        }
        PiFamily::RootedTreeGeometric { lambda, pi0 } => {
            positive(*lambda, "lambda")?;
            positive(*pi0, "odds scale")?;
            let inside = *lambda >= 0.5 * (1.0 - EXTREMALITY_EDGE_TOL)
                && *lambda <= 2.0 * (1.0 + EXTREMALITY_EDGE_TOL);
            Ok(if inside { Extremality::Extremal } else { Extremality::NotExtremal })
        }
    }
}

/// Depth ratio of the rooted-binary-tree stationary odds when the two
/// upward rates are `q` each and the downward rate is `1 - 2q`.
pub fn rooted_tree_lambda(q: f64) -> Result<f64, MeasureError> {
    if !(q > 0.0 && q < 0.5) {
        return Err(MeasureError::BadParameter(format!(
            "upward rate must lie in (0, 1/2), got {q}"
        )));
    }
    Ok(q / (1.0 - 2.0 * q))
}
