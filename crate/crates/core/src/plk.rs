//! Exponent inequalities of the form
//!
//! `dist(0, ∂L(p)) ≥ t^q / (M·(1 − q))`, `t = L(p) − L_ref ∈ (0, η)`,
//!
//! inside a box around a reference point: pointwise checks, grid
//! verification, an empirical estimator for `q`, and the calculus rules
//! that combine exponents.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{evaluate, ObjectiveSpec, Point};
use crate::scalar::Scalar;

/// Claimed exponent inequality around `reference_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct PlkCertificate<T> {
    pub reference_point: Point<T>,
    pub reference_value: T,
    pub q: T,
    #[serde(rename = "M")]
    pub m: T,
    pub eta: T,
    /// Half-width of the box (infinity-norm ball) the claim covers.
    pub radius: T,
}

impl<T: Scalar> PlkCertificate<T> {
    pub fn new(reference_point: Point<T>, reference_value: T, q: T, m: T, eta: T, radius: T) -> Result<Self> {
        if !(q >= T::zero() && q < T::one()) {
            return Err(Error::usage(format!("exponent q must lie in [0, 1), got {q}")));
        }
        if !(m > T::zero() && eta > T::zero() && radius > T::zero()) {
            return Err(Error::usage("M, eta and radius must be positive"));
        }
        if !(m.is_finite() && radius.is_finite() && reference_value.is_finite()) {
            return Err(Error::usage("certificate constants must be finite"));
        }
        Ok(PlkCertificate {
            reference_point,
            reference_value,
            q,
            m,
            eta,
            radius,
        })
    }

    /// Same claim with a different multiplier.
    pub fn with_multiplier(&self, m: T) -> Result<Self> {
        Self::new(self.reference_point.clone(), self.reference_value, self.q, m, self.eta, self.radius)
    }

    /// Smallest admissible subdifferential distance at gap `t`.
    pub fn threshold(&self, t: T) -> T {
        t.powf(self.q) / (self.m * (T::one() - self.q))
    }
}

/// Outcome of one pointwise check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum PlkCheck {
    /// `margin = dist − threshold ≥ 0`.
    Holds { margin: f64 },
    Violated { margin: f64, dist: f64, threshold: f64 },
    /// Outside the box or outside the level window.
    Vacuous,
    /// No subdifferential model at this point (masked locus or none given).
    Unavailable,
}

pub fn plk_inequality_holds<T: Scalar>(obj: &ObjectiveSpec<T>, cert: &PlkCertificate<T>, p: &Point<T>) -> Result<PlkCheck> {
    obj.check_dims(p)?;
    obj.check_dims(&cert.reference_point)?;
    if p.max_abs_diff(&cert.reference_point) > cert.radius {
        return Ok(PlkCheck::Vacuous);
    }
    let Some(value) = evaluate(obj, p)?.finite() else {
        return Ok(PlkCheck::Vacuous);
    };
    let t = value - cert.reference_value;
    if !(t > T::zero() && t < cert.eta) {
        return Ok(PlkCheck::Vacuous);
    }
    let Some(dist) = obj.subdiff_dist_at(p) else {
        return Ok(PlkCheck::Unavailable);
    };
    let threshold = cert.threshold(t);
    let margin = (dist - threshold).as_f64();
    Ok(if margin >= 0.0 {
        PlkCheck::Holds { margin }
    } else {
        PlkCheck::Violated {
            margin,
            dist: dist.as_f64(),
            threshold: threshold.as_f64(),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub point: Vec<f64>,
    /// `dist(0, ∂L)` at the point.
    pub lhs: f64,
    /// `t^q / (M(1 − q))`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub grid_n_per_axis: usize,
    /// Non-vacuous points where the inequality was evaluated.
    pub points_checked: u64,
    /// In-window points without a subdifferential model (masked loci).
    pub skipped_nonsmooth: u64,
    pub vacuous: u64,
    pub violation_count: u64,
    /// The first violations in lexicographic point order, at most
    /// [`MAX_LISTED_VIOLATIONS`].
    pub violations: Vec<Violation>,
    /// Smallest `dist − threshold` over checked points; `None` if none were.
    pub worst_margin: Option<f64>,
}

impl GridReport {
    pub fn verified(&self) -> bool {
        self.violation_count == 0
    }
}

pub const MAX_LISTED_VIOLATIONS: usize = 100;
pub const MAX_GRID_POINTS: u64 = 100_000_000;

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

#[derive(Default)]
struct GridAcc {
    checked: u64,
    skipped: u64,
    vacuous: u64,
    violation_count: u64,
    worst: Option<f64>,
    violations: Vec<Violation>,
}

impl GridAcc {
    fn merge(mut self, other: GridAcc) -> GridAcc {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.vacuous += other.vacuous;
        self.violation_count += other.violation_count;
        self.worst = match (self.worst, other.worst) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.violations.extend(other.violations);
        self.violations.sort_by(|a, b| cmp_points(&a.point, &b.point));
        self.violations.truncate(MAX_LISTED_VIOLATIONS);
        self
    }
}

/// Coordinates of a half-cell-offset grid with `n` points per axis on
/// `[c − r, c + r]`: `c − r + (2i + 1)·r/n`. Odd `n` puts a node on `c`.
fn grid_coordinate<T: Scalar>(c: T, r: T, i: usize, n: usize) -> T {
    c - r + T::from_usize_lossy(2 * i + 1) * r / T::from_usize_lossy(n)
}

/// Checks the certificate at every point of a `grid_n_per_axis`-per-axis
/// grid over its box. Points on masked loci are counted, not checked.
pub fn verify_on_grid<T: Scalar>(obj: &ObjectiveSpec<T>, cert: &PlkCertificate<T>, grid_n_per_axis: usize) -> Result<GridReport> {
    obj.check_dims(&cert.reference_point)?;
    if grid_n_per_axis == 0 {
        return Err(Error::usage("grid needs at least one point per axis"));
    }
    let total = grid_total(obj.n + obj.m, grid_n_per_axis)?;
    let center = cert.reference_point.concat();
    let n = obj.n;

    let acc = (0..total)
        .into_par_iter()
        .try_fold(GridAcc::default, |mut acc, idx| -> Result<GridAcc> {
            let mut rem = idx;
            let coords: Vec<T> = center
                .iter()
                .map(|&c| {
                    let i = (rem % grid_n_per_axis as u64) as usize;
                    rem /= grid_n_per_axis as u64;
                    grid_coordinate(c, cert.radius, i, grid_n_per_axis)
                })
                .collect();
            let p = Point::from_concat(&coords, n)?;
            match plk_inequality_holds(obj, cert, &p)? {
                PlkCheck::Holds { margin } => {
                    acc.checked += 1;
                    acc.worst = Some(acc.worst.map_or(margin, |w| w.min(margin)));
                }
                PlkCheck::Violated { margin, dist, threshold } => {
                    acc.checked += 1;
                    acc.violation_count += 1;
                    acc.worst = Some(acc.worst.map_or(margin, |w| w.min(margin)));
                    acc.violations.push(Violation {
                        point: coords.iter().map(|v| v.as_f64()).collect(),
                        lhs: dist,
                        rhs: threshold,
                    });
                    if acc.violations.len() > 4 * MAX_LISTED_VIOLATIONS {
                        acc.violations.sort_by(|a, b| cmp_points(&a.point, &b.point));
                        acc.violations.truncate(MAX_LISTED_VIOLATIONS);
                    }
                }
                PlkCheck::Vacuous => acc.vacuous += 1,
                PlkCheck::Unavailable => acc.skipped += 1,
            }
            Ok(acc)
        })
        .try_reduce(GridAcc::default, |a, b| Ok(a.merge(b)))?;

    let acc = acc.merge(GridAcc::default());
    Ok(GridReport {
        grid_n_per_axis,
        points_checked: acc.checked,
        skipped_nonsmooth: acc.skipped,
        vacuous: acc.vacuous,
        violation_count: acc.violation_count,
        violations: acc.violations,
        worst_margin: acc.worst,
    })
}

fn grid_total(dim: usize, grid_n_per_axis: usize) -> Result<u64> {
    u32::try_from(dim)
        .ok()
        .and_then(|d| (grid_n_per_axis as u64).checked_pow(d))
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or_else(|| {
            Error::usage(format!(
                "grid of {grid_n_per_axis}^{dim} points exceeds the limit of {MAX_GRID_POINTS}"
            ))
        })
}

/// Smallest modeled subdifferential distance on the half-cell grid around
/// `center`, with the number of masked points. `None` when every point is
/// masked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceFloor {
    pub min_dist: Option<f64>,
    pub points_checked: u64,
    pub skipped_nonsmooth: u64,
}

pub fn min_subdiff_dist_on_grid<T: Scalar>(
    obj: &ObjectiveSpec<T>,
    center: &Point<T>,
    radius: T,
    grid_n_per_axis: usize,
) -> Result<DistanceFloor> {
    obj.check_dims(center)?;
    if grid_n_per_axis == 0 {
        return Err(Error::usage("grid needs at least one point per axis"));
    }
    let total = grid_total(obj.n + obj.m, grid_n_per_axis)?;
    let c = center.concat();
    let n = obj.n;
    let (min_dist, checked, skipped) = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<(Option<f64>, u64, u64)> {
            let mut rem = idx;
            let coords: Vec<T> = c
                .iter()
                .map(|&ci| {
                    let i = (rem % grid_n_per_axis as u64) as usize;
                    rem /= grid_n_per_axis as u64;
                    grid_coordinate(ci, radius, i, grid_n_per_axis)
                })
                .collect();
            let p = Point::from_concat(&coords, n)?;
            Ok(match obj.subdiff_dist_at(&p) {
                Some(d) => (Some(d.as_f64()), 1, 0),
                None => (None, 0, 1),
            })
        })
        .try_reduce(
            || (None, 0, 0),
            |a, b| {
                let m = match (a.0, b.0) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
                Ok((m, a.1 + b.1, a.2 + b.2))
            },
        )?;
    Ok(DistanceFloor {
        min_dist,
        points_checked: checked,
        skipped_nonsmooth: skipped,
    })
}

/// Sampling and fitting options for [`estimate_exponent_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions<T> {
    /// `L_ref`; defaults to `L(reference)`.
    pub reference_value: Option<T>,
    /// Upper end of the level window.
    pub eta: T,
    /// Log-radial samples, concentrated near the reference point.
    pub samples: usize,
    /// Uniform grid points per axis; `None` picks about 10⁴ points in total.
    pub grid_per_axis: Option<usize>,
    /// Decades spanned by the log-radial radii.
    pub decades: T,
    pub quantile: f64,
    pub seed: u64,
}

impl<T: Scalar> Default for EstimateOptions<T> {
    fn default() -> Self {
        EstimateOptions {
            reference_value: None,
            eta: T::lit(1e6),
            samples: 10_000,
            grid_per_axis: None,
            decades: T::lit(8.0),
            quantile: 0.05,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub usable_samples: usize,
    pub masked_samples: usize,
    /// Samples outside the window `t ∈ [1e-10, η]` or with zero distance.
    pub out_of_window: usize,
    /// Slope of the lower envelope of `log dist` against `log t`; reported
    /// even when the flat floor suppresses `q_hat`.
    pub envelope_slope: f64,
    pub envelope_intercept: f64,
    /// Share of samples strictly below the fitted envelope.
    pub below_fraction: f64,
    /// Mean absolute residual of the fitted envelope.
    pub mean_abs_residual: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Smallest sampled distance among samples with `t < 1e-4`.
    pub near_min_dist: Option<f64>,
    pub median_dist: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Envelope slope, unless the flat floor makes it meaningless.
    pub q_hat: Option<f64>,
    /// Smallest `M` with no sampled violation at `q_hat`.
    #[serde(rename = "M_hat")]
    pub m_hat: Option<f64>,
    pub flat_floor: bool,
    pub diagnostics: EstimateDiagnostics,
    /// Usable `(t, dist)` pairs, kept for [`EstimateReport::multiplier_for`].
    #[serde(skip)]
    pairs: Vec<(f64, f64)>,
}

impl EstimateReport {
    /// Smallest `M` such that every usable sample satisfies the inequality
    /// with exponent `q`.
    pub fn multiplier_for(&self, q: f64) -> Option<f64> {
        if !(0.0..1.0).contains(&q) {
            return None;
        }
        self.pairs
            .iter()
            .map(|&(t, d)| t.powf(q) / ((1.0 - q) * d))
            .reduce(f64::max)
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Drops the sample pairs, leaving exactly what serializes.
    pub fn without_pairs(mut self) -> Self {
        self.pairs = Vec::new();
        self
    }
}

/// Profiled check loss of a `tau`-quantile line with slope `b`; the
/// intercept is the `tau`-quantile of `y − b·x`.
fn quantile_profile(xs: &[f64], ys: &[f64], b: f64, tau: f64, scratch: &mut Vec<f64>) -> (f64, f64) {
    scratch.clear();
    scratch.extend(xs.iter().zip(ys).map(|(x, y)| y - b * x));
    let k = ((tau * scratch.len() as f64).ceil() as usize).clamp(1, scratch.len()) - 1;
    let (_, &mut a, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
    let loss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - a - b * x;
            if r >= 0.0 {
                tau * r
            } else {
                (tau - 1.0) * r
            }
        })
        .sum();
    (a, loss)
}

/// Linear `tau`-quantile regression of `ys` on `xs`: `(slope, intercept)`.
/// The profiled loss is convex in the slope, so ternary search suffices.
pub fn quantile_regression(xs: &[f64], ys: &[f64], tau: f64) -> (f64, f64) {
    let mut scratch = Vec::with_capacity(xs.len());
    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let l1 = quantile_profile(xs, ys, m1, tau, &mut scratch).1;
        let l2 = quantile_profile(xs, ys, m2, tau, &mut scratch).1;
        if l1 <= l2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let b = (lo + hi) / 2.0;
    let (a, _) = quantile_profile(xs, ys, b, tau, &mut scratch);
    (b, a)
}

/// [`estimate_exponent_with`] with default options and `samples` log-radial
/// draws.
pub fn estimate_exponent<T: Scalar>(obj: &ObjectiveSpec<T>, reference: &Point<T>, box_radius: T, samples: usize) -> Result<EstimateReport> {
    let opts = EstimateOptions {
        samples,
        ..EstimateOptions::default()
    };
    estimate_exponent_with(obj, reference, box_radius, &opts)
}

/// Fits the lower envelope `log dist ≈ q·log t + c` over samples in the box
/// around `reference` and reads off `q_hat`.
///
/// Samples are a uniform grid plus seeded log-radial draws. A flat floor
/// (small `t` but `dist` bounded away from zero) is flagged and suppresses
/// `q_hat` and `M_hat`.
pub fn estimate_exponent_with<T: Scalar>(
    obj: &ObjectiveSpec<T>,
    reference: &Point<T>,
    box_radius: T,
    opts: &EstimateOptions<T>,
) -> Result<EstimateReport> {
    obj.check_dims(reference)?;
    if !(box_radius > T::zero() && box_radius.is_finite()) {
        return Err(Error::usage("box radius must be positive"));
    }
    if !(opts.quantile > 0.0 && opts.quantile < 1.0) {
        return Err(Error::usage("quantile must lie in (0, 1)"));
    }
    let ref_value = match opts.reference_value {
        Some(v) => v,
        None => evaluate(obj, reference)?
            .finite()
            .ok_or_else(|| Error::usage("reference point has L = +inf"))?,
    };
    let dim = obj.n + obj.m;
    if dim == 0 {
        return Err(Error::usage("objective has no coordinates"));
    }
    let center = reference.concat();

    let per_axis = opts
        .grid_per_axis
        .unwrap_or_else(|| (1e4_f64.powf(1.0 / dim as f64).floor() as usize).max(2) | 1);
    let grid_total = (per_axis as u64).checked_pow(dim as u32).filter(|&t| t <= MAX_GRID_POINTS).ok_or_else(|| {
        Error::usage(format!("estimator grid {per_axis}^{dim} is too large"))
    })?;
    let mut points: Vec<Vec<T>> = (0..grid_total)
        .map(|idx| {
            let mut rem = idx;
            center
                .iter()
                .map(|&c| {
                    let i = (rem % per_axis as u64) as usize;
                    rem /= per_axis as u64;
                    grid_coordinate(c, box_radius, i, per_axis)
                })
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ten = T::lit(10.0);
    for _ in 0..opts.samples {
        let dir: Vec<f64> = loop {
            let d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let inf = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if inf > 0.0 {
                break d.into_iter().map(|v| v / inf).collect();
            }
        };
        let r = box_radius * ten.powf(-opts.decades * T::lit(rng.gen::<f64>()));
        points.push(center.iter().zip(&dir).map(|(&c, &u)| c + r * T::lit(u)).collect());
    }

    let n = obj.n;
    let t_lo = T::lit(1e-10);
    let evaluated: Vec<Option<Option<(f64, f64)>>> = points
        .par_iter()
        .map(|coords| -> Result<Option<Option<(f64, f64)>>> {
            let p = Point::from_concat(coords, n)?;
            let Some(v) = evaluate(obj, &p)?.finite() else {
                return Ok(Some(None));
            };
            let Some(d) = obj.subdiff_dist_at(&p) else {
                return Ok(None);
            };
            let t = v - ref_value;
            if t >= t_lo && t <= opts.eta && d > T::zero() && d.is_finite() {
                Ok(Some(Some((t.as_f64(), d.as_f64()))))
            } else {
                Ok(Some(None))
            }
        })
        .collect::<Result<_>>()?;
    let masked_samples = evaluated.iter().filter(|e| e.is_none()).count();
    let pairs: Vec<(f64, f64)> = evaluated.iter().filter_map(|e| e.flatten()).collect();
    let out_of_window = evaluated.len() - masked_samples - pairs.len();
    if pairs.len() < 100 {
        return Err(Error::Estimation(format!(
            "only {} usable samples (need 100); {masked_samples} masked, {out_of_window} outside the window",
            pairs.len()
        )));
    }

    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = quantile_regression(&xs, &ys, opts.quantile);
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    let below_fraction = residuals.iter().filter(|r| **r < 0.0).count() as f64 / residuals.len() as f64;
    let mean_abs_residual = residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64;

    let mut dists: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mid = dists.len() / 2;
    let (_, &mut median_dist, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let near_min_dist = pairs.iter().filter(|p| p.0 < 1e-4).map(|p| p.1).reduce(f64::min);
    let flat_floor = near_min_dist.is_some_and(|d| d > 0.5 * median_dist);

    let t_min = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let mut report = EstimateReport {
        q_hat: None,
        m_hat: None,
        flat_floor,
        diagnostics: EstimateDiagnostics {
            usable_samples: pairs.len(),
            masked_samples,
            out_of_window,
            envelope_slope: slope,
            envelope_intercept: intercept,
            below_fraction,
            mean_abs_residual,
            t_min,
            t_max,
            near_min_dist,
            median_dist,
            seed: opts.seed,
        },
        pairs,
    };
    if !flat_floor {
        report.q_hat = Some(slope);
        report.m_hat = report.multiplier_for(slope);
    }
    Ok(report)
}

/// Exponent of a block-separable sum: the largest block exponent.
pub fn separable_sum_exponent(exponents: &[f64]) -> Result<f64> {
    if exponents.is_empty() {
        return Err(Error::usage("separable sum needs at least one block exponent"));
    }
    if let Some(a) = exponents.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::usage(format!("block exponent {a} outside (0, 1)")));
    }
    Ok(exponents.iter().copied().fold(f64::MIN, f64::max))
}

/// Exponent of `f(x) + (β/2)‖x − y‖²` at `(x̄, x̄)` given exponent `α` of
/// `f` at `x̄`. Only valid for `α ∈ [1/2, 1)`.
pub fn proximal_perturbation_exponent(alpha: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::usage(format!("beta must be positive, got {beta}")));
    }
    if alpha.is_nan() || alpha >= 1.0 {
        return Err(Error::usage(format!("alpha must lie in [1/2, 1), got {alpha}")));
    }
    if alpha < 0.5 {
        return Err(Error::OutOfHypothesis(format!(
            "exponent preservation under a proximal perturbation needs alpha >= 1/2, got {alpha}"
        )));
    }
    Ok(alpha)
}
