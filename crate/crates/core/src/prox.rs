//! Proximal subproblems of the alternating scheme.
//!
//! Each block update is `argmin_u L(u, fixed) + ‖u − center‖²/(2·step)`.
//! Blocks are either solved by a user-supplied closed form or coordinate by
//! coordinate with [`solve_scalar_prox_with`], a global 1-D minimizer built
//! from dense bracketing plus golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockProx, ExtReal, ObjectiveSpec, Point};
use crate::scalar::Scalar;

/// Inverse golden ratio `1/φ`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Tuning for the inner scalar solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverConfig<T> {
    /// Argument tolerance of the returned minimizer.
    pub tol: T,
    /// Number of bracketing cells over the search interval.
    pub cells: usize,
    /// Default search interval is `center ± box_scale·(1 + |center|)`.
    pub box_scale: T,
    /// How many times the interval is doubled after a boundary hit.
    pub box_doublings: u32,
    pub max_golden_iter: usize,
}

impl<T: Scalar> Default for InnerSolverConfig<T> {
    fn default() -> Self {
        InnerSolverConfig {
            tol: T::lit(1e-12).max(T::epsilon() * T::lit(16.0)),
            cells: 2048,
            box_scale: T::lit(10.0),
            box_doublings: 3,
            max_golden_iter: 2000,
        }
    }
}

/// Closed search interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::usage(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn around(center: T, half_width: T) -> Result<Self> {
        Self::new(center - half_width, center + half_width)
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, u: T) -> bool {
        u >= self.lo && u <= self.hi
    }
}

/// Options for [`solve_scalar_prox_with`].
#[derive(Debug, Clone, Copy)]
pub struct ScalarProxOptions<'a, T> {
    pub tol: T,
    pub cells: usize,
    pub max_golden_iter: usize,
    /// Nonsmooth points of `phi`, tried as explicit candidates.
    pub kinks: &'a [T],
}

impl<T: Scalar> ScalarProxOptions<'_, T> {
    pub fn from_config(cfg: &InnerSolverConfig<T>) -> Self {
        ScalarProxOptions {
            tol: cfg.tol,
            cells: cfg.cells,
            max_golden_iter: cfg.max_golden_iter,
            kinks: &[],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    u: T,
    value: ExtReal<T>,
}

/// Equal up to rounding in the prox objective.
fn ties<T: Scalar>(a: ExtReal<T>, b: ExtReal<T>) -> bool {
    match (a, b) {
        (ExtReal::Finite(va), ExtReal::Finite(vb)) => {
            (va - vb).abs() <= T::lit(8.0) * T::epsilon() * va.abs().max(vb.abs()) + T::min_positive_value()
        }
        _ => false,
    }
}

/// Picks the better of two candidates: lower value, then (for values equal up
/// to rounding) closer to `center`, then smaller `u`.
fn better<T: Scalar>(a: Candidate<T>, b: Candidate<T>, center: T) -> Candidate<T> {
    match (a.value, b.value) {
        (ExtReal::PosInf, _) => b,
        (_, ExtReal::PosInf) => a,
        (ExtReal::Finite(va), ExtReal::Finite(vb)) => {
            if ties(a.value, b.value) {
                let da = (a.u - center).abs();
                let db = (b.u - center).abs();
                if da < db || (da == db && a.u <= b.u) {
                    a
                } else {
                    b
                }
            } else if va < vb {
                a
            } else {
                b
            }
        }
    }
}

/// Global minimizer of `phi(u) + (u − center)²/(2·stepsize)` over `interval`.
pub fn solve_scalar_prox<T, F, V>(phi: F, center: T, stepsize: T, interval: Interval<T>, tol: T) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> V,
    V: Into<ExtReal<T>>,
{
    let defaults = InnerSolverConfig::<T>::default();
    let opts = ScalarProxOptions {
        tol,
        ..ScalarProxOptions::from_config(&defaults)
    };
    solve_scalar_prox_with(phi, center, stepsize, interval, &opts)
}

/// [`solve_scalar_prox`] with explicit bracketing and kink options.
///
/// The interval is cut into `cells` cells; every grid-local minimum is
/// refined by golden section inside its two neighbouring cells. The refined
/// points, the kinks and the center itself compete, so the returned value
/// never exceeds the prox objective at `center`. Returns
/// [`Error::BoxTooSmall`] when the winner sits within `tol` of either end.
pub fn solve_scalar_prox_with<T, F, V>(
    phi: F,
    center: T,
    stepsize: T,
    interval: Interval<T>,
    opts: &ScalarProxOptions<'_, T>,
) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> V,
    V: Into<ExtReal<T>>,
{
    validate(center, stepsize, &interval)?;
    if opts.cells < 2 || !(opts.tol > T::zero()) {
        return Err(Error::usage("scalar prox needs cells >= 2 and tol > 0"));
    }
    let two_step = stepsize + stepsize;
    let h = |u: T| -> ExtReal<T> { phi(u).into() + (u - center) * (u - center) / two_step };

    let cells = opts.cells;
    let width = interval.width();
    let node = |i: usize| -> T {
        if i == cells {
            interval.hi
        } else {
            interval.lo + width * T::from_usize_lossy(i) / T::from_usize_lossy(cells)
        }
    };
    let values: Vec<ExtReal<T>> = (0..=cells).map(|i| h(node(i))).collect();

    // Grid-local minima, best few by value.
    const MAX_BRACKETS: usize = 8;
    let mut local: Vec<usize> = (0..=cells)
        .filter(|&i| {
            values[i].is_finite()
                && (i == 0 || values[i] <= values[i - 1])
                && (i == cells || values[i] <= values[i + 1])
        })
        .collect();
    local.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN in prox objective"));
    local.truncate(MAX_BRACKETS);

    let mut best = Candidate {
        u: center,
        value: h(center),
    };
    for &i in &local {
        let a = node(i.saturating_sub(1));
        let b = node((i + 1).min(cells));
        let mut cand = golden_section(&h, a, b, values[i], node(i), opts.max_golden_iter);
        cand = polish(&h, cand, opts.kinks);
        for &kink in opts.kinks.iter().filter(|&&k| k >= a && k <= b) {
            let at_kink = Candidate {
                u: kink,
                value: h(kink),
            };
            if at_kink.value <= cand.value || ties(at_kink.value, cand.value) {
                cand = at_kink;
            }
        }
        best = better(best, cand, center);
    }
    for &kink in opts.kinks.iter().filter(|&&k| interval.contains(k)) {
        best = better(
            best,
            Candidate {
                u: kink,
                value: h(kink),
            },
            center,
        );
    }

    if !best.value.is_finite() {
        return Err(Error::Domain("prox objective is +inf on the whole interval".into()));
    }
    let on_edge = best.u - interval.lo <= opts.tol || interval.hi - best.u <= opts.tol;
    if on_edge && best.u != center {
        return Err(Error::BoxTooSmall {
            lo: interval.lo.as_f64(),
            hi: interval.hi.as_f64(),
            at: best.u.as_f64(),
        });
    }
    Ok(best.u)
}

fn validate<T: Scalar>(center: T, stepsize: T, interval: &Interval<T>) -> Result<()> {
    if !(stepsize > T::zero() && stepsize.is_finite()) {
        return Err(Error::usage(format!("stepsize must be positive, got {stepsize}")));
    }
    if !interval.contains(center) {
        return Err(Error::usage(format!(
            "search interval [{}, {}] does not contain center {center}",
            interval.lo, interval.hi
        )));
    }
    Ok(())
}

/// Golden-section search on `[a, b]`, run down to floating-point resolution.
/// `seed` is a known point inside the bracket; the best point ever evaluated
/// is returned.
fn golden_section<T, H>(h: &H, mut a: T, mut b: T, seed_value: ExtReal<T>, seed: T, max_iter: usize) -> Candidate<T>
where
    T: Scalar,
    H: Fn(T) -> ExtReal<T>,
{
    let inv_phi = T::lit(INV_PHI);
    let mut best = Candidate {
        u: seed,
        value: seed_value,
    };
    let mut track = |u: T, v: ExtReal<T>| {
        if v < best.value {
            best = Candidate { u, value: v };
        }
    };

    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = h(c);
    let mut fd = h(d);
    track(c, fc);
    track(d, fd);
    for _ in 0..max_iter {
        let resolution = (T::epsilon() * (a.abs() + b.abs())).max(T::min_positive_value());
        if b - a <= resolution {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = h(c);
            track(c, fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = h(d);
            track(d, fd);
        }
    }
    best
}

/// Value comparisons pin a smooth minimizer only to about `√eps`. This
/// sharpens a golden-section result by bisecting on the sign of a
/// Richardson-extrapolated central difference (`O(δ⁴)` truncation), over a
/// bracket a few times wider than the value-resolution limit. The polished
/// point is kept only if the derivative changes sign across the bracket and
/// the value is no worse up to rounding.
fn polish<T, H>(h: &H, cand: Candidate<T>, kinks: &[T]) -> Candidate<T>
where
    T: Scalar,
    H: Fn(T) -> ExtReal<T>,
{
    let u0 = cand.u;
    let scale = T::one() + u0.abs();
    let width = T::epsilon().sqrt() * T::lit(64.0) * scale;
    // Higher derivatives grow near a kink, so the difference step shrinks
    // with the distance to it; stencils never reach across one.
    let clearance = kinks.iter().map(|&k| (u0 - k).abs()).fold(T::infinity(), T::min) - width;
    if clearance < width + width {
        return cand;
    }
    let delta = T::epsilon().powf(T::lit(0.2)) * scale.min(clearance);
    let slope = |u: T| -> Option<T> {
        let d = |s: T| -> Option<T> { Some((h(u + s).finite()? - h(u - s).finite()?) / (s + s)) };
        let d1 = d(delta)?;
        let d2 = d(delta + delta)?;
        Some((T::lit(4.0) * d1 - d2) / T::lit(3.0))
    };
    let (mut lo, mut hi) = (u0 - width, u0 + width);
    let (Some(s_lo), Some(s_hi)) = (slope(lo), slope(hi)) else {
        return cand;
    };
    if !(s_lo < T::zero() && s_hi > T::zero()) {
        return cand;
    }
    for _ in 0..200 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        match slope(mid) {
            Some(s) if s < T::zero() => lo = mid,
            Some(s) if s > T::zero() => hi = mid,
            Some(_) => {
                lo = mid;
                hi = mid;
                break;
            }
            None => return cand,
        }
    }
    let u = lo + (hi - lo) / T::lit(2.0);
    let polished = Candidate { u, value: h(u) };
    if polished.value <= cand.value || ties(polished.value, cand.value) {
        polished
    } else {
        cand
    }
}

/// Grid oracle: the best of `grid_n` equispaced points (ends included).
/// Ties follow the same rule as the solver. Meant as test ground truth.
pub fn brute_force_prox<T, F, V>(phi: F, center: T, stepsize: T, interval: Interval<T>, grid_n: usize) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> V,
    V: Into<ExtReal<T>>,
{
    validate(center, stepsize, &interval)?;
    if grid_n < 1000 {
        return Err(Error::usage(format!("grid_n must be at least 1000, got {grid_n}")));
    }
    let two_step = stepsize + stepsize;
    let last = T::from_usize_lossy(grid_n - 1);
    let width = interval.width();
    let mut best: Option<Candidate<T>> = None;
    for i in 0..grid_n {
        let u = if i == grid_n - 1 {
            interval.hi
        } else {
            interval.lo + width * T::from_usize_lossy(i) / last
        };
        let value = phi(u).into() + (u - center) * (u - center) / two_step;
        let cand = Candidate { u, value };
        best = Some(match best {
            None => cand,
            Some(b) => better(b, cand, center),
        });
    }
    let best = best.expect("grid is nonempty");
    if !best.value.is_finite() {
        return Err(Error::Domain("prox objective is +inf on the whole grid".into()));
    }
    Ok(best.u)
}

/// Solves one coordinate with the default interval, doubling it on
/// boundary hits.
fn solve_coordinate<T, F>(phi: F, center: T, stepsize: T, kinks: &[T], cfg: &InnerSolverConfig<T>) -> Result<T>
where
    T: Scalar,
    F: Fn(T) -> ExtReal<T>,
{
    let opts = ScalarProxOptions {
        kinks,
        ..ScalarProxOptions::from_config(cfg)
    };
    let mut half = cfg.box_scale * (T::one() + center.abs());
    let mut attempt = 0;
    loop {
        let interval = Interval::around(center, half)?;
        match solve_scalar_prox_with(&phi, center, stepsize, interval, &opts) {
            Err(Error::BoxTooSmall { .. }) if attempt < cfg.box_doublings => {
                attempt += 1;
                half = half + half;
            }
            other => return other,
        }
    }
}

/// `x_{k+1} ∈ argmin_u L(u, y_k) + ‖u − x_k‖²/(2λ)`.
pub fn prox_step_x<T: Scalar>(obj: &ObjectiveSpec<T>, p: &Point<T>, lambda: T, cfg: &InnerSolverConfig<T>) -> Result<Vec<T>> {
    obj.check_dims(p)?;
    match &obj.x_prox {
        BlockProx::Exact(prox) => Ok(prox(p.x(), p.y(), lambda)),
        BlockProx::CoordinateWise { kinks } => (0..obj.n)
            .map(|i| {
                let phi = |u: T| {
                    let mut x = p.x().to_vec();
                    x[i] = u;
                    (obj.f)(&x) + (obj.q)(&x, p.y())
                };
                solve_coordinate(phi, p.x()[i], lambda, kinks, cfg)
            })
            .collect(),
    }
}

/// `y_{k+1} ∈ argmin_v L(x_{k+1}, v) + ‖v − y_k‖²/(2μ)`, where `p_half` is
/// `(x_{k+1}, y_k)`. Empty blocks come back unchanged.
pub fn prox_step_y<T: Scalar>(obj: &ObjectiveSpec<T>, p_half: &Point<T>, mu: T, cfg: &InnerSolverConfig<T>) -> Result<Vec<T>> {
    obj.check_dims(p_half)?;
    if obj.m == 0 {
        return Ok(Vec::new());
    }
    match &obj.y_prox {
        BlockProx::Exact(prox) => Ok(prox(p_half.y(), p_half.x(), mu)),
        BlockProx::CoordinateWise { kinks } => (0..obj.m)
            .map(|i| {
                let phi = |v: T| {
                    let mut y = p_half.y().to_vec();
                    y[i] = v;
                    (obj.g)(&y) + (obj.q)(p_half.x(), &y)
                };
                solve_coordinate(phi, p_half.y()[i], mu, kinks, cfg)
            })
            .collect(),
    }
}
