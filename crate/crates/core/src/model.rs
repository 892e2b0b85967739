//! Domain types shared by every other module: points, extended reals, the
//! structured objective `L(x, y) = f(x) + Q(x, y) + g(y)`, stepsize
//! policies and run traces.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dist, norm, Scalar};
use crate::solver::SolverConfig;

/// Value in `ℝ ∪ {+∞}`.
///
/// `+∞` is an explicit tag, never IEEE infinity, so sums with finite values
/// stay well defined and NaN cannot appear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal<T> {
    Finite(T),
    PosInf,
}

impl<T: Scalar> ExtReal<T> {
    /// Classifies a raw float: `+inf` becomes [`ExtReal::PosInf`]; NaN and
    /// `-inf` are rejected.
    pub fn from_raw(v: T) -> Result<Self> {
        if v.is_finite() {
            Ok(ExtReal::Finite(v))
        } else if v.is_infinite() && v > T::zero() {
            Ok(ExtReal::PosInf)
        } else {
            Err(Error::NonFinite(format!("extended-real value {v}")))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }
}

impl<T: Scalar> From<T> for ExtReal<T> {
    fn from(v: T) -> Self {
        ExtReal::Finite(v)
    }
}

impl<T: Scalar> Add for ExtReal<T> {
    type Output = ExtReal<T>;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl<T: Scalar> Add<T> for ExtReal<T> {
    type Output = ExtReal<T>;

    fn add(self, rhs: T) -> Self {
        self + ExtReal::Finite(rhs)
    }
}

impl<T: Scalar> PartialOrd for ExtReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl<T: Scalar> fmt::Display for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

/// A pair `(x, y) ∈ ℝⁿ × ℝᵐ` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint<T>", bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Point<T> {
    x: Vec<T>,
    y: Vec<T>,
}

#[derive(Deserialize)]
struct RawPoint<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> TryFrom<RawPoint<T>> for Point<T> {
    type Error = Error;

    fn try_from(raw: RawPoint<T>) -> Result<Self> {
        Point::new(raw.x, raw.y)
    }
}

impl<T: Scalar> Point<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::usage("point has a non-finite coordinate"));
        }
        Ok(Point { x, y })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Point {
            x: vec![T::zero(); n],
            y: vec![T::zero(); m],
        }
    }

    /// Splits a concatenated coordinate vector after the first `n` entries.
    pub fn from_concat(v: &[T], n: usize) -> Result<Self> {
        if n > v.len() {
            return Err(Error::usage(format!(
                "cannot split {} coordinates with n = {n}",
                v.len()
            )));
        }
        Point::new(v[..n].to_vec(), v[n..].to_vec())
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    pub fn concat(&self) -> Vec<T> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn dist(&self, other: &Point<T>) -> T {
        let dx = dist(&self.x, &other.x);
        let dy = dist(&self.y, &other.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn norm(&self) -> T {
        let nx = norm(&self.x);
        let ny = norm(&self.y);
        (nx * nx + ny * ny).sqrt()
    }

    /// Infinity-norm distance, used for box membership.
    pub fn max_abs_diff(&self, other: &Point<T>) -> T {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

pub type BlockFn<T> = Arc<dyn Fn(&[T]) -> ExtReal<T> + Send + Sync>;
pub type CouplingFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
pub type CouplingGradFn<T> = Arc<dyn Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync>;
/// `dist(0, ∂L(p))`, or `None` where the closed-form model does not apply.
pub type SubdiffDistFn<T> = Arc<dyn Fn(&Point<T>) -> Option<T> + Send + Sync>;
pub type MaskFn<T> = Arc<dyn Fn(&Point<T>) -> bool + Send + Sync>;
/// Closed-form block prox: `(center block, other block, stepsize) -> argmin`.
pub type ExactProxFn<T> = Arc<dyn Fn(&[T], &[T], T) -> Vec<T> + Send + Sync>;

/// How a block subproblem is solved.
#[derive(Clone)]
pub enum BlockProx<T> {
    /// Each coordinate is minimized on its own with the rest of the block
    /// held at the center. Exact whenever `L` restricted to the block is
    /// coordinate-separable, which includes every one-dimensional block.
    /// `kinks` lists points where the block function is nonsmooth; they are
    /// tried as candidates so exact zeros are reachable.
    CoordinateWise { kinks: Vec<T> },
    /// User-supplied closed-form prox for non-separable blocks.
    Exact(ExactProxFn<T>),
}

impl<T> fmt::Debug for BlockProx<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockProx::CoordinateWise { .. } => f.write_str("CoordinateWise"),
            BlockProx::Exact(_) => f.write_str("Exact"),
        }
    }
}

/// The structured objective `L(x, y) = f(x) + Q(x, y) + g(y)`.
///
/// `m = 0` is the one-block convention: `g ≡ 0`, the `y` block is empty and
/// the `y` prox step is a no-op.
#[derive(Clone)]
pub struct ObjectiveSpec<T> {
    pub id: String,
    pub n: usize,
    pub m: usize,
    pub f: BlockFn<T>,
    pub g: BlockFn<T>,
    pub q: CouplingFn<T>,
    pub q_grad: CouplingGradFn<T>,
    pub subdiff_dist: Option<SubdiffDistFn<T>>,
    /// Loci where the closed-form subdifferential model is not trusted.
    pub nonsmooth_mask: Option<MaskFn<T>>,
    pub critical_value: Option<T>,
    pub x_prox: BlockProx<T>,
    pub y_prox: BlockProx<T>,
}

impl<T> fmt::Debug for ObjectiveSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("id", &self.id)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("x_prox", &self.x_prox)
            .field("y_prox", &self.y_prox)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ObjectiveSpec<T> {
    /// Objective with `f ≡ g ≡ Q ≡ 0`; fill in the parts with the `with_*`
    /// methods.
    pub fn new(id: impl Into<String>, n: usize, m: usize) -> Self {
        ObjectiveSpec {
            id: id.into(),
            n,
            m,
            f: Arc::new(|_| ExtReal::Finite(T::zero())),
            g: Arc::new(|_| ExtReal::Finite(T::zero())),
            q: Arc::new(|_, _| T::zero()),
            q_grad: Arc::new(|x: &[T], y: &[T]| (vec![T::zero(); x.len()], vec![T::zero(); y.len()])),
            subdiff_dist: None,
            nonsmooth_mask: None,
            critical_value: None,
            x_prox: BlockProx::CoordinateWise { kinks: Vec::new() },
            y_prox: BlockProx::CoordinateWise { kinks: Vec::new() },
        }
    }

    pub fn with_f(mut self, f: impl Fn(&[T]) -> ExtReal<T> + Send + Sync + 'static) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_g(mut self, g: impl Fn(&[T]) -> ExtReal<T> + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self
    }

    pub fn with_coupling(
        mut self,
        q: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static,
        q_grad: impl Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync + 'static,
    ) -> Self {
        self.q = Arc::new(q);
        self.q_grad = Arc::new(q_grad);
        self
    }

    pub fn with_subdiff_dist(
        mut self,
        d: impl Fn(&Point<T>) -> Option<T> + Send + Sync + 'static,
    ) -> Self {
        self.subdiff_dist = Some(Arc::new(d));
        self
    }

    pub fn with_nonsmooth_mask(mut self, mask: impl Fn(&Point<T>) -> bool + Send + Sync + 'static) -> Self {
        self.nonsmooth_mask = Some(Arc::new(mask));
        self
    }

    pub fn with_critical_value(mut self, v: T) -> Self {
        self.critical_value = Some(v);
        self
    }

    pub fn with_x_prox(mut self, p: BlockProx<T>) -> Self {
        self.x_prox = p;
        self
    }

    pub fn with_y_prox(mut self, p: BlockProx<T>) -> Self {
        self.y_prox = p;
        self
    }

    pub fn check_dims(&self, p: &Point<T>) -> Result<()> {
        let (got_n, got_m) = p.dims();
        if (got_n, got_m) != (self.n, self.m) {
            return Err(Error::DimensionMismatch {
                expected_n: self.n,
                expected_m: self.m,
                got_n,
                got_m,
            });
        }
        Ok(())
    }

    pub fn is_masked(&self, p: &Point<T>) -> bool {
        self.nonsmooth_mask.as_ref().is_some_and(|mask| mask(p))
    }

    /// `dist(0, ∂L(p))` from the closed-form model; `None` when the problem
    /// has no model or `p` lies on a masked locus.
    pub fn subdiff_dist_at(&self, p: &Point<T>) -> Option<T> {
        if self.is_masked(p) {
            return None;
        }
        self.subdiff_dist.as_ref().and_then(|d| d(p))
    }
}

/// `L(x, y) = f(x) + Q(x, y) + g(y)`; `+∞` when `f` or `g` is.
pub fn evaluate<T: Scalar>(obj: &ObjectiveSpec<T>, p: &Point<T>) -> Result<ExtReal<T>> {
    obj.check_dims(p)?;
    let fx = normalize((obj.f)(p.x()), "f")?;
    let gy = normalize((obj.g)(p.y()), "g")?;
    let q = (obj.q)(p.x(), p.y());
    if !q.is_finite() {
        return Err(Error::NonFinite(format!("coupling term Q = {q}")));
    }
    Ok(fx + q + gy)
}

fn normalize<T: Scalar>(v: ExtReal<T>, what: &str) -> Result<ExtReal<T>> {
    match v {
        ExtReal::Finite(raw) => ExtReal::from_raw(raw)
            .map_err(|_| Error::NonFinite(format!("{what} returned {raw}"))),
        ExtReal::PosInf => Ok(ExtReal::PosInf),
    }
}

/// The subgradient element produced by one alternating step:
///
/// `x* = ∇ₓQ(xₖ, yₖ) − ∇ₓQ(xₖ, yₖ₋₁) − (xₖ − xₖ₋₁)/λ`, `y* = −(yₖ − yₖ₋₁)/μ`
///
/// where `curr = (xₖ, yₖ)` and `prev = (xₖ₋₁, yₖ₋₁)`.
pub fn residual<T: Scalar>(
    obj: &ObjectiveSpec<T>,
    prev: &Point<T>,
    curr: &Point<T>,
    lambda: T,
    mu: T,
) -> Result<(Vec<T>, Vec<T>)> {
    obj.check_dims(prev)?;
    obj.check_dims(curr)?;
    if !(lambda > T::zero() && mu > T::zero()) {
        return Err(Error::usage("stepsizes must be positive"));
    }
    let (gx_curr, _) = (obj.q_grad)(curr.x(), curr.y());
    let (gx_mixed, _) = (obj.q_grad)(curr.x(), prev.y());
    let rx = gx_curr
        .iter()
        .zip(&gx_mixed)
        .zip(curr.x().iter().zip(prev.x()))
        .map(|((&a, &b), (&xk, &xp))| a - b - (xk - xp) / lambda)
        .collect();
    let ry = curr
        .y()
        .iter()
        .zip(prev.y())
        .map(|(&yk, &yp)| -(yk - yp) / mu)
        .collect();
    Ok((rx, ry))
}

/// A stepsize sequence `k ↦ s_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule<T> {
    Constant(T),
    /// Repeats the listed values.
    Cyclic(Vec<T>),
    /// `s_k = limit + (start − limit)·ratio^k`.
    Geometric { start: T, limit: T, ratio: T },
}

impl<T: Scalar> Schedule<T> {
    pub fn at(&self, k: usize) -> T {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Cyclic(vs) => vs[k % vs.len()],
            Schedule::Geometric { start, limit, ratio } => {
                let p = i32::try_from(k).map_or(T::zero(), |e| ratio.powi(e));
                *limit + (*start - *limit) * p
            }
        }
    }

    /// Closed hull of every value the schedule can take.
    fn range(&self) -> Option<(T, T)> {
        match self {
            Schedule::Constant(v) => Some((*v, *v)),
            Schedule::Cyclic(vs) => {
                let lo = vs.iter().copied().reduce(T::min)?;
                let hi = vs.iter().copied().reduce(T::max)?;
                Some((lo, hi))
            }
            Schedule::Geometric { start, limit, ratio } => {
                if !(*ratio >= T::zero() && *ratio < T::one()) {
                    return None;
                }
                Some((start.min(*limit), start.max(*limit)))
            }
        }
    }
}

/// Stepsize sequences `λₖ, μₖ` confined to `(r₋, r₊)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsizePolicy<T> {
    lambda: Schedule<T>,
    mu: Schedule<T>,
    r_minus: T,
    r_plus: T,
}

impl<T: Scalar> StepsizePolicy<T> {
    pub fn new(lambda: Schedule<T>, mu: Schedule<T>, r_minus: T, r_plus: T) -> Result<Self> {
        if !(r_minus > T::zero() && r_minus < r_plus && r_plus.is_finite()) {
            return Err(Error::usage(format!(
                "stepsize bounds need 0 < r_minus < r_plus, got ({r_minus}, {r_plus})"
            )));
        }
        for (name, s) in [("lambda", &lambda), ("mu", &mu)] {
            let (lo, hi) = s
                .range()
                .ok_or_else(|| Error::usage(format!("{name} schedule is empty or divergent")))?;
            if !(lo > r_minus && hi < r_plus) {
                return Err(Error::usage(format!(
                    "{name} schedule range [{lo}, {hi}] not inside ({r_minus}, {r_plus})"
                )));
            }
        }
        Ok(StepsizePolicy {
            lambda,
            mu,
            r_minus,
            r_plus,
        })
    }

    pub fn constant(lambda: T, mu: T, r_minus: T, r_plus: T) -> Result<Self> {
        Self::new(Schedule::Constant(lambda), Schedule::Constant(mu), r_minus, r_plus)
    }

    pub fn lambda(&self, k: usize) -> T {
        self.lambda.at(k)
    }

    pub fn mu(&self, k: usize) -> T {
        self.mu.at(k)
    }

    pub fn r_minus(&self) -> T {
        self.r_minus
    }

    pub fn r_plus(&self) -> T {
        self.r_plus
    }
}

/// One entry of a run trace. Record `k = 0` is the starting point and has
/// no residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct IterateRecord<T> {
    pub k: usize,
    pub point: Point<T>,
    pub value: T,
    pub step_norm_x: T,
    pub step_norm_y: T,
    pub residual: Option<(Vec<T>, Vec<T>)>,
    pub residual_norm: Option<T>,
}

impl<T: Scalar> IterateRecord<T> {
    pub fn start(point: Point<T>, value: T) -> Self {
        IterateRecord {
            k: 0,
            point,
            value,
            step_norm_x: T::zero(),
            step_norm_y: T::zero(),
            residual: None,
            residual_norm: None,
        }
    }

    /// Builds record `k` from its predecessor, filling in step norms.
    pub fn following(
        prev: &IterateRecord<T>,
        point: Point<T>,
        value: T,
        residual: Option<(Vec<T>, Vec<T>)>,
    ) -> Self {
        let step_norm_x = dist(point.x(), prev.point.x());
        let step_norm_y = dist(point.y(), prev.point.y());
        let residual_norm = residual.as_ref().map(|(rx, ry)| {
            let a = norm(rx);
            let b = norm(ry);
            (a * a + b * b).sqrt()
        });
        IterateRecord {
            k: prev.k + 1,
            point,
            value,
            step_norm_x,
            step_norm_y,
            residual,
            residual_norm,
        }
    }

    /// `‖z_k − z_{k−1}‖`.
    pub fn step_norm(&self) -> T {
        (self.step_norm_x * self.step_norm_x + self.step_norm_y * self.step_norm_y).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    MaxIter,
    StepTol,
    ValueTol,
    FiniteTermination,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::MaxIter => "max_iter",
            TerminationReason::StepTol => "step_tol",
            TerminationReason::ValueTol => "value_tol",
            TerminationReason::FiniteTermination => "finite_termination",
        })
    }
}

/// Full history of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RunTrace<T> {
    pub objective_id: String,
    pub config: SolverConfig<T>,
    records: Vec<IterateRecord<T>>,
    pub termination: TerminationReason,
}

impl<T: Scalar> RunTrace<T> {
    /// Fails unless records are indexed `0..K` consecutively.
    pub fn new(
        objective_id: impl Into<String>,
        config: SolverConfig<T>,
        records: Vec<IterateRecord<T>>,
        termination: TerminationReason,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::usage("trace needs at least one record"));
        }
        if let Some((i, r)) = records.iter().enumerate().find(|(i, r)| r.k != *i) {
            return Err(Error::usage(format!("record {i} carries index {}", r.k)));
        }
        Ok(RunTrace {
            objective_id: objective_id.into(),
            config,
            records,
            termination,
        })
    }

    pub fn records(&self) -> &[IterateRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> &IterateRecord<T> {
        self.records.last().expect("trace is never empty")
    }

    pub fn values(&self) -> Vec<T> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point<T>> {
        self.records.iter().map(|r| &r.point)
    }
}
