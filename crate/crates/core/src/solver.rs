//! The alternating proximal minimization loop
//! `(x_k, y_k) → (x_{k+1}, y_k) → (x_{k+1}, y_{k+1})` and the runtime checks
//! that every trace it produces must pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{evaluate, residual, IterateRecord, ObjectiveSpec, Point, RunTrace, StepsizePolicy, TerminationReason};
use crate::prox::{prox_step_x, prox_step_y, InnerSolverConfig};
use crate::scalar::{norm, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub policy: StepsizePolicy<T>,
    pub max_iter: usize,
    /// Stop once `‖z_k − z_{k−1}‖ < step_tol`.
    pub step_tol: T,
    /// Value gap to the known critical value treated as zero.
    pub value_zero_tol: T,
    /// Consecutive iterates with a zero gap, while the step is still above
    /// `step_tol`, before stopping with [`TerminationReason::ValueTol`].
    pub value_patience: usize,
    pub inner: InnerSolverConfig<T>,
    pub record_residuals: bool,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(policy: StepsizePolicy<T>) -> Self {
        SolverConfig {
            policy,
            max_iter: 100_000,
            step_tol: T::lit(1e-12),
            value_zero_tol: T::lit(1e-14),
            value_patience: 3,
            inner: InnerSolverConfig::default(),
            record_residuals: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::usage("max_iter must be at least 1"));
        }
        if !(self.step_tol > T::zero()) {
            return Err(Error::usage("step_tol must be positive"));
        }
        if !(self.value_zero_tol >= T::zero()) {
            return Err(Error::usage("value_zero_tol must be nonnegative"));
        }
        Ok(())
    }
}

fn finite_value<T: Scalar>(obj: &ObjectiveSpec<T>, p: &Point<T>) -> Result<T> {
    evaluate(obj, p)?
        .finite()
        .ok_or_else(|| Error::NonFinite("objective value is +inf".into()))
}

/// Runs the alternating scheme from `start`.
///
/// Termination, checked after each iteration in this order:
/// - finite termination: the gap to `critical_value` is within
///   `value_zero_tol`, the step is within `step_tol`, and the start itself
///   was not already at the critical value;
/// - step tolerance: `‖z_k − z_{k−1}‖ < step_tol`;
/// - value tolerance: the gap stayed within `value_zero_tol` for
///   `value_patience` iterates;
/// - `max_iter`.
pub fn run<T: Scalar>(obj: &ObjectiveSpec<T>, start: &Point<T>, cfg: &SolverConfig<T>) -> Result<RunTrace<T>> {
    cfg.validate()?;
    obj.check_dims(start)?;
    let start_value = finite_value(obj, start).map_err(|e| Error::usage(format!("start point: {e}")))?;
    let reference = obj.critical_value;
    let gap_is_zero = |v: T| reference.is_some_and(|r| v - r <= cfg.value_zero_tol);
    let started_at_reference = gap_is_zero(start_value);

    let mut records = vec![IterateRecord::start(start.clone(), start_value)];
    let mut zero_gap_streak = 0usize;
    let mut termination = TerminationReason::MaxIter;

    for k in 0..cfg.max_iter {
        let wrap = |e: Error| Error::Iteration {
            iteration: k + 1,
            source: Box::new(e),
        };
        let prev = records.last().expect("records start nonempty");
        let lambda = cfg.policy.lambda(k);
        let mu = cfg.policy.mu(k);

        let x_next = prox_step_x(obj, &prev.point, lambda, &cfg.inner).map_err(wrap)?;
        let half = Point::new(x_next, prev.point.y().to_vec()).map_err(wrap)?;
        let y_next = prox_step_y(obj, &half, mu, &cfg.inner).map_err(wrap)?;
        let point = Point::new(half.x().to_vec(), y_next).map_err(wrap)?;
        let value = finite_value(obj, &point).map_err(wrap)?;
        let res = if cfg.record_residuals {
            Some(residual(obj, &prev.point, &point, lambda, mu).map_err(wrap)?)
        } else {
            None
        };
        let record = IterateRecord::following(prev, point, value, res);
        let step = record.step_norm();
        records.push(record);

        let zero_gap = gap_is_zero(value);
        zero_gap_streak = if zero_gap { zero_gap_streak + 1 } else { 0 };
        if zero_gap && step <= cfg.step_tol && !started_at_reference {
            termination = TerminationReason::FiniteTermination;
            break;
        }
        if step < cfg.step_tol {
            termination = TerminationReason::StepTol;
            break;
        }
        if zero_gap_streak >= cfg.value_patience.max(1) {
            termination = TerminationReason::ValueTol;
            break;
        }
    }
    RunTrace::new(obj.id.clone(), cfg.clone(), records, termination)
}

/// Indices `k ≥ 1` violating the sufficient-decrease inequality
///
/// `L(z_k) + ‖Δx‖²/(2λ_{k−1}) + ‖Δy‖²/(2μ_{k−1}) ≤ L(z_{k−1})`
///
/// up to a slack of `1e-10·(1 + |L(z_{k−1})|)`.
pub fn check_descent<T: Scalar>(trace: &RunTrace<T>, policy: &StepsizePolicy<T>) -> Vec<usize> {
    let two = T::lit(2.0);
    trace
        .records()
        .windows(2)
        .filter_map(|w| {
            let (prev, curr) = (&w[0], &w[1]);
            let lambda = policy.lambda(prev.k);
            let mu = policy.mu(prev.k);
            let lhs = curr.value
                + curr.step_norm_x * curr.step_norm_x / (two * lambda)
                + curr.step_norm_y * curr.step_norm_y / (two * mu);
            let slack = T::check_slack() * (T::one() + prev.value.abs());
            (lhs > prev.value + slack).then_some(curr.k)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareSummability<T> {
    /// `Σ_k ‖x_k − x_{k−1}‖² + ‖y_k − y_{k−1}‖²` over the trace.
    pub partial_sum: T,
    /// Step norm of the last record.
    pub tail_step: T,
}

impl<T: Scalar> SquareSummability<T> {
    /// Telescoped decrease bound `2·r₊·(L(z₀) − inf L)`.
    pub fn bound(r_plus: T, start_value: T, inf_value: T) -> T {
        T::lit(2.0) * r_plus * (start_value - inf_value)
    }
}

pub fn check_square_summability<T: Scalar>(trace: &RunTrace<T>) -> SquareSummability<T> {
    let partial_sum = trace
        .records()
        .iter()
        .skip(1)
        .map(|r| r.step_norm_x * r.step_norm_x + r.step_norm_y * r.step_norm_y)
        .sum();
    SquareSummability {
        partial_sum,
        tail_step: trace.last().step_norm(),
    }
}

/// `‖(x*_k, y*_k)‖` for `k = 1..K`.
pub fn residual_norms<T: Scalar>(trace: &RunTrace<T>) -> Result<Vec<T>> {
    trace
        .records()
        .iter()
        .skip(1)
        .map(|r| {
            r.residual_norm
                .ok_or_else(|| Error::usage(format!("record {} has no residual; run with record_residuals", r.k)))
        })
        .collect()
}

/// Axis-aligned box `[lo, hi]` over the concatenated coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> BoundingBox<T> {
    /// Smallest box holding every iterate, widened by `inflate` times its
    /// extent on each side (with a floor so degenerate axes get volume).
    pub fn of_trace(trace: &RunTrace<T>, inflate: T) -> Self {
        let first = trace.records()[0].point.concat();
        let (mut lo, mut hi) = (first.clone(), first);
        for p in trace.points() {
            for (i, v) in p.concat().into_iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            let pad = ((*h - *l) * inflate).max(T::lit(1e-9) * (T::one() + l.abs().max(h.abs())));
            *l -= pad;
            *h += pad;
        }
        BoundingBox { lo, hi }
    }
}

/// Observed Lipschitz modulus of `∇Q` over `bbox`: the largest difference
/// quotient among `samples` seeded random pairs and the `(x_k, y_k)` /
/// `(x_k, y_{k−1})` pairs the residual actually compares.
pub fn lipschitz_estimate<T: Scalar>(
    obj: &ObjectiveSpec<T>,
    trace: &RunTrace<T>,
    bbox: &BoundingBox<T>,
    samples: usize,
    seed: u64,
) -> T {
    let n = obj.n;
    let quotient = |a: &[T], b: &[T]| -> T {
        let (gax, gay) = (obj.q_grad)(&a[..n], &a[n..]);
        let (gbx, gby) = (obj.q_grad)(&b[..n], &b[n..]);
        let diff: Vec<T> = gax.iter().zip(&gbx).chain(gay.iter().zip(&gby)).map(|(&u, &v)| u - v).collect();
        let step: Vec<T> = a.iter().zip(b).map(|(&u, &v)| u - v).collect();
        let d = norm(&step);
        if d > T::zero() {
            norm(&diff) / d
        } else {
            T::zero()
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<T> {
        bbox.lo
            .iter()
            .zip(&bbox.hi)
            .map(|(&l, &h)| l + (h - l) * T::lit(rng.gen::<f64>()))
            .collect()
    };
    let mut best = T::zero();
    for _ in 0..samples {
        let (a, b) = (draw(), draw());
        best = best.max(quotient(&a, &b));
    }
    for w in trace.records().windows(2) {
        let curr = w[1].point.concat();
        let mut mixed = curr.clone();
        mixed[n..].copy_from_slice(w[0].point.y());
        best = best.max(quotient(&curr, &mixed));
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBoundReport<T> {
    pub lipschitz: T,
    pub factor: T,
    /// Indices `k` with `‖(x*_k, y*_k)‖ > factor·‖z_k − z_{k−1}‖`.
    pub violations: Vec<usize>,
}

/// Checks `‖(x*_k, y*_k)‖ ≤ (C + 1/r₋)·‖z_k − z_{k−1}‖` with `C` estimated by
/// [`lipschitz_estimate`] on the trace box inflated by 10%.
pub fn check_residual_bound<T: Scalar>(obj: &ObjectiveSpec<T>, trace: &RunTrace<T>, seed: u64) -> Result<ResidualBoundReport<T>> {
    let norms = residual_norms(trace)?;
    let bbox = BoundingBox::of_trace(trace, T::lit(0.1));
    let lipschitz = lipschitz_estimate(obj, trace, &bbox, 2000, seed);
    let factor = lipschitz + T::one() / trace.config.policy.r_minus();
    let violations = trace
        .records()
        .iter()
        .skip(1)
        .zip(norms)
        .filter(|(r, res)| {
            let bound = factor * r.step_norm();
            *res > bound + T::epsilon() * T::lit(16.0) * (T::one() + bound)
        })
        .map(|(r, _)| r.k)
        .collect();
    Ok(ResidualBoundReport {
        lipschitz,
        factor,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockProx, ExtReal};

    fn baseline() -> ObjectiveSpec<f64> {
        ObjectiveSpec::<f64>::new("baseline", 1, 1)
            .with_f(|x| ExtReal::Finite(x[0] * x[0]))
            .with_g(|y| ExtReal::Finite(y[0] * y[0]))
            .with_coupling(
                |x, y| (x[0] - y[0]).powi(2),
                |x, y| (vec![2.0 * (x[0] - y[0])], vec![-2.0 * (x[0] - y[0])]),
            )
            .with_critical_value(0.0)
    }

    fn cfg() -> SolverConfig<f64> {
        SolverConfig::new(StepsizePolicy::constant(0.5, 0.5, 0.1, 1.0).unwrap())
    }

    fn pt(x: f64, y: f64) -> Point<f64> {
        Point::new(vec![x], vec![y]).unwrap()
    }

    /// Analytic prox of the baseline with λ = μ = 1/2: u = (x + y)/3.
    fn analytic_baseline(steps: usize) -> Vec<(f64, f64, f64)> {
        let (mut x, mut y) = (1.0_f64, 1.0_f64);
        let mut out = vec![(x, y, 2.0)];
        for _ in 0..steps {
            x = (x + y) / 3.0;
            y = (x + y) / 3.0;
            out.push((x, y, x * x + y * y + (x - y).powi(2)));
        }
        out
    }

    #[test]
    fn baseline_first_iterates_match_analytic() {
        let trace = run(&baseline(), &pt(1.0, 1.0), &cfg()).unwrap();
        let r1 = &trace.records()[1];
        assert!((r1.point.x()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r1.point.y()[0] - 5.0 / 9.0).abs() < 1e-12);
        assert!((r1.value - 62.0 / 81.0).abs() < 1e-12);
        for (rec, (x, y, v)) in trace.records().iter().zip(analytic_baseline(10)) {
            assert!((rec.point.x()[0] - x).abs() < 1e-11);
            assert!((rec.point.y()[0] - y).abs() < 1e-11);
            assert!((rec.value - v).abs() < 1e-11);
        }
        let values = trace.values();
        assert!(values.windows(2).take(20).all(|w| w[1] < w[0]));
    }

    #[test]
    fn baseline_passes_runtime_checks() {
        let c = cfg();
        let trace = run(&baseline(), &pt(1.0, 1.0), &c).unwrap();
        assert!(check_descent(&trace, &c.policy).is_empty());
        let sq = check_square_summability(&trace);
        assert!(sq.partial_sum <= SquareSummability::bound(1.0, 2.0, 0.0));
        let norms = residual_norms(&trace).unwrap();
        let first_small = norms.iter().position(|&r| r < 1e-6).unwrap();
        assert!(first_small < 200);
        let rb = check_residual_bound(&baseline(), &trace, 7).unwrap();
        assert!(rb.violations.is_empty(), "{rb:?}");
        assert!(rb.lipschitz <= 4.0 + 1e-12 && rb.lipschitz > 2.0);
    }

    #[test]
    fn start_at_minimizer_stops_on_step_tol() {
        let trace = run(&baseline(), &pt(0.0, 0.0), &cfg()).unwrap();
        assert_eq!(trace.termination, TerminationReason::StepTol);
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.records()[1].point, trace.records()[0].point);
        assert_eq!(check_square_summability(&trace).partial_sum, 0.0);
        assert_eq!(residual_norms(&trace).unwrap(), vec![0.0]);
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run(&baseline(), &pt(0.3, -0.8), &cfg()).unwrap();
        let b = run(&baseline(), &pt(0.3, -0.8), &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn descent_flags_planted_violation() {
        let c = cfg();
        let mut records = vec![IterateRecord::start(pt(1.0, 1.0), 2.0)];
        for (k, v) in [1.0, 0.5, 0.9, 0.1].into_iter().enumerate() {
            let prev = &records[k];
            let p = prev.point.clone();
            records.push(IterateRecord::following(prev, p, v, None));
        }
        let trace = RunTrace::new("fake", c.clone(), records, TerminationReason::MaxIter).unwrap();
        assert_eq!(check_descent(&trace, &c.policy), vec![3]);
        assert!(residual_norms(&trace).is_err());
    }

    #[test]
    fn descent_on_single_record_is_empty() {
        let c = cfg();
        let trace = RunTrace::new("one", c.clone(), vec![IterateRecord::start(pt(1.0, 1.0), 2.0)], TerminationReason::MaxIter).unwrap();
        assert!(check_descent(&trace, &c.policy).is_empty());
        assert!(residual_norms(&trace).unwrap().is_empty());
    }

    #[test]
    fn residual_norm_of_unit_steps() {
        // Q ≡ 0, λ = μ = 1, unit moves in both blocks: residual (−1, −1).
        let obj = ObjectiveSpec::<f64>::new("zero", 1, 1);
        let c = SolverConfig::new(StepsizePolicy::constant(1.0, 1.0, 0.5, 2.0).unwrap());
        let mut records = vec![IterateRecord::start(pt(0.0, 0.0), 0.0)];
        for k in 0..5 {
            let prev = &records[k];
            let next = pt(prev.point.x()[0] + 1.0, prev.point.y()[0] + 1.0);
            let res = residual(&obj, &prev.point, &next, 1.0, 1.0).unwrap();
            let rec = IterateRecord::following(prev, next, 0.0, Some(res));
            records.push(rec);
        }
        let trace = RunTrace::new("fake", c, records, TerminationReason::MaxIter).unwrap();
        for r in residual_norms(&trace).unwrap() {
            assert!((r - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_rejects_gapped_indices() {
        let mut r = IterateRecord::start(pt(0.0, 0.0), 0.0);
        r.k = 1;
        assert!(RunTrace::new("bad", cfg(), vec![r], TerminationReason::MaxIter).is_err());
    }

    #[test]
    fn solver_rejects_bad_start_and_config() {
        let inf_start = baseline().with_f(|x| if x[0] > 5.0 { ExtReal::PosInf } else { ExtReal::Finite(0.0) });
        assert!(run(&inf_start, &pt(6.0, 0.0), &cfg()).is_err());
        let mut c = cfg();
        c.max_iter = 0;
        assert!(run(&baseline(), &pt(1.0, 1.0), &c).is_err());
        assert!(run(&baseline(), &Point::new(vec![1.0, 2.0], vec![]).unwrap(), &cfg()).is_err());
    }

    #[test]
    fn inner_failure_carries_iteration() {
        // Quartic descent beats the quadratic proximal term: every box is too small.
        let obj = ObjectiveSpec::<f64>::new("unbounded", 1, 1).with_f(|x| ExtReal::Finite(-x[0].powi(4)));
        let err = run(&obj, &pt(0.0, 0.0), &cfg()).unwrap_err();
        match err {
            Error::Iteration { iteration, source } => {
                assert_eq!(iteration, 1);
                assert!(matches!(*source, Error::BoxTooSmall { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn max_iter_is_honoured() {
        let mut c = cfg();
        c.max_iter = 3;
        let trace = run(&baseline(), &pt(1.0, 1.0), &c).unwrap();
        assert_eq!(trace.termination, TerminationReason::MaxIter);
        assert_eq!(trace.len(), 4);
    }

    #[test]
    fn soft_threshold_problem_terminates_finitely() {
        let obj = ObjectiveSpec::<f64>::new("l1", 1, 1)
            .with_f(|x: &[f64]| ExtReal::Finite(x[0].abs()))
            .with_g(|y: &[f64]| ExtReal::Finite(y[0].abs()))
            .with_coupling(
                |x, y| (x[0] - y[0]).powi(2),
                |x, y| (vec![2.0 * (x[0] - y[0])], vec![-2.0 * (x[0] - y[0])]),
            )
            .with_x_prox(BlockProx::CoordinateWise { kinks: vec![0.0] })
            .with_y_prox(BlockProx::CoordinateWise { kinks: vec![0.0] })
            .with_critical_value(0.0);
        let trace = run(&obj, &pt(1.0, -0.5), &cfg()).unwrap();
        assert_eq!(trace.termination, TerminationReason::FiniteTermination);
        assert_eq!(trace.last().value, 0.0);
    }

    #[test]
    fn single_precision_run() {
        let obj = ObjectiveSpec::<f32>::new("baseline32", 1, 1)
            .with_f(|x| ExtReal::Finite(x[0] * x[0]))
            .with_g(|y| ExtReal::Finite(y[0] * y[0]))
            .with_coupling(
                |x, y| (x[0] - y[0]).powi(2),
                |x, y| (vec![2.0 * (x[0] - y[0])], vec![-2.0 * (x[0] - y[0])]),
            );
        let mut c = SolverConfig::new(StepsizePolicy::constant(0.5_f32, 0.5, 0.1, 1.0).unwrap());
        c.step_tol = 1e-6;
        let trace = run(&obj, &Point::new(vec![1.0], vec![1.0]).unwrap(), &c).unwrap();
        assert!(check_descent(&trace, &c.policy).is_empty());
        assert!((trace.records()[1].point.x()[0] - 2.0 / 3.0).abs() < 1e-6);
        assert!(trace.last().value < 1e-8);
    }
}
