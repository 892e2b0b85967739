//! Convergence-rate regimes: what an exponent `q` predicts, what a recorded
//! sequence actually shows, and the sequence inequalities that connect the
//! two.
//!
//! Classification runs in `f64` whatever the trace scalar is; reports are
//! plain `f64`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point, RunTrace};
use crate::scalar::Scalar;

/// Observed convergence regime of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FiniteTermination,
    Superlinear,
    Linear,
    Sublinear,
    Inconclusive,
}

/// Regime predicted from an exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedRegime {
    FiniteTermination,
    FiniteOrSuperlinear,
    Linear,
    Sublinear,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::FiniteTermination => "finite_termination",
            Regime::Superlinear => "superlinear",
            Regime::Linear => "linear",
            Regime::Sublinear => "sublinear",
            Regime::Inconclusive => "inconclusive",
        })
    }
}

impl fmt::Display for PredictedRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictedRegime::FiniteTermination => "finite_termination",
            PredictedRegime::FiniteOrSuperlinear => "finite_or_superlinear",
            PredictedRegime::Linear => "linear",
            PredictedRegime::Sublinear => "sublinear",
        })
    }
}

impl PredictedRegime {
    /// An observation is consistent with a prediction when it is at least
    /// as fast: a guaranteed rate is an upper bound on the error, so a run
    /// may beat it.
    pub fn admits(self, observed: Regime) -> bool {
        use Regime as R;
        match self {
            PredictedRegime::FiniteTermination => observed == R::FiniteTermination,
            PredictedRegime::FiniteOrSuperlinear => matches!(observed, R::FiniteTermination | R::Superlinear),
            PredictedRegime::Linear => matches!(observed, R::FiniteTermination | R::Superlinear | R::Linear),
            PredictedRegime::Sublinear => observed != R::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalRate {
    pub regime: PredictedRegime,
    /// `p` in `L(z_k) − L* = O(k^{−p})`.
    pub value_power: Option<f64>,
    /// `p` in `‖z_k − z*‖ = O(k^{−p})`.
    pub iterate_power: Option<f64>,
}

/// Rate guaranteed by exponent `q ∈ [0, 1)`.
pub fn theoretical_rate(q: f64) -> Result<TheoreticalRate> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::usage(format!("exponent q must lie in [0, 1), got {q}")));
    }
    let (regime, value_power, iterate_power) = if q == 0.0 {
        (PredictedRegime::FiniteTermination, None, None)
    } else if q < 0.5 {
        (PredictedRegime::FiniteOrSuperlinear, None, None)
    } else if q == 0.5 {
        (PredictedRegime::Linear, None, None)
    } else {
        let d = 2.0 * q - 1.0;
        (PredictedRegime::Sublinear, Some(1.0 / d), Some((1.0 - q) / d))
    };
    Ok(TheoreticalRate {
        regime,
        value_power,
        iterate_power,
    })
}

/// Inverse of the value power `1/(2q − 1)`.
pub fn implied_q_from_value_power(p: f64) -> f64 {
    (1.0 + 1.0 / p) / 2.0
}

/// Inverse of the iterate power `(1 − q)/(2q − 1)`.
pub fn implied_q_from_iterate_power(p: f64) -> f64 {
    (1.0 + p) / (1.0 + 2.0 * p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Errors at or below this count as exactly converged.
    pub zero_tol: f64,
    /// Last ratio must fall below this for a superlinear verdict.
    pub super_tol: f64,
    /// Number of trailing ratios examined for the superlinear test.
    pub super_window: usize,
    pub lin_lo: f64,
    pub lin_hi: f64,
    /// Maximum `(max − min)/mean` over the tail ratios.
    pub lin_spread: f64,
    pub r2_min: f64,
    /// Sequences shorter than this are inconclusive unless they hit the
    /// floating-point floor first.
    pub min_len: usize,
    /// Ratios are formed only while `e_k > floor_factor·eps·(|reference| + max e)`.
    pub floor_factor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            zero_tol: 0.0,
            super_tol: 0.1,
            super_window: 5,
            lin_lo: 0.05,
            lin_hi: 0.95,
            lin_spread: 0.1,
            r2_min: 0.99,
            min_len: 10,
            floor_factor: 1e2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: Regime,
    pub fitted_ratio: Option<f64>,
    pub fitted_exponent: Option<f64>,
    pub implied_q: Option<f64>,
    /// Inclusive index range the verdict rests on.
    pub window: (usize, usize),
    pub theoretical_regime: Option<PredictedRegime>,
    /// Whether the reference was taken from the data itself.
    pub estimated_reference: bool,
    pub diagnostic: Option<String>,
    pub config: ClassifierConfig,
}

impl RateReport {
    fn bare(regime: Regime, window: (usize, usize), cfg: &ClassifierConfig) -> Self {
        RateReport {
            regime,
            fitted_ratio: None,
            fitted_exponent: None,
            implied_q: None,
            window,
            theoretical_regime: None,
            estimated_reference: false,
            diagnostic: None,
            config: *cfg,
        }
    }

    fn inconclusive(window: (usize, usize), cfg: &ClassifierConfig, why: impl Into<String>) -> Self {
        RateReport {
            diagnostic: Some(why.into()),
            ..Self::bare(Regime::Inconclusive, window, cfg)
        }
    }

    /// Records the regime predicted by `q` next to the observed one.
    pub fn with_prediction(mut self, q: f64) -> Result<Self> {
        self.theoretical_regime = Some(theoretical_rate(q)?.regime);
        Ok(self)
    }

    /// `Some(true)` when the observation is at least as fast as predicted.
    pub fn matches_prediction(&self) -> Option<bool> {
        self.theoretical_regime.map(|p| p.admits(self.regime))
    }
}

#[derive(Clone, Copy)]
enum SequenceKind {
    Values,
    Iterates,
}

/// Ordinary least squares `y ≈ a + b·x`; returns `(b, r²)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (b, r2)
}

/// Core classifier over nonnegative errors `e_k`.
fn classify_errors(e: &[f64], scale: f64, kind: SequenceKind, cfg: &ClassifierConfig) -> RateReport {
    let len = e.len();
    if len == 0 {
        return RateReport::inconclusive((0, 0), cfg, "empty sequence");
    }
    let last = len - 1;

    // Exactly converged from some index on.
    let tail_zero = e.iter().rev().take_while(|&&v| v <= cfg.zero_tol).count();
    if tail_zero > 0 {
        return RateReport::bare(Regime::FiniteTermination, (len - tail_zero, last), cfg);
    }

    // Round-off in e_k is relative to the magnitudes it was computed from,
    // so the floor scales with both the reference and the sequence itself.
    let top = e.iter().copied().fold(0.0, f64::max);
    let floor = cfg.floor_factor * f64::EPSILON * (scale + top);
    let usable = e.iter().take_while(|&&v| v > floor).count();
    let hit_floor = usable < len;
    if usable < cfg.min_len && !hit_floor {
        return RateReport::inconclusive(
            (0, last),
            cfg,
            format!("{len} entries, fewer than min_len = {}", cfg.min_len),
        );
    }
    if usable < 4 {
        return RateReport::inconclusive(
            (0, last),
            cfg,
            format!("only {usable} entries above the floating-point floor {floor:e}"),
        );
    }
    let e = &e[..usable];
    let ratios: Vec<f64> = e.windows(2).map(|w| w[1] / w[0]).collect();

    // Superlinear: trailing ratios shrink steadily and end small.
    let sw = cfg.super_window.max(3).min(ratios.len());
    if ratios.len() >= 3 {
        let tail = &ratios[ratios.len() - sw..];
        let shrinking = tail.windows(2).all(|w| w[1] < 0.9 * w[0]);
        if shrinking && tail[sw - 1] < cfg.super_tol {
            return RateReport::bare(Regime::Superlinear, (usable - 1 - sw, usable - 1), cfg);
        }
    }

    // Linear: the second half of the ratios is flat inside [lin_lo, lin_hi].
    if ratios.len() >= 5 {
        let lw = (ratios.len() / 2).max(5);
        let tail = &ratios[ratios.len() - lw..];
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = tail.iter().sum::<f64>() / lw as f64;
        if lo >= cfg.lin_lo && hi <= cfg.lin_hi && (hi - lo) / mean < cfg.lin_spread {
            let rho = (tail.iter().map(|r| r.ln()).sum::<f64>() / lw as f64).exp();
            return RateReport {
                fitted_ratio: Some(rho),
                ..RateReport::bare(Regime::Linear, (usable - 1 - lw, usable - 1), cfg)
            };
        }
    }

    // Sublinear: log e_k affine in log k over the last three quarters.
    let start = usable / 4;
    if usable - start >= 3 {
        let xs: Vec<f64> = (start..usable).map(|i| ((i + 1) as f64).ln()).collect();
        let ys: Vec<f64> = e[start..].iter().map(|v| v.ln()).collect();
        let (slope, r2) = least_squares(&xs, &ys);
        if slope < 0.0 && r2 > cfg.r2_min {
            let p = -slope;
            let q = match kind {
                SequenceKind::Values => implied_q_from_value_power(p),
                SequenceKind::Iterates => implied_q_from_iterate_power(p),
            };
            return RateReport {
                fitted_exponent: Some(p),
                implied_q: Some(q),
                ..RateReport::bare(Regime::Sublinear, (start, usable - 1), cfg)
            };
        }
        return RateReport::inconclusive(
            (0, usable - 1),
            cfg,
            format!("no regime fits; log-log slope {slope:.4}, r² {r2:.4}"),
        );
    }
    RateReport::inconclusive((0, usable - 1), cfg, "no regime fits")
}

/// Classifies `values_k − reference`.
///
/// Fails on non-finite input, increasing values or values more than `1e-12`
/// below `reference`; never on short input, which is reported inconclusive.
pub fn classify_value_rate<T: Scalar>(values: &[T], reference: T, cfg: &ClassifierConfig) -> Result<RateReport> {
    let r = reference.as_f64();
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    if !r.is_finite() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("value sequence".into()));
    }
    let slack = |a: f64| 1e-12 * (1.0 + a.abs());
    if let Some(i) = v.windows(2).position(|w| w[1] > w[0] + slack(w[0])) {
        return Err(Error::usage(format!("values increase at index {}", i + 1)));
    }
    if let Some(i) = v.iter().position(|&x| x < r - 1e-12) {
        return Err(Error::usage(format!("value at index {i} lies below the reference")));
    }
    let e: Vec<f64> = v.iter().map(|x| (x - r).max(0.0)).collect();
    Ok(classify_errors(&e, r, SequenceKind::Values, cfg))
}

/// Like [`classify_value_rate`] with the reference taken as the last value.
/// The last entry is then dropped, since its error is zero by construction.
pub fn classify_value_rate_estimated<T: Scalar>(values: &[T], cfg: &ClassifierConfig) -> Result<RateReport> {
    let Some((&reference, head)) = values.split_last() else {
        return Ok(RateReport::inconclusive((0, 0), cfg, "empty sequence"));
    };
    let mut report = classify_value_rate(head, reference, cfg)?;
    report.estimated_reference = true;
    Ok(report)
}

/// Classifies `‖z_k − limit‖` over a list of iterates.
pub fn classify_iterate_distances<T: Scalar>(points: &[Point<T>], limit: &Point<T>, cfg: &ClassifierConfig) -> Result<RateReport> {
    if let Some(p) = points.iter().find(|p| p.dims() != limit.dims()) {
        let (got_n, got_m) = p.dims();
        let (expected_n, expected_m) = limit.dims();
        return Err(Error::DimensionMismatch {
            expected_n,
            expected_m,
            got_n,
            got_m,
        });
    }
    let d: Vec<f64> = points.iter().map(|p| p.dist(limit).as_f64()).collect();
    Ok(classify_errors(&d, limit.norm().as_f64(), SequenceKind::Iterates, cfg))
}

pub fn classify_iterate_rate<T: Scalar>(trace: &RunTrace<T>, limit: &Point<T>, cfg: &ClassifierConfig) -> Result<RateReport> {
    let points: Vec<Point<T>> = trace.points().cloned().collect();
    classify_iterate_distances(&points, limit, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSumCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `Σ_{j=k}^{k+l} (a_j − a_{j+1})/a_j^q ≤ (a_k^{1−q} − a_{k+l+1}^{1−q})/(1 − q)`
/// for a non-increasing nonnegative sequence, with slack `1e-12`.
pub fn partial_sum_bound_check<T: Scalar>(a: &[T], q: f64, k: usize, l: usize) -> Result<PartialSumCheck> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::usage(format!("q must lie in (0, 1), got {q}")));
    }
    let end = k + l + 1;
    if a.len() <= end {
        return Err(Error::usage(format!("need at least {} entries, got {}", end + 1, a.len())));
    }
    let a: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
    if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::usage("sequence must be finite and nonnegative"));
    }
    if a.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::usage("sequence must be non-increasing"));
    }
    if let Some(j) = (k..end).find(|&j| a[j] == 0.0) {
        return Err(Error::Domain(format!("a_{j} = 0 inside the summation range")));
    }
    let lhs: f64 = (k..end).map(|j| (a[j] - a[j + 1]) / a[j].powf(q)).sum();
    let rhs = (a[k].powf(1.0 - q) - a[end].powf(1.0 - q)) / (1.0 - q);
    Ok(PartialSumCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

/// Indices `k ≥ 1` with `Ψ_{k−1} − Ψ_k < c0·Ψ_k^{2q} − 1e-12`, where
/// `Ψ_k = values_k − reference` (clamped at zero).
pub fn descent_gap_violations<T: Scalar>(values: &[T], reference: T, q: f64, c0: f64) -> Vec<usize> {
    let psi: Vec<f64> = values.iter().map(|v| (v.as_f64() - reference.as_f64()).max(0.0)).collect();
    (1..psi.len())
        .filter(|&k| psi[k - 1] - psi[k] < c0 * psi[k].powf(2.0 * q) - 1e-12)
        .collect()
}

pub fn descent_gap_check<T: Scalar>(trace: &RunTrace<T>, reference: T, q: f64, c0: f64) -> Vec<usize> {
    descent_gap_violations(&trace.values(), reference, q, c0)
}

/// `min_k (Ψ_{k−1} − Ψ_k)/Ψ_k^{2q}` over entries with `Ψ_k > 0`: the largest
/// constant with no violations (up to the check's slack). `None` when no
/// entry has a positive gap to the reference.
pub fn empirical_c0<T: Scalar>(values: &[T], reference: T, q: f64) -> Option<f64> {
    let psi: Vec<f64> = values.iter().map(|v| (v.as_f64() - reference.as_f64()).max(0.0)).collect();
    (1..psi.len())
        .filter(|&k| psi[k] > 0.0)
        .map(|k| (psi[k - 1] - psi[k]) / psi[k].powf(2.0 * q))
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ClassifierConfig {
        ClassifierConfig::default()
    }

    #[test]
    fn regime_map() {
        assert_eq!(theoretical_rate(0.0).unwrap().regime, PredictedRegime::FiniteTermination);
        assert_eq!(theoretical_rate(0.3).unwrap().regime, PredictedRegime::FiniteOrSuperlinear);
        assert_eq!(theoretical_rate(0.5).unwrap().regime, PredictedRegime::Linear);
        let s = theoretical_rate(0.75).unwrap();
        assert_eq!(s.regime, PredictedRegime::Sublinear);
        assert_eq!(s.value_power, Some(2.0));
        assert_eq!(s.iterate_power, Some(0.5));
        assert!(theoretical_rate(1.0).is_err());
        assert!(theoretical_rate(-0.1).is_err());
    }

    #[test]
    fn power_identities() {
        for q in [0.51, 0.6, 0.75, 0.9, 0.99] {
            let s = theoretical_rate(q).unwrap();
            assert!((s.value_power.unwrap() * (2.0 * q - 1.0) - 1.0).abs() < 1e-12);
            assert!((s.iterate_power.unwrap() * (2.0 * q - 1.0) - (1.0 - q)).abs() < 1e-12);
            assert!((implied_q_from_value_power(s.value_power.unwrap()) - q).abs() < 1e-12);
            assert!((implied_q_from_iterate_power(s.iterate_power.unwrap()) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_is_linear() {
        let e: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k)).collect();
        let r = classify_value_rate(&e, 0.0, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Linear);
        assert!((r.fitted_ratio.unwrap() - 0.5).abs() < 0.01);
        assert!(r.fitted_exponent.is_none());
    }

    #[test]
    fn doubly_exponential_is_superlinear() {
        let e: Vec<f64> = (0..8).map(|k| 2f64.powf(-(2f64.powi(k)))).collect();
        let r = classify_value_rate(&e, 0.0, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Superlinear, "{r:?}");
        assert!(r.fitted_ratio.is_none());
    }

    #[test]
    fn inverse_square_is_sublinear() {
        let e: Vec<f64> = (1..=10_000).map(|k| (k as f64).powi(-2)).collect();
        let r = classify_value_rate(&e, 0.0, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Sublinear);
        assert!((r.fitted_exponent.unwrap() - 2.0).abs() < 0.05);
        assert!((r.implied_q.unwrap() - 0.75).abs() < 0.01);
    }

    #[test]
    fn iterate_power_inverts_to_q() {
        let limit = Point::new(vec![0.0], vec![0.0]).unwrap();
        let pts: Vec<Point<f64>> = (1..=10_000)
            .map(|k| Point::new(vec![(k as f64).powf(-0.5)], vec![0.0]).unwrap())
            .collect();
        let r = classify_iterate_distances(&pts, &limit, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Sublinear);
        assert!((r.fitted_exponent.unwrap() - 0.5).abs() < 1e-6);
        assert!((r.implied_q.unwrap() - 0.75).abs() < 1e-6);

        let geo: Vec<Point<f64>> = (0..40).map(|k| Point::new(vec![0.5f64.powi(k)], vec![0.0]).unwrap()).collect();
        let r = classify_iterate_distances(&geo, &limit, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Linear);
        assert!((r.fitted_ratio.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn planted_exact_limit_is_finite() {
        let limit = Point::new(vec![1.0], vec![2.0]).unwrap();
        let pts: Vec<Point<f64>> = (0..20)
            .map(|k| {
                let off = if k < 7 { 0.3 / (k + 1) as f64 } else { 0.0 };
                Point::new(vec![1.0 + off], vec![2.0]).unwrap()
            })
            .collect();
        let r = classify_iterate_distances(&pts, &limit, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::FiniteTermination);
        assert_eq!(r.window, (7, 19));
    }

    #[test]
    fn short_sequences_are_inconclusive() {
        let r = classify_value_rate(&[1.0, 0.5, 0.25], 0.0, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Inconclusive);
        assert!(r.diagnostic.is_some());
        let r = classify_value_rate::<f64>(&[], 0.0, &cfg()).unwrap();
        assert_eq!(r.regime, Regime::Inconclusive);
    }

    #[test]
    fn rejects_increasing_or_below_reference() {
        assert!(classify_value_rate(&[1.0, 2.0], 0.0, &cfg()).is_err());
        assert!(classify_value_rate(&[1.0, -1.0], 0.0, &cfg()).is_err());
        assert!(classify_value_rate(&[1.0, f64::NAN], 0.0, &cfg()).is_err());
    }

    #[test]
    fn scaling_invariance() {
        let seqs: Vec<Vec<f64>> = vec![
            (0..60).map(|k| 0.5f64.powi(k)).collect(),
            (1..=10_000).map(|k| (k as f64).powi(-2)).collect(),
            (0..8).map(|k| 2f64.powf(-(2f64.powi(k)))).collect(),
        ];
        for e in &seqs {
            let base = classify_value_rate(e, 0.0, &cfg()).unwrap();
            for alpha in [1e-6, 1.0, 1e6] {
                let s: Vec<f64> = e.iter().map(|v| alpha * v).collect();
                let r = classify_value_rate(&s, 0.0, &cfg()).unwrap();
                assert_eq!(r.regime, base.regime, "alpha {alpha}");
                if let (Some(a), Some(b)) = (r.fitted_ratio, base.fitted_ratio) {
                    assert!((a - b).abs() < 1e-9);
                }
                if let (Some(a), Some(b)) = (r.fitted_exponent, base.fitted_exponent) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn estimated_reference_drops_last() {
        let v: Vec<f64> = (0..40).map(|k| 1.0 + 0.5f64.powi(k)).chain([1.0]).collect();
        let r = classify_value_rate_estimated(&v, &cfg()).unwrap();
        assert!(r.estimated_reference);
        assert_eq!(r.regime, Regime::Linear);
    }

    #[test]
    fn prediction_matching() {
        let e: Vec<f64> = (0..8).map(|k| 2f64.powf(-(2f64.powi(k)))).collect();
        let r = classify_value_rate(&e, 0.0, &cfg()).unwrap().with_prediction(1.0 / 3.0).unwrap();
        assert_eq!(r.matches_prediction(), Some(true));
        let lin: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k)).collect();
        let r = classify_value_rate(&lin, 0.0, &cfg()).unwrap().with_prediction(0.3).unwrap();
        assert_eq!(r.matches_prediction(), Some(false));
        assert!(PredictedRegime::Linear.admits(Regime::Superlinear));
        assert!(!PredictedRegime::Linear.admits(Regime::Sublinear));
    }

    #[test]
    fn partial_sum_examples() {
        let a = [1.0, 0.5, 0.25, 0.125];
        let c = partial_sum_bound_check(&a, 0.5, 0, 1).unwrap();
        let lhs = 0.5 / 1.0 + 0.25 / 0.5f64.sqrt();
        assert!((c.lhs - lhs).abs() < 1e-15);
        assert!((c.rhs - 1.0).abs() < 1e-15);
        assert!(c.holds);

        let flat = [3.0; 6];
        let c = partial_sum_bound_check(&flat, 0.4, 1, 2).unwrap();
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
        assert!(c.holds);

        let arith: Vec<f64> = std::iter::once(1.0).chain((0..60).map(|j| 0.9 - 0.01 * j as f64)).collect();
        assert!(partial_sum_bound_check(&arith, 0.3, 0, 50).unwrap().holds);
    }

    #[test]
    fn partial_sum_errors() {
        assert!(matches!(
            partial_sum_bound_check(&[1.0, 0.0, 0.0], 0.5, 0, 1),
            Err(Error::Domain(_))
        ));
        assert!(partial_sum_bound_check(&[1.0, 0.5], 0.5, 0, 1).is_err());
        assert!(partial_sum_bound_check(&[1.0, 2.0, 0.5], 0.5, 0, 1).is_err());
        assert!(partial_sum_bound_check(&[1.0, 0.5, 0.2], 1.0, 0, 1).is_err());
        // A zero just past the summation range is allowed.
        assert!(partial_sum_bound_check(&[1.0, 0.5, 0.0], 0.5, 0, 1).unwrap().holds);
    }

    #[test]
    fn descent_gap_geometric() {
        // Kept short enough that 0.5·Ψ_k stays above the 1e-12 slack.
        let v: Vec<f64> = (0..15).map(|k| 4f64.powi(-k)).collect();
        assert!(descent_gap_violations(&v, 0.0, 0.5, 3.0).is_empty());
        assert_eq!(descent_gap_violations(&v, 0.0, 0.5, 3.5), (1..15).collect::<Vec<_>>());
        assert_eq!(empirical_c0(&v, 0.0, 0.5), Some(3.0));
        assert_eq!(empirical_c0(&[1.0, 0.0], 0.0, 0.5), None);
    }
}
