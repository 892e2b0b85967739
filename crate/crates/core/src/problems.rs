//! Catalog of concrete objectives with closed-form gradients, subdifferential
//! distance models, nonsmooth masks, known critical points and exponent
//! certificates, plus builders for separable sums and proximal perturbations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockProx, ExtReal, ObjectiveSpec, Point, StepsizePolicy};
use crate::plk::{estimate_exponent_with, proximal_perturbation_exponent, separable_sum_exponent, EstimateOptions, PlkCertificate};
use crate::rates::{theoretical_rate, PredictedRegime};
use crate::scalar::{sign, Scalar};

/// Cube `center ± radius` (infinity-norm ball).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct VerificationBox<T> {
    pub center: Point<T>,
    pub radius: T,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry<T> {
    pub name: String,
    pub summary: String,
    pub objective: ObjectiveSpec<T>,
    /// Critical points with their values. Points on a masked locus are
    /// critical by a one-sided argument recorded in `summary`.
    pub known_critical_points: Vec<(Point<T>, T)>,
    pub plk_certificates: Vec<PlkCertificate<T>>,
    pub expected_regime: Option<PredictedRegime>,
    pub default_box: VerificationBox<T>,
    /// Whether the solver runs on this entry (it needs a finite infimum).
    pub solver_eligible: bool,
    /// The entry is a known failure of any exponent certificate.
    pub plk_fails: bool,
    pub default_start: Point<T>,
    pub r_minus: T,
    pub r_plus: T,
}

impl<T: Scalar> CatalogEntry<T> {
    pub fn is_nonsmooth(&self, p: &Point<T>) -> bool {
        self.objective.is_masked(p)
    }

    /// Constant stepsizes inside this entry's `(r₋, r₊)`.
    pub fn policy(&self, lambda: T, mu: T) -> Result<StepsizePolicy<T>> {
        StepsizePolicy::constant(lambda, mu, self.r_minus, self.r_plus)
    }

    pub fn default_policy(&self) -> Result<StepsizePolicy<T>> {
        self.policy(T::lit(0.5), T::lit(0.5))
    }

    pub fn describe(&self) -> EntrySummary {
        EntrySummary {
            name: self.name.clone(),
            n: self.objective.n,
            m: self.objective.m,
            summary: self.summary.clone(),
            certificates: self
                .plk_certificates
                .iter()
                .map(|c| CertificateSummary {
                    q: c.q.as_f64(),
                    m: c.m.as_f64(),
                    eta: c.eta.as_f64(),
                    radius: c.radius.as_f64(),
                })
                .collect(),
            expected_regime: self.expected_regime,
            solver_eligible: self.solver_eligible,
            plk_fails: self.plk_fails,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub q: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub eta: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub summary: String,
    pub certificates: Vec<CertificateSummary>,
    pub expected_regime: Option<PredictedRegime>,
    pub solver_eligible: bool,
    pub plk_fails: bool,
}

const WIDE_WINDOW: f64 = 1e6;

fn pow15<T: Scalar>(u: T) -> T {
    u.abs().powf(T::three_halves())
}

/// `d/du |u|^{3/2}`.
fn dpow15<T: Scalar>(u: T) -> T {
    T::three_halves() * sign(u) * u.abs().sqrt()
}

fn hypot2<T: Scalar>(a: T, b: T) -> T {
    (a * a + b * b).sqrt()
}

fn origin<T: Scalar>(n: usize, m: usize) -> Point<T> {
    Point::zeros(n, m)
}

fn kink_at_zero<T: Scalar>() -> BlockProx<T> {
    BlockProx::CoordinateWise { kinks: vec![T::zero()] }
}

fn cert<T: Scalar>(at: Point<T>, q: f64, m: f64, radius: f64) -> PlkCertificate<T> {
    PlkCertificate::new(at, T::zero(), T::lit(q), T::lit(m), T::lit(WIDE_WINDOW), T::lit(radius))
        .expect("catalog certificates are valid")
}

fn one_one<T: Scalar>() -> Point<T> {
    Point::new(vec![T::one()], vec![T::one()]).expect("finite")
}

fn defaults<T: Scalar>(name: &str, summary: &str, objective: ObjectiveSpec<T>, radius: f64) -> CatalogEntry<T> {
    let (n, m) = (objective.n, objective.m);
    CatalogEntry {
        name: name.into(),
        summary: summary.into(),
        objective,
        known_critical_points: vec![(origin(n, m), T::zero())],
        plk_certificates: Vec::new(),
        expected_regime: None,
        default_box: VerificationBox {
            center: origin(n, m),
            radius: T::lit(radius),
        },
        solver_eligible: true,
        plk_fails: false,
        default_start: one_one(),
        r_minus: T::lit(0.1),
        r_plus: T::one(),
    }
}

/// `|x|^{3/2} + x²`, one block.
pub fn example1<T: Scalar>() -> CatalogEntry<T> {
    let obj = ObjectiveSpec::new("example1", 1, 0)
        .with_f(|x: &[T]| ExtReal::Finite(pow15(x[0])))
        .with_coupling(|x: &[T], _| x[0] * x[0], |x: &[T], _| (vec![T::lit(2.0) * x[0]], Vec::new()))
        .with_subdiff_dist(|p: &Point<T>| {
            let x = p.x()[0];
            Some((dpow15(x) + T::lit(2.0) * x).abs())
        })
        .with_x_prox(kink_at_zero())
        .with_critical_value(T::zero());
    let o = origin(1, 0);
    CatalogEntry {
        // 1/(M(1 − q)) = 1/5 globally; = 1 (the cube inequality) locally.
        plk_certificates: vec![cert(o.clone(), 1.0 / 3.0, 7.5, 5.0), cert(o, 1.0 / 3.0, 1.5, 0.1)],
        expected_regime: Some(PredictedRegime::FiniteOrSuperlinear),
        solver_eligible: false,
        default_start: Point::new(vec![T::one()], vec![]).expect("finite"),
        ..defaults(
            "example1",
            "one-block |x|^{3/2} + x^2; exponent 1/3 at the origin despite the Lipschitz gradient of x^2",
            obj,
            5.0,
        )
    }
}

/// `|x|^{3/2} + y²`, block separable.
pub fn example2<T: Scalar>() -> CatalogEntry<T> {
    let obj = ObjectiveSpec::new("example2", 1, 1)
        .with_f(|x: &[T]| ExtReal::Finite(pow15(x[0])))
        .with_g(|y: &[T]| ExtReal::Finite(y[0] * y[0]))
        .with_subdiff_dist(|p: &Point<T>| Some(hypot2(dpow15(p.x()[0]), T::lit(2.0) * p.y()[0])))
        .with_x_prox(kink_at_zero())
        .with_critical_value(T::zero());
    CatalogEntry {
        plk_certificates: vec![cert(origin(1, 1), 0.5, 2.0, 1.0)],
        expected_regime: Some(PredictedRegime::Linear),
        ..defaults(
            "example2",
            "separable |x|^{3/2} + y^2; block exponents 1/3 and 1/2 combine to 1/2, which is the smallest",
            obj,
            1.0,
        )
    }
}

/// `x² + y`: no critical point, only used by the estimator.
pub fn example3<T: Scalar>() -> CatalogEntry<T> {
    let obj = ObjectiveSpec::new("example3", 1, 1)
        .with_f(|x: &[T]| ExtReal::Finite(x[0] * x[0]))
        .with_g(|y: &[T]| ExtReal::Finite(y[0]))
        .with_subdiff_dist(|p: &Point<T>| Some(hypot2(T::lit(2.0) * p.x()[0], T::one())));
    CatalogEntry {
        known_critical_points: Vec::new(),
        solver_eligible: false,
        ..defaults(
            "example3",
            "x^2 + y; gradient never vanishes, every exponent in [0, 1) works (estimator only)",
            obj,
            0.01,
        )
    }
}

/// `|x|^{3/2} + |y|^{3/2} + (x − y)²`.
pub fn example4<T: Scalar>() -> CatalogEntry<T> {
    let obj = ObjectiveSpec::new("example4", 1, 1)
        .with_f(|x: &[T]| ExtReal::Finite(pow15(x[0])))
        .with_g(|y: &[T]| ExtReal::Finite(pow15(y[0])))
        .with_coupling(coupling_value, coupling_grad)
        .with_subdiff_dist(|p: &Point<T>| {
            let (x, y) = (p.x()[0], p.y()[0]);
            let c = T::lit(2.0) * (x - y);
            Some(hypot2(dpow15(x) + c, dpow15(y) - c))
        })
        .with_nonsmooth_mask(on_an_axis)
        .with_x_prox(kink_at_zero())
        .with_y_prox(kink_at_zero())
        .with_critical_value(T::zero());
    CatalogEntry {
        // ‖∇L‖³ ≥ L, i.e. 1/(M(1 − q)) = 1 with q = 1/3.
        plk_certificates: vec![cert(origin(1, 1), 1.0 / 3.0, 1.5, 0.5)],
        expected_regime: Some(PredictedRegime::FiniteOrSuperlinear),
        ..defaults(
            "example4",
            "|x|^{3/2} + |y|^{3/2} + (x - y)^2; not separable, exponent 1/3 rather than 1/2",
            obj,
            0.5,
        )
    }
}

/// `|x| + |y| + (x − y)²`.
pub fn example5<T: Scalar>() -> CatalogEntry<T> {
    let obj = ObjectiveSpec::new("example5", 1, 1)
        .with_f(|x: &[T]| ExtReal::Finite(x[0].abs()))
        .with_g(|y: &[T]| ExtReal::Finite(y[0].abs()))
        .with_coupling(coupling_value, coupling_grad)
        .with_subdiff_dist(|p: &Point<T>| {
            let (x, y) = (p.x()[0], p.y()[0]);
            let c = T::lit(2.0) * (x - y);
            Some(hypot2(sign(x) + c, sign(y) - c))
        })
        .with_nonsmooth_mask(on_an_axis)
        .with_x_prox(kink_at_zero())
        .with_y_prox(kink_at_zero())
        .with_critical_value(T::zero());
    CatalogEntry {
        plk_fails: true,
        ..defaults(
            "example5",
            "|x| + |y| + (x - y)^2; 0 lies in [-1, 1]^2, the subdifferential at the origin; \
             off the axes ‖∇L‖ ≥ √2, so no exponent certificate is tight",
            obj,
            0.1,
        )
    }
}

/// `x² + y² + (x − y)²`.
pub fn baseline_quadratic<T: Scalar>() -> CatalogEntry<T> {
    let obj = ObjectiveSpec::new("baseline_quadratic", 1, 1)
        .with_f(|x: &[T]| ExtReal::Finite(x[0] * x[0]))
        .with_g(|y: &[T]| ExtReal::Finite(y[0] * y[0]))
        .with_coupling(coupling_value, coupling_grad)
        .with_subdiff_dist(|p: &Point<T>| {
            let (x, y) = (p.x()[0], p.y()[0]);
            let two = T::lit(2.0);
            Some(hypot2(two * x + two * (x - y), two * y - two * (x - y)))
        })
        .with_critical_value(T::zero());
    CatalogEntry {
        // ‖∇L‖² ≥ 4L since the Hessian's smallest eigenvalue is 2: tight M = 1.
        plk_certificates: vec![cert(origin(1, 1), 0.5, 2.0, 1.0)],
        expected_regime: Some(PredictedRegime::Linear),
        ..defaults("baseline_quadratic", "x^2 + y^2 + (x - y)^2; strongly convex quadratic", obj, 1.0)
    }
}

fn coupling_value<T: Scalar>(x: &[T], y: &[T]) -> T {
    let d = x[0] - y[0];
    d * d
}

fn coupling_grad<T: Scalar>(x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
    let g = T::lit(2.0) * (x[0] - y[0]);
    (vec![g], vec![-g])
}

fn on_an_axis<T: Scalar>(p: &Point<T>) -> bool {
    p.x().iter().chain(p.y()).any(|v| *v == T::zero())
}

pub fn catalog<T: Scalar>() -> Vec<CatalogEntry<T>> {
    vec![
        example1(),
        example2(),
        example3(),
        example4(),
        example5(),
        baseline_quadratic(),
    ]
}

pub fn lookup<T: Scalar>(name: &str) -> Option<CatalogEntry<T>> {
    catalog().into_iter().find(|e| e.name == name)
}

/// A scalar function with a known critical point and exponent inequality
/// `|f'(u)| ≥ (f(u) − f(ū))^α / (M(1 − α))` on `ū ± half_width`.
#[derive(Clone)]
pub struct ScalarBlock<T> {
    pub value: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub deriv: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub critical_point: T,
    pub exponent: T,
    pub multiplier: T,
    pub half_width: T,
    pub kinks: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for ScalarBlock<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarBlock")
            .field("critical_point", &self.critical_point)
            .field("exponent", &self.exponent)
            .field("multiplier", &self.multiplier)
            .field("half_width", &self.half_width)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ScalarBlock<T> {
    /// `|u|^p` for `p > 1`: `|f'| = p·t^{1 − 1/p}` exactly, so the exponent
    /// is `1 − 1/p` with multiplier 1.
    pub fn abs_power(p: T, half_width: T) -> Result<Self> {
        if !(p > T::one() && p.is_finite()) {
            return Err(Error::usage(format!("power must exceed 1, got {p}")));
        }
        if !(half_width > T::zero()) {
            return Err(Error::usage("half width must be positive"));
        }
        Ok(ScalarBlock {
            value: Arc::new(move |u: T| u.abs().powf(p)),
            deriv: Arc::new(move |u: T| p * sign(u) * u.abs().powf(p - T::one())),
            critical_point: T::zero(),
            exponent: T::one() - T::one() / p,
            multiplier: T::one(),
            half_width,
            kinks: vec![T::zero()],
        })
    }

    /// Largest gap `f(u) − f(ū)` on the block interval, sampled and
    /// inflated by 10%.
    fn gap_bound(&self) -> T {
        let c = self.critical_point;
        let base = (self.value)(c);
        let n = 1000;
        let top = (0..=n)
            .map(|i| {
                let u = c - self.half_width + T::lit(2.0) * self.half_width * T::from_usize_lossy(i) / T::from_usize_lossy(n);
                (self.value)(u) - base
            })
            .fold(T::zero(), T::max);
        top * T::lit(1.1)
    }
}

/// `Σ_j f_j(u_j)` with the first `⌈k/2⌉` blocks in `x`, the rest in `y` and
/// `Q ≡ 0`.
///
/// The certificate exponent is the largest block exponent `q`. Its
/// multiplier follows from `t_j^{α_j} ≥ t_j^q·T_j^{α_j − q}` (with `T_j`
/// the block's largest gap) and `Σ t_j^{2q} ≥ min(1, k^{1 − 2q})·(Σ t_j)^{2q}`.
pub fn make_separable<T: Scalar>(blocks: Vec<ScalarBlock<T>>) -> Result<CatalogEntry<T>> {
    if blocks.is_empty() {
        return Err(Error::usage("separable sum needs at least one block"));
    }
    let exps: Vec<f64> = blocks.iter().map(|b| b.exponent.as_f64()).collect();
    let q = separable_sum_exponent(&exps)?;
    let k = blocks.len();
    let n = k.div_ceil(2);
    let m = k - n;

    let b_min = blocks
        .iter()
        .map(|b| {
            let bj = 1.0 / (b.multiplier.as_f64() * (1.0 - b.exponent.as_f64()));
            bj * b.gap_bound().as_f64().powf(b.exponent.as_f64() - q)
        })
        .fold(f64::INFINITY, f64::min);
    let b = b_min * (k as f64).powf((1.0 - 2.0 * q) / 2.0).min(1.0);
    // Single power blocks are tight (margin exactly 0); the cushion keeps
    // round-off in `dist` from reading as a violation.
    let big_m = (1.0 + 1e-9) / ((1.0 - q) * b);

    let blocks = Arc::new(blocks);
    let value = {
        let blocks = Arc::clone(&blocks);
        move |offset: usize, v: &[T]| -> T { v.iter().enumerate().map(|(i, &u)| (blocks[offset + i].value)(u)).sum() }
    };
    let fx = value.clone();
    let gy = value;
    let dist_blocks = Arc::clone(&blocks);
    let mut obj = ObjectiveSpec::new("separable", n, m)
        .with_f(move |x: &[T]| ExtReal::Finite(fx(0, x)))
        .with_g(move |y: &[T]| ExtReal::Finite(gy(n, y)))
        .with_subdiff_dist(move |p: &Point<T>| {
            let s: T = p
                .concat()
                .iter()
                .enumerate()
                .map(|(j, &u)| {
                    let d = (dist_blocks[j].deriv)(u);
                    d * d
                })
                .sum();
            Some(s.sqrt())
        });
    let kinks_x: Vec<T> = blocks[..n].iter().flat_map(|b| b.kinks.iter().copied()).collect();
    let kinks_y: Vec<T> = blocks[n..].iter().flat_map(|b| b.kinks.iter().copied()).collect();
    obj = obj
        .with_x_prox(BlockProx::CoordinateWise { kinks: kinks_x })
        .with_y_prox(BlockProx::CoordinateWise { kinks: kinks_y });

    let crit: Vec<T> = blocks.iter().map(|b| b.critical_point).collect();
    let center = Point::from_concat(&crit, n)?;
    let crit_value: T = blocks.iter().map(|b| (b.value)(b.critical_point)).sum();
    obj = obj.with_critical_value(crit_value);
    let radius = blocks.iter().map(|b| b.half_width).fold(T::infinity(), T::min);
    let certificate = PlkCertificate::new(
        center.clone(),
        crit_value,
        T::lit(q),
        T::lit(big_m),
        T::lit(WIDE_WINDOW),
        radius,
    )?;
    let start = Point::new(vec![T::one(); n], vec![T::one(); m])?;
    Ok(CatalogEntry {
        name: "separable".into(),
        summary: format!("block separable sum of {k} scalar blocks"),
        objective: obj,
        known_critical_points: vec![(center.clone(), crit_value)],
        plk_certificates: vec![certificate],
        expected_regime: Some(theoretical_rate(q)?.regime),
        default_box: VerificationBox { center, radius },
        solver_eligible: m > 0,
        plk_fails: false,
        default_start: start,
        r_minus: T::lit(0.1),
        r_plus: T::one(),
    })
}

/// `F(x, y) = f(x) + (β/2)(x − y)²` with `g ≡ 0`.
///
/// The exponent of `f` carries over to `(ū, ū)` when it lies in
/// `[1/2, 1)`; smaller exponents are rejected. The multiplier is the
/// largest sampled `t^α/((1 − α)·dist)` over the box, inflated by 10%.
pub fn make_proximally_perturbed<T: Scalar>(block: ScalarBlock<T>, beta: T) -> Result<CatalogEntry<T>> {
    let alpha = proximal_perturbation_exponent(block.exponent.as_f64(), beta.as_f64())?;
    let c = block.critical_point;
    let half_beta = beta / T::lit(2.0);
    let fv = Arc::clone(&block.value);
    let fd = Arc::clone(&block.deriv);
    let base = (block.value)(c);
    let obj = ObjectiveSpec::new("perturbed", 1, 1)
        .with_f(move |x: &[T]| ExtReal::Finite(fv(x[0])))
        .with_coupling(
            move |x: &[T], y: &[T]| half_beta * (x[0] - y[0]) * (x[0] - y[0]),
            move |x: &[T], y: &[T]| {
                let g = beta * (x[0] - y[0]);
                (vec![g], vec![-g])
            },
        )
        .with_subdiff_dist(move |p: &Point<T>| {
            let (x, y) = (p.x()[0], p.y()[0]);
            let g = beta * (x - y);
            Some(hypot2(fd(x) + g, -g))
        })
        .with_x_prox(BlockProx::CoordinateWise { kinks: block.kinks.clone() })
        .with_critical_value(base);
    let center = Point::new(vec![c], vec![c])?;
    let opts = EstimateOptions {
        reference_value: Some(base),
        ..EstimateOptions::default()
    };
    let est = estimate_exponent_with(&obj, &center, block.half_width, &opts)?;
    let big_m = est
        .multiplier_for(alpha)
        .ok_or_else(|| Error::Estimation("no samples to size the multiplier".into()))?
        * 1.1;
    let certificate = PlkCertificate::new(
        center.clone(),
        base,
        T::lit(alpha),
        T::lit(big_m),
        T::lit(WIDE_WINDOW),
        block.half_width,
    )?;
    Ok(CatalogEntry {
        name: "perturbed".into(),
        summary: format!("f(x) + ({beta}/2)(x - y)^2"),
        objective: obj,
        known_critical_points: vec![(center.clone(), base)],
        plk_certificates: vec![certificate],
        expected_regime: Some(theoretical_rate(alpha)?.regime),
        default_box: VerificationBox {
            center,
            radius: block.half_width,
        },
        solver_eligible: true,
        plk_fails: false,
        default_start: one_one(),
        r_minus: T::lit(0.1),
        r_plus: T::one(),
    })
}
