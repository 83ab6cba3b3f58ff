//! Worker profiles, the acceptance rule, cost-quality curves and regimes.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One worker: quality `r` (normalized expected bonus) and opportunity cost `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: u64,
    pub quality: f64,
    pub cost: f64,
}

impl WorkerProfile {
    pub fn new(id: u64, quality: f64, cost: f64) -> Self {
        Self { id, quality, cost }
    }

    /// Checks `quality >= 0` and `cost >= 0`. With `strict_model` the quality
    /// must also lie in `[0, 1]`.
    pub fn validate(&self, strict_model: bool) -> Result<()> {
        if !self.quality.is_finite() || self.quality < 0.0 {
            return Err(Error::invalid(format!(
                "worker {}: quality {} must be finite and nonnegative",
                self.id, self.quality
            )));
        }
        if !self.cost.is_finite() || self.cost < 0.0 {
            return Err(Error::invalid(format!(
                "worker {}: cost {} must be finite and nonnegative",
                self.id, self.cost
            )));
        }
        if strict_model && self.quality > 1.0 {
            return Err(Error::invalid(format!(
                "worker {}: quality {} exceeds 1 under the strict model",
                self.id, self.quality
            )));
        }
        Ok(())
    }

    /// Quality per unit cost; `+inf` for free workers.
    pub fn bang_per_buck(&self) -> f64 {
        if self.cost == 0.0 {
            f64::INFINITY
        } else {
            self.quality / self.cost
        }
    }
}

pub fn validate_workers(workers: &[WorkerProfile], strict_model: bool) -> Result<()> {
    workers.iter().try_for_each(|w| w.validate(strict_model))
}

/// A `(base, bonus)` payment pair. Used both as the single common-pricing
/// policy and as one entry of a personalized policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Offer {
    pub base: f64,
    pub bonus: f64,
}

pub type CommonPolicy = Offer;

impl Offer {
    pub const ZERO: Offer = Offer { base: 0.0, bonus: 0.0 };

    pub fn new(base: f64, bonus: f64) -> Self {
        Self { base, bonus }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base >= 0.0 && self.bonus >= 0.0) || !self.base.is_finite() || !self.bonus.is_finite() {
            return Err(Error::invalid(format!(
                "offer ({}, {}) must have finite nonnegative entries",
                self.base, self.bonus
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Offer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, q={})", self.base, self.bonus)
    }
}

/// One offer per worker, in worker order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersonalizedPolicy {
    pub offers: Vec<Offer>,
}

impl PersonalizedPolicy {
    pub fn validate(&self, workers: usize) -> Result<()> {
        if self.offers.len() != workers {
            return Err(Error::invalid(format!(
                "personalized policy has {} offers for {} workers",
                self.offers.len(),
                workers
            )));
        }
        self.offers.iter().try_for_each(Offer::validate)
    }
}

/// A rational worker takes the task iff `base + bonus * quality >= cost`.
pub fn decide(worker: &WorkerProfile, offer: &Offer) -> bool {
    offer.base + offer.bonus * worker.quality >= worker.cost
}

/// Smallest bonus with which `worker` accepts at `base`, exact under
/// floating-point rounding. `None` for a zero-quality worker the base
/// does not cover.
pub fn covering_bonus(worker: &WorkerProfile, base: f64) -> Option<f64> {
    if base >= worker.cost {
        return Some(0.0);
    }
    if worker.quality <= 0.0 {
        return None;
    }
    let mut q = (worker.cost - base) / worker.quality;
    while base + q * worker.quality < worker.cost {
        q = q.next_up();
    }
    Some(q)
}

/// Expected payment to `worker` under `offer`: `base + bonus * quality` when
/// the worker accepts, zero otherwise.
pub fn expected_payment(worker: &WorkerProfile, offer: &Offer) -> f64 {
    if decide(worker, offer) {
        offer.base + offer.bonus * worker.quality
    } else {
        0.0
    }
}

/// Indices ordered by descending bang-per-buck. Free workers come first;
/// ties keep the original index order.
pub fn sort_by_bang_per_buck(workers: &[WorkerProfile]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..workers.len()).collect();
    order.sort_by(|&a, &b| compare_bang_per_buck(&workers[a], &workers[b]).then(a.cmp(&b)));
    order
}

/// Descending bang-per-buck comparison without forming the ratio:
/// `r_a / c_a > r_b / c_b  <=>  r_a * c_b > r_b * c_a` for positive costs.
fn compare_bang_per_buck(a: &WorkerProfile, b: &WorkerProfile) -> Ordering {
    match (a.cost == 0.0, b.cost == 0.0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => (b.quality * a.cost)
            .partial_cmp(&(a.quality * b.cost))
            .unwrap_or(Ordering::Equal),
    }
}

/// Indices ordered by descending quality, ties by original index.
pub fn sort_by_quality(workers: &[WorkerProfile]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..workers.len()).collect();
    order.sort_by(|&a, &b| {
        workers[b]
            .quality
            .partial_cmp(&workers[a].quality)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Classification of a cost-quality curve `r = f(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `f'(x) <= f(x)/x`: bang-per-buck falls with cost.
    EffortUnresponsive,
    /// `f'(x) >= f(x)/x` and `f''(x) <= 0`.
    EffortSubresponsive,
    /// `f'(x) >= f(x)/x` and `f''(x) >= 0`.
    EffortResponsive,
    Unclassified,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::EffortUnresponsive => "effort-unresponsive",
            Regime::EffortSubresponsive => "effort-subresponsive",
            Regime::EffortResponsive => "effort-responsive",
            Regime::Unclassified => "unclassified",
        };
        f.write_str(s)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A monotone increasing map from cost to quality, with optional analytic
/// first and second derivatives. Missing derivatives fall back to central
/// differences.
#[derive(Clone)]
pub struct CostQualityCurve {
    name: String,
    f: RealFn,
    d1: Option<RealFn>,
    d2: Option<RealFn>,
}

impl fmt::Debug for CostQualityCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostQualityCurve")
            .field("name", &self.name)
            .field("analytic_d1", &self.d1.is_some())
            .field("analytic_d2", &self.d2.is_some())
            .finish()
    }
}

impl CostQualityCurve {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            d1: None,
            d2: None,
        }
    }

    pub fn with_derivatives(
        mut self,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.d1 = Some(Arc::new(d1));
        self.d2 = Some(Arc::new(d2));
        self
    }

    /// `f(x) = a * x^k` with analytic derivatives.
    pub fn power(scale: f64, exponent: f64) -> Self {
        Self::new(format!("{scale}*x^{exponent}"), move |x| scale * x.powf(exponent)).with_derivatives(
            move |x| scale * exponent * x.powf(exponent - 1.0),
            move |x| scale * exponent * (exponent - 1.0) * x.powf(exponent - 2.0),
        )
    }

    /// Monotone piecewise-cubic (Fritsch-Carlson) interpolant through samples.
    /// Samples with equal cost are merged by averaging their quality.
    pub fn from_samples(points: &[(f64, f64)]) -> Result<Self> {
        let interp = MonotoneCubic::new(points)?;
        let interp = Arc::new(interp);
        let (a, b, c) = (interp.clone(), interp.clone(), interp);
        Ok(Self {
            name: "monotone-cubic".into(),
            f: Arc::new(move |x| a.eval(x).0),
            d1: Some(Arc::new(move |x| b.eval(x).1)),
            d2: Some(Arc::new(move |x| c.eval(x).2)),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn derivative(&self, x: f64, h: f64) -> f64 {
        match &self.d1 {
            Some(d) => d(x),
            None => (self.eval(x + h) - self.eval(x - h)) / (2.0 * h),
        }
    }

    fn second_derivative(&self, x: f64, h: f64) -> f64 {
        match &self.d2 {
            Some(d) => d(x),
            None => (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h),
        }
    }
}

/// Relative tolerance on each regime inequality.
pub const REGIME_TOLERANCE: f64 = 1e-9;

/// Classifies `curve` on `[lo, hi]` from `samples` evenly spaced points.
///
/// Ties within tolerance satisfy both sides of an inequality; precedence is
/// unresponsive, then subresponsive, then responsive, so a linear curve is
/// unresponsive.
pub fn classify_regime(curve: &CostQualityCurve, domain: (f64, f64), samples: usize) -> Result<Regime> {
    let (lo, hi) = domain;
    if samples < 2 {
        return Err(Error::invalid("classify_regime needs at least 2 samples"));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::invalid(format!("empty or invalid domain [{lo}, {hi}]")));
    }
    if lo <= 0.0 {
        return Err(Error::domain(format!(
            "domain [{lo}, {hi}] reaches x <= 0 where f(x)/x is singular"
        )));
    }
    let h = 1e-5 * (hi - lo);
    let (mut unres, mut above, mut concave, mut convex) = (true, true, true, true);
    for k in 0..samples {
        let x = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let fx = curve.eval(x);
        let d1 = curve.derivative(x, h);
        let d2 = curve.second_derivative(x, h);
        let ratio = fx / x;
        let tol1 = REGIME_TOLERANCE * d1.abs().max(ratio.abs()).max(f64::MIN_POSITIVE);
        if d1 > ratio + tol1 {
            unres = false;
        }
        if d1 < ratio - tol1 {
            above = false;
        }
        // f'' compares against zero; scale by the curvature a curve of this
        // size would have, plus the round-off floor of a finite difference.
        let mut tol2 = REGIME_TOLERANCE * (d2.abs().max(ratio.abs() / x).max(d1.abs() / x));
        if curve.d2.is_none() {
            tol2 += 8.0 * f64::EPSILON * fx.abs().max(1e-300) / (h * h);
        }
        if d2 > tol2 {
            concave = false;
        }
        if d2 < -tol2 {
            convex = false;
        }
    }
    Ok(if unres {
        Regime::EffortUnresponsive
    } else if above && concave {
        Regime::EffortSubresponsive
    } else if above && convex {
        Regime::EffortResponsive
    } else {
        Regime::Unclassified
    })
}

/// Classifies the empirical curve through the workers' `(cost, quality)`
/// points, fitting a monotone cubic first. Fewer than two distinct positive
/// costs give `Unclassified`.
pub fn classify_profile(workers: &[WorkerProfile], samples: usize) -> Result<Regime> {
    let pts: Vec<(f64, f64)> = workers
        .iter()
        .filter(|w| w.cost > 0.0)
        .map(|w| (w.cost, w.quality))
        .collect();
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if pts.len() < 2 || lo >= hi {
        return Ok(Regime::Unclassified);
    }
    let curve = CostQualityCurve::from_samples(&pts)?;
    classify_regime(&curve, (lo, hi), samples)
}

/// Fritsch-Carlson monotone cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::invalid("interpolation samples must be finite"));
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut xs: Vec<f64> = Vec::with_capacity(pts.len());
        let mut ys: Vec<f64> = Vec::with_capacity(pts.len());
        let mut counts: Vec<f64> = Vec::with_capacity(pts.len());
        for (x, y) in pts {
            if xs.last() == Some(&x) {
                *ys.last_mut().unwrap() += y;
                *counts.last_mut().unwrap() += 1.0;
            } else {
                xs.push(x);
                ys.push(y);
                counts.push(1.0);
            }
        }
        for (y, n) in ys.iter_mut().zip(&counts) {
            *y /= n;
        }
        if xs.len() < 2 {
            return Err(Error::invalid("need at least two distinct abscissae"));
        }
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            slopes[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Value, first and second derivative at `x` (extrapolates with the end cubics).
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        let k = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v =
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        let d = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        let dd =
            ((12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * m0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * m1) / (h * h);
        (v, d, dd)
    }
}

/// Three-point end slope, clipped to keep the interpolant shape-preserving.
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(id: u64, q: f64, c: f64) -> WorkerProfile {
        WorkerProfile::new(id, q, c)
    }

    #[test]
    fn decide_examples() {
        assert!(decide(&w(0, 0.5, 0.25), &Offer::new(0.1, 0.4)));
        assert!(!decide(&w(0, 0.1, 1.0), &Offer::new(0.0, 1.0)));
        let wk = w(0, 0.3, 0.77);
        assert!(decide(&wk, &Offer::new(wk.cost, 0.0)));
    }

    #[test]
    fn expected_payment_examples() {
        assert_eq!(expected_payment(&w(0, 2.0, 2.0), &Offer::new(0.0, 1.0)), 2.0);
        assert_eq!(expected_payment(&w(0, 0.1, 1.0), &Offer::new(0.0, 1.0)), 0.0);
        let pay = expected_payment(&w(0, 0.5, 0.25), &Offer::new(0.0, 5.0 / 7.0));
        assert!((pay - 5.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn bang_per_buck_order() {
        let ws = [w(1, 0.9, 0.3), w(2, 0.5, 0.25), w(3, 0.8, 0.5)];
        assert_eq!(sort_by_bang_per_buck(&ws), vec![0, 1, 2]);
        let eta: Vec<f64> = ws.iter().map(|w| w.bang_per_buck()).collect();
        assert!((eta[0] - 3.0).abs() < 1e-12 && (eta[1] - 2.0).abs() < 1e-12 && (eta[2] - 1.6).abs() < 1e-12);

        let equal = [w(1, 0.2, 0.1), w(2, 0.4, 0.2), w(3, 1.0, 0.5)];
        assert_eq!(sort_by_bang_per_buck(&equal), vec![0, 1, 2]);
        assert_eq!(sort_by_bang_per_buck(&[w(1, 0.3, 0.4)]), vec![0]);

        let with_free = [w(1, 0.9, 0.3), w(2, 0.1, 0.0), w(3, 0.0, 0.0)];
        assert_eq!(sort_by_bang_per_buck(&with_free), vec![1, 2, 0]);
    }

    #[test]
    fn regime_examples() {
        let sqrt = CostQualityCurve::new("sqrt", f64::sqrt);
        assert_eq!(
            classify_regime(&sqrt, (0.1, 1.0), 50).unwrap(),
            Regime::EffortUnresponsive
        );
        let sq = CostQualityCurve::power(1.0, 2.0);
        assert_eq!(classify_regime(&sq, (0.1, 1.0), 50).unwrap(), Regime::EffortResponsive);
        let sq_fd = CostQualityCurve::new("x^2", |x| x * x);
        assert_eq!(
            classify_regime(&sq_fd, (0.1, 1.0), 50).unwrap(),
            Regime::EffortResponsive
        );
        let lin = CostQualityCurve::new("x", |x| x);
        assert_eq!(
            classify_regime(&lin, (0.1, 1.0), 50).unwrap(),
            Regime::EffortUnresponsive
        );
        let sub = CostQualityCurve::new("sqrt-0.5", |x| x.sqrt() - 0.5);
        assert_eq!(
            classify_regime(&sub, (0.3, 1.0), 50).unwrap(),
            Regime::EffortSubresponsive
        );
        let s_curve = CostQualityCurve::new("logistic", |x: f64| 1.0 / (1.0 + (-10.0 * (x - 0.5)).exp()));
        assert_eq!(
            classify_regime(&s_curve, (0.05, 1.0), 50).unwrap(),
            Regime::Unclassified
        );
    }

    #[test]
    fn regime_rejects_zero_in_domain() {
        let sqrt = CostQualityCurve::new("sqrt", f64::sqrt);
        assert!(matches!(classify_regime(&sqrt, (0.0, 1.0), 10), Err(Error::Domain(_))));
        assert!(classify_regime(&sqrt, (0.1, 1.0), 1).is_err());
    }

    #[test]
    fn monotone_cubic_reproduces_samples_and_stays_monotone() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|k| (k as f64 / 8.0, (k as f64 / 8.0).powi(3))).collect();
        let m = MonotoneCubic::new(&pts).unwrap();
        for &(x, y) in &pts {
            assert!((m.eval(x).0 - y).abs() < 1e-12);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=200 {
            let x = 0.125 + 0.875 * k as f64 / 200.0;
            let v = m.eval(x).0;
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn profile_classification_uses_interpolant() {
        let ws: Vec<WorkerProfile> = (1..=12)
            .map(|k| {
                let c = 0.08 * k as f64;
                w(k, c.sqrt(), c)
            })
            .collect();
        assert_eq!(classify_profile(&ws, 100).unwrap(), Regime::EffortUnresponsive);
        assert_eq!(classify_profile(&ws[..1], 100).unwrap(), Regime::Unclassified);
    }

    proptest! {
        #[test]
        fn decide_monotone_in_offer(q in 0.0..2.0f64, c in 0.0..2.0f64, p in 0.0..2.0f64, b in 0.0..2.0f64,
                                    dp in 0.0..1.0f64, db in 0.0..1.0f64) {
            let wk = w(0, q, c);
            if decide(&wk, &Offer::new(p, b)) {
                prop_assert!(decide(&wk, &Offer::new(p + dp, b + db)));
            }
            // zero payment exactly on decline (free workers may accept for nothing)
            let pay = expected_payment(&wk, &Offer::new(p, b));
            if c > 0.0 {
                prop_assert_eq!(pay == 0.0, !decide(&wk, &Offer::new(p, b)));
            } else if !decide(&wk, &Offer::new(p, b)) {
                prop_assert_eq!(pay, 0.0);
            }
        }

        #[test]
        fn regime_invariant_under_scaling(alpha in 0.1..10.0f64, k in 0.2..3.0f64) {
            let base = CostQualityCurve::power(1.0, k);
            let scaled = CostQualityCurve::power(alpha, k);
            prop_assert_eq!(
                classify_regime(&base, (0.1, 1.0), 40).unwrap(),
                classify_regime(&scaled, (0.1, 1.0), 40).unwrap()
            );
        }

        #[test]
        fn bang_per_buck_sort_is_idempotent_permutation(
            ws in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..20)
        ) {
            let workers: Vec<WorkerProfile> = ws.iter().enumerate().map(|(i, &(q, c))| w(i as u64, q, c)).collect();
            let order = sort_by_bang_per_buck(&workers);
            let mut seen = order.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..workers.len()).collect::<Vec<_>>());
            let sorted: Vec<WorkerProfile> = order.iter().map(|&i| workers[i]).collect();
            prop_assert_eq!(sort_by_bang_per_buck(&sorted), (0..workers.len()).collect::<Vec<_>>());
        }
    }
}
