//! Bonus qualification policies that turn worker ability into quality.
//!
//! Under an `m`-threshold policy a worker who corrects at least `m` of `M`
//! subtasks earns the bonus, so quality is the binomial upper tail
//! `b_m(s) = P[Bin(M, s) >= m]`. Under the linear policy the bonus is
//! proportional to the fraction corrected and quality equals ability.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worker::WorkerProfile;

/// Generator identifier recorded in run manifests. Changing the RNG or the
/// Beta sampler must change this string.
pub const POPULATION_GENERATOR: &str = "chacha8/rand_distr-0.5-beta/logistic-v1";

/// Binomial upper tail `b_m(s)` for fixed `(M, m)` with cached log-binomials.
#[derive(Debug, Clone)]
pub struct ThresholdCurve {
    total: u32,
    threshold: u32,
    ln_binom: Vec<f64>,
}

impl ThresholdCurve {
    pub fn new(total: u32, threshold: u32) -> Result<Self> {
        if total == 0 || threshold == 0 || threshold > total {
            return Err(Error::invalid(format!(
                "threshold policy needs 1 <= m <= M, got m={threshold}, M={total}"
            )));
        }
        let mut ln_fact = Vec::with_capacity(total as usize + 1);
        ln_fact.push(0.0f64);
        for i in 1..=total {
            ln_fact.push(ln_fact[i as usize - 1] + (i as f64).ln());
        }
        let n = total as usize;
        let ln_binom = (0..=n).map(|k| ln_fact[n] - ln_fact[k] - ln_fact[n - k]).collect();
        Ok(Self {
            total,
            threshold,
            ln_binom,
        })
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    /// `P[Bin(M, s) >= m]`.
    ///
    /// Sums whichever tail lies away from the mode, so the leading term is
    /// the largest and is taken in log space; neither overflow nor early
    /// underflow occurs. Past the mode the result is `1 - lower tail`.
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let big_m = self.total as usize;
        let m = self.threshold as usize;
        let ln_s = s.ln();
        let ln_q = (-s).ln_1p();
        let odds = s / (1.0 - s);
        let mode = ((big_m + 1) as f64 * s).floor() as usize;
        let lead = |k: usize| (self.ln_binom[k] + k as f64 * ln_s + (big_m - k) as f64 * ln_q).exp();
        let mut sum = 1.0;
        let mut term = 1.0;
        if mode >= m {
            for k in (1..m).rev() {
                term *= k as f64 / (big_m - k + 1) as f64 / odds;
                sum += term;
                if term < 1e-18 * sum {
                    break;
                }
            }
            (1.0 - lead(m - 1) * sum).clamp(0.0, 1.0)
        } else {
            for k in m..big_m {
                term *= (big_m - k) as f64 / (k + 1) as f64 * odds;
                sum += term;
                if term < 1e-18 * sum {
                    break;
                }
            }
            (lead(m) * sum).clamp(0.0, 1.0)
        }
    }

    /// `d b_m / ds = M * C(M-1, m-1) * s^(m-1) * (1-s)^(M-m)`.
    pub fn derivative(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        let (big_m, m) = (self.total as f64, self.threshold as f64);
        let ln_coef = big_m.ln() + self.ln_binom[self.threshold as usize] + (m / big_m).ln();
        let a = if m > 1.0 { (m - 1.0) * s.ln() } else { 0.0 };
        let b = if big_m > m { (big_m - m) * (-s).ln_1p() } else { 0.0 };
        (ln_coef + a + b).exp()
    }

    /// The ability `s` with `b_m(s) = r`. Exact at the endpoints and in the
    /// closed-form cases `m = 1` and `m = M`; otherwise Newton steps
    /// safeguarded by a bisection bracket on `[0, 1]`.
    pub fn invert(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= 1.0 {
            return 1.0;
        }
        let big_m = self.total as f64;
        if self.threshold == 1 {
            return -((-r).ln_1p() / big_m).exp_m1();
        }
        if self.threshold == self.total {
            return r.powf(1.0 / big_m);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut s = self.threshold as f64 / big_m;
        for _ in 0..200 {
            let f = self.eval(s) - r;
            if f == 0.0 {
                return s;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = self.derivative(s);
            let newton = s - f / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - s).abs() <= 2.0 * f64::EPSILON * s || hi - lo <= 2.0 * f64::EPSILON * hi {
                return next;
            }
            s = next;
        }
        s
    }
}

/// `b_m(s)` for a one-off evaluation.
pub fn bm(s: f64, total: u32, threshold: u32) -> Result<f64> {
    check_unit("ability", s)?;
    Ok(ThresholdCurve::new(total, threshold)?.eval(s))
}

/// Inverse of [`bm`] on `[0, 1]`.
pub fn invert_bm(r: f64, total: u32, threshold: u32) -> Result<f64> {
    check_unit("quality", r)?;
    Ok(ThresholdCurve::new(total, threshold)?.invert(r))
}

fn check_unit(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("{what} {v} outside [0, 1]")));
    }
    Ok(())
}

/// How a worker's ability is turned into quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BonusPolicy {
    /// Bonus only for at least `m` of `M` subtasks done.
    Threshold {
        m: u32,
        #[serde(rename = "M")]
        total: u32,
    },
    /// Bonus proportional to the fraction done.
    Linear {
        #[serde(rename = "M", default = "default_total")]
        total: u32,
    },
}

fn default_total() -> u32 {
    25
}

impl BonusPolicy {
    pub fn label(&self) -> String {
        match self {
            BonusPolicy::Threshold { m, .. } => format!("m={m}"),
            BonusPolicy::Linear { .. } => "linear".into(),
        }
    }

    pub fn total(&self) -> u32 {
        match *self {
            BonusPolicy::Threshold { total, .. } | BonusPolicy::Linear { total } => total,
        }
    }

    /// Quality-to-ability translation for this policy.
    pub fn transform(&self) -> Result<QualityTransform> {
        match *self {
            BonusPolicy::Threshold { m, total } => Ok(QualityTransform::Threshold(ThresholdCurve::new(total, m)?)),
            BonusPolicy::Linear { .. } => Ok(QualityTransform::Identity),
        }
    }
}

/// Map between ability and quality for a given policy.
#[derive(Debug, Clone)]
pub enum QualityTransform {
    Identity,
    Threshold(ThresholdCurve),
}

impl QualityTransform {
    pub fn quality(&self, ability: f64) -> f64 {
        match self {
            QualityTransform::Identity => ability,
            QualityTransform::Threshold(c) => c.eval(ability),
        }
    }

    pub fn ability(&self, quality: f64) -> f64 {
        match self {
            QualityTransform::Identity => quality,
            QualityTransform::Threshold(c) => c.invert(quality),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityWorker {
    pub id: u64,
    pub ability: f64,
    pub cost: f64,
}

/// Ability and cost per worker.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AbilityProfile {
    pub workers: Vec<AbilityWorker>,
}

impl AbilityProfile {
    pub fn validate(&self) -> Result<()> {
        for w in &self.workers {
            check_unit("ability", w.ability)?;
            if !w.cost.is_finite() || w.cost < 0.0 {
                return Err(Error::invalid(format!(
                    "worker {}: cost {} must be nonnegative",
                    w.id, w.cost
                )));
            }
        }
        Ok(())
    }
}

/// Qualities under `policy`; costs and ids pass through.
pub fn translate(profile: &AbilityProfile, policy: &BonusPolicy) -> Result<Vec<WorkerProfile>> {
    profile.validate()?;
    let t = policy.transform()?;
    Ok(profile
        .workers
        .iter()
        .map(|w| WorkerProfile::new(w.id, t.quality(w.ability), w.cost))
        .collect())
}

/// Population generator: `cost ~ Beta(alpha, beta)`, ability
/// `s = 1 / (1 + exp(-slope * cost))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_shape")]
    pub cost_alpha: f64,
    #[serde(default = "default_shape")]
    pub cost_beta: f64,
    #[serde(default = "default_slope")]
    pub ability_slope: f64,
}

fn default_shape() -> f64 {
    5.0
}

fn default_slope() -> f64 {
    3.0
}

impl PopulationSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            cost_alpha: default_shape(),
            cost_beta: default_shape(),
            ability_slope: default_slope(),
        }
    }
}

/// Deterministic for a fixed spec and [`POPULATION_GENERATOR`] version.
pub fn generate_population(spec: &PopulationSpec) -> Result<AbilityProfile> {
    if spec.n == 0 {
        return Err(Error::invalid("population size must be at least 1"));
    }
    if !spec.ability_slope.is_finite() {
        return Err(Error::invalid("ability slope must be finite"));
    }
    let beta = Beta::new(spec.cost_alpha, spec.cost_beta)
        .map_err(|e| Error::invalid(format!("beta({}, {}): {e}", spec.cost_alpha, spec.cost_beta)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let workers = (0..spec.n)
        .map(|i| {
            let cost: f64 = beta.sample(&mut rng);
            let ability = 1.0 / (1.0 + (-spec.ability_slope * cost).exp());
            AbilityWorker {
                id: i as u64 + 1,
                ability,
                cost,
            }
        })
        .collect();
    Ok(AbilityProfile { workers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct tail sum with exact integer binomials, small M only.
    fn tail_oracle(s: f64, big_m: u32, m: u32) -> f64 {
        let mut total = 0.0;
        for k in m..=big_m {
            let mut binom = 1.0f64;
            for j in 0..k {
                binom = binom * (big_m - j) as f64 / (j + 1) as f64;
            }
            total += binom * s.powi(k as i32) * (1.0 - s).powi((big_m - k) as i32);
        }
        total
    }

    #[test]
    fn bm_examples() {
        assert_eq!(bm(0.0, 25, 14).unwrap(), 0.0);
        assert_eq!(bm(1.0, 25, 14).unwrap(), 1.0);
        assert!((bm(0.5, 2, 1).unwrap() - 0.75).abs() < 1e-15);
        assert!(bm(1.2, 25, 3).is_err());
    }

    #[test]
    fn bm_matches_direct_sum() {
        for &m in &[1u32, 8, 14, 19, 23, 25] {
            for k in 1..50 {
                let s = k as f64 / 50.0;
                let got = bm(s, 25, m).unwrap();
                let want = tail_oracle(s, 25, m);
                assert!((got - want).abs() <= 1e-13 * want.max(1e-300) + 1e-15, "m={m} s={s}");
            }
        }
    }

    #[test]
    fn bm_large_total_no_overflow() {
        let c = ThresholdCurve::new(10_000, 5_000).unwrap();
        let mid = c.eval(0.5);
        assert!((mid - 0.5).abs() < 0.01, "{mid}");
        assert!(c.eval(0.45) < 1e-20);
        assert!(c.eval(0.55) > 1.0 - 1e-15);
        let small = ThresholdCurve::new(10_000, 1).unwrap();
        assert!((small.eval(0.9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert_bm(0.0, 25, 14).unwrap(), 0.0);
        for &m in &[1u32, 8, 14, 19, 23, 25] {
            let r = bm(0.37, 25, m).unwrap();
            assert!((invert_bm(r, 25, m).unwrap() - 0.37).abs() < 1e-9, "m={m}");
        }
        let r = 1.0 - 0.8f64.powi(25);
        assert!((invert_bm(r, 25, 1).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn translate_examples() {
        let profile = AbilityProfile {
            workers: vec![
                AbilityWorker {
                    id: 1,
                    ability: 0.7,
                    cost: 0.4,
                },
                AbilityWorker {
                    id: 2,
                    ability: 1.0,
                    cost: 0.9,
                },
                AbilityWorker {
                    id: 3,
                    ability: 0.55,
                    cost: 0.3,
                },
            ],
        };
        let lin = translate(&profile, &BonusPolicy::Linear { total: 25 }).unwrap();
        assert_eq!(lin[0].quality, 0.7);
        assert_eq!(lin[0].cost, 0.4);
        let top = translate(&profile, &BonusPolicy::Threshold { m: 25, total: 25 }).unwrap();
        assert_eq!(top[1].quality, 1.0);
        let t14 = translate(&profile, &BonusPolicy::Threshold { m: 14, total: 25 }).unwrap();
        assert!((t14[2].quality - tail_oracle(0.55, 25, 14)).abs() < 1e-14);
    }

    #[test]
    fn threshold_quality_matches_simulation() {
        use rand::Rng;
        let (s, big_m, m) = (0.55, 25u32, 14u32);
        let want = bm(s, big_m, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 1_000_000;
        let hits = (0..trials)
            .filter(|_| (0..big_m).filter(|_| rng.random::<f64>() < s).count() as u32 >= m)
            .count();
        let freq = hits as f64 / trials as f64;
        let sigma = (want * (1.0 - want) / trials as f64).sqrt();
        assert!(
            (freq - want).abs() <= 3.0 * sigma,
            "freq {freq} vs {want} (sigma {sigma})"
        );
    }

    #[test]
    fn population_is_deterministic_and_in_range() {
        assert!(generate_population(&PopulationSpec::new(0, 1)).is_err());
        let spec = PopulationSpec::new(15, 1);
        let a = generate_population(&spec).unwrap();
        let b = generate_population(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.workers.len(), 15);
        for w in &a.workers {
            assert!(w.cost > 0.0 && w.cost < 1.0);
            assert!(w.ability > 0.5 && w.ability < 1.0);
        }
        let bad = PopulationSpec {
            cost_alpha: -1.0,
            ..spec
        };
        assert!(generate_population(&bad).is_err());
    }

    #[test]
    fn policy_config_shape() {
        let p: BonusPolicy = serde_json::from_str(r#"{"kind": "threshold", "m": 14, "M": 25}"#).unwrap();
        assert_eq!(p, BonusPolicy::Threshold { m: 14, total: 25 });
        let l: BonusPolicy = serde_json::from_str(r#"{"kind": "linear"}"#).unwrap();
        assert_eq!(l, BonusPolicy::Linear { total: 25 });
        assert!(BonusPolicy::Threshold { m: 26, total: 25 }.transform().is_err());
    }

    proptest! {
        #[test]
        fn bm_monotone_in_s_and_m(s1 in 0.001..0.999f64, s2 in 0.001..0.999f64, m in 2u32..=25) {
            let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            prop_assume!(hi - lo > 1e-6);
            let c = ThresholdCurve::new(25, m).unwrap();
            prop_assert!(c.eval(lo) <= c.eval(hi));
            let prev = ThresholdCurve::new(25, m - 1).unwrap();
            prop_assert!(c.eval(lo) <= prev.eval(lo));
        }

        #[test]
        fn translate_preserves_cost_quality_order(s1 in 0.0..1.0f64, s2 in 0.0..1.0f64, m in 1u32..=25) {
            // ability increasing in cost stays quality increasing in cost
            let (a, b) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            let profile = AbilityProfile { workers: vec![
                AbilityWorker { id: 1, ability: a, cost: 0.2 },
                AbilityWorker { id: 2, ability: b, cost: 0.6 },
            ]};
            let ws = translate(&profile, &BonusPolicy::Threshold { m, total: 25 }).unwrap();
            prop_assert!(ws[0].quality <= ws[1].quality);
        }
    }
}
