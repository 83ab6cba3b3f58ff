//! Utility functions over effective-quality vectors `r ∘ x`.

mod audit;
mod majorize;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bonus::{BonusPolicy, QualityTransform, ThresholdCurve};
use crate::error::{Error, Result};
use crate::numeric::fsum;
use crate::worker::WorkerProfile;

pub use audit::{
    audit_declared, check_monotone, check_schur_convex, check_subadditive, check_symmetry, AuditConfig, AuditReport,
};
pub use majorize::{majorization, majorizes, weakly_majorizes, MajorizationOrder};

/// Largest input length accepted by [`BinaryLabeling`].
pub const BINARY_LABELING_MAX_N: usize = 20;

/// Declared structural properties. Audits in this module test them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UtilityFlags {
    pub symmetric: bool,
    pub nondecreasing: bool,
    pub additive: bool,
    pub subadditive: bool,
    pub schur_convex: bool,
}

impl UtilityFlags {
    /// Subadditive and Schur-convex, the conditions the greedy bound needs.
    pub fn greedy_ready(&self) -> bool {
        self.subadditive && self.schur_convex
    }
}

/// Evaluates a subset of a fixed worker list given as a selection mask.
pub type SubsetEvaluator<'a> = Box<dyn Fn(&[bool]) -> f64 + Send + Sync + 'a>;

pub trait Utility: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn flags(&self) -> UtilityFlags;

    /// `U(y)` for an effective-quality vector `y`.
    fn evaluate(&self, y: &[f64]) -> Result<f64>;

    /// Prepares repeated evaluation over subsets of `qualities`. The result
    /// matches `evaluate` on the masked vector. Inputs are validated once here.
    fn subset_evaluator<'a>(&'a self, qualities: &'a [f64]) -> Result<SubsetEvaluator<'a>> {
        self.evaluate(qualities)?;
        Ok(Box::new(move |x: &[bool]| {
            let y = mask(qualities, x);
            self.evaluate(&y).unwrap_or(f64::NAN)
        }))
    }
}

pub type UtilityFunction = Arc<dyn Utility>;

/// `r ∘ x`.
pub fn mask(qualities: &[f64], x: &[bool]) -> Vec<f64> {
    qualities
        .iter()
        .zip(x)
        .map(|(&r, &on)| if on { r } else { 0.0 })
        .collect()
}

pub fn qualities(workers: &[WorkerProfile]) -> Vec<f64> {
    workers.iter().map(|w| w.quality).collect()
}

/// Utility of the workers selected by `x`.
pub fn evaluate_selection(utility: &dyn Utility, workers: &[WorkerProfile], x: &[bool]) -> Result<f64> {
    if x.len() != workers.len() {
        return Err(Error::invalid(format!(
            "selection has {} entries for {} workers",
            x.len(),
            workers.len()
        )));
    }
    utility.evaluate(&mask(&qualities(workers), x))
}

fn check_unit_entries(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("effective quality {v} outside [0, 1]")));
    }
    Ok(())
}

/// `Σ y_i`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Additive;

impl Utility for Additive {
    fn name(&self) -> String {
        "additive".into()
    }

    fn flags(&self) -> UtilityFlags {
        UtilityFlags {
            symmetric: true,
            nondecreasing: true,
            additive: true,
            subadditive: true,
            schur_convex: true,
        }
    }

    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        if let Some(v) = y.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::domain(format!(
                "effective quality {v} must be finite and nonnegative"
            )));
        }
        Ok(fsum(y.iter().copied()))
    }

    fn subset_evaluator<'a>(&'a self, qualities: &'a [f64]) -> Result<SubsetEvaluator<'a>> {
        self.evaluate(qualities)?;
        Ok(Box::new(move |x: &[bool]| {
            fsum(qualities.iter().zip(x).filter(|(_, &on)| on).map(|(&r, _)| r))
        }))
    }
}

/// Expected number of typos corrected, `M (1 - Π (1 - s_i))` with each
/// ability `s_i` recovered from quality through the bonus policy.
#[derive(Debug, Clone)]
pub struct Typo {
    total: u32,
    threshold: Option<u32>,
    transform: QualityTransform,
}

impl Typo {
    pub fn threshold(total: u32, m: u32) -> Result<Self> {
        Ok(Self {
            total,
            threshold: Some(m),
            transform: QualityTransform::Threshold(ThresholdCurve::new(total, m)?),
        })
    }

    /// Linear bonus: quality equals ability.
    pub fn linear(total: u32) -> Result<Self> {
        if total == 0 {
            return Err(Error::invalid("typo count M must be at least 1"));
        }
        Ok(Self {
            total,
            threshold: None,
            transform: QualityTransform::Identity,
        })
    }

    pub fn for_policy(policy: &BonusPolicy) -> Result<Self> {
        match *policy {
            BonusPolicy::Threshold { m, total } => Self::threshold(total, m),
            BonusPolicy::Linear { total } => Self::linear(total),
        }
    }

    fn log_miss(&self, y: f64) -> f64 {
        (-self.transform.ability(y)).ln_1p()
    }

    fn value_of_log_miss(&self, log_miss: f64) -> f64 {
        -(self.total as f64) * log_miss.exp_m1()
    }
}

impl Utility for Typo {
    fn name(&self) -> String {
        match self.threshold {
            Some(m) => format!("typo(M={}, m={m})", self.total),
            None => format!("typo(M={}, linear)", self.total),
        }
    }

    fn flags(&self) -> UtilityFlags {
        UtilityFlags {
            symmetric: true,
            nondecreasing: true,
            additive: false,
            subadditive: true,
            schur_convex: matches!(self.threshold, None | Some(1)),
        }
    }

    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_unit_entries(y)?;
        Ok(self.value_of_log_miss(fsum(y.iter().map(|&v| self.log_miss(v)))))
    }

    fn subset_evaluator<'a>(&'a self, qualities: &'a [f64]) -> Result<SubsetEvaluator<'a>> {
        check_unit_entries(qualities)?;
        let logs: Vec<f64> = qualities.iter().map(|&v| self.log_miss(v)).collect();
        Ok(Box::new(move |x: &[bool]| {
            self.value_of_log_miss(fsum(logs.iter().zip(x).filter(|(_, &on)| on).map(|(&l, _)| l)))
        }))
    }
}

/// Accuracy-type utility of a binary labeling task, by exhaustive sum over
/// label vectors. Proportionality constant fixed to 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinaryLabeling;

impl Utility for BinaryLabeling {
    fn name(&self) -> String {
        "binary_labeling".into()
    }

    fn flags(&self) -> UtilityFlags {
        UtilityFlags {
            symmetric: true,
            nondecreasing: true,
            additive: false,
            subadditive: true,
            schur_convex: true,
        }
    }

    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        if y.len() > BINARY_LABELING_MAX_N {
            return Err(Error::Size {
                what: "binary labeling input length",
                size: y.len(),
                limit: BINARY_LABELING_MAX_N,
            });
        }
        check_unit_entries(y)?;
        let hi: Vec<f64> = y.iter().map(|v| 0.5 * (1.0 + v)).collect();
        let lo: Vec<f64> = y.iter().map(|v| 0.5 * (1.0 - v)).collect();
        let mut terms = Vec::with_capacity(1 << y.len());
        labeling_terms(&hi, &lo, 0, 1.0, 1.0, &mut terms);
        Ok(fsum(terms))
    }
}

fn labeling_terms(hi: &[f64], lo: &[f64], i: usize, a: f64, b: f64, out: &mut Vec<f64>) {
    if i == hi.len() {
        out.push((a - b).abs());
        return;
    }
    labeling_terms(hi, lo, i + 1, a * lo[i], b * hi[i], out);
    labeling_terms(hi, lo, i + 1, a * hi[i], b * lo[i], out);
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A caller-supplied evaluator with caller-declared flags.
#[derive(Clone)]
pub struct Custom {
    name: String,
    flags: UtilityFlags,
    f: Arc<EvalFn>,
}

impl Custom {
    pub fn new(
        name: impl Into<String>,
        flags: UtilityFlags,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            flags,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom")
            .field("name", &self.name)
            .field("flags", &self.flags)
            .finish()
    }
}

impl Utility for Custom {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn flags(&self) -> UtilityFlags {
        self.flags
    }

    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        let v = (self.f)(y);
        if v.is_nan() {
            return Err(Error::domain(format!("utility {} returned NaN", self.name)));
        }
        Ok(v)
    }
}

/// Utility selection in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    Additive,
    BinaryLabeling,
    /// `m = None` follows the bonus policy in effect, or `m = 1` without one.
    Typo {
        #[serde(rename = "M", default = "default_typos")]
        total: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u32>,
    },
}

fn default_typos() -> u32 {
    25
}

impl UtilitySpec {
    pub fn build(&self, policy: Option<&BonusPolicy>) -> Result<UtilityFunction> {
        Ok(match *self {
            UtilitySpec::Additive => Arc::new(Additive),
            UtilitySpec::BinaryLabeling => Arc::new(BinaryLabeling),
            UtilitySpec::Typo { total, m: Some(m) } => Arc::new(Typo::threshold(total, m)?),
            UtilitySpec::Typo { total, m: None } => match policy {
                Some(BonusPolicy::Threshold { m, .. }) => Arc::new(Typo::threshold(total, *m)?),
                Some(BonusPolicy::Linear { .. }) => Arc::new(Typo::linear(total)?),
                None => Arc::new(Typo::threshold(total, 1)?),
            },
        })
    }

    /// Parses `additive`, `binary_labeling`, `typo`, `typo:M` or `typo:M:m`,
    /// or the JSON object form.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let mut parts = text.split(':');
        let kind = parts.next().unwrap_or_default();
        let nums: Vec<u32> = parts
            .map(|p| {
                p.parse::<u32>()
                    .map_err(|e| Error::invalid(format!("utility {text:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        match (kind, nums.as_slice()) {
            ("additive", []) => Ok(UtilitySpec::Additive),
            ("binary_labeling", []) => Ok(UtilitySpec::BinaryLabeling),
            ("typo", []) => Ok(UtilitySpec::Typo {
                total: default_typos(),
                m: None,
            }),
            ("typo", [total]) => Ok(UtilitySpec::Typo { total: *total, m: None }),
            ("typo", [total, m]) => Ok(UtilitySpec::Typo {
                total: *total,
                m: Some(*m),
            }),
            _ => Err(Error::invalid(format!("unknown utility {text:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bonus::bm;
    use proptest::prelude::*;

    #[test]
    fn typo_examples() {
        let u = Typo::threshold(25, 1).unwrap();
        assert_eq!(u.evaluate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let r = bm(0.2, 25, 1).unwrap();
        assert!((u.evaluate(&[r]).unwrap() - 5.0).abs() < 1e-12);
        let r2 = bm(0.5, 25, 1).unwrap();
        assert!((u.evaluate(&[r, r2]).unwrap() - 15.0).abs() < 1e-12);
        assert!(u.evaluate(&[1.2]).is_err());
        assert!(u.flags().schur_convex);
        assert!(!Typo::threshold(25, 14).unwrap().flags().schur_convex);
    }

    #[test]
    fn typo_threshold_matches_ability_product() {
        for &m in &[3u32, 14, 23] {
            let u = Typo::threshold(25, m).unwrap();
            let c = m as f64 / 25.0;
            let s = [c - 0.1, c - 0.02, c + 0.05];
            let y: Vec<f64> = s.iter().map(|&v| bm(v, 25, m).unwrap()).collect();
            let want = 25.0 * (1.0 - s.iter().map(|v| 1.0 - v).product::<f64>());
            assert!((u.evaluate(&y).unwrap() - want).abs() < 1e-8, "m={m}");
        }
        let lin = Typo::linear(10).unwrap();
        assert!((lin.evaluate(&[0.5, 0.5]).unwrap() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn additive_examples() {
        assert_eq!(Additive.evaluate(&[0.0; 4]).unwrap(), 0.0);
        assert!((Additive.evaluate(&[0.1; 8]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(Additive.evaluate(&[2.0; 4]).unwrap(), 8.0);
    }

    #[test]
    fn binary_labeling_examples() {
        assert_eq!(BinaryLabeling.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((BinaryLabeling.evaluate(&[1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((BinaryLabeling.evaluate(&[0.3]).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(BinaryLabeling.evaluate(&[0.1; 21]), Err(Error::Size { .. })));
        // zero entries are neutral
        let a = BinaryLabeling.evaluate(&[0.4, 0.7]).unwrap();
        let b = BinaryLabeling.evaluate(&[0.4, 0.0, 0.7, 0.0]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn subset_evaluators_match_evaluate() {
        let r = [0.3, 0.9, 0.05, 0.6, 0.0];
        let x = [true, false, true, true, false];
        let us: Vec<UtilityFunction> = vec![
            Arc::new(Additive),
            Arc::new(Typo::threshold(25, 1).unwrap()),
            Arc::new(Typo::threshold(25, 19).unwrap()),
            Arc::new(BinaryLabeling),
        ];
        for u in us {
            let f = u.subset_evaluator(&r).unwrap();
            assert_eq!(f(&x), u.evaluate(&mask(&r, &x)).unwrap(), "{}", u.name());
        }
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(UtilitySpec::parse("additive").unwrap(), UtilitySpec::Additive);
        assert_eq!(
            UtilitySpec::parse("typo:25:3").unwrap(),
            UtilitySpec::Typo { total: 25, m: Some(3) }
        );
        assert_eq!(
            UtilitySpec::parse(r#"{"kind": "typo", "M": 25, "m": 1}"#).unwrap(),
            UtilitySpec::Typo { total: 25, m: Some(1) }
        );
        assert_eq!(
            UtilitySpec::parse(r#"{"kind": "binary_labeling"}"#).unwrap(),
            UtilitySpec::BinaryLabeling
        );
        assert!(UtilitySpec::parse("max").is_err());
        assert!(UtilitySpec::parse("typo:x").is_err());
        let linear = BonusPolicy::Linear { total: 25 };
        let u = UtilitySpec::Typo { total: 25, m: None }.build(Some(&linear)).unwrap();
        assert_eq!(u.name(), "typo(M=25, linear)");
    }

    proptest! {
        #[test]
        fn binary_labeling_single_worker(r in 0.0..=1.0f64) {
            prop_assert!((BinaryLabeling.evaluate(&[r]).unwrap() - 2.0 * r).abs() < 1e-15);
        }

        #[test]
        fn typo_bounded_by_total(y in proptest::collection::vec(0.0..=1.0f64, 0..10)) {
            let v = Typo::threshold(25, 1).unwrap().evaluate(&y).unwrap();
            prop_assert!((0.0..=25.0).contains(&v));
        }
    }
}
