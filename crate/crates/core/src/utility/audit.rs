//! Randomized audits of declared utility properties. Passing is evidence,
//! not proof; the seed makes every failure replayable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{majorizes, Utility};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub trials: usize,
    pub seed: u64,
    /// Violations must exceed `tol * max(1, |U|)`.
    pub tol: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            tol: 1e-9,
            min_len: 1,
            max_len: 8,
        }
    }
}

impl AuditConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("audit needs at least one trial"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::invalid(format!(
                "bad audit length range {}..={}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: String,
    pub utility: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest excess over the allowed slack, 0 when clean.
    pub worst_excess: f64,
    /// Inputs of the first violation.
    pub counterexample: Option<Vec<Vec<f64>>>,
}

impl AuditReport {
    fn new(property: &str, u: &dyn Utility, trials: usize) -> Self {
        Self {
            property: property.into(),
            utility: u.name(),
            trials,
            violations: 0,
            worst_excess: 0.0,
            counterexample: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Records `lhs <= rhs` with slack `slack`.
    fn check_le(&mut self, lhs: f64, rhs: f64, slack: f64, inputs: &[&[f64]]) {
        let excess = lhs - rhs - slack;
        if excess > 0.0 || lhs.is_nan() || rhs.is_nan() {
            self.violations += 1;
            self.worst_excess = self
                .worst_excess
                .max(if excess.is_nan() { f64::INFINITY } else { excess });
            if self.counterexample.is_none() {
                self.counterexample = Some(inputs.iter().map(|v| v.to_vec()).collect());
            }
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, cfg: &AuditConfig, cap: f64) -> Vec<f64> {
    let n = rng.random_range(cfg.min_len..=cfg.max_len);
    (0..n).map(|_| rng.random::<f64>() * cap).collect()
}

fn slack(cfg: &AuditConfig, v: f64) -> f64 {
    cfg.tol * v.abs().max(1.0)
}

/// Permuting the input leaves the value unchanged.
pub fn check_symmetry(u: &dyn Utility, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = AuditReport::new("symmetric", u, cfg.trials);
    for _ in 0..cfg.trials {
        let y = sample(&mut rng, cfg, 1.0);
        let mut p = y.clone();
        p.shuffle(&mut rng);
        let (a, b) = (u.evaluate(&y)?, u.evaluate(&p)?);
        rep.check_le((a - b).abs(), 0.0, slack(cfg, a), &[&y, &p]);
    }
    Ok(rep)
}

/// Raising one entry never lowers the value.
pub fn check_monotone(u: &dyn Utility, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = AuditReport::new("nondecreasing", u, cfg.trials);
    for _ in 0..cfg.trials {
        let y = sample(&mut rng, cfg, 1.0);
        let mut up = y.clone();
        let i = rng.random_range(0..y.len());
        up[i] += rng.random::<f64>() * (1.0 - up[i]);
        let (a, b) = (u.evaluate(&y)?, u.evaluate(&up)?);
        rep.check_le(a, b, slack(cfg, b), &[&y, &up]);
    }
    Ok(rep)
}

/// `U(a + b) <= U(a) + U(b)` for `a`, `b` with disjoint supports.
pub fn check_subadditive(u: &dyn Utility, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = AuditReport::new("subadditive", u, cfg.trials);
    for _ in 0..cfg.trials {
        let y = sample(&mut rng, cfg, 1.0);
        let mut a = vec![0.0; y.len()];
        let mut b = vec![0.0; y.len()];
        for (i, &v) in y.iter().enumerate() {
            match rng.random_range(0..3) {
                0 => a[i] = v,
                1 => b[i] = v,
                _ => {}
            }
        }
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, z)| x + z).collect();
        let (ua, ub, us) = (u.evaluate(&a)?, u.evaluate(&b)?, u.evaluate(&sum)?);
        rep.check_le(us, ua + ub, slack(cfg, ua + ub), &[&a, &b]);
    }
    Ok(rep)
}

/// Entries are kept in `[0, SCHUR_CAP]` so finite differences stay inside the domain.
const SCHUR_CAP: f64 = 0.99;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-6;

/// `U(minor) <= U(major)` on pairs produced by Robin-Hood and
/// anti-Robin-Hood transfers, plus a finite-difference spot check of
/// `(y_i - y_j)(dU/dy_i - dU/dy_j) >= 0`.
pub fn check_schur_convex(u: &dyn Utility, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = AuditReport::new("schur_convex", u, cfg.trials);
    let cfg2 = AuditConfig {
        min_len: cfg.min_len.max(2),
        max_len: cfg.max_len.max(2),
        ..*cfg
    };
    for trial in 0..cfg.trials {
        let start = sample(&mut rng, &cfg2, SCHUR_CAP);
        let mut minor = start.clone();
        let mut major = start;
        let steps = rng.random_range(1..=3);
        for _ in 0..steps {
            let i = rng.random_range(0..minor.len());
            let mut j = rng.random_range(0..minor.len() - 1);
            if j >= i {
                j += 1;
            }
            if trial % 2 == 0 {
                // Robin Hood: rich gives to poor, at most half the gap.
                let (rich, poor) = if minor[i] >= minor[j] { (i, j) } else { (j, i) };
                let t = rng.random::<f64>() * 0.5 * (minor[rich] - minor[poor]);
                minor[rich] -= t;
                minor[poor] += t;
            } else {
                let (rich, poor) = if major[i] >= major[j] { (i, j) } else { (j, i) };
                let t = rng.random::<f64>() * major[poor].min(SCHUR_CAP - major[rich]);
                major[rich] += t;
                major[poor] -= t;
            }
        }
        debug_assert!(majorizes(&major, &minor)?);
        let (lo, hi) = (u.evaluate(&minor)?, u.evaluate(&major)?);
        rep.check_le(lo, hi, slack(cfg, hi), &[&minor, &major]);

        let y = &major;
        let i = rng.random_range(0..y.len());
        let mut j = rng.random_range(0..y.len() - 1);
        if j >= i {
            j += 1;
        }
        let gi = partial(u, y, i)?;
        let gj = partial(u, y, j)?;
        let lhs = (y[i] - y[j]) * (gi - gj);
        let scale = u.evaluate(y)?.abs().max(1.0) * (y[i] - y[j]).abs();
        rep.check_le(-lhs, 0.0, FD_TOL * scale, &[y]);
    }
    Ok(rep)
}

fn partial(u: &dyn Utility, y: &[f64], i: usize) -> Result<f64> {
    let mut up = y.to_vec();
    let mut dn = y.to_vec();
    up[i] = (y[i] + FD_STEP).min(1.0);
    dn[i] = (y[i] - FD_STEP).max(0.0);
    Ok((u.evaluate(&up)? - u.evaluate(&dn)?) / (up[i] - dn[i]))
}

/// Runs symmetry and monotonicity, plus each property the utility declares.
pub fn audit_declared(u: &dyn Utility, cfg: &AuditConfig) -> Result<Vec<AuditReport>> {
    let flags = u.flags();
    let mut out = Vec::new();
    if flags.symmetric {
        out.push(check_symmetry(u, cfg)?);
    }
    if flags.nondecreasing {
        out.push(check_monotone(u, cfg)?);
    }
    if flags.subadditive {
        out.push(check_subadditive(u, cfg)?);
    }
    if flags.schur_convex {
        out.push(check_schur_convex(u, cfg)?);
    }
    Ok(out)
}
