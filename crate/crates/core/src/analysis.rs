//! Power-of-bonus instances and price-of-agnosticity certificates.

use serde::{Deserialize, Serialize};

use crate::cp::{cp_exact_oracle, cp_no_bonus, CpSolveReport};
use crate::error::{Error, Result};
use crate::numeric::{fsum, le_rel, CompensatedSum};
use crate::pp::{solve_gkp_exact, GkpInstance};
use crate::utility::{Additive, UtilityFunction};
use crate::worker::{sort_by_bang_per_buck, validate_workers, WorkerProfile};

/// Relative slack on audited inequalities.
pub const AUDIT_TOL: f64 = 1e-9;

/// Half cherry pickers `(eps, c)`, a quarter `(1, 2c)`, a quarter `(2, 2c)`,
/// budget `(n + 4) c / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PobInstance {
    pub n: usize,
    pub c: f64,
    pub epsilon: f64,
    pub workers: Vec<WorkerProfile>,
    pub budget: f64,
}

/// Requires `n >= 4` divisible by 4, `c > 0` and `0 <= eps < 1`.
pub fn build_pob_instance(n: usize, c: f64, epsilon: f64) -> Result<PobInstance> {
    if !n.is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "n = {n} is not divisible by 4; use build_pob_instance_relaxed"
        )));
    }
    build_pob_instance_relaxed(n, c, epsilon)
}

/// As [`build_pob_instance`] for any `n >= 4`, with group boundaries at
/// `floor(n/2)` and `floor(3n/4)`.
pub fn build_pob_instance_relaxed(n: usize, c: f64, epsilon: f64) -> Result<PobInstance> {
    if n < 4 {
        return Err(Error::invalid(format!("n = {n} must be at least 4")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must lie in [0, 1)")));
    }
    let (half, three_q) = (n / 2, 3 * n / 4);
    let workers = (0..n)
        .map(|i| {
            let (r, cost) = if i < half {
                (epsilon, c)
            } else if i < three_q {
                (1.0, 2.0 * c)
            } else {
                (2.0, 2.0 * c)
            };
            WorkerProfile::new(i as u64 + 1, r, cost)
        })
        .collect();
    Ok(PobInstance {
        n,
        c,
        epsilon,
        workers,
        budget: (n as f64 + 4.0) * c / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PobReport {
    pub no_bonus: CpSolveReport,
    pub with_bonus: CpSolveReport,
    pub ratio: f64,
    /// `ratio <= epsilon` up to [`AUDIT_TOL`].
    pub bound_holds: bool,
}

/// Optimal zero-bonus utility over the exact common-pricing optimum.
pub fn pob_ratio(inst: &PobInstance, utility: Option<UtilityFunction>) -> Result<PobReport> {
    let u = utility.unwrap_or_else(|| std::sync::Arc::new(Additive));
    let no_bonus = cp_no_bonus(&inst.workers, inst.budget, &u)?;
    let with_bonus = cp_exact_oracle(&inst.workers, inst.budget, &u)?;
    if with_bonus.utility_value <= 0.0 {
        return Err(Error::Domain("with-bonus optimum is zero".into()));
    }
    let ratio = no_bonus.utility_value / with_bonus.utility_value;
    Ok(PobReport {
        bound_holds: le_rel(ratio, inst.epsilon, AUDIT_TOL),
        no_bonus,
        with_bonus,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoaCertificate {
    /// Worker indices in descending bang-per-buck.
    pub order: Vec<usize>,
    /// Longest affordable bang-per-buck prefix.
    pub k_b: usize,
    pub gamma: f64,
    pub delta: f64,
    pub u_pp: Option<f64>,
    pub u_cp_scaled: Option<f64>,
}

/// `k_B`, `gamma = 1 - r_{k+1} / Σ_{i<=k} r_i` (with `r_{n+1} = 0`) and
/// `delta = (c_k / r_k) Σ_{i<=k} r_i / Σ_{i<=k} c_i` over bang-per-buck order.
pub fn poa_constants(workers: &[WorkerProfile], budget: f64) -> Result<PoaCertificate> {
    validate_workers(workers, false)?;
    let order = sort_by_bang_per_buck(workers);
    let mut acc = CompensatedSum::default();
    let mut k_b = 0;
    for &i in &order {
        let next = acc.with(workers[i].cost);
        if next.value() > budget {
            break;
        }
        acc = next;
        k_b += 1;
    }
    if k_b == 0 {
        return Err(Error::invalid(format!(
            "budget {budget} is below the first worker's cost; k_B = 0"
        )));
    }
    let prefix = &order[..k_b];
    let r_sum = fsum(prefix.iter().map(|&i| workers[i].quality));
    let c_sum = acc.value();
    let last = &workers[order[k_b - 1]];
    let next_r = order.get(k_b).map_or(0.0, |&i| workers[i].quality);
    if r_sum <= 0.0 {
        return Err(Error::domain("affordable prefix has zero total quality"));
    }
    let gamma = 1.0 - next_r / r_sum;
    let delta = if c_sum == 0.0 {
        1.0
    } else if last.quality == 0.0 {
        return Err(Error::domain(format!("worker {} has zero quality", last.id)));
    } else {
        last.cost / last.quality * r_sum / c_sum
    };
    Ok(PoaCertificate {
        order,
        k_b,
        gamma,
        delta,
        u_pp: None,
        u_cp_scaled: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Passed,
    Failed,
    PreconditionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoaAudit {
    pub status: AuditStatus,
    pub certificate: Option<PoaCertificate>,
    pub half_bound_holds: Option<bool>,
    /// Checked only for additive utilities.
    pub gamma_bound_holds: Option<bool>,
    pub detail: String,
}

impl PoaAudit {
    fn skipped(detail: String) -> Self {
        Self {
            status: AuditStatus::PreconditionFailed,
            certificate: None,
            half_bound_holds: None,
            gamma_bound_holds: None,
            detail,
        }
    }
}

/// Checks `U*_CP(delta B) >= U*_PP(B) / 2`, and `>= gamma U*_PP(B)` for
/// additive utilities, with exact solvers on both sides.
///
/// Runs only when every affordable single worker is worth at most half of
/// `U*_PP(B)`; otherwise the instance is reported as precondition-failed.
pub fn poa_audit(workers: &[WorkerProfile], budget: f64, utility: &UtilityFunction) -> Result<PoaAudit> {
    let inst = GkpInstance::new(workers.to_vec(), budget, utility.clone())?;
    let u_pp = solve_gkp_exact(&inst)?.utility_value;
    let mut single = vec![0.0; workers.len()];
    for (i, w) in workers.iter().enumerate() {
        if w.cost > budget {
            continue;
        }
        single[i] = w.quality;
        let v = utility.evaluate(&single)?;
        single[i] = 0.0;
        if u_pp < 2.0 * v {
            return Ok(PoaAudit::skipped(format!(
                "worker {} alone is worth {v}, more than half of U*_PP = {u_pp}",
                w.id
            )));
        }
    }
    let mut cert = match poa_constants(workers, budget) {
        Ok(c) => c,
        Err(e) => return Ok(PoaAudit::skipped(e.to_string())),
    };
    let cp = cp_exact_oracle(workers, cert.delta * budget, utility)?;
    let u_cp = cp.utility_value;
    let half = le_rel(0.5 * u_pp, u_cp, AUDIT_TOL);
    let gamma = utility
        .flags()
        .additive
        .then(|| le_rel(cert.gamma * u_pp, u_cp, AUDIT_TOL));
    cert.u_pp = Some(u_pp);
    cert.u_cp_scaled = Some(u_cp);
    let ok = half && gamma.unwrap_or(true) && cert.delta >= 1.0 - AUDIT_TOL;
    Ok(PoaAudit {
        status: if ok { AuditStatus::Passed } else { AuditStatus::Failed },
        detail: format!(
            "U*_CP(delta B) = {u_cp}, U*_PP(B) = {u_pp}, delta = {}, gamma = {}",
            cert.delta, cert.gamma
        ),
        certificate: Some(cert),
        half_bound_holds: Some(half),
        gamma_bound_holds: gamma,
    })
}
