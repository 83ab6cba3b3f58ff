//! Personalized pricing.
//!
//! With one offer per worker, the requester can pay each recruited worker
//! exactly their cost, so the problem reduces to a knapsack over subsets
//! with a general utility: maximize `U(r ∘ x)` subject to `Σ c_i x_i <= B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{fsum, round_half_even, CompensatedSum};
use crate::utility::{evaluate_selection, qualities, UtilityFunction};
use crate::worker::{
    covering_bonus, sort_by_bang_per_buck, validate_workers, Offer, PersonalizedPolicy, WorkerProfile,
};

/// Subset enumeration limit for [`solve_gkp_exact`].
pub const EXACT_ENUM_LIMIT: usize = 24;

/// Cost grid for the additive-utility DP.
pub const DP_COST_SCALE: f64 = 1e4;

/// Largest DP table, in cells.
pub const DP_TABLE_LIMIT: usize = 50_000_000;

#[derive(Debug, Clone)]
pub struct GkpInstance {
    pub workers: Vec<WorkerProfile>,
    pub budget: f64,
    pub utility: UtilityFunction,
}

impl GkpInstance {
    pub fn new(workers: Vec<WorkerProfile>, budget: f64, utility: UtilityFunction) -> Result<Self> {
        validate_workers(&workers, false)?;
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::invalid(format!(
                "budget {budget} must be finite and nonnegative"
            )));
        }
        Ok(Self {
            workers,
            budget,
            utility,
        })
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    /// Selection record for `x`, with spent and utility recomputed.
    pub fn selection(&self, x: Vec<bool>) -> Result<Selection> {
        let spent = selected_cost(&self.workers, &x);
        let utility_value = evaluate_selection(self.utility.as_ref(), &self.workers, &x)?;
        Ok(Selection {
            x,
            utility_value,
            spent,
        })
    }
}

/// A subset of workers with its cost and utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub x: Vec<bool>,
    pub utility_value: f64,
    pub spent: f64,
}

impl Selection {
    pub fn selected(&self) -> Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| i)
            .collect()
    }
}

fn selected_cost(workers: &[WorkerProfile], x: &[bool]) -> f64 {
    fsum(workers.iter().zip(x).filter(|(_, &on)| on).map(|(w, _)| w.cost))
}

/// Base payment for each recruited worker; the bonus covers the rest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseChoice {
    /// `p_i = c_i`, no bonus.
    #[default]
    Cost,
    /// `p_i = 0`, pure bonus.
    Zero,
    /// Explicit `p_i` per worker, each in `[0, c_i]`.
    Custom(Vec<f64>),
}

impl BaseChoice {
    fn base(&self, i: usize, w: &WorkerProfile) -> Result<f64> {
        match self {
            BaseChoice::Cost => Ok(w.cost),
            BaseChoice::Zero => Ok(0.0),
            BaseChoice::Custom(v) => {
                let p = *v
                    .get(i)
                    .ok_or_else(|| Error::invalid(format!("no base payment given for worker {i}")))?;
                if !(0.0..=w.cost).contains(&p) {
                    return Err(Error::invalid(format!(
                        "base payment {p} for worker {} outside [0, {}]",
                        w.id, w.cost
                    )));
                }
                Ok(p)
            }
        }
    }
}

/// Offers `(p_i, (c_i - p_i) / r_i)` to selected workers and `(0, 0)` to
/// the rest. The bonus is nudged up by ulps if rounding would leave
/// `p + q r` just below `c`.
pub fn policy_from_selection(workers: &[WorkerProfile], x: &[bool], base: &BaseChoice) -> Result<PersonalizedPolicy> {
    if x.len() != workers.len() {
        return Err(Error::invalid(format!(
            "selection has {} entries for {} workers",
            x.len(),
            workers.len()
        )));
    }
    let mut offers = Vec::with_capacity(workers.len());
    for (i, (w, &on)) in workers.iter().zip(x).enumerate() {
        if !on {
            offers.push(Offer::ZERO);
            continue;
        }
        let p = base.base(i, w)?;
        if p >= w.cost {
            offers.push(Offer::new(p, 0.0));
            continue;
        }
        let q = covering_bonus(w, p).ok_or_else(|| {
            Error::domain(format!(
                "worker {} has zero quality; a bonus cannot cover the remaining cost {}",
                w.id,
                w.cost - p
            ))
        })?;
        offers.push(Offer::new(p, q));
    }
    Ok(PersonalizedPolicy { offers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub selection: Selection,
    pub policy: PersonalizedPolicy,
    /// True when the best single worker beat the greedy prefix.
    pub used_singleton: bool,
    pub warnings: Vec<String>,
}

/// Greedy by descending bang-per-buck, compared against the best
/// affordable single worker.
///
/// Workers are taken in order while the running cost stays within budget;
/// the first worker that does not fit ends the pass. The singleton wins
/// unless the greedy set has strictly higher utility.
pub fn modified_greedy(inst: &GkpInstance, base: &BaseChoice) -> Result<GreedyOutcome> {
    let mut warnings = Vec::new();
    if !inst.utility.flags().greedy_ready() {
        warnings.push(format!(
            "utility {} is not declared subadditive and Schur-convex; the 1/2 guarantee does not apply",
            inst.utility.name()
        ));
    }
    let n = inst.len();
    let rs = qualities(&inst.workers);
    let eval = inst.utility.subset_evaluator(&rs)?;

    let mut x = vec![false; n];
    let mut acc = CompensatedSum::default();
    for i in sort_by_bang_per_buck(&inst.workers) {
        let next = acc.with(inst.workers[i].cost);
        if next.value() > inst.budget {
            break;
        }
        acc = next;
        x[i] = true;
    }
    let greedy_value = eval(&x);

    let mut best: Option<(usize, f64)> = None;
    let mut single = vec![false; n];
    for (i, w) in inst.workers.iter().enumerate() {
        if w.cost > inst.budget {
            continue;
        }
        single[i] = true;
        let v = eval(&single);
        single[i] = false;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }

    let used_singleton = match best {
        Some((i, v)) if greedy_value <= v || greedy_value.is_nan() => {
            x = vec![false; n];
            x[i] = true;
            true
        }
        _ => false,
    };
    let selection = inst.selection(x)?;
    let policy = policy_from_selection(&inst.workers, &selection.x, base)?;
    Ok(GreedyOutcome {
        selection,
        policy,
        used_singleton,
        warnings,
    })
}

/// Exact maximizer over all budget-feasible subsets.
///
/// Up to [`EXACT_ENUM_LIMIT`] workers: depth-first enumeration with budget
/// pruning, visiting `x_i = 0` before `x_i = 1` and replacing the incumbent
/// only on strictly higher utility, so the lexicographically smallest
/// maximizer is returned. Larger instances with additive utility use a
/// knapsack DP on costs scaled by [`DP_COST_SCALE`].
pub fn solve_gkp_exact(inst: &GkpInstance) -> Result<Selection> {
    let n = inst.len();
    if n <= EXACT_ENUM_LIMIT {
        return enumerate(inst);
    }
    if inst.utility.flags().additive {
        return knapsack_dp(inst);
    }
    Err(Error::Size {
        what: "exact personalized pricing for non-additive utility",
        size: n,
        limit: EXACT_ENUM_LIMIT,
    })
}

fn enumerate(inst: &GkpInstance) -> Result<Selection> {
    let rs = qualities(&inst.workers);
    let eval = inst.utility.subset_evaluator(&rs)?;
    let n = inst.len();
    let mut x = vec![false; n];
    let mut best_x = x.clone();
    let mut best_v = eval(&x);
    struct Ctx<'a> {
        costs: Vec<f64>,
        budget: f64,
        eval: &'a dyn Fn(&[bool]) -> f64,
    }
    fn dfs(ctx: &Ctx<'_>, i: usize, acc: CompensatedSum, x: &mut Vec<bool>, best_x: &mut Vec<bool>, best_v: &mut f64) {
        if i == x.len() {
            let v = (ctx.eval)(x);
            if v > *best_v {
                *best_v = v;
                best_x.clone_from(x);
            }
            return;
        }
        dfs(ctx, i + 1, acc, x, best_x, best_v);
        let next = acc.with(ctx.costs[i]);
        if next.value() <= ctx.budget {
            x[i] = true;
            dfs(ctx, i + 1, next, x, best_x, best_v);
            x[i] = false;
        }
    }
    let ctx = Ctx {
        costs: inst.workers.iter().map(|w| w.cost).collect(),
        budget: inst.budget,
        eval: &*eval,
    };
    dfs(&ctx, 0, CompensatedSum::default(), &mut x, &mut best_x, &mut best_v);
    inst.selection(best_x)
}

fn knapsack_dp(inst: &GkpInstance) -> Result<Selection> {
    let scaled = |v: f64| round_half_even(v * DP_COST_SCALE);
    let x = dp_solve(inst, scaled, scaled)?;
    let sel = inst.selection(x)?;
    if sel.spent <= inst.budget {
        return Ok(sel);
    }
    // Rounding admitted an infeasible set: retry on a conservative grid.
    let x = dp_solve(inst, |c| (c * DP_COST_SCALE).ceil(), |b| (b * DP_COST_SCALE).floor())?;
    inst.selection(x)
}

fn dp_solve(inst: &GkpInstance, cost_grid: impl Fn(f64) -> f64, budget_grid: impl Fn(f64) -> f64) -> Result<Vec<bool>> {
    let n = inst.len();
    let cap = budget_grid(inst.budget);
    let cells = (n as f64 + 1.0) * (cap + 1.0);
    if cells > DP_TABLE_LIMIT as f64 {
        return Err(Error::Size {
            what: "knapsack DP table",
            size: cells.min(usize::MAX as f64) as usize,
            limit: DP_TABLE_LIMIT,
        });
    }
    let cap = cap as usize;
    let w: Vec<usize> = inst.workers.iter().map(|wk| cost_grid(wk.cost) as usize).collect();
    // best[i][b]: best value from workers i.. with capacity b.
    let width = cap + 1;
    let mut best = vec![0.0f64; (n + 1) * width];
    for i in (0..n).rev() {
        let r = inst.workers[i].quality;
        for b in 0..width {
            let skip = best[(i + 1) * width + b];
            let take = if w[i] <= b {
                best[(i + 1) * width + b - w[i]] + r
            } else {
                f64::NEG_INFINITY
            };
            best[i * width + b] = skip.max(take);
        }
    }
    let mut x = vec![false; n];
    let mut b = cap;
    for i in 0..n {
        if best[i * width + b] != best[(i + 1) * width + b] {
            x[i] = true;
            b -= w[i];
        }
    }
    Ok(x)
}

/// Fractional relaxation solved in closed form along bang-per-buck order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution {
    /// Worker indices in descending bang-per-buck.
    pub order: Vec<usize>,
    /// `z_i` per worker, in input order.
    pub z: Vec<f64>,
    /// Position in `order` of the fractional worker, if any.
    pub break_rank: Option<usize>,
    pub alpha: f64,
    pub value: f64,
}

/// `z = 1` up to the first worker whose cumulative cost exceeds `B`, a
/// fraction `alpha` of that worker, then zeros. All ones when the budget
/// covers everyone.
pub fn solve_gkp_relaxed(inst: &GkpInstance) -> Result<RelaxedSolution> {
    let order = sort_by_bang_per_buck(&inst.workers);
    let mut z = vec![0.0; inst.len()];
    let mut acc = CompensatedSum::default();
    let mut break_rank = None;
    let mut alpha = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let c = inst.workers[i].cost;
        let next = acc.with(c);
        if next.value() > inst.budget {
            alpha = ((inst.budget - acc.value()) / c).clamp(0.0, 1.0);
            z[i] = alpha;
            break_rank = Some(rank);
            break;
        }
        acc = next;
        z[i] = 1.0;
    }
    let y: Vec<f64> = inst.workers.iter().zip(&z).map(|(w, zi)| w.quality * zi).collect();
    let value = inst.utility.evaluate(&y)?;
    Ok(RelaxedSolution {
        order,
        z,
        break_rank,
        alpha,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PpMode {
    Greedy,
    Exact,
    Relaxed,
}

/// Personalized pricing restricted to zero bonus. Paying `p_i = c_i`
/// already attains any selection, so this delegates to the chosen solver.
pub fn solve_opp_no_bonus(inst: &GkpInstance, mode: PpMode) -> Result<Selection> {
    match mode {
        PpMode::Exact => solve_gkp_exact(inst),
        PpMode::Greedy => Ok(modified_greedy(inst, &BaseChoice::Cost)?.selection),
        PpMode::Relaxed => Err(Error::invalid("the relaxation has no integral no-bonus selection")),
    }
}

/// Solver output for the command line and bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpReport {
    pub mode: PpMode,
    pub utility: String,
    pub budget: f64,
    pub selection: Option<Selection>,
    pub accepted_ids: Vec<u64>,
    pub policy: Option<PersonalizedPolicy>,
    pub relaxed: Option<RelaxedSolution>,
    pub warnings: Vec<String>,
}

pub fn solve_pp(inst: &GkpInstance, mode: PpMode, base: &BaseChoice) -> Result<PpReport> {
    let mut report = PpReport {
        mode,
        utility: inst.utility.name(),
        budget: inst.budget,
        selection: None,
        accepted_ids: Vec::new(),
        policy: None,
        relaxed: None,
        warnings: Vec::new(),
    };
    let selection = match mode {
        PpMode::Relaxed => {
            report.relaxed = Some(solve_gkp_relaxed(inst)?);
            return Ok(report);
        }
        PpMode::Greedy => {
            let out = modified_greedy(inst, base)?;
            report.warnings = out.warnings;
            out.selection
        }
        PpMode::Exact => solve_gkp_exact(inst)?,
    };
    report.policy = Some(policy_from_selection(&inst.workers, &selection.x, base)?);
    report.accepted_ids = selection.selected().into_iter().map(|i| inst.workers[i].id).collect();
    report.selection = Some(selection);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{Additive, Typo};
    use crate::worker::{decide, expected_payment};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn three() -> Vec<WorkerProfile> {
        vec![
            WorkerProfile::new(1, 0.9, 0.3),
            WorkerProfile::new(2, 0.5, 0.25),
            WorkerProfile::new(3, 0.8, 0.5),
        ]
    }

    fn inst(workers: Vec<WorkerProfile>, b: f64) -> GkpInstance {
        GkpInstance::new(workers, b, Arc::new(Additive)).unwrap()
    }

    /// Bitmask brute force, independent of the DFS.
    fn brute(inst: &GkpInstance) -> f64 {
        let n = inst.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            let x: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let cost: f64 = inst
                .workers
                .iter()
                .zip(&x)
                .filter(|(_, &b)| b)
                .map(|(w, _)| w.cost)
                .sum();
            if cost <= inst.budget + 1e-12 {
                best = best.max(evaluate_selection(inst.utility.as_ref(), &inst.workers, &x).unwrap());
            }
        }
        best
    }

    #[test]
    fn greedy_example() {
        let g = modified_greedy(&inst(three(), 0.6), &BaseChoice::Cost).unwrap();
        assert_eq!(g.selection.x, vec![true, true, false]);
        assert!((g.selection.utility_value - 1.4).abs() < 1e-12);
        assert!((g.selection.spent - 0.55).abs() < 1e-12);
        assert_eq!(
            g.policy.offers,
            vec![Offer::new(0.3, 0.0), Offer::new(0.25, 0.0), Offer::ZERO]
        );
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn greedy_edges() {
        let g = modified_greedy(&inst(three(), 0.0), &BaseChoice::Cost).unwrap();
        assert_eq!(g.selection.x, vec![false; 3]);
        assert_eq!(g.selection.utility_value, 0.0);
        let g = modified_greedy(&inst(three(), 1.05), &BaseChoice::Cost).unwrap();
        assert_eq!(g.selection.x, vec![true; 3]);
    }

    #[test]
    fn greedy_prefers_singleton_when_better() {
        // cheap low-value worker first in bang-per-buck, one big worker
        let ws = vec![WorkerProfile::new(1, 0.2, 0.1), WorkerProfile::new(2, 1.0, 1.0)];
        let g = modified_greedy(&inst(ws, 1.0), &BaseChoice::Cost).unwrap();
        assert!(g.used_singleton);
        assert_eq!(g.selection.x, vec![false, true]);
    }

    #[test]
    fn exact_examples() {
        let s = solve_gkp_exact(&inst(three(), 0.6)).unwrap();
        assert!((s.utility_value - 1.4).abs() < 1e-12);
        assert_eq!(solve_gkp_exact(&inst(three(), 0.0)).unwrap().x, vec![false; 3]);
    }

    #[test]
    fn exact_power_of_bonus_profile() {
        // 8 cherries (0.1, 1), 4 mids (1, 2), 4 highs (2, 2), B = 10.
        // Best: 4 highs (cost 8, value 8) plus one mid (cost 2, value 1) = 9,
        // or 4 highs plus two cherries = 8.2.
        let mut ws = Vec::new();
        for i in 0..16u64 {
            let (r, c) = match i {
                0..=7 => (0.1, 1.0),
                8..=11 => (1.0, 2.0),
                _ => (2.0, 2.0),
            };
            ws.push(WorkerProfile::new(i, r, c));
        }
        let s = solve_gkp_exact(&inst(ws, 10.0)).unwrap();
        assert!((s.utility_value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn exact_lexicographic_tie_break() {
        let ws = vec![WorkerProfile::new(1, 0.5, 1.0), WorkerProfile::new(2, 0.5, 1.0)];
        let s = solve_gkp_exact(&inst(ws, 1.0)).unwrap();
        assert_eq!(s.x, vec![false, true]);
    }

    #[test]
    fn dp_matches_enumeration() {
        let mut ws = Vec::new();
        for i in 0..30u64 {
            let c = 0.05 + (i % 7) as f64 * 0.1;
            let r = 0.1 + ((i * 13) % 11) as f64 * 0.07;
            ws.push(WorkerProfile::new(i, r, c));
        }
        let big = inst(ws.clone(), 3.0);
        let dp = solve_gkp_exact(&big).unwrap();
        assert!(dp.spent <= 3.0);
        // compare with enumeration on the first 20 workers
        let small = inst(ws[..20].to_vec(), 2.0);
        let e = enumerate(&small).unwrap();
        let d = knapsack_dp(&small).unwrap();
        assert!((e.utility_value - d.utility_value).abs() < 1e-12);
        let typo = GkpInstance::new(
            vec![WorkerProfile::new(0, 0.5, 0.1); 25],
            1.0,
            Arc::new(Typo::threshold(25, 1).unwrap()),
        )
        .unwrap();
        assert!(matches!(solve_gkp_exact(&typo), Err(Error::Size { .. })));
    }

    #[test]
    fn relaxed_examples() {
        let r = solve_gkp_relaxed(&inst(three(), 0.6)).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
        assert!((r.alpha - 0.1).abs() < 1e-12);
        assert_eq!(r.z[..2], [1.0, 1.0]);
        assert!((r.z[2] - 0.1).abs() < 1e-12);
        assert!((r.value - 1.48).abs() < 1e-12);
        let r = solve_gkp_relaxed(&inst(three(), 0.0)).unwrap();
        assert_eq!(r.z, vec![0.0; 3]);
        let r = solve_gkp_relaxed(&inst(three(), 1.05)).unwrap();
        assert_eq!(r.z, vec![1.0; 3]);
        assert_eq!(r.break_rank, None);
    }

    #[test]
    fn policy_examples() {
        let ws = vec![WorkerProfile::new(1, 0.5, 0.25), WorkerProfile::new(2, 0.3, 0.4)];
        let p = policy_from_selection(&ws, &[true, false], &BaseChoice::Cost).unwrap();
        assert_eq!(p.offers, vec![Offer::new(0.25, 0.0), Offer::ZERO]);
        let p = policy_from_selection(&ws[..1], &[true], &BaseChoice::Zero).unwrap();
        assert!((p.offers[0].bonus - 0.5).abs() < 1e-15);
        assert!((expected_payment(&ws[0], &p.offers[0]) - 0.25).abs() < 1e-15);
        let zero_q = [WorkerProfile::new(1, 0.0, 0.25)];
        assert!(policy_from_selection(&zero_q, &[true], &BaseChoice::Zero).is_err());
        assert!(policy_from_selection(&ws, &[true, true], &BaseChoice::Custom(vec![0.3, 0.0])).is_err());
    }

    #[test]
    fn no_bonus_delegates() {
        let i = inst(three(), 0.6);
        assert!((solve_opp_no_bonus(&i, PpMode::Exact).unwrap().utility_value - 1.4).abs() < 1e-12);
    }

    fn workers_strategy(max: usize) -> impl Strategy<Value = Vec<WorkerProfile>> {
        proptest::collection::vec((0.01..1.0f64, 0.05..1.0f64), 1..=max).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (r, c))| WorkerProfile::new(i as u64, r, c))
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_matches_brute_force(ws in workers_strategy(10), frac in 0.0..1.0f64, m in 1u32..4) {
            let b = frac * ws.iter().map(|w| w.cost).sum::<f64>();
            for u in [Arc::new(Additive) as UtilityFunction, Arc::new(Typo::threshold(25, m).unwrap())] {
                let i = GkpInstance::new(ws.clone(), b, u).unwrap();
                let s = solve_gkp_exact(&i).unwrap();
                prop_assert!(s.spent <= b);
                prop_assert!((s.utility_value - brute(&i)).abs() <= 1e-9 * s.utility_value.max(1.0));
            }
        }

        #[test]
        fn policies_reproduce_selection(ws in workers_strategy(10), frac in 0.0..1.0f64, zero in any::<bool>()) {
            let b = frac * ws.iter().map(|w| w.cost).sum::<f64>();
            let i = inst(ws.clone(), b);
            let base = if zero { BaseChoice::Zero } else { BaseChoice::Cost };
            let g = modified_greedy(&i, &base).unwrap();
            prop_assert!(g.selection.spent <= b);
            for (k, w) in ws.iter().enumerate() {
                prop_assert_eq!(decide(w, &g.policy.offers[k]), g.selection.x[k]);
            }
        }

        #[test]
        fn additive_relaxation_dominates(ws in workers_strategy(10), frac in 0.0..1.0f64) {
            let b = frac * ws.iter().map(|w| w.cost).sum::<f64>();
            let i = inst(ws, b);
            let ex = solve_gkp_exact(&i).unwrap().utility_value;
            prop_assert!(solve_gkp_relaxed(&i).unwrap().value >= ex - 1e-12);
            prop_assert!(modified_greedy(&i, &BaseChoice::Cost).unwrap().selection.utility_value >= 0.5 * ex - 1e-12);
        }
    }
}
