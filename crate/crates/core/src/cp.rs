//! Common pricing: one offer `(p, q)` for every worker.
//!
//! The accepted set of `(p, q)` is `{i : p + q r_i >= c_i}`. Depending on the
//! cost-quality regime it is a suffix, an interval, or the complement of an
//! interval of workers ranked by descending quality, so each regime solver
//! searches interval endpoints and asks [`crate::lp2d`] whether some offer
//! induces exactly that set within budget. The vertex-enumeration oracle
//! solves any instance exactly and is the reference for the others.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp2d::{feasible_point_min, repair_strict, HalfPlane};
use crate::numeric::fsum;
use crate::utility::{qualities, SubsetEvaluator, UtilityFunction};
use crate::worker::{
    classify_profile, covering_bonus, decide, expected_payment, sort_by_bang_per_buck, sort_by_quality,
    validate_workers, Offer, Regime, WorkerProfile,
};

/// Largest instance accepted by [`cp_exact_oracle`].
pub const ORACLE_LIMIT: usize = 128;

/// Acceptance rows require `p + q r_i >= c_i + ACCEPT_MARGIN * max(1, max cost)`.
pub const ACCEPT_MARGIN: f64 = 1e-10;

/// Budget rows use `B * (1 - BUDGET_MARGIN)`.
pub const BUDGET_MARGIN: f64 = 1e-12;

/// Sample count for the empirical regime check behind solver diagnostics.
pub const REGIME_SAMPLES: usize = 200;

/// Accepted workers and total payment under a common offer.
pub fn accepted_set(workers: &[WorkerProfile], offer: &Offer) -> (Vec<bool>, f64) {
    let acc: Vec<bool> = workers.iter().map(|w| decide(w, offer)).collect();
    let spent = fsum(workers.iter().map(|w| expected_payment(w, offer)));
    (acc, spent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    PickingSuffix,
    Picking,
    Blocking,
    Other,
}

/// Shape of an accepted set over workers ranked by descending quality.
/// `range` holds 1-based inclusive ranks: the accepted run for picking
/// kinds, the rejected run for blocking. Empty accepted sets are `Picking`
/// with no range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureClass {
    pub kind: StructureKind,
    pub range: Option<(usize, usize)>,
}

impl StructureClass {
    pub fn is_empty_set(&self) -> bool {
        self.kind == StructureKind::Picking && self.range.is_none()
    }

    pub fn is_picking_form(&self) -> bool {
        matches!(self.kind, StructureKind::PickingSuffix | StructureKind::Picking)
    }

    /// Complement of a (possibly empty) rank interval: blocking sets, plus
    /// empty sets, suffixes and prefixes.
    pub fn is_blocking_form(&self) -> bool {
        match self.kind {
            StructureKind::Blocking | StructureKind::PickingSuffix => true,
            StructureKind::Picking => self.range.is_none_or(|(l, _)| l == 1),
            StructureKind::Other => false,
        }
    }
}

/// Classifies `accepted` over the quality ranking of `workers`.
///
/// Equal-quality workers form one group; a group that is only partly
/// accepted makes the set `Other`.
pub fn classify_structure(workers: &[WorkerProfile], accepted: &[bool]) -> StructureClass {
    let order = sort_by_quality(workers);
    // (first rank, last rank, accepted) per tie group, ranks 1-based
    let mut groups: Vec<(usize, usize, bool)> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let q = workers[order[k]].quality;
        let mut end = k;
        while end + 1 < order.len() && workers[order[end + 1]].quality == q {
            end += 1;
        }
        let on = order[k..=end].iter().filter(|&&i| accepted[i]).count();
        if on != 0 && on != end - k + 1 {
            return StructureClass {
                kind: StructureKind::Other,
                range: None,
            };
        }
        groups.push((k + 1, end + 1, on != 0));
        k = end + 1;
    }
    let n = order.len();
    let on: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].2).collect();
    let (Some(&first), Some(&last)) = (on.first(), on.last()) else {
        return StructureClass {
            kind: StructureKind::Picking,
            range: None,
        };
    };
    if last - first + 1 == on.len() {
        let range = Some((groups[first].0, groups[last].1));
        let kind = if last == groups.len() - 1 {
            StructureKind::PickingSuffix
        } else {
            StructureKind::Picking
        };
        return StructureClass { kind, range };
    }
    let off: Vec<usize> = (0..groups.len()).filter(|&g| !groups[g].2).collect();
    let (f, l) = (off[0], off[off.len() - 1]);
    if l - f + 1 == off.len() {
        return StructureClass {
            kind: StructureKind::Blocking,
            range: Some((groups[f].0, groups[l].1.min(n))),
        };
    }
    StructureClass {
        kind: StructureKind::Other,
        range: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpSolveReport {
    pub method: String,
    pub policy: Offer,
    /// Acceptance per worker, in input order.
    pub accepted: Vec<bool>,
    pub accepted_ids: Vec<u64>,
    pub spent: f64,
    pub utility_value: f64,
    pub structure: StructureClass,
    pub diagnostics: Vec<String>,
}

impl CpSolveReport {
    /// Higher utility, then lower spend, then smaller `(p, q)`.
    pub fn beats(&self, other: &CpSolveReport) -> bool {
        if self.utility_value != other.utility_value {
            return self.utility_value > other.utility_value;
        }
        if self.spent != other.spent {
            return self.spent < other.spent;
        }
        (self.policy.base, self.policy.bonus) < (other.policy.base, other.policy.bonus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Binary,
    #[default]
    Linear,
}

struct Ctx<'a> {
    workers: &'a [WorkerProfile],
    budget: f64,
    eval: SubsetEvaluator<'a>,
    /// Input indices by descending quality.
    order: Vec<usize>,
    scale: f64,
}

impl<'a> Ctx<'a> {
    fn new(workers: &'a [WorkerProfile], budget: f64, qs: &'a [f64], utility: &'a UtilityFunction) -> Result<Self> {
        validate_workers(workers, false)?;
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::invalid(format!(
                "budget {budget} must be finite and nonnegative"
            )));
        }
        let scale = workers.iter().map(|w| w.cost).fold(1.0, f64::max);
        Ok(Self {
            workers,
            budget,
            eval: utility.subset_evaluator(qs)?,
            order: sort_by_quality(workers),
            scale,
        })
    }

    fn n(&self) -> usize {
        self.workers.len()
    }

    fn ranked(&self, k: usize) -> &WorkerProfile {
        &self.workers[self.order[k]]
    }

    fn report(&self, offer: Offer, method: &str) -> Option<CpSolveReport> {
        let (accepted, spent) = accepted_set(self.workers, &offer);
        if spent > self.budget {
            return None;
        }
        Some(self.build(offer, accepted, spent, method))
    }

    fn build(&self, offer: Offer, accepted: Vec<bool>, spent: f64, method: &str) -> CpSolveReport {
        let utility_value = (self.eval)(&accepted);
        CpSolveReport {
            method: method.into(),
            policy: offer,
            accepted_ids: self
                .workers
                .iter()
                .zip(&accepted)
                .filter(|(_, &a)| a)
                .map(|(w, _)| w.id)
                .collect(),
            structure: classify_structure(self.workers, &accepted),
            accepted,
            spent,
            utility_value,
            diagnostics: Vec::new(),
        }
    }

    fn accept_row(&self, w: &WorkerProfile) -> HalfPlane {
        HalfPlane::ge(1.0, w.quality, w.cost + ACCEPT_MARGIN * self.scale)
    }

    fn reject_row(&self, w: &WorkerProfile) -> HalfPlane {
        HalfPlane::lt(1.0, w.quality, w.cost)
    }

    fn budget_row(&self, count: usize, r_sum: f64) -> HalfPlane {
        HalfPlane::le(count as f64, r_sum, self.budget * (1.0 - BUDGET_MARGIN))
    }

    /// Cheapest offer satisfying `rows`, accepted only if it induces exactly
    /// `target` within budget.
    fn realize(&self, target: &[bool], rows: &[HalfPlane], method: &str) -> Option<CpSolveReport> {
        let count = target.iter().filter(|&&t| t).count();
        let r_sum = fsum(
            self.workers
                .iter()
                .zip(target)
                .filter(|(_, &t)| t)
                .map(|(w, _)| w.quality),
        );
        let objective = if count == 0 { (1.0, 1.0) } else { (count as f64, r_sum) };
        let res = feasible_point_min(rows, objective);
        if !res.feasible {
            return None;
        }
        let (p, q) = repair_strict(&res, rows, self.scale).ok()?;
        let offer = Offer::new(p, q);
        let (accepted, spent) = accepted_set(self.workers, &offer);
        if accepted != target || spent > self.budget {
            return None;
        }
        Some(self.build(offer, accepted, spent, method))
    }

    fn target_ranks(&self, on: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut t = vec![false; self.n()];
        for (k, &i) in self.order.iter().enumerate() {
            t[i] = on(k);
        }
        t
    }

    /// Offer inducing exactly ranks `l..=u` (0-based).
    fn picking(&self, l: usize, u: usize) -> Option<CpSolveReport> {
        let n = self.n();
        let mut rows = vec![self.accept_row(self.ranked(l)), self.accept_row(self.ranked(u))];
        if l > 0 {
            rows.push(self.reject_row(self.ranked(l - 1)));
        }
        if u + 1 < n {
            rows.push(self.reject_row(self.ranked(u + 1)));
        }
        let r_sum = fsum((l..=u).map(|k| self.ranked(k).quality));
        rows.push(self.budget_row(u - l + 1, r_sum));
        self.realize(&self.target_ranks(|k| k >= l && k <= u), &rows, "cp_subres")
    }

    /// Offer inducing exactly the complement of ranks `l..=u` (0-based).
    fn blocking(&self, l: usize, u: usize) -> Option<CpSolveReport> {
        let n = self.n();
        let mut rows = vec![self.reject_row(self.ranked(l)), self.reject_row(self.ranked(u))];
        if l > 0 {
            rows.push(self.accept_row(self.ranked(l - 1)));
        }
        if u + 1 < n {
            rows.push(self.accept_row(self.ranked(u + 1)));
        }
        let r_sum = fsum((0..l).chain(u + 1..n).map(|k| self.ranked(k).quality));
        rows.push(self.budget_row(n - (u - l + 1), r_sum));
        self.realize(&self.target_ranks(|k| k < l || k > u), &rows, "cp_res")
    }

    /// Offer inducing exactly `target`, with one row per worker.
    fn exact(&self, target: &[bool], method: &str) -> Option<CpSolveReport> {
        let mut rows: Vec<HalfPlane> = self
            .workers
            .iter()
            .zip(target)
            .map(|(w, &a)| if a { self.accept_row(w) } else { self.reject_row(w) })
            .collect();
        rows.push(self.budget_row(0, 0.0));
        self.realize(target, &rows, method)
    }

    fn empty_report(&self, method: &str) -> CpSolveReport {
        self.report(Offer::ZERO, method).unwrap_or_else(|| {
            // free workers accept (0, 0) and are paid nothing
            let (accepted, _) = accepted_set(self.workers, &Offer::ZERO);
            self.build(Offer::ZERO, accepted, 0.0, method)
        })
    }
}

fn keep_best(best: &mut CpSolveReport, cand: Option<CpSolveReport>) {
    if let Some(c) = cand {
        if c.beats(best) {
            *best = c;
        }
    }
}

fn regime_diagnostic(workers: &[WorkerProfile], expected: Regime) -> Vec<String> {
    match classify_profile(workers, REGIME_SAMPLES) {
        Ok(r) if r == expected => Vec::new(),
        Ok(r) => vec![format!(
            "empirical profile classifies as {r}, solver assumes {expected}"
        )],
        Err(e) => vec![format!("could not classify the empirical profile: {e}")],
    }
}

/// Zero base and the smallest bonus that recruits the longest affordable
/// bang-per-buck prefix: the largest `k` with `(c_k / r_k) Σ_{i<=k} r_i <= B`.
///
/// Workers with zero quality and positive cost are never candidates.
/// `O(n log n)` for the sort; each candidate is confirmed with the exact
/// acceptance rule.
pub fn cp_unres(workers: &[WorkerProfile], budget: f64, utility: &UtilityFunction) -> Result<CpSolveReport> {
    let qs = qualities(workers);
    let ctx = Ctx::new(workers, budget, &qs, utility)?;
    let cand: Vec<usize> = sort_by_bang_per_buck(workers)
        .into_iter()
        .filter(|&i| workers[i].quality > 0.0 || workers[i].cost == 0.0)
        .collect();
    let ratio = |i: usize| covering_bonus(&workers[i], 0.0).unwrap_or(f64::INFINITY);
    let mut prefix = Vec::with_capacity(cand.len());
    let mut acc = crate::numeric::CompensatedSum::default();
    for &i in &cand {
        acc.add(workers[i].quality);
        prefix.push(acc.value());
    }
    let mut best = ctx.empty_report("cp_unres");
    for k in (0..cand.len()).rev() {
        if ratio(cand[k]) * prefix[k] > budget {
            continue;
        }
        // ties in ratio can admit more workers than the prefix; confirm
        if let Some(rep) = ctx.report(Offer::new(0.0, ratio(cand[k])), "cp_unres") {
            keep_best(&mut best, Some(rep));
            break;
        }
    }
    best.diagnostics = regime_diagnostic(workers, Regime::EffortUnresponsive);
    Ok(best)
}

/// Interval search for the subresponsive regime: for each upper rank `u`,
/// the smallest lower rank `l` such that some offer picks exactly `l..=u`
/// within budget; the best candidate overall wins.
pub fn cp_subres(
    workers: &[WorkerProfile],
    budget: f64,
    utility: &UtilityFunction,
    mode: SearchMode,
) -> Result<CpSolveReport> {
    let qs = qualities(workers);
    let ctx = Ctx::new(workers, budget, &qs, utility)?;
    let mut best = ctx.empty_report("cp_subres");
    for u in (0..ctx.n()).rev() {
        let found = match mode {
            SearchMode::Linear => (0..=u).find_map(|l| ctx.picking(l, u)),
            SearchMode::Binary => match ctx.picking(u, u) {
                None => None,
                Some(top) => {
                    let (mut lo, mut hi, mut rep) = (0, u, top);
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        match ctx.picking(mid, u) {
                            Some(r) => {
                                hi = mid;
                                rep = r;
                            }
                            None => lo = mid + 1,
                        }
                    }
                    Some(rep)
                }
            },
        };
        keep_best(&mut best, found);
    }
    best.method = "cp_subres".into();
    best.diagnostics = regime_diagnostic(workers, Regime::EffortSubresponsive);
    Ok(best)
}

/// Interval search for the responsive regime over blocked rank intervals
/// `l..=u`: for each `l`, the smallest feasible `u`. Accepting everyone and
/// accepting no one are candidates too.
pub fn cp_res(
    workers: &[WorkerProfile],
    budget: f64,
    utility: &UtilityFunction,
    mode: SearchMode,
) -> Result<CpSolveReport> {
    let qs = qualities(workers);
    let ctx = Ctx::new(workers, budget, &qs, utility)?;
    let n = ctx.n();
    let mut best = ctx.empty_report("cp_res");
    if n > 0 {
        // an empty block has no boundary rows to lean on
        keep_best(&mut best, ctx.exact(&vec![true; n], "cp_res"));
    }
    for l in 0..n {
        let found = match mode {
            SearchMode::Linear => (l..n).find_map(|u| ctx.blocking(l, u)),
            SearchMode::Binary => match ctx.blocking(l, n - 1) {
                None => None,
                Some(last) => {
                    let (mut lo, mut hi, mut rep) = (l, n - 1, last);
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        match ctx.blocking(l, mid) {
                            Some(r) => {
                                hi = mid;
                                rep = r;
                            }
                            None => lo = mid + 1,
                        }
                    }
                    Some(rep)
                }
            },
        };
        keep_best(&mut best, found);
    }
    best.method = "cp_res".into();
    best.diagnostics = regime_diagnostic(workers, Regime::EffortResponsive);
    Ok(best)
}

/// Best zero-bonus offer `(p, 0)`. Candidates are `p = 0` and each distinct
/// cost; ties go to the smaller `p`.
pub fn cp_no_bonus(workers: &[WorkerProfile], budget: f64, utility: &UtilityFunction) -> Result<CpSolveReport> {
    let qs = qualities(workers);
    let ctx = Ctx::new(workers, budget, &qs, utility)?;
    let mut ps: Vec<f64> = workers.iter().map(|w| w.cost).collect();
    ps.push(0.0);
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut best = ctx.empty_report("cp_no_bonus");
    for p in ps {
        if let Some(rep) = ctx.report(Offer::new(p, 0.0), "cp_no_bonus") {
            if rep.utility_value > best.utility_value {
                best = rep;
            }
        }
    }
    Ok(best)
}

/// Exact common-pricing optimum by enumerating the cells of the line
/// arrangement `p + r_i q = c_i` in the quadrant.
///
/// Every vertex (pairwise intersection, including the axes) is sampled at
/// the vertex, a short step along each line through it, and a short step
/// along each bisector between consecutive rays; one far point covers the
/// all-accepting cell. Each distinct accepted set then gets its cheapest
/// inducing offer from a feasibility pass over all workers, falling back
/// to the cheapest sample that produced it.
pub fn cp_exact_oracle(workers: &[WorkerProfile], budget: f64, utility: &UtilityFunction) -> Result<CpSolveReport> {
    let n = workers.len();
    if n > ORACLE_LIMIT {
        return Err(Error::Size {
            what: "common pricing oracle",
            size: n,
            limit: ORACLE_LIMIT,
        });
    }
    let qs = qualities(workers);
    let ctx = Ctx::new(workers, budget, &qs, utility)?;

    let mut lines: Vec<(f64, f64, f64)> = workers.iter().map(|w| (1.0, w.quality, w.cost)).collect();
    lines.push((1.0, 0.0, 0.0));
    lines.push((0.0, 1.0, 0.0));
    let mut samples = vec![(2.0 * ctx.scale + 1.0, 0.0)];
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            if let Some(v) = line_meet(lines[i], lines[j]) {
                if v.0 >= -1e-12 * ctx.scale && v.1 >= -1e-12 * ctx.scale {
                    sample_vertex((v.0.max(0.0), v.1.max(0.0)), &lines, ctx.scale, &mut samples);
                }
            }
        }
    }

    // cheapest sample per accepted set
    let mut cells: BTreeMap<Vec<bool>, (f64, Offer)> = BTreeMap::new();
    for (p, q) in samples {
        if p < 0.0 || q < 0.0 {
            continue;
        }
        let offer = Offer::new(p, q);
        let (acc, spent) = accepted_set(workers, &offer);
        let e = cells.entry(acc).or_insert((spent, offer));
        if spent < e.0 || (spent == e.0 && (p, q) < (e.1.base, e.1.bonus)) {
            *e = (spent, offer);
        }
    }

    let mut ranked: Vec<(f64, Vec<bool>, (f64, Offer))> =
        cells.into_iter().map(|(acc, s)| ((ctx.eval)(&acc), acc, s)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = ctx.empty_report("cp_exact_oracle");
    for (value, acc, (s_spent, s_offer)) in ranked {
        if value < best.utility_value {
            break;
        }
        let via_lp = ctx.exact(&acc, "cp_exact_oracle");
        let via_sample = (s_spent <= budget).then(|| ctx.build(s_offer, acc.clone(), s_spent, "cp_exact_oracle"));
        for cand in [via_lp, via_sample] {
            keep_best(&mut best, cand);
        }
    }
    Ok(best)
}

fn line_meet(l1: (f64, f64, f64), l2: (f64, f64, f64)) -> Option<(f64, f64)> {
    let det = l1.0 * l2.1 - l2.0 * l1.1;
    if det.abs() <= 1e-14 * (l1.0.abs() + l1.1.abs()) * (l2.0.abs() + l2.1.abs()) {
        return None;
    }
    Some(((l1.2 * l2.1 - l2.2 * l1.1) / det, (l1.0 * l2.2 - l2.0 * l1.2) / det))
}

fn sample_vertex(v: (f64, f64), lines: &[(f64, f64, f64)], scale: f64, out: &mut Vec<(f64, f64)>) {
    let mut dirs: Vec<f64> = Vec::new();
    let mut min_dist = f64::INFINITY;
    for &(a, b, c) in lines {
        let resid = a * v.0 + b * v.1 - c;
        let norm = a.hypot(b);
        let tol = 1e-12 * c.abs().max((a * v.0).abs() + (b * v.1).abs()).max(1.0);
        if resid.abs() <= tol {
            let ang = (-a).atan2(b);
            dirs.push(ang);
            dirs.push(ang + std::f64::consts::PI);
        } else {
            min_dist = min_dist.min(resid.abs() / norm);
        }
    }
    let eps = (1e-9 * scale).min(0.25 * min_dist);
    out.push(v);
    let wrap = |a: f64| a.rem_euclid(std::f64::consts::TAU);
    let mut angles: Vec<f64> = dirs.into_iter().map(wrap).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    for (k, &a) in angles.iter().enumerate() {
        out.push((v.0 + eps * a.cos(), v.1 + eps * a.sin()));
        let next = if k + 1 < angles.len() {
            angles[k + 1]
        } else {
            angles[0] + std::f64::consts::TAU
        };
        let mid = 0.5 * (a + next);
        out.push((v.0 + eps * mid.cos(), v.1 + eps * mid.sin()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeChoice {
    Unres,
    Subres,
    Res,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CpOptions {
    pub regime: RegimeChoice,
    pub search: SearchMode,
    /// Also run the oracle and keep its answer if it is strictly better.
    pub oracle_check: bool,
}

/// Regime dispatch. `Auto` classifies the empirical profile and sends
/// unclassified profiles to the oracle.
pub fn solve_cp(
    workers: &[WorkerProfile],
    budget: f64,
    utility: &UtilityFunction,
    opts: &CpOptions,
) -> Result<(Regime, CpSolveReport)> {
    let regime = match opts.regime {
        RegimeChoice::Unres => Regime::EffortUnresponsive,
        RegimeChoice::Subres => Regime::EffortSubresponsive,
        RegimeChoice::Res => Regime::EffortResponsive,
        RegimeChoice::Auto => classify_profile(workers, REGIME_SAMPLES)?,
    };
    let mut rep = match regime {
        Regime::EffortUnresponsive => cp_unres(workers, budget, utility)?,
        Regime::EffortSubresponsive => cp_subres(workers, budget, utility, opts.search)?,
        Regime::EffortResponsive => cp_res(workers, budget, utility, opts.search)?,
        Regime::Unclassified => return Ok((regime, cp_exact_oracle(workers, budget, utility)?)),
    };
    if opts.oracle_check {
        let oracle = cp_exact_oracle(workers, budget, utility)?;
        if oracle.utility_value > rep.utility_value {
            let mut diags = rep.diagnostics.clone();
            diags.push(format!(
                "{} reached {}, oracle reached {}; oracle answer kept",
                rep.method, rep.utility_value, oracle.utility_value
            ));
            rep = oracle;
            rep.diagnostics = diags;
        }
    }
    Ok((regime, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{Additive, Typo};
    use std::sync::Arc;

    fn additive() -> UtilityFunction {
        Arc::new(Additive)
    }

    fn pob16() -> Vec<WorkerProfile> {
        (0..16u64)
            .map(|i| match i {
                0..=7 => WorkerProfile::new(i, 0.1, 1.0),
                8..=11 => WorkerProfile::new(i, 1.0, 2.0),
                _ => WorkerProfile::new(i, 2.0, 2.0),
            })
            .collect()
    }

    fn ws(pairs: &[(f64, f64)]) -> Vec<WorkerProfile> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| WorkerProfile::new(i as u64 + 1, r, c))
            .collect()
    }

    #[test]
    fn unres_pivot_survives_rounding() {
        // c / r * r rounds below c for the second worker
        let w = ws(&[
            (0.6702367145016382, 0.6672201160103055),
            (0.3294522636634683, 0.2421482053474338),
        ]);
        let u: UtilityFunction = Arc::new(Typo::threshold(25, 1).unwrap());
        let rep = cp_unres(&w, 0.357187932048525, &u).unwrap();
        assert_eq!(rep.accepted, vec![false, true]);
        let oracle = cp_exact_oracle(&w, 0.357187932048525, &u).unwrap();
        assert!((rep.utility_value - oracle.utility_value).abs() < 1e-12);
    }

    #[test]
    fn accepted_set_examples() {
        let w = pob16();
        let (acc, spent) = accepted_set(&w, &Offer::new(1.0, 0.0));
        assert_eq!(acc.iter().filter(|&&a| a).count(), 8);
        assert!(acc[..8].iter().all(|&a| a));
        assert_eq!(spent, 8.0);
        let (acc, _) = accepted_set(&w, &Offer::ZERO);
        assert!(acc.iter().all(|&a| !a));
        let (acc, spent) = accepted_set(&w, &Offer::new(0.0, 1.0));
        assert_eq!(acc, (0..16).map(|i| i >= 12).collect::<Vec<_>>());
        assert_eq!(spent, 8.0);
    }

    #[test]
    fn structure_examples() {
        let w = ws(&[(0.9, 1.0), (0.8, 0.8), (0.7, 0.6), (0.6, 0.4), (0.5, 0.2)]);
        let c = classify_structure(&w, &[false, false, true, true, true]);
        assert_eq!(
            c,
            StructureClass {
                kind: StructureKind::PickingSuffix,
                range: Some((3, 5))
            }
        );
        let c = classify_structure(&w, &[false, true, true, false, false]);
        assert_eq!(
            c,
            StructureClass {
                kind: StructureKind::Picking,
                range: Some((2, 3))
            }
        );
        let c = classify_structure(&w, &[true, false, false, false, true]);
        assert_eq!(
            c,
            StructureClass {
                kind: StructureKind::Blocking,
                range: Some((2, 4))
            }
        );
        assert!(c.is_blocking_form() && !c.is_picking_form());
        let c = classify_structure(&w, &[true, false, true, false, true]);
        assert_eq!(c.kind, StructureKind::Other);
        let c = classify_structure(&w, &[false; 5]);
        assert!(c.is_empty_set() && c.is_blocking_form());
        let c = classify_structure(&w, &[true; 5]);
        assert_eq!(
            c,
            StructureClass {
                kind: StructureKind::PickingSuffix,
                range: Some((1, 5))
            }
        );
    }

    #[test]
    fn structure_tie_groups() {
        let w = ws(&[(0.5, 0.2), (0.5, 0.3), (0.9, 1.0)]);
        assert_eq!(classify_structure(&w, &[true, false, false]).kind, StructureKind::Other);
        assert_eq!(
            classify_structure(&w, &[true, true, false]).kind,
            StructureKind::PickingSuffix
        );
    }

    #[test]
    fn unres_example() {
        let w = ws(&[(0.5, 0.25), (0.7, 0.5), (0.9, 1.0)]);
        let r = cp_unres(&w, 2.0, &additive()).unwrap();
        assert_eq!(r.policy.base, 0.0);
        assert!((r.policy.bonus - 5.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.accepted, vec![true, true, false]);
        assert!((r.spent - 6.0 / 7.0).abs() < 1e-12);
        assert!((r.utility_value - 1.2).abs() < 1e-12);
        let o = cp_exact_oracle(&w, 2.0, &additive()).unwrap();
        assert!((o.utility_value - 1.2).abs() < 1e-12);

        let r = cp_unres(&w, 0.0, &additive()).unwrap();
        assert_eq!(r.policy, Offer::ZERO);
        assert!(r.accepted.iter().all(|&a| !a));
        let r = cp_unres(&w, 1.0 / 0.9 * 2.1, &additive()).unwrap();
        assert_eq!(r.accepted, vec![true; 3]);
    }

    #[test]
    fn subres_single_worker() {
        let w = ws(&[(0.5, 0.25)]);
        for mode in [SearchMode::Linear, SearchMode::Binary] {
            let r = cp_subres(&w, 1.0, &additive(), mode).unwrap();
            assert_eq!(r.accepted, vec![true]);
            let (p, q) = (r.policy.base, r.policy.bonus);
            assert!(p + 0.5 * q >= 0.25 && p + 0.5 * q <= 1.0);
            assert!((r.utility_value - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn subres_generous_budget_takes_all() {
        let f = |c: f64| c.powf(0.8) - 0.2;
        let w = ws(&[(f(0.4), 0.4), (f(0.6), 0.6), (f(0.9), 0.9)]);
        let r = cp_subres(&w, 10.0, &additive(), SearchMode::Binary).unwrap();
        assert_eq!(r.accepted, vec![true; 3]);
    }

    #[test]
    fn subres_duplicates_skip_split() {
        // the two identical workers can only be taken together
        let w = ws(&[(0.9, 0.8), (0.5, 0.3), (0.5, 0.3), (0.2, 0.1)]);
        let r = cp_subres(&w, 10.0, &additive(), SearchMode::Linear).unwrap();
        assert_ne!(r.structure.kind, StructureKind::Other);
        let o = cp_exact_oracle(&w, 10.0, &additive()).unwrap();
        assert_eq!(r.utility_value, o.utility_value);
    }

    #[test]
    fn res_examples() {
        // convex curve: cheap low qualities and expensive high ones
        let f = |c: f64| c * c;
        let costs = [0.2, 0.25, 0.3, 0.8, 0.9, 1.0];
        let w: Vec<WorkerProfile> = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| WorkerProfile::new(i as u64, f(c), c))
            .collect();
        for b in [0.0, 0.1, 0.7, 1.5, 2.5, 5.0] {
            let r = cp_res(&w, b, &additive(), SearchMode::Linear).unwrap();
            let o = cp_exact_oracle(&w, b, &additive()).unwrap();
            assert!(
                (r.utility_value - o.utility_value).abs() < 1e-9,
                "B={b}: {} vs {}",
                r.utility_value,
                o.utility_value
            );
            assert!(r.structure.is_blocking_form());
        }
        let r = cp_res(&w, 0.0, &additive(), SearchMode::Linear).unwrap();
        assert!(r.accepted.iter().all(|&a| !a));
    }

    #[test]
    fn no_bonus_examples() {
        let r = cp_no_bonus(&pob16(), 10.0, &additive()).unwrap();
        assert_eq!(r.policy, Offer::new(1.0, 0.0));
        assert!((r.utility_value - 0.8).abs() < 1e-12);
        let r = cp_no_bonus(&pob16(), 0.5, &additive()).unwrap();
        assert_eq!(r.policy, Offer::ZERO);
        let w = ws(&[(0.3, 0.5), (0.6, 0.5), (0.9, 0.5)]);
        let r = cp_no_bonus(&w, 1.5, &additive()).unwrap();
        assert_eq!(r.policy, Offer::new(0.5, 0.0));
        assert_eq!(r.accepted, vec![true; 3]);
    }

    #[test]
    fn oracle_examples() {
        let r = cp_exact_oracle(&pob16(), 10.0, &additive()).unwrap();
        assert!((r.utility_value - 8.0).abs() < 1e-12);
        let w = ws(&[(0.4, 0.3)]);
        let r = cp_exact_oracle(&w, 0.3, &additive()).unwrap();
        assert!((r.utility_value - 0.4).abs() < 1e-15);
        let big: Vec<WorkerProfile> = (0..129).map(|i| WorkerProfile::new(i, 0.5, 0.5)).collect();
        assert!(matches!(
            cp_exact_oracle(&big, 1.0, &additive()),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn oracle_dominates_no_bonus_on_typo() {
        let u: UtilityFunction = Arc::new(Typo::threshold(25, 1).unwrap());
        let w = ws(&[(0.3, 0.2), (0.6, 0.5), (0.95, 0.9), (0.5, 0.35)]);
        for b in [0.3, 0.8, 1.5, 3.0] {
            let o = cp_exact_oracle(&w, b, &u).unwrap();
            let nb = cp_no_bonus(&w, b, &u).unwrap();
            assert!(o.utility_value >= nb.utility_value);
            assert!(o.spent <= b);
        }
    }

    #[test]
    fn dispatch() {
        let w = ws(&[(0.5, 0.25), (0.7, 0.5), (0.9, 1.0)]);
        let opts = CpOptions {
            regime: RegimeChoice::Unres,
            oracle_check: true,
            ..Default::default()
        };
        let (regime, r) = solve_cp(&w, 2.0, &additive(), &opts).unwrap();
        assert_eq!(regime, Regime::EffortUnresponsive);
        assert!((r.utility_value - 1.2).abs() < 1e-12);
    }
}
