//! Seeded end-to-end checks shared by the acceptance tests and the
//! `audit` command.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{build_pob_instance, poa_audit, pob_ratio, AuditStatus};
use crate::bonus::{bm, invert_bm, BonusPolicy};
use crate::cp::{
    accepted_set, classify_structure, cp_exact_oracle, cp_res, cp_subres, cp_unres, SearchMode, StructureClass,
    StructureKind,
};
use crate::error::Result;
use crate::lp2d::{feasible_point, HalfPlane};
use crate::pp::{
    modified_greedy, solve_gkp_exact, solve_gkp_relaxed, solve_opp_no_bonus, BaseChoice, GkpInstance, PpMode,
};
use crate::scenario::{run_scenario, Scenario};
use crate::utility::{check_monotone, check_schur_convex, check_subadditive, check_symmetry, AuditConfig};
use crate::utility::{evaluate_selection, Additive, BinaryLabeling, Typo, Utility, UtilityFunction};
use crate::worker::{decide, Offer, Regime, WorkerProfile};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed_secs
        )
    }
}

type CheckFn = fn(u64) -> Result<(bool, String)>;

/// Check names in run order.
pub const CHECKS: [(&str, CheckFn); 10] = [
    ("greedy_half_ratio", greedy_half_ratio),
    ("relaxation_dominance", relaxation_dominance),
    ("no_bonus_personalized", no_bonus_personalized),
    ("common_pricing_structure", common_pricing_structure),
    ("regime_solver_optimality", regime_solver_optimality),
    ("power_of_bonus", power_of_bonus),
    ("agnosticity_bound", agnosticity_bound),
    ("reference_sweep", reference_sweep),
    ("numerical_kernels", numerical_kernels),
    ("utility_properties", utility_properties),
];

/// Runs one check by 1-based id; errors count as failures.
pub fn run_check(id: usize, seed: u64) -> Option<CheckOutcome> {
    let (name, f) = CHECKS.get(id.checked_sub(1)?)?;
    let start = Instant::now();
    let (passed, detail) = f(seed).unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(CheckOutcome {
        id,
        name: (*name).into(),
        passed,
        detail,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    (1..=CHECKS.len()).filter_map(|i| run_check(i, seed)).collect()
}

/// Looks a check up by name or id.
pub fn find_check(key: &str) -> Option<usize> {
    key.parse::<usize>()
        .ok()
        .filter(|i| (1..=CHECKS.len()).contains(i))
        .or_else(|| CHECKS.iter().position(|(n, _)| *n == key).map(|i| i + 1))
}

/// Random knapsack instance: `n` in `1..=14`, quality `U[0.05, 1)`, cost
/// `U[0.1, 1]`, budget `U[0, Σc]`.
pub fn random_gkp(rng: &mut ChaCha8Rng, utility: &UtilityFunction) -> Result<GkpInstance> {
    let n = rng.random_range(1..=14);
    let workers: Vec<WorkerProfile> = (0..n)
        .map(|i| WorkerProfile::new(i as u64 + 1, rng.random_range(0.05..1.0), rng.random_range(0.1..=1.0)))
        .collect();
    let total: f64 = workers.iter().map(|w| w.cost).sum();
    let budget = rng.random_range(0.0..=total);
    GkpInstance::new(workers, budget, utility.clone())
}

fn typo1() -> Result<UtilityFunction> {
    Ok(Arc::new(Typo::threshold(25, 1)?))
}

fn knapsack_instances(seed: u64) -> Result<Vec<GkpInstance>> {
    let u = typo1()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200).map(|_| random_gkp(&mut rng, &u)).collect()
}

fn greedy_half_ratio(seed: u64) -> Result<(bool, String)> {
    let start = Instant::now();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for inst in knapsack_instances(seed)? {
        let exact = solve_gkp_exact(&inst)?.utility_value;
        let greedy = modified_greedy(&inst, &BaseChoice::Cost)?.selection.utility_value;
        if exact > 0.0 {
            worst = worst.min(greedy / exact);
        }
        if greedy < 0.5 * exact {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        violations == 0 && secs < 60.0,
        format!("200 instances, {violations} below half, worst ratio {worst:.6}, {secs:.2}s (limit 60s)"),
    ))
}

fn relaxation_dominance(seed: u64) -> Result<(bool, String)> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for inst in knapsack_instances(seed)? {
        let exact = solve_gkp_exact(&inst)?.utility_value;
        let relaxed = solve_gkp_relaxed(&inst)?.value;
        if relaxed < exact {
            violations += 1;
            worst = worst.max(exact - relaxed);
        }
    }
    Ok((
        violations == 0,
        format!("200 instances, {violations} with relaxed < exact, largest shortfall {worst:.6e}"),
    ))
}

fn no_bonus_personalized(seed: u64) -> Result<(bool, String)> {
    let mut mismatches = 0;
    for inst in knapsack_instances(seed)? {
        let exact = solve_gkp_exact(&inst)?.utility_value;
        let sel = solve_opp_no_bonus(&inst, PpMode::Exact)?;
        // realize with base-only offers and recount who accepts
        let accepted: Vec<bool> = inst
            .workers
            .iter()
            .zip(&sel.x)
            .map(|(w, &on)| decide(w, &Offer::new(if on { w.cost } else { 0.0 }, 0.0)))
            .collect();
        let realized = evaluate_selection(inst.utility.as_ref(), &inst.workers, &accepted)?;
        if accepted != sel.x || realized != exact || sel.utility_value != exact {
            mismatches += 1;
        }
    }
    Ok((
        mismatches == 0,
        format!("200 instances, {mismatches} mismatches (exact equality)"),
    ))
}

/// Profile with `r = f(c)`, costs `U[lo, 1]`, ids from 1.
pub fn curve_profile(rng: &mut ChaCha8Rng, n: usize, lo: f64, f: impl Fn(f64) -> f64) -> Vec<WorkerProfile> {
    (0..n)
        .map(|i| {
            let c = rng.random_range(lo..=1.0);
            WorkerProfile::new(i as u64 + 1, f(c), c)
        })
        .collect()
}

fn common_pricing_structure(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    type Case = (&'static str, f64, fn(f64) -> f64, fn(&StructureClass) -> bool);
    let cases: [Case; 4] = [
        ("sqrt", 0.05, f64::sqrt, |s| {
            s.is_empty_set() || s.kind == StructureKind::PickingSuffix
        }),
        ("x^0.9", 0.05, |x| x.powf(0.9), StructureClass::is_picking_form),
        ("sqrt-0.5", 0.3, |x| x.sqrt() - 0.5, StructureClass::is_picking_form),
        ("x^2", 0.05, |x| x * x, StructureClass::is_blocking_form),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, lo, f, expect) in cases {
        let workers = curve_profile(&mut rng, 10, lo, f);
        let hi = 2.0 * workers.iter().map(|w| w.cost).fold(0.0, f64::max);
        let (mut bad, mut other) = (0, 0);
        for _ in 0..1000 {
            let offer = Offer::new(rng.random_range(0.0..=hi), rng.random_range(0.0..=hi));
            let (acc, _) = accepted_set(&workers, &offer);
            let s = classify_structure(&workers, &acc);
            other += usize::from(s.kind == StructureKind::Other);
            bad += usize::from(!expect(&s));
        }
        ok &= bad == 0 && other == 0;
        parts.push(format!("{name}: {bad} off-form, {other} other"));
    }
    Ok((ok, format!("1000 offers per curve; {}", parts.join("; "))))
}

fn regime_instance(rng: &mut ChaCha8Rng, regime: Regime) -> Vec<WorkerProfile> {
    let n = rng.random_range(1..=12);
    let a = rng.random_range(0.5..=1.0);
    match regime {
        Regime::EffortUnresponsive => {
            let beta = rng.random_range(0.3..=0.95);
            curve_profile(rng, n, 0.05, |c| a * c.powf(beta))
        }
        Regime::EffortSubresponsive => {
            let beta: f64 = rng.random_range(0.4..=0.8);
            let b = 1.0 - beta;
            let lo = (b + 0.1).powf(1.0 / beta);
            curve_profile(rng, n, lo, |c| a * (c.powf(beta) - b))
        }
        _ => {
            let beta = rng.random_range(1.2..=3.0);
            curve_profile(rng, n, 0.05, |c| a * c.powf(beta))
        }
    }
}

fn regime_solver_optimality(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let additive: UtilityFunction = Arc::new(Additive);
    let typo = typo1()?;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut mode_disagree = 0;
    for regime in [
        Regime::EffortUnresponsive,
        Regime::EffortSubresponsive,
        Regime::EffortResponsive,
    ] {
        let (mut misses, mut worst) = (0, 0.0f64);
        for t in 0..100 {
            let workers = regime_instance(&mut rng, regime);
            let u = if t % 2 == 0 { &additive } else { &typo };
            let total: f64 = workers.iter().map(|w| w.cost).sum();
            let budget = rng.random_range(0.0..=total);
            let oracle = cp_exact_oracle(&workers, budget, u)?.utility_value;
            let got = match regime {
                Regime::EffortUnresponsive => cp_unres(&workers, budget, u)?.utility_value,
                Regime::EffortSubresponsive => {
                    let lin = cp_subres(&workers, budget, u, SearchMode::Linear)?.utility_value;
                    let bin = cp_subres(&workers, budget, u, SearchMode::Binary)?.utility_value;
                    mode_disagree += usize::from((lin - bin).abs() > 1e-9);
                    lin
                }
                _ => cp_res(&workers, budget, u, SearchMode::Linear)?.utility_value,
            };
            let gap = (oracle - got).abs();
            worst = worst.max(gap);
            misses += usize::from(gap > 1e-9);
        }
        ok &= misses == 0;
        parts.push(format!("{regime}: {misses}/100 off by > 1e-9 (max {worst:.3e})"));
    }
    ok &= mode_disagree == 0;
    Ok((
        ok,
        format!("{}; search modes disagree on {mode_disagree}", parts.join("; ")),
    ))
}

fn power_of_bonus(_seed: u64) -> Result<(bool, String)> {
    let r = pob_ratio(&build_pob_instance(16, 1.0, 0.1)?, None)?;
    let mut ok = (r.ratio - 0.1).abs() <= 1e-12
        && (r.no_bonus.utility_value - 0.8).abs() <= 1e-12
        && (r.with_bonus.utility_value - 8.0).abs() <= 1e-12;
    let mut failures = Vec::new();
    for n in [4, 8, 16, 32] {
        for eps in [0.0, 0.1, 0.5, 0.9] {
            let g = pob_ratio(&build_pob_instance(n, 1.0, eps)?, None)?;
            if !g.bound_holds {
                ok = false;
                failures.push(format!("n={n} eps={eps} ratio={}", g.ratio));
            }
        }
    }
    Ok((
        ok,
        format!(
            "n=16 eps=0.1: ratio {:.15}, no bonus {}, with bonus {}; grid violations: {}",
            r.ratio,
            r.no_bonus.utility_value,
            r.with_bonus.utility_value,
            if failures.is_empty() {
                "none".into()
            } else {
                failures.join(", ")
            }
        ),
    ))
}

fn agnosticity_bound(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let additive: UtilityFunction = Arc::new(Additive);
    let typo = typo1()?;
    let (mut audited, mut tries, mut failed) = (0, 0, Vec::new());
    let mut min_delta = f64::INFINITY;
    while audited < 100 && tries < 20_000 {
        tries += 1;
        let n = rng.random_range(3..=12);
        let workers: Vec<WorkerProfile> = (0..n)
            .map(|i| WorkerProfile::new(i as u64 + 1, rng.random_range(0.05..1.0), rng.random_range(0.1..=1.0)))
            .collect();
        let total: f64 = workers.iter().map(|w| w.cost).sum();
        let budget = rng.random_range(0.3 * total..=total);
        let u = if audited % 2 == 0 { &additive } else { &typo };
        let a = poa_audit(&workers, budget, u)?;
        if a.status == AuditStatus::PreconditionFailed {
            continue;
        }
        audited += 1;
        let delta = a.certificate.as_ref().map_or(f64::NAN, |c| c.delta);
        min_delta = min_delta.min(delta);
        if a.status != AuditStatus::Passed || delta < 1.0 {
            failed.push(a.detail);
        }
    }
    Ok((
        audited == 100 && failed.is_empty(),
        format!(
            "{audited} gated instances from {tries} draws, {} failures, min delta {min_delta:.6}{}",
            failed.len(),
            failed.first().map(|d| format!("; first: {d}")).unwrap_or_default()
        ),
    ))
}

fn reference_sweep(seed: u64) -> Result<(bool, String)> {
    let start = Instant::now();
    let r = run_scenario(&Scenario::reference(seed))?;
    let secs = start.elapsed().as_secs_f64();
    let pts = &r.points;
    let pp0 = pts[0].pp.utility_value;
    let a = pts.iter().all(|p| (p.pp.utility_value - pp0).abs() <= 1e-9);
    let best = pts
        .iter()
        .max_by(|x, y| x.cp.utility_value.total_cmp(&y.cp.utility_value))
        .expect("nonempty sweep");
    let b = pts.iter().all(|p| p.cp.utility_value >= p.cp_no_bonus.utility_value)
        && best.cp.utility_value - best.cp_no_bonus.utility_value > 1e-9;
    let c = pts
        .iter()
        .filter(|p| p.regime == Regime::EffortUnresponsive)
        .all(|p| p.cp.policy.base == 0.0);
    let thresholds: Vec<_> = pts
        .iter()
        .filter_map(|p| match p.policy {
            BonusPolicy::Threshold { m, .. } => Some((m, p.regime)),
            BonusPolicy::Linear { .. } => None,
        })
        .collect();
    let responsive = |g: Regime| matches!(g, Regime::EffortSubresponsive | Regime::EffortResponsive);
    let switch = thresholds.iter().position(|&(_, g)| g != Regime::EffortUnresponsive);
    let d = thresholds
        .first()
        .is_some_and(|&(_, g)| g == Regime::EffortUnresponsive)
        && switch.is_some_and(|k| thresholds[k..].iter().all(|&(_, g)| responsive(g)))
        && thresholds
            .iter()
            .any(|&(m, g)| m == 23 && g == Regime::EffortResponsive);
    let labels: Vec<String> = pts.iter().map(|p| format!("{}:{}", p.label, short(p.regime))).collect();
    Ok((
        a && b && c && d && secs < 300.0,
        format!(
            "(a) {} (b) {} [best {} gap {:.4}] (c) {} (d) {} [{}], {secs:.1}s (limit 300s)",
            pass(a),
            pass(b),
            best.label,
            best.cp.utility_value - best.cp_no_bonus.utility_value,
            pass(c),
            pass(d),
            labels.join(" ")
        ),
    ))
}

fn short(r: Regime) -> &'static str {
    match r {
        Regime::EffortUnresponsive => "U",
        Regime::EffortSubresponsive => "S",
        Regime::EffortResponsive => "R",
        Regime::Unclassified => "?",
    }
}

fn pass(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "no"
    }
}

/// Width of a convex polygon: the smallest extent over edge normals.
fn polygon_width(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len = dx.hypot(dy);
            if len == 0.0 {
                return f64::INFINITY;
            }
            poly.iter()
                .map(|v| ((v.0 - a.0) * dy - (v.1 - a.1) * dx).abs() / len)
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Allowed excess of a witness on a normalized row.
const WITNESS_TOL: f64 = 1e-12;

fn lp_grid_agreement(seed: u64) -> Result<(usize, usize, usize)> {
    const GRID: usize = 400;
    const SIDE: f64 = 2.0;
    let h = SIDE / (GRID - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut disagree, mut thin, mut bad_witness) = (0, 0, 0);
    for _ in 0..500 {
        let k = rng.random_range(1..=5);
        let mut rows: Vec<HalfPlane> = (0..k)
            .map(|_| {
                let (a, b, r) = (
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                );
                if rng.random_bool(0.5) {
                    HalfPlane::le(a, b, r)
                } else {
                    HalfPlane::lt(a, b, r)
                }
            })
            .collect();
        rows.push(HalfPlane::le(1.0, 0.0, SIDE));
        rows.push(HalfPlane::le(0.0, 1.0, SIDE));
        let res = feasible_point(&rows);
        let grid_hit = (0..GRID).any(|i| {
            (0..GRID).any(|j| {
                let (p, q) = (i as f64 * h, j as f64 * h);
                rows.iter().all(|r| r.holds(p, q))
            })
        });
        match (res.feasible, grid_hit) {
            (true, true) | (false, false) => {}
            // a region thinner than ~2 grid steps may hold no grid point
            (true, false) if polygon_width(&res.polygon) < 2.2 * h => thin += 1,
            _ => disagree += 1,
        }
        // the witness may sit on a boundary up to rounding
        if let Some((p, q)) = res.witness {
            if rows.iter().any(|r| r.normalized().excess(p, q) > WITNESS_TOL) {
                bad_witness += 1;
            }
        }
    }
    Ok((disagree, thin, bad_witness))
}

fn numerical_kernels(seed: u64) -> Result<(bool, String)> {
    let mut worst_r = 0.0f64;
    let mut worst_s = 0.0f64;
    let mut saturated = 0;
    for m in [1, 8, 14, 19, 23] {
        for k in 0..1000 {
            let x = (k as f64 + 0.5) / 1000.0;
            // r-grid: forward map of the inverse
            let s = invert_bm(x, 25, m)?;
            worst_r = worst_r.max((bm(s, 25, m)? - x).abs());
            // s-grid: inverse of the forward map, where it is representable
            let r = bm(x, 25, m)?;
            if r >= 1.0 - 1e-6 {
                saturated += 1;
                continue;
            }
            worst_s = worst_s.max((invert_bm(r, 25, m)? - x).abs());
        }
    }
    let (disagree, thin, bad_witness) = lp_grid_agreement(seed)?;
    let ok = worst_r <= 1e-9 && worst_s <= 1e-9 && disagree == 0 && bad_witness == 0;
    Ok((
        ok,
        format!(
            "bm(invert(r)) max err {worst_r:.2e}; invert(bm(s)) max err {worst_s:.2e} ({saturated} saturated s skipped); lp2d vs 400x400 grid: {disagree}/500 disagree, {thin} thin regions, {bad_witness} bad witnesses"
        ),
    ))
}

fn utility_properties(seed: u64) -> Result<(bool, String)> {
    let typo = Typo::threshold(25, 1)?;
    let cfg = AuditConfig {
        trials: 1000,
        seed,
        tol: 1e-9,
        ..AuditConfig::default()
    };
    let reports = [
        check_symmetry(&typo, &cfg)?,
        check_monotone(&typo, &cfg)?,
        check_subadditive(&typo, &cfg)?,
        check_schur_convex(&typo, &cfg)?,
    ];
    let mut ok = reports.iter().all(|r| r.passed());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let r: f64 = rng.random_range(0.0..=1.0);
        worst = worst.max((BinaryLabeling.evaluate(&[r])? - 2.0 * r).abs());
    }
    ok &= worst <= 1e-12;
    let audit: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {}", r.property, r.violations))
        .collect();
    Ok((
        ok,
        format!(
            "typo m=1 violations: {}; binary labeling |U - 2r| max {worst:.1e}",
            audit.join(", ")
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(find_check("power_of_bonus"), Some(6));
        assert_eq!(find_check("3"), Some(3));
        assert_eq!(find_check("11"), None);
        assert!(run_check(0, 0).is_none());
    }

    #[test]
    fn width_of_square() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert!((polygon_width(&sq) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cheap_checks_pass() {
        for id in [3, 6] {
            let out = run_check(id, 1).unwrap();
            assert!(out.passed, "{}", out.line());
        }
    }
}
