//! Sweep runner over bonus policies and plot-data emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::{generate_population, AbilityProfile, BonusPolicy, PopulationSpec, POPULATION_GENERATOR};
use crate::cp::{accepted_set, cp_no_bonus, solve_cp, CpOptions, CpSolveReport};
use crate::error::{Error, Result};
use crate::io::load_abilities;
use crate::numeric::le_rel;
use crate::pp::{modified_greedy, policy_from_selection, solve_gkp_exact, BaseChoice, GkpInstance, PpMode, Selection};
use crate::utility::UtilitySpec;
use crate::worker::{decide, sort_by_quality, PersonalizedPolicy, Regime, WorkerProfile};

/// Relative slack for the cross-solver ordering check.
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// Where abilities and costs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PopulationSource {
    Generator(PopulationSpec),
    /// CSV with header `id,ability,cost`.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PpSolver {
    /// Exact when the instance fits, greedy otherwise.
    #[default]
    Auto,
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub pp: PpSolver,
    #[serde(default)]
    pub cp: CpOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub population: PopulationSource,
    pub utility: UtilitySpec,
    pub sweep: Vec<BonusPolicy>,
    pub budget: f64,
    #[serde(default)]
    pub solvers: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Fifteen generated workers, 25 typos, budget 4, thresholds 15 to 25
    /// and the linear policy, oracle cross-check on.
    pub fn reference(seed: u64) -> Self {
        let mut sweep: Vec<BonusPolicy> = (15..=25).map(|m| BonusPolicy::Threshold { m, total: 25 }).collect();
        sweep.push(BonusPolicy::Linear { total: 25 });
        Self {
            name: "reference".into(),
            population: PopulationSource::Generator(PopulationSpec::new(15, seed)),
            utility: UtilitySpec::Typo { total: 25, m: None },
            sweep,
            budget: 4.0,
            solvers: SolverConfig {
                pp: PpSolver::Auto,
                cp: CpOptions {
                    oracle_check: true,
                    ..CpOptions::default()
                },
            },
            output_dir: None,
        }
    }

    /// Reads a JSON config. Relative population paths resolve against the
    /// config's directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let mut s: Scenario = serde_json::from_reader(fs::File::open(path)?)?;
        if let PopulationSource::File { path: p } = &mut s.population {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::invalid("scenario sweep is empty"));
        }
        if !self.budget.is_finite() || self.budget < 0.0 {
            return Err(Error::invalid(format!(
                "budget {} must be finite and nonnegative",
                self.budget
            )));
        }
        if let PopulationSource::File { path } = &self.population {
            if !path.is_file() {
                return Err(Error::invalid(format!("population file {} not found", path.display())));
            }
        }
        for p in &self.sweep {
            p.transform()?;
        }
        Ok(())
    }

    fn seeds(&self) -> Vec<u64> {
        match &self.population {
            PopulationSource::Generator(g) => vec![g.seed],
            PopulationSource::File { .. } => Vec::new(),
        }
    }

    fn load_population(&self) -> Result<AbilityProfile> {
        match &self.population {
            PopulationSource::Generator(g) => generate_population(g),
            PopulationSource::File { path } => load_abilities(path),
        }
    }
}

/// Outcome at one bonus policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub label: String,
    pub policy: BonusPolicy,
    pub workers: Vec<WorkerProfile>,
    pub abilities: Vec<f64>,
    pub regime: Regime,
    pub pp_mode: PpMode,
    pub pp: Selection,
    pub pp_policy: PersonalizedPolicy,
    pub pp_no_bonus: Selection,
    pub cp: CpSolveReport,
    pub cp_no_bonus: CpSolveReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: Scenario,
    pub generator: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub points: Vec<PointResult>,
    /// Recorded in the manifest only, so the result itself stays reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs every sweep point in parallel; points come back in sweep order.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let start = Instant::now();
    let population = scenario.load_population()?;
    population.validate()?;
    let points = scenario
        .sweep
        .par_iter()
        .enumerate()
        .map(|(i, policy)| run_point(scenario, &population, i, policy))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        scenario: scenario.clone(),
        generator: POPULATION_GENERATOR.into(),
        version: crate::VERSION.into(),
        seeds: scenario.seeds(),
        points,
        wall_time: start.elapsed(),
    })
}

fn run_point(
    scenario: &Scenario,
    population: &AbilityProfile,
    index: usize,
    policy: &BonusPolicy,
) -> Result<PointResult> {
    let workers = crate::bonus::translate(population, policy)?;
    let utility = scenario.utility.build(Some(policy))?;
    let inst = GkpInstance::new(workers.clone(), scenario.budget, utility.clone())?;
    let (pp_mode, pp) = match scenario.solvers.pp {
        PpSolver::Exact => (PpMode::Exact, solve_gkp_exact(&inst)?),
        PpSolver::Greedy => (PpMode::Greedy, modified_greedy(&inst, &BaseChoice::Cost)?.selection),
        PpSolver::Auto => match solve_gkp_exact(&inst) {
            Ok(s) => (PpMode::Exact, s),
            Err(Error::Size { .. }) => (PpMode::Greedy, modified_greedy(&inst, &BaseChoice::Cost)?.selection),
            Err(e) => return Err(e),
        },
    };
    let pp_policy = policy_from_selection(&workers, &pp.x, &BaseChoice::Cost)?;
    // zero-bonus personalized pricing reaches the same selections
    let pp_no_bonus = pp.clone();
    let (regime, cp) = solve_cp(&workers, scenario.budget, &utility, &scenario.solvers.cp)?;
    let cp_nb = cp_no_bonus(&workers, scenario.budget, &utility)?;
    let point = PointResult {
        index,
        label: policy.label(),
        policy: *policy,
        abilities: population.workers.iter().map(|w| w.ability).collect(),
        workers,
        regime,
        pp_mode,
        pp,
        pp_policy,
        pp_no_bonus,
        cp,
        cp_no_bonus: cp_nb,
    };
    check_point(&point, scenario.budget)?;
    Ok(point)
}

/// Ordering `PP >= CP >= CP without bonus` and self-reproducing accepted sets.
fn check_point(pt: &PointResult, budget: f64) -> Result<()> {
    let breach = |msg: String| Err(Error::InvariantBreach(format!("{}: {msg}", pt.label)));
    let (pp, cp, nb) = (pt.pp.utility_value, pt.cp.utility_value, pt.cp_no_bonus.utility_value);
    if pt.pp_mode == PpMode::Exact && !le_rel(cp, pp, CONSISTENCY_TOL) {
        return breach(format!("common pricing {cp} exceeds personalized {pp}"));
    }
    if !le_rel(nb, cp, CONSISTENCY_TOL) {
        return breach(format!("no-bonus {nb} exceeds with-bonus {cp}"));
    }
    for rep in [&pt.cp, &pt.cp_no_bonus] {
        let (acc, spent) = accepted_set(&pt.workers, &rep.policy);
        if acc != rep.accepted || spent > budget {
            return breach(format!("{} accepted set does not reproduce within budget", rep.method));
        }
    }
    for (i, w) in pt.workers.iter().enumerate() {
        if decide(w, &pt.pp_policy.offers[i]) != pt.pp.x[i] {
            return breach(format!("personalized offer to worker {} does not reproduce", w.id));
        }
    }
    Ok(())
}

/// File names written by [`emit_plot_data`].
pub const PLOT_FILES: [&str; 4] = ["cost_quality.csv", "acceptance.csv", "pricing.csv", "utility.csv"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'a str,
    version: &'a str,
    seeds: &'a [u64],
    scenario: &'a str,
    solvers: &'a SolverConfig,
    wall_time_secs: f64,
    files: Vec<&'a str>,
}

/// Writes the four CSV views, `result.json` and `manifest.json` into `dir`.
pub fn emit_plot_data(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    let mut rows = Vec::new();
    for pt in &result.points {
        let mut idx: Vec<usize> = (0..pt.workers.len()).collect();
        idx.sort_by(|&a, &b| pt.workers[a].cost.total_cmp(&pt.workers[b].cost).then(a.cmp(&b)));
        for i in idx {
            let w = &pt.workers[i];
            rows.push(vec![
                pt.label.clone(),
                w.id.to_string(),
                fmt(w.cost),
                fmt(pt.abilities[i]),
                fmt(w.quality),
            ]);
        }
    }
    write_csv(
        &out(PLOT_FILES[0]),
        &["policy", "worker_id", "cost", "ability", "quality"],
        rows,
    )?;

    let mut rows = Vec::new();
    for pt in &result.points {
        for (rank, i) in sort_by_quality(&pt.workers).into_iter().enumerate() {
            rows.push(vec![
                pt.label.clone(),
                (rank + 1).to_string(),
                pt.workers[i].id.to_string(),
                u8::from(pt.cp.accepted[i]).to_string(),
                u8::from(pt.cp_no_bonus.accepted[i]).to_string(),
            ]);
        }
    }
    write_csv(
        &out(PLOT_FILES[1]),
        &["policy", "quality_rank", "worker_id", "accepted", "accepted_no_bonus"],
        rows,
    )?;

    let rows = result
        .points
        .iter()
        .map(|pt| {
            vec![
                pt.label.clone(),
                pt.regime.to_string(),
                fmt(pt.cp.policy.base),
                fmt(pt.cp.policy.bonus),
                fmt(pt.cp.spent),
                serde_json::to_value(pt.cp.structure.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                pt.cp.method.clone(),
            ]
        })
        .collect();
    write_csv(
        &out(PLOT_FILES[2]),
        &["policy", "regime", "base", "bonus", "spent", "structure", "method"],
        rows,
    )?;

    let rows = result
        .points
        .iter()
        .map(|pt| {
            vec![
                pt.label.clone(),
                fmt(pt.pp.utility_value),
                fmt(pt.pp_no_bonus.utility_value),
                fmt(pt.cp.utility_value),
                fmt(pt.cp_no_bonus.utility_value),
            ]
        })
        .collect();
    write_csv(
        &out(PLOT_FILES[3]),
        &["policy", "pp", "pp_no_bonus", "cp", "cp_no_bonus"],
        rows,
    )?;

    fs::write(out("result.json"), result.to_json()?)?;
    let mut files: Vec<&str> = PLOT_FILES.to_vec();
    files.push("result.json");
    let manifest = Manifest {
        generator: &result.generator,
        version: &result.version,
        seeds: &result.seeds,
        scenario: &result.scenario.name,
        solvers: &result.scenario.solvers,
        wall_time_secs: result.wall_time.as_secs_f64(),
        files,
    };
    fs::write(out("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> Scenario {
        let mut s = Scenario::reference(seed);
        s.population = PopulationSource::Generator(PopulationSpec::new(8, seed));
        s.sweep = vec![
            BonusPolicy::Threshold { m: 15, total: 25 },
            BonusPolicy::Threshold { m: 23, total: 25 },
            BonusPolicy::Linear { total: 25 },
        ];
        s.budget = 2.0;
        s
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let mut s = small(1);
        s.sweep.clear();
        assert!(matches!(run_scenario(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn missing_file_is_rejected() {
        let mut s = small(1);
        s.population = PopulationSource::File {
            path: "/nonexistent/abilities.csv".into(),
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn points_are_ordered_and_consistent() {
        let r = run_scenario(&small(3)).unwrap();
        assert_eq!(r.points.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        for p in &r.points {
            assert!(p.pp.utility_value + 1e-9 >= p.cp.utility_value);
            assert!(p.cp.utility_value + 1e-9 >= p.cp_no_bonus.utility_value);
        }
        let pp0 = r.points[0].pp.utility_value;
        assert!(r.points.iter().all(|p| (p.pp.utility_value - pp0).abs() < 1e-9));
    }

    #[test]
    fn config_round_trip() {
        let s = Scenario::reference(7);
        let text = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let cfg = r#"{"population": {"source": "generator", "n": 5, "seed": 2},
            "utility": {"kind": "typo", "M": 25, "m": 1},
            "sweep": [{"kind": "threshold", "m": 14, "M": 25}], "budget": 1.5}"#;
        let s: Scenario = serde_json::from_str(cfg).unwrap();
        assert_eq!(s.solvers, SolverConfig::default());
        s.validate().unwrap();
    }
}
