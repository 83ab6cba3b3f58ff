use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crowdprice_core::analysis::{build_pob_instance, build_pob_instance_relaxed, poa_audit, poa_constants, pob_ratio};
use crowdprice_core::cp::{cp_exact_oracle, cp_no_bonus, solve_cp, CpOptions, RegimeChoice, SearchMode};
use crowdprice_core::io::load_workers;
use crowdprice_core::pp::{solve_opp_no_bonus, solve_pp, BaseChoice, GkpInstance, PpMode};
use crowdprice_core::scenario::{emit_plot_data, run_scenario, Scenario};
use crowdprice_core::suite::{find_check, run_check, CHECKS};
use crowdprice_core::utility::{audit_declared, AuditConfig, UtilitySpec};
use crowdprice_core::{Error, UtilityFunction, WorkerProfile};

/// Default output directory for `simulate`.
const OUT_ENV: &str = "CROWDPRICE_OUT";

#[derive(Parser)]
#[command(
    name = "crowdprice",
    version,
    about = "Posted pricing with base and bonus payments under a budget"
)]
#[command(after_help = "Exit codes: 0 success, 1 audit failures, 2 bad input or config, \
                        3 instance too large for an exact method, 4 internal invariant breach.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Personalized pricing: one (base, bonus) offer per worker.
    Pp(PpArgs),
    /// Common pricing: a single (base, bonus) offer for everyone.
    Cp(CpArgs),
    /// Ratio of the best zero-bonus to the best common-pricing utility on the
    /// cherry-picker family.
    Pob(PobArgs),
    /// Price-of-agnosticity constants and bound audit.
    Poa(PoaArgs),
    /// Run a bonus-policy sweep and write plot data.
    Simulate(SimulateArgs),
    /// Run the built-in checks, or audit the declared properties of a utility.
    Audit(AuditArgs),
}

#[derive(Args)]
struct Instance {
    /// Worker file: CSV with header `id,quality,cost`, or a JSON array.
    #[arg(long, short)]
    workers: PathBuf,
    /// Budget B.
    #[arg(long, short)]
    budget: f64,
    /// `additive`, `binary_labeling`, `typo`, `typo:M`, `typo:M:m`, or JSON.
    #[arg(long, short, default_value = "additive")]
    utility: String,
}

impl Instance {
    fn load(&self) -> Result<(Vec<WorkerProfile>, UtilityFunction)> {
        let workers = load_workers(&self.workers).with_context(|| format!("reading {}", self.workers.display()))?;
        let utility = UtilitySpec::parse(&self.utility)?.build(None)?;
        Ok((workers, utility))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Greedy,
    Exact,
    Relaxed,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    Cost,
    Zero,
}

#[derive(Args)]
struct PpArgs {
    #[command(flatten)]
    inst: Instance,
    #[arg(long, value_enum, default_value = "greedy")]
    mode: ModeArg,
    /// Base payment for selected workers; the bonus covers the rest.
    #[arg(long, value_enum, default_value = "cost")]
    base: BaseArg,
    /// Restrict to zero bonus.
    #[arg(long)]
    no_bonus: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Auto,
    Unres,
    Subres,
    Res,
    /// Exhaustive arrangement search.
    Oracle,
}

#[derive(Args)]
struct CpArgs {
    #[command(flatten)]
    inst: Instance,
    #[arg(long, value_enum, default_value = "auto")]
    regime: RegimeArg,
    #[arg(long, value_enum, default_value = "linear")]
    search: SearchArg,
    /// Cross-check against the exhaustive oracle.
    #[arg(long)]
    oracle: bool,
    /// Restrict to zero bonus.
    #[arg(long)]
    no_bonus: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchArg {
    Linear,
    Binary,
}

#[derive(Args)]
struct PobArgs {
    /// Number of workers, at least 4.
    #[arg(long, short, default_value_t = 16)]
    n: usize,
    /// Cost unit.
    #[arg(long, short, default_value_t = 1.0)]
    c: f64,
    /// Cherry-picker quality, in [0, 1).
    #[arg(long, short, default_value_t = 0.1)]
    eps: f64,
    /// Accept n not divisible by 4.
    #[arg(long)]
    relaxed: bool,
}

#[derive(Args)]
struct PoaArgs {
    #[command(flatten)]
    inst: Instance,
    /// Only compute the constants, skip the exact solvers.
    #[arg(long)]
    constants_only: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON. Without it, runs the 15-worker reference sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator seed for the reference sweep.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory. Falls back to the config, then $CROWDPRICE_OUT.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Check name or number; repeatable. Default: all.
    #[arg(long = "check")]
    checks: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Audit this utility's declared properties instead of running checks.
    #[arg(long)]
    utility: Option<String>,
    /// Probes per property for `--utility`.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// List the checks and exit.
    #[arg(long)]
    list: bool,
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(v)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run_pp(a: &PpArgs) -> Result<bool> {
    let (workers, utility) = a.inst.load()?;
    let inst = GkpInstance::new(workers, a.inst.budget, utility)?;
    let mode = match a.mode {
        ModeArg::Greedy => PpMode::Greedy,
        ModeArg::Exact => PpMode::Exact,
        ModeArg::Relaxed => PpMode::Relaxed,
    };
    if a.no_bonus {
        let sel = solve_opp_no_bonus(&inst, mode)?;
        let ids: Vec<u64> = sel.selected().iter().map(|&i| inst.workers[i].id).collect();
        print_json(&json!({ "selection": sel, "accepted_ids": ids }))?;
    } else {
        let base = match a.base {
            BaseArg::Cost => BaseChoice::Cost,
            BaseArg::Zero => BaseChoice::Zero,
        };
        print_json(&solve_pp(&inst, mode, &base)?)?;
    }
    Ok(true)
}

fn run_cp(a: &CpArgs) -> Result<bool> {
    let (workers, utility) = a.inst.load()?;
    let budget = a.inst.budget;
    if a.no_bonus {
        print_json(&cp_no_bonus(&workers, budget, &utility)?)?;
        return Ok(true);
    }
    let regime = match a.regime {
        RegimeArg::Oracle => {
            print_json(&cp_exact_oracle(&workers, budget, &utility)?)?;
            return Ok(true);
        }
        RegimeArg::Auto => RegimeChoice::Auto,
        RegimeArg::Unres => RegimeChoice::Unres,
        RegimeArg::Subres => RegimeChoice::Subres,
        RegimeArg::Res => RegimeChoice::Res,
    };
    let opts = CpOptions {
        regime,
        search: match a.search {
            SearchArg::Linear => SearchMode::Linear,
            SearchArg::Binary => SearchMode::Binary,
        },
        oracle_check: a.oracle,
    };
    let (regime, report) = solve_cp(&workers, budget, &utility, &opts)?;
    print_json(&json!({ "regime": regime.to_string(), "report": report }))?;
    Ok(true)
}

fn run_pob(a: &PobArgs) -> Result<bool> {
    let inst = if a.relaxed {
        build_pob_instance_relaxed(a.n, a.c, a.eps)?
    } else {
        build_pob_instance(a.n, a.c, a.eps)?
    };
    let rep = pob_ratio(&inst, None)?;
    print_json(&json!({
        "n": inst.n,
        "budget": inst.budget,
        "epsilon": inst.epsilon,
        "ratio": rep.ratio,
        "bound_holds": rep.bound_holds,
        "no_bonus": rep.no_bonus,
        "with_bonus": rep.with_bonus,
    }))?;
    Ok(true)
}

fn run_poa(a: &PoaArgs) -> Result<bool> {
    let (workers, utility) = a.inst.load()?;
    if a.constants_only {
        print_json(&poa_constants(&workers, a.inst.budget)?)?;
    } else {
        print_json(&poa_audit(&workers, a.inst.budget, &utility)?)?;
    }
    Ok(true)
}

fn output_dir(cli: Option<&Path>, config: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("crowdprice-out"))
}

fn run_simulate(a: &SimulateArgs) -> Result<bool> {
    let scenario = match &a.config {
        Some(p) => Scenario::from_json_file(p).with_context(|| format!("loading {}", p.display()))?,
        None => Scenario::reference(a.seed),
    };
    let result = run_scenario(&scenario)?;
    let dir = output_dir(a.out.as_deref(), scenario.output_dir.as_deref());
    let files = emit_plot_data(&result, &dir).with_context(|| format!("writing to {}", dir.display()))?;
    println!(
        "{:<8} {:<22} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "policy", "regime", "pp", "cp", "cp_nobonus", "base", "bonus"
    );
    for p in &result.points {
        println!(
            "{:<8} {:<22} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            p.label,
            p.regime.to_string(),
            p.pp.utility_value,
            p.cp.utility_value,
            p.cp_no_bonus.utility_value,
            p.cp.policy.base,
            p.cp.policy.bonus
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(true)
}

fn run_audit(a: &AuditArgs) -> Result<bool> {
    if a.list {
        for (i, (name, _)) in CHECKS.iter().enumerate() {
            println!("{:>2} {name}", i + 1);
        }
        return Ok(true);
    }
    if let Some(spec) = &a.utility {
        let u = UtilitySpec::parse(spec)?.build(None)?;
        let cfg = AuditConfig {
            trials: a.trials,
            seed: a.seed,
            ..AuditConfig::default()
        };
        let reports = audit_declared(u.as_ref(), &cfg)?;
        for r in &reports {
            println!(
                "[{}] {} {}: {} violations in {} trials",
                if r.passed() { "PASS" } else { "FAIL" },
                r.utility,
                r.property,
                r.violations,
                r.trials
            );
        }
        return Ok(reports.iter().all(|r| r.passed()));
    }
    let ids: Vec<usize> = if a.checks.is_empty() {
        (1..=CHECKS.len()).collect()
    } else {
        a.checks
            .iter()
            .map(|k| find_check(k).with_context(|| format!("unknown check {k:?}; see --list")))
            .collect::<Result<_>>()?
    };
    let mut all = true;
    for id in ids {
        let Some(out) = run_check(id, a.seed) else {
            bail!("unknown check {id}");
        };
        println!("{}", out.line());
        all &= out.passed;
    }
    Ok(all)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Size { .. }) => 3,
        Some(Error::InvariantBreach(_)) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Pp(a) => run_pp(a),
        Command::Cp(a) => run_cp(a),
        Command::Pob(a) => run_pob(a),
        Command::Poa(a) => run_poa(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Audit(a) => run_audit(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
