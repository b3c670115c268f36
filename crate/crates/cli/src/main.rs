//! `renewlab`: runs the numerical checks and writes a run directory per command.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use renewlab::report::Report;

use crate::commands::Enabled;
use crate::config::RunConfig;
use crate::output::{RunDir, Summary};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Missing { path: PathBuf, producer: &'static str },
    Io(String),
    Compute(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Missing { .. } => 3,
            Failure::Io(_) | Failure::Compute(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Missing { path, producer } => {
                write!(f, "missing artifact {}: produce it with `renewlab {producer}`", path.display())
            }
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<renewlab::Error> for Failure {
    fn from(e: renewlab::Error) -> Self {
        match e {
            renewlab::Error::InvalidParameter { .. } => Failure::Config(e.to_string()),
            renewlab::Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Compute(other.to_string()),
        }
    }
}

const AFTER_HELP: &str = "\
Exit codes: 0 all checks pass, 1 a check failed, 2 config error, 3 missing artifact.

Each run writes <out>/config.resolved.json and <out>/summary.json plus CSV tables:
  kernel-check         kernel_rows.csv        i,x,row_mass,stationary_density
  mrp                  mass_cells.csv         lo,hi,scaled,std_error,limit,rel_dev
                       laplace_cells.csv      lo,hi,scaled,std_error,limit,rel_dev
  regen                dt_cdf.csv             t,y,empirical,limit
  walk                 defect.csv             x,strip_mass,tail_mass,defect,survival_n_max
                       thm_pr.csv             n,e
                       kernel_mc.csv          n,lo,hi,mc,se,quadrature
                       ladder.csv             r,asc,asc_se,desc,desc_se,quadrature
                       duality.csv            m,lo,hi,stay_below,ladder_mass,z
                       renewal_function.csv   x,u,u_se,v,v_se
  wetting-betac        eigenfunctions.csv     x,v,w
                       tilt.csv               offset,beta,free_energy,expected_mass,max_deviation
  wetting-free-energy  free_energy.csv        beta,free_energy
  wetting-critical     estz.csv               n,x,ratio,constant
                       contacts.csv           n,mean,se

`walk` also writes tensor.bin. The wetting commands read wetting.tensor, or
<out>/../walk/tensor.bin when it is unset. The default <out> is runs/<command>,
and `report` reads runs/ by default.";

#[derive(Parser)]
#[command(name = "renewlab", version, about = "Markov renewal, regenerative set and wetting checks", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory (or, for `report`, the directory holding prior runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated check groups to run (default: all).
    #[arg(long, value_delimiter = ',')]
    check: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel invariants, stationary law and interarrival Laplace asymptotics.
    /// Groups: invariants, stationary, lem2.
    KernelCheck(Common),
    /// Renewal mass function and its Laplace transform against their limits.
    /// Groups: mp2, laplace, equifi, domm.
    Mrp(Common),
    /// Rescaled contact sets against the regenerative-set limit.
    /// Groups: fidi, closed-form, dcg.
    Regen(Common),
    /// Builds the killed-walk kernel tensor and its fluctuation checks.
    /// Groups: balance, thm-pr, kernel-mc, ladder, duality, doney.
    Walk(Common),
    /// Critical pinning strength, grid refinement and tilted row masses.
    /// Groups: betac, refinement, invmp.
    WettingBetac(Common),
    /// Free energy profile around the critical point. Groups: shape.
    WettingFreeEnergy(Common),
    /// Critical partition function and contact-set law.
    /// Groups: estz, main2, clo-oracle, scaling.
    WettingCritical(Common),
    /// Aggregates summary.json files under --out into report.json.
    Report(Common),
}

const GROUPS: &[(&str, &[&str])] = &[
    ("kernel-check", &["invariants", "stationary", "lem2"]),
    ("mrp", &["mp2", "laplace", "equifi", "domm"]),
    ("regen", &["fidi", "closed-form", "dcg"]),
    ("walk", &["balance", "thm-pr", "kernel-mc", "ladder", "duality", "doney"]),
    ("wetting-betac", &["betac", "refinement", "invmp"]),
    ("wetting-free-energy", &["shape"]),
    ("wetting-critical", &["estz", "main2", "clo-oracle", "scaling"]),
    ("report", &[]),
];

/// Acceptance criteria as (id, command, check-name prefixes).
const CRITERIA: &[(u32, &str, &[&str])] = &[
    (1, "mrp", &["mp2."]),
    (2, "mrp", &["laplace."]),
    (3, "kernel-check", &["lem2."]),
    (4, "mrp", &["domm."]),
    (5, "regen", &["fidi.KS distance", "closed-form."]),
    (6, "walk", &["thm-pr.", "kernel-mc."]),
    (7, "wetting-betac", &["betac.", "refinement."]),
    (8, "wetting-betac", &["invmp."]),
    (9, "wetting-critical", &["estz."]),
    (10, "wetting-critical", &["main2", "clo-oracle."]),
    (11, "regen", &["dcg."]),
    (12, "wetting-free-energy", &["free-energy."]),
];

fn criteria_status(found: &[(PathBuf, Summary)]) -> serde_json::Value {
    let mut out = Vec::new();
    for &(id, command, prefixes) in CRITERIA {
        let checks: Vec<_> = found
            .iter()
            .filter(|(_, s)| s.command == command)
            .flat_map(|(_, s)| s.checks.iter())
            .filter(|c| prefixes.iter().any(|p| c.name.starts_with(p)))
            .collect();
        let status = if checks.is_empty() {
            "missing"
        } else if checks.iter().all(|c| c.pass) {
            "pass"
        } else {
            "fail"
        };
        out.push(serde_json::json!({ "criterion": id, "command": command, "status": status }));
    }
    serde_json::Value::Array(out)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else { return Ok(RunConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn aggregate(dir: &Path) -> Result<(Report, serde_json::Map<String, serde_json::Value>), Failure> {
    let mut found = Vec::new();
    let mut candidates = vec![dir.join("summary.json")];
    if let Ok(rd) = fs::read_dir(dir) {
        let mut subs: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path().join("summary.json"))).collect();
        subs.sort();
        candidates.extend(subs);
    }
    for p in candidates.into_iter().filter(|p| p.is_file()) {
        let text = fs::read_to_string(&p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        let s: Summary = serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
        found.push((p, s));
    }
    if found.is_empty() {
        return Err(Failure::Missing { path: dir.join("*/summary.json"), producer: "walk (or any other command)" });
    }
    let mut rep = Report::default();
    let mut runs = Vec::new();
    for (p, s) in &found {
        for c in &s.checks {
            let mut c = c.clone();
            c.name = format!("{}: {}", s.command, c.name);
            rep.push(c);
        }
        runs.push(serde_json::json!({
            "summary": p.display().to_string(),
            "command": s.command,
            "pass": s.pass,
            "seed": s.seed,
            "config_sha256": s.config_sha256,
            "values": s.values,
        }));
    }
    let mut vals = serde_json::Map::new();
    vals.insert("runs".into(), serde_json::Value::Array(runs));
    vals.insert("criteria".into(), criteria_status(&found));
    Ok((rep, vals))
}

fn run(name: &str, common: Common) -> Result<bool, Failure> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let allowed = GROUPS.iter().find(|g| g.0 == name).map(|g| g.1).unwrap_or(&[]);
    if let Some(bad) = common.check.iter().find(|c| !allowed.contains(&c.as_str())) {
        return Err(Failure::Config(format!("unknown check group `{bad}` for {name}; expected one of {allowed:?}")));
    }
    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| {
        if name == "report" { PathBuf::from("runs") } else { PathBuf::from("runs").join(name) }
    });
    if common.workers == Some(0) {
        return Err(Failure::Config("--workers must be at least 1".into()));
    }
    let on = Enabled(common.check.clone());
    let report = if name == "report" {
        let (rep, vals) = aggregate(&out)?;
        let json = serde_json::json!({
            "pass": rep.all_pass(),
            "criteria": vals["criteria"],
            "checks": rep.checks,
            "runs": vals["runs"],
        });
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&json).expect("serializes"))
            .map_err(|e| Failure::Io(e.to_string()))?;
        rep
    } else {
        let dir = RunDir::create(&out, &cfg)?;
        let result = renewlab::par::with_workers(common.workers, || match name {
            "kernel-check" => commands::kernel_check(&cfg, &dir, &on),
            "mrp" => commands::mrp(&cfg, &dir, &on),
            "regen" => commands::regen(&cfg, &dir, &on),
            "walk" => commands::walk(&cfg, &dir, &on),
            "wetting-betac" => commands::wetting_betac(&cfg, &dir, &on),
            "wetting-free-energy" => commands::wetting_free_energy(&cfg, &dir, &on),
            "wetting-critical" => commands::wetting_critical(&cfg, &dir, &on),
            _ => unreachable!("every subcommand is dispatched"),
        })?;
        dir.summary(name, &result.0, result.1)?;
        result.0
    };
    for c in &report.checks {
        println!("{}", c.line());
    }
    println!("{name}: {}", if report.all_pass() { "PASS" } else { "FAIL" });
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match cli.command {
        Command::KernelCheck(c) => ("kernel-check", c),
        Command::Mrp(c) => ("mrp", c),
        Command::Regen(c) => ("regen", c),
        Command::Walk(c) => ("walk", c),
        Command::WettingBetac(c) => ("wetting-betac", c),
        Command::WettingFreeEnergy(c) => ("wetting-free-energy", c),
        Command::WettingCritical(c) => ("wetting-critical", c),
        Command::Report(c) => ("report", c),
    };
    match run(name, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("renewlab {name}: {e}");
            ExitCode::from(e.code())
        }
    }
}
