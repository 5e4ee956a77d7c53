//! `nlmot`: JSON-in, JSON-out front end of the solver.
//!
//! Exit codes: 0 success, 2 validation failure, 3 cap exceeded, 4 numerical failure.

mod instance;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlmot::curtain::{build_curtain, enumerate_curtains, CurtainCertificate};
use nlmot::measure::{convex_order_violation, dyadic_cuts};
use nlmot::oracle::{direct_concave_max, CouplingPolytope};
use nlmot::solver::{
    approx_solve, evaluate_j, objective, solve_finite, solve_two_point, upper_bound, SolveOptions,
};
use nlmot::superrep::{build_portfolio, verify_superrep, Grid};
use nlmot::{Coupling, ErrorClass, Sense};
use serde::Serialize;
use serde_json::{json, Value};

use instance::Instance;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] nlmot::Error),
    #[error("invalid instance: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Cap => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::Json(_) | CliError::Io(..) | CliError::Usage(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlmot", version, about = "Non-linear martingale transport via curtain couplings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Instance file: {"mu1", "mu2", "gain", "options"}.
    #[arg(long, global = true)]
    instance: Option<PathBuf>,
    /// Largest first-marginal support enumerated.
    #[arg(long, global = true)]
    enum_cap: Option<usize>,
    /// Frank–Wolfe gap tolerance (relative).
    #[arg(long, global = true)]
    fw_tol: Option<f64>,
    /// Frank–Wolfe iteration limit.
    #[arg(long, global = true)]
    fw_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    DirectConcave,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the instance and test convex order.
    Check,
    /// Build one curtain coupling.
    Curtain {
        /// Enumeration order of the first-marginal atoms, 0-based, comma separated.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
    /// List all distinct curtain couplings.
    Enumerate,
    /// Optimize over all martingale couplings.
    Solve {
        #[arg(long, default_value = "max")]
        sense: Sense,
    },
    /// The canonical upper bound and the point x0.
    Bound,
    /// Closed-form solution for a two-atom first marginal.
    TwoPoint {
        /// Write (t, x1, x2, G) along the segment from the right to the left curtain.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Discretize a diffuse first marginal at dyadic depths and solve each level.
    Approx {
        /// Dyadic depths, comma separated; cell counts are 2^depth.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
        /// Write (level, n, value) rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build and verify the static superreplicating portfolio.
    Superrep {
        /// `n` or `s_lo,s_hi,v_lo,v_hi,n`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Independent brute-force optimizer on discrete marginals.
    Oracle {
        #[arg(value_enum, default_value = "direct-concave")]
        kind: OracleKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = nlmot::oracle::concave::DEFAULT_RESTARTS)]
        restarts: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("values serialize"));
            ExitCode::SUCCESS
        }
        Err(Failure { error, output }) => {
            if let Some(out) = output {
                println!("{}", serde_json::to_string_pretty(&out).expect("values serialize"));
            }
            eprintln!("nlmot: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}

/// An error plus an optional JSON verdict still worth printing.
struct Failure {
    error: CliError,
    output: Option<Value>,
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            error: e.into(),
            output: None,
        }
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("values serialize")
}

fn options(cli: &Common, inst: &Instance) -> SolveOptions {
    let mut o = inst.options.solve;
    if let Some(c) = cli.enum_cap {
        o.enum_cap = c;
    }
    if let Some(t) = cli.fw_tol {
        o.fw_tol = t;
    }
    if let Some(i) = cli.fw_max_iter {
        o.fw_max_iter = i;
    }
    o
}

#[derive(Serialize)]
struct CouplingReport<'a> {
    order: &'a [usize],
    x: Vec<f64>,
    value: f64,
    coupling: &'a Coupling,
}

fn coupling_report<'a>(order: &'a [usize], c: &'a Coupling, inst: &Instance) -> Result<CouplingReport<'a>, CliError> {
    Ok(CouplingReport {
        order,
        x: c.row_integrals(inst.gain.gamma())?,
        value: evaluate_j(c, &inst.gain)?,
        coupling: c,
    })
}

fn run(cli: &Cli) -> Result<Value, Failure> {
    let path = cli
        .common
        .instance
        .as_ref()
        .ok_or_else(|| CliError::Usage("--instance is required".into()))?;
    let inst = Instance::load(path)?;
    let opts = options(&cli.common, &inst);
    let spec = &inst.gain;

    match &cli.command {
        Command::Check => {
            let mu1 = inst.mu1.measure();
            match convex_order_violation(&mu1, &inst.mu2)? {
                None => Ok(json!({
                    "convex_order": true,
                    "mean": mu1.mean(),
                    "first_is_discrete": mu1.is_discrete(),
                })),
                Some(reason) => Err(Failure {
                    output: Some(json!({ "convex_order": false, "reason": reason })),
                    error: nlmot::Error::NotConvexOrder(reason).into(),
                }),
            }
        }
        Command::Curtain { order } => {
            let mu1 = inst.mu1.discrete()?;
            let order = order.clone().unwrap_or_else(|| (0..mu1.len()).collect());
            let (c, CurtainCertificate { windows, .. }) = build_curtain(&mu1, &inst.mu2, &order)?;
            let mut out = to_value(&coupling_report(&order, &c, &inst)?);
            out["windows"] = to_value(&windows);
            Ok(out)
        }
        Command::Enumerate => {
            let mu1 = inst.mu1.discrete()?;
            let all = enumerate_curtains(&mu1, &inst.mu2, opts.enum_cap)?;
            let list = all
                .iter()
                .map(|(c, order)| coupling_report(order, c, &inst))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(json!({ "count": list.len(), "couplings": list }))
        }
        Command::Solve { sense } => {
            let mu1 = inst.mu1.discrete()?;
            Ok(to_value(&solve_finite(&mu1, &inst.mu2, spec, *sense, &opts)?))
        }
        Command::Bound => Ok(to_value(&upper_bound(&inst.mu1.measure(), &inst.mu2, spec)?)),
        Command::TwoPoint { csv } => {
            let mu1 = inst.mu1.discrete()?;
            let r = solve_two_point(&mu1, &inst.mu2, spec)?;
            if let Some(path) = csv {
                write_segment_csv(path, &mu1, &inst)?;
            }
            Ok(to_value(&r))
        }
        Command::Approx { levels, csv } => {
            let mu1 = inst.mu1.measure();
            let depths = levels
                .clone()
                .or_else(|| inst.options.levels.clone())
                .unwrap_or_else(|| vec![1, 2, 3]);
            let cuts: Vec<Vec<f64>> = depths.iter().map(|&d| dyadic_cuts(&mu1, d)).collect();
            let report = approx_solve(&mu1, &inst.mu2, spec, &cuts, &opts)?;
            if let Some(path) = csv {
                let mut s = String::from("level,depth,n,value\n");
                for (l, d) in report.levels.iter().zip(&depths) {
                    writeln!(s, "{},{},{},{}", l.level, d, l.n, l.value).expect("string write");
                }
                std::fs::write(path, s).map_err(|e| CliError::Io(path.display().to_string(), e))?;
            }
            let mut out = to_value(&report);
            out["depths"] = to_value(&depths);
            Ok(out)
        }
        Command::Superrep { grid } => {
            let mu1 = inst.mu1.measure();
            let portfolio = build_portfolio(&mu1, &inst.mu2, spec)?;
            let v_star = portfolio.price(&mu1, &inst.mu2, spec)?;
            let grid = parse_grid(grid.as_deref(), &mu1, &inst, v_star)?;
            let worst = verify_superrep(&portfolio, spec, &grid);
            Ok(json!({
                "portfolio": portfolio,
                "price": v_star,
                "worst_slack": worst,
                "superreplicates": worst >= -1e-12,
                "grid_points": grid.s1.len() * grid.s2.len() * grid.v.len(),
            }))
        }
        Command::Oracle { kind: OracleKind::DirectConcave, seed, restarts } => {
            let mu1 = inst.mu1.discrete()?;
            let poly = CouplingPolytope::from_measures(&mu1, &inst.mu2)?;
            let best = direct_concave_max(&poly, spec, *restarts, *seed)?;
            let coupling = poly.to_coupling(&best.plan)?;
            Ok(json!({
                "value": best.value,
                "restart": best.restart,
                "upper": best.upper,
                "plan": best.plan,
                "coupling": coupling,
            }))
        }
    }
}

fn write_segment_csv(path: &std::path::Path, mu1: &nlmot::DiscreteMarginal, inst: &Instance) -> Result<(), CliError> {
    const STEPS: usize = 200;
    let gamma = inst.gain.gamma();
    let (lower, _) = build_curtain(mu1, &inst.mu2, &[0, 1])?;
    let (upper, _) = build_curtain(mu1, &inst.mu2, &[1, 0])?;
    let (xl, xh) = (lower.row_integrals(gamma)?, upper.row_integrals(gamma)?);
    let g: Vec<f64> = mu1.atoms().iter().map(|&a| gamma.eval(a)).collect();
    let mut s = String::from("t,x1,x2,G\n");
    for k in 0..=STEPS {
        let t = k as f64 / STEPS as f64;
        let x: Vec<f64> = xl.iter().zip(&xh).map(|(l, h)| t * l + (1.0 - t) * h).collect();
        let v = objective(&x, mu1.weights(), &g, &inst.gain);
        writeln!(s, "{t},{},{},{v}", x[0], x[1]).expect("string write");
    }
    std::fs::write(path, s).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn parse_grid(spec: Option<&str>, mu1: &nlmot::PieceMeasure, inst: &Instance, v_star: f64) -> Result<Grid, CliError> {
    const DEFAULT_N: usize = 50;
    let bad = || CliError::Usage("--grid expects `n` or `s_lo,s_hi,v_lo,v_hi,n`".into());
    let fields: Vec<&str> = spec.map(|s| s.split(',').map(str::trim).collect()).unwrap_or_default();
    let hull = |m: &nlmot::PieceMeasure| m.support_hull().unwrap_or((0.0, 0.0));
    let (h1, h2) = (hull(mu1), hull(&inst.mu2));
    let s_default = (h1.0.min(h2.0), h1.1.max(h2.1));
    let v0 = inst.gain.phi().at_zero();
    let v_default = (v0, v0 + 3.0 * (v_star - v0).max(1.0));
    match fields.as_slice() {
        [] => Ok(Grid::lattice(s_default, v_default, DEFAULT_N)),
        [n] => Ok(Grid::lattice(s_default, v_default, n.parse().map_err(|_| bad())?)),
        [a, b, c, d, n] => {
            let f = |x: &str| x.parse::<f64>().map_err(|_| bad());
            Ok(Grid::lattice((f(a)?, f(b)?), (f(c)?, f(d)?), n.parse().map_err(|_| bad())?))
        }
        _ => Err(bad()),
    }
}
