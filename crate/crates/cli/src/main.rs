//! `jointsurv`: single-firm and joint survival probabilities from the command
//! line. Human-readable tables go to stdout; `--json PATH` writes a report.
//!
//! Exit status is 0 on success, 2 for bad input and 3 when a numerical
//! routine fails to converge.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jointsurv::copula::{
    copula_first_order, copula_joint, copula_joint_equicorrelated, thresholds_from_survival, CopulaMcConfig,
    CopulaThresholds,
};
use jointsurv::io::{read_correlation, read_firms};
use jointsurv::mc_oracle::{simulate_joint_survival, SimConfig};
use jointsurv::survival_core::survival_prob;
use jointsurv::{validate_correlation, CorrelationSpec, Error, FirmParams64, PairKernels, QuadratureConfig64};
use serde::Serialize;
use serde_json::json;

use report::*;

#[derive(Parser)]
#[command(name = "jointsurv", version, about = "Joint survival probabilities in a first-passage credit model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival and default probability of each firm.
    Survival {
        #[command(flatten)]
        firms: FirmArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Joint survival probability of all firms in the file.
    Joint(JointArgs),
    /// Pair kernels and copula thresholds for six reference firms.
    Table2 {
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Gaussian-copula joint survival of `n` identical firms over a grid of
    /// common correlations.
    Sweep {
        #[arg(long, allow_hyphen_values = true)]
        chi: f64,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
        xi_grid: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FirmArgs {
    /// Firm CSV in either the parameter or the market-data layout.
    #[arg(long)]
    firms: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    horizon: f64,
    /// Risk-free rate, needed when a firm mixes `r` with an explicit rate.
    #[arg(long)]
    risk_free: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Perturbation,
    Copula,
    Mc,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("correlation").required(true).args(["xi", "corr_file"]))]
struct JointArgs {
    #[command(flatten)]
    firms: FirmArgs,
    /// Common asset correlation.
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<f64>,
    /// Correlation matrix CSV with a ticker header.
    #[arg(long)]
    corr_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "perturbation")]
    method: MethodArg,
    /// Seed for the sampling methods.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1_000_000)]
    paths: usize,
    #[arg(long, default_value_t = 252)]
    steps_per_year: usize,
    #[arg(long, default_value_t = 10_000)]
    block_size: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

type CliResult<T> = Result<T, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Survival { firms, json } => survival(&firms, json.as_deref()),
        Command::Joint(args) => joint(&args),
        Command::Table2 { horizon, json } => table2(horizon, json.as_deref()),
        Command::Sweep { chi, n, xi_grid, json } => sweep(chi, n, &xi_grid, json.as_deref()),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn write_json<B: Serialize>(path: Option<&Path>, report: &Report<B>) -> CliResult<()> {
    let Some(path) = path else { return Ok(()) };
    let io_err = |reason: String| Error::Io {
        path: path.display().to_string(),
        reason,
    };
    let text = serde_json::to_string_pretty(report).map_err(|e| io_err(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(e.to_string()))
}

fn load_firms(args: &FirmArgs) -> CliResult<Vec<FirmParams64>> {
    if !(args.horizon > 0.0 && args.horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {}", args.horizon)));
    }
    let firms = read_firms(&args.firms, args.risk_free)?;
    if firms.is_empty() {
        return Err(Error::Config(format!("{}: no firms listed", args.firms.display())));
    }
    Ok(firms)
}

fn firm_inputs(args: &FirmArgs, firms: &[FirmParams64]) -> serde_json::Value {
    json!({
        "firms_file": args.firms,
        "tickers": firms.iter().map(|f| f.ticker()).collect::<Vec<_>>(),
        "horizon_years": args.horizon,
        "risk_free": args.risk_free,
    })
}

fn survival(args: &FirmArgs, json_path: Option<&Path>) -> CliResult<()> {
    let firms = load_firms(args)?;
    let mut rows = Vec::with_capacity(firms.len());
    println!("{:<8} {:>8} {:>7} {:>7} {:>10} {:>10}", "ticker", "d/V0", "sigma", "q", "P(t)", "1-P(t)");
    for f in &firms {
        let p = survival_prob(f, args.horizon)?;
        println!(
            "{:<8} {:>8.4} {:>7.4} {:>7.4} {:>10.6} {:>10.6}",
            f.ticker(),
            f.d_over_v0(),
            f.sigma(),
            f.q(),
            p,
            1.0 - p
        );
        rows.push(FirmRow {
            ticker: f.ticker().to_string(),
            d_over_v0: f.d_over_v0(),
            sigma: f.sigma(),
            q: f.q(),
            eta: f.eta(),
            survival: p,
            default_prob: 1.0 - p,
        });
    }
    let report = Report {
        version: VERSION,
        command: "survival",
        inputs: firm_inputs(args, &firms),
        body: SurvivalBody {
            horizon_years: args.horizon,
            firms: rows,
        },
        warnings: Vec::new(),
    };
    write_json(json_path, &report)
}

fn pair_names(firms: &[FirmParams64], i: usize, j: usize) -> [String; 2] {
    [firms[i].ticker().to_string(), firms[j].ticker().to_string()]
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

fn joint(args: &JointArgs) -> CliResult<()> {
    let firms = load_firms(&args.firms)?;
    let n = firms.len();
    let t = args.firms.horizon;
    let spec = match (args.xi, &args.corr_file) {
        (Some(xi), _) => CorrelationSpec::Equicorrelated(xi),
        (None, Some(path)) => {
            let tickers: Vec<&str> = firms.iter().map(|f| f.ticker()).collect();
            CorrelationSpec::Matrix(read_correlation(path, &tickers)?)
        }
        (None, None) => unreachable!("clap requires one correlation source"),
    };
    let corr = validate_correlation(&spec, n)?;
    let cfg = QuadratureConfig64::default();
    let mut warnings = Vec::new();
    let singles = firms.iter().map(|f| survival_prob(f, t)).collect::<Result<Vec<_>, _>>()?;
    let p0: f64 = singles.iter().product();

    let mut inputs = firm_inputs(&args.firms, &firms);
    inputs["xi"] = json!(args.xi);
    inputs["corr_file"] = json!(args.corr_file);
    inputs["quadrature"] = json!(cfg);

    let body = match args.method {
        MethodArg::Perturbation => {
            let k = PairKernels::compute(&firms, t, &cfg)?;
            let all: Vec<usize> = (0..n).collect();
            let r = k.joint_for_subset(&all, &spec);
            if r.out_of_range {
                warnings.push(format!("first-order joint {} lies outside [0, 1]; the expansion has broken down", r.joint));
            }
            let default_correlations = pairs(n)
                .map(|(i, j)| PairValue {
                    pair: pair_names(&firms, i, j),
                    value: k.default_correlation(i, j, &spec, (i, j)),
                    stderr: None,
                })
                .collect();
            JointBody {
                method: "perturbation",
                horizon_years: t,
                p0: r.p0,
                p1_over_p0: r.p1_over_p0,
                joint: r.joint,
                duration: (n > 1).then(|| k.duration()),
                default_correlations,
                stderr: None,
            }
        }
        MethodArg::Copula => {
            let mc = CopulaMcConfig {
                seed: args.seed.unwrap_or(CopulaMcConfig::default().seed),
                ..Default::default()
            };
            inputs["copula_sampling"] = json!(mc);
            let th = thresholds_from_survival(&singles)?;
            let est = copula_joint(&th, &spec, &cfg, &mc)?;
            let mut default_correlations = Vec::new();
            for (i, j) in pairs(n) {
                let two = CopulaThresholds::from_chi(&[th.chi()[i], th.chi()[j]])?;
                let rho = spec.pair(i, j, 0.0);
                let pij = copula_joint(&two, &CorrelationSpec::Equicorrelated(rho), &cfg, &mc)?;
                let (pi, pj) = (singles[i], singles[j]);
                let scale = (pi * (1.0 - pi) * pj * (1.0 - pj)).sqrt();
                default_correlations.push(PairValue {
                    pair: pair_names(&firms, i, j),
                    value: (pij.value - pi * pj) / scale,
                    stderr: (pij.stderr > 0.0).then(|| pij.stderr / scale),
                });
            }
            JointBody {
                method: "copula",
                horizon_years: t,
                p0,
                p1_over_p0: copula_first_order(&th, &spec)?,
                joint: est.value,
                duration: (n > 1)
                    .then(|| copula_first_order(&th, &CorrelationSpec::Equicorrelated(1.0)))
                    .transpose()?,
                default_correlations,
                stderr: (est.stderr > 0.0).then_some(est.stderr),
            }
        }
        MethodArg::Mc => {
            let sim = SimConfig {
                paths: args.paths,
                steps_per_year: args.steps_per_year,
                block_size: args.block_size,
                seed: args.seed.unwrap_or(SimConfig::default().seed),
                ..Default::default()
            };
            inputs["simulation"] = json!(sim);
            let r = simulate_joint_survival(&firms, &corr, t, &sim)?;
            for (i, (&m, &se)) in r.marginals.iter().zip(&r.marginal_stderrs).enumerate() {
                if (m - singles[i]).abs() > 4.0 * se.max(1e-12) {
                    warnings.push(format!(
                        "{}: simulated marginal {m:.6} differs from closed form {:.6} by more than 4 stderr",
                        firms[i].ticker(),
                        singles[i]
                    ));
                }
            }
            let default_correlations = r
                .default_correlations
                .iter()
                .map(|d| PairValue {
                    pair: pair_names(&firms, d.pair.0, d.pair.1),
                    value: d.value,
                    stderr: Some(d.stderr),
                })
                .collect();
            JointBody {
                method: "mc",
                horizon_years: t,
                p0,
                p1_over_p0: r.joint / p0 - 1.0,
                joint: r.joint,
                duration: None,
                default_correlations,
                stderr: Some(r.joint_stderr),
            }
        }
    };

    println!("method        {}", body.method);
    println!("horizon       {t}");
    println!("P0            {:.6}", body.p0);
    println!("P1/P0         {:.6}", body.p1_over_p0);
    match body.stderr {
        Some(se) => println!("joint         {:.6} +- {se:.6}", body.joint),
        None => println!("joint         {:.6}", body.joint),
    }
    println!("1 - joint     {:.6}", 1.0 - body.joint);
    if let Some(d) = body.duration {
        println!("duration      {d:.6}");
    }
    for d in &body.default_correlations {
        match d.stderr {
            Some(se) => println!("dcorr {}-{}  {:.6} +- {se:.6}", d.pair[0], d.pair[1], d.value),
            None => println!("dcorr {}-{}  {:.6}", d.pair[0], d.pair[1], d.value),
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = Report {
        version: VERSION,
        command: "joint",
        inputs,
        body,
        warnings,
    };
    write_json(args.json.as_deref(), &report)
}

/// `(sigma, d/V0, P, chi, A_fp/sigma^2, A_c/sigma^2)` at five years.
const TABLE2: [(f64, f64, f64, f64, f64, f64); 6] = [
    (0.30, 0.20, 0.965, -1.81, 0.0697, 0.0717),
    (0.30, 0.30, 0.872, -1.14, 0.611, 0.636),
    (0.30, 0.40, 0.738, -0.636, 2.06, 2.17),
    (0.35, 0.20, 0.916, -1.38, 0.223, 0.231),
    (0.35, 0.30, 0.785, -0.789, 1.08, 1.13),
    (0.35, 0.40, 0.634, -0.343, 2.71, 2.87),
];

fn table2(horizon: f64, json_path: Option<&Path>) -> CliResult<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    let cfg = QuadratureConfig64::default();
    let compare = horizon == 5.0;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    println!(
        "{:>5} {:>5} {:>9} {:>9} {:>10} {:>10}",
        "sigma", "d/V0", "P", "chi", "A_fp/s2", "A_C/s2"
    );
    for (sigma, d, p_ref, chi_ref, fp_ref, c_ref) in TABLE2 {
        let f = FirmParams64::risk_neutral(format!("s{sigma}-d{d}"), d, sigma, 0.0)?;
        let pair = [f.clone(), f];
        let k = PairKernels::compute(&pair, horizon, &cfg)?;
        let p = k.singles()[0];
        let fp = k.integral(0, 1) / (p * p);
        let th = thresholds_from_survival(&[p, p])?;
        let c = copula_first_order(&th, &CorrelationSpec::Equicorrelated(1.0))? / (sigma * sigma);
        let row = Table2Row {
            sigma,
            d_over_v0: d,
            survival: Cell::absolute(p, p_ref, 0.0015),
            chi: Cell::absolute(th.chi()[0], chi_ref, 0.01),
            a_fp_over_sigma2: Cell::relative(fp, fp_ref, 0.015),
            a_c_over_sigma2: Cell::relative(c, c_ref, 0.005),
        };
        let mark = |cell: &Cell| if compare && !cell.ok { "*" } else { " " };
        println!(
            "{sigma:>5.2} {d:>5.2} {:>8.4}{} {:>8.4}{} {:>9.5}{} {:>9.5}{}",
            row.survival.value,
            mark(&row.survival),
            row.chi.value,
            mark(&row.chi),
            row.a_fp_over_sigma2.value,
            mark(&row.a_fp_over_sigma2),
            row.a_c_over_sigma2.value,
            mark(&row.a_c_over_sigma2),
        );
        if compare {
            for (name, cell) in [
                ("P", &row.survival),
                ("chi", &row.chi),
                ("A_fp/sigma^2", &row.a_fp_over_sigma2),
                ("A_C/sigma^2", &row.a_c_over_sigma2),
            ] {
                if !cell.ok {
                    warnings.push(format!(
                        "({sigma}, {d}) {name} = {:.5}, reference {} +- {:.5}",
                        cell.value, cell.reference, cell.tolerance
                    ));
                }
            }
        }
        rows.push(row);
    }
    if !compare {
        warnings.push("reference values are for a five-year horizon; no cells were checked".into());
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = Report {
        version: VERSION,
        command: "table2",
        inputs: json!({ "horizon_years": horizon, "quadrature": cfg }),
        body: Table2Body {
            horizon_years: horizon,
            rows,
        },
        warnings,
    };
    write_json(json_path, &report)
}

fn sweep(chi: f64, n: usize, grid: &[f64], json_path: Option<&Path>) -> CliResult<()> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty correlation grid".into()));
    }
    let cfg = QuadratureConfig64::default();
    let th = CopulaThresholds::from_chi(&vec![chi; n])?;
    let p0 = th.independent_joint();
    let duration = copula_first_order(&th, &CorrelationSpec::Equicorrelated(1.0))?;
    println!("P0 = {p0:.6}   first order: P0 (1 + {duration:.6} xi)");
    println!("{:>6} {:>10} {:>10}", "xi", "joint", "linear");
    let mut rows = Vec::with_capacity(grid.len());
    for &xi in grid {
        let joint = copula_joint_equicorrelated(&th, xi, &cfg)?;
        let linear = p0 * (1.0 + duration * xi);
        println!("{xi:>6.3} {joint:>10.6} {linear:>10.6}");
        rows.push(SweepRow { xi, joint, linear });
    }
    let report = Report {
        version: VERSION,
        command: "sweep",
        inputs: json!({ "chi": chi, "n": n, "xi_grid": grid, "quadrature": cfg }),
        body: SweepBody { p0, duration, rows },
        warnings: Vec::new(),
    };
    write_json(json_path, &report)
}
