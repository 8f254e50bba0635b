use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ergorisk_core::casebook::{
    builtin_cases, frame_case, fragility_profiles, reproduce_all, CalibrationStrategy, CaseResult,
};
use ergorisk_core::pulse_oracle::{simulate, PulseSimConfig, YMode};
use ergorisk_core::riskengine::{assess_with_profile, QuadratureSettings, RateProfile, RiskReport};
use ergorisk_core::toymodel::{toy_error_sweep, RateConvention, SweepAxis, ToyCase, ToyProblem};
use ergorisk_core::Error;
use serde::Serialize;

mod format;
mod model;

use format::{num, opt, parse_grid, Csv};

const THREADS_VAR: &str = "ERGORISK_THREADS";

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::Calibration { .. } => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "ergorisk", version, about = "Lifetime seismic risk with ergodic and non-ergodic capacity uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Sigma,
    Time,
}

#[derive(clap::Args)]
struct Output {
    /// Output format.
    #[arg(long = "out", value_enum, default_value = "csv")]
    format: OutFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ToyArgs {
    /// Toy case: ref, a, b or c.
    #[arg(long, default_value = "ref")]
    case: String,
    /// Pulse rate per year (defaults to the case value).
    #[arg(long)]
    eta: Option<f64>,
    /// Rate convention: printed or plain.
    #[arg(long, default_value = "printed")]
    convention: String,
}

impl ToyArgs {
    fn problem(&self) -> Result<ToyProblem, CliError> {
        let case: ToyCase = self.case.parse()?;
        let convention: RateConvention = self.convention.parse()?;
        let mut p = ToyProblem::case(case).with_convention(convention);
        if let Some(eta) = self.eta {
            p.eta = eta;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Risk report for a model file at one or more exposure times.
    Assess {
        #[arg(long)]
        model: PathBuf,
        /// Exposure times in years; overrides the model file.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        t: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Error sweep of the toy pulse problem.
    Toy {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long, value_enum, default_value = "time")]
        sweep: Sweep,
        /// Grid as a,b,c or lin:a:b:n or log:a:b:n.
        #[arg(long)]
        grid: Option<String>,
        /// Exposure time for the sigma sweep.
        #[arg(long, default_value_t = 50.0)]
        t: f64,
    },
    /// Reference frame cases against their published rows.
    Reproduce {
        /// Case number 1 to 7, or all.
        #[arg(long, default_value = "all")]
        case: String,
        /// two_rate, anchor_slope or group_curved.
        #[arg(long, default_value = "two_rate")]
        strategy: String,
        #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [1.0, 50.0, 100.0])]
        t: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo estimate for the toy pulse problem.
    Oracle {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50.0)]
        t: f64,
        /// non_ergodic or ergodic.
        #[arg(long = "y-mode", default_value = "non_ergodic")]
        y_mode: String,
        #[command(flatten)]
        output: Output,
    },
    /// Fragility curves of a reference case: x only, tabulated z, composed z.
    Fragility {
        #[arg(long)]
        case: u8,
        #[arg(long, default_value = "lin:0.02:4:200")]
        grid: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Assess { model, t, output } => {
            let m = model::load(&model)?;
            let times = if t.is_empty() { m.t_d.clone() } else { t };
            if times.is_empty() {
                return Err(CliError::input("no exposure times: pass --t or set analysis.t_D"));
            }
            let profile = RateProfile::new(&m.x, &m.y, &m.hazard, &m.quadrature)?;
            let reports = times
                .iter()
                .map(|&t| assess_with_profile(&profile, &m.x, &m.y, &m.hazard, m.margin, t, &m.quadrature))
                .collect::<Result<Vec<_>, _>>()?;
            emit(&output, &reports, assess_csv)
        }
        Command::Toy { toy, sweep, grid, t } => {
            let p = toy.problem()?;
            let (axis, default_grid) = match sweep {
                Sweep::Sigma => (SweepAxis::SigmaLnY { t_d: t }, "lin:0:0.8:17"),
                Sweep::Time => (SweepAxis::Time, "log:0.1:100:31"),
            };
            let grid = parse_grid(grid.as_deref().unwrap_or(default_grid)).map_err(CliError::input)?;
            let rows = toy_error_sweep(&p, axis, &grid, &QuadratureSettings::default())?;
            let mut csv = Csv::new(&["axis", "pf_exact", "pf_ensemble", "err_pct"]);
            for r in rows {
                csv.row([num(r.axis), num(r.pf_exact), num(r.pf_ensemble), num(r.err_pct)]);
            }
            write_out(None, &csv.finish())
        }
        Command::Reproduce { case, strategy, t, output } => {
            let strategy: CalibrationStrategy = strategy.parse()?;
            let cases = if case == "all" {
                builtin_cases()
            } else {
                let id: u8 = case.parse().map_err(|_| CliError::input(format!("invalid case `{case}` (expected 1 to 7 or all)")))?;
                vec![frame_case(id)?]
            };
            let results = reproduce_all(&cases, &t, strategy, &QuadratureSettings::default())?;
            emit(&output, &results, reproduce_csv)
        }
        Command::Oracle { toy, n, seed, t, y_mode, output } => {
            let y_mode: YMode = y_mode.parse()?;
            let cfg = PulseSimConfig { problem: toy.problem()?, t_d: t, n_structures: n, seed, y_mode };
            let est = simulate(&cfg)?;
            emit(&output, &[est], |rows| {
                let mut csv = Csv::new(&["pf_hat", "std_error", "n"]);
                for e in rows {
                    csv.row([num(e.pf_hat), num(e.std_error), e.n.to_string()]);
                }
                csv.finish()
            })
        }
        Command::Fragility { case, grid } => {
            let grid = parse_grid(&grid).map_err(CliError::input)?;
            let rows = fragility_profiles(&frame_case(case)?, &grid)?;
            let mut csv = Csv::new(&["im", "f_x", "f_z_reported", "f_z_composed"]);
            for r in rows {
                csv.row([num(r.im), num(r.f_x), num(r.f_z_reported), num(r.f_z_composed)]);
            }
            write_out(None, &csv.finish())
        }
    }
}

fn emit<T: Serialize>(output: &Output, rows: &[T], csv: impl Fn(&[T]) -> String) -> Result<(), CliError> {
    let text = match output.format {
        OutFormat::Csv => csv(rows),
        OutFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows).map_err(|e| CliError::input(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    write_out(output.output.as_ref(), &text)
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::input(e.to_string())),
    }
}

const REPORT_COLUMNS: [&str; 13] = [
    "t_D",
    "lambda_rtr",
    "lambda_exact",
    "lambda_ensemble",
    "pf_rtr",
    "pf_exact",
    "pf_ensemble",
    "ratio_lambda",
    "ratio_pf",
    "err_pct_pf",
    "err_pct_lambda",
    "error_parameter",
    "var_product",
];

fn assess_csv(rows: &[RiskReport]) -> String {
    let mut csv = Csv::new(&REPORT_COLUMNS);
    for r in rows {
        csv.row([
            num(r.t_d),
            num(r.lambda_rtr),
            num(r.lambda_exact),
            num(r.lambda_ensemble),
            num(r.pf_rtr),
            num(r.pf_exact),
            num(r.pf_ensemble),
            num(r.ratio_lambda),
            num(r.ratio_pf),
            num(r.err_pct_pf),
            num(r.err_pct_lambda),
            opt(r.error_parameter),
            num(r.var_product),
        ]);
    }
    csv.finish()
}

fn reproduce_csv(rows: &[CaseResult]) -> String {
    const VALUES: [&str; 7] = ["a", "b", "c", "ratio", "err_pct", "error_parameter", "var_product"];
    let mut header = vec!["case".to_string(), "strategy".into(), "t_D".into()];
    header.extend(VALUES.iter().map(|v| v.to_string()));
    header.extend(VALUES.iter().map(|v| format!("published_{v}")));
    header.extend(VALUES.iter().map(|v| format!("delta_{v}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for r in rows {
        let [a, b, c, ratio, err] = r.columns();
        let ours = [Some(a), Some(b), Some(c), Some(ratio), Some(err), r.report.error_parameter, Some(r.report.var_product)];
        let published = r.published.map(|p| [Some(p.a), Some(p.b), Some(p.c), Some(p.ratio), Some(p.err_pct), p.error_parameter, p.var_product]);
        let delta = r.deltas().map(|d| [Some(d.a), Some(d.b), Some(d.c), Some(d.ratio), Some(d.err_pct), d.error_parameter, d.var_product]);
        let mut fields = vec![r.case_id.to_string(), r.strategy.to_string(), num(r.report.t_d)];
        fields.extend(ours.map(opt));
        fields.extend(published.unwrap_or([None; 7]).map(opt));
        fields.extend(delta.unwrap_or([None; 7]).map(opt));
        csv.row(fields);
    }
    csv.finish()
}
