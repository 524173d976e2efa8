//! Batch front end. Every artifact embeds the [`RunConfig`] that produced
//! it, so `kfree --config <artifact>` repeats the run.
//!
//! Exit status: 0 success, 2 precondition or usage failure, 3 numerical
//! failure, 4 size cap exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certificate::{self, Convention};
use crate::dickman::{self, CharFnLimit};
use crate::ensemble::{self, EnsembleConfig};
use crate::error_terms::{self, AntiderivativeCase, CaseId};
use crate::smooth_sum::{self, PredictionOptions, RRule};
use crate::{Error, VERSION};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_SIZE_CAP: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "kfree", version, about = "Smooth sums over k-free integers with prime factors up to N")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Re-run the configuration stored in a JSON RunConfig or in any artifact.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for parallel products and scans.
    #[arg(long, global = true, env = "KFREE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Real part of alpha.
    #[arg(long = "alpha-re", visible_alias = "alpha", default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha_re: f64,
    #[arg(long = "alpha-im", default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha_im: f64,
}

impl EnsembleArgs {
    fn alpha(&self) -> Complex64 {
        Complex64::new(self.alpha_re, self.alpha_im)
    }

    fn config(&self, n: u64) -> crate::Result<EnsembleConfig> {
        EnsembleConfig::new(self.k, self.alpha(), n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMethod {
    Direct,
    Sieve,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Fixed,
    LogOverLogLog,
    LogPower,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleArgs {
    /// How the cutoff radius R grows with N.
    #[arg(long = "r-rule", value_enum, default_value = "log-over-log-log")]
    pub rule: RuleName,
    /// R for the fixed rule.
    #[arg(long = "R", default_value_t = 5.0)]
    pub r: f64,
    /// tau for `R = (log N)^(1 - tau)`.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
}

impl RuleArgs {
    fn rule(&self) -> RRule {
        match self.rule {
            RuleName::Fixed => RRule::Fixed { r: self.r },
            RuleName::LogOverLogLog => RRule::LogOverLogLog,
            RuleName::LogPower => RRule::LogPower { tau: self.tau },
        }
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// List the ensemble with Omega(n) and the weight alpha^Omega / n.
    Enumerate {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long = "N")]
        n: u64,
        #[arg(long, default_value_t = ensemble::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
    /// Partition function Z_N for each N.
    Partition {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<u64>,
    },
    /// Estimate of C in Z_N ~ C (log N)^alpha.
    Constant {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long = "N", value_delimiter = ',', default_value = "10000,100000,1000000,10000000")]
        n: Vec<u64>,
    },
    /// Characteristic function phi_N(lambda). CSV columns: lambda,re,im.
    Charfn {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long = "N")]
        n: u64,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambda: Vec<f64>,
    },
    /// Limiting characteristic function over a lambda grid. CSV columns: lambda,re,im.
    LimitCharfn {
        #[arg(long = "alpha-re", visible_alias = "alpha", default_value_t = 1.0, allow_negative_numbers = true)]
        alpha_re: f64,
        #[arg(long = "alpha-im", default_value_t = 0.0, allow_negative_numbers = true)]
        alpha_im: f64,
        #[arg(long = "lambda-min", default_value_t = 0.0, allow_negative_numbers = true)]
        lambda_min: f64,
        #[arg(long = "lambda-max", default_value_t = 10.0, allow_negative_numbers = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Dickman-type function rho and density w on a grid. CSV columns: u,rho,w.
    Dickman {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long = "u-max", default_value_t = 10.0)]
        u_max: f64,
        #[arg(long, default_value_t = dickman::DEFAULT_STEP)]
        step: f64,
    },
    /// Smooth sum S_f by one route.
    Sum {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long = "N")]
        n: u64,
        /// indicator, bump, bump01 or gaussian.
        #[arg(long, default_value = "bump")]
        cutoff: String,
        #[arg(long, value_enum, default_value = "direct")]
        method: SumMethod,
        /// Truncation radius for the spectral route.
        #[arg(long = "R", default_value_t = 1000.0)]
        r: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = ensemble::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
    /// Exact routes against the large-N prediction, one report per N.
    Compare {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[arg(long, default_value = "bump")]
        cutoff: String,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Largest N for which the spectral route runs.
        #[arg(long = "spectral-limit", default_value_t = 100_000)]
        spectral_limit: u64,
        #[arg(long = "spectral-R", default_value_t = 1000.0)]
        spectral_r: f64,
    },
    /// Error-term regime over a (tau, eta) grid. CSV columns: tau,eta,case.
    Regions {
        /// |alpha| - Re alpha.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long = "tau-points", default_value_t = 50)]
        tau_points: usize,
        #[arg(long = "eta-min", default_value_t = 1.05)]
        eta_min: f64,
        #[arg(long = "eta-max", default_value_t = 10.0)]
        eta_max: f64,
        #[arg(long = "eta-points", default_value_t = 50)]
        eta_points: usize,
    },
    /// Certified lower bound for the bump with alpha = -1. CSV columns: lambda,F.
    Example {
        #[arg(long, default_value_t = 5.0)]
        r: f64,
        #[arg(long = "M", default_value_t = 1000)]
        m: usize,
        /// Grid step for the CSV of F.
        #[arg(long = "csv-step", default_value_t = 1e-2)]
        csv_step: f64,
    },
    /// Antiderivative checks and envelope scans of the remainder integrals.
    /// CSV columns: N,lambda,term,abs_J,fit_eps,fit_eps_log.
    Appendix {
        /// Case such as J2,1,1 or J1,1,j; all cases when omitted.
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value_t = 3)]
        j: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01")]
        eps: Vec<f64>,
        #[arg(long = "x-min", default_value_t = 1.0)]
        x_min: f64,
        #[arg(long = "x-max", default_value_t = 20.0)]
        x_max: f64,
        /// Also run the envelope scan for this k and alpha over these N.
        #[arg(long = "scan-N", value_delimiter = ',')]
        scan_n: Vec<f64>,
        #[arg(long = "scan-lambda", value_delimiter = ',', default_value = "0.5,1,2,5")]
        scan_lambda: Vec<f64>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SizeCap { .. } => EXIT_SIZE_CAP,
            Error::ToleranceNotMet { .. } | Error::RTooSmall { .. } | Error::Singularity { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_USAGE, message: format!("i/o: {e}") }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { code: EXIT_USAGE, message: format!("json: {e}") }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Writes floats with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// JSON with every float at 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    version: &'a str,
    config: &'a RunConfig,
    result: T,
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("kfree: {}", f.message);
            f.code
        }
    }
}

fn resolve(cli: Cli) -> Outcome<RunConfig> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), None) => load_config(path)?,
        (None, Some(command)) => RunConfig { command, format: Format::Json, output: None, threads: None },
        (Some(_), Some(_)) => return Err(usage("--config replaces the subcommand; give one or the other")),
        (None, None) => return Err(usage("a subcommand or --config is required; see --help")),
    };
    if cli.output.is_some() {
        cfg.output = cli.output;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

/// Reads a bare RunConfig, a JSON artifact, or the header of a CSV artifact.
pub fn load_config(path: &Path) -> Outcome<RunConfig> {
    let text = fs::read_to_string(path)?;
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return Ok(serde_json::from_str(line)?);
    }
    let value: Value = serde_json::from_str(&text)?;
    let inner = value.get("config").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner)?)
}

fn execute(cfg: &RunConfig) -> Outcome<()> {
    if let Some(threads) = cfg.threads {
        // only the first pool configuration in a process takes effect
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    let csv_ok = matches!(
        cfg.command,
        Command::Charfn { .. }
            | Command::LimitCharfn { .. }
            | Command::Dickman { .. }
            | Command::Regions { .. }
            | Command::Example { .. }
            | Command::Appendix { .. }
    );
    if cfg.format == Format::Csv && !csv_ok {
        return Err(usage("this command has JSON output only"));
    }
    match &cfg.command {
        Command::Enumerate { ensemble, n, cap } => {
            let ecfg = ensemble.config(*n)?;
            let elements = ensemble::enumerate_ensemble(&ecfg, *cap)?;
            let weights: Vec<Complex64> = elements
                .iter()
                .map(|e| {
                    let v = e.value.to_string().parse::<f64>().unwrap_or(f64::INFINITY);
                    ecfg.alpha.powu(e.omega()) / v
                })
                .collect();
            let rows: Vec<Value> = elements
                .iter()
                .zip(&weights)
                .map(|(e, w)| {
                    let value = match u64::try_from(&e.value) {
                        Ok(v) => Value::from(v),
                        Err(_) => Value::from(e.value.to_string()),
                    };
                    serde_json::json!({
                        "value": value, "exponents": e.factorization.exponents, "omega": e.omega(), "weight": w,
                    })
                })
                .collect();
            emit_json(cfg, serde_json::json!({ "ensemble": ecfg, "count": rows.len(), "elements": rows }))
        }
        Command::Partition { ensemble, n } => {
            let rows = n
                .iter()
                .map(|&n| {
                    let ecfg = ensemble.config(n)?;
                    Ok(serde_json::json!({ "N": n, "value": ensemble::partition_function(&ecfg)? }))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            emit_json(cfg, rows)
        }
        Command::Constant { ensemble, n } => {
            emit_json(cfg, ensemble::partition_constant(ensemble.k, ensemble.alpha(), n)?)
        }
        Command::Charfn { ensemble, n, lambda } => {
            let ecfg = ensemble.config(*n)?;
            let values = ensemble::ensemble_charfn_many(&ecfg, lambda)?;
            let rows: Vec<(f64, Complex64)> = lambda.iter().copied().zip(values).collect();
            match cfg.format {
                Format::Json => emit_json(cfg, serde_json::json!({ "ensemble": ecfg, "values": rows })),
                Format::Csv => emit_csv(cfg, |out| write_complex_rows(out, &rows)),
            }
        }
        Command::LimitCharfn { alpha_re, alpha_im, lambda_min, lambda_max, points } => {
            let phi = CharFnLimit::new(Complex64::new(*alpha_re, *alpha_im));
            let rows: Vec<(f64, Complex64)> = grid(*lambda_min, *lambda_max, *points)?
                .into_iter()
                .map(|l| (l, phi.eval(l)))
                .collect();
            match cfg.format {
                Format::Json => emit_json(cfg, rows),
                Format::Csv => emit_csv(cfg, |out| write_complex_rows(out, &rows)),
            }
        }
        Command::Dickman { alpha, u_max, step } => {
            let grid = dickman::solve_rho(*alpha, *u_max, *step)?;
            match cfg.format {
                Format::Json => {
                    let mass = dickman::density_transform(&grid, 0.0)?;
                    let rows: Vec<Value> = grid
                        .nodes()
                        .step_by(((0.1 / grid.step).round() as usize).max(1))
                        .map(|(u, rho)| {
                            let w = dickman::w_density(grid.alpha, u, &grid).unwrap_or(f64::NAN);
                            serde_json::json!({ "u": u, "rho": rho, "w": w })
                        })
                        .collect();
                    emit_json(
                        cfg,
                        serde_json::json!({
                            "alpha": grid.alpha, "a0": grid.a0, "step": grid.step,
                            "u_max": grid.u_max, "mass": mass.re, "samples": rows,
                        }),
                    )
                }
                Format::Csv => emit_csv(cfg, |out| grid.write_csv(out).map_err(Failure::from)),
            }
        }
        Command::Sum { ensemble, n, cutoff, method, r, tol, cap } => {
            let ecfg = ensemble.config(*n)?;
            let f = smooth_sum::cutoff_by_name(cutoff)?;
            let result = match method {
                SumMethod::Direct => serde_json::json!({ "value": smooth_sum::smooth_sum_direct(&ecfg, &f, *cap)? }),
                SumMethod::Sieve => serde_json::json!({ "value": smooth_sum::smooth_sum_sieved(&ecfg, &f)? }),
                SumMethod::Spectral => serde_json::to_value(smooth_sum::smooth_sum_spectral(&ecfg, &f, *r, *tol)?)?,
            };
            emit_json(cfg, serde_json::json!({ "ensemble": ecfg, "cutoff": f.name, "method": method, "result": result }))
        }
        Command::Compare { ensemble, n, cutoff, rule, tol, spectral_limit, spectral_r } => {
            let f = smooth_sum::cutoff_by_name(cutoff)?;
            let opts = PredictionOptions {
                tol: *tol,
                spectral_limit: *spectral_limit,
                spectral_r: *spectral_r,
                ..PredictionOptions::default()
            };
            let rule = rule.rule();
            let mut reports = Vec::new();
            let mut disagreement = None;
            for &n in n {
                let ecfg = ensemble.config(n)?;
                let report = smooth_sum::asymptotic_prediction(&ecfg, &f, rule.r(n), &opts)?;
                if let (Some(gap), Some(s)) = (report.route_gap, report.spectral) {
                    let allowed = tol + s.tail_bound + s.quadrature_error;
                    if gap > allowed {
                        disagreement = Some(format!("N = {n}: direct and spectral differ by {gap:e} > {allowed:e}"));
                    }
                }
                reports.push(report);
            }
            emit_json(cfg, reports)?;
            match disagreement {
                Some(message) => Err(Failure { code: EXIT_NUMERICAL, message }),
                None => Ok(()),
            }
        }
        Command::Regions { delta, tau_points, eta_min, eta_max, eta_points } => {
            let taus = interior_grid(*tau_points)?;
            let etas = grid(*eta_min, *eta_max, *eta_points)?;
            match cfg.format {
                Format::Csv => emit_csv(cfg, |out| Ok(smooth_sum::write_region_csv(out, *delta, &taus, &etas)?)),
                Format::Json => {
                    let mut rows = Vec::new();
                    for &eta in &etas {
                        for &tau in &taus {
                            let case = smooth_sum::error_region(tau, eta, *delta)?;
                            rows.push(serde_json::json!({ "tau": tau, "eta": eta, "case": case }));
                        }
                    }
                    let rate = smooth_sum::corollary1_rate(*eta_max, *delta).ok();
                    emit_json(cfg, serde_json::json!({ "delta": delta, "grid": rows, "rate_at_eta_max": rate }))
                }
            }
        }
        Command::Example { r, m, csv_step } => match cfg.format {
            Format::Json => emit_json(cfg, certificate::reproduce_example(*r, *m)?),
            Format::Csv => emit_csv(cfg, |out| {
                Ok(certificate::write_integrand_csv(out, *r, *csv_step, Convention::Plain)?)
            }),
        },
        Command::Appendix { case, j, eps, x_min, x_max, scan_n, scan_lambda, ensemble } => {
            let ids: Vec<CaseId> = match case {
                Some(name) => vec![name.parse()?],
                None => CaseId::ALL.to_vec(),
            };
            let xs = grid(*x_min, *x_max, 200)?;
            let mut checks = Vec::new();
            for &id in &ids {
                for &e in eps {
                    let c = AntiderivativeCase::new(id, *j, e)?;
                    let residual = error_terms::verify_antiderivative(&c, &xs)?;
                    checks.push(serde_json::json!({
                        "case": c.label(), "eps": e, "residual": residual, "label_note": id.label_note(),
                    }));
                }
            }
            let log_n: Vec<f64> = scan_n.iter().map(|n| n.ln()).collect();
            let scans = if log_n.is_empty() {
                Vec::new()
            } else {
                ids.iter()
                    .map(|&id| error_terms::bound_scan(id, *j, ensemble.k, ensemble.alpha(), &log_n, scan_lambda))
                    .collect::<crate::Result<Vec<_>>>()?
            };
            match cfg.format {
                Format::Json => emit_json(cfg, serde_json::json!({ "checks": checks, "scans": scans })),
                Format::Csv => {
                    if scans.is_empty() {
                        return Err(usage("CSV output needs --scan-N"));
                    }
                    emit_csv(cfg, |out| {
                        for s in &scans {
                            error_terms::write_scan_csv(&mut *out, s)?;
                        }
                        Ok(())
                    })
                }
            }
        }
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Outcome<Vec<f64>> {
    if points == 0 || !(hi >= lo) {
        return Err(usage(format!("empty grid [{lo}, {hi}] with {points} points")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

/// `points` values strictly inside `(0, 1)`.
fn interior_grid(points: usize) -> Outcome<Vec<f64>> {
    if points == 0 {
        return Err(usage("tau grid needs at least one point"));
    }
    Ok((1..=points).map(|i| i as f64 / (points + 1) as f64).collect())
}

fn write_complex_rows(out: &mut dyn Write, rows: &[(f64, Complex64)]) -> Outcome<()> {
    writeln!(out, "lambda,re,im")?;
    for (l, v) in rows {
        writeln!(out, "{l:.16e},{:.16e},{:.16e}", v.re, v.im)?;
    }
    Ok(())
}

fn open_output(cfg: &RunConfig) -> Outcome<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(cfg: &RunConfig, result: T) -> Outcome<()> {
    let text = to_json(&Artifact { version: VERSION, config: cfg, result })?;
    let mut out = open_output(cfg)?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn emit_csv<F>(cfg: &RunConfig, body: F) -> Outcome<()>
where
    F: FnOnce(&mut dyn Write) -> Outcome<()>,
{
    let mut out = open_output(cfg)?;
    writeln!(out, "# version: {VERSION}")?;
    writeln!(out, "# config: {}", to_json(cfg)?)?;
    body(&mut *out)?;
    out.flush()?;
    Ok(())
}
