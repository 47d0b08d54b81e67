//! Command-line front end: model validation, functional evaluation,
//! derivative computation by any method, cross-method comparison, the
//! verification suite, and the expected-failure demonstrations.
//!
//! Every verb emits JSON (to `--out`, or to stdout when no path is given)
//! plus a short human-readable summary; schedule tables can additionally
//! be written as CSV sidecars. Outputs carry no timestamps, so identical
//! invocations produce identical files.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pgfm_core::derive::{
    frechet_residual, run_request, At, DefectDirections, DerivativeReport, DerivativeRequest,
    Method,
};
use pgfm_core::functional::{bmf_eval, pgfl_eval, pgfm_eval};
use pgfm_core::measure::TestSequenceKind;
use pgfm_core::model::{validate_model, FiniteSetDensity, Region};
use pgfm_core::suite::{failure_mode_demos, run_suite, SuiteConfig};
use pgfm_core::{sample, zoo};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "pgfm",
    about = "Point-process generating functionals on compact boxes: evaluation, functional derivatives, and the verification suite",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON result here (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write schedule tables as CSV here (derive/compare only).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Re-check all invariants of a model and print normalization residual and K.
    Validate {
        /// Model JSON path or `zoo:<id>`.
        model: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the function-input generating functional G[h].
    EvalPgfl {
        #[arg(long)]
        model: String,
        /// Field JSON path.
        #[arg(long)]
        field: PathBuf,
        /// Reject fields that leave the unit ball instead of warning.
        #[arg(long)]
        enforce_gamma: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the measure-input generating functional G[eta].
    EvalPgfm {
        #[arg(long)]
        model: String,
        /// Measure JSON path.
        #[arg(long)]
        measure: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the belief mass beta(S) over a region.
    EvalBmf {
        #[arg(long)]
        model: String,
        /// Region JSON path.
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compute a functional derivative at the given sites by one method.
    Derive {
        #[arg(long)]
        model: String,
        /// Sites: coordinates comma-separated, sites semicolon-separated
        /// (for 1-d spaces a comma list is read as several sites).
        #[arg(long)]
        sites: String,
        /// Where to differentiate: `zero`, `reference`, or a JSON path
        /// holding a measure or a field.
        #[arg(long, default_value = "zero")]
        at: String,
        /// oracle | pgfm | nested_fd | limit_sequence | secular | set_derivative
        #[arg(long, default_value = "pgfm")]
        method: String,
        /// Test-sequence family for the limit/secular methods.
        #[arg(long, default_value = "gaussian")]
        family: String,
        /// Width schedule, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.2,0.1,0.05,0.025")]
        lambda_schedule: Vec<f64>,
        /// Step schedule for nested finite differences, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1e-1,1e-2,1e-3")]
        eps_schedule: Vec<f64>,
        /// Fixed step for the secular central difference.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Ball radius schedule for the set derivative, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.032,0.016,0.008,0.004")]
        radii: Vec<f64>,
        /// Base region S for the set derivative (JSON path; empty set when omitted).
        #[arg(long)]
        region: Option<PathBuf>,
        /// Richardson-extrapolate schedule tables.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        extrapolate: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run several methods on one request and emit the residual matrix.
    Compare {
        #[arg(long)]
        model: String,
        #[arg(long)]
        sites: String,
        #[arg(long, default_value = "zero")]
        at: String,
        /// Comma-separated method list.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        methods: Vec<String>,
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.2,0.1,0.05,0.025")]
        lambda_schedule: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1e-1,1e-2,1e-3")]
        eps_schedule: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.032,0.016,0.008,0.004")]
        radii: Vec<f64>,
        #[arg(long)]
        region: Option<PathBuf>,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        extrapolate: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Normalized remainder of the derivative (the differentiability check).
    Frechet {
        #[arg(long)]
        model: String,
        /// Where to differentiate: `zero`, `reference`, or a JSON path.
        #[arg(long, default_value = "zero")]
        at: String,
        /// Direction measure JSON path.
        #[arg(long)]
        direction: PathBuf,
        /// Derivative order m (order >= 2 samples defect direction tuples).
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Sampled defect tuples for order >= 2.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 20250810)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the verification suite and write its report.
    Suite {
        /// Suite configuration JSON path.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the seed from the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Report JSON output path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optional JUnit XML output path.
        #[arg(long)]
        junit: Option<PathBuf>,
    },
    /// Produce the expected-failure demonstrations with their witnesses.
    DemoFailures {
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("PGFM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn load_model(spec: &str) -> Result<FiniteSetDensity> {
    if let Some(id) = spec.strip_prefix("zoo:") {
        return Ok(zoo::zoo_model(id)?.model);
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading model `{spec}`"))?;
    let model: FiniteSetDensity =
        serde_json::from_str(&text).with_context(|| format!("parsing model `{spec}`"))?;
    Ok(model)
}

fn load_region(path: &PathBuf) -> Result<Region> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading region {path:?}"))?;
    let region =
        serde_json::from_str(&text).with_context(|| format!("parsing region {path:?}"))?;
    Ok(region)
}

fn parse_at(spec: &str) -> Result<At> {
    match spec {
        "zero" => Ok(At::Zero),
        "reference" => Ok(At::Reference),
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading evaluation point `{path}`"))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing evaluation point `{path}`"))?;
            // fields carry a top-level `kind` tag; measures do not
            if value.get("kind").is_some() {
                Ok(At::Field(serde_json::from_value(value)?))
            } else {
                Ok(At::Measure(serde_json::from_value(value)?))
            }
        }
    }
}

/// Coordinates comma-separated within a site, sites semicolon-separated;
/// on a 1-d space a bare comma list means several one-coordinate sites.
fn parse_sites(spec: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut sites = Vec::new();
    for chunk in spec.split(';').filter(|c| !c.trim().is_empty()) {
        let coords: Vec<f64> = chunk
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(anyhow::Error::from))
            .collect::<Result<_>>()?;
        if dim == 1 && coords.len() > 1 {
            sites.extend(coords.into_iter().map(|c| vec![c]));
        } else {
            if coords.len() != dim {
                bail!(
                    "site `{chunk}` has {} coordinates but the space has dimension {dim}",
                    coords.len()
                );
            }
            sites.push(coords);
        }
    }
    if sites.is_empty() {
        bail!("no sites given");
    }
    Ok(sites)
}

fn parse_family(spec: &str) -> Result<TestSequenceKind> {
    match spec {
        "gaussian" => Ok(TestSequenceKind::Gaussian),
        "indicator" => Ok(TestSequenceKind::Indicator),
        other => bail!("unknown test-sequence family `{other}`"),
    }
}

/// JSON to `--out` or stdout; the summary goes to the other stream.
fn emit(output: &OutputArgs, payload: &serde_json::Value, summary: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(payload)?;
    match &output.out {
        Some(path) => {
            std::fs::write(path, text.as_bytes())
                .with_context(|| format!("writing {path:?}"))?;
            println!("{summary}");
            println!("json: {}", path.display());
        }
        None => {
            println!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn write_csv(path: &PathBuf, header: &str, rows: &[String]) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("writing {path:?}"))?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

fn report_csv(output: &OutputArgs, report: &DerivativeReport) -> Result<()> {
    if let Some(path) = &output.csv {
        let rows: Vec<String> = report
            .table
            .iter()
            .map(|r| format!("{},{},{}", r.parameter, r.value.re, r.value.im))
            .collect();
        write_csv(path, "parameter,re,im", &rows)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_request(
    model: &FiniteSetDensity,
    sites: &str,
    at: &str,
    method: Method,
    family: &str,
    lambda_schedule: Vec<f64>,
    eps_schedule: Vec<f64>,
    eps: f64,
    radii: Vec<f64>,
    region: &Option<PathBuf>,
    extrapolate: bool,
) -> Result<DerivativeRequest> {
    let mut req = DerivativeRequest::new(
        parse_sites(sites, model.space().dim())?,
        parse_at(at)?,
        method,
    );
    req.family = parse_family(family)?;
    req.lambda_schedule = lambda_schedule;
    req.eps_schedule = eps_schedule;
    req.secular_eps = eps;
    req.radii = radii;
    req.extrapolate = extrapolate;
    if let Some(path) = region {
        req.region = load_region(path)?;
    }
    Ok(req)
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Validate { model, output } => {
            let (m, truncated_mass) = if let Some(id) = model.strip_prefix("zoo:") {
                let z = zoo::zoo_model(id)?;
                (z.model, z.truncated_mass)
            } else {
                (load_model(&model)?, None)
            };
            let v = validate_model(&m)?;
            let payload = json!({
                "validation": v,
                "truncated_mass": truncated_mass,
                "passed": v.passes(),
            });
            emit(
                &output,
                &payload,
                &format!(
                    "normalization residual {:.3e}, K = {:.6}, symmetry residual {:.3e} -> {}",
                    v.normalization_residual,
                    v.k_bound.value,
                    v.symmetry_residual,
                    if v.passes() { "ok" } else { "FAILED" }
                ),
            )?;
            Ok(if v.passes() { 0 } else { 1 })
        }
        Command::EvalPgfl {
            model,
            field,
            enforce_gamma,
            output,
        } => {
            let m = load_model(&model)?;
            let text = std::fs::read_to_string(&field)
                .with_context(|| format!("reading field {field:?}"))?;
            let h =
                serde_json::from_str(&text).with_context(|| format!("parsing field {field:?}"))?;
            let ev = pgfl_eval(&m, &h, enforce_gamma)?;
            let payload =
                json!({ "value": { "re": ev.value.re, "im": ev.value.im }, "diagnostics": ev });
            emit(
                &output,
                &payload,
                &format!("G[h] = {:.12} + {:.3e} i", ev.value.re, ev.value.im),
            )?;
            Ok(0)
        }
        Command::EvalPgfm {
            model,
            measure,
            output,
        } => {
            let m = load_model(&model)?;
            let text = std::fs::read_to_string(&measure)
                .with_context(|| format!("reading measure {measure:?}"))?;
            let eta = serde_json::from_str(&text)
                .with_context(|| format!("parsing measure {measure:?}"))?;
            let ev = pgfm_eval(&m, &eta)?;
            let payload =
                json!({ "value": { "re": ev.value.re, "im": ev.value.im }, "diagnostics": ev });
            emit(
                &output,
                &payload,
                &format!("G[eta] = {:.12} + {:.12} i", ev.value.re, ev.value.im),
            )?;
            Ok(0)
        }
        Command::EvalBmf {
            model,
            region,
            output,
        } => {
            let m = load_model(&model)?;
            let r = load_region(&region)?;
            let ev = bmf_eval(&m, &r)?;
            let payload =
                json!({ "value": { "re": ev.value.re, "im": ev.value.im }, "diagnostics": ev });
            emit(
                &output,
                &payload,
                &format!(
                    "beta(S) = {:.12} (imag residual {:.3e})",
                    ev.value.re, ev.imag_residual
                ),
            )?;
            Ok(0)
        }
        Command::Derive {
            model,
            sites,
            at,
            method,
            family,
            lambda_schedule,
            eps_schedule,
            eps,
            radii,
            region,
            extrapolate,
            output,
        } => {
            let m = load_model(&model)?;
            let method: Method = method.parse()?;
            let req = build_request(
                &m,
                &sites,
                &at,
                method,
                &family,
                lambda_schedule,
                eps_schedule,
                eps,
                radii,
                &region,
                extrapolate,
            )?;
            let report = run_request(&m, &req)?;
            report_csv(&output, &report)?;
            let payload = serde_json::to_value(&report)?;
            emit(
                &output,
                &payload,
                &format!(
                    "{}: value = {:.12} + {:.12} i ({} table rows, {} flags)",
                    report.method,
                    report.value.re,
                    report.value.im,
                    report.table.len(),
                    report.flags.len()
                ),
            )?;
            Ok(0)
        }
        Command::Compare {
            model,
            sites,
            at,
            methods,
            family,
            lambda_schedule,
            eps_schedule,
            eps,
            radii,
            region,
            extrapolate,
            output,
        } => {
            let m = load_model(&model)?;
            if methods.len() < 2 {
                bail!("compare needs at least two methods");
            }
            let mut reports: Vec<DerivativeReport> = Vec::new();
            for name in &methods {
                let method: Method = name.parse()?;
                let req = build_request(
                    &m,
                    &sites,
                    &at,
                    method,
                    &family,
                    lambda_schedule.clone(),
                    eps_schedule.clone(),
                    eps,
                    radii.clone(),
                    &region,
                    extrapolate,
                )?;
                reports.push(run_request(&m, &req)?);
            }
            let n = reports.len();
            let mut matrix = vec![vec![0.0; n]; n];
            let mut max_off = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let d = (reports[i].value - reports[j].value).norm();
                    matrix[i][j] = d;
                    if i != j {
                        max_off = max_off.max(d);
                    }
                }
            }
            if let Some(path) = &output.csv {
                let rows: Vec<String> = reports
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let cells: Vec<String> = matrix[i].iter().map(|d| format!("{d}")).collect();
                        format!("{},{}", r.method, cells.join(","))
                    })
                    .collect();
                write_csv(path, &format!("method,{}", methods.join(",")), &rows)?;
            }
            let payload = json!({
                "methods": reports.iter().map(|r| json!({
                    "method": r.method,
                    "value": { "re": r.value.re, "im": r.value.im },
                    "warnings": r.warnings,
                })).collect::<Vec<_>>(),
                "residual_matrix": matrix,
                "max_off_diagonal": max_off,
            });
            emit(
                &output,
                &payload,
                &format!("{} methods agree to {max_off:.3e}", reports.len()),
            )?;
            Ok(0)
        }
        Command::Frechet {
            model,
            at,
            direction,
            order,
            samples,
            seed,
            output,
        } => {
            let m = load_model(&model)?;
            let eta = parse_at(&at)?.as_measure();
            let text = std::fs::read_to_string(&direction)
                .with_context(|| format!("reading direction {direction:?}"))?;
            let nu = serde_json::from_str(&text)
                .with_context(|| format!("parsing direction {direction:?}"))?;
            let residual = if order <= 1 {
                frechet_residual(&m, &eta, &nu, 1, DefectDirections::Explicit(&[]))?
            } else {
                let mut rng = sample::substream(seed, "cli-frechet");
                let tuples = sample::defect_tuples(&mut rng, m.space(), order, samples)?;
                frechet_residual(&m, &eta, &nu, order, DefectDirections::Explicit(&tuples))?
            };
            let tv = nu.total_variation(m.space())?;
            let payload = json!({
                "order": order,
                "direction_norm": tv,
                "residual": residual,
                "samples": if order > 1 { Some(samples) } else { None },
                "note": "order >= 2 reports a sampled lower bound for the defect operator norm",
            });
            emit(
                &output,
                &payload,
                &format!("order-{order} remainder / |direction| = {residual:.6e}"),
            )?;
            Ok(0)
        }
        Command::Suite {
            config,
            seed,
            report,
            junit,
        } => {
            let mut cfg: SuiteConfig = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading config {path:?}"))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing config {path:?}"))?
                }
                None => SuiteConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let suite_report = run_suite(&cfg)?;
            for c in &suite_report.checks {
                println!(
                    "{} {:<34} residual {:.3e} (tolerance {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.residual,
                    c.tolerance
                );
            }
            println!(
                "{} of {} checks passed (seed {})",
                suite_report.checks.iter().filter(|c| c.passed).count(),
                suite_report.checks.len(),
                suite_report.seed
            );
            if let Some(path) = &report {
                std::fs::write(path, suite_report.to_json_pretty())
                    .with_context(|| format!("writing {path:?}"))?;
                println!("report: {}", path.display());
            }
            if let Some(path) = &junit {
                std::fs::write(path, suite_report.to_junit_xml())
                    .with_context(|| format!("writing {path:?}"))?;
                println!("junit: {}", path.display());
            }
            Ok(if suite_report.all_passed { 0 } else { 1 })
        }
        Command::DemoFailures { output } => {
            let demo = failure_mode_demos(&SuiteConfig::default())?;
            let payload = serde_json::to_value(&demo)?;
            emit(
                &output,
                &payload,
                "three expected-failure demonstrations emitted (secular, belief-mass, unit-ball)",
            )?;
            Ok(0)
        }
    }
}
