//! Command dispatch and report emission for the `lattice-trace` binary.

pub mod config;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use lattice_trace::audit::Auditor;
use lattice_trace::determinant::DeterminantEngine;
use lattice_trace::error::{Error, Result};
use lattice_trace::green::{GreenKernel, KernelSettings};
use lattice_trace::lattice::LatticeSite;
use lattice_trace::oracle::cross_validate;
use lattice_trace::spectral::lambda_of_z;
use lattice_trace::zeros::{ZeroLocator, ZeroSet};

pub use config::{parse_config, OutputFormat, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Hard limits applied by `audit`.
pub const JENSEN_LIMIT: f64 = 1e-6;
pub const MOMENT_LIMIT: f64 = 1e-5;
pub const SIGMA_FLOOR: f64 = -1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Green,
    DetGrid,
    Zeros,
    Audit,
    Bounds,
    OracleCompare,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Green,
        Command::DetGrid,
        Command::Zeros,
        Command::Audit,
        Command::Bounds,
        Command::OracleCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Green => "green",
            Command::DetGrid => "det-grid",
            Command::Zeros => "zeros",
            Command::Audit => "audit",
            Command::Bounds => "bounds",
            Command::OracleCompare => "oracle-compare",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Output of one command, plus whether every hard assertion held.
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

/// Runs `command` and writes its report to `out_path`. Returns the exit
/// status; diagnostics go to standard error.
pub fn execute(command: Command, cfg: &RunConfig, out_path: &Path) -> i32 {
    if let Err(e) = cfg.validate() {
        eprintln!("configuration error: {e}");
        return EXIT_CONFIG;
    }
    match run(command, cfg) {
        Ok(outcome) => {
            if let Err(e) = std::fs::write(out_path, &outcome.text) {
                eprintln!("cannot write {}: {e}", out_path.display());
                return EXIT_FAILURE;
            }
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("{}: hard assertion failed, see {}", command.name(), out_path.display());
                EXIT_FAILURE
            }
        }
        Err(e @ Error::Config { .. }) | Err(e @ Error::UnknownStrategy { .. }) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("{}: {e}", command.name());
            EXIT_FAILURE
        }
    }
}

struct Context {
    engine: DeterminantEngine,
    auditor: Auditor,
}

fn context(cfg: &RunConfig) -> Result<Context> {
    let full = cfg.build_potential()?;
    let (potential, dropped) = full.truncate(cfg.p, cfg.truncation_eps);
    if dropped > 0.0 {
        eprintln!("truncation dropped l^p mass {dropped:.3e}");
    }
    let kernel = GreenKernel::by_name(
        &cfg.green_strategy,
        KernelSettings {
            band_floor: cfg.band_floor,
            ..KernelSettings::default()
        },
    )?;
    let engine = DeterminantEngine::new(potential, Arc::new(kernel), cfg.quadrature_tol, cfg.radial_ceiling)?;
    let auditor = Auditor {
        locator: ZeroLocator::new(cfg.samples),
        samples: cfg.samples,
        n_max: cfg.n_max,
        truncation_mass: dropped,
    };
    Ok(Context { engine, auditor })
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let ctx = context(cfg)?;
    match command {
        Command::Green => green(cfg, &ctx),
        Command::DetGrid => det_grid(cfg, &ctx),
        Command::Zeros => zeros(cfg, &ctx),
        Command::Audit => audit(cfg, &ctx),
        Command::Bounds => bounds(cfg, &ctx),
        Command::OracleCompare => oracle_compare(cfg, &ctx),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn passed(text: String) -> Outcome {
    Outcome { text, passed: true }
}

#[derive(Serialize)]
struct GreenRow {
    diff: LatticeSite,
    value: Complex64,
    err: f64,
    derivative: Complex64,
    derivative_err: f64,
    points: usize,
}

#[derive(Serialize)]
struct GreenDoc {
    lambda: Complex64,
    d: usize,
    strategy: &'static str,
    quadrature_points: usize,
    entries: Vec<GreenRow>,
}

fn green(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let d = cfg.dimension;
    let lambda = match cfg.green_lambda {
        Some([re, im]) => Complex64::new(re, im),
        None => lambda_of_z(Complex64::new(cfg.radius, 0.0), d)?,
    };
    let v = ctx.engine.potential();
    let mut diffs: Vec<LatticeSite> = v.sites().flat_map(|a| v.sites().map(move |b| a.sub(b))).collect();
    if diffs.is_empty() {
        diffs.push(LatticeSite::origin(d));
    }
    let kernel = ctx.engine.kernel();
    let table = kernel.table(&diffs, lambda, d, cfg.quadrature_tol, true)?;
    let rows: Vec<GreenRow> = table
        .entries
        .iter()
        .map(|(diff, e)| GreenRow {
            diff: diff.clone(),
            value: e.value,
            err: e.err,
            derivative: e.derivative.unwrap_or_default(),
            derivative_err: e.derivative_err.unwrap_or_default(),
            points: e.points,
        })
        .collect();
    let text = match cfg.output_format {
        OutputFormat::Json => json(&GreenDoc {
            lambda,
            d,
            strategy: kernel.strategy_name(),
            quadrature_points: table.quadrature_points,
            entries: rows,
        })?,
        OutputFormat::Csv => {
            let mut s = String::new();
            let axes: Vec<String> = (1..=d).map(|k| format!("n{k}")).collect();
            writeln!(
                s,
                "{},re_lambda,im_lambda,re_G,im_G,err,re_dG,im_dG,dG_err,points",
                axes.join(",")
            )
            .unwrap();
            for r in rows {
                let coords: Vec<String> = r.diff.coords().iter().map(|c| c.to_string()).collect();
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    coords.join(","),
                    num(lambda.re),
                    num(lambda.im),
                    num(r.value.re),
                    num(r.value.im),
                    num(r.err),
                    num(r.derivative.re),
                    num(r.derivative.im),
                    num(r.derivative_err),
                    r.points
                )
                .unwrap();
            }
            s
        }
    };
    Ok(passed(text))
}

#[derive(Serialize)]
struct GridRow {
    t: f64,
    re_d: f64,
    im_d: f64,
    log_abs_d: f64,
}

fn det_grid(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let trace = ctx.engine.radial_trace(cfg.radius, cfg.samples, cfg.n_max)?;
    let text = match cfg.output_format {
        OutputFormat::Csv => {
            let mut s = String::from("t,re_D,im_D,log_abs_D\n");
            for ((t, d), l) in trace.angles.iter().zip(&trace.samples).zip(&trace.log_abs) {
                writeln!(s, "{},{},{},{}", num(*t), num(d.re), num(d.im), num(*l)).unwrap();
            }
            s
        }
        OutputFormat::Json => {
            let rows: Vec<GridRow> = trace
                .angles
                .iter()
                .zip(&trace.samples)
                .zip(&trace.log_abs)
                .map(|((&t, d), &l)| GridRow {
                    t,
                    re_d: d.re,
                    im_d: d.im,
                    log_abs_d: l,
                })
                .collect();
            json(&rows)?
        }
    };
    Ok(passed(text))
}

#[derive(Serialize)]
struct ZeroRow {
    z: [f64; 2],
    multiplicity: usize,
    lambda: [f64; 2],
    kappa: [f64; 2],
}

#[derive(Serialize)]
struct ZerosDoc {
    count: usize,
    zeros: Vec<ZeroRow>,
    r0: Option<f64>,
}

pub fn zeros_document(zs: &ZeroSet) -> Result<String> {
    let pair = |c: Complex64| [c.re, c.im];
    json(&ZerosDoc {
        count: zs.count(),
        zeros: zs
            .zeros
            .iter()
            .map(|z| ZeroRow {
                z: pair(z.z),
                multiplicity: z.multiplicity,
                lambda: pair(z.lambda),
                kappa: pair(z.kappa),
            })
            .collect(),
        r0: zs.r0(),
    })
}

fn zeros(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let zs = ctx.auditor.locator.locate_zeros(&ctx.engine, cfg.radius)?;
    Ok(passed(zeros_document(&zs)?))
}

fn audit(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let report = ctx.auditor.verify_identities(&ctx.engine, cfg.radius)?;
    let ok = report.jensen_residual <= JENSEN_LIMIT
        && report.moment_residuals.iter().all(|r| *r <= MOMENT_LIMIT)
        && report.zxj_regularized_residual <= MOMENT_LIMIT
        && report.t4_consistent_residual <= MOMENT_LIMIT
        && report.sigma_budget >= SIGMA_FLOOR;
    Ok(Outcome {
        text: json(&report)?,
        passed: ok,
    })
}

fn bounds(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let report = ctx.auditor.verify_bounds(&ctx.engine, cfg.p, cfg.radius)?;
    Ok(Outcome {
        passed: report.all_ok,
        text: json(&report)?,
    })
}

fn oracle_compare(cfg: &RunConfig, ctx: &Context) -> Result<Outcome> {
    let zs = ctx.auditor.locator.locate_zeros(&ctx.engine, cfg.radius)?;
    let table = cross_validate(
        ctx.engine.potential(),
        &cfg.box_half_widths,
        &zs,
        cfg.band_margin,
        &cfg.eigen_strategy,
    )?;
    let mut s = String::from("L,n_matched,max_abs_error\n");
    for row in &table.rows {
        writeln!(s, "{},{},{}", row.half_width, row.n_matched, num(row.max_abs_error)).unwrap();
    }
    Ok(Outcome {
        text: s,
        passed: table.monotone,
    })
}
