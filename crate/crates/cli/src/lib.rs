//! The `kurzweil` command line: subcommands, JSON results and exit codes.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use kurzweil::cantor::cantor_cover;
use kurzweil::covering::{besicovitch_decompose, covers, families_disjoint};
use kurzweil::indefinite::{alexiewicz_norm_with, indefinite_integral_with, NormOptions};
use kurzweil::recover::{default_probes, recover_sigma_phi, verify_recovery, BlackBoxOperator};
use kurzweil::transport::{
    ac_probe, change_of_variable_check, isometry_check, luzin_probe, roundtrip_check, ProbeBudget,
};
use kurzweil::{kh_integrate_with, transport_apply, AdditiveCellFn, GridSpec, SampledCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use config::{compile, ProblemSpec, Settings, UsageError};

/// Version of the JSON result layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kurzweil", version, about = "Gauge integration, Alexiewicz norms and transport isometries")]
pub struct Cli {
    /// Config file (flat TOML); defaults to $KURZWEIL_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the computed curve here as CSV (`x,F`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gauge integral of the integrand over the cell.
    Integrate(Settings),
    /// Alexiewicz norm of the integrand.
    Norm(Settings),
    /// Indefinite integral on a uniform grid.
    Indefinite(Settings),
    /// Transported integrand σ·(f∘φ)·φ′; reports its integral and curve.
    Transport(Settings),
    /// Change of variable: ∫(f∘φ)|φ′| against ∫f.
    CheckCov(Settings),
    /// ‖T_φ f‖ against ‖f‖.
    CheckIsometry(Settings),
    /// ‖T_φ T_φ⁻¹ f − f‖.
    Roundtrip(Settings),
    /// Recover (σ, φ) from the transport operator of the given map and verify.
    Recover(Settings),
    /// Besicovitch decomposition of random centred intervals.
    Besicovitch(BesicovitchArgs),
    /// Search for a short family with large mass of the point function --f
    /// (with --exception overrides).
    AcProbe(Settings),
    /// Length of the stage-n Cantor cover and of its image under the map.
    LuzinProbe(Settings),
}

#[derive(Debug, Clone, clap::Args)]
pub struct BesicovitchArgs {
    #[command(flatten)]
    pub settings: Settings,
    /// Number of random intervals.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Largest radius, relative to the cell.
    #[arg(long, default_value_t = 0.05)]
    pub max_radius: f64,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Integrate(_) => "integrate",
            Command::Norm(_) => "norm",
            Command::Indefinite(_) => "indefinite",
            Command::Transport(_) => "transport",
            Command::CheckCov(_) => "check-cov",
            Command::CheckIsometry(_) => "check-isometry",
            Command::Roundtrip(_) => "roundtrip",
            Command::Recover(_) => "recover",
            Command::Besicovitch(_) => "besicovitch",
            Command::AcProbe(_) => "ac-probe",
            Command::LuzinProbe(_) => "luzin-probe",
        }
    }

    fn settings(&self) -> &Settings {
        match self {
            Command::Besicovitch(b) => &b.settings,
            Command::Integrate(s)
            | Command::Norm(s)
            | Command::Indefinite(s)
            | Command::Transport(s)
            | Command::CheckCov(s)
            | Command::CheckIsometry(s)
            | Command::Roundtrip(s)
            | Command::Recover(s)
            | Command::AcProbe(s)
            | Command::LuzinProbe(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok | Status::Pass => EXIT_OK,
            Status::Fail => EXIT_FAIL,
            Status::Error => EXIT_NUMERICAL,
        }
    }

    fn verdict(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// One result object; the layout is versioned by [`SCHEMA_VERSION`].
#[derive(Debug, Clone, Serialize)]
pub struct Output {
    pub schema_version: u32,
    pub engine_version: &'static str,
    pub command: &'static str,
    pub status: Status,
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config_echo: Value,
}

/// Body of a finished command before it is wrapped in [`Output`].
struct Done {
    status: Status,
    value: Option<f64>,
    error_estimate: Option<f64>,
    details: Value,
    summary: String,
    curve: Option<SampledCurve>,
}

enum Failure {
    Usage(UsageError),
    Engine(kurzweil::Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<kurzweil::Error> for Failure {
    fn from(e: kurzweil::Error) -> Self {
        if e.is_numerical() {
            Failure::Engine(e)
        } else {
            Failure::Usage(UsageError(e.to_string()))
        }
    }
}

/// Runs the parsed command, printing JSON to `stdout` and a summary to
/// `stderr`. Returns the exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let name = cli.command.name();
    let settings = match cli.command.settings().clone().with_config_file(cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => return usage(stderr, name, &e),
    };
    let spec = match ProblemSpec::resolve(&settings) {
        Ok(s) => s,
        Err(e) => return usage(stderr, name, &e),
    };
    let echo = serde_json::to_value(&spec).unwrap_or(Value::Null);
    let outcome = match spec.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command, &spec)),
            Err(e) => Err(Failure::Usage(UsageError(format!("thread pool: {e}")))),
        },
        None => execute(&cli.command, &spec),
    };
    let (out, summary, curve) = match outcome {
        Ok(d) => (
            Output {
                schema_version: SCHEMA_VERSION,
                engine_version: kurzweil::VERSION,
                command: name,
                status: d.status,
                value: d.value,
                error_estimate: d.error_estimate,
                details: d.details,
                error: None,
                config_echo: echo,
            },
            d.summary,
            d.curve,
        ),
        Err(Failure::Usage(e)) => return usage(stderr, name, &e),
        Err(Failure::Engine(e)) => {
            let (value, estimate) = match &e {
                kurzweil::Error::NoConvergence { best, estimate, .. } => (Some(*best), Some(*estimate)),
                _ => (None, None),
            };
            (
                Output {
                    schema_version: SCHEMA_VERSION,
                    engine_version: kurzweil::VERSION,
                    command: name,
                    status: Status::Error,
                    value,
                    error_estimate: estimate,
                    details: Value::Null,
                    error: Some(e.to_string()),
                    config_echo: echo,
                },
                format!("numerical failure: {e}"),
                None,
            )
        }
    };
    if let (Some(path), Some(curve)) = (&cli.out, &curve) {
        let written = File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            curve.write_csv(&mut w)?;
            w.flush()
        });
        if let Err(e) = written {
            return usage(stderr, name, &UsageError(format!("{}: {e}", path.display())));
        }
    }
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&out).expect("serializable output"));
    let _ = writeln!(stderr, "{name}: {summary}");
    out.status.exit_code()
}

fn usage(stderr: &mut dyn Write, name: &str, e: &UsageError) -> i32 {
    let _ = writeln!(stderr, "{name}: error: {e}");
    EXIT_USAGE
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn execute(cmd: &Command, spec: &ProblemSpec) -> Result<Done, Failure> {
    let tol = spec.tol;
    let grid = GridSpec::Uniform(spec.grid);
    Ok(match cmd {
        Command::Integrate(_) => {
            let f = spec.integrand()?;
            let r = kh_integrate_with(&f, &spec.cell, tol, &spec.kh_options())?;
            Done {
                status: Status::Ok,
                value: Some(r.value),
                error_estimate: Some(r.error_estimate),
                summary: format!("∫ = {:.12} (estimate {:.1e}, {} cells)", r.value, r.error_estimate, r.cells),
                details: to_value(&r),
                curve: None,
            }
        }
        Command::Norm(_) => {
            let f = spec.integrand()?;
            let opts = NormOptions {
                kh: spec.kh_options(),
                ..Default::default()
            };
            let n = alexiewicz_norm_with(&f, &spec.cell, tol, &opts)?;
            Done {
                status: Status::Ok,
                value: Some(n.value),
                error_estimate: Some(tol),
                summary: format!("‖f‖_A = {:.12} at x = {:.6}", n.value, n.argmax),
                details: json!({ "argmax": n.argmax, "refinements": n.refinements }),
                curve: Some(n.curve),
            }
        }
        Command::Indefinite(_) => {
            let f = spec.integrand()?;
            let c = indefinite_integral_with(&f, &spec.cell, &grid, tol, &spec.kh_options())?;
            let last = *c.values().last().expect("nonempty");
            Done {
                status: Status::Ok,
                value: Some(last),
                error_estimate: Some(tol),
                summary: format!("F(b) = {last:.12} on {} points", c.len()),
                details: json!({ "points": c.len(), "max_increment": c.max_increment() }),
                curve: Some(c),
            }
        }
        Command::Transport(_) => {
            let phi = spec.map()?;
            let t = transport_apply(&phi, spec.sigma, &spec.integrand()?)?;
            let c = indefinite_integral_with(&t, &phi.domain(), &grid, tol, &spec.kh_options())?;
            let last = *c.values().last().expect("nonempty");
            Done {
                status: Status::Ok,
                value: Some(last),
                error_estimate: Some(tol),
                summary: format!("∫ T_φ f = {last:.12} over {}", phi.domain()),
                details: json!({ "map": phi.name(), "sigma": spec.sigma, "singular_points": t.singular_points() }),
                curve: Some(c),
            }
        }
        Command::CheckCov(_) => {
            let r = change_of_variable_check(&spec.map()?, &spec.integrand()?, tol)?;
            Done {
                status: Status::verdict(r.pass),
                value: Some(r.discrepancy),
                error_estimate: Some(r.threshold),
                summary: format!(
                    "{}: lhs {:.12}, rhs {:.12}, discrepancy {:.2e} (< {:.2e}: {})",
                    r.map, r.lhs, r.rhs, r.discrepancy, r.threshold, r.pass
                ),
                details: to_value(&r),
                curve: None,
            }
        }
        Command::CheckIsometry(_) => {
            let r = isometry_check(&spec.map()?, spec.sigma, &spec.integrand()?, tol)?;
            Done {
                status: Status::verdict(r.pass),
                value: Some(r.transported),
                error_estimate: Some(r.defect),
                summary: format!(
                    "{} σ={}: ‖T f‖ {:.12}, ‖f‖ {:.12}, defect {:.2e}",
                    r.map, r.sigma, r.transported, r.original, r.defect
                ),
                details: to_value(&r),
                curve: None,
            }
        }
        Command::Roundtrip(_) => {
            let phi = spec.map()?;
            let g = spec.integrand_on(phi.domain())?;
            let r = roundtrip_check(&phi, spec.sigma, &g, tol)?;
            Done {
                status: Status::verdict(r.pass),
                value: Some(r.defect),
                error_estimate: Some(r.threshold),
                summary: format!("{}: ‖T_φ T_φ⁻¹ g − g‖ = {:.2e}", r.map, r.defect),
                details: to_value(&r),
                curve: None,
            }
        }
        Command::Recover(_) => {
            let phi = spec.map()?;
            let t = BlackBoxOperator::transport(&phi, spec.sigma);
            let r = recover_sigma_phi(&t, &grid, tol / 10.0)?;
            let v = verify_recovery(&t, &r, &default_probes(phi.codomain()), tol)?;
            let curve = r.offset_curve()?;
            Done {
                status: Status::verdict(v.pass),
                value: Some(r.sigma.value()),
                error_estimate: Some(tol),
                summary: format!("σ = {}, φ on {} points, verify {}", r.sigma, r.grid.len(), if v.pass { "PASS" } else { "FAIL" }),
                details: json!({ "sigma": r.sigma, "grid": r.grid, "phi": r.phi, "verify": v }),
                curve: Some(curve),
            }
        }
        Command::Besicovitch(b) => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let (lo, len) = (spec.cell.lo(), spec.cell.length());
            let points: Vec<f64> = (0..b.n).map(|_| lo + len * rng.gen::<f64>()).collect();
            let radii: Vec<f64> = (0..b.n).map(|_| len * b.max_radius * (1.0 - rng.gen::<f64>())).collect();
            let d = besicovitch_decompose(&points, &radii)?;
            let covered = covers(&d, &points);
            let disjoint = families_disjoint(&d);
            let sizes: Vec<usize> = d.families.iter().map(Vec::len).collect();
            Done {
                status: Status::verdict(covered && disjoint),
                value: Some(d.families.len() as f64),
                error_estimate: Some(0.0),
                summary: format!("{} intervals → {} families {sizes:?}, covered {covered}, disjoint {disjoint}", b.n, sizes.len()),
                details: json!({ "n": b.n, "families": sizes, "selected": d.selected, "covered": covered, "disjoint": disjoint }),
                curve: None,
            }
        }
        Command::AcProbe(_) => {
            let src = spec.integrand.as_deref().ok_or_else(|| UsageError("a point function is required (--f)".into()))?;
            let f = compile(src, spec.stage)?;
            let cell = spec.cell;
            let overrides = spec.exceptions.clone();
            let big_f = AdditiveCellFn::from_point_fn(cell, move |x| {
                overrides.iter().find(|e| e.0 == x).map_or_else(|| f(x), |e| e.1)
            });
            let delta = spec.delta.unwrap_or(0.01 * cell.length());
            let budget = ProbeBudget {
                seed: spec.seed,
                ..Default::default()
            };
            let r = ac_probe(&big_f, delta, &budget);
            Done {
                status: Status::Ok,
                value: Some(r.best_sum),
                error_estimate: None,
                summary: format!(
                    "Σ|F(J)| = {:.6} over {} cells of total length {:.3e} ≤ {delta:.3e}",
                    r.best_sum,
                    r.family.len(),
                    r.total_length
                ),
                details: json!({ "delta": delta, "total_length": r.total_length, "cells": r.family.len() }),
                curve: None,
            }
        }
        Command::LuzinProbe(_) => {
            let phi = spec.map()?;
            let r = luzin_probe(&phi, &cantor_cover(spec.stage))?;
            Done {
                status: Status::Ok,
                value: Some(r.image_length),
                error_estimate: None,
                summary: format!(
                    "{}: stage-{} cover of length {:.3e} maps onto length {:.6}",
                    phi.name(),
                    spec.stage,
                    r.input_length,
                    r.image_length
                ),
                details: to_value(&r),
                curve: None,
            }
        }
    })
}
