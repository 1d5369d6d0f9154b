//! Problem settings from flags and a flat TOML file. Flags win.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use kurzweil::cantor::DEFAULT_STAGE;
use kurzweil::expr::{parse, Expr};
use kurzweil::transport::maps;
use kurzweil::{BiACMap, Cell, Integrand, SignFlag, TagPolicy};
use serde::{Deserialize, Serialize};

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "KURZWEIL_CONFIG";

/// Settings shared by every subcommand. Each may also come from the config
/// file under the same name with `-` written as `_`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Cell of the integrand, `A B`.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<f64>>,
    /// Domain of the map, `A B`; defaults to the cell.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<f64>>,
    /// Integrand (or point function for `ac-probe`) in `x` or `y`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Points where the integrand may blow up.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular: Option<Vec<f64>>,
    /// Overrides `POINT=VALUE` on a null set.
    #[arg(long, num_args = 1.., value_parser = parse_exception)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exception: Option<Vec<(f64, f64)>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Panels of the output grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[arg(long, value_parser = parse_policy)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<TagPolicy>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Map: a built-in name (identity, x^2, x^3, exp, piecewise-affine,
    /// cantor-psi) or an expression given with its derivative and inverse.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_deriv: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_inv: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_inv_deriv: Option<String>,
    /// Points of the map's domain where its derivatives may fail.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_exceptions: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<i8>,
    /// Stage of the Cantor function.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<u32>,
    /// Total length budget for `ac-probe`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn parse_exception(s: &str) -> Result<(f64, f64), String> {
    let (p, v) = s.split_once('=').ok_or_else(|| format!("expected POINT=VALUE, got '{s}'"))?;
    let p = p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"))?;
    Ok((p, v))
}

fn parse_policy(s: &str) -> Result<TagPolicy, String> {
    match s {
        "midpoint-first" | "midpoint" => Ok(TagPolicy::MidpointFirst),
        "endpoint-first" | "endpoint" => Ok(TagPolicy::EndpointFirst),
        _ => Err(format!("unknown policy '{s}' (midpoint-first, endpoint-first)")),
    }
}

/// Misconfiguration; reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<kurzweil::Error> for UsageError {
    fn from(e: kurzweil::Error) -> Self {
        UsageError(e.to_string())
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    /// Fields of `self` override those of `base`.
    pub fn over(self, base: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            cell, domain, f, singular, exception, tol, grid, policy, depth_cap, max_iterations, phi, phi_deriv,
            phi_inv, phi_inv_deriv, phi_exceptions, sigma, stage, delta, seed, threads
        )
    }

    /// Merges with the file named by `explicit`, or else by `CONFIG_ENV`.
    pub fn with_config_file(self, explicit: Option<&Path>) -> Result<Settings, UsageError> {
        let path: Option<PathBuf> = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            Some(p) => Ok(self.over(Settings::from_file(&p)?)),
            None => Ok(self),
        }
    }
}

/// How a map was specified.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapSpec {
    Builtin(String),
    Exprs {
        forward: String,
        fderiv: String,
        inverse: String,
        ideriv: String,
        exceptions: Vec<f64>,
    },
}

pub const BUILTIN_MAPS: [&str; 6] = ["identity", "x^2", "x^3", "exp", "piecewise-affine", "cantor-psi"];

/// Fully resolved settings; this is what results echo back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub cell: Cell,
    pub domain: Cell,
    pub integrand: Option<String>,
    pub singular_points: Vec<f64>,
    pub exceptions: Vec<(f64, f64)>,
    pub map: Option<MapSpec>,
    pub sigma: SignFlag,
    pub tol: f64,
    pub grid: usize,
    pub policy: TagPolicy,
    pub depth_cap: usize,
    pub max_iterations: usize,
    pub stage: u32,
    pub delta: Option<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
}

fn cell_of(v: &Option<Vec<f64>>, what: &str) -> Result<Option<Cell>, UsageError> {
    match v.as_deref() {
        None => Ok(None),
        Some([a, b]) => Cell::new(*a, *b).map(Some).map_err(|e| UsageError(format!("{what}: {e}"))),
        Some(other) => Err(UsageError(format!("{what} needs two numbers, got {}", other.len()))),
    }
}

impl ProblemSpec {
    pub fn resolve(s: &Settings) -> Result<Self, UsageError> {
        let cell = cell_of(&s.cell, "cell")?.unwrap_or_else(Cell::unit);
        let domain = cell_of(&s.domain, "domain")?.unwrap_or(cell);
        let singular_points = s.singular.clone().unwrap_or_default();
        let exceptions = s.exception.clone().unwrap_or_default();
        for &p in singular_points.iter().chain(exceptions.iter().map(|e| &e.0)) {
            if !cell.contains(p) {
                return Err(UsageError(format!("point {p} is outside the cell {cell}")));
            }
        }
        let map = match (&s.phi, &s.phi_deriv, &s.phi_inv, &s.phi_inv_deriv) {
            (None, None, None, None) => None,
            (Some(f), Some(d), Some(i), Some(id)) => Some(MapSpec::Exprs {
                forward: f.clone(),
                fderiv: d.clone(),
                inverse: i.clone(),
                ideriv: id.clone(),
                exceptions: s.phi_exceptions.clone().unwrap_or_default(),
            }),
            (Some(name), None, None, None) if BUILTIN_MAPS.contains(&name.as_str()) => Some(MapSpec::Builtin(name.clone())),
            (Some(name), None, None, None) => {
                return Err(UsageError(format!(
                    "'{name}' is not a built-in map ({}); give --phi-deriv, --phi-inv and --phi-inv-deriv",
                    BUILTIN_MAPS.join(", ")
                )))
            }
            _ => return Err(UsageError("a map needs --phi, --phi-deriv, --phi-inv and --phi-inv-deriv".into())),
        };
        let sigma = SignFlag::new(s.sigma.unwrap_or(1)).map_err(UsageError::from)?;
        let tol = s.tol.unwrap_or(1e-6);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(UsageError(format!("tolerance must be positive, got {tol}")));
        }
        if s.threads == Some(0) {
            return Err(UsageError("--threads must be at least 1".into()));
        }
        Ok(Self {
            cell,
            domain,
            integrand: s.f.clone(),
            singular_points,
            exceptions,
            map,
            sigma,
            tol,
            grid: s.grid.unwrap_or(256).max(1),
            policy: s.policy.unwrap_or_default(),
            depth_cap: s.depth_cap.unwrap_or(kurzweil::gauge::DEFAULT_DEPTH_CAP),
            max_iterations: s.max_iterations.unwrap_or(16),
            stage: s.stage.unwrap_or(DEFAULT_STAGE),
            delta: s.delta,
            seed: s.seed.unwrap_or(0x5eed),
            threads: s.threads,
        })
    }

    pub fn kh_options(&self) -> kurzweil::KhOptions {
        kurzweil::KhOptions {
            max_iterations: self.max_iterations,
            depth_cap: self.depth_cap,
            policy: self.policy,
            ..Default::default()
        }
    }

    fn expr(&self, src: &str) -> Result<Expr, UsageError> {
        parse(src).map_err(|e| UsageError(format!("in '{src}': {e}")))
    }

    /// The integrand on `cell`.
    pub fn integrand(&self) -> Result<Integrand, UsageError> {
        self.integrand_on(self.cell)
    }

    pub fn integrand_on(&self, cell: Cell) -> Result<Integrand, UsageError> {
        let src = self.integrand.as_deref().ok_or_else(|| UsageError("an integrand is required (--f)".into()))?;
        let f = self.expr(src)?.compile(self.stage);
        Ok(Integrand::from_arc(cell, f)
            .with_singular_points(self.singular_points.iter().copied())?
            .with_exceptions(self.exceptions.iter().copied())?)
    }

    /// The map onto `cell` from `domain`.
    pub fn map(&self) -> Result<BiACMap, UsageError> {
        let spec = self.map.as_ref().ok_or_else(|| UsageError("a map is required (--phi)".into()))?;
        let m = match spec {
            MapSpec::Builtin(name) => match name.as_str() {
                "identity" => maps::identity(self.cell),
                "x^2" => maps::square(),
                "x^3" => maps::cube(),
                "exp" => maps::exp_map(),
                "piecewise-affine" => maps::piecewise_affine_default(),
                _ => maps::cantor_psi(self.stage),
            },
            MapSpec::Exprs {
                forward,
                fderiv,
                inverse,
                ideriv,
                exceptions,
            } => {
                let [f, d, i, id] = [forward, fderiv, inverse, ideriv].map(|s| self.expr(s));
                BiACMap::new(
                    forward.clone(),
                    self.domain,
                    self.cell,
                    f?.compile(self.stage),
                    d?.compile(self.stage),
                    i?.compile(self.stage),
                    id?.compile(self.stage),
                )
                .with_exceptions(exceptions.iter().copied())?
            }
        };
        if m.codomain() != self.cell {
            return Err(UsageError(format!(
                "map '{}' lands in {}, but the integrand lives on {}",
                m.name(),
                m.codomain(),
                self.cell
            )));
        }
        Ok(m)
    }
}

/// A black-box compiled expression, for callers that only need evaluation.
pub fn compile(src: &str, stage: u32) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>, UsageError> {
    Ok(parse(src).map_err(|e| UsageError(format!("in '{src}': {e}")))?.compile(stage))
}
