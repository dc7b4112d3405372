//! Command-line and config-file parsing into a validated [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use feec_core::crime::{MetricApprox, Transfer};
use feec_core::hodge::{manufactured_problem, PROBLEMS};

pub const GEOMETRIES: [&str; 2] = ["torus3", "sphere2"];
pub const METRICS: [&str; 5] = ["flat", "perturbed:eps=<f>", "round-pullback", "pw-constant", "pw-linear"];
pub const INTERPOLANTS: [&str; 3] = ["canonical", "quasi", "galerkin"];
pub const CONFIG_KEYS: [&str; 12] =
    ["geometry", "level", "levels", "metric", "problem", "interpolant", "approx", "transfer", "out", "dump-solution", "seed", "threads"];

/// Perturbation amplitude of the torus metric when none is given.
pub const DEFAULT_EPS: f64 = 0.3;

#[derive(Parser, Debug)]
#[command(name = "feec", about = "Lowest-order finite element exterior calculus experiments", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Subcommand, Debug)]
pub enum CommandArgs {
    /// Simplex counts and shape statistics of a mesh.
    MeshInfo(RawArgs),
    /// Solve the mixed Hodge-Laplace problem on one level.
    Solve(RawArgs),
    /// Error and rate table over levels 1..=N.
    Converge(RawArgs),
    /// Variational crime report over levels 1..=N.
    Crime(RawArgs),
    /// Commuting-diagram and metric-weight self checks.
    InterpCheck(RawArgs),
}

/// Flags shared by every command. Values stay textual until validation so
/// that every problem can be reported at once.
#[derive(Args, Debug, Default, Clone)]
pub struct RawArgs {
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub interpolant: Option<String>,
    #[arg(long)]
    pub approx: Option<String>,
    #[arg(long)]
    pub transfer: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long = "dump-solution")]
    pub dump_solution: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    MeshInfo,
    Solve,
    Converge,
    Crime,
    InterpCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MeshInfo => "mesh-info",
            Command::Solve => "solve",
            Command::Converge => "converge",
            Command::Crime => "crime",
            Command::InterpCheck => "interp-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Torus3,
    Sphere2,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Torus3 => "torus3",
            Geometry::Sphere2 => "sphere2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricSpec {
    Flat,
    Perturbed { eps: f64 },
    RoundPullback,
    PiecewiseConstant { eps: f64 },
    PiecewiseLinear { eps: f64 },
}

impl MetricSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let eps = match tail {
            None => None,
            Some(t) => {
                let v = t.strip_prefix("eps=").ok_or_else(|| format!("metric option `{t}` must have the form eps=<f>"))?;
                let eps: f64 = v.parse().map_err(|_| format!("malformed number `{v}` in metric"))?;
                if !eps.is_finite() {
                    return Err(format!("metric eps `{v}` must be finite"));
                }
                Some(eps)
            }
        };
        let no_eps = |m: MetricSpec| match eps {
            None => Ok(m),
            Some(_) => Err(format!("metric `{head}` takes no eps")),
        };
        match head {
            "flat" => no_eps(MetricSpec::Flat),
            "round-pullback" => no_eps(MetricSpec::RoundPullback),
            "perturbed" => Ok(MetricSpec::Perturbed { eps: eps.unwrap_or(DEFAULT_EPS) }),
            "pw-constant" => Ok(MetricSpec::PiecewiseConstant { eps: eps.unwrap_or(DEFAULT_EPS) }),
            "pw-linear" => Ok(MetricSpec::PiecewiseLinear { eps: eps.unwrap_or(DEFAULT_EPS) }),
            _ => Err(format!("unknown metric `{s}`; valid: {}", METRICS.join(", "))),
        }
    }

    pub fn is_flat(self) -> bool {
        self == MetricSpec::Flat
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolantChoice {
    Canonical,
    Quasi,
    Galerkin,
}

/// A fully validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    /// `None` for interp-check over both geometries.
    pub geometry: Option<Geometry>,
    pub level: usize,
    pub levels: usize,
    pub metric: MetricSpec,
    pub problem: String,
    pub interpolant: InterpolantChoice,
    pub approx: MetricApprox,
    pub transfer: Transfer,
    pub out: Option<PathBuf>,
    pub dump_solution: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Every problem found while validating a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

impl std::error::Error for ValidationErrors {}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ValidationErrors> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                let key = k.trim().trim_start_matches("--").to_string();
                if !CONFIG_KEYS.contains(&key.as_str()) {
                    errors.push(format!("config line {}: unknown key `{key}`; valid: {}", i + 1, CONFIG_KEYS.join(", ")));
                } else {
                    map.insert(key, v.trim().to_string());
                }
            }
            None => errors.push(format!("config line {}: expected `key = value`", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(ValidationErrors(errors))
    }
}

impl RawArgs {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("geometry", &self.geometry),
            ("level", &self.level),
            ("levels", &self.levels),
            ("metric", &self.metric),
            ("problem", &self.problem),
            ("interpolant", &self.interpolant),
            ("approx", &self.approx),
            ("transfer", &self.transfer),
            ("out", &self.out),
            ("dump-solution", &self.dump_solution),
            ("seed", &self.seed),
            ("threads", &self.threads),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
    }
}

impl CommandArgs {
    fn split(&self) -> (Command, &RawArgs) {
        match self {
            CommandArgs::MeshInfo(a) => (Command::MeshInfo, a),
            CommandArgs::Solve(a) => (Command::Solve, a),
            CommandArgs::Converge(a) => (Command::Converge, a),
            CommandArgs::Crime(a) => (Command::Crime, a),
            CommandArgs::InterpCheck(a) => (Command::InterpCheck, a),
        }
    }
}

/// Merges the config file (if any) under the flags and validates.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, ValidationErrors> {
    let (command, raw) = cli.command.split();
    let mut values = match &raw.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ValidationErrors(vec![format!("cannot read config `{}`: {e}", path.display())]))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    values.extend(raw.flag_map());
    validate(command, &values)
}

/// Parses an argument vector (including the program name).
pub fn parse_args<I, S>(argv: I) -> Result<ExperimentConfig, ValidationErrors>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| ValidationErrors(vec![e.to_string().trim().to_string()]))?;
    resolve(&cli)
}

fn parse_count(values: &BTreeMap<String, String>, key: &str, errors: &mut Vec<String>) -> Option<usize> {
    let v = values.get(key)?;
    match v.parse::<usize>() {
        Ok(n) => Some(n),
        Err(_) => {
            errors.push(format!("malformed {key} `{v}`: expected a non-negative integer"));
            None
        }
    }
}

/// Checks every field against the shipped catalogs.
pub fn validate(command: Command, values: &BTreeMap<String, String>) -> Result<ExperimentConfig, ValidationErrors> {
    let mut errors = Vec::new();

    let geometry = match values.get("geometry").map(String::as_str) {
        Some("torus3") => Some(Geometry::Torus3),
        Some("sphere2") => Some(Geometry::Sphere2),
        Some(other) => {
            errors.push(format!("unknown geometry `{other}`; valid: {}", GEOMETRIES.join(", ")));
            None
        }
        None => {
            if command != Command::InterpCheck {
                errors.push(format!("missing --geometry; valid: {}", GEOMETRIES.join(", ")));
            }
            None
        }
    };

    let level = parse_count(values, "level", &mut errors).unwrap_or(1);
    let max_level = match geometry {
        Some(Geometry::Sphere2) => 7,
        _ => 6,
    };
    if level > max_level {
        errors.push(format!("level {level} exceeds the supported maximum {max_level}"));
    }
    let levels = parse_count(values, "levels", &mut errors).unwrap_or(3);
    if levels == 0 {
        errors.push("levels must be at least 1".into());
    } else if levels > max_level {
        errors.push(format!("levels {levels} exceeds the supported maximum {max_level}"));
    }

    let metric = match values.get("metric") {
        Some(s) => match MetricSpec::parse(s) {
            Ok(m) => Some(m),
            Err(e) => {
                errors.push(e);
                None
            }
        },
        None => Some(MetricSpec::Flat),
    };
    if let (Some(g), Some(m)) = (geometry, metric) {
        match (g, m) {
            (Geometry::Torus3, MetricSpec::RoundPullback) => errors.push("metric round-pullback requires geometry sphere2".into()),
            (Geometry::Sphere2, MetricSpec::Perturbed { .. }) => errors.push("metric perturbed requires geometry torus3".into()),
            _ => {}
        }
    }

    let default_problem = match geometry {
        Some(Geometry::Sphere2) => "swirl",
        _ => "sines",
    };
    let problem = values.get("problem").cloned().unwrap_or_else(|| default_problem.into());
    match manufactured_problem(&problem) {
        Ok(p) => {
            if let Some(g) = geometry {
                if p.geometry != "any" && p.geometry != g.name() {
                    errors.push(format!("problem `{problem}` is defined on {}, not {}", p.geometry, g.name()));
                }
            }
        }
        Err(_) if !PROBLEMS.contains(&problem.as_str()) => {
            errors.push(format!("unknown problem `{problem}`; valid: {}", PROBLEMS.join(", ")))
        }
        Err(e) => errors.push(e.to_string()),
    }

    let interpolant = match values.get("interpolant").map(String::as_str) {
        None | Some("galerkin") => Some(InterpolantChoice::Galerkin),
        Some("canonical") => Some(InterpolantChoice::Canonical),
        Some("quasi") => Some(InterpolantChoice::Quasi),
        Some(other) => {
            errors.push(format!("unknown interpolant `{other}`; valid: {}", INTERPOLANTS.join(", ")));
            None
        }
    };
    if command == Command::Converge && interpolant == Some(InterpolantChoice::Galerkin) {
        if let Some(m) = metric {
            if !m.is_flat() {
                errors.push("galerkin convergence needs --metric flat: the exact solutions refer to the flat metric".into());
            }
        }
        if let Ok(p) = manufactured_problem(&problem) {
            if p.u.is_none() {
                errors.push(format!("problem `{problem}` has no exact solution to converge against"));
            }
        }
    }

    let approx = match values.get("approx") {
        Some(s) => match MetricApprox::parse(s) {
            Ok(a) => Some(a),
            Err(_) => {
                errors.push(format!("unknown approx `{s}`; valid: {}", MetricApprox::NAMES.join(", ")));
                None
            }
        },
        None => {
            if command == Command::Crime {
                errors.push(format!("missing --approx; valid: {}", MetricApprox::NAMES.join(", ")));
            }
            None
        }
    };
    let transfer = match values.get("transfer") {
        Some(s) => match Transfer::parse(s) {
            Ok(t) => Some(t),
            Err(_) => {
                errors.push(format!("unknown transfer `{s}`; valid: {}", Transfer::NAMES.join(", ")));
                None
            }
        },
        None => Some(Transfer::L2Projection),
    };

    let seed = match values.get("seed") {
        Some(v) => match v.parse::<u64>() {
            Ok(s) => s,
            Err(_) => {
                errors.push(format!("malformed seed `{v}`: expected a non-negative integer"));
                0
            }
        },
        None => 0,
    };
    let threads = parse_count(values, "threads", &mut errors);
    if threads == Some(0) {
        errors.push("threads must be at least 1".into());
    }

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }
    Ok(ExperimentConfig {
        command,
        geometry,
        level,
        levels,
        metric: metric.expect("validated"),
        problem,
        interpolant: interpolant.expect("validated"),
        approx: approx.unwrap_or(MetricApprox::PiecewiseConstant),
        transfer: transfer.expect("validated"),
        out: values.get("out").map(PathBuf::from),
        dump_solution: values.get("dump-solution").map(PathBuf::from),
        seed,
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_specs() {
        assert_eq!(MetricSpec::parse("flat"), Ok(MetricSpec::Flat));
        assert_eq!(MetricSpec::parse("perturbed:eps=0.2"), Ok(MetricSpec::Perturbed { eps: 0.2 }));
        assert_eq!(MetricSpec::parse("pw-linear"), Ok(MetricSpec::PiecewiseLinear { eps: DEFAULT_EPS }));
        assert!(MetricSpec::parse("flat:eps=1").is_err());
        assert!(MetricSpec::parse("perturbed:eps=x").is_err());
        assert!(MetricSpec::parse("warp").unwrap_err().contains("round-pullback"));
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("# comment\ngeometry = torus3\n\nlevels=2\n").unwrap();
        assert_eq!(m["geometry"], "torus3");
        assert_eq!(m["levels"], "2");
        let e = parse_config_text("colour = red\nnonsense\n").unwrap_err();
        assert_eq!(e.0.len(), 2);
    }
}
