//! Line-oriented run configuration: `section.key = value`, `#` starts a comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::grid::TorusGrid;
use crate::hamiltonian::{
    check_parameter_admissibility, Admissibility, Coefficient, CouplingSign, HamiltonianKind, HamiltonianModel,
};
use crate::solver::{ContinuationConfig, NewtonConfig};
use crate::system::MfgProblem;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Plot,
}

impl OutputFormat {
    fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Plot => "plot",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "plot" => Ok(OutputFormat::Plot),
            other => Err(format!("unknown output format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub hamiltonian_kind: HamiltonianKind,
    pub gamma: f64,
    pub a: Coefficient,
    pub b: Coefficient,
    pub sign: CouplingSign,
    pub alpha: f64,
    pub newton: NewtonConfig,
    pub continuation: ContinuationConfig,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub allow_inadmissible: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 128,
            hamiltonian_kind: HamiltonianKind::Example,
            gamma: 1.25,
            a: Coefficient::SinBump,
            b: Coefficient::CosBump,
            sign: CouplingSign::PaperLiteral,
            alpha: 1.0,
            newton: NewtonConfig::default(),
            continuation: ContinuationConfig::default(),
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Plot],
            allow_inadmissible: false,
        }
    }
}

/// The configuration shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.cfg");

fn parse_value<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `section.key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "grid.d" => self.dim = parse_value(value)?,
            "grid.n" => self.n = parse_value(value)?,
            "hamiltonian.kind" => self.hamiltonian_kind = parse_value(value)?,
            "hamiltonian.gamma" => self.gamma = parse_value(value)?,
            "hamiltonian.a" => self.a = parse_value(value)?,
            "potential.b" => self.b = parse_value(value)?,
            "potential.sign" => self.sign = parse_value(value)?,
            "congestion.alpha" => self.alpha = parse_value(value)?,
            "newton.tol" => self.newton.tol_residual = parse_value(value)?,
            "newton.max_iters" => self.newton.max_iters = parse_value(value)?,
            "newton.min_m_floor" => self.newton.min_m_floor = parse_value(value)?,
            "newton.backtrack" => self.newton.backtrack_factor = parse_value(value)?,
            "newton.max_backtracks" => self.newton.max_backtracks = parse_value(value)?,
            "continuation.step_init" => self.continuation.lambda_step_init = parse_value(value)?,
            "continuation.step_min" => self.continuation.lambda_step_min = parse_value(value)?,
            "continuation.grow" => self.continuation.grow_factor = parse_value(value)?,
            "continuation.shrink" => self.continuation.shrink_factor = parse_value(value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "output.formats" => {
                self.formats = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_value)
                    .collect::<Result<_, _>>()?
            }
            "overrides.allow_inadmissible" => self.allow_inadmissible = parse_bool(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        TorusGrid::new(self.dim, self.n).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.hamiltonian_kind == HamiltonianKind::Blend {
            return Err(ConfigError::Invalid("hamiltonian.kind must be example or power".into()));
        }
        self.newton.validate().map_err(ConfigError::Invalid)?;
        self.continuation.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Serializes every recognized key; [`RunConfig::parse`] reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("grid.d", self.dim.to_string());
        put("grid.n", self.n.to_string());
        put("hamiltonian.kind", self.hamiltonian_kind.to_string());
        put("hamiltonian.gamma", format!("{:?}", self.gamma));
        put("hamiltonian.a", self.a.to_string());
        put("potential.b", self.b.to_string());
        put("potential.sign", self.sign.to_string());
        put("congestion.alpha", format!("{:?}", self.alpha));
        put("newton.tol", format!("{:?}", self.newton.tol_residual));
        put("newton.max_iters", self.newton.max_iters.to_string());
        put("newton.min_m_floor", format!("{:?}", self.newton.min_m_floor));
        put("newton.backtrack", format!("{:?}", self.newton.backtrack_factor));
        put("newton.max_backtracks", self.newton.max_backtracks.to_string());
        put("continuation.step_init", format!("{:?}", self.continuation.lambda_step_init));
        put("continuation.step_min", format!("{:?}", self.continuation.lambda_step_min));
        put("continuation.grow", format!("{:?}", self.continuation.grow_factor));
        put("continuation.shrink", format!("{:?}", self.continuation.shrink_factor));
        put("output.dir", self.output_dir.display().to_string());
        put("output.formats", self.formats.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(","));
        put("overrides.allow_inadmissible", self.allow_inadmissible.to_string());
        s
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.dim, self.n).expect("validated on parse")
    }

    pub fn admissibility(&self) -> Admissibility {
        check_parameter_admissibility(self.gamma, self.alpha, self.dim)
    }

    pub fn build_problem(&self) -> crate::Result<MfgProblem> {
        let grid = self.grid();
        let h = match self.hamiltonian_kind {
            HamiltonianKind::Power => HamiltonianModel::power(&grid, self.gamma)?,
            _ => HamiltonianModel::example(self.gamma, self.a.sample(&grid))?,
        };
        MfgProblem::new(h, self.b.sample(&grid), self.sign, self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_default_matches_reference_setup() {
        let cfg = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.admissibility().admissible());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig {
            dim: 2,
            n: 48,
            gamma: 1.1,
            alpha: 0.3,
            a: "fourier:1.5;0.25,-0.125;0,0.1".parse().unwrap(),
            sign: CouplingSign::Monotone,
            formats: vec![OutputFormat::Json],
            allow_inadmissible: true,
            ..RunConfig::default()
        };
        cfg.newton.tol_residual = 3e-11;
        let text = cfg.to_config_string();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_config_string(), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("grid.n = 64\ngrid.d 2\n", 2),
            ("# c\n\nhamiltonian.gamma = abc\n", 3),
            ("grid.bogus = 1\n", 1),
            ("grid.n = 32\ngrid.n = 64\n", 2),
            ("potential.sign = upward\n", 1),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text) {
                Err(ConfigError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(RunConfig::parse("grid.d = 3\n"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn comments_and_partial_files() {
        let cfg = RunConfig::parse("grid.n = 64   # coarser\ncongestion.alpha = 0.5\n").unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.gamma, 1.25);
    }
}
