use crate::CliError;
use clap::{Parser, ValueEnum};
use field_triple::models::Catalog;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve the Dirichlet problem for the Euler-Lagrange equations on a grid.
    Solve,
    /// Check the identities of the canonical maps at random points.
    CheckMaps,
    /// Round-trip the Legendre map of a model at random points.
    Legendre,
    /// Compare Lagrangian and Hamiltonian phase relations at random points.
    PhaseCheck,
    /// Evaluate the discrete action of a field read from CSV.
    Action,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::CheckMaps => "check-maps",
            Command::Legendre => "legendre",
            Command::PhaseCheck => "phase-check",
            Command::Action => "action",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Square,
    Disc,
}

/// Initial interior values for `solve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Zero, or the boundary expressions when zero leaves the model's domain.
    Auto,
    Zero,
    /// The boundary expressions evaluated at interior nodes.
    Extend,
}

/// Command-line flags. Every flag overrides the same key of `--config`.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "field-triple", version, about = "First-order field theory: canonical maps, Legendre transforms, grid solves")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON file with any of the keys below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// harmonic, sigma or nambu.
    #[arg(long)]
    pub model: Option<String>,
    /// Target dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Node counts as NXxNY, e.g. 33x33.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub domain: Option<Domain>,
    /// Boundary expression in x and y, one per component.
    #[arg(long, allow_hyphen_values = true)]
    pub bc: Vec<String>,
    /// Max-norm residual tolerance of the solver.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random points for the checking commands.
    #[arg(long)]
    pub points: Option<usize>,
    /// Output path; the momenta and report land next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Field CSV for `action`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub init: Option<Init>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub model: Option<String>,
    pub m: Option<usize>,
    pub grid: Option<String>,
    pub domain: Option<Domain>,
    pub bc: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub init: Option<Init>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Catalog,
    pub m: usize,
    pub grid: (usize, usize),
    pub domain: Domain,
    pub bc: Vec<String>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub points: usize,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub init: Init,
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Validation(format!("grid '{s}' is not of the form NXxNY with both at least 3"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let nx: usize = a.trim().parse().map_err(|_| bad())?;
    let ny: usize = b.trim().parse().map_err(|_| bad())?;
    if nx < 3 || ny < 3 {
        return Err(bad());
    }
    Ok((nx, ny))
}

impl RunConfig {
    /// Merges flags over the config file and validates the result.
    pub fn resolve(args: Args) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let command = args
            .command
            .or(file.command)
            .ok_or_else(|| CliError::Validation("no command given (solve, check-maps, legendre, phase-check, action)".into()))?;
        let model = Catalog::from_name(args.model.as_deref().or(file.model.as_deref()).unwrap_or("harmonic"))
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let m = args.m.or(file.m).unwrap_or(if model == Catalog::Nambu { 4 } else { 1 });
        model.validate_dim(m).map_err(|e| CliError::Validation(e.to_string()))?;
        let grid = parse_grid(args.grid.as_deref().or(file.grid.as_deref()).unwrap_or("17x17"))?;
        let bc = if args.bc.is_empty() { file.bc.unwrap_or_default() } else { args.bc };
        let tol = args.tol.or(file.tol).unwrap_or(1e-10);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Validation(format!("tolerance must be positive and finite, got {tol}")));
        }
        let points = args.points.or(file.points).unwrap_or(1000);
        if points == 0 {
            return Err(CliError::Validation("points must be at least 1".into()));
        }
        let cfg = RunConfig {
            command,
            model,
            m,
            grid,
            domain: args.domain.or(file.domain).unwrap_or(Domain::Square),
            bc,
            tol,
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(50),
            seed: args.seed.or(file.seed).unwrap_or(0),
            points,
            out: args.out.or(file.out),
            input: args.input.or(file.input),
            init: args.init.or(file.init).unwrap_or(Init::Auto),
        };
        match cfg.command {
            Command::Solve if cfg.bc.len() != cfg.m => Err(CliError::Validation(format!(
                "solve needs one boundary expression per component: got {} for m = {}",
                cfg.bc.len(),
                cfg.m
            ))),
            Command::Action if cfg.input.is_none() => Err(CliError::Validation("action needs --input".into())),
            _ => Ok(cfg),
        }
    }
}
