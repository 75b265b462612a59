use crate::checks::{check_legendre, check_maps, check_phase};
use crate::config::{Command, Domain, Init, RunConfig};
use crate::expr::{parse_expr, Expr};
use crate::CliError;
use field_triple::lagrangian::LagrangianModel;
use field_triple::solver::*;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub model: String,
    pub grid: Option<String>,
    pub iterations: Option<usize>,
    pub final_residual: Option<f64>,
    pub action: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    pub pass: bool,
    pub details: serde_json::Value,
}

impl Report {
    fn new(cfg: &RunConfig, grid: bool) -> Self {
        Report {
            command: cfg.command.name().into(),
            model: cfg.model.name().into(),
            grid: grid.then(|| format!("{}x{}", cfg.grid.0, cfg.grid.1)),
            iterations: None,
            final_residual: None,
            action: None,
            max_error: None,
            pass: false,
            details: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports hold no maps with non-string keys") + "\n"
    }
}

/// Paths written for `--out path`: the field (solve only), its momenta and the report.
pub fn artifact_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (out.to_path_buf(), out.with_extension("momenta.csv"), out.with_extension("report.json"))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Executes the command, writing artifacts when `out` is set. A report with
/// `pass = false` is still returned (and written).
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let report = match cfg.command {
        Command::Solve => solve(cfg)?,
        Command::CheckMaps => {
            let checks = check_maps(cfg.seed, cfg.points)?;
            let mut r = Report::new(cfg, false);
            r.model = "none".into();
            r.pass = checks.iter().all(|c| c.pass);
            r.details = json!({ "seed": cfg.seed, "dimensions": checks });
            r
        }
        Command::Legendre => {
            let c = check_legendre(cfg.model, cfg.m, cfg.seed, cfg.points)?;
            let mut r = Report::new(cfg, false);
            r.pass = c.pass;
            r.details = json!({ "seed": cfg.seed, "legendre": c });
            r
        }
        Command::PhaseCheck => {
            let c = check_phase(cfg.model, cfg.m, cfg.seed, cfg.points)?;
            let mut r = Report::new(cfg, false);
            r.pass = c.pass;
            r.details = json!({ "seed": cfg.seed, "phase": c });
            r
        }
        Command::Action => action(cfg)?,
    };
    if let Some(out) = &cfg.out {
        write(&artifact_paths(out).2, &report.to_json())?;
    }
    Ok(report)
}

fn grid_of(cfg: &RunConfig) -> Result<Grid, CliError> {
    let (nx, ny) = cfg.grid;
    Ok(match cfg.domain {
        Domain::Square => Grid::unit_square(nx, ny)?,
        Domain::Disc => Grid::unit_disc(nx, ny)?,
    })
}

fn parse_bc(cfg: &RunConfig) -> Result<Vec<Expr>, CliError> {
    cfg.bc
        .iter()
        .enumerate()
        .map(|(k, s)| parse_expr(s).map_err(|e| CliError::Validation(format!("bc {k} '{s}': {e}"))))
        .collect()
}

fn eval_all(exprs: &[Expr], x: f64, y: f64) -> Result<Vec<f64>, CliError> {
    exprs
        .iter()
        .enumerate()
        .map(|(k, e)| e.eval(x, y).map_err(|err| CliError::Validation(format!("bc {k}: {err}"))))
        .collect()
}

/// Boundary expressions on `nodes`, the rest zero.
fn field_from(grid: &Grid, exprs: &[Expr], nodes: &[usize]) -> Result<GridField, CliError> {
    let m = exprs.len();
    let mut values = vec![0.0; grid.node_count() * m];
    for &n in nodes {
        let (x, y) = grid.coords(n);
        values[n * m..(n + 1) * m].copy_from_slice(&eval_all(exprs, x, y)?);
    }
    Ok(GridField::new(grid.clone(), m, values)?)
}

fn initial_field(model: &LagrangianModel, grid: &Grid, exprs: &[Expr], init: Init) -> Result<(GridField, Init), CliError> {
    let zero = || field_from(grid, exprs, &grid.boundary_nodes());
    let extend = || field_from(grid, exprs, &grid.active_nodes());
    match init {
        Init::Zero => Ok((zero()?, Init::Zero)),
        Init::Extend => Ok((extend()?, Init::Extend)),
        Init::Auto => {
            let f = zero()?;
            match discrete_action(model, &f) {
                Err(e) if e.is_domain() => Ok((extend()?, Init::Extend)),
                _ => Ok((f, Init::Zero)),
            }
        }
    }
}

fn fmt_row(out: &mut String, head: &[String], vals: &[f64]) {
    let mut fields = head.to_vec();
    fields.extend(vals.iter().map(|v| format!("{v:.16e}")));
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Non-outside nodes in row-major order, as `x,y,comp0,…`.
pub fn field_csv(f: &GridField) -> String {
    let mut out = String::from("x,y");
    for c in 0..f.m {
        let _ = write!(out, ",comp{c}");
    }
    out.push('\n');
    for n in f.grid.active_nodes() {
        let (x, y) = f.grid.coords(n);
        fmt_row(&mut out, &[], &[&[x, y][..], f.at(n)].concat());
    }
    out
}

/// One row per cell, `cell_i,cell_j,p1_0,…,p2_0,…`.
pub fn momenta_csv(p: &GridMomentum) -> String {
    let mut out = String::from("cell_i,cell_j");
    for name in ["p1", "p2"] {
        for c in 0..p.m {
            let _ = write!(out, ",{name}_{c}");
        }
    }
    out.push('\n');
    for (k, &(i, j)) in p.grid.cells().iter().enumerate() {
        fmt_row(&mut out, &[i.to_string(), j.to_string()], &[p.p1_at(k), p.p2_at(k)].concat());
    }
    out
}

/// Reads a field written by [`field_csv`] for the same grid.
pub fn read_field_csv(text: &str, grid: &Grid, m: usize) -> Result<GridField, CliError> {
    let bad = |line: usize, msg: String| CliError::Validation(format!("field line {line}: {msg}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let cols = header.split(',').count();
    if cols != 2 + m {
        return Err(bad(1, format!("{cols} columns, expected {} for m = {m}", 2 + m)));
    }
    let nodes = grid.active_nodes();
    let mut values = vec![0.0; grid.node_count() * m];
    let mut count = 0;
    for (k, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(k + 1, e.to_string()))?;
        if row.len() != 2 + m {
            return Err(bad(k + 1, format!("{} values, expected {}", row.len(), 2 + m)));
        }
        let Some(&n) = nodes.get(count) else {
            return Err(bad(k + 1, format!("more rows than the {} grid nodes", nodes.len())));
        };
        let (x, y) = grid.coords(n);
        if (row[0] - x).abs() > 1e-9 || (row[1] - y).abs() > 1e-9 {
            return Err(bad(k + 1, format!("node at ({}, {}) where the grid has ({x}, {y})", row[0], row[1])));
        }
        if let Some(v) = row[2..].iter().find(|v| !v.is_finite()) {
            return Err(bad(k + 1, format!("non-finite value {v}")));
        }
        values[n * m..(n + 1) * m].copy_from_slice(&row[2..]);
        count += 1;
    }
    if count != nodes.len() {
        return Err(bad(count + 1, format!("{count} rows for {} grid nodes", nodes.len())));
    }
    Ok(GridField::new(grid.clone(), m, values)?)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn solve(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.lagrangian(cfg.m)?;
    let grid = grid_of(cfg)?;
    let exprs = parse_bc(cfg)?;
    let (initial, init) = initial_field(&model, &grid, &exprs, cfg.init)?;
    let boundary: Vec<f64> = grid.boundary_nodes().iter().flat_map(|&n| initial.at(n).to_vec()).collect();
    let opts = SolveOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..SolveOptions::default() };
    let (field, sr) = solve_dirichlet(&model, &grid, &boundary, &initial, &opts)?;
    let momenta = boundary_momentum(&model, &field)?;

    // deviation from the boundary expressions read as a closed-form solution
    let mut max_error = Some(0.0_f64);
    for n in grid.interior_nodes() {
        let (x, y) = grid.coords(n);
        let Ok(v) = eval_all(&exprs, x, y) else {
            max_error = None;
            break;
        };
        let e = v.iter().zip(field.at(n)).fold(0.0_f64, |a, (u, w)| a.max((u - w).abs()));
        max_error = max_error.map(|worst| worst.max(e));
    }

    let mut r = Report::new(cfg, true);
    r.iterations = Some(sr.iterations);
    r.final_residual = Some(sr.final_residual);
    r.action = Some(sr.action);
    r.max_error = max_error;
    r.pass = sr.converged;
    let count = |k: StepKind| sr.steps.iter().filter(|&&s| s == k).count();
    r.details = json!({
        "converged": sr.converged,
        "tol": cfg.tol,
        "domain": match cfg.domain { Domain::Square => "square", Domain::Disc => "disc" },
        "init": match init { Init::Extend => "extend", _ => "zero" },
        "bc": cfg.bc,
        "interior_nodes": grid.interior_nodes().len(),
        "boundary_nodes": grid.boundary_nodes().len(),
        "steps": { "newton": count(StepKind::Newton), "regularized": count(StepKind::Regularized), "damped": count(StepKind::Damped) },
        "residual_history": sr.history,
        "max_momentum_divergence": max_abs(&momenta.divergence()),
    });
    if let Some(out) = &cfg.out {
        let (field_path, momenta_path, _) = artifact_paths(out);
        write(&field_path, &field_csv(&field))?;
        write(&momenta_path, &momenta_csv(&momenta))?;
    }
    Ok(r)
}

fn action(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.lagrangian(cfg.m)?;
    let grid = grid_of(cfg)?;
    let path = cfg.input.as_ref().expect("validated: action has an input");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let field = read_field_csv(&text, &grid, cfg.m)?;
    let residual = discrete_el_residual(&model, &field)?;
    let mut r = Report::new(cfg, true);
    r.action = Some(discrete_action(&model, &field)?);
    r.final_residual = Some(max_abs(&residual));
    r.pass = true;
    r.details = json!({ "input": path.display().to_string() });
    Ok(r)
}
