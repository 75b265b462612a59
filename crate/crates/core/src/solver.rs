//! Variational discretization of the action on a structured grid.
//!
//! Each cell carries one jet: the average of its four corner values and the
//! edge-averaged differences along `x` and `y`. The discrete action is the
//! midpoint rule `Σ L(jet)·hx·hy`; its exact gradient is the discrete
//! Euler-Lagrange residual, so discrete integration by parts holds to rounding.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::Col;
use rayon::prelude::*;

use crate::autodiff;
use crate::jetcore::Jet;
use crate::lagrangian::LagrangianModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Outside,
}

/// Node-centred grid on `[0, (nx−1)·hx] × [0, (ny−1)·hy]`; node `(i, j)` sits at
/// `(i·hx, j·hy)` and has index `j·nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    kinds: Vec<NodeKind>,
    cells: Vec<(usize, usize)>,
}

impl Grid {
    /// Validates the mask: interior nodes lie off the grid edge, their four
    /// neighbours are not outside and they touch at least one active cell.
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, kinds: Vec<NodeKind>) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3×3 nodes, got {nx}×{ny}")));
        }
        if !(hx > 0.0 && hx.is_finite() && hy > 0.0 && hy.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacings must be positive, got {hx}, {hy}")));
        }
        if kinds.len() != nx * ny {
            return Err(Error::InvalidParameter(format!("mask has {} entries for {} nodes", kinds.len(), nx * ny)));
        }
        if !kinds.contains(&NodeKind::Boundary) {
            return Err(Error::InvalidParameter("grid has no boundary nodes".into()));
        }
        let inside = |i: usize, j: usize| kinds[j * nx + i] != NodeKind::Outside;
        let mut cells = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                if inside(i, j) && inside(i + 1, j) && inside(i, j + 1) && inside(i + 1, j + 1) {
                    cells.push((i, j));
                }
            }
        }
        let grid = Grid { nx, ny, hx, hy, kinds, cells };
        for j in 0..ny {
            for i in 0..nx {
                if grid.kind(i, j) != NodeKind::Interior {
                    continue;
                }
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    return Err(Error::InvalidParameter(format!("interior node ({i}, {j}) on the grid edge")));
                }
                let inside = |a: usize, b: usize| grid.kind(a, b) != NodeKind::Outside;
                if !(inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) && inside(i, j + 1)) {
                    return Err(Error::InvalidParameter(format!("interior node ({i}, {j}) has an outside neighbour")));
                }
                if grid.incident_cells(i, j).next().is_none() {
                    return Err(Error::InvalidParameter(format!("interior node ({i}, {j}) touches no cell")));
                }
            }
        }
        Ok(grid)
    }

    /// `[0, 1]²` with its edge nodes as boundary.
    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3×3 nodes, got {nx}×{ny}")));
        }
        let kinds = (0..nx * ny)
            .map(|n| {
                let (i, j) = (n % nx, n / nx);
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    NodeKind::Boundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        Self::new(nx, ny, 1.0 / (nx - 1) as f64, 1.0 / (ny - 1) as f64, kinds)
    }

    /// The disc `(x−½)² + (y−½)² ≤ ¼` in `[0, 1]²` with a stair-step boundary: a node
    /// inside the disc is interior when all eight of its neighbours are inside too.
    pub fn unit_disc(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3×3 nodes, got {nx}×{ny}")));
        }
        let (hx, hy) = (1.0 / (nx - 1) as f64, 1.0 / (ny - 1) as f64);
        let inside = |i: isize, j: isize| {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                return false;
            }
            let (x, y) = (i as f64 * hx - 0.5, j as f64 * hy - 0.5);
            x * x + y * y <= 0.25 + 1e-12
        };
        let mut kinds = Vec::with_capacity(nx * ny);
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let kind = if !inside(i, j) {
                    NodeKind::Outside
                } else if (-1..=1).all(|dj| (-1..=1).all(|di| inside(i + di, j + dj))) {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                };
                kinds.push(kind);
            }
        }
        Self::new(nx, ny, hx, hy, kinds)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        self.kinds[self.node(i, j)]
    }

    pub fn kind_of(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        ((node % self.nx) as f64 * self.hx, (node / self.nx) as f64 * self.hy)
    }

    /// Cells `(i, j)` spanning nodes `(i..=i+1, j..=j+1)`, all four corners inside.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn nodes_of(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.kinds[n] == kind).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        self.nodes_of(NodeKind::Interior)
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.nodes_of(NodeKind::Boundary)
    }

    /// Non-outside nodes in row-major order.
    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.kinds[n] != NodeKind::Outside).collect()
    }

    fn is_cell(&self, i: usize, j: usize) -> bool {
        i + 1 < self.nx
            && j + 1 < self.ny
            && [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].iter().all(|&(a, b)| self.kind(a, b) != NodeKind::Outside)
    }

    /// Active cells around node `(i, j)` with the corner the node occupies in each.
    fn incident_cells(&self, i: usize, j: usize) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        let candidates = [(0usize, 0usize, 0usize), (1, 0, 1), (0, 1, 2), (1, 1, 3)];
        candidates.into_iter().filter_map(move |(di, dj, corner)| {
            let (ci, cj) = (i.checked_sub(di)?, j.checked_sub(dj)?);
            self.is_cell(ci, cj).then_some(((ci, cj), corner))
        })
    }

    /// Corner node indices in the order `00, 10, 01, 11`.
    fn corners(&self, (i, j): (usize, usize)) -> [usize; 4] {
        let n = self.node(i, j);
        [n, n + 1, n + self.nx, n + self.nx + 1]
    }

    /// `(value, ∂/∂x, ∂/∂y)` weights of the four corners.
    fn weights(&self) -> [[f64; 3]; 4] {
        let (a, b) = (0.5 / self.hx, 0.5 / self.hy);
        [[0.25, -a, -b], [0.25, a, -b], [0.25, -a, b], [0.25, a, b]]
    }
}

/// Map values `u: nodes → ℝᵐ`, stored node-major (`values[node·m + a]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub m: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self> {
        let f = GridField { grid, m, values };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(grid: Grid, m: usize) -> Self {
        let n = grid.node_count() * m;
        GridField { grid, m, values: vec![0.0; n] }
    }

    /// Samples `f(x, y)` on every non-outside node; outside nodes hold zero.
    pub fn from_fn<F>(grid: Grid, m: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> Result<Vec<f64>>,
    {
        let mut values = vec![0.0; grid.node_count() * m];
        for n in grid.active_nodes() {
            let (x, y) = grid.coords(n);
            let v = f(x, y)?;
            if v.len() != m {
                return Err(Error::InvalidInput(format!("sampled {} components, expected {m}", v.len())));
            }
            values[n * m..(n + 1) * m].copy_from_slice(&v);
        }
        Self::new(grid, m, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidInput("field dimension must be at least 1".into()));
        }
        if self.values.len() != self.grid.node_count() * self.m {
            return Err(Error::InvalidInput(format!(
                "field has {} values for {} nodes of dimension {}",
                self.values.len(),
                self.grid.node_count(),
                self.m
            )));
        }
        for n in self.grid.active_nodes() {
            for a in 0..self.m {
                if !self.values[n * self.m + a].is_finite() {
                    return Err(Error::NonFinite { component: n * self.m + a });
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    /// Jet of cell `(i, j)`.
    pub fn cell_jet(&self, cell: (usize, usize)) -> Jet {
        let m = self.m;
        let w = self.grid.weights();
        let mut jet = Jet::zeros(m);
        for (c, node) in self.grid.corners(cell).into_iter().enumerate() {
            for a in 0..m {
                let u = self.values[node * m + a];
                jet.q[a] += w[c][0] * u;
                jet.qdot1[a] += w[c][1] * u;
                jet.qdot2[a] += w[c][2] * u;
            }
        }
        jet
    }

    /// Copies the values of `kind` nodes from `other`.
    pub fn copy_nodes(&mut self, other: &GridField, kind: NodeKind) {
        let m = self.m;
        for n in self.grid.nodes_of(kind) {
            self.values[n * m..(n + 1) * m].copy_from_slice(&other.values[n * m..(n + 1) * m]);
        }
    }
}

fn check_field(model: &LagrangianModel, f: &GridField) -> Result<()> {
    f.validate()?;
    if f.m != model.dim() {
        return Err(Error::InvalidInput(format!("field of dimension {} for a model of dimension {}", f.m, model.dim())));
    }
    Ok(())
}

fn cell_error(e: Error, (i, j): (usize, usize)) -> Error {
    if e.is_domain() {
        Error::InadmissibleCell { i, j }
    } else {
        e
    }
}

/// Value of the model at every cell jet, in cell order.
fn cell_values(model: &LagrangianModel, f: &GridField) -> Result<Vec<f64>> {
    check_field(model, f)?;
    f.grid
        .cells()
        .par_iter()
        .map(|&cell| model.value(&f.cell_jet(cell)).map_err(|e| cell_error(e, cell)))
        .collect()
}

/// `Σ L(jet(cell))·hx·hy` over active cells.
pub fn discrete_action(model: &LagrangianModel, f: &GridField) -> Result<f64> {
    let area = f.grid.hx * f.grid.hy;
    Ok(cell_values(model, f)?.iter().map(|l| l * area).sum())
}

/// Per-cell `(∂L/∂q, ∂L/∂q̇₁, ∂L/∂q̇₂)`, flat `3m` per cell.
fn cell_gradients(model: &LagrangianModel, f: &GridField) -> Result<Vec<Vec<f64>>> {
    check_field(model, f)?;
    f.grid
        .cells()
        .par_iter()
        .map(|&cell| {
            let jet = f.cell_jet(cell);
            let x = model.check(&jet).map_err(|e| cell_error(e, cell))?;
            autodiff::grad(model.field(), &x).map_err(|e| cell_error(e, cell))
        })
        .collect()
}

/// Scatters per-cell jet gradients to nodes by the chain rule, in cell order.
fn scatter(grid: &Grid, m: usize, cell_grads: &[Vec<f64>]) -> Vec<f64> {
    let w = grid.weights();
    let area = grid.hx * grid.hy;
    let mut out = vec![0.0; grid.node_count() * m];
    for (&cell, g) in grid.cells().iter().zip(cell_grads) {
        for (c, node) in grid.corners(cell).into_iter().enumerate() {
            for a in 0..m {
                out[node * m + a] += area * (w[c][0] * g[a] + w[c][1] * g[m + a] + w[c][2] * g[2 * m + a]);
            }
        }
    }
    out
}

/// Exact gradient of [`discrete_action`] with respect to every nodal value,
/// node-major; outside nodes are zero.
pub fn discrete_action_gradient(model: &LagrangianModel, f: &GridField) -> Result<Vec<f64>> {
    let g = cell_gradients(model, f)?;
    Ok(scatter(&f.grid, f.m, &g))
}

fn restrict(m: usize, full: &[f64], nodes: &[usize]) -> Vec<f64> {
    nodes.iter().flat_map(|&n| full[n * m..(n + 1) * m].iter().copied()).collect()
}

/// Discrete Euler-Lagrange residual on the interior nodes (in
/// [`Grid::interior_nodes`] order, `m` entries each): the interior block of
/// [`discrete_action_gradient`]. Divided by `hx·hy` it tends to
/// `∂L/∂q − D₁(∂L/∂q̇₁) − D₂(∂L/∂q̇₂)`.
pub fn discrete_el_residual(model: &LagrangianModel, f: &GridField) -> Result<Vec<f64>> {
    let full = discrete_action_gradient(model, f)?;
    Ok(restrict(f.m, &full, &f.grid.interior_nodes()))
}

/// Cell momenta `(p¹, p²) = (∂L/∂q̇₁, ∂L/∂q̇₂)` together with `∂L/∂q`, flat per cell
/// in [`Grid::cells`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMomentum {
    pub grid: Grid,
    pub m: usize,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub dl_dq: Vec<f64>,
}

impl GridMomentum {
    pub fn cell_count(&self) -> usize {
        self.grid.cells().len()
    }

    pub fn p1_at(&self, k: usize) -> &[f64] {
        &self.p1[k * self.m..(k + 1) * self.m]
    }

    pub fn p2_at(&self, k: usize) -> &[f64] {
        &self.p2[k * self.m..(k + 1) * self.m]
    }

    fn cell_grads(&self) -> Vec<Vec<f64>> {
        (0..self.cell_count())
            .map(|k| {
                let r = k * self.m..(k + 1) * self.m;
                [&self.dl_dq[r.clone()], &self.p1[r.clone()], &self.p2[r]].concat()
            })
            .collect()
    }

    /// Nodal flux of the momenta: for a boundary node, the coefficient of its
    /// variation in the first variation of the action. Node-major, all nodes.
    pub fn nodal_flux(&self) -> Vec<f64> {
        scatter(&self.grid, self.m, &self.cell_grads())
    }

    /// Flux at the boundary nodes, in [`Grid::boundary_nodes`] order.
    pub fn boundary_flux(&self) -> Vec<f64> {
        restrict(self.m, &self.nodal_flux(), &self.grid.boundary_nodes())
    }

    /// Pairing of the boundary momentum with a nodal variation (node-major, all
    /// nodes); only boundary entries of `delta` contribute.
    pub fn boundary_pairing(&self, delta: &[f64]) -> Result<f64> {
        if delta.len() != self.grid.node_count() * self.m {
            return Err(Error::InvalidInput(format!(
                "variation has {} entries, expected {}",
                delta.len(),
                self.grid.node_count() * self.m
            )));
        }
        let flux = self.nodal_flux();
        Ok(self
            .grid
            .boundary_nodes()
            .iter()
            .flat_map(|&n| (n * self.m..(n + 1) * self.m).map(|k| flux[k] * delta[k]))
            .sum())
    }

    /// `∂p¹/∂x + ∂p²/∂y` at each interior node from its four cells, in
    /// [`Grid::interior_nodes`] order.
    pub fn divergence(&self) -> Vec<f64> {
        let m = self.m;
        let index: std::collections::HashMap<(usize, usize), usize> =
            self.grid.cells().iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let (a, b) = (0.5 / self.grid.hx, 0.5 / self.grid.hy);
        let mut out = Vec::new();
        for n in self.grid.interior_nodes() {
            let (i, j) = (n % self.grid.nx, n / self.grid.nx);
            let ne = index[&(i, j)];
            let nw = index[&(i - 1, j)];
            let se = index[&(i, j - 1)];
            let sw = index[&(i - 1, j - 1)];
            for c in 0..m {
                let p1 = |k: usize| self.p1[k * m + c];
                let p2 = |k: usize| self.p2[k * m + c];
                out.push(a * (p1(ne) + p1(se) - p1(nw) - p1(sw)) + b * (p2(ne) + p2(nw) - p2(se) - p2(sw)));
            }
        }
        out
    }
}

/// Momenta of every cell. The boundary-node flux equals the boundary block of
/// [`discrete_action_gradient`] bit for bit.
pub fn boundary_momentum(model: &LagrangianModel, f: &GridField) -> Result<GridMomentum> {
    let g = cell_gradients(model, f)?;
    let m = f.m;
    let mut out = GridMomentum { grid: f.grid.clone(), m, p1: Vec::new(), p2: Vec::new(), dl_dq: Vec::new() };
    for cg in &g {
        out.dl_dq.extend_from_slice(&cg[..m]);
        out.p1.extend_from_slice(&cg[m..2 * m]);
        out.p2.extend_from_slice(&cg[2 * m..]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 50, max_halvings: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    /// Levenberg-Marquardt step `(J² + μI) δ = −J r`.
    Regularized,
    /// Newton step shortened by repeated halving.
    Damped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub action: f64,
    pub converged: bool,
    /// Max-norm residual before the first and after every accepted step.
    pub history: Vec<f64>,
    pub steps: Vec<StepKind>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Compressed sparse columns with sorted, unique row indices.
#[derive(Debug, Clone)]
struct Csc {
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl Csc {
    /// From `(col, row, value)` entries; duplicates are summed in sorted order.
    fn from_entries(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut col_ptr = vec![0; n + 1];
        let mut rows: Vec<usize> = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (col, row, v) in entries {
            if last == Some((col, row)) {
                *vals.last_mut().expect("merged entry") += v;
            } else {
                rows.push(row);
                vals.push(v);
                col_ptr[col + 1] += 1;
                last = Some((col, row));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Csc { n, col_ptr, rows, vals }
    }

    fn col(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.rows[k], self.vals[k]))
    }

    /// `self · x` for symmetric `self`.
    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for (r, v) in self.col(c) {
                y[r] += v * x[c];
            }
        }
        y
    }

    /// `self² + μI` for symmetric `self`.
    fn square_shifted(&self, mu: f64) -> Csc {
        let mut entries = Vec::new();
        let mut acc = vec![0.0; self.n];
        let mut touched = Vec::new();
        for c in 0..self.n {
            for (k, vkc) in self.col(c) {
                for (r, vrk) in self.col(k) {
                    if acc[r] == 0.0 && !touched.contains(&r) {
                        touched.push(r);
                    }
                    acc[r] += vrk * vkc;
                }
            }
            touched.sort_unstable();
            for &r in &touched {
                let shift = if r == c { mu } else { 0.0 };
                entries.push((c, r, acc[r] + shift));
                acc[r] = 0.0;
            }
            if !touched.contains(&c) {
                entries.push((c, c, mu));
            }
            touched.clear();
        }
        Csc::from_entries(self.n, entries)
    }

    fn max_diag(&self) -> f64 {
        (0..self.n)
            .flat_map(|c| self.col(c).filter(move |&(r, _)| r == c).map(|(_, v)| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Solves `self · x = −rhs` by sparse LU; `None` when the factorization breaks down.
    fn solve_neg(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            (0..self.n).flat_map(|c| self.col(c).map(move |(r, v)| Triplet::new(r, c, v))).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &triplets).ok()?;
        let lu = mat.sp_lu().ok()?;
        let b = Col::<f64>::from_fn(rhs.len(), |i| -rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..rhs.len()).map(|i| x[i]).collect();
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

/// Hessian of the discrete action restricted to the interior unknowns.
fn assemble_jacobian(model: &LagrangianModel, f: &GridField, unknown: &[Option<usize>]) -> Result<Csc> {
    let grid = &f.grid;
    let m = f.m;
    let k = 3 * m;
    let hessians: Vec<Vec<f64>> = grid
        .cells()
        .par_iter()
        .map(|&cell| {
            let x = model.check(&f.cell_jet(cell)).map_err(|e| cell_error(e, cell))?;
            autodiff::hessian(model.field(), &x).map_err(|e| cell_error(e, cell))
        })
        .collect::<Result<_>>()?;
    let w = grid.weights();
    let area = grid.hx * grid.hy;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (&cell, h) in grid.cells().iter().zip(&hessians) {
        let corners = grid.corners(cell);
        for (c, &nc) in corners.iter().enumerate() {
            for (d, &nd) in corners.iter().enumerate() {
                for a in 0..m {
                    let Some(row) = unknown[nc * m + a] else { continue };
                    for b in 0..m {
                        let Some(col) = unknown[nd * m + b] else { continue };
                        let mut v = 0.0;
                        for s in 0..3 {
                            for t in 0..3 {
                                v += w[c][s] * h[(s * m + a) * k + t * m + b] * w[d][t];
                            }
                        }
                        entries.push((col, row, area * v));
                    }
                }
            }
        }
    }
    Ok(Csc::from_entries(unknown.iter().flatten().count(), entries))
}

struct Candidate {
    field: GridField,
    residual: Vec<f64>,
    norm: f64,
    sq: f64,
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

struct Trial<'a> {
    model: &'a LagrangianModel,
    base: &'a GridField,
    interior: &'a [usize],
    admissible_seen: bool,
}

impl Trial<'_> {
    /// `base + t·step`, or `None` when some cell jet leaves the admissible set.
    fn attempt(&mut self, step: &[f64], t: f64) -> Result<Option<Candidate>> {
        let m = self.base.m;
        let mut field = self.base.clone();
        for (k, &n) in self.interior.iter().enumerate() {
            for a in 0..m {
                field.values[n * m + a] += t * step[k * m + a];
            }
        }
        match discrete_el_residual(self.model, &field) {
            Ok(residual) => {
                self.admissible_seen = true;
                let (norm, sq) = (max_abs(&residual), sum_sq(&residual));
                Ok(Some(Candidate { field, residual, norm, sq }))
            }
            Err(e) if matches!(e, Error::InadmissibleCell { .. }) || e.is_domain() => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Levenberg-Marquardt damping, updated by the gain ratio of each trial.
struct Damping {
    mu: Option<f64>,
    nu: f64,
}

impl Damping {
    fn accept(&mut self, rho: f64) {
        let factor = (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
        self.mu = self.mu.map(|mu| mu * factor);
        self.nu = 2.0;
    }

    fn reject(&mut self) {
        self.mu = self.mu.map(|mu| mu * self.nu);
        self.nu *= 2.0;
    }
}

/// Stationary point of the discrete action with the boundary nodes held at
/// `boundary_values` ([`Grid::boundary_nodes`] order, `m` entries each).
///
/// Newton on [`discrete_el_residual`] with the sparse Hessian of the action.
/// Every accepted step keeps all cell jets admissible and does not increase the
/// max residual. The full Newton step is tried first, then Levenberg-Marquardt
/// steps (which must also lower `|r|₂`), which tame nearly flat directions such
/// as reparametrizations of the string, and finally the Newton step halved up to
/// `max_halvings` times. Without convergence the best iterate is returned with
/// `converged = false`; if no trial keeps the field admissible the solve fails
/// with a domain error.
pub fn solve_dirichlet(
    model: &LagrangianModel,
    grid: &Grid,
    boundary_values: &[f64],
    initial: &GridField,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    let m = model.dim();
    if &initial.grid != grid {
        return Err(Error::InvalidInput("initial field lives on a different grid".into()));
    }
    check_field(model, initial)?;
    let boundary = grid.boundary_nodes();
    if boundary_values.len() != boundary.len() * m {
        return Err(Error::InvalidInput(format!(
            "{} boundary values for {} boundary nodes of dimension {m}",
            boundary_values.len(),
            boundary.len()
        )));
    }
    if let Some(k) = boundary_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { component: k });
    }
    for (k, &n) in boundary.iter().enumerate() {
        if initial.at(n) != &boundary_values[k * m..(k + 1) * m] {
            return Err(Error::InvalidInput(format!("initial field differs from the boundary data at node {n}")));
        }
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let interior = grid.interior_nodes();
    let mut unknown = vec![None; grid.node_count() * m];
    for (k, &n) in interior.iter().enumerate() {
        for a in 0..m {
            unknown[n * m + a] = Some(k * m + a);
        }
    }

    let mut field = initial.clone();
    let mut residual = discrete_el_residual(model, &field)?;
    let mut norm = max_abs(&residual);
    let mut history = vec![norm];
    let mut steps = Vec::new();
    let mut damping = Damping { mu: None, nu: 2.0 };
    while norm > opts.tol && steps.len() < opts.max_iter {
        let jac = assemble_jacobian(model, &field, &unknown)?;
        let newton = jac.solve_neg(&residual);
        let mut trial = Trial { model, base: &field, interior: &interior, admissible_seen: false };
        let mut accepted = None;
        if let Some(step) = &newton {
            accepted = trial.attempt(step, 1.0)?.filter(|c| c.norm <= norm).map(|c| (c, StepKind::Newton));
        }
        if accepted.is_none() {
            // merit ½|r|², gradient J r, model decrease ½ δ·(μδ − J r)
            let grad = jac.mul_vec(&residual);
            let sq = sum_sq(&residual);
            damping.mu.get_or_insert(1e-6 * jac.max_diag().powi(2).max(f64::MIN_POSITIVE));
            for _ in 0..=opts.max_halvings {
                let mu = damping.mu.expect("initialized");
                let Some(step) = jac.square_shifted(mu).solve_neg(&grad) else {
                    damping.reject();
                    continue;
                };
                let predicted: f64 = 0.5 * step.iter().zip(&grad).map(|(d, g)| d * (mu * d - g)).sum::<f64>();
                match trial.attempt(&step, 1.0)? {
                    Some(c) if c.sq < sq && c.norm <= norm && predicted > 0.0 => {
                        damping.accept(0.5 * (sq - c.sq) / predicted);
                        accepted = Some((c, StepKind::Regularized));
                        break;
                    }
                    _ => damping.reject(),
                }
            }
        }
        if let (None, Some(step)) = (&accepted, &newton) {
            let mut t = 0.5;
            for _ in 0..opts.max_halvings {
                if let Some(c) = trial.attempt(step, t)?.filter(|c| c.norm <= norm) {
                    accepted = Some((c, StepKind::Damped));
                    break;
                }
                t *= 0.5;
            }
        }
        let admissible_seen = trial.admissible_seen;
        match accepted {
            Some((c, kind)) => {
                field = c.field;
                residual = c.residual;
                norm = c.norm;
                history.push(norm);
                steps.push(kind);
            }
            None if newton.is_none() && !admissible_seen => {
                return Err(Error::SingularJacobian { iteration: steps.len() })
            }
            None if !admissible_seen => {
                return Err(Error::Domain(format!(
                    "no trial step keeps the cell jets admissible at iteration {}",
                    steps.len()
                )))
            }
            None => break,
        }
    }
    let action = discrete_action(model, &field)?;
    let report = SolveReport {
        iterations: steps.len(),
        final_residual: norm,
        action,
        converged: norm <= opts.tol,
        history,
        steps,
    };
    Ok((field, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{harmonic_lagrangian, nambu_lagrangian};

    fn harmonic1() -> LagrangianModel {
        harmonic_lagrangian(1, &[1.0]).unwrap()
    }

    fn scalar_field(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> GridField {
        GridField::from_fn(grid.clone(), 1, |x, y| Ok(vec![f(x, y)])).unwrap()
    }

    #[test]
    fn square_mask() {
        let g = Grid::unit_square(4, 3).unwrap();
        assert_eq!(g.interior_nodes(), vec![5, 6]);
        assert_eq!(g.boundary_nodes().len(), 10);
        assert_eq!(g.cells().len(), 6);
        assert_eq!(g.coords(7), (1.0, 1.0 / 2.0));
        assert!(Grid::unit_square(2, 5).is_err());
    }

    #[test]
    fn disc_mask() {
        let g = Grid::unit_disc(17, 17).unwrap();
        assert_eq!(g.kind(0, 0), NodeKind::Outside);
        assert_eq!(g.kind(8, 8), NodeKind::Interior);
        assert_eq!(g.kind(8, 0), NodeKind::Boundary);
        for n in g.interior_nodes() {
            let (i, j) = (n % 17, n / 17);
            assert_eq!(g.incident_cells(i, j).count(), 4);
        }
    }

    #[test]
    fn mask_validation() {
        let mut kinds = vec![NodeKind::Boundary; 9];
        kinds[4] = NodeKind::Interior;
        kinds[1] = NodeKind::Outside;
        assert!(Grid::new(3, 3, 0.5, 0.5, kinds).is_err());
        assert!(Grid::new(3, 3, 0.5, 0.5, vec![NodeKind::Interior; 9]).is_err());
        assert!(Grid::new(3, 3, -0.5, 0.5, vec![NodeKind::Boundary; 9]).is_err());
    }

    #[test]
    fn action_of_constant_and_linear_fields() {
        let g = Grid::unit_square(9, 5).unwrap();
        assert_eq!(discrete_action(&harmonic1(), &scalar_field(&g, |_, _| 3.0)).unwrap(), 0.0);
        let a = discrete_action(&harmonic1(), &scalar_field(&g, |x, _| x)).unwrap();
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_field_is_discretely_harmonic() {
        let g = Grid::unit_square(6, 7).unwrap();
        let r = discrete_el_residual(&harmonic1(), &scalar_field(&g, |x, y| 2.0 * x - y + 1.0)).unwrap();
        assert!(max_abs(&r) < 1e-14);
        let zero = discrete_action_gradient(&harmonic1(), &scalar_field(&g, |_, _| -1.5)).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saddle_quadratic_is_discretely_harmonic() {
        for (nx, ny) in [(5, 5), (9, 6), (17, 17)] {
            let g = Grid::unit_square(nx, ny).unwrap();
            let r = discrete_el_residual(&harmonic1(), &scalar_field(&g, |x, y| x * x - y * y)).unwrap();
            assert!(max_abs(&r) < 1e-12);
        }
    }

    #[test]
    fn momenta_of_linear_field() {
        let g = Grid::unit_square(5, 5).unwrap();
        let p = boundary_momentum(&harmonic1(), &scalar_field(&g, |x, _| x)).unwrap();
        assert!(p.p1.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(p.p2.iter().all(|&v| v.abs() < 1e-14));
        let c = boundary_momentum(&harmonic1(), &scalar_field(&g, |_, _| 2.0)).unwrap();
        assert!(c.p1.iter().chain(&c.p2).all(|&v| v == 0.0));
    }

    #[test]
    fn nambu_inadmissible_cell_is_named() {
        let g = Grid::unit_square(4, 4).unwrap();
        let f = GridField::from_fn(g, 4, |x, _| Ok(vec![x, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(discrete_action(&nambu_lagrangian(), &f).unwrap_err(), Error::InadmissibleCell { i: 0, j: 0 });
    }

    #[test]
    fn harmonic_dirichlet_one_step() {
        let g = Grid::unit_square(9, 9).unwrap();
        let exact = scalar_field(&g, |x, y| x * x - y * y);
        let mut init = GridField::zeros(g.clone(), 1);
        init.copy_nodes(&exact, NodeKind::Boundary);
        let bv = restrict(1, &exact.values, &g.boundary_nodes());
        let (sol, rep) = solve_dirichlet(&harmonic1(), &g, &bv, &init, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!(sol.values.iter().zip(&exact.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let g = Grid::unit_square(5, 5).unwrap();
        let init = GridField::zeros(g.clone(), 1);
        let bv = vec![1.0; g.boundary_nodes().len()];
        assert!(matches!(
            solve_dirichlet(&harmonic1(), &g, &bv, &init, &SolveOptions::default()),
            Err(Error::InvalidInput(_))
        ));
        assert!(solve_dirichlet(&harmonic1(), &g, &bv[1..], &init, &SolveOptions::default()).is_err());
    }
}
