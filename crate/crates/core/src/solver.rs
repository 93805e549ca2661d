//! Damped-Newton continuation for the discrete Dirichlet problem.
//!
//! Starting point is an admissible subsolution `ub` with `ub = phi` on the
//! boundary and `G(Ub) >= rhs` in the interior. The homotopy interpolates the
//! right-hand side,
//!
//! ```text
//! beta_t(x) = (1 - t) * G(Ub(x)) + t * rhs(x),
//! ```
//!
//! so `t = 0` is solved exactly by `ub` and `t = 1` is the target equation.
//! Each stage runs a damped Newton iteration on `R(u) = G(U[u]) - beta_t`:
//! the linearization is `G^{ij} d_ij + (G : chi_p_s) d_s + (G : chi_z)`,
//! assembled row-by-row over interior nodes with identity rows on the
//! boundary, and steps are accepted only if every node stays admissible with
//! margin `tau = tau_coeff * (1 + ||U||_F)` and the max-residual contracts by
//! the Armijo factor `(1 - beta * s)`. Stage failures halve the continuation
//! step down to a floor.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::chi::ChiSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{GridBox, GridFunction};
use crate::linsolve::{self, CsrMatrix, KrylovOpts};
use crate::operator::{self, OperatorParams};
use crate::spectral::{self, SymTensor};

/// Scalar coefficient field: how configs and callers describe `phi`, `rhs`,
/// variable `alpha_l`, and subsolutions.
#[derive(Clone)]
pub enum ScalarField {
    Const(f64),
    Expr(Expr),
    Grid(GridFunction),
    Closure(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Const(c) => write!(f, "Const({c})"),
            ScalarField::Expr(e) => write!(f, "Expr({:?})", e.source()),
            ScalarField::Grid(g) => write!(f, "Grid({:?} nodes)", g.values().len()),
            ScalarField::Closure(_) => write!(f, "Closure"),
        }
    }
}

impl ScalarField {
    pub fn expr(src: &str) -> Result<Self> {
        Ok(ScalarField::Expr(Expr::parse(src)?))
    }

    pub fn closure(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Closure(Arc::new(f))
    }

    /// Samples onto a grid. `Grid` fields must already live on that grid.
    pub fn sample(&self, grid: &GridBox) -> Result<GridFunction> {
        match self {
            ScalarField::Const(c) => GridFunction::constant(grid.clone(), *c),
            ScalarField::Expr(e) => {
                if e.max_coord() > grid.dim() {
                    return Err(Error::InvalidInput(format!(
                        "expression {:?} references x{} but the grid is {}-dimensional",
                        e.source(),
                        e.max_coord(),
                        grid.dim()
                    )));
                }
                GridFunction::from_fn(grid.clone(), |x| e.eval(x))
            }
            ScalarField::Grid(g) => {
                if g.grid() != grid {
                    return Err(Error::GridMismatch(
                        "sampled field lives on a different grid".into(),
                    ));
                }
                Ok(g.clone())
            }
            ScalarField::Closure(f) => GridFunction::from_fn(grid.clone(), |x| f(x)),
        }
    }

    /// Pointwise evaluation at an arbitrary point (not available for
    /// grid-sampled fields).
    pub fn eval_at(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalarField::Const(c) => Ok(*c),
            ScalarField::Expr(e) => Ok(e.eval(x)),
            ScalarField::Closure(f) => Ok(f(x)),
            ScalarField::Grid(_) => Err(Error::InvalidInput(
                "grid-sampled fields cannot be evaluated off-grid".into(),
            )),
        }
    }
}

/// Tunables for the Newton/continuation stack. Defaults match the documented
/// behavior; everything is overridable.
#[derive(Debug, Clone)]
pub struct SolverOpts {
    /// Max-norm residual target per stage.
    pub tol_newton: f64,
    /// Newton iteration cap per stage.
    pub max_newton_iters: usize,
    /// Line-search halving budget.
    pub max_halvings: usize,
    /// Armijo contraction coefficient: accept when the residual drops by at
    /// least the factor `(1 - armijo_beta * s)`.
    pub armijo_beta: f64,
    /// Initial continuation step.
    pub dt: f64,
    /// Floor for the continuation step; going below aborts the solve.
    pub dt_min: f64,
    /// Admissibility margin coefficient: `tau = tau_coeff * (1 + ||U||_F)`.
    pub tau_coeff: f64,
    /// Iterative linear solver settings.
    pub krylov: KrylovOpts,
    /// Systems at most this large use the dense direct path.
    pub dense_threshold: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            tol_newton: 1e-10,
            max_newton_iters: 50,
            max_halvings: 30,
            armijo_beta: 1e-4,
            dt: 0.1,
            dt_min: 1e-4,
            tau_coeff: 1e-10,
            krylov: KrylovOpts::default(),
            dense_threshold: 4000,
        }
    }
}

impl SolverOpts {
    fn validate(&self) -> Result<()> {
        if !(self.tol_newton > 0.0 && self.tol_newton.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tol_newton must be positive, got {}",
                self.tol_newton
            )));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "dt must lie in (0, 1], got {}",
                self.dt
            )));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt) {
            return Err(Error::InvalidInput(format!(
                "dt_min must lie in (0, dt], got {}",
                self.dt_min
            )));
        }
        if !(self.tau_coeff >= 0.0 && self.tau_coeff.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tau_coeff must be nonnegative, got {}",
                self.tau_coeff
            )));
        }
        if !(self.armijo_beta > 0.0 && self.armijo_beta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "armijo_beta must lie in (0, 1), got {}",
                self.armijo_beta
            )));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidInput("max_newton_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Complete description of one Dirichlet problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub grid: GridBox,
    pub k: usize,
    /// Lower-order coefficient fields `alpha_0 .. alpha_{k-2}`.
    pub alphas: Vec<ScalarField>,
    /// Right-hand side `alpha_{k-1}`.
    pub rhs: ScalarField,
    /// Dirichlet data `phi`.
    pub boundary: ScalarField,
    pub chi: ChiSpec,
    /// Admissible subsolution with `subsolution = phi` on the boundary.
    pub subsolution: ScalarField,
    /// Slack allowed in the discrete subsolution inequality
    /// `G(Ub) >= rhs - slack`. The default `1e-12` demands an essentially
    /// exact subsolution; manufactured problems with non-polynomial solutions
    /// widen it by their measured discretization deficit.
    pub subsolution_slack: f64,
    /// Known solution for error reporting, when one exists.
    pub reference: Option<ScalarField>,
    pub opts: SolverOpts,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        grid: GridBox,
        k: usize,
        alphas: Vec<ScalarField>,
        rhs: ScalarField,
        boundary: ScalarField,
        chi: ChiSpec,
        subsolution: ScalarField,
    ) -> Self {
        Self {
            name: name.into(),
            grid,
            k,
            alphas,
            rhs,
            boundary,
            chi,
            subsolution,
            subsolution_slack: 1e-12,
            reference: None,
            opts: SolverOpts::default(),
        }
    }
}

/// One Newton iteration as logged.
#[derive(Debug, Clone, Serialize)]
pub struct NewtonIterRecord {
    pub t: f64,
    pub iter: usize,
    pub residual: f64,
    pub step: f64,
    pub min_sigma_margin: f64,
    pub wall_ms: f64,
}

/// One accepted continuation stage.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuationRecord {
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub min_sigma_margin: f64,
}

/// Result of a completed continuation run.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: GridFunction,
    pub records: Vec<ContinuationRecord>,
    pub newton_log: Vec<NewtonIterRecord>,
    /// `max_nodes (ub - u)`: positive values mean the solution dips below
    /// the subsolution somewhere.
    pub comparison_worst: f64,
    /// Discrete comparison heuristic: `u >= ub - 10 * tol` everywhere. Only
    /// advisory; the discrete scheme carries no maximum-principle guarantee.
    pub comparison_ok: bool,
    /// Max nodal error against the reference field, when one was supplied.
    pub max_error: Option<f64>,
    /// Whether the coefficients sit in the strictly-positive regime the
    /// sharper theory assumes.
    pub strict_regime: bool,
}

impl SolveOutcome {
    pub fn total_newton_iters(&self) -> usize {
        self.records.iter().map(|r| r.newton_iters).sum()
    }
}

enum ResidualEval {
    Admissible {
        norm: f64,
        min_sigma: f64,
    },
    Inadmissible {
        count: usize,
        index: Vec<usize>,
        order: usize,
        value: f64,
    },
}

/// Continuation solver instance: validated, pre-sampled problem data.
///
/// One solve per instance at a time (`solve` takes `&mut self`); build a new
/// instance (cheap relative to a solve) for concurrent runs.
pub struct Continuation {
    name: String,
    grid: GridBox,
    chi: ChiSpec,
    opts: SolverOpts,
    /// Per-node operator parameters (alphas may vary over the grid).
    params: Vec<OperatorParams>,
    rhs: GridFunction,
    phi: GridFunction,
    subsol: GridFunction,
    /// `G(Ub)` at interior nodes (zero on the boundary, never read there).
    g0: Vec<f64>,
    reference: Option<GridFunction>,
    strict_regime: bool,
}

impl std::fmt::Debug for Continuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Continuation")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .field("strict_regime", &self.strict_regime)
            .finish_non_exhaustive()
    }
}

impl Continuation {
    /// Samples all fields and enforces the problem invariants: parameter
    /// sanity, exact boundary agreement `ub = phi`, interior admissibility of
    /// the subsolution, and `G(Ub) >= rhs - slack`.
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.opts.validate()?;
        let grid = spec.grid.clone();
        let n = grid.dim();
        if spec.chi.dim() != n {
            return Err(Error::SpecViolation(format!(
                "chi has dimension {}, the grid has {n}",
                spec.chi.dim()
            )));
        }
        if spec.k < 2 || spec.k > n {
            return Err(Error::SpecViolation(format!(
                "k <= n required (and k >= 2): got k={}, n={n}",
                spec.k
            )));
        }
        if spec.alphas.len() != spec.k - 1 {
            return Err(Error::SpecViolation(format!(
                "k={} needs {} lower-order coefficients, got {}",
                spec.k,
                spec.k - 1,
                spec.alphas.len()
            )));
        }
        if !(spec.subsolution_slack >= 0.0 && spec.subsolution_slack.is_finite()) {
            return Err(Error::SpecViolation(format!(
                "subsolution_slack must be nonnegative, got {}",
                spec.subsolution_slack
            )));
        }

        let alpha_fields: Vec<GridFunction> = spec
            .alphas
            .iter()
            .map(|f| f.sample(&grid))
            .collect::<Result<_>>()?;
        let rhs = spec.rhs.sample(&grid)?;
        let phi = spec.boundary.sample(&grid)?;
        let subsol = spec.subsolution.sample(&grid)?;
        let reference = spec
            .reference
            .as_ref()
            .map(|f| f.sample(&grid))
            .transpose()?;

        // per-node parameters; OperatorParams::new re-validates nonnegativity
        let num_nodes = grid.num_nodes();
        let mut params = Vec::with_capacity(num_nodes);
        let mut strict_regime = spec.k >= 3;
        for lin in 0..num_nodes {
            let alphas: Vec<f64> = alpha_fields.iter().map(|a| a.value_lin(lin)).collect();
            strict_regime &= alphas.iter().all(|&a| a > 0.0);
            params.push(OperatorParams::new(n, spec.k, alphas).map_err(|e| {
                Error::SpecViolation(format!(
                    "coefficients at node {:?}: {e}",
                    grid.multi_index(lin)
                ))
            })?);
        }

        // boundary agreement must be exact: the continuation starts from the
        // subsolution and Dirichlet rows pin its boundary values forever
        let mut mismatches = 0usize;
        let mut worst_dev = 0.0f64;
        for (lin, idx) in grid.indices().enumerate() {
            if grid.is_boundary(&idx) {
                let dev = (subsol.value_lin(lin) - phi.value_lin(lin)).abs();
                if subsol.value_lin(lin) != phi.value_lin(lin) {
                    mismatches += 1;
                    worst_dev = worst_dev.max(dev);
                }
            }
        }
        if mismatches > 0 {
            return Err(Error::SpecViolation(format!(
                "subsolution differs from boundary data at {mismatches} boundary node(s), worst |dev| = {worst_dev:.3e}"
            )));
        }

        // interior admissibility and the subsolution inequality
        let mut g0 = vec![0.0; num_nodes];
        let mut worst_deficit = 0.0f64;
        let mut deficit_nodes = 0usize;
        for (lin, idx) in grid.indices().enumerate() {
            if !grid.is_interior(&idx) {
                continue;
            }
            let u_tensor = subsol.assemble_u(&spec.chi, &idx)?;
            let value = match operator::eval_g_with_margin(&u_tensor, &params[lin], 0.0) {
                Ok(eval) => eval.value,
                Err(Error::ConeViolation { order, value, .. }) => {
                    return Err(Error::SpecViolation(format!(
                        "subsolution inadmissible at node {idx:?}: sigma_{order} = {value:.6e}"
                    )));
                }
                Err(e) => return Err(e),
            };
            g0[lin] = value;
            let deficit = rhs.value_lin(lin) - value;
            if deficit > spec.subsolution_slack {
                deficit_nodes += 1;
                worst_deficit = worst_deficit.max(deficit);
            }
        }
        if deficit_nodes > 0 {
            return Err(Error::SpecViolation(format!(
                "subsolution inequality G(Ub) >= rhs - {:.1e} fails at {deficit_nodes} node(s), worst deficit {worst_deficit:.6e}",
                spec.subsolution_slack
            )));
        }

        Ok(Self {
            name: spec.name.clone(),
            grid,
            chi: spec.chi.clone(),
            opts: spec.opts.clone(),
            params,
            rhs,
            phi,
            subsol,
            g0,
            reference,
            strict_regime,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &GridBox {
        &self.grid
    }

    pub fn subsolution(&self) -> &GridFunction {
        &self.subsol
    }

    pub fn boundary_data(&self) -> &GridFunction {
        &self.phi
    }

    fn target_at(&self, lin: usize, t: f64) -> f64 {
        (1.0 - t) * self.g0[lin] + t * self.rhs.value_lin(lin)
    }

    fn tau_for(&self, u_tensor: &SymTensor) -> f64 {
        self.opts.tau_coeff * (1.0 + u_tensor.frobenius_norm())
    }

    /// Residual `G(U[u]) - beta_t` with admissibility screening; used both
    /// for convergence checks and line-search probes.
    fn residual_eval(&self, u: &GridFunction, t: f64) -> Result<ResidualEval> {
        let mut norm = 0.0f64;
        let mut min_sigma = f64::INFINITY;
        let mut bad: Option<(Vec<usize>, usize, f64)> = None;
        let mut bad_count = 0usize;
        for (lin, idx) in self.grid.indices().enumerate() {
            if !self.grid.is_interior(&idx) {
                continue;
            }
            let u_tensor = u.assemble_u(&self.chi, &idx)?;
            let tau = self.tau_for(&u_tensor);
            match operator::eval_g_with_margin(&u_tensor, &self.params[lin], tau) {
                Ok(eval) => {
                    let r = eval.value - self.target_at(lin, t);
                    norm = norm.max(r.abs());
                    min_sigma = min_sigma.min(eval.sigma_km1);
                }
                Err(Error::ConeViolation { order, value, .. }) => {
                    bad_count += 1;
                    if bad.is_none() || value < bad.as_ref().expect("set").2 {
                        bad = Some((idx.clone(), order, value));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if let Some((index, order, value)) = bad {
            return Ok(ResidualEval::Inadmissible {
                count: bad_count,
                index,
                order,
                value,
            });
        }
        Ok(ResidualEval::Admissible { norm, min_sigma })
    }

    /// Assembles the linearized operator and the residual at `u` for stage
    /// `t`. Boundary rows are identity with zero residual; interior rows
    /// combine the Hessian stencil weighted by `G^{ij}`, gradient stencils
    /// weighted by `G : chi_{p_s}`, and the zeroth-order `G : chi_z` term.
    pub fn linearize(&self, u: &GridFunction, t: f64) -> Result<(CsrMatrix, Vec<f64>)> {
        let n = self.grid.dim();
        let num_nodes = self.grid.num_nodes();
        let strides = self.grid.strides().to_vec();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(num_nodes);
        let mut residual = vec![0.0; num_nodes];
        let mut bad: Option<(Vec<usize>, usize, f64)> = None;
        let mut bad_count = 0usize;

        for (lin, idx) in self.grid.indices().enumerate() {
            if !self.grid.is_interior(&idx) {
                rows.push(vec![(lin, 1.0)]);
                continue;
            }
            let u_tensor = u.assemble_u(&self.chi, &idx)?;
            let tau = self.tau_for(&u_tensor);
            let eval = match operator::eval_g_with_margin(&u_tensor, &self.params[lin], tau) {
                Ok(eval) => eval,
                Err(Error::ConeViolation { order, value, .. }) => {
                    bad_count += 1;
                    if bad.is_none() || value < bad.as_ref().expect("set").2 {
                        bad = Some((idx.clone(), order, value));
                    }
                    rows.push(vec![(lin, 1.0)]);
                    continue;
                }
                Err(e) => return Err(e),
            };
            residual[lin] = eval.value - self.target_at(lin, t);

            let g = &eval.gradient;
            let (chi_z_dot, chi_p_dot) = if self.chi.is_zero() {
                (0.0, vec![0.0; n])
            } else {
                let x = self.grid.point(&idx);
                let z = u.value_lin(lin);
                let p = u.gradient_at(&idx)?;
                let dz = self.chi.dz(&x, z, &p)?;
                let dp = self.chi.dp(&x, z, &p)?;
                (
                    g.double_dot(&dz),
                    dp.iter().map(|d| g.double_dot(d)).collect(),
                )
            };

            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * n * n + 1);
            let mut center = chi_z_dot;
            for a in 0..n {
                let ha = self.grid.spacing(a);
                let gaa = g.get(a, a);
                center -= 2.0 * gaa / (ha * ha);
                let first = chi_p_dot[a] / (2.0 * ha);
                row.push((lin + strides[a], gaa / (ha * ha) + first));
                row.push((lin - strides[a], gaa / (ha * ha) - first));
                for b in (a + 1)..n {
                    let hb = self.grid.spacing(b);
                    // both symmetric entries of U move together: factor 2
                    let w = 2.0 * g.get(a, b) / (4.0 * ha * hb);
                    row.push((lin + strides[a] + strides[b], w));
                    row.push((lin - strides[a] - strides[b], w));
                    row.push((lin + strides[a] - strides[b], -w));
                    row.push((lin - strides[a] + strides[b], -w));
                }
            }
            row.push((lin, center));
            rows.push(row);
        }

        if let Some((index, order, value)) = bad {
            return Err(Error::InadmissibleNodes {
                count: bad_count,
                index,
                order,
                value,
            });
        }
        Ok((CsrMatrix::from_rows(num_nodes, rows)?, residual))
    }

    fn solve_linear(&self, matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        if matrix.n() <= self.opts.dense_threshold {
            linsolve::lu_solve(matrix, rhs)
        } else {
            let (x, _stats) = linsolve::gmres(matrix, rhs, &self.opts.krylov)?;
            Ok(x)
        }
    }

    /// One continuation stage: damped Newton from `u0` toward the stage-`t`
    /// target. Returns the converged iterate, its log, the final residual,
    /// and the final `min sigma_{k-1}` margin.
    pub fn newton_solve(
        &self,
        u0: &GridFunction,
        t: f64,
    ) -> Result<(GridFunction, Vec<NewtonIterRecord>, f64, f64)> {
        let start = Instant::now();
        let mut u = u0.clone();
        let (mut res_norm, mut min_sigma) = match self.residual_eval(&u, t)? {
            ResidualEval::Admissible { norm, min_sigma, .. } => (norm, min_sigma),
            ResidualEval::Inadmissible {
                count,
                index,
                order,
                value,
            } => {
                return Err(Error::InadmissibleNodes {
                    count,
                    index,
                    order,
                    value,
                })
            }
        };
        let mut log = vec![NewtonIterRecord {
            t,
            iter: 0,
            residual: res_norm,
            step: 0.0,
            min_sigma_margin: min_sigma,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        }];

        let mut iter = 0usize;
        while res_norm > self.opts.tol_newton {
            if iter >= self.opts.max_newton_iters {
                return Err(Error::NewtonStalled {
                    iterations: iter,
                    residual: res_norm,
                });
            }
            let (matrix, residual) = self.linearize(&u, t)?;
            let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
            let mut delta = self.solve_linear(&matrix, &rhs)?;
            // keep Dirichlet values bit-exact: the boundary block is the
            // identity with zero rhs, so its true update is exactly zero
            for (lin, idx) in self.grid.indices().enumerate() {
                if self.grid.is_boundary(&idx) {
                    delta[lin] = 0.0;
                }
            }

            let mut accepted = false;
            let mut s = 1.0f64;
            for _ in 0..=self.opts.max_halvings {
                let trial = match u.updated(&delta, s) {
                    Ok(trial) => trial,
                    Err(_) => {
                        s *= 0.5;
                        continue;
                    }
                };
                match self.residual_eval(&trial, t)? {
                    ResidualEval::Admissible { norm, min_sigma: ms, .. }
                        if norm <= (1.0 - self.opts.armijo_beta * s) * res_norm =>
                    {
                        u = trial;
                        res_norm = norm;
                        min_sigma = ms;
                        accepted = true;
                        break;
                    }
                    _ => s *= 0.5,
                }
            }
            if !accepted {
                return Err(Error::LineSearchFailure {
                    iteration: iter,
                    step: s * 2.0,
                });
            }
            iter += 1;
            log.push(NewtonIterRecord {
                t,
                iter,
                residual: res_norm,
                step: s,
                min_sigma_margin: min_sigma,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        Ok((u, log, res_norm, min_sigma))
    }

    /// Runs the full continuation from the subsolution to `t = 1`.
    pub fn solve(&mut self) -> Result<SolveOutcome> {
        let mut u = self.subsol.clone();
        let mut records = Vec::new();
        let mut newton_log = Vec::new();

        // stage t = 0 is exact by construction; record it for the monitors
        let (res0, sigma0) = match self.residual_eval(&u, 0.0)? {
            ResidualEval::Admissible { norm, min_sigma, .. } => (norm, min_sigma),
            ResidualEval::Inadmissible { count, index, order, value } => {
                return Err(Error::InadmissibleNodes { count, index, order, value })
            }
        };
        let (c0, c1, c2) = u.norms()?;
        records.push(ContinuationRecord {
            t: 0.0,
            newton_iters: 0,
            residual: res0,
            c0,
            c1,
            c2,
            min_sigma_margin: sigma0,
        });

        let mut t = 0.0f64;
        let mut dt = self.opts.dt;
        while t < 1.0 {
            let t_next = if t + dt >= 1.0 - 1e-12 { 1.0 } else { t + dt };
            match self.newton_solve(&u, t_next) {
                Ok((u_next, log, residual, min_sigma)) => {
                    u = u_next;
                    let iters = log.len() - 1;
                    newton_log.extend(log);
                    let (c0, c1, c2) = u.norms()?;
                    records.push(ContinuationRecord {
                        t: t_next,
                        newton_iters: iters,
                        residual,
                        c0,
                        c1,
                        c2,
                        min_sigma_margin: min_sigma,
                    });
                    t = t_next;
                }
                Err(e) if e.is_solver_failure() || matches!(e, Error::InadmissibleNodes { .. }) => {
                    dt *= 0.5;
                    if dt < self.opts.dt_min {
                        return Err(Error::ContinuationFailure { t, dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }

        let comparison_worst = self
            .subsol
            .values()
            .iter()
            .zip(u.values())
            .fold(f64::NEG_INFINITY, |m, (s, v)| m.max(s - v));
        let comparison_ok = comparison_worst <= 10.0 * self.opts.tol_newton;
        let max_error = match &self.reference {
            Some(r) => Some(u.max_abs_diff(r)?),
            None => None,
        };
        Ok(SolveOutcome {
            solution: u,
            records,
            newton_log,
            comparison_worst,
            comparison_ok,
            max_error,
            strict_regime: self.strict_regime,
        })
    }
}

/// A manufactured solution: its value field plus optional analytic
/// derivatives. Missing derivatives fall back to fine central differences
/// (step `1e-3`), accurate far below discretization error.
#[derive(Clone)]
pub struct MmsSolution {
    pub value: ScalarField,
    pub gradient: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
    pub hessian: Option<Arc<dyn Fn(&[f64]) -> SymTensor + Send + Sync>>,
}

impl std::fmt::Debug for MmsSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MmsSolution")
            .field("value", &self.value)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

/// How the subsolution of a manufactured problem is chosen.
#[derive(Debug, Clone)]
pub enum MmsSubsolution {
    /// Use the manufactured solution itself (the equality case). Only exact
    /// when the discrete operator reproduces the analytic one, i.e. for
    /// quadratic solutions.
    ExactSolution,
    /// A user-supplied strict subsolution, held to the default slack.
    Strict(ScalarField),
    /// A user-supplied subsolution whose discrete deficit (analytic rhs vs
    /// discrete `G(Ub)`) is measured on the grid and folded into the slack.
    Measured(ScalarField),
}

const MMS_FD_STEP: f64 = 1e-3;

fn fd_gradient(value: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for (a, ga) in g.iter_mut().enumerate() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += MMS_FD_STEP;
        xm[a] -= MMS_FD_STEP;
        *ga = (value.eval_at(&xp)? - value.eval_at(&xm)?) / (2.0 * MMS_FD_STEP);
    }
    Ok(g)
}

fn fd_hessian(value: &ScalarField, x: &[f64]) -> Result<SymTensor> {
    let n = x.len();
    let h = MMS_FD_STEP;
    let f0 = value.eval_at(x)?;
    let mut out = SymTensor::zero(n)?;
    for a in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += h;
        xm[a] -= h;
        out.set(
            a,
            a,
            (value.eval_at(&xp)? - 2.0 * f0 + value.eval_at(&xm)?) / (h * h),
        );
        for b in (a + 1)..n {
            let mut xpp = x.to_vec();
            let mut xpm = x.to_vec();
            let mut xmp = x.to_vec();
            let mut xmm = x.to_vec();
            xpp[a] += h;
            xpp[b] += h;
            xpm[a] += h;
            xpm[b] -= h;
            xmp[a] -= h;
            xmp[b] += h;
            xmm[a] -= h;
            xmm[b] -= h;
            out.set(
                a,
                b,
                (value.eval_at(&xpp)? + value.eval_at(&xmm)?
                    - value.eval_at(&xpm)?
                    - value.eval_at(&xmp)?)
                    / (4.0 * h * h),
            );
        }
    }
    Ok(out)
}

/// Builds a manufactured problem: the right-hand side is `G` evaluated on
/// the *analytic* augmented Hessian of `u_star` (so the discrete solution
/// differs from `u_star` by discretization error), boundary data and
/// reference are `u_star` itself, and the subsolution is chosen per
/// [`MmsSubsolution`]. Admissibility of `u_star` is verified at every node
/// while the right-hand side is sampled.
pub fn mms_problem(
    name: impl Into<String>,
    u_star: &MmsSolution,
    chi: &ChiSpec,
    k: usize,
    alphas: Vec<f64>,
    grid: GridBox,
    subsolution: MmsSubsolution,
) -> Result<ProblemSpec> {
    let n = grid.dim();
    let params = OperatorParams::new(n, k, alphas.clone())?;
    if chi.dim() != n {
        return Err(Error::SpecViolation(format!(
            "chi has dimension {}, the grid has {n}",
            chi.dim()
        )));
    }

    // sample the analytic rhs, checking admissibility of u_star as we go
    let num_nodes = grid.num_nodes();
    let mut rhs_values = Vec::with_capacity(num_nodes);
    for lin in 0..num_nodes {
        let idx = grid.multi_index(lin);
        let x = grid.point(&idx);
        let mut u_tensor = match &u_star.hessian {
            Some(h) => h(&x),
            None => fd_hessian(&u_star.value, &x)?,
        };
        if !chi.is_zero() {
            let z = u_star.value.eval_at(&x)?;
            let p = match &u_star.gradient {
                Some(g) => g(&x),
                None => fd_gradient(&u_star.value, &x)?,
            };
            u_tensor.add_scaled(&chi.value(&x, z, &p)?, 1.0);
        }
        let dec = spectral::eigen(&u_tensor)?;
        let value = operator::eval_g_lambda(dec.eigenvalues().as_slice(), &params, 0.0)
            .map_err(|e| {
                Error::SpecViolation(format!(
                    "manufactured solution inadmissible at node {idx:?}: {e}"
                ))
            })?;
        rhs_values.push(value);
    }
    let rhs = GridFunction::from_values(grid.clone(), rhs_values)?;

    let (subsol_field, slack) = match subsolution {
        MmsSubsolution::ExactSolution => (u_star.value.clone(), 1e-12),
        MmsSubsolution::Strict(f) => (f, 1e-12),
        MmsSubsolution::Measured(f) => {
            // measure the discrete deficit of the candidate subsolution
            let sampled = f.sample(&grid)?;
            let mut deficit = 0.0f64;
            for idx in grid.interior_indices() {
                let u_tensor = sampled.assemble_u(chi, &idx)?;
                let value = match operator::eval_g_with_margin(&u_tensor, &params, 0.0) {
                    Ok(eval) => eval.value,
                    Err(Error::ConeViolation { order, value, .. }) => {
                        return Err(Error::SpecViolation(format!(
                            "candidate subsolution inadmissible at node {idx:?}: sigma_{order} = {value:.6e}"
                        )));
                    }
                    Err(e) => return Err(e),
                };
                deficit = deficit.max(rhs.value(&idx) - value);
            }
            (f, deficit.max(0.0) + 1e-12)
        }
    };

    let alphas_fields = alphas.into_iter().map(ScalarField::Const).collect();
    let mut spec = ProblemSpec::new(
        name,
        grid,
        k,
        alphas_fields,
        ScalarField::Grid(rhs),
        u_star.value.clone(),
        chi.clone(),
        subsol_field,
    );
    spec.subsolution_slack = slack;
    spec.reference = Some(u_star.value.clone());
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_grid(count: usize) -> GridBox {
        GridBox::cube(3, -1.0, 1.0, count).unwrap()
    }

    fn quadratic_spec(count: usize) -> ProblemSpec {
        // u* = |x|^2/2, rhs = G(I) computed by the same code path the solver
        // uses, subsolution = u* itself: every stage is exactly solved
        let params = OperatorParams::new(3, 3, vec![0.3, 0.1]).unwrap();
        let alpha2 = operator::eval_g_lambda(&[1.0, 1.0, 1.0], &params, 0.0).unwrap();
        let u_expr = ScalarField::expr("(x1^2+x2^2+x3^2)/2").unwrap();
        ProblemSpec::new(
            "constant-target",
            quadratic_grid(count),
            3,
            vec![ScalarField::Const(0.3), ScalarField::Const(0.1)],
            ScalarField::Const(alpha2),
            u_expr.clone(),
            ChiSpec::zero(3),
            u_expr,
        )
    }

    #[test]
    fn constant_target_needs_no_newton_steps() {
        let spec = quadratic_spec(5);
        let mut solver = Continuation::new(&spec).unwrap();
        let outcome = solver.solve().unwrap();
        // t = 0 plus ten stages of dt = 0.1
        assert_eq!(outcome.records.len(), 11);
        assert_eq!(outcome.records.last().unwrap().t, 1.0);
        assert_eq!(outcome.total_newton_iters(), 0);
        assert_eq!(outcome.records[0].residual, 0.0);
        assert!(outcome.comparison_ok);
        // the solution is untouched: still the subsolution
        assert_eq!(outcome.solution.values(), solver.subsolution().values());
    }

    #[test]
    fn quadratic_mms_recovers_exact_solution() {
        // strict subsolution below u*; central stencils are exact on both
        let u_star = MmsSolution {
            value: ScalarField::expr("(x1^2+x2^2+x3^2)/2").unwrap(),
            gradient: Some(Arc::new(|x: &[f64]| x.to_vec())),
            hessian: Some(Arc::new(|x: &[f64]| {
                SymTensor::identity(x.len()).unwrap()
            })),
        };
        let sub = ScalarField::expr(
            "(x1^2+x2^2+x3^2)/2 - 0.02*(1-x1^2)*(1-x2^2)*(1-x3^2)",
        )
        .unwrap();
        let spec = mms_problem(
            "quadratic",
            &u_star,
            &ChiSpec::zero(3),
            3,
            vec![0.3, 0.1],
            quadratic_grid(5),
            MmsSubsolution::Strict(sub),
        )
        .unwrap();
        assert_eq!(spec.subsolution_slack, 1e-12);
        let mut solver = Continuation::new(&spec).unwrap();
        let outcome = solver.solve().unwrap();
        assert_eq!(outcome.records.last().unwrap().t, 1.0);
        let err = outcome.max_error.unwrap();
        assert!(err <= 1e-8, "max error {err}");
        assert!(outcome.total_newton_iters() <= 40);
        assert!(outcome.strict_regime);
        // residual decreased below tolerance at every stage
        for rec in &outcome.records {
            assert!(rec.residual <= spec.opts.tol_newton);
            assert!(rec.min_sigma_margin > 0.0);
        }
    }

    #[test]
    fn boundary_mismatch_is_a_spec_error() {
        let mut spec = quadratic_spec(5);
        spec.subsolution = ScalarField::expr("(x1^2+x2^2+x3^2)/2 - 0.001").unwrap();
        match Continuation::new(&spec) {
            Err(Error::SpecViolation(msg)) => assert!(msg.contains("boundary")),
            other => panic!("expected spec violation, got {other:?}"),
        }
    }

    #[test]
    fn inadmissible_subsolution_is_a_spec_error() {
        let mut spec = quadratic_spec(5);
        // concave everywhere: nowhere near the cone
        spec.subsolution = ScalarField::expr("-(x1^2+x2^2+x3^2)/2").unwrap();
        spec.boundary = ScalarField::expr("-(x1^2+x2^2+x3^2)/2").unwrap();
        match Continuation::new(&spec) {
            Err(Error::SpecViolation(msg)) => assert!(msg.contains("inadmissible")),
            other => panic!("expected spec violation, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_rhs_is_a_spec_error() {
        let mut spec = quadratic_spec(5);
        spec.rhs = ScalarField::Const(10.0);
        match Continuation::new(&spec) {
            Err(Error::SpecViolation(msg)) => assert!(msg.contains("deficit")),
            other => panic!("expected spec violation, got {other:?}"),
        }
    }

    #[test]
    fn newton_rejects_inadmissible_start() {
        let spec = quadratic_spec(5);
        let solver = Continuation::new(&spec).unwrap();
        let bad = GridFunction::from_fn(spec.grid.clone(), |x| {
            -0.5 * x.iter().map(|v| v * v).sum::<f64>()
        })
        .unwrap();
        assert!(matches!(
            solver.newton_solve(&bad, 0.5),
            Err(Error::InadmissibleNodes { .. })
        ));
    }

    #[test]
    fn linearization_matches_directional_derivative() {
        // quadratic background with a z-coupled chi so every term is active
        let u_expr = ScalarField::expr("(x1^2+x2^2+x3^2)/2").unwrap();
        let grid = quadratic_grid(5);
        let chi = ChiSpec::linear_z(3, 0.5);
        let u_star = MmsSolution {
            value: u_expr,
            gradient: Some(Arc::new(|x: &[f64]| x.to_vec())),
            hessian: Some(Arc::new(|x: &[f64]| {
                SymTensor::identity(x.len()).unwrap()
            })),
        };
        let spec = mms_problem(
            "fd-oracle",
            &u_star,
            &chi,
            3,
            vec![0.3, 0.1],
            grid.clone(),
            MmsSubsolution::ExactSolution,
        )
        .unwrap();
        let solver = Continuation::new(&spec).unwrap();
        let u = solver.subsolution().clone();
        let (matrix, _residual) = solver.linearize(&u, 1.0).unwrap();

        // interior-supported smooth direction
        let delta = GridFunction::from_fn(grid.clone(), |x| {
            0.3 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 - x[2] * x[2]) * (1.0 + x[0])
        })
        .unwrap();
        let h = 1e-6;
        let up = u.updated(delta.values(), h).unwrap();
        let dn = u.updated(delta.values(), -h).unwrap();
        let (_, rp) = solver.linearize(&up, 1.0).unwrap();
        let (_, rm) = solver.linearize(&dn, 1.0).unwrap();
        let mut applied = vec![0.0; matrix.n()];
        matrix.matvec(delta.values(), &mut applied);
        let mut worst = 0.0f64;
        for lin in 0..matrix.n() {
            let idx = grid.multi_index(lin);
            if !grid.is_interior(&idx) {
                continue;
            }
            let fd = (rp[lin] - rm[lin]) / (2.0 * h);
            worst = worst.max((applied[lin] - fd).abs() / (1.0 + fd.abs()));
        }
        assert!(worst <= 1e-5, "worst relative deviation {worst}");
    }

    #[test]
    fn sampling_errors_are_reported() {
        let grid2 = GridBox::cube(2, 0.0, 1.0, 5).unwrap();
        let f = ScalarField::expr("x3").unwrap();
        assert!(f.sample(&grid2).is_err());

        let on_other = GridFunction::constant(GridBox::cube(2, 0.0, 2.0, 5).unwrap(), 1.0).unwrap();
        assert!(matches!(
            ScalarField::Grid(on_other).sample(&grid2),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn mms_rejects_inadmissible_manufactured_solution() {
        let u_star = MmsSolution {
            value: ScalarField::expr("-(x1^2+x2^2+x3^2)/2").unwrap(),
            gradient: None,
            hessian: None,
        };
        let res = mms_problem(
            "bad",
            &u_star,
            &ChiSpec::zero(3),
            3,
            vec![0.3, 0.1],
            quadratic_grid(5),
            MmsSubsolution::ExactSolution,
        );
        match res {
            Err(Error::SpecViolation(msg)) => assert!(msg.contains("inadmissible")),
            other => panic!("expected spec violation, got {other:?}"),
        }
    }

    #[test]
    fn solver_opts_validation() {
        let mut spec = quadratic_spec(5);
        spec.opts.dt = 0.0;
        assert!(Continuation::new(&spec).is_err());
        let mut spec = quadratic_spec(5);
        spec.opts.dt_min = 0.5;
        spec.opts.dt = 0.1;
        assert!(Continuation::new(&spec).is_err());
        let mut spec = quadratic_spec(5);
        spec.k = 5; // > n
        match Continuation::new(&spec) {
            Err(Error::SpecViolation(msg)) => assert!(msg.contains("k <= n")),
            other => panic!("expected spec violation, got {other:?}"),
        }
    }
}
