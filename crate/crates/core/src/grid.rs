//! Cell-centred finite-volume meshes, fields over them, and the discrete
//! continuity-constraint operator `A u = rho + D m`.
//!
//! Momentum uses odd ghost reflection on every boundary (`m_0 = -m_1`), so the
//! face flux at the wall vanishes and the cell sum of `A u` equals the cell sum
//! of `rho`. All inner products are plain Euclidean sums over raw vectors;
//! quadrature weights live in the objective.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{invalid, Error, Result};

/// Uniform tensor-product mesh in one or two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    dx: f64,
    dy: f64,
    two_d: bool,
}

impl Grid {
    pub fn new_1d(nx: usize, a: f64, b: f64) -> Result<Self> {
        if nx < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells, got {nx}")));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidGrid(format!("bad interval [{a}, {b}]")));
        }
        Ok(Self {
            nx,
            ny: 1,
            x_range: (a, b),
            y_range: (0.0, 1.0),
            dx: (b - a) / nx as f64,
            dy: 1.0,
            two_d: false,
        })
    }

    pub fn new_2d(nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per direction, got {nx}x{ny}"
            )));
        }
        let (a, b) = x_range;
        let (c, d) = y_range;
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite() && b > a && d > c) {
            return Err(Error::InvalidGrid(format!(
                "bad rectangle [{a}, {b}] x [{c}, {d}]"
            )));
        }
        Ok(Self {
            nx,
            ny,
            x_range,
            y_range,
            dx: (b - a) / nx as f64,
            dy: (d - c) / ny as f64,
            two_d: true,
        })
    }

    pub fn dim(&self) -> usize {
        if self.two_d {
            2
        } else {
            1
        }
    }

    pub fn is_2d(&self) -> bool {
        self.two_d
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of cells in y; 1 for a 1D grid.
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Spacing in y; meaningless (1.0) for 1D grids.
    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    pub fn y_range(&self) -> (f64, f64) {
        self.y_range
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one cell (`dx` or `dx*dy`).
    pub fn cell_area(&self) -> f64 {
        if self.two_d {
            self.dx * self.dy
        } else {
            self.dx
        }
    }

    /// Measure of the domain, `|Omega|`.
    pub fn measure(&self) -> f64 {
        self.cell_area() * self.len() as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_range.0 + (i as f64 + 0.5) * self.dx
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y_range.0 + (j as f64 + 0.5) * self.dy
    }

    /// Flat index of cell `(i, j)`, row-major over `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Cell centre of flat index `k`; the y coordinate is 0 for 1D grids.
    pub fn center(&self, k: usize) -> (f64, f64) {
        let i = k / self.ny;
        let j = k % self.ny;
        let y = if self.two_d { self.y_center(j) } else { 0.0 };
        (self.x_center(i), y)
    }

    /// Number of momentum components per cell.
    pub fn momentum_components(&self) -> usize {
        self.dim()
    }

    /// Length of a flat primal vector `u = (rho, m_x[, m_y])`.
    pub fn state_len(&self) -> usize {
        self.len() * (1 + self.dim())
    }

    /// Calls `f(offset, stride, len)` for every grid line along `axis`.
    fn for_each_line(&self, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
        if axis == 0 {
            for j in 0..self.ny {
                f(j, self.ny, self.nx);
            }
        } else {
            for i in 0..self.nx {
                f(i * self.ny, 1, self.ny);
            }
        }
    }

    fn spacing(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.dx
        } else {
            self.dy
        }
    }
}

/// Cell-centred scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("field", format!("non-finite value at cell {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at cell centres (y = 0 on 1D grids).
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.center(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Quadrature of the field: `sum(values) * cell_area`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn check_grid(&self, grid: &Grid, what: &str) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch(format!("{what} lives on a different grid")));
        }
        Ok(())
    }
}

/// Primal unknown `u = (rho, m_x[, m_y])`, stored as one flat vector with
/// the density block first.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    grid: Grid,
    data: Vec<f64>,
}

impl State {
    pub fn new(rho: Field, mx: Field, my: Option<Field>) -> Result<Self> {
        let grid = *rho.grid();
        mx.check_grid(&grid, "m_x")?;
        let mut data = rho.into_values();
        data.extend_from_slice(mx.values());
        match (grid.is_2d(), my) {
            (true, Some(my)) => {
                my.check_grid(&grid, "m_y")?;
                data.extend_from_slice(my.values());
            }
            (false, None) => {}
            (true, None) => {
                return Err(Error::GridMismatch("2D state needs an m_y component".into()))
            }
            (false, Some(_)) => {
                return Err(Error::GridMismatch("1D state takes no m_y component".into()))
            }
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.state_len()],
        }
    }

    /// `(rho, 0, ...)`: the initial primal guess of an inner solve.
    pub fn from_density(rho: &Field) -> Self {
        let grid = *rho.grid();
        let mut data = vec![0.0; grid.state_len()];
        data[..grid.len()].copy_from_slice(rho.values());
        Self { grid, data }
    }

    pub(crate) fn from_raw(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.state_len());
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.data[..self.grid.len()]
    }

    pub fn mx(&self) -> &[f64] {
        let n = self.grid.len();
        &self.data[n..2 * n]
    }

    pub fn my(&self) -> Option<&[f64]> {
        let n = self.grid.len();
        self.grid.is_2d().then(|| &self.data[2 * n..3 * n])
    }

    /// Momentum component `k` (0 = x, 1 = y).
    pub fn momentum(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[(k + 1) * n..(k + 2) * n]
    }

    pub fn rho_field(&self) -> Field {
        Field::from_raw(self.grid, self.rho().to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }
}

/// Largest-eigenvalue estimate with its convergence flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Scratch buffers for repeated `A A^t` solves.
#[derive(Clone, Debug)]
pub struct CgWorkspace {
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    z: Vec<f64>,
    scratch: Vec<f64>,
    dct: Vec<f64>,
}

impl CgWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        Self {
            r: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
            z: vec![0.0; n],
            scratch: vec![0.0; grid.state_len()],
            dct: Vec::new(),
        }
    }
}

pub const LANCZOS_MAX_ITERS: usize = 500;
pub const SOLVE_REL_TOL: f64 = 1e-10;

/// The linear constraint `A u = (I - c L_N) rho + D m`.
///
/// `c = 0` gives the plain continuity constraint; `c = tau/eta` adds the
/// Schrödinger-bridge diffusion with a homogeneous-Neumann Laplacian `L_N`.
#[derive(Clone, Debug)]
pub struct ConstraintOperator {
    grid: Grid,
    diffusion: f64,
    lambda_max: OnceLock<SpectralEstimate>,
    basis: OnceLock<CosineBasis>,
}

impl ConstraintOperator {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            diffusion: 0.0,
            lambda_max: OnceLock::new(),
            basis: OnceLock::new(),
        }
    }

    pub fn with_diffusion(grid: Grid, diffusion: f64) -> Result<Self> {
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(invalid("diffusion", format!("must be finite and >= 0, got {diffusion}")));
        }
        Ok(Self {
            grid,
            diffusion,
            lambda_max: OnceLock::new(),
            basis: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn apply(&self, u: &State) -> Result<Field> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch("state lives on a different grid".into()));
        }
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(u.as_slice(), &mut out);
        Ok(Field::from_raw(self.grid, out))
    }

    pub fn adjoint(&self, phi: &Field) -> Result<State> {
        phi.check_grid(&self.grid, "dual field")?;
        let mut out = vec![0.0; self.grid.state_len()];
        self.adjoint_into(phi.values(), &mut out);
        Ok(State::from_raw(self.grid, out))
    }

    /// `out = A u` on raw slices.
    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.len();
        out.copy_from_slice(&u[..n]);
        if self.diffusion > 0.0 {
            for axis in 0..g.dim() {
                let scale = -self.diffusion / g.spacing(axis).powi(2);
                g.for_each_line(axis, |off, stride, len| {
                    neumann_laplacian_add(&u[..n], out, off, stride, len, scale)
                });
            }
        }
        for axis in 0..g.dim() {
            let m = &u[(axis + 1) * n..(axis + 2) * n];
            let coef = 0.5 / g.spacing(axis);
            g.for_each_line(axis, |off, stride, len| {
                central_diff_odd_add(m, out, off, stride, len, coef)
            });
        }
    }

    /// `out = A^t phi` on raw slices.
    pub(crate) fn adjoint_into(&self, phi: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.len();
        out.fill(0.0);
        out[..n].copy_from_slice(phi);
        if self.diffusion > 0.0 {
            let (rho_block, _) = out.split_at_mut(n);
            for axis in 0..g.dim() {
                let scale = -self.diffusion / g.spacing(axis).powi(2);
                g.for_each_line(axis, |off, stride, len| {
                    neumann_laplacian_add(phi, rho_block, off, stride, len, scale)
                });
            }
        }
        for axis in 0..g.dim() {
            let block = &mut out[(axis + 1) * n..(axis + 2) * n];
            let coef = 0.5 / g.spacing(axis);
            g.for_each_line(axis, |off, stride, len| {
                central_diff_adjoint_add(phi, block, off, stride, len, coef)
            });
        }
    }

    /// `out = A A^t v`; `scratch` must hold a full primal vector.
    pub(crate) fn apply_aat_into(&self, v: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.adjoint_into(v, scratch);
        self.apply_into(scratch, out);
    }

    /// `lambda_max(A A^t)`, computed once per operator and cached.
    ///
    /// Lanczos on `v -> A(A^t v)` started from all-ones plus a fixed
    /// low-discrepancy perturbation; the top Ritz value is extracted by Sturm
    /// bisection on the tridiagonal.
    pub fn lambda_max(&self) -> SpectralEstimate {
        *self.lambda_max.get_or_init(|| self.lanczos_lambda_max(LANCZOS_MAX_ITERS))
    }

    fn lanczos_lambda_max(&self, max_iters: usize) -> SpectralEstimate {
        let n = self.grid.len();
        let mut q: Vec<f64> = (0..n)
            .map(|k| {
                let frac = (k as f64 * 0.618_033_988_749_894_9 + 0.1).fract();
                1.0 + (frac - 0.5)
            })
            .collect();
        let norm = dot(&q, &q).sqrt();
        q.iter_mut().for_each(|v| *v /= norm);
        let mut q_prev = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut scratch = vec![0.0; self.grid.state_len()];

        let mut diag = Vec::new();
        let mut off = Vec::new();
        let mut beta_prev = 0.0;
        let mut ritz = 0.0;
        let mut stable = 0;
        for k in 0..max_iters.min(n) {
            self.apply_aat_into(&q, &mut w, &mut scratch);
            let alpha = dot(&q, &w);
            for i in 0..n {
                w[i] -= alpha * q[i] + beta_prev * q_prev[i];
            }
            let beta = dot(&w, &w).sqrt();
            diag.push(alpha);
            let next = tridiagonal_max_eigenvalue(&diag, &off);
            if k > 0 && (next - ritz).abs() <= 1e-13 * next.abs() {
                stable += 1;
            } else {
                stable = 0;
            }
            ritz = next;
            if stable >= 3 || beta <= 1e-13 * ritz.abs() {
                return SpectralEstimate {
                    value: ritz,
                    iterations: k + 1,
                    converged: true,
                };
            }
            off.push(beta);
            std::mem::swap(&mut q_prev, &mut q);
            for i in 0..n {
                q[i] = w[i] / beta;
            }
            beta_prev = beta;
        }
        SpectralEstimate {
            value: ritz,
            iterations: max_iters.min(n),
            // A full-dimension Krylov space is exact.
            converged: n <= max_iters,
        }
    }

    /// Solves `(scale * A A^t) x = rhs`.
    pub fn solve_aat(&self, rhs: &Field, scale: f64) -> Result<Field> {
        rhs.check_grid(&self.grid, "right-hand side")?;
        let mut x = vec![0.0; self.grid.len()];
        let mut ws = CgWorkspace::new(&self.grid);
        self.solve_aat_into(rhs.values(), scale, &mut x, &mut ws)?;
        Ok(Field::from_raw(self.grid, x))
    }

    /// Eigenvalues of `A A^t` in the cosine basis, ordered like the cells.
    pub fn spectrum(&self) -> Vec<f64> {
        self.basis().eigenvalues.clone()
    }

    fn basis(&self) -> &CosineBasis {
        self.basis.get_or_init(|| CosineBasis::new(&self.grid, self.diffusion))
    }

    /// Preconditioned conjugate gradients on `scale * A A^t`, warm-started
    /// from `x`. Returns the number of iterations used.
    ///
    /// The preconditioner is the cosine-transform diagonalisation of `A A^t`;
    /// it is exact up to roundoff, so one or two iterations usually suffice,
    /// while the residual is always checked against the stencil operator.
    pub(crate) fn solve_aat_into(
        &self,
        rhs: &[f64],
        scale: f64,
        x: &mut [f64],
        ws: &mut CgWorkspace,
    ) -> Result<usize> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", format!("must be positive, got {scale}")));
        }
        let n = rhs.len();
        let rhs_norm = dot(rhs, rhs).sqrt();
        if rhs_norm == 0.0 {
            x.fill(0.0);
            return Ok(0);
        }
        let basis = self.basis();
        let target = SOLVE_REL_TOL * rhs_norm;
        let cap = 10 * n;
        if ws.dct.len() < basis.scratch_len() {
            ws.dct.resize(basis.scratch_len(), 0.0);
        }
        let CgWorkspace { r, p, ap, z, scratch, dct } = ws;
        let mut iters = 0;
        // Outer loop re-anchors on the true residual so the recurrence cannot
        // report a convergence it has not reached.
        loop {
            self.apply_aat_into(x, ap, scratch);
            for i in 0..n {
                r[i] = rhs[i] - scale * ap[i];
            }
            let res = dot(r, r).sqrt();
            if res <= target {
                return Ok(iters);
            }
            if iters >= cap {
                return Err(Error::SolveNotConverged {
                    iterations: iters,
                    residual: res / rhs_norm,
                });
            }
            basis.solve(r, z, scale, dct);
            p.copy_from_slice(z);
            let mut rz = dot(r, z);
            while iters < cap {
                self.apply_aat_into(p, ap, scratch);
                ap.iter_mut().for_each(|v| *v *= scale);
                let pap = dot(p, ap);
                if !(pap > 0.0) {
                    return Err(Error::SolveNotConverged {
                        iterations: iters,
                        residual: dot(r, r).sqrt() / rhs_norm,
                    });
                }
                let step = rz / pap;
                for i in 0..n {
                    x[i] += step * p[i];
                    r[i] -= step * ap[i];
                }
                iters += 1;
                if dot(r, r).sqrt() <= 0.5 * target {
                    break;
                }
                basis.solve(r, z, scale, dct);
                let rz_new = dot(r, z);
                let ratio = rz_new / rz;
                for i in 0..n {
                    p[i] = z[i] + ratio * p[i];
                }
                rz = rz_new;
            }
        }
    }
}

/// DCT-II along each axis together with the eigenvalues of `A A^t` it
/// diagonalises: `(1 + c sum_a 4 sin^2(pi p_a / 2 n_a) / h_a^2)^2
/// + sum_a sin^2(pi p_a / n_a) / h_a^2`.
#[derive(Clone)]
struct CosineBasis {
    nx: usize,
    ny: usize,
    plan_x: Arc<dyn TransformType2And3<f64>>,
    plan_y: Option<Arc<dyn TransformType2And3<f64>>>,
    eigenvalues: Vec<f64>,
    /// Undoes the unnormalised DCT-III after DCT-II round trip.
    norm: f64,
}

impl fmt::Debug for CosineBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CosineBasis").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

impl CosineBasis {
    fn new(grid: &Grid, diffusion: f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let axis = |n: usize, h: f64| -> Vec<(f64, f64)> {
            (0..n)
                .map(|p| {
                    let lap = 4.0 * (PI * p as f64 / (2.0 * n as f64)).sin().powi(2) / (h * h);
                    let wide = (PI * p as f64 / n as f64).sin().powi(2) / (h * h);
                    (lap, wide)
                })
                .collect()
        };
        let ex = axis(nx, grid.dx);
        let ey = if grid.is_2d() { axis(ny, grid.dy) } else { vec![(0.0, 0.0)] };
        let mut eigenvalues = vec![0.0; grid.len()];
        for (p, &(lx, wx)) in ex.iter().enumerate() {
            for (q, &(ly, wy)) in ey.iter().enumerate() {
                eigenvalues[p * ny + q] = (1.0 + diffusion * (lx + ly)).powi(2) + wx + wy;
            }
        }
        let mut planner = DctPlanner::new();
        let plan_y = (ny > 1).then(|| planner.plan_dct2(ny));
        let mut norm = 2.0 / nx as f64;
        if ny > 1 {
            norm *= 2.0 / ny as f64;
        }
        Self {
            nx,
            ny,
            plan_x: planner.plan_dct2(nx),
            plan_y,
            eigenvalues,
            norm,
        }
    }

    fn scratch_len(&self) -> usize {
        let plans = self.plan_x.get_scratch_len().max(self.plan_y.as_ref().map_or(0, |p| p.get_scratch_len()));
        self.nx * self.ny + plans
    }

    /// `out = (scale * A A^t)^{-1} r`; `scratch` needs `scratch_len()` entries.
    fn solve(&self, r: &[f64], out: &mut [f64], scale: f64, scratch: &mut [f64]) {
        out.copy_from_slice(r);
        self.transform(out, scratch, false);
        let factor = self.norm / scale;
        for (v, e) in out.iter_mut().zip(&self.eigenvalues) {
            *v *= factor / e;
        }
        self.transform(out, scratch, true);
    }

    /// In-place separable DCT-II, or DCT-III when `inverse`.
    fn transform(&self, data: &mut [f64], scratch: &mut [f64], inverse: bool) {
        let (nx, ny) = (self.nx, self.ny);
        let (work, plan_scratch) = scratch.split_at_mut(nx * ny);
        let run = |plan: &Arc<dyn TransformType2And3<f64>>, line: &mut [f64], s: &mut [f64]| {
            if inverse {
                plan.process_dct3_with_scratch(line, s);
            } else {
                plan.process_dct2_with_scratch(line, s);
            }
        };
        if let Some(plan_y) = &self.plan_y {
            for line in data.chunks_exact_mut(ny) {
                run(plan_y, line, plan_scratch);
            }
        }
        if ny == 1 {
            run(&self.plan_x, data, plan_scratch);
            return;
        }
        for i in 0..nx {
            for j in 0..ny {
                work[j * nx + i] = data[i * ny + j];
            }
        }
        for line in work.chunks_exact_mut(nx) {
            run(&self.plan_x, line, plan_scratch);
        }
        for i in 0..nx {
            for j in 0..ny {
                data[i * ny + j] = work[j * nx + i];
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[k] += coef * (m[k+1] - m[k-1])` along one line, odd ghosts.
fn central_diff_odd_add(m: &[f64], out: &mut [f64], off: usize, stride: usize, len: usize, coef: f64) {
    let at = |k: usize| off + k * stride;
    for k in 0..len {
        let left = if k == 0 { -m[at(0)] } else { m[at(k - 1)] };
        let right = if k + 1 == len { -m[at(len - 1)] } else { m[at(k + 1)] };
        out[at(k)] += coef * (right - left);
    }
}

/// Transpose of [`central_diff_odd_add`]: even ghosts, reversed difference.
fn central_diff_adjoint_add(
    phi: &[f64],
    out: &mut [f64],
    off: usize,
    stride: usize,
    len: usize,
    coef: f64,
) {
    let at = |k: usize| off + k * stride;
    for k in 0..len {
        let left = if k == 0 { phi[at(0)] } else { phi[at(k - 1)] };
        let right = if k + 1 == len { phi[at(len - 1)] } else { phi[at(k + 1)] };
        out[at(k)] += coef * (left - right);
    }
}

/// `out[k] += scale * (v[k+1] - 2 v[k] + v[k-1])`, even ghosts.
fn neumann_laplacian_add(v: &[f64], out: &mut [f64], off: usize, stride: usize, len: usize, scale: f64) {
    let at = |k: usize| off + k * stride;
    for k in 0..len {
        let c = v[at(k)];
        let left = if k == 0 { c } else { v[at(k - 1)] };
        let right = if k + 1 == len { c } else { v[at(k + 1)] };
        out[at(k)] += scale * (right - 2.0 * c + left);
    }
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off.len() >= diag.len() - 1`).
fn tridiagonal_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let k = diag.len();
    let offd = |i: usize| if i < off.len() { off[i].abs() } else { 0.0 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let radius = if i > 0 { offd(i - 1) } else { 0.0 } + if i + 1 < k { offd(i) } else { 0.0 };
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    // Number of eigenvalues strictly below x (Sturm sequence).
    let count_below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let b2 = if i > 0 { offd(i - 1).powi(2) } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) < k {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
