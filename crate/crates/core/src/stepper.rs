//! Hundsdorfer–Verwer ADI time stepping with compact implicit sweeps.
//!
//! One step from `U = U^{n−1}`:
//!
//! ```text
//! Y0 = U + Δt F(U)
//! Y1 = Y0 + φΔt (F1(Y1) − F1(U))        implicit in x
//! Y2 = Y1 + φΔt (F2(Y2) − F2(U))        implicit in y
//! Z0 = Y0 + ψΔt (F(Y2) − F(U))
//! Z1 = Z0 + φΔt (F1(Z1) − F1(Y2))       implicit in x
//! Z2 = Z1 + φΔt (F2(Z2) − F2(Y2))       implicit in y
//! U^n = Z2
//! ```
//!
//! Each implicit stage `W = V + s(F_k(W) − F_k(B))` is solved through the
//! compact relation `A(W − B) = B_op (W − V)/s`, i.e.
//! `(B_op − sA) W = B_op V − sA B`. The system matrices only depend on `s`,
//! so they are factored once per time-step size.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::banded::{factor, TridiagonalLU, TridiagonalMatrix};
use crate::error::{Error, Result};
use crate::grid::{GridField, TimeGrid, UniformGrid};
use crate::model::PdeModel;
use crate::operators::{
    assemble_compact_x, assemble_compact_y, extrapolate_y_boundary_cols, CompactRow, CompactX, CompactY, DirichletX,
    ExplicitOperator, GhostField, Parts, EXTRAPOLATION,
};

/// Splitting parameters `φ` (implicitness) and `ψ` (corrector weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiParams {
    pub phi: f64,
    pub psi: f64,
}

impl Default for AdiParams {
    fn default() -> Self {
        AdiParams { phi: 0.5, psi: 0.5 }
    }
}

impl AdiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "phi",
                value: self.phi,
                expected: "0 < phi <= 1",
            });
        }
        if !(self.psi.is_finite() && self.psi >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "psi",
                value: self.psi,
                expected: "psi >= 0 (1/2 for second order)",
            });
        }
        Ok(())
    }
}

/// Factored `(B − φΔt A)` systems for one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub dt: f64,
    /// One factorisation per interior row `j` (index `j − 1`).
    pub x: Vec<TridiagonalLU>,
    /// Shared by every interior column.
    pub y: TridiagonalLU,
    pub y_closure: YClosure,
}

/// Implicit treatment of the y-boundary rows: their values are tied to the
/// interior by the same extrapolation that is imposed after every stage, so
/// each y-system is the tridiagonal interior system plus two unknowns.
/// Those are eliminated through the responses `z_lo = T⁻¹e_first`,
/// `z_hi = T⁻¹e_last`.
#[derive(Debug, Clone, PartialEq)]
pub struct YClosure {
    c_lo: f64,
    c_hi: f64,
    z_lo: Vec<f64>,
    z_hi: Vec<f64>,
    /// Inverse of the 2×2 capacitance matrix, row major.
    inv: [f64; 4],
}

impl YClosure {
    fn new(y: &TridiagonalLU, c_lo: f64, c_hi: f64) -> Result<Self> {
        let len = y.len();
        let mut z_lo = vec![0.0; len];
        z_lo[0] = 1.0;
        y.solve_in_place(&mut z_lo)?;
        let mut z_hi = vec![0.0; len];
        z_hi[len - 1] = 1.0;
        y.solve_in_place(&mut z_hi)?;
        let m = [
            1.0 + c_lo * extrapolate_lo(&z_lo),
            c_hi * extrapolate_lo(&z_hi),
            c_lo * extrapolate_hi(&z_lo),
            1.0 + c_hi * extrapolate_hi(&z_hi),
        ];
        let det = m[0] * m[3] - m[1] * m[2];
        if det.abs() < 1e-12 {
            return Err(Error::Singular { row: 0 });
        }
        Ok(YClosure {
            c_lo,
            c_hi,
            z_lo,
            z_hi,
            inv: [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det],
        })
    }

    /// Turns the interior solution `z = T⁻¹ rhs` into the closed solution;
    /// returns the boundary values `(w_lo, w_hi)`.
    fn close(&self, z: &mut [f64]) -> (f64, f64) {
        let (e, f) = (extrapolate_lo(z), extrapolate_hi(z));
        let w_lo = self.inv[0] * e + self.inv[1] * f;
        let w_hi = self.inv[2] * e + self.inv[3] * f;
        let (a, b) = (self.c_lo * w_lo, self.c_hi * w_hi);
        for ((v, zl), zh) in z.iter_mut().zip(&self.z_lo).zip(&self.z_hi) {
            *v -= a * zl + b * zh;
        }
        (w_lo, w_hi)
    }
}

fn extrapolate_lo(interior: &[f64]) -> f64 {
    EXTRAPOLATION.iter().zip(interior).map(|(w, v)| w * v).sum()
}

fn extrapolate_hi(interior: &[f64]) -> f64 {
    EXTRAPOLATION
        .iter()
        .zip(interior.iter().rev())
        .map(|(w, v)| w * v)
        .sum()
}

impl FactorSet {
    pub fn uses_fallback(&self) -> bool {
        self.y.is_fallback() || self.x.iter().any(TridiagonalLU::is_fallback)
    }
}

/// Everything needed to advance fields on one grid: assembled operators,
/// boundary data and the factored implicit systems for the nominal step.
pub struct PreparedSolver {
    grid: UniformGrid,
    adi: AdiParams,
    timegrid: TimeGrid,
    explicit: ExplicitOperator,
    compact_x: CompactX,
    compact_y: CompactY,
    dirichlet: DirichletX,
    factors: FactorSet,
    factorizations: AtomicUsize,
}

/// One row of the optional per-step trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub tau: f64,
    pub max_norm: f64,
    pub seconds: f64,
}

/// Scratch fields reused across steps.
struct Workspace {
    ghosts: GhostField,
    f_u: GridField,
    f_tmp: GridField,
    y0: GridField,
    y1: GridField,
    y2: GridField,
    z0: GridField,
    z1: GridField,
}

impl Workspace {
    fn new(grid: UniformGrid) -> Self {
        let z = GridField::zeros(grid);
        Workspace {
            ghosts: GhostField::new(grid.m, grid.n),
            f_u: z.clone(),
            f_tmp: z.clone(),
            y0: z.clone(),
            y1: z.clone(),
            y2: z.clone(),
            z0: z.clone(),
            z1: z,
        }
    }
}

impl PreparedSolver {
    pub fn prepare(grid: &UniformGrid, model: &dyn PdeModel, adi: AdiParams, timegrid: TimeGrid) -> Result<Self> {
        adi.validate()?;
        if grid.m < 6 || grid.n < 6 {
            return Err(Error::GridTooSmall {
                axis: if grid.m < 6 { "x" } else { "y" },
                needed: 6,
                have: grid.m.min(grid.n),
            });
        }
        let compact_x = assemble_compact_x(grid, model)?;
        let compact_y = assemble_compact_y(grid, model)?;
        let explicit = ExplicitOperator::new(grid, model)?;
        let factorizations = AtomicUsize::new(0);
        let factors = build_factors(grid, &compact_x, &compact_y, adi.phi * timegrid.dt)
            .map(|f| FactorSet { dt: timegrid.dt, ..f })?;
        factorizations.fetch_add(2, Ordering::Relaxed);
        if factors.uses_fallback() {
            log::warn!("implicit systems on {}x{} needed pivoting", grid.m, grid.n);
        }
        Ok(PreparedSolver {
            grid: *grid,
            adi,
            timegrid,
            explicit,
            compact_x,
            compact_y,
            dirichlet: DirichletX::new(grid, model.rate()),
            factors,
            factorizations,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn timegrid(&self) -> &TimeGrid {
        &self.timegrid
    }

    pub fn factors(&self) -> &FactorSet {
        &self.factors
    }

    pub fn dirichlet(&self) -> &DirichletX {
        &self.dirichlet
    }

    /// Number of direction factorisations performed so far (two per set).
    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    /// Factors for a different step size.
    pub fn factors_for(&self, dt: f64) -> Result<FactorSet> {
        let f = build_factors(&self.grid, &self.compact_x, &self.compact_y, self.adi.phi * dt)?;
        self.factorizations.fetch_add(2, Ordering::Relaxed);
        Ok(FactorSet { dt, ..f })
    }

    /// Imposes the boundary values valid at `tau` on `field`.
    pub fn set_boundaries(&self, field: &mut GridField, tau: f64) -> Result<()> {
        self.dirichlet.apply(field, tau);
        extrapolate_y_boundary_cols(field, 1..self.grid.m - 1)
    }

    /// One step of size `timegrid.dt` from `tau_prev`.
    pub fn hv_step(&self, u_prev: &GridField, tau_prev: f64) -> Result<GridField> {
        let mut ws = Workspace::new(self.grid);
        let mut out = GridField::zeros(self.grid);
        self.step_into(&self.factors, u_prev, tau_prev, &mut ws, &mut out)?;
        Ok(out)
    }

    /// One step with explicitly supplied factors (and hence step size).
    pub fn hv_step_with(&self, factors: &FactorSet, u_prev: &GridField, tau_prev: f64) -> Result<GridField> {
        let mut ws = Workspace::new(self.grid);
        let mut out = GridField::zeros(self.grid);
        self.step_into(factors, u_prev, tau_prev, &mut ws, &mut out)?;
        Ok(out)
    }

    pub fn solve_to_maturity(&self, u0: GridField) -> Result<GridField> {
        self.solve_traced(u0, |_| Ok(()))
    }

    /// Time loop calling `trace` after every step.
    pub fn solve_traced(&self, u0: GridField, mut trace: impl FnMut(StepTrace) -> Result<()>) -> Result<GridField> {
        if u0.grid() != &self.grid {
            return Err(Error::DimensionMismatch {
                expected: self.grid.node_count(),
                got: u0.grid().node_count(),
            });
        }
        let start = Instant::now();
        let mut ws = Workspace::new(self.grid);
        let mut u = u0;
        let mut next = GridField::zeros(self.grid);
        let mut ragged: Option<FactorSet> = None;
        for (k, (tau, dt)) in self.timegrid.steps().enumerate() {
            let factors = if dt == self.factors.dt {
                &self.factors
            } else {
                ragged.get_or_insert(self.factors_for(dt)?)
            };
            self.step_into(factors, &u, tau, &mut ws, &mut next)?;
            std::mem::swap(&mut u, &mut next);
            trace(StepTrace {
                step: k + 1,
                tau: tau + dt,
                max_norm: u.max_abs(),
                seconds: start.elapsed().as_secs_f64(),
            })?;
        }
        Ok(u)
    }

    fn step_into(
        &self,
        factors: &FactorSet,
        u: &GridField,
        tau_prev: f64,
        ws: &mut Workspace,
        out: &mut GridField,
    ) -> Result<()> {
        let dt = factors.dt;
        let s = self.adi.phi * dt;
        let tau = tau_prev + dt;
        let m = self.grid.m;

        // Y0 = U + Δt F(U)
        ws.ghosts.fill(u)?;
        self.explicit.apply_into(&ws.ghosts, Parts::ALL, &mut ws.f_u);
        combine_interior(&mut ws.y0, u, dt, &ws.f_u, m);
        self.set_boundaries(&mut ws.y0, tau)?;
        ws.y0.check_finite("Y0")?;

        // Y1: the left boundary moves with the Dirichlet data, so F1 there
        // changes by the difference of the boundary fluxes.
        let flux = self.dirichlet.left_flux(tau) - self.dirichlet.left_flux(tau_prev);
        self.x_sweep(factors, s, &ws.y0, u, (flux, 0.0), tau, &mut ws.y1)?;
        self.set_boundaries(&mut ws.y1, tau)?;
        ws.y1.check_finite("Y1")?;

        self.y_sweep(factors, s, &ws.y1, u, &mut ws.y2)?;
        self.set_boundaries(&mut ws.y2, tau)?;
        ws.y2.check_finite("Y2")?;

        // Z0 = Y0 + ψΔt (F(Y2) − F(U))
        ws.ghosts.fill(&ws.y2)?;
        self.explicit.apply_into(&ws.ghosts, Parts::ALL, &mut ws.f_tmp);
        let psi_dt = self.adi.psi * dt;
        ws.z0
            .values_mut()
            .par_chunks_mut(self.grid.n)
            .zip(ws.y0.values().par_chunks(self.grid.n))
            .zip(ws.f_tmp.values().par_chunks(self.grid.n))
            .zip(ws.f_u.values().par_chunks(self.grid.n))
            .with_min_len(16)
            .for_each(|(((z, y), fy), fu)| {
                for k in 0..z.len() {
                    z[k] = y[k] + psi_dt * (fy[k] - fu[k]);
                }
            });
        self.set_boundaries(&mut ws.z0, tau)?;
        ws.z0.check_finite("Z0")?;

        self.x_sweep(factors, s, &ws.z0, &ws.y2, (0.0, 0.0), tau, &mut ws.z1)?;
        self.set_boundaries(&mut ws.z1, tau)?;
        ws.z1.check_finite("Z1")?;

        self.y_sweep(factors, s, &ws.z1, &ws.y2, out)?;
        self.set_boundaries(out, tau)?;
        out.check_finite("U")?;
        Ok(())
    }

    /// Solves `(B − sA) W = B V − sA·base` along x for every interior row.
    /// `flux` holds the change of `F1` at the left/right boundary nodes.
    #[allow(clippy::too_many_arguments)]
    fn x_sweep(
        &self,
        factors: &FactorSet,
        s: f64,
        v: &GridField,
        base: &GridField,
        flux: (f64, f64),
        tau: f64,
        w: &mut GridField,
    ) -> Result<()> {
        let (m, n) = (self.grid.m, self.grid.n);
        let (w_left, w_right) = (self.dirichlet.left(tau), self.dirichlet.right(tau));
        let lines: Vec<Vec<f64>> = (1..n - 1)
            .into_par_iter()
            .with_min_len(8)
            .map(|j| -> Result<Vec<f64>> {
                let row = &self.compact_x.rows[j];
                let at = |f: &GridField, i: usize| f.get(i, j);
                // boundary entries of V consistent with W − V = s·ΔF1
                let v_at = |i: usize| match i {
                    0 => w_left - s * flux.0,
                    i if i == m - 1 => w_right - s * flux.1,
                    i => at(v, i),
                };
                let mut rhs: Vec<f64> = (1..m - 1)
                    .map(|i| {
                        row.apply_b(v_at(i - 1), v_at(i), v_at(i + 1))
                            - s * row.apply_a(at(base, i - 1), at(base, i), at(base, i + 1))
                    })
                    .collect();
                let lhs = row.implicit(s);
                rhs[0] -= lhs[0] * w_left;
                rhs[m - 3] -= lhs[2] * w_right;
                factors.x[j - 1].solve_in_place(&mut rhs)?;
                Ok(rhs)
            })
            .collect::<Result<_>>()?;
        for (jj, line) in lines.iter().enumerate() {
            for (ii, value) in line.iter().enumerate() {
                w.set(ii + 1, jj + 1, *value);
            }
        }
        Ok(())
    }

    /// Solves `(B − sA) W = B V − sA·base` along y for every interior
    /// column, with the boundary rows of `W` closed by extrapolation.
    fn y_sweep(&self, factors: &FactorSet, s: f64, v: &GridField, base: &GridField, w: &mut GridField) -> Result<()> {
        let (m, n) = (self.grid.m, self.grid.n);
        let rows = &self.compact_y.rows;
        w.values_mut()
            .par_chunks_mut(n)
            .enumerate()
            .with_min_len(8)
            .filter(|(i, _)| *i > 0 && *i < m - 1)
            .try_for_each(|(i, col)| -> Result<()> {
                let vc = v.column(i);
                let bc = base.column(i);
                for j in 1..n - 1 {
                    let row: &CompactRow = &rows[j];
                    col[j] = row.apply_b(vc[j - 1], vc[j], vc[j + 1]) - s * row.apply_a(bc[j - 1], bc[j], bc[j + 1]);
                }
                factors.y.solve_in_place(&mut col[1..n - 1])?;
                let (lo, hi) = factors.y_closure.close(&mut col[1..n - 1]);
                col[0] = lo;
                col[n - 1] = hi;
                Ok(())
            })
    }
}

/// `out = a + c·b` on the inner nodes.
fn combine_interior(out: &mut GridField, a: &GridField, c: f64, b: &GridField, m: usize) {
    let n = out.grid().n;
    out.values_mut()
        .par_chunks_mut(n)
        .enumerate()
        .with_min_len(16)
        .filter(|(i, _)| *i > 0 && *i < m - 1)
        .for_each(|(i, col)| {
            let (ac, bc) = (a.column(i), b.column(i));
            for j in 1..n - 1 {
                col[j] = ac[j] + c * bc[j];
            }
        });
}

fn build_factors(grid: &UniformGrid, cx: &CompactX, cy: &CompactY, s: f64) -> Result<FactorSet> {
    let (m, n) = (grid.m, grid.n);
    let system = |rows: &mut dyn Iterator<Item = [f64; 3]>, len: usize| -> Result<TridiagonalLU> {
        let mut sub = Vec::with_capacity(len - 1);
        let mut diag = Vec::with_capacity(len);
        let mut sup = Vec::with_capacity(len - 1);
        for (k, r) in rows.enumerate() {
            if k > 0 {
                sub.push(r[0]);
            }
            diag.push(r[1]);
            if k + 1 < len {
                sup.push(r[2]);
            }
        }
        factor(&TridiagonalMatrix::new(sub, diag, sup)?)
    };
    let x = (1..n - 1)
        .into_par_iter()
        .map(|j| {
            let r = cx.rows[j].implicit(s);
            system(&mut std::iter::repeat_n(r, m - 2), m - 2)
        })
        .collect::<Result<Vec<_>>>()?;
    let y = system(&mut (1..n - 1).map(|j| cy.rows[j].implicit(s)), n - 2)?;
    let y_closure = YClosure::new(&y, cy.rows[1].implicit(s)[0], cy.rows[n - 2].implicit(s)[2])?;
    Ok(FactorSet {
        dt: 0.0,
        x,
        y,
        y_closure,
    })
}

/// Writes a per-step trace as CSV: `step,tau,max_norm,seconds`.
pub fn trace_writer<W: Write>(mut out: W) -> impl FnMut(StepTrace) -> Result<()> {
    let mut header = true;
    move |t: StepTrace| {
        if header {
            writeln!(out, "step,tau,max_norm,seconds")?;
            header = false;
        }
        writeln!(out, "{},{},{},{}", t.step, t.tau, t.max_norm, t.seconds)?;
        Ok(())
    }
}
