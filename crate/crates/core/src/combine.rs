//! Sparse grid combination technique.
//!
//! `u_n = Σ_{|l|=n+1} u_l − Σ_{|l|=n} u_l`, with strongly anisotropic grids
//! (`l1 < min` or `l2 < min`) left out. Sub-solutions are interpolated to a
//! common evaluation grid with tensor cubic Lagrange interpolation.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{grid_from_level, Domain, GridField, LevelIndex, TimeGrid, UniformGrid};
use crate::model::{payoff, PdeModel};
use crate::smoothing::smoothed_put;
use crate::stepper::{AdiParams, PreparedSolver};

/// Default lower bound on each level component.
pub const DEFAULT_MIN_LEVEL: u32 = 3;
/// Finest default evaluation level.
pub const MAX_EVAL_LEVEL: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanEntry {
    pub level: LevelIndex,
    pub sign: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationPlan {
    pub n: u32,
    pub min_level: u32,
    /// Sorted by ascending `(l1, l2)`.
    pub entries: Vec<PlanEntry>,
}

pub fn plan(n: u32, min_level: u32) -> Result<CombinationPlan> {
    let diagonal = |sum: u32| -> Vec<LevelIndex> {
        (min_level..=sum.saturating_sub(min_level))
            .map(|l1| LevelIndex::new(l1, sum - l1))
            .filter(|l| l.l2 >= min_level)
            .collect()
    };
    let plus = diagonal(n + 1);
    let minus = diagonal(n);
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::EmptyPlan {
            n,
            minimal: 2 * min_level,
        });
    }
    let mut entries: Vec<PlanEntry> = plus
        .into_iter()
        .map(|level| PlanEntry { level, sign: 1 })
        .chain(minus.into_iter().map(|level| PlanEntry { level, sign: -1 }))
        .collect();
    entries.sort_by_key(|e| e.level);
    let plan = CombinationPlan { n, min_level, entries };
    debug_assert_eq!(plan.weight_sum(), 1);
    Ok(plan)
}

impl CombinationPlan {
    pub fn weight_sum(&self) -> i32 {
        self.entries.iter().map(|e| e.sign).sum()
    }

    pub fn plus(&self) -> Vec<LevelIndex> {
        self.entries.iter().filter(|e| e.sign > 0).map(|e| e.level).collect()
    }

    pub fn minus(&self) -> Vec<LevelIndex> {
        self.entries.iter().filter(|e| e.sign < 0).map(|e| e.level).collect()
    }

    /// Largest single level component among the retained grids.
    pub fn finest_component(&self) -> u32 {
        self.entries
            .iter()
            .map(|e| e.level.l1.max(e.level.l2))
            .max()
            .unwrap_or(0)
    }

    /// Total nodes over all retained sub-grids.
    pub fn node_count(&self) -> usize {
        self.entries
            .iter()
            .map(|e| ((1usize << e.level.l1) + 1) * ((1usize << e.level.l2) + 1))
            .sum()
    }

    /// `level,sign,M,N,dt,nodes`.
    pub fn write_csv<W: Write>(&self, dt_factor: f64, mut out: W) -> Result<()> {
        writeln!(out, "level,sign,M,N,dt,nodes")?;
        for e in &self.entries {
            let (m, n) = ((1usize << e.level.l1) + 1, (1usize << e.level.l2) + 1);
            writeln!(
                out,
                "\"{}\",{},{m},{n},{},{}",
                e.level,
                e.sign,
                level_dt(e.level, dt_factor),
                m * n
            )?;
        }
        Ok(())
    }
}

/// `Δt_l = c · (2^{−max(l1, l2)})²`.
pub fn level_dt(level: LevelIndex, factor: f64) -> f64 {
    let finest = level.l1.max(level.l2) as i32;
    factor * 4f64.powi(-finest)
}

/// Common grid for a combined solution of level `n`.
pub fn evaluation_grid(domain: Domain, n: u32) -> Result<UniformGrid> {
    let l = n.saturating_sub(2).clamp(DEFAULT_MIN_LEVEL, MAX_EVAL_LEVEL);
    grid_from_level(domain, LevelIndex::uniform(l))
}

/// Cubic Lagrange weights for coordinate `t` in index units on nodes
/// `0..len`; returns the first stencil node and the four weights. Targets
/// that sit on a node (to rounding) reproduce it exactly.
fn cubic_weights(t: f64, len: usize) -> (usize, [f64; 4]) {
    let snapped = if (t - t.round()).abs() < 1e-9 { t.round() } else { t };
    let cell = snapped.floor().max(0.0) as usize;
    let start = cell.saturating_sub(1).min(len - 4);
    let local = snapped - start as f64;
    let mut w = [0.0; 4];
    for (r, wr) in w.iter_mut().enumerate() {
        let mut l = 1.0;
        for q in 0..4 {
            if q != r {
                l *= (local - q as f64) / (r as f64 - q as f64);
            }
        }
        *wr = l;
    }
    (start, w)
}

/// Value of the tensor cubic interpolant of `field` at `(x, y)`.
pub fn interpolate_at(field: &GridField, x: f64, y: f64) -> f64 {
    let g = field.grid();
    let (si, wx) = cubic_weights((x - g.domain.x_min) / g.dx, g.m);
    let (sj, wy) = cubic_weights((y - g.domain.y_min) / g.dy, g.n);
    let mut sum = 0.0;
    for (a, wa) in wx.iter().enumerate() {
        let col = field.column(si + a);
        let inner: f64 = wy.iter().enumerate().map(|(b, wb)| wb * col[sj + b]).sum();
        sum += wa * inner;
    }
    sum
}

/// Interpolates `sub` onto every node of `target`.
pub fn interpolate(sub: &GridField, target: &UniformGrid) -> Result<GridField> {
    let g = sub.grid();
    if g.m < 4 || g.n < 4 {
        return Err(Error::GridTooSmall {
            axis: if g.m < 4 { "x" } else { "y" },
            needed: 4,
            have: g.m.min(g.n),
        });
    }
    let tol = 1e-9 * (g.dx + g.dy);
    let d = target.domain;
    if d.x_min < g.domain.x_min - tol
        || d.x_max > g.domain.x_max + tol
        || d.y_min < g.domain.y_min - tol
        || d.y_max > g.domain.y_max + tol
    {
        return Err(Error::InvalidParameter {
            name: "target domain",
            value: d.x_min,
            expected: "target inside the sub-grid domain",
        });
    }
    let n = target.n;
    let mut out = GridField::zeros(*target);
    out.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, col)| {
        let x = target.x(i);
        for (j, v) in col.iter_mut().enumerate() {
            *v = interpolate_at(sub, x, target.y(j));
        }
    });
    Ok(out)
}

/// Solves every level of `plan` with `solve`, interpolates to `target` and
/// sums with signs in ascending level order.
pub fn combine(
    plan: &CombinationPlan,
    solve: impl Fn(LevelIndex) -> Result<GridField> + Sync,
    target: &UniformGrid,
) -> Result<GridField> {
    let parts: Vec<GridField> = plan
        .entries
        .par_iter()
        .map(|e| {
            solve(e.level)
                .and_then(|u| interpolate(&u, target))
                .map_err(|source| Error::SubSolve {
                    level: e.level,
                    source: Box::new(source),
                })
        })
        .collect::<Result<_>>()?;
    let mut out = GridField::zeros(*target);
    for (e, part) in plan.entries.iter().zip(&parts) {
        let sign = f64::from(e.sign);
        for (o, v) in out.values_mut().iter_mut().zip(part.values()) {
            *o += sign * v;
        }
    }
    Ok(out)
}

/// Options shared by full-grid and sparse solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub domain: Domain,
    pub adi: AdiParams,
    /// `c` in `Δt = c·Δ²`.
    pub dt_factor: f64,
    pub min_level: u32,
    /// Smooth the payoff with Φ4 at `h = Δx`; off samples the raw payoff.
    pub smoothing: bool,
}

impl SolveOptions {
    pub fn new(domain: Domain) -> Self {
        SolveOptions {
            domain,
            adi: AdiParams::default(),
            dt_factor: 5.0,
            min_level: DEFAULT_MIN_LEVEL,
            smoothing: true,
        }
    }
}

/// Put payoff on `grid`, smoothed unless switched off.
pub fn initial_condition(grid: &UniformGrid, opts: &SolveOptions) -> Result<GridField> {
    if opts.smoothing {
        smoothed_put(grid)
    } else {
        Ok(GridField::from_fn(*grid, |x, _| payoff(x)))
    }
}

/// Prepared solver for the grid and step size of `level`.
pub fn prepare_level(model: &dyn PdeModel, level: LevelIndex, opts: &SolveOptions) -> Result<PreparedSolver> {
    let grid = grid_from_level(opts.domain, level)?;
    let tg = TimeGrid::new(opts.domain.horizon, level_dt(level, opts.dt_factor))?;
    PreparedSolver::prepare(&grid, model, opts.adi, tg)
}

/// Initial data on the grid of `level`, advanced to the horizon.
pub fn solve_level(model: &dyn PdeModel, level: LevelIndex, opts: &SolveOptions) -> Result<GridField> {
    let solver = prepare_level(model, level, opts)?;
    let u0 = initial_condition(solver.grid(), opts)?;
    solver.solve_to_maturity(u0)
}

/// Combined solution of level `n` on its evaluation grid.
pub fn sparse_solve(model: &dyn PdeModel, n: u32, opts: &SolveOptions) -> Result<GridField> {
    let p = plan(n, opts.min_level)?;
    let target = evaluation_grid(opts.domain, n)?;
    combine(&p, |l| solve_level(model, l, opts), &target)
}
