//! Spatial discretisation.
//!
//! Implicit stages use fourth-order compact three-point schemes for the
//! line problems `u'' + c1 u' = c2 g`, one per direction. Explicit stages
//! use the classical five-point fourth-order central differences on a
//! 5×5 stencil, with ghost values outside the domain filled by polynomial
//! extrapolation.
//!
//! Assembled compact rows are normalised by `c2`, so that a row relates
//! `u` directly to the value of the directional operator: `A·u = B·F_k(u)`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridField, UniformGrid};
use crate::model::{CoefficientSet, LineOde, PdeModel};

/// Fourth-order central second-difference weights, over `12Δ²`.
pub const D2_WEIGHTS: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
/// Fourth-order central first-difference weights, over `12Δ`.
pub const D1_WEIGHTS: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Five-point extrapolation to the next node outward.
pub const EXTRAPOLATION: [f64; 5] = [5.0, -10.0, 10.0, -5.0, 1.0];

/// Unnormalised compact triples `(A, B)` for constant `c1`, `c2`:
/// `A = (1 + c1²Δ²/12) δ² + c1 δ0`, `B = c2 (1 + Δ²/12 δ² + c1Δ²/12 δ0)`.
pub fn hoc_triples(c1: f64, c2: f64, h: f64) -> ([f64; 3], [f64; 3]) {
    let h2 = h * h;
    let a = [
        1.0 / h2 - c1 / (2.0 * h) + c1 * c1 / 12.0,
        -2.0 / h2 - c1 * c1 / 6.0,
        1.0 / h2 + c1 / (2.0 * h) + c1 * c1 / 12.0,
    ];
    let b = [
        c2 * (1.0 / 12.0 - c1 * h / 24.0),
        c2 * (10.0 / 12.0),
        c2 * (1.0 / 12.0 + c1 * h / 24.0),
    ];
    (a, b)
}

/// One normalised compact row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompactRow {
    /// Acts on `u` at offsets −1, 0, +1.
    pub a: [f64; 3],
    /// Acts on `g` at offsets −1, 0, +1.
    pub b: [f64; 3],
}

impl CompactRow {
    #[inline]
    pub fn apply_a(&self, left: f64, centre: f64, right: f64) -> f64 {
        self.a[0] * left + self.a[1] * centre + self.a[2] * right
    }

    #[inline]
    pub fn apply_b(&self, left: f64, centre: f64, right: f64) -> f64 {
        self.b[0] * left + self.b[1] * centre + self.b[2] * right
    }

    /// Row of `B − s·A`.
    #[inline]
    pub fn implicit(&self, s: f64) -> [f64; 3] {
        [
            self.b[0] - s * self.a[0],
            self.b[1] - s * self.a[1],
            self.b[2] - s * self.a[2],
        ]
    }
}

/// Normalised x-row from line data (the constant-coefficient closed form
/// multiplied through by `diffusion = 1/c2`).
pub fn compact_row_x(line: &LineOde, h: f64) -> CompactRow {
    let LineOde { c1, diffusion, .. } = *line;
    let h2 = h * h;
    let curv = diffusion * (1.0 + c1 * c1 * h2 / 12.0) / h2;
    let conv = diffusion * c1 / (2.0 * h);
    CompactRow {
        a: [curv - conv, -2.0 * curv, curv + conv],
        b: [1.0 / 12.0 - c1 * h / 24.0, 10.0 / 12.0, 1.0 / 12.0 + c1 * h / 24.0],
    }
}

/// Normalised y-row at a node with line data `centre` and neighbours
/// `below`, `above`. `c1` varies with `y`, so its derivatives enter the
/// `u` side; `c2` varies too, so the `g` side carries discrete products.
pub fn compact_row_y(below: &LineOde, centre: &LineOde, above: &LineOde, h: f64) -> CompactRow {
    let LineOde {
        c1,
        dc1,
        d2c1,
        diffusion,
    } = *centre;
    let h2 = h * h;
    let curv = 1.0 + h2 * (c1 * c1 + 2.0 * dc1) / 12.0;
    let conv = c1 + h2 * (c1 * dc1 + d2c1) / 12.0;
    let a_curv = diffusion * curv / h2;
    let a_conv = diffusion * conv / (2.0 * h);
    // c2 at the neighbours relative to c2 at the centre
    let ratio = |other: &LineOde| {
        if other.diffusion == 0.0 {
            1.0
        } else {
            diffusion / other.diffusion
        }
    };
    let (rm, rp) = (ratio(below), ratio(above));
    CompactRow {
        a: [a_curv - a_conv, -2.0 * a_curv, a_curv + a_conv],
        b: [
            1.0 / 12.0 - (rp - rm) / 24.0 - c1 * h / 24.0,
            10.0 / 12.0 + (rp - 2.0 + rm) / 12.0 + c1 * h * (rp - rm) / 24.0,
            1.0 / 12.0 + (rp - rm) / 24.0 + c1 * h / 24.0,
        ],
    }
}

/// Compact x-operator: one row per interior `y_j`, shared by every `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactX {
    /// Indexed by `j`; entries at `j = 0` and `j = N−1` are unused.
    pub rows: Vec<CompactRow>,
}

/// Compact y-operator: one row per interior `y_j`, shared by every column.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactY {
    /// Indexed by `j`; entries at `j = 0` and `j = N−1` are unused.
    pub rows: Vec<CompactRow>,
}

pub fn assemble_compact_x(grid: &UniformGrid, model: &dyn PdeModel) -> Result<CompactX> {
    check_positive_y(grid)?;
    let n = grid.n;
    let mut rows = vec![CompactRow::default(); n];
    for (j, row) in rows.iter_mut().enumerate().take(n - 1).skip(1) {
        *row = compact_row_x(&model.x_line(grid.y(j)), grid.dx);
    }
    Ok(CompactX { rows })
}

pub fn assemble_compact_y(grid: &UniformGrid, model: &dyn PdeModel) -> Result<CompactY> {
    check_positive_y(grid)?;
    let lines: Vec<LineOde> = (0..grid.n).map(|j| model.y_line(grid.y(j))).collect();
    let mut rows = vec![CompactRow::default(); grid.n];
    for j in 1..grid.n - 1 {
        rows[j] = compact_row_y(&lines[j - 1], &lines[j], &lines[j + 1], grid.dy);
    }
    Ok(CompactY { rows })
}

fn check_positive_y(grid: &UniformGrid) -> Result<()> {
    if grid.domain.y_min > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateDiffusion { y: grid.domain.y_min })
    }
}

/// Debug dump: `row,a_-1,a_0,a_+1,b_-1,b_0,b_+1` for interior rows.
pub fn write_rows_csv<W: Write>(rows: &[CompactRow], mut out: W) -> Result<()> {
    writeln!(out, "row,a_m1,a_0,a_p1,b_m1,b_0,b_p1")?;
    for (j, r) in rows.iter().enumerate().take(rows.len().saturating_sub(1)).skip(1) {
        writeln!(
            out,
            "{j},{},{},{},{},{},{}",
            r.a[0], r.a[1], r.a[2], r.b[0], r.b[1], r.b[2]
        )?;
    }
    Ok(())
}

/// A field padded with one ghost layer on every side.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostField {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl GhostField {
    pub fn new(m: usize, n: usize) -> Self {
        GhostField {
            m,
            n,
            values: vec![0.0; (m + 2) * (n + 2)],
        }
    }

    /// Value at node `(i, j)`, where `−1` and `M`/`N` address ghosts.
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.values[(i + 1) as usize * (self.n + 2) + (j + 1) as usize]
    }

    #[inline]
    fn stride(&self) -> usize {
        self.n + 2
    }

    /// Copies `field` into the interior and extrapolates every ghost.
    pub fn fill(&mut self, field: &GridField) -> Result<()> {
        let grid = field.grid();
        let (m, n) = (grid.m, grid.n);
        if m < 6 || n < 6 {
            return Err(Error::GridTooSmall {
                axis: if m < 6 { "x" } else { "y" },
                needed: 6,
                have: m.min(n),
            });
        }
        if (m, n) != (self.m, self.n) {
            *self = GhostField::new(m, n);
        }
        let s = self.stride();
        for i in 0..m {
            let src = field.column(i);
            let row = &mut self.values[(i + 1) * s..(i + 2) * s];
            row[1..n + 1].copy_from_slice(src);
            row[0] = extrapolate(|k| src[k]);
            row[n + 1] = extrapolate(|k| src[n - 1 - k]);
        }
        for j in 0..n {
            self.values[j + 1] = extrapolate(|k| field.get(k, j));
            self.values[(m + 1) * s + j + 1] = extrapolate(|k| field.get(m - 1 - k, j));
        }
        // corners along the diagonals
        self.values[0] = extrapolate(|k| field.get(k, k));
        self.values[n + 1] = extrapolate(|k| field.get(k, n - 1 - k));
        self.values[(m + 1) * s] = extrapolate(|k| field.get(m - 1 - k, k));
        self.values[(m + 1) * s + n + 1] = extrapolate(|k| field.get(m - 1 - k, n - 1 - k));
        Ok(())
    }
}

#[inline]
fn extrapolate(at: impl Fn(usize) -> f64) -> f64 {
    EXTRAPOLATION.iter().enumerate().map(|(k, w)| w * at(k)).sum()
}

/// Ghost-augmented copy of `field`.
pub fn extrapolate_ghosts(field: &GridField) -> Result<GhostField> {
    let mut ghosts = GhostField::new(field.grid().m, field.grid().n);
    ghosts.fill(field)?;
    Ok(ghosts)
}

/// Overwrites rows `j = 0` and `j = N−1` by six-point extrapolation from
/// the interior, for columns `i` in `cols`.
pub fn extrapolate_y_boundary_cols(field: &mut GridField, cols: std::ops::Range<usize>) -> Result<()> {
    let n = field.grid().n;
    if n < 6 {
        return Err(Error::GridTooSmall {
            axis: "y",
            needed: 6,
            have: n,
        });
    }
    for i in cols {
        let col = field.column_mut(i);
        col[0] = extrapolate(|k| col[k + 1]);
        col[n - 1] = extrapolate(|k| col[n - 2 - k]);
    }
    Ok(())
}

/// Overwrites the y-boundary rows of every column by extrapolation.
pub fn extrapolate_y_boundary(field: &mut GridField) -> Result<()> {
    let m = field.grid().m;
    extrapolate_y_boundary_cols(field, 0..m)
}

/// Dirichlet data at the x-boundaries. At `x = L1` the value is the forward
/// `1 − e^{rτ+x}`, which solves the equation exactly; its time derivative is
/// therefore also the value of `F₁` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletX {
    pub rate: f64,
    pub x_min: f64,
}

impl DirichletX {
    pub fn new(grid: &UniformGrid, rate: f64) -> Self {
        DirichletX {
            rate,
            x_min: grid.domain.x_min,
        }
    }

    pub fn left(&self, tau: f64) -> f64 {
        1.0 - (self.rate * tau + self.x_min).exp()
    }

    pub fn right(&self, _tau: f64) -> f64 {
        0.0
    }

    /// `∂τ` of the left value, equal to `F₁` of the boundary profile.
    pub fn left_flux(&self, tau: f64) -> f64 {
        -self.rate * (self.rate * tau + self.x_min).exp()
    }

    pub fn apply(&self, field: &mut GridField, tau: f64) {
        let m = field.grid().m;
        let (l, r) = (self.left(tau), self.right(tau));
        field.column_mut(0).fill(l);
        field.column_mut(m - 1).fill(r);
    }
}

/// `(left, right)` boundary values at time `tau`.
pub fn dirichlet_x(tau: f64, grid: &UniformGrid, rate: f64) -> (f64, f64) {
    let d = DirichletX::new(grid, rate);
    (d.left(tau), d.right(tau))
}

/// Per-row coefficients of the explicit operator, premultiplied by the
/// stencil denominators.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitOperator {
    grid: UniformGrid,
    xx: Vec<f64>,
    x: Vec<f64>,
    yy: Vec<f64>,
    y: Vec<f64>,
    xy: Vec<f64>,
}

/// Which parts of `F = F₀ + F₁ + F₂` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parts {
    pub mixed: bool,
    pub x: bool,
    pub y: bool,
}

impl Parts {
    pub const ALL: Parts = Parts {
        mixed: true,
        x: true,
        y: true,
    };
    pub const MIXED: Parts = Parts {
        mixed: true,
        x: false,
        y: false,
    };
    pub const X: Parts = Parts {
        mixed: false,
        x: true,
        y: false,
    };
    pub const Y: Parts = Parts {
        mixed: false,
        x: false,
        y: true,
    };
}

impl ExplicitOperator {
    pub fn new(grid: &UniformGrid, model: &dyn PdeModel) -> Result<Self> {
        check_positive_y(grid)?;
        let coeffs: Vec<CoefficientSet> = grid.ys().into_iter().map(|y| model.coefficients(y)).collect();
        Ok(Self::from_coefficients(grid, &coeffs))
    }

    pub fn from_coefficients(grid: &UniformGrid, coeffs: &[CoefficientSet]) -> Self {
        let (dx, dy) = (grid.dx, grid.dy);
        ExplicitOperator {
            grid: *grid,
            xx: coeffs.iter().map(|c| c.a_xx / (12.0 * dx * dx)).collect(),
            x: coeffs.iter().map(|c| c.b_x / (12.0 * dx)).collect(),
            yy: coeffs.iter().map(|c| c.a_yy / (12.0 * dy * dy)).collect(),
            y: coeffs.iter().map(|c| c.b_y / (12.0 * dy)).collect(),
            xy: coeffs.iter().map(|c| c.a_xy / (144.0 * dx * dy)).collect(),
        }
    }

    /// Writes the selected parts of `F(u)` at every inner node into `out`;
    /// boundary nodes of `out` are left untouched. `ghosts` must hold `u`.
    pub fn apply_into(&self, ghosts: &GhostField, parts: Parts, out: &mut GridField) {
        let (m, n) = (self.grid.m, self.grid.n);
        let s = ghosts.stride();
        let g = &ghosts.values;
        out.values_mut()
            .par_chunks_mut(n)
            .enumerate()
            .with_min_len(16)
            .filter(|(i, _)| *i > 0 && *i < m - 1)
            .for_each(|(i, col)| {
                // padded index of (i, 0)
                let c0 = (i + 1) * s + 1;
                for (j, slot) in col.iter_mut().enumerate().take(n - 1).skip(1) {
                    let c = c0 + j;
                    let mut f = 0.0;
                    if parts.x {
                        let (um2, um1, u0, up1, up2) = (g[c - 2 * s], g[c - s], g[c], g[c + s], g[c + 2 * s]);
                        f += self.xx[j] * (-um2 + 16.0 * um1 - 30.0 * u0 + 16.0 * up1 - up2)
                            + self.x[j] * (um2 - 8.0 * um1 + 8.0 * up1 - up2);
                    }
                    if parts.y {
                        let (um2, um1, u0, up1, up2) = (g[c - 2], g[c - 1], g[c], g[c + 1], g[c + 2]);
                        f += self.yy[j] * (-um2 + 16.0 * um1 - 30.0 * u0 + 16.0 * up1 - up2)
                            + self.y[j] * (um2 - 8.0 * um1 + 8.0 * up1 - up2);
                    }
                    if parts.mixed && self.xy[j] != 0.0 {
                        let dy_at = |r: usize| g[r - 2] - 8.0 * g[r - 1] + 8.0 * g[r + 1] - g[r + 2];
                        let d = dy_at(c - 2 * s) - 8.0 * dy_at(c - s) + 8.0 * dy_at(c + s) - dy_at(c + 2 * s);
                        f += self.xy[j] * d;
                    }
                    *slot = f;
                }
            });
    }
}

/// `F(u) = F₀(u) + F₁(u) + F₂(u)` at the inner nodes; boundary nodes of the
/// result are zero.
pub fn apply_explicit_f(field: &GridField, model: &dyn PdeModel) -> Result<GridField> {
    field.check_finite("explicit operator input")?;
    let op = ExplicitOperator::new(field.grid(), model)?;
    let ghosts = extrapolate_ghosts(field)?;
    let mut out = GridField::zeros(*field.grid());
    op.apply_into(&ghosts, Parts::ALL, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use crate::model::{ModelParams, ZeroModel};

    fn grid(m: usize, n: usize) -> UniformGrid {
        UniformGrid::new(Domain::standard(1.0), m, n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn explicit_operator_is_exact_on_low_degree_polynomials() {
        let p = ModelParams::baseline();
        let g = grid(17, 13);
        type Poly = fn(f64, f64) -> f64;
        type Exact = fn(&CoefficientSet, f64, f64) -> f64;
        let cases: [(Poly, Exact); 4] = [
            (|_, _| 3.0, |_, _, _| 0.0),
            (|x, _| x * x, |c, x, _| 2.0 * c.a_xx + 2.0 * x * c.b_x),
            (|x, y| x * y, |c, x, y| c.a_xy + y * c.b_x + x * c.b_y),
            (
                |x, y| x.powi(3) - y.powi(4),
                |c, x, y| 6.0 * x * c.a_xx - 12.0 * y * y * c.a_yy + 3.0 * x * x * c.b_x - 4.0 * y.powi(3) * c.b_y,
            ),
        ];
        for (u, exact) in cases {
            let f = apply_explicit_f(&GridField::from_fn(g, u), &p).unwrap();
            for i in 1..g.m - 1 {
                for j in 1..g.n - 1 {
                    let (x, y) = (g.x(i), g.y(j));
                    let want = exact(&p.coefficients(y), x, y);
                    assert!(close(f.get(i, j), want, 1e-9), "({i},{j}): {} vs {want}", f.get(i, j));
                }
            }
            // boundary nodes are untouched
            assert_eq!(f.get(0, 3), 0.0);
        }
    }

    #[test]
    fn zero_model_gives_zero() {
        let g = grid(9, 9);
        let u = GridField::from_fn(g, |x, y| (x * y).sin());
        let f = apply_explicit_f(&u, &ZeroModel).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn ghosts_extend_quartics() {
        let g = grid(8, 7);
        let q = |x: f64, y: f64| 1.0 + x - 0.5 * y * y + 0.1 * x.powi(4) + x * y.powi(3);
        let ghosts = extrapolate_ghosts(&GridField::from_fn(g, q)).unwrap();
        let at = |i: isize, j: isize| q(g.domain.x_min + i as f64 * g.dx, g.domain.y_min + j as f64 * g.dy);
        for (i, j) in [(-1, 3), (8, 2), (4, -1), (5, 7), (-1, -1), (8, 7), (-1, 7), (8, -1)] {
            assert!(close(ghosts.get(i, j), at(i, j), 1e-9), "ghost ({i},{j})");
        }
        let ramp = extrapolate_ghosts(&GridField::from_fn(g, |x, y| 2.0 * x - y)).unwrap();
        assert!(close(
            ramp.get(-1, 0),
            2.0 * (g.domain.x_min - g.dx) - g.domain.y_min,
            1e-12
        ));
    }

    #[test]
    fn too_small_for_ghosts() {
        let g = grid(5, 9);
        assert!(matches!(
            extrapolate_ghosts(&GridField::zeros(g)),
            Err(Error::GridTooSmall { axis: "x", .. })
        ));
    }

    #[test]
    fn y_boundary_extrapolation_is_exact_on_quartics() {
        let g = grid(6, 11);
        let q = |x: f64, y: f64| x + y.powi(4) - 3.0 * y;
        let mut f = GridField::from_fn(g, q);
        for i in 0..g.m {
            f.set(i, 0, 99.0);
            f.set(i, g.n - 1, -99.0);
        }
        extrapolate_y_boundary(&mut f).unwrap();
        for i in 0..g.m {
            assert!(close(f.get(i, 0), q(g.x(i), g.y(0)), 1e-10));
            assert!(close(f.get(i, g.n - 1), q(g.x(i), g.y(g.n - 1)), 1e-10));
        }
        let mut partial = GridField::zeros(g);
        partial.set(0, 1, 1.0);
        extrapolate_y_boundary_cols(&mut partial, 1..g.m).unwrap();
        assert_eq!(partial.get(0, 0), 0.0);
    }

    #[test]
    fn dirichlet_values() {
        let g = grid(9, 9);
        let (l, r) = dirichlet_x(0.0, &g, 0.05);
        assert!((l - (1.0 - (-5f64).exp())).abs() < 1e-15);
        assert!((l - 0.993262).abs() < 1e-6);
        assert_eq!(r, 0.0);
        let d = DirichletX::new(&g, 0.05);
        let (t0, t1) = (0.3, 0.3 + 1e-6);
        let fd = (d.left(t1) - d.left(t0)) / 1e-6;
        assert!((fd - d.left_flux(t0)).abs() < 1e-9);
        let mut f = GridField::zeros(g);
        d.apply(&mut f, 1.0);
        assert_eq!(f.get(0, 4), d.left(1.0));
        assert_eq!(f.get(8, 4), 0.0);
    }

    #[test]
    fn compact_rows_reduce_to_numerov_without_convection() {
        let h = 0.1;
        let row = compact_row_x(
            &LineOde {
                c1: 0.0,
                diffusion: 2.0,
                ..Default::default()
            },
            h,
        );
        assert!(close(row.a[0], 2.0 / (h * h), 1e-14) && close(row.a[1], -4.0 / (h * h), 1e-14));
        assert_eq!(row.b, [1.0 / 12.0, 10.0 / 12.0, 1.0 / 12.0]);
    }

    #[test]
    fn normalised_rows_match_closed_form() {
        let (c1, c2, h) = (1.7, 3.0, 0.05);
        let (a, b) = hoc_triples(c1, c2, h);
        let row = compact_row_x(
            &LineOde {
                c1,
                diffusion: 1.0 / c2,
                ..Default::default()
            },
            h,
        );
        for k in 0..3 {
            assert!(close(row.a[k] * c2, a[k], 1e-13));
            assert!(close(row.b[k] * c2, b[k], 1e-13));
        }
        assert!(close(row.b.iter().sum::<f64>(), 1.0, 1e-15));
        // a y-row with constant line data is the x-row
        let line = LineOde {
            c1,
            dc1: 0.0,
            d2c1: 0.0,
            diffusion: 1.0 / c2,
        };
        let y = compact_row_y(&line, &line, &line, h);
        for k in 0..3 {
            assert!(close(y.a[k], row.a[k], 1e-13) && close(y.b[k], row.b[k], 1e-13));
        }
    }

    #[test]
    fn implicit_row_combines_sides() {
        let row = CompactRow {
            a: [1.0, -2.0, 1.0],
            b: [0.1, 0.8, 0.1],
        };
        assert_eq!(row.implicit(0.5), [-0.4, 1.8, -0.4]);
        assert_eq!(row.apply_a(1.0, 1.0, 1.0), 0.0);
        assert!(close(row.apply_b(1.0, 1.0, 1.0), 1.0, 1e-15));
    }

    #[test]
    fn compact_residual_is_fourth_order_along_lines() {
        // u = e^{sin y}, line operator with the model's y-coefficients
        let p = ModelParams::baseline();
        let u = |y: f64| y.sin().exp();
        let du = |y: f64| y.cos() * u(y);
        let d2u = |y: f64| (y.cos().powi(2) - y.sin()) * u(y);
        let mut res = Vec::new();
        for k in 5..9 {
            let d = Domain {
                y_min: 0.5,
                y_max: 1.5,
                ..Domain::standard(1.0)
            };
            let g = UniformGrid::new(d, 6, (1 << k) + 1).unwrap();
            let cy = assemble_compact_y(&g, &p).unwrap();
            let gv = |j: usize| {
                let c = p.coefficients(g.y(j));
                c.a_yy * d2u(g.y(j)) + c.b_y * du(g.y(j))
            };
            let mut r: f64 = 0.0;
            for j in 1..g.n - 1 {
                let row = &cy.rows[j];
                let v = row.apply_a(u(g.y(j - 1)), u(g.y(j)), u(g.y(j + 1))) - row.apply_b(gv(j - 1), gv(j), gv(j + 1));
                r = r.max(v.abs());
            }
            res.push(r);
        }
        for w in res.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((3.6..4.4).contains(&order), "{res:?}");
        }
    }

    #[test]
    fn rows_csv() {
        let g = grid(6, 6);
        let cx = assemble_compact_x(&g, &ModelParams::baseline()).unwrap();
        let mut out = Vec::new();
        write_rows_csv(&cx.rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("row,a_m1,a_0,a_p1,b_m1,b_0,b_p1\n1,"));
    }

    #[test]
    fn degenerate_y_rejected() {
        let d = Domain {
            y_min: 0.0,
            ..Domain::standard(1.0)
        };
        if let Ok(g) = UniformGrid::new(d, 6, 6) {
            assert!(assemble_compact_x(&g, &ModelParams::baseline()).is_err());
        }
    }
}
