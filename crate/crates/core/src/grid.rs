//! Truncated domain, level-indexed uniform meshes, time partitions and
//! nodal fields.
//!
//! Node `(i, j)` here is 0-based: `x_i = L1 + i·Δx` for `i = 0..M`.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Truncated computational rectangle `[L1, K1] × [L2, K2]` and horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub horizon: f64,
}

impl Domain {
    /// `L1 = −5, K1 = 1.5, L2 = 0.05, K2 = 2.5` with the given horizon.
    pub fn standard(horizon: f64) -> Self {
        Domain {
            x_min: -5.0,
            x_max: 1.5,
            y_min: 0.05,
            y_max: 2.5,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, expected| Err(Error::InvalidParameter { name, value, expected });
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return bad("x_max", self.x_max, "L1 < K1");
        }
        if !(self.y_min.is_finite() && self.y_min > 0.0) {
            return bad("y_min", self.y_min, "L2 > 0");
        }
        if !(self.y_max.is_finite() && self.y_min < self.y_max) {
            return bad("y_max", self.y_max, "L2 < K2");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon", self.horizon, "T > 0");
        }
        Ok(())
    }

    pub fn width_x(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn width_y(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Refinement multi-index `(l1, l2)`: the mesh has `2^l + 1` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelIndex {
    pub l1: u32,
    pub l2: u32,
}

impl LevelIndex {
    pub fn new(l1: u32, l2: u32) -> Self {
        LevelIndex { l1, l2 }
    }

    pub fn uniform(l: u32) -> Self {
        LevelIndex { l1: l, l2: l }
    }

    pub fn sum(&self) -> u32 {
        self.l1 + self.l2
    }
}

impl fmt::Display for LevelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.l1, self.l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub domain: Domain,
    pub m: usize,
    pub n: usize,
    pub dx: f64,
    pub dy: f64,
}

impl UniformGrid {
    pub fn new(domain: Domain, m: usize, n: usize) -> Result<Self> {
        domain.validate()?;
        if m < 2 {
            return Err(Error::GridTooSmall {
                axis: "x",
                needed: 2,
                have: m,
            });
        }
        if n < 2 {
            return Err(Error::GridTooSmall {
                axis: "y",
                needed: 2,
                have: n,
            });
        }
        Ok(UniformGrid {
            domain,
            m,
            n,
            dx: domain.width_x() / (m - 1) as f64,
            dy: domain.width_y() / (n - 1) as f64,
        })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.domain.x_min + i as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.domain.y_min + j as f64 * self.dy
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.y(j)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.m * self.n
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.dx / self.dy
    }
}

/// Mesh for refinement level `level`: `M = 2^{l1} + 1`, `N = 2^{l2} + 1`.
pub fn grid_from_level(domain: Domain, level: LevelIndex) -> Result<UniformGrid> {
    let nodes = |l: u32| -> Result<usize> {
        if l >= usize::BITS - 2 {
            return Err(Error::LevelOverflow { level: l });
        }
        Ok((1usize << l) + 1)
    };
    UniformGrid::new(domain, nodes(level.l1)?, nodes(level.l2)?)
}

/// Uniform time partition with a possibly shortened final step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub steps: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
                expected: "dt > 0",
            });
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: horizon,
                expected: "T >= 0",
            });
        }
        let ratio = horizon / dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(TimeGrid { steps, dt, horizon })
    }

    /// Length of the final step; equals `dt` unless the partition is ragged.
    pub fn last_step(&self) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        let rest = self.horizon - (self.steps - 1) as f64 * self.dt;
        if (rest - self.dt).abs() <= 1e-12 * self.dt {
            self.dt
        } else {
            rest
        }
    }

    pub fn is_ragged(&self) -> bool {
        self.steps > 0 && self.last_step() != self.dt
    }

    /// `(τ_start, Δt)` of every step.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.steps).map(move |k| {
            let dt = if k + 1 == self.steps { self.last_step() } else { self.dt };
            (k as f64 * self.dt, dt)
        })
    }
}

/// `Δt = c·Δ²` over `[0, T]`.
pub fn timegrid_for(delta: f64, horizon: f64, factor: f64) -> Result<TimeGrid> {
    if !(delta > 0.0 && factor > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta.min(factor),
            expected: "positive mesh scale and time-step factor",
        });
    }
    TimeGrid::new(horizon, factor * delta * delta)
}

/// Error-measurement region: spot in `[lo·E, hi·E]`, scaled variance in
/// `[y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRegion {
    pub spot_lo: f64,
    pub spot_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Default for EvalRegion {
    fn default() -> Self {
        EvalRegion {
            spot_lo: 0.5,
            spot_hi: 2.0,
            y_lo: 0.05,
            y_hi: 1.0,
        }
    }
}

impl EvalRegion {
    pub fn x_bounds(&self) -> (f64, f64) {
        (self.spot_lo.ln(), self.spot_hi.ln())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        const TOL: f64 = 1e-12;
        let (x_lo, x_hi) = self.x_bounds();
        x >= x_lo - TOL && x <= x_hi + TOL && y >= self.y_lo - TOL && y <= self.y_hi + TOL
    }
}

/// Nodes of `grid` inside `region`; the spot bounds are relative to the
/// strike so they map to fixed log-moneyness bounds.
pub fn eval_region_mask(grid: &UniformGrid, region: &EvalRegion) -> Result<Vec<(usize, usize)>> {
    let mask: Vec<_> = (0..grid.m)
        .flat_map(|i| (0..grid.n).map(move |j| (i, j)))
        .filter(|&(i, j)| region.contains(grid.x(i), grid.y(j)))
        .collect();
    if mask.is_empty() {
        Err(Error::EmptyRegion)
    } else {
        Ok(mask)
    }
}

/// Nodal values on a grid, stored with `j` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: UniformGrid) -> Self {
        GridField {
            values: vec![0.0; grid.node_count()],
            grid,
        }
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..grid.m {
            let x = grid.x(i);
            for j in 0..grid.n {
                values.push(f(x, grid.y(j)));
            }
        }
        GridField { grid, values }
    }

    pub fn from_values(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        Ok(GridField { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.grid.n + j] = value;
    }

    /// Values along `y` at fixed `i`.
    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.grid.n;
        &self.values[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.n;
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// First non-finite node, reported as an error naming `stage`.
    pub fn check_finite(&self, stage: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::NonFinite {
                stage,
                i: k / self.grid.n,
                j: k % self.grid.n,
            }),
        }
    }

    /// CSV: header row of y-coordinates, then one row per x-node with the
    /// x-coordinate in the first column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "x\\y")?;
        for y in self.grid.ys() {
            write!(out, ",{y}")?;
        }
        writeln!(out)?;
        for i in 0..self.grid.m {
            write!(out, "{}", self.grid.x(i))?;
            for v in self.column(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Binary dump: `b"VGF1"`, `M` and `N` as little-endian `u32`, then
    /// `M·N` little-endian `f64` with `j` fastest.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.grid.m as u32).to_le_bytes())?;
        out.write_all(&(self.grid.n as u32).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a binary dump onto `grid`; the dimensions must match.
    pub fn read_binary<R: Read>(grid: UniformGrid, mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let m = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        if (m, n) != (grid.m, grid.n) {
            return Err(Error::Format(format!(
                "dimensions {m}x{n} do not match grid {}x{}",
                grid.m, grid.n
            )));
        }
        let mut values = Vec::with_capacity(m * n);
        let mut buf = [0u8; 8];
        for _ in 0..m * n {
            input.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        if input.read(&mut buf)? != 0 {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(GridField { grid, values })
    }
}

const MAGIC: &[u8; 4] = b"VGF1";

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn standard() -> Domain {
        Domain::standard(1.0)
    }

    #[test]
    fn level_examples() {
        let g = grid_from_level(standard(), LevelIndex::uniform(3)).unwrap();
        assert_eq!((g.m, g.n), (9, 9));
        assert_relative_eq!(g.dx, 0.8125, epsilon = 1e-15);
        assert_relative_eq!(g.dy, 0.30625, epsilon = 1e-15);

        let g = grid_from_level(standard(), LevelIndex::uniform(0)).unwrap();
        assert_eq!((g.m, g.n), (2, 2));
        assert_eq!(g.dx, 6.5);

        let g = grid_from_level(standard(), LevelIndex::uniform(8)).unwrap();
        assert_eq!((g.m, g.n), (257, 257));
        assert!(grid_from_level(standard(), LevelIndex::new(80, 1)).is_err());
    }

    #[test]
    fn timegrid_examples() {
        let t = timegrid_for(1.0 / 16.0, 1.0, 5.0).unwrap();
        assert_relative_eq!(t.dt, 5.0 / 256.0);
        assert_eq!(t.steps, 52);
        assert!(t.is_ragged());
        assert_relative_eq!(t.last_step(), 1.0 - 51.0 * 5.0 / 256.0, epsilon = 1e-15);
        let total: f64 = t.steps().map(|(_, dt)| dt).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-13);

        let t = timegrid_for(1.0, 5.0, 5.0).unwrap();
        assert_eq!((t.steps, t.dt), (1, 5.0));
        assert!(!t.is_ragged());

        let t = timegrid_for(1.0 / 256.0, 1.0, 5.0).unwrap();
        assert_eq!(t.dt, 5.0 / 65536.0);
        assert_eq!(t.steps, 13108);
    }

    #[test]
    fn mask_examples() {
        let region = EvalRegion::default();
        let g = grid_from_level(standard(), LevelIndex::uniform(8)).unwrap();
        let mask = eval_region_mask(&g, &region).unwrap();
        assert!(!mask.is_empty());
        for &(i, j) in &mask {
            assert!(g.x(i).abs() <= 0.6932);
            assert!(g.y(j) >= 0.05 - 1e-12 && g.y(j) <= 1.0 + 1e-12);
        }

        let coarse = grid_from_level(standard(), LevelIndex::uniform(0)).unwrap();
        assert!(matches!(eval_region_mask(&coarse, &region), Err(Error::EmptyRegion)));

        // bounds pinned to single node coordinates
        let point = EvalRegion {
            spot_lo: g.x(200).exp(),
            spot_hi: g.x(200).exp(),
            y_lo: g.y(10),
            y_hi: g.y(10),
        };
        assert_eq!(eval_region_mask(&g, &point).unwrap(), vec![(200, 10)]);
    }

    #[test]
    fn mask_monotone_under_refinement() {
        let region = EvalRegion::default();
        for l in 3..8 {
            let coarse = grid_from_level(standard(), LevelIndex::uniform(l)).unwrap();
            let fine = grid_from_level(standard(), LevelIndex::uniform(l + 1)).unwrap();
            let fine_mask = eval_region_mask(&fine, &region).unwrap();
            for (i, j) in eval_region_mask(&coarse, &region).unwrap() {
                assert!(fine_mask.contains(&(2 * i, 2 * j)));
            }
        }
    }

    #[test]
    fn refinement_halves_spacing() {
        for l in 0..10 {
            let g = grid_from_level(standard(), LevelIndex::new(l, 2)).unwrap();
            let f = grid_from_level(standard(), LevelIndex::new(l + 1, 2)).unwrap();
            assert_eq!(f.m - 1, 2 * (g.m - 1));
            assert_eq!(f.dx, g.dx / 2.0);
        }
    }

    #[test]
    fn binary_round_trip_and_errors() {
        let g = grid_from_level(standard(), LevelIndex::new(3, 4)).unwrap();
        let field = GridField::from_fn(g, |x, y| x.sin() * y);
        let mut bytes = Vec::new();
        field.write_binary(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"VGF1");
        assert_eq!(bytes.len(), 12 + 8 * 9 * 17);
        let back = GridField::read_binary(g, bytes.as_slice()).unwrap();
        assert_eq!(back, field);

        let other = grid_from_level(standard(), LevelIndex::new(4, 3)).unwrap();
        assert!(GridField::read_binary(other, bytes.as_slice()).is_err());
        bytes[0] = b'X';
        assert!(GridField::read_binary(g, bytes.as_slice()).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = UniformGrid::new(standard(), 2, 3).unwrap();
        let field = GridField::from_fn(g, |x, y| x + y);
        let mut out = Vec::new();
        field.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let header: Vec<_> = lines[0].split(',').collect();
        assert_eq!(header[0], "x\\y");
        let ys: Vec<f64> = header[1..].iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(ys.len(), 3);
        assert!((ys[1] - 1.275).abs() < 1e-15 && ys[2] == 2.5);
        assert!(lines[1].starts_with("-5,"));
    }

    #[test]
    fn non_finite_is_reported() {
        let g = UniformGrid::new(standard(), 4, 4).unwrap();
        let mut field = GridField::zeros(g);
        field.set(2, 3, f64::NAN);
        match field.check_finite("probe") {
            Err(Error::NonFinite { stage, i, j }) => assert_eq!((stage, i, j), ("probe", 2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn node_spacing_is_affine(l1 in 0u32..12, l2 in 0u32..12) {
            let g = grid_from_level(standard(), LevelIndex::new(l1, l2)).unwrap();
            for i in 0..g.m - 1 {
                let d = g.x(i + 1) - g.x(i);
                prop_assert!((d - g.dx).abs() <= 8.0 * f64::EPSILON * g.x(i).abs().max(g.dx));
            }
            for j in 0..g.n - 1 {
                let d = g.y(j + 1) - g.y(j);
                prop_assert!((d - g.dy).abs() <= 8.0 * f64::EPSILON * g.y(j + 1).abs().max(g.dy));
            }
        }
    }
}
