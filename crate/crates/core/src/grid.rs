//! Uniform grids on intervals and rectangles, nodal fields, and the
//! discrete Laplacian stencils shared by every solver.
//!
//! Boundary handling convention: solution fields carry their boundary
//! values explicitly (the solvers keep them at the Dirichlet value 0),
//! and the Laplacian of any field is defined as 0 at boundary nodes so
//! stencils never branch.

use crate::error::{Error, Result};
use std::io::Write;

/// Uniform 1D grid on [a, b] with `n` subdivisions (`n + 1` nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    /// Subdivision count; interior nodes are 1..n-1.
    pub n: usize,
    pub h: f64,
}

/// Uniform 2D grid on [ax, bx] x [ay, by] with equal spacing in both axes.
///
/// Nodes are indexed row-major with x fastest: `idx = iy * (nx + 1) + ix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub ax: f64,
    pub bx: f64,
    pub ay: f64,
    pub by: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

/// A 1D or 2D uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    OneD(Grid1D),
    TwoD(Grid2D),
}

/// Build a uniform interval grid with `n` subdivisions.
pub fn build_grid_1d(a: f64, b: f64, n: usize) -> Result<Grid> {
    let ordered = b > a;
    if !ordered {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] has nonpositive length"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 subdivisions, got {n}"
        )));
    }
    let h = (b - a) / n as f64;
    Ok(Grid::OneD(Grid1D { a, b, n, h }))
}

/// Build a rectangle grid with equal spacing in both axes.
///
/// The two subdivision counts must give the same spacing, i.e. the
/// rectangle dimensions must be integer multiples of one h.
pub fn build_grid_2d(ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize) -> Result<Grid> {
    let ordered = bx > ax && by > ay;
    if !ordered {
        return Err(Error::InvalidArgument(
            "rectangle has a nonpositive side".into(),
        ));
    }
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 subdivisions per axis, got {nx} x {ny}"
        )));
    }
    let hx = (bx - ax) / nx as f64;
    let hy = (by - ay) / ny as f64;
    if (hx - hy).abs() > 1e-12 * hx.abs().max(hy.abs()) {
        return Err(Error::InvalidArgument(format!(
            "unequal spacings hx={hx} hy={hy}; rectangle sides must be integer multiples of h"
        )));
    }
    Ok(Grid::TwoD(Grid2D {
        ax,
        bx,
        ay,
        by,
        nx,
        ny,
        h: hx,
    }))
}

impl Grid {
    pub fn h(&self) -> f64 {
        match self {
            Grid::OneD(g) => g.h,
            Grid::TwoD(g) => g.h,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Grid::OneD(g) => g.n + 1,
            Grid::TwoD(g) => (g.nx + 1) * (g.ny + 1),
        }
    }

    pub fn interior_count(&self) -> usize {
        match self {
            Grid::OneD(g) => g.n - 1,
            Grid::TwoD(g) => (g.nx - 1) * (g.ny - 1),
        }
    }

    /// Quadrature weight of one interior node (h in 1D, h^2 in 2D).
    pub fn node_weight(&self) -> f64 {
        match self {
            Grid::OneD(g) => g.h,
            Grid::TwoD(g) => g.h * g.h,
        }
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        match self {
            Grid::OneD(g) => idx >= 1 && idx < g.n,
            Grid::TwoD(g) => {
                let w = g.nx + 1;
                let ix = idx % w;
                let iy = idx / w;
                ix >= 1 && ix < g.nx && iy >= 1 && iy < g.ny
            }
        }
    }

    /// Coordinates of a node; y is 0 on interval grids.
    pub fn node_coords(&self, idx: usize) -> (f64, f64) {
        match self {
            Grid::OneD(g) => (g.a + idx as f64 * g.h, 0.0),
            Grid::TwoD(g) => {
                let w = g.nx + 1;
                let ix = idx % w;
                let iy = idx / w;
                (g.ax + ix as f64 * g.h, g.ay + iy as f64 * g.h)
            }
        }
    }

    /// Flat indices of all interior nodes, in storage order.
    pub fn interior_indices(&self) -> Vec<usize> {
        match self {
            Grid::OneD(g) => (1..g.n).collect(),
            Grid::TwoD(g) => {
                let w = g.nx + 1;
                let mut out = Vec::with_capacity(self.interior_count());
                for iy in 1..g.ny {
                    for ix in 1..g.nx {
                        out.push(iy * w + ix);
                    }
                }
                out
            }
        }
    }
}

/// Nodal scalar values on a grid, boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field {
            grid: *grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "field length {} does not match grid node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Field {
            grid: *grid,
            values,
        })
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

    /// Interior values in storage order.
    pub fn interior(&self) -> Vec<f64> {
        self.grid
            .interior_indices()
            .into_iter()
            .map(|i| self.values[i])
            .collect()
    }

    /// Build a field from interior values, boundary nodes set to 0.
    pub fn from_interior(grid: &Grid, interior: &[f64]) -> Result<Field> {
        if interior.len() != grid.interior_count() {
            return Err(Error::InvalidArgument(format!(
                "interior length {} does not match grid interior count {}",
                interior.len(),
                grid.interior_count()
            )));
        }
        let mut f = Field::zeros(grid);
        for (slot, &v) in grid.interior_indices().iter().zip(interior) {
            f.values[*slot] = v;
        }
        Ok(f)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Serialize as CSV (`x,value` or `x,y,value`), 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match self.grid {
            Grid::OneD(_) => {
                writeln!(w, "x,value")?;
                for (i, v) in self.values.iter().enumerate() {
                    let (x, _) = self.grid.node_coords(i);
                    writeln!(w, "{x:.14e},{v:.14e}")?;
                }
            }
            Grid::TwoD(_) => {
                writeln!(w, "x,y,value")?;
                for (i, v) in self.values.iter().enumerate() {
                    let (x, y) = self.grid.node_coords(i);
                    writeln!(w, "{x:.14e},{y:.14e},{v:.14e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluate an expression at every node (boundary values from the
/// expression itself). 1D grids pass y = 0.
pub fn sample<F: Fn(f64, f64) -> f64>(grid: &Grid, expr: F) -> Result<Field> {
    let mut values = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        let (x, y) = grid.node_coords(i);
        let v = expr(x, y);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { x, y });
        }
        values.push(v);
    }
    Field::from_values(grid, values)
}

/// Discrete Laplacian: 3-point stencil in 1D, 5-point in 2D, divided by
/// h^2; boundary nodes carry 0.
pub fn laplacian(u: &Field) -> Field {
    let mut out = Field::zeros(u.grid());
    let v = u.values();
    match *u.grid() {
        Grid::OneD(g) => {
            let h2 = g.h * g.h;
            for j in 1..g.n {
                out.values[j] = (v[j - 1] - 2.0 * v[j] + v[j + 1]) / h2;
            }
        }
        Grid::TwoD(g) => {
            let h2 = g.h * g.h;
            let w = g.nx + 1;
            for iy in 1..g.ny {
                for ix in 1..g.nx {
                    let i = iy * w + ix;
                    out.values[i] = (v[i - 1] + v[i + 1] + v[i - w] + v[i + w] - 4.0 * v[i]) / h2;
                }
            }
        }
    }
    out
}
