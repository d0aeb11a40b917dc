//! Uniform Cartesian grid on `Ω = (-1,1)²` with second-order
//! finite-difference operators and boundary-trace machinery.
//!
//! Nodes are stored row-major with `y` slowest: node `(ix, iy)` has flat
//! index `iy * nx + ix`. Boundary nodes are ordered bottom edge left to
//! right, right edge bottom to top, top edge right to left, left edge top to
//! bottom, each corner appearing exactly once; this ordering is part of the
//! trace-file format. Corner normals take the vertical-edge direction.

use crate::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// Uniform grid on `(-1,1)²`.
#[derive(Debug)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    boundary: Vec<usize>,
    /// Outward unit normal per boundary node, axis-aligned.
    normals: Vec<(f64, f64)>,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Arc<Self>> {
        if nx < 5 || ny < 5 {
            return Err(Error::config(format!(
                "grid must have at least 5 nodes per axis, got {nx}x{ny}"
            )));
        }
        let mut boundary = Vec::with_capacity(2 * nx + 2 * ny - 4);
        // bottom, left to right
        for ix in 0..nx {
            boundary.push(ix);
        }
        // right, bottom to top
        for iy in 1..ny {
            boundary.push(iy * nx + (nx - 1));
        }
        // top, right to left
        for ix in (0..nx - 1).rev() {
            boundary.push((ny - 1) * nx + ix);
        }
        // left, top to bottom
        for iy in (1..ny - 1).rev() {
            boundary.push(iy * nx);
        }
        debug_assert_eq!(boundary.len(), 2 * nx + 2 * ny - 4);

        let grid = Grid2D {
            nx,
            ny,
            hx: 2.0 / (nx - 1) as f64,
            hy: 2.0 / (ny - 1) as f64,
            boundary,
            normals: Vec::new(),
        };
        let normals = grid
            .boundary
            .iter()
            .map(|&idx| {
                let (ix, iy) = grid.coords(idx);
                // Vertical edges take precedence so that corners get the
                // vertical-edge normal.
                if ix == 0 {
                    (-1.0, 0.0)
                } else if ix == nx - 1 {
                    (1.0, 0.0)
                } else if iy == 0 {
                    (0.0, -1.0)
                } else {
                    (0.0, 1.0)
                }
            })
            .collect();
        Ok(Arc::new(Grid2D { normals, ..grid }))
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

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn xy(&self, idx: usize) -> (f64, f64) {
        let (ix, iy) = self.coords(idx);
        (-1.0 + ix as f64 * self.hx, -1.0 + iy as f64 * self.hy)
    }

    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        let (ix, iy) = self.coords(idx);
        ix > 0 && ix < self.nx - 1 && iy > 0 && iy < self.ny - 1
    }

    /// Flat indices of interior nodes, in flat-index order.
    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&i| self.is_interior(i))
    }

    pub fn n_interior(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    /// Boundary node indices in trace order (bottom, right, top, left).
    pub fn boundary_indices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Outward unit normal of the `b`-th boundary node.
    pub fn normal(&self, b: usize) -> (f64, f64) {
        self.normals[b]
    }

    pub fn is_corner(&self, idx: usize) -> bool {
        let (ix, iy) = self.coords(idx);
        (ix == 0 || ix == self.nx - 1) && (iy == 0 || iy == self.ny - 1)
    }

    /// Trapezoid quadrature weight of a node (`hx·hy`, halved on edges,
    /// quartered at corners).
    pub fn node_weight(&self, idx: usize) -> f64 {
        let (ix, iy) = self.coords(idx);
        let wx = if ix == 0 || ix == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if iy == 0 || iy == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx * self.hy
    }

    /// The two nodes stepping inward from boundary node `b` along the
    /// normal, together with the spacing along that axis.
    pub(crate) fn inward_pair(&self, b: usize) -> (usize, usize, f64) {
        let idx = self.boundary[b];
        let (ix, iy) = self.coords(idx);
        let (nnx, _) = self.normals[b];
        if nnx != 0.0 {
            let step: isize = if nnx > 0.0 { -1 } else { 1 };
            let i1 = (ix as isize + step) as usize;
            let i2 = (ix as isize + 2 * step) as usize;
            (self.index(i1, iy), self.index(i2, iy), self.hx)
        } else {
            let (_, nny) = self.normals[b];
            let step: isize = if nny > 0.0 { -1 } else { 1 };
            let j1 = (iy as isize + step) as usize;
            let j2 = (iy as isize + 2 * step) as usize;
            (self.index(ix, j1), self.index(ix, j2), self.hy)
        }
    }
}

/// Nodal values of one scalar quantity on a shared grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid2D>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        ScalarField {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.n_nodes())
            .map(|i| {
                let (x, y) = grid.xy(i);
                f(x, y)
            })
            .collect();
        ScalarField {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn scale(&self, a: f64) -> ScalarField {
        ScalarField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += a * o;
        }
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid-weighted discrete `L²(Ω)` norm.
    pub fn l2(&self) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.node_weight(i) * v * v)
            .sum();
        sum.sqrt()
    }

    /// Maximum absolute value over interior nodes.
    pub fn interior_linf(&self) -> f64 {
        self.grid
            .interior_indices()
            .fold(0.0, |m: f64, i| m.max(self.values[i].abs()))
    }

    /// Five-point Laplacian at interior nodes; boundary rows are zero.
    pub fn laplacian(&self) -> ScalarField {
        let g = Arc::clone(&self.grid);
        let (nx, ny) = (g.nx, g.ny);
        let ihx2 = 1.0 / (g.hx * g.hx);
        let ihy2 = 1.0 / (g.hy * g.hy);
        let mut out = ScalarField::zeros(&g);
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                let c = self.at(ix, iy);
                out.values[g.index(ix, iy)] = (self.at(ix + 1, iy) + self.at(ix - 1, iy)
                    - 2.0 * c)
                    * ihx2
                    + (self.at(ix, iy + 1) + self.at(ix, iy - 1) - 2.0 * c) * ihy2;
            }
        }
        out
    }

    /// Gradient: central differences where both neighbours exist, one-sided
    /// second-order stencils on the edges.
    pub fn gradient(&self) -> VectorField2 {
        let g = Arc::clone(&self.grid);
        let mut dx = ScalarField::zeros(&g);
        let mut dy = ScalarField::zeros(&g);
        let (nx, ny) = (g.nx, g.ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let i = g.index(ix, iy);
                dx.values[i] = if ix == 0 {
                    (-3.0 * self.at(0, iy) + 4.0 * self.at(1, iy) - self.at(2, iy)) / (2.0 * g.hx)
                } else if ix == nx - 1 {
                    (3.0 * self.at(nx - 1, iy) - 4.0 * self.at(nx - 2, iy) + self.at(nx - 3, iy))
                        / (2.0 * g.hx)
                } else {
                    (self.at(ix + 1, iy) - self.at(ix - 1, iy)) / (2.0 * g.hx)
                };
                dy.values[i] = if iy == 0 {
                    (-3.0 * self.at(ix, 0) + 4.0 * self.at(ix, 1) - self.at(ix, 2)) / (2.0 * g.hy)
                } else if iy == ny - 1 {
                    (3.0 * self.at(ix, ny - 1) - 4.0 * self.at(ix, ny - 2) + self.at(ix, ny - 3))
                        / (2.0 * g.hy)
                } else {
                    (self.at(ix, iy + 1) - self.at(ix, iy - 1)) / (2.0 * g.hy)
                };
            }
        }
        VectorField2 { x: dx, y: dy }
    }

    /// Outward normal derivative per boundary node (trace order), by the
    /// second-order one-sided stencil `(3 f_b - 4 f_{b-νh} + f_{b-2νh}) / 2h`.
    pub fn normal_derivative(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.n_boundary())
            .map(|b| {
                let idx = g.boundary[b];
                let (i1, i2, h) = g.inward_pair(b);
                (3.0 * self.values[idx] - 4.0 * self.values[i1] + self.values[i2]) / (2.0 * h)
            })
            .collect()
    }

    /// Laplacian evaluated at the boundary nodes (trace order), using
    /// central second differences along the edge and the second-order
    /// one-sided stencil `(2f_0 - 5f_1 + 4f_2 - f_3)/h²` into the domain.
    pub fn boundary_laplacian(&self) -> Vec<f64> {
        let g = &self.grid;
        let d2 = |vals: [f64; 4], h: f64| {
            (2.0 * vals[0] - 5.0 * vals[1] + 4.0 * vals[2] - vals[3]) / (h * h)
        };
        (0..g.n_boundary())
            .map(|b| {
                let idx = g.boundary[b];
                let (ix, iy) = g.coords(idx);
                let dxx = if ix == 0 {
                    d2(
                        [self.at(0, iy), self.at(1, iy), self.at(2, iy), self.at(3, iy)],
                        g.hx,
                    )
                } else if ix == g.nx - 1 {
                    d2(
                        [
                            self.at(g.nx - 1, iy),
                            self.at(g.nx - 2, iy),
                            self.at(g.nx - 3, iy),
                            self.at(g.nx - 4, iy),
                        ],
                        g.hx,
                    )
                } else {
                    (self.at(ix + 1, iy) - 2.0 * self.at(ix, iy) + self.at(ix - 1, iy))
                        / (g.hx * g.hx)
                };
                let dyy = if iy == 0 {
                    d2(
                        [self.at(ix, 0), self.at(ix, 1), self.at(ix, 2), self.at(ix, 3)],
                        g.hy,
                    )
                } else if iy == g.ny - 1 {
                    d2(
                        [
                            self.at(ix, g.ny - 1),
                            self.at(ix, g.ny - 2),
                            self.at(ix, g.ny - 3),
                            self.at(ix, g.ny - 4),
                        ],
                        g.hy,
                    )
                } else {
                    (self.at(ix, iy + 1) - 2.0 * self.at(ix, iy) + self.at(ix, iy - 1))
                        / (g.hy * g.hy)
                };
                dxx + dyy
            })
            .collect()
    }

    /// Writes the field CSV: `# field <name> nx=<nx> ny=<ny>`, then `ny` rows
    /// of `nx` values, `y` increasing by row and `x` by column.
    pub fn write_csv<W: Write>(&self, name: &str, mut w: W) -> Result<()> {
        let g = &self.grid;
        writeln!(w, "# field {name} nx={} ny={}", g.nx, g.ny)?;
        for iy in 0..g.ny {
            let row: Vec<String> = (0..g.nx).map(|ix| format!("{}", self.at(ix, iy))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Two-component vector field on a shared grid.
#[derive(Debug, Clone)]
pub struct VectorField2 {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField2 {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        VectorField2 {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut x = ScalarField::zeros(grid);
        let mut y = ScalarField::zeros(grid);
        for i in 0..grid.n_nodes() {
            let (px, py) = grid.xy(i);
            let (vx, vy) = f(px, py);
            x.values[i] = vx;
            y.values[i] = vy;
        }
        VectorField2 { x, y }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.x.grid
    }

    pub fn scale(&self, a: f64) -> VectorField2 {
        VectorField2 {
            x: self.x.scale(a),
            y: self.y.scale(a),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField2) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn linf(&self) -> f64 {
        self.x.linf().max(self.y.linf())
    }

    pub fn l2(&self) -> f64 {
        self.x.l2().hypot(self.y.l2())
    }

    /// `div v = ∂x v_x + ∂y v_y` with the gradient's stencils.
    pub fn divergence(&self) -> ScalarField {
        let gx = self.x.gradient();
        let gy = self.y.gradient();
        let mut out = ScalarField::zeros(self.grid());
        for i in 0..out.values.len() {
            out.values[i] = gx.x.values[i] + gy.y.values[i];
        }
        out
    }
}
