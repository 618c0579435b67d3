//! Uniform meshes of the unit interval and unit square, with the trivial
//! P1 dof map (one dof per vertex).

use crate::error::Result;
use crate::symbolic::space::DomainId;

#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    /// Vertex coordinates, `dim`-strided.
    coords: Vec<f64>,
    cells: Cells,
    domain: DomainId,
}

/// P1 Lagrange dof map: dofs are vertices, in vertex order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub ndofs: usize,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_cells(&self) -> usize {
        match &self.cells {
            Cells::Segments(c) => c.len(),
            Cells::Triangles(c) => c.len(),
        }
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell_vertices(&self, cell: usize) -> &[usize] {
        match &self.cells {
            Cells::Segments(c) => &c[cell],
            Cells::Triangles(c) => &c[cell],
        }
    }

    /// For P1 elements the cell dofs are the cell vertices.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        self.cell_vertices(cell)
    }

    pub fn dof_map(&self) -> DofMap {
        DofMap {
            ndofs: self.num_vertices(),
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.num_vertices()
    }

    /// Length (1D) or area (2D) of a cell.
    pub fn cell_measure(&self, cell: usize) -> f64 {
        match &self.cells {
            Cells::Segments(c) => {
                let [a, b] = c[cell];
                (self.coords[b] - self.coords[a]).abs()
            }
            Cells::Triangles(c) => {
                let [a, b, c_] = c[cell];
                let pa = self.vertex(a);
                let pb = self.vertex(b);
                let pc = self.vertex(c_);
                0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
                    .abs()
            }
        }
    }

    /// Shortest edge over all cells; the mesh scale entering CFL bounds.
    pub fn h_min(&self) -> f64 {
        let mut h = f64::INFINITY;
        match &self.cells {
            Cells::Segments(cells) => {
                for [a, b] in cells {
                    h = h.min((self.coords[*b] - self.coords[*a]).abs());
                }
            }
            Cells::Triangles(cells) => {
                for [a, b, c] in cells {
                    for (i, j) in [(*a, *b), (*b, *c), (*c, *a)] {
                        let pi = self.vertex(i);
                        let pj = self.vertex(j);
                        let d = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                        h = h.min(d);
                    }
                }
            }
        }
        h
    }

    /// Dofs on the domain boundary (coordinate test on the unit
    /// interval/square).
    pub fn boundary_dofs(&self) -> Vec<usize> {
        let tol = 1e-12;
        let mut out = Vec::new();
        for i in 0..self.num_vertices() {
            let p = self.vertex(i);
            let on_boundary = match self.dim {
                1 => p[0] < tol || p[0] > 1.0 - tol,
                _ => p[0] < tol || p[0] > 1.0 - tol || p[1] < tol || p[1] > 1.0 - tol,
            };
            if on_boundary {
                out.push(i);
            }
        }
        out
    }
}

/// Uniform mesh of [0, 1] with `n` segments and `n + 1` vertices.
pub fn unit_interval_mesh(n: usize) -> Result<Mesh> {
    assert!(n >= 1, "need at least one cell");
    let coords: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let cells = (0..n).map(|i| [i, i + 1]).collect();
    Ok(Mesh {
        dim: 1,
        coords,
        cells: Cells::Segments(cells),
        domain: DomainId::fresh(1),
    })
}

/// Uniform triangulation of the unit square with `nx * ny` quads, each
/// split along the lower-left to upper-right diagonal: `2 * nx * ny`
/// triangles.
pub fn unit_square_mesh(nx: usize, ny: usize) -> Result<Mesh> {
    assert!(nx >= 1 && ny >= 1, "need at least one cell per direction");
    let mut coords = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            coords.push(i as f64 / nx as f64);
            coords.push(j as f64 / ny as f64);
        }
    }
    let index = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (ll, lr) = (index(i, j), index(i + 1, j));
            let (ul, ur) = (index(i, j + 1), index(i + 1, j + 1));
            cells.push([ll, lr, ur]);
            cells.push([ll, ur, ul]);
        }
    }
    Ok(Mesh {
        dim: 2,
        coords,
        cells: Cells::Triangles(cells),
        domain: DomainId::fresh(2),
    })
}
