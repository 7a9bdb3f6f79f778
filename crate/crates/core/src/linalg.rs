//! P1 stiffness matrix and a sparse Cholesky solver on the free nodes.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::mesh::HalfDiscMesh;

/// Symmetric stiffness matrix `K_ij = int grad phi_i . grad phi_j` in CSR form.
#[derive(Debug, Clone)]
pub(crate) struct Stiffness {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl Stiffness {
    pub fn assemble(mesh: &HalfDiscMesh) -> Self {
        let n = mesh.node_count();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = mesh.shape_gradients(t);
            let a = mesh.area(t);
            for p in 0..3 {
                for q in 0..3 {
                    let v = a * (g[p][0] * g[q][0] + g[p][1] * g[q][1]);
                    rows[tri[p]].push((tri[q], v));
                }
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n];
        row_start.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == c {
                    s += row[k].1;
                    k += 1;
                }
                if c == i {
                    diag[i] = s;
                }
                cols.push(c);
                vals.push(s);
            }
            row_start.push(cols.len());
        }
        Self { row_start, cols, vals, diag }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `sum_{j != i} K_ij u_j`.
    pub fn off_diagonal_dot(&self, i: usize, u: &[f64]) -> f64 {
        self.row(i).filter(|&(j, _)| j != i).map(|(j, v)| v * u[j]).sum()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.diag.len()).map(|i| self.row(i).map(|(j, v)| v * u[j]).sum()).collect()
    }
}

/// Cholesky factor of the free-free block of the stiffness matrix.
pub(crate) struct FreeSolver {
    free: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl FreeSolver {
    pub fn new(mesh: &HalfDiscMesh, k: &Stiffness) -> Result<Self> {
        let free = mesh.free_nodes();
        let mut index_of = vec![usize::MAX; mesh.node_count()];
        for (a, &i) in free.iter().enumerate() {
            index_of[i] = a;
        }
        let mut coo = CooMatrix::new(free.len(), free.len());
        for (a, &i) in free.iter().enumerate() {
            for (j, v) in k.row(i) {
                let b = index_of[j];
                if b != usize::MAX {
                    coo.push(a, b, v);
                }
            }
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).map_err(|_| Error::SingularSystem)?;
        Ok(Self { free, chol })
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Solves `K_ff x = rhs` for `rhs` indexed by free position.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DMatrix::from_column_slice(rhs.len(), 1, rhs);
        self.chol.solve(&b).as_slice().to_vec()
    }
}

/// Discrete harmonic extension of the boundary entries of `u`.
pub(crate) fn harmonic_extension(k: &Stiffness, solver: &FreeSolver, u: &mut [f64]) -> Result<()> {
    let free = solver.free();
    let mut is_free = vec![false; u.len()];
    for &i in free {
        is_free[i] = true;
    }
    let rhs: Vec<f64> = free
        .iter()
        .map(|&i| -k.row(i).filter(|&(j, _)| !is_free[j]).map(|(j, v)| v * u[j]).sum::<f64>())
        .collect();
    let x = solver.solve(&rhs);
    for (a, &i) in free.iter().enumerate() {
        u[i] = x[a];
    }
    // residual check on the free rows
    let ku = k.apply(u);
    let res: f64 = free.iter().map(|&i| ku[i] * ku[i]).sum::<f64>().sqrt();
    let rhs_norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(res <= 1e-10 * rhs_norm.max(1e-300)) && res > 1e-14 {
        return Err(Error::SingularSystem);
    }
    Ok(())
}
