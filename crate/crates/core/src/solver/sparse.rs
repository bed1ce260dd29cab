//! Fixed-pattern sparse matrix assembled from element blocks, factorized
//! with a reusable symbolic LU.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

pub(crate) struct SparseSystem {
    n: usize,
    ne: usize,
    symbolic: SymbolicSparseColMat<usize>,
    lu_symbolic: Option<SymbolicLu<usize>>,
    /// Value slot of every local `(i, j)` pair, element-major then row-major.
    slots: Vec<u32>,
    diag: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseSystem {
    /// Builds the pattern coupling all dofs of each element.
    pub fn new(n: usize, elem_dofs: &[Vec<usize>]) -> Self {
        let ne = elem_dofs.first().map_or(0, Vec::len);
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in elem_dofs {
            for &c in dofs {
                cols[c].extend_from_slice(dofs);
            }
        }
        for (c, rows) in cols.iter_mut().enumerate() {
            rows.push(c);
            rows.sort_unstable();
            rows.dedup();
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        for rows in &cols {
            row_idx.extend_from_slice(rows);
            col_ptr.push(row_idx.len());
        }
        let find = |r: usize, c: usize| -> u32 {
            let s = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            (col_ptr[c] + s.binary_search(&r).expect("entry in pattern")) as u32
        };
        let mut slots = Vec::with_capacity(elem_dofs.len() * ne * ne);
        for dofs in elem_dofs {
            for &r in dofs {
                for &c in dofs {
                    slots.push(find(r, c));
                }
            }
        }
        let diag = (0..n).map(|i| find(i, i)).collect();
        let nnz = row_idx.len();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Self { n, ne, symbolic, lu_symbolic: None, slots, diag, values: vec![0.0; nnz] }
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds a dense `ne x ne` row-major block, skipping rows flagged in `skip_row`.
    pub fn add_element(&mut self, e: usize, block: &[f64], dofs: &[usize], skip_row: &[bool]) {
        let ne = self.ne;
        let base = e * ne * ne;
        for i in 0..ne {
            if skip_row[dofs[i]] {
                continue;
            }
            for j in 0..ne {
                self.values[self.slots[base + i * ne + j] as usize] += block[i * ne + j];
            }
        }
    }

    pub fn set_identity_rows(&mut self, rows: &[bool]) {
        for (i, &fixed) in rows.iter().enumerate() {
            if fixed {
                self.values[self.diag[i] as usize] = 1.0;
            }
        }
    }

    /// Solves `A x = rhs`. The symbolic factorization is computed once.
    /// Rows are equilibrated before factorizing and the solution is
    /// polished by iterative refinement, since the stress and gradient rows
    /// of the viscoelastic system differ by orders of magnitude.
    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>, String> {
        let n = self.n;
        let rows = self.symbolic.row_idx();
        let mut scale = vec![0.0f64; n];
        for (k, v) in self.values.iter().enumerate() {
            scale[rows[k]] = scale[rows[k]].max(v.abs());
        }
        let scale: Vec<f64> = scale.iter().map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 }).collect();
        let scaled: Vec<f64> = self.values.iter().enumerate().map(|(k, v)| v * scale[rows[k]]).collect();
        let a = SparseColMatRef::new(self.symbolic.as_ref(), &scaled);
        if self.lu_symbolic.is_none() {
            self.lu_symbolic = Some(SymbolicLu::try_new(a.symbolic()).map_err(|e| format!("{e:?}"))?);
        }
        let sym = self.lu_symbolic.clone().expect("symbolic factorization");
        let lu = Lu::try_new_with_symbolic(sym, a).map_err(|e| format!("{e:?}"))?;
        let b: Vec<f64> = (0..n).map(|i| rhs[i] * scale[i]).collect();
        let x = lu.solve(Mat::<f64>::from_fn(n, 1, |i, _| b[i]));
        let mut out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        let residual = |x: &[f64]| {
            let mut r = b.clone();
            let ptr = self.symbolic.col_ptr();
            for (c, xc) in x.iter().enumerate() {
                for k in ptr[c]..ptr[c + 1] {
                    r[rows[k]] -= scaled[k] * xc;
                }
            }
            r
        };
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut r = residual(&out);
        for _ in 0..3 {
            if !(norm(&r) > 1e-14 * norm(&b)) {
                break;
            }
            let d = lu.solve(Mat::<f64>::from_fn(n, 1, |i, _| r[i]));
            let trial: Vec<f64> = (0..n).map(|i| out[i] + d[(i, 0)]).collect();
            let rt = residual(&trial);
            if !(norm(&rt) < norm(&r)) {
                break;
            }
            out = trial;
            r = rt;
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err("singular or ill-conditioned linear system".into())
        }
    }

    #[cfg(test)]
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        let cp = self.symbolic.col_ptr();
        let ri = self.symbolic.row_idx();
        for c in 0..self.n {
            for k in cp[c]..cp[c + 1] {
                d[ri[k]][c] += self.values[k];
            }
        }
        d
    }
}
