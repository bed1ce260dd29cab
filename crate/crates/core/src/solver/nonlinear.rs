//! Assembly and the damped Picard/Newton iteration.

use nalgebra::{Const, U1};
use num_dual::DualSVec64;

use super::kernels::Kernel;
use super::sparse::SparseSystem;
use crate::mesh::Mesh;

/// A discretized steady problem: kernel, dof layout and Dirichlet data.
pub(crate) struct Problem<K: Kernel> {
    pub kernel: K,
    pub ndof: usize,
    pub elem_dofs: Vec<Vec<usize>>,
    pub fixed: Vec<bool>,
    pub fixed_values: Vec<f64>,
    /// Field groups (indices within a node) used for the convergence measure.
    pub groups: Vec<Vec<usize>>,
    system: SparseSystem,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NonlinearOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub picard_iters: usize,
    pub relaxation: f64,
    pub newton: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub converged: bool,
    /// Relative correction per iteration.
    pub history: Vec<f64>,
    pub message: String,
}

impl<K: Kernel> Problem<K> {
    pub fn new(mesh: &Mesh, kernel: K, fixed: Vec<Option<f64>>, groups: Vec<Vec<usize>>) -> Self {
        let ndof = kernel.ndof();
        let elem_dofs: Vec<Vec<usize>> = mesh
            .elements
            .iter()
            .map(|t| t.iter().flat_map(|&n| (0..ndof).map(move |f| n * ndof + f)).collect())
            .collect();
        let n = mesh.n_nodes() * ndof;
        assert_eq!(fixed.len(), n);
        let system = SparseSystem::new(n, &elem_dofs);
        Self {
            kernel,
            ndof,
            elem_dofs,
            fixed: fixed.iter().map(Option::is_some).collect(),
            fixed_values: fixed.iter().map(|v| v.unwrap_or(0.0)).collect(),
            groups,
            system,
        }
    }

    pub fn n(&self) -> usize {
        self.fixed.len()
    }

    pub fn apply_fixed(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            if self.fixed[i] {
                x[i] = self.fixed_values[i];
            }
        }
    }

    /// Residual only.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut res = vec![0.0; self.n()];
        let ne = 3 * self.ndof;
        let mut xe = vec![0.0; ne];
        let mut re = vec![0.0; ne];
        for (e, dofs) in self.elem_dofs.iter().enumerate() {
            for i in 0..ne {
                xe[i] = x[dofs[i]];
            }
            self.kernel.residual(e, &xe, &mut re, false);
            for i in 0..ne {
                res[dofs[i]] += re[i];
            }
        }
        self.finish_residual(x, &mut res);
        res
    }

    fn finish_residual(&self, x: &[f64], res: &mut [f64]) {
        for i in 0..res.len() {
            if self.fixed[i] {
                res[i] = x[i] - self.fixed_values[i];
            }
        }
    }

    /// Residual and Jacobian into the sparse system.
    fn assemble(&mut self, x: &[f64], frozen: bool) -> Vec<f64> {
        match 3 * self.ndof {
            9 => self.assemble_n::<9>(x, frozen),
            12 => self.assemble_n::<12>(x, frozen),
            30 => self.assemble_n::<30>(x, frozen),
            ne => panic!("unsupported element size {ne}"),
        }
    }

    fn assemble_n<const N: usize>(&mut self, x: &[f64], frozen: bool) -> Vec<f64> {
        let mut res = vec![0.0; self.n()];
        self.system.clear();
        let mut block = vec![0.0; N * N];
        let zero = DualSVec64::<N>::from_re(0.0);
        for e in 0..self.elem_dofs.len() {
            let dofs = &self.elem_dofs[e];
            let xe: [DualSVec64<N>; N] = std::array::from_fn(|i| DualSVec64::from_re(x[dofs[i]]).derivative(i));
            let mut re = [zero; N];
            self.kernel.residual(e, &xe, &mut re, frozen);
            for i in 0..N {
                res[dofs[i]] += re[i].re;
                let row = re[i].eps.unwrap_generic(Const::<N>, U1);
                block[i * N..(i + 1) * N].copy_from_slice(row.as_slice());
            }
            self.system.add_element(e, &block, dofs, &self.fixed);
        }
        self.system.set_identity_rows(&self.fixed);
        self.finish_residual(x, &mut res);
        res
    }

    /// Largest per-group ratio of RMS correction to RMS value. A group whose
    /// values are negligible against the largest group (zero pressure in
    /// plane Couette flow, say) is measured against `1e-3` of that group.
    fn relative_correction(&self, x: &[f64], dx: &[f64]) -> f64 {
        let nodes = x.len() / self.ndof;
        let sums: Vec<(f64, f64)> = self
            .groups
            .iter()
            .map(|group| {
                let (mut nx, mut nd) = (0.0, 0.0);
                for node in 0..nodes {
                    for &f in group {
                        let i = node * self.ndof + f;
                        nx += x[i] * x[i];
                        nd += dx[i] * dx[i];
                    }
                }
                let m = (nodes * group.len()).max(1) as f64;
                ((nx / m).sqrt(), (nd / m).sqrt())
            })
            .collect();
        let floor = 1e-3 * sums.iter().map(|s| s.0).fold(0.0, f64::max);
        sums.iter()
            .filter(|s| s.1 > 0.0)
            .map(|&(nx, nd)| nd / nx.max(floor).max(1e-300))
            .fold(0.0, f64::max)
    }

    /// Damped Picard warm-up followed by Newton with backtracking.
    pub fn solve(&mut self, mut x: Vec<f64>, opts: &NonlinearOptions) -> Outcome {
        self.apply_fixed(&mut x);
        let mut history = Vec::new();
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        for it in 0..opts.max_iters {
            let picard = !opts.newton || it < opts.picard_iters;
            let res = self.assemble(&x, picard);
            let r0 = norm(&res);
            if !r0.is_finite() {
                return Outcome { x, converged: false, history, message: "non-finite residual".into() };
            }
            let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            let dx = match self.system.solve(&rhs) {
                Ok(d) => d,
                Err(msg) => return Outcome { x, converged: false, history, message: msg },
            };
            let rel = self.relative_correction(&x, &dx);
            history.push(rel);
            if picard {
                let w = opts.relaxation;
                x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += w * di);
            } else {
                let mut t = 1.0;
                let mut best: Option<(f64, f64)> = None;
                loop {
                    let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
                    let rt = norm(&self.residual(&trial));
                    if rt.is_finite() && best.is_none_or(|(_, r)| rt < r) {
                        best = Some((t, rt));
                    }
                    if (rt.is_finite() && rt <= (1.0 - 1e-4 * t) * r0) || t < 1.0 / 64.0 {
                        break;
                    }
                    t *= 0.5;
                }
                let Some((t, _)) = best else {
                    return Outcome { x, converged: false, history, message: "line search failed".into() };
                };
                x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += t * di);
            }
            if rel <= opts.tol {
                return Outcome { x, converged: true, history, message: String::new() };
            }
        }
        Outcome { x, converged: false, history, message: format!("no convergence in {} iterations", opts.max_iters) }
    }
}
