//! Quadratic interpolation models with minimum-Frobenius-norm Hessian updates.

use nalgebra::{DMatrix, DVector};

/// `q(z) = c + g·(z − center) + ½ (z − center)ᵀ H (z − center)`
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub center: DVector<f64>,
    pub c: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl Quadratic {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        let s = z - &self.center;
        self.c + self.g.dot(&s) + 0.5 * s.dot(&(&self.h * &s))
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.g + &self.h * (z - &self.center)
    }
}

/// Inverse KKT matrix of an interpolation set, shifted to `center` and
/// scaled by the largest shift `delta` for conditioning.
pub(crate) struct Interpolation {
    center: DVector<f64>,
    shifts: Vec<DVector<f64>>,
    delta: f64,
    inv: DMatrix<f64>,
}

impl Interpolation {
    pub fn new(points: &[DVector<f64>], center: &DVector<f64>) -> Option<Self> {
        let m = points.len();
        let n = center.len();
        let shifts: Vec<DVector<f64>> = points.iter().map(|p| p - center).collect();
        let delta = shifts.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if delta == 0.0 {
            return None;
        }
        let sc: Vec<DVector<f64>> = shifts.iter().map(|s| s / delta).collect();
        let size = m + n + 1;
        let mut k = DMatrix::zeros(size, size);
        for i in 0..m {
            for j in 0..m {
                k[(i, j)] = 0.5 * sc[i].dot(&sc[j]).powi(2);
            }
            k[(i, m)] = 1.0;
            k[(m, i)] = 1.0;
            for d in 0..n {
                k[(i, m + 1 + d)] = sc[i][d];
                k[(m + 1 + d, i)] = sc[i][d];
            }
        }
        let inv = k.clone().lu().try_inverse()?;
        // Reject numerically singular sets.
        let check = &inv * &k;
        let err = (check - DMatrix::identity(size, size)).amax();
        if !(err < 1e-6) {
            return None;
        }
        Some(Self { center: center.clone(), shifts, delta, inv })
    }

    fn solve(&self, r: &[f64], h_prev: &DMatrix<f64>) -> Quadratic {
        let m = self.shifts.len();
        let n = self.center.len();
        let d = self.delta;
        let h_scaled = h_prev * (d * d);
        let mut rhs = DVector::zeros(m + n + 1);
        for i in 0..m {
            let s = &self.shifts[i] / d;
            rhs[i] = r[i] - 0.5 * s.dot(&(&h_scaled * &s));
        }
        let sol = &self.inv * rhs;
        let mut h = h_scaled;
        for j in 0..m {
            let s = &self.shifts[j] / d;
            h += sol[j] * &s * s.transpose();
        }
        let g = DVector::from_iterator(n, (0..n).map(|i| sol[m + 1 + i] / d));
        Quadratic { center: self.center.clone(), c: sol[m], g, h: h / (d * d) }
    }

    /// Model interpolating `fvals` whose Hessian is closest to `h_prev`.
    pub fn model(&self, fvals: &[f64], h_prev: &DMatrix<f64>) -> Quadratic {
        self.solve(fvals, h_prev)
    }

    /// Minimum-norm Lagrange function of point `t`.
    pub fn lagrange(&self, t: usize) -> Quadratic {
        let n = self.center.len();
        let mut e = vec![0.0; self.shifts.len()];
        e[t] = 1.0;
        self.solve(&e, &DMatrix::zeros(n, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_full_quadratic_in_one_dimension() {
        let pts = [0.0, 0.5, -0.3].map(|v| DVector::from_vec(vec![v]));
        let f = |x: f64| 3.0 - 2.0 * x + 5.0 * x * x;
        let fv: Vec<f64> = pts.iter().map(|p| f(p[0])).collect();
        let it = Interpolation::new(&pts, &pts[0]).unwrap();
        let q = it.model(&fv, &DMatrix::zeros(1, 1));
        assert!((q.h[(0, 0)] - 10.0).abs() < 1e-9);
        assert!((q.value(&DVector::from_vec(vec![0.7])) - f(0.7)).abs() < 1e-9);
    }

    #[test]
    fn interpolates_and_lagrange_is_cardinal() {
        let pts: Vec<DVector<f64>> = [[0.0, 0.0], [0.1, 0.0], [-0.1, 0.0], [0.0, 0.1], [0.0, -0.1]]
            .iter()
            .map(|p| DVector::from_vec(p.to_vec()))
            .collect();
        let fv: Vec<f64> = pts.iter().map(|p| (p[0] - 1.0).powi(2) + 3.0 * p[1].powi(4) + p[0] * p[1]).collect();
        let it = Interpolation::new(&pts, &pts[0]).unwrap();
        let q = it.model(&fv, &DMatrix::identity(2, 2));
        for (p, f) in pts.iter().zip(&fv) {
            assert!((q.value(p) - f).abs() <= 1e-10 * f.abs().max(1.0));
        }
        for t in 0..pts.len() {
            let l = it.lagrange(t);
            for (j, p) in pts.iter().enumerate() {
                let want = if j == t { 1.0 } else { 0.0 };
                assert!((l.value(p) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_set_is_rejected() {
        let pts: Vec<DVector<f64>> = [[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]]
            .iter()
            .map(|p| DVector::from_vec(p.to_vec()))
            .collect();
        assert!(Interpolation::new(&pts, &pts[0]).is_none());
    }
}
