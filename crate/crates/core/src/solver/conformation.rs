//! Log-conformation form of the planar Giesekus model.
//!
//! The polymer stress is carried as `S = log(c) / wi`, so the conformation
//! tensor `c = exp(wi S)` is positive definite by construction. In two
//! dimensions every matrix function involved reduces to even functions of
//! the deviatoric magnitude `r`, so no eigenvectors appear and dual numbers
//! stay smooth at isotropic states. Symmetric tensors are `[xx, xy, yy]`.

use crate::materials::Real;

/// Mean and deviatoric components `(m, a, b)` with `X = m I + [[a, b], [b, -a]]`.
fn split<D: Real>(s: [D; 3]) -> (D, D, D) {
    ((s[0] + s[2]) * 0.5, (s[0] - s[2]) * 0.5, s[1])
}

/// `cosh r`, `sinh r / r` and `(r coth r - 1) / r^2` as functions of `q = r^2`.
fn even_fns<D: Real>(q: D) -> (D, D, D) {
    if q.re() < 1e-2 {
        let ch = D::from(1.0) + q * (D::from(0.5) + q * (D::from(1.0 / 24.0) + q * (1.0 / 720.0)));
        let sh = D::from(1.0) + q * (D::from(1.0 / 6.0) + q * (D::from(1.0 / 120.0) + q * (1.0 / 5040.0)));
        let k = D::from(1.0 / 3.0) + q * (D::from(-1.0 / 45.0) + q * (D::from(2.0 / 945.0) + q * (-1.0 / 4725.0)));
        (ch, sh, k)
    } else {
        let r = q.sqrt();
        let (ch, sh) = (r.cosh(), r.sinh() / r);
        (ch, sh, (ch / sh - 1.0) / q)
    }
}

/// Polymer stress `eta_p (exp(wi S) - I) / wi`, which tends to `eta_p S` as `wi -> 0`.
pub(crate) fn stress<D: Real>(s: [D; 3], wi: f64, eta_p: f64) -> [D; 3] {
    if wi == 0.0 {
        return s.map(|v| v * eta_p);
    }
    let (m, a, b) = split(s);
    let (ch, sh, _) = even_fns((a * a + b * b) * (wi * wi));
    let em1 = (m * wi).exp_m1();
    let iso = (em1 * ch + (ch - 1.0)) / wi;
    let k = (em1 + 1.0) * sh;
    [(iso + k * a) * eta_p, k * b * eta_p, (iso - k * a) * eta_p]
}

/// Steady constitutive residual in stress units,
/// `eta_p (wi (u . grad S) - H)`, where `wi dS/dt = H` is the log-conformation
/// equation. `adv` is `u . grad S` and `g` the velocity gradient
/// `[du/dx, du/dy, dv/dx, dv/dy]`. At `wi = 0` it reduces to `eta_p S - 2 eta_p D`.
pub(crate) fn residual<D: Real>(s: [D; 3], adv: [D; 3], g: [D; 4], wi: f64, alpha: f64, eta_p: f64) -> [D; 3] {
    let (sm, sa, sb) = split(s);
    let (dm, da, db) = ((g[0] + g[3]) * 0.5, (g[0] - g[3]) * 0.5, (g[1] + g[2]) * 0.5);
    let w = (g[1] - g[2]) * 0.5;
    let q = (sa * sa + sb * sb) * (wi * wi);
    let (ch, sh, kq) = even_fns(q);
    let (src_m, src_dev) = if wi == 0.0 {
        (-sm, D::from(-1.0))
    } else {
        let m = sm * wi;
        let emm1 = (-m).exp_m1();
        let half = (m * 0.5).sinh();
        let chm1 = half * half * 2.0;
        let even = emm1 * ch + (ch - 1.0) - (chm1 * ch + (ch - 1.0)) * (2.0 * alpha);
        let odd = -(emm1 + 1.0 + m.sinh() * (2.0 * alpha)) * sh;
        (even / wi, odd)
    };
    // Rotation of the principal axes and the part of the stretching that
    // is off-diagonal in them.
    let perp = [-sb, sa];
    let proj = (da * perp[0] + db * perp[1]) * kq * (2.0 * wi * wi) - w * (2.0 * wi);
    let hm = dm * 2.0 + src_m;
    let ha = da * 2.0 + proj * perp[0] + src_dev * sa;
    let hb = db * 2.0 + proj * perp[1] + src_dev * sb;
    let (am, aa, ab) = split(adv);
    let (rm, ra, rb) = (am * wi - hm, aa * wi - ha, ab * wi - hb);
    [(rm + ra) * eta_p, rb * eta_p, (rm - ra) * eta_p]
}

/// Inverse of [`stress`] for nodal initial guesses. Conformations that are
/// not positive definite are clipped to eigenvalues of at least `1e-3`.
pub(crate) fn from_stress(sigma: [f64; 3], wi: f64, eta_p: f64) -> [f64; 3] {
    if wi == 0.0 {
        return sigma.map(|v| v / eta_p);
    }
    let c = sigma.map(|v| v * wi / eta_p);
    let (m, a, b) = split(c);
    let m = m + 1.0;
    let r = (a * a + b * b).sqrt();
    let (l1, l2) = ((m + r).max(1e-3), (m - r).max(1e-3));
    let mean = 0.5 * (l1 * l2).ln();
    let k = if l1 - l2 > 1e-12 * l1 { 0.5 * (l1 / l2).ln() / r.max(1e-300) } else { 1.0 / l1 };
    [(mean + k * a) / wi, k * b / wi, (mean - k * a) / wi]
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, SymmetricEigen};

    fn mat(s: [f64; 3]) -> Matrix2<f64> {
        Matrix2::new(s[0], s[1], s[1], s[2])
    }

    fn spectral(x: Matrix2<f64>, f: impl Fn(f64) -> f64) -> Matrix2<f64> {
        let e = SymmetricEigen::new(x);
        e.eigenvectors * Matrix2::from_diagonal(&e.eigenvalues.map(f)) * e.eigenvectors.transpose()
    }

    const CASES: [[f64; 3]; 5] =
        [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [2.5, 1.7, -0.4], [-1.0, 0.02, -1.0], [4.0, -3.0, 0.5]];

    #[test]
    fn stress_is_the_matrix_exponential() {
        for wi in [0.3, 1.0, 2.0] {
            for s in CASES {
                let want = (spectral(mat(s) * wi, f64::exp) - Matrix2::identity()) * (2.0 / wi);
                let got = mat(stress(s, wi, 2.0));
                assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()), "{s:?} {wi}");
                let back = from_stress(stress(s, wi, 2.0), wi, 2.0);
                assert!((mat(back) - mat(s)).norm() < 1e-10, "{s:?} {back:?}");
            }
        }
    }

    /// Daleckii-Krein: in the eigenbasis of c, `Dlog(c)[X]_ij = X_ij g_ij`
    /// with `g_ij` the divided difference of `ln`.
    fn log_rate(psi: Matrix2<f64>, l: Matrix2<f64>, wi: f64, alpha: f64) -> Matrix2<f64> {
        let e = SymmetricEigen::new(psi);
        let lam = e.eigenvalues.map(f64::exp);
        let c = spectral(psi, f64::exp);
        let i = Matrix2::identity();
        let p = -(c - i) - (c - i) * (c - i) * alpha;
        let x = e.eigenvectors.transpose() * (l * c + c * l.transpose() + p / wi) * e.eigenvectors;
        let g = |i: usize, j: usize| {
            if (lam[i] - lam[j]).abs() < 1e-12 {
                1.0 / lam[i]
            } else {
                (lam[i].ln() - lam[j].ln()) / (lam[i] - lam[j])
            }
        };
        let y = Matrix2::from_fn(|i, j| x[(i, j)] * g(i, j));
        e.eigenvectors * y * e.eigenvectors.transpose()
    }

    #[test]
    fn residual_matches_the_spectral_form() {
        let l = [0.7, -1.3, 0.4, -0.7];
        let lm = Matrix2::new(l[0], l[1], l[2], l[3]);
        for wi in [0.1, 0.8, 2.0] {
            for s in CASES {
                let want = log_rate(mat(s) * wi, lm, wi, 0.3);
                let got = mat(residual(s, [0.0; 3], l, wi, 0.3, 1.0));
                assert!((got + want).norm() <= 1e-10 * (1.0 + want.norm()), "{s:?} {wi}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_relaxation_time_is_the_newtonian_limit() {
        let l = [0.7, -1.3, 0.4, -0.7];
        let s: [f64; 3] = [0.3, -0.2, 0.1];
        let r0 = residual(s, [1.0; 3], l, 0.0, 0.3, 2.0);
        let d: [f64; 3] = [0.7, -0.45, -0.7];
        for i in 0..3 {
            assert!((r0[i] - 2.0 * (s[i] - 2.0 * d[i])).abs() < 1e-14);
        }
        let r = residual(s, [1.0; 3], l, 1e-7, 0.3, 2.0);
        assert!(r.iter().zip(r0).all(|(a, b)| (a - b).abs() < 1e-5));
        let st = stress(s, 1e-7, 2.0);
        assert!(st.iter().zip(s).all(|(a, b)| (a - 2.0 * b).abs() < 1e-5));
    }
}
