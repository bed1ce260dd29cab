//! Trust-region subproblems over the unit box intersected with linear
//! half-spaces and a Euclidean ball, solved by projected gradient descent.
//! Projections onto the intersection use Dykstra's alternating scheme.

use nalgebra::DVector;

use super::model::Quadratic;

const DYKSTRA_CYCLES: usize = 2000;
const PG_ITERS: usize = 400;

/// `{z in [0,1]^n : a·z >= b for every half-space, |z - center| <= radius}`.
pub(crate) struct Region<'a> {
    pub center: &'a DVector<f64>,
    pub radius: f64,
    pub halfspaces: &'a [(DVector<f64>, f64)],
}

impl Region<'_> {
    fn project_set(&self, k: usize, z: &DVector<f64>) -> DVector<f64> {
        match k {
            0 => z.map(|v| v.clamp(0.0, 1.0)),
            1 => {
                let d = z - self.center;
                let nrm = d.norm();
                if nrm <= self.radius { z.clone() } else { self.center + d * (self.radius / nrm) }
            }
            _ => {
                let (a, b) = &self.halfspaces[k - 2];
                let gap = b - a.dot(z);
                if gap <= 0.0 { z.clone() } else { z + a * (gap / a.norm_squared()) }
            }
        }
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.iter().all(|&v| (0.0..=1.0).contains(&v))
            && (z - self.center).norm() <= self.radius * (1.0 + 1e-9)
            && self.halfspaces.iter().all(|(a, b)| a.dot(z) >= *b)
    }

    /// Euclidean projection onto the region, pulled back along the segment to
    /// the (feasible) center if round-off leaves it marginally outside.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let nsets = 2 + self.halfspaces.len();
        let mut x = z.clone();
        let mut incr = vec![DVector::zeros(z.len()); nsets];
        for _ in 0..DYKSTRA_CYCLES {
            let prev = x.clone();
            for (k, inc) in incr.iter_mut().enumerate() {
                let t = &x + &*inc;
                x = self.project_set(k, &t);
                *inc = t - &x;
            }
            if (&x - prev).norm() < 1e-14 {
                break;
            }
        }
        self.repair(x)
    }

    fn repair(&self, z: DVector<f64>) -> DVector<f64> {
        if self.contains(&z) {
            return z;
        }
        let d = &z - self.center;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.contains(&(self.center + &d * mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.center + d * lo
    }
}

fn descend(q: &Quadratic, sign: f64, region: &Region, start: DVector<f64>) -> DVector<f64> {
    let gnorm = q.gradient(region.center).norm();
    let lip = q.h.norm().max(gnorm / region.radius).max(1e-300);
    let step = 1.0 / lip;
    let mut z = start;
    for _ in 0..PG_ITERS {
        let g = q.gradient(&z) * sign;
        let next = region.project(&(&z - g * step));
        let moved = (&next - &z).norm();
        z = next;
        if moved <= 1e-12 * region.radius {
            break;
        }
    }
    z
}

fn starts(dir: &DVector<f64>, region: &Region) -> Vec<DVector<f64>> {
    let mut out = vec![region.center.clone()];
    let n = dir.norm();
    if n > 0.0 {
        out.push(region.project(&(region.center + dir * (region.radius / n))));
    }
    out
}

/// Approximate minimizer of `q` over the region.
pub(crate) fn minimize_model(q: &Quadratic, region: &Region) -> DVector<f64> {
    let g = q.gradient(region.center);
    let mut best = region.center.clone();
    let mut best_val = q.value(&best);
    for s in starts(&(-g), region) {
        let z = descend(q, 1.0, region, s);
        let v = q.value(&z);
        if v < best_val {
            best = z;
            best_val = v;
        }
    }
    best
}

/// Approximate maximizer of `|l|` over the region.
pub(crate) fn maximize_abs(l: &Quadratic, region: &Region) -> DVector<f64> {
    let g = l.gradient(region.center);
    let n = region.center.len();
    let mut dirs = vec![g.clone(), -g];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        dirs.push(-&e);
        dirs.push(e);
    }
    let mut best = region.center.clone();
    let mut best_val = l.value(&best).abs();
    for d in &dirs {
        for s in starts(d, region).into_iter().skip(1) {
            for sign in [1.0, -1.0] {
                let z = descend(l, sign, region, s.clone());
                let v = l.value(&z).abs();
                if v > best_val {
                    best = z;
                    best_val = v;
                }
            }
        }
    }
    best
}
