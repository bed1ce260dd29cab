//! Open-clamped B-spline curves in the plane.

/// A clamped B-spline curve with a uniform interior knot vector.
///
/// The curve interpolates its first and last control points and lies in the
/// convex hull of its control polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedBSpline {
    degree: usize,
    knots: Vec<f64>,
    ctrl: Vec<[f64; 2]>,
}

impl ClampedBSpline {
    /// Builds the curve. Panics if there are fewer than `degree + 1` control
    /// points or `degree == 0`; callers validate before constructing.
    pub fn new(degree: usize, ctrl: Vec<[f64; 2]>) -> Self {
        assert!(degree >= 1, "degree must be at least 1");
        assert!(ctrl.len() > degree, "need at least degree + 1 control points");
        let n = ctrl.len();
        let spans = n - degree;
        let mut knots = Vec::with_capacity(n + degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        for i in 1..spans {
            knots.push(i as f64 / spans as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { degree, knots, ctrl }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.ctrl
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn span(&self, t: f64) -> usize {
        let p = self.degree;
        let n = self.ctrl.len();
        if t >= self.knots[n] {
            return n - 1;
        }
        // knots[p] <= t < knots[n]
        let mut lo = p;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Evaluates the curve at parameter `t` in [0, 1] with de Boor's algorithm.
    pub fn point(&self, t: f64) -> [f64; 2] {
        let t = t.clamp(0.0, 1.0);
        let p = self.degree;
        let k = self.span(t);
        let mut d: Vec<[f64; 2]> = (0..=p).map(|j| self.ctrl[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + k - p;
                let denom = self.knots[i + p + 1 - r] - self.knots[i];
                let a = if denom > 0.0 {
                    (t - self.knots[i]) / denom
                } else {
                    0.0
                };
                d[j] = [
                    (1.0 - a) * d[j - 1][0] + a * d[j][0],
                    (1.0 - a) * d[j - 1][1] + a * d[j][1],
                ];
            }
        }
        d[p]
    }

    /// Curve derivative with respect to the parameter.
    pub fn tangent(&self, t: f64) -> [f64; 2] {
        let p = self.degree;
        let n = self.ctrl.len();
        let q: Vec<[f64; 2]> = (0..n - 1)
            .map(|i| {
                let s = p as f64 / (self.knots[i + p + 1] - self.knots[i + 1]);
                [
                    s * (self.ctrl[i + 1][0] - self.ctrl[i][0]),
                    s * (self.ctrl[i + 1][1] - self.ctrl[i][1]),
                ]
            })
            .collect();
        if p == 1 {
            let k = self.span(t.clamp(0.0, 1.0));
            return q[k - 1];
        }
        let derived = ClampedBSpline {
            degree: p - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            ctrl: q,
        };
        derived.point(t)
    }

    /// Solves `x(t) = x` for a curve whose abscissa is monotone in `t`.
    pub fn parameter_at_x(&self, x: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let x0 = self.ctrl[0][0];
        let x1 = self.ctrl[self.ctrl.len() - 1][0];
        if x <= x0 {
            return 0.0;
        }
        if x >= x1 {
            return 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.point(mid)[0] < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
