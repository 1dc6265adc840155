/// Piecewise cubic Hermite representation of `ẋ²` as a function of `x`.
///
/// Knot slopes are the exact derivative `d(ẋ²)/dx = 2ẍ` taken from the vector
/// field, so the fit interpolates every sample and reproduces the torque-free
/// manifold (a quadratic in `x`) exactly. Working in `ẋ²` keeps the curve
/// finite where `ẋ` crosses zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCurve {
    xs: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PhaseCurve {
    /// Knots must be strictly increasing in `x`.
    pub fn new(xs: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Option<Self> {
        if xs.len() < 2 || xs.len() != values.len() || xs.len() != slopes.len() {
            return None;
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        Some(Self { xs, values, slopes })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min() && x <= self.x_max()) {
            return None;
        }
        let i = self.xs.partition_point(|&k| k <= x);
        Some(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    /// `ẋ²` at `x`, `None` outside the knot range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        self.eval_with_slope(x).map(|(v, _)| v)
    }

    /// `(ẋ², d(ẋ²)/dx)` at `x`.
    pub fn eval_with_slope(&self, x: f64) -> Option<(f64, f64)> {
        let i = self.segment(x)?;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (p0, p1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let dvalue = ((6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        Some((value, dvalue))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_a_quadratic_exactly() {
        let f = |x: f64| 0.36 + 9.7969 * (x - 1.2) * (x - 1.2);
        let df = |x: f64| 2.0 * 9.7969 * (x - 1.2);
        let xs: Vec<f64> = (0..30).map(|k| 0.8 + 0.03 * k as f64 + 1e-3 * (k % 3) as f64).collect();
        let curve = PhaseCurve::new(
            xs.clone(),
            xs.iter().map(|&x| f(x)).collect(),
            xs.iter().map(|&x| df(x)).collect(),
        )
        .unwrap();
        for k in 0..200 {
            let x = curve.x_min() + (curve.x_max() - curve.x_min()) * k as f64 / 199.0;
            let (v, d) = curve.eval_with_slope(x).unwrap();
            assert!((v - f(x)).abs() < 1e-12);
            assert!((d - df(x)).abs() < 1e-9);
        }
        assert!(curve.eval(curve.x_max() + 1e-9).is_none());
    }

    #[test]
    fn rejects_non_monotone_knots() {
        assert!(PhaseCurve::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).is_none());
        assert!(PhaseCurve::new(vec![0.0], vec![1.0], vec![0.0]).is_none());
    }
}
