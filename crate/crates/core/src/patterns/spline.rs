//! Penalized B-spline smoothing (P-splines) for the conditional-expectation
//! step of the principal curve fit.
//!
//! Uniform, unclamped knots are used so that the Greville abscissae are
//! equally spaced: a second-order difference penalty then vanishes exactly on
//! straight lines, and a line is reproduced at every smoothing level.

use nalgebra::{DMatrix, DVector};

/// Degree-`degree` B-spline basis on `n_segments` uniform segments over `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct UniformBasis {
    lo: f64,
    hi: f64,
    n_segments: usize,
    degree: usize,
    knots: Vec<f64>,
}

impl UniformBasis {
    pub fn new(lo: f64, hi: f64, n_segments: usize, degree: usize) -> Self {
        assert!(hi > lo && n_segments >= 1);
        let dx = (hi - lo) / n_segments as f64;
        let knots = (0..=(n_segments + 2 * degree)).map(|j| lo + (j as f64 - degree as f64) * dx).collect();
        UniformBasis { lo, hi, n_segments, degree, knots }
    }

    pub fn len(&self) -> usize {
        self.n_segments + self.degree
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the first non-zero basis function at `t` and the `degree + 1`
    /// non-zero values. `t` is clamped into the domain.
    pub fn eval(&self, t: f64) -> (usize, Vec<f64>) {
        let t = t.clamp(self.lo, self.hi);
        let dx = (self.hi - self.lo) / self.n_segments as f64;
        let seg = (((t - self.lo) / dx).floor() as usize).min(self.n_segments - 1);
        let span = seg + self.degree;
        let p = self.degree;
        let k = &self.knots;
        // Cox-de Boor, non-zero functions only.
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = t - k[span + 1 - j];
            right[j] = k[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        (seg, n)
    }
}

/// A smoothed planar curve `t -> (x(t), y(t))`.
#[derive(Debug, Clone)]
pub struct SmoothCurve {
    basis: UniformBasis,
    coef_x: Vec<f64>,
    coef_y: Vec<f64>,
}

impl SmoothCurve {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (first, vals) = self.basis.eval(t);
        vals.iter()
            .enumerate()
            .fold((0.0, 0.0), |(x, y), (j, b)| (x + b * self.coef_x[first + j], y + b * self.coef_y[first + j]))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.basis.lo, self.basis.hi)
    }
}

/// Fit `x(t)` and `y(t)` by penalized least squares with penalty weight
/// `lambda` on second differences of the coefficients.
pub fn fit_penalized(
    ts: &[f64],
    xs: &[f64],
    ys: &[f64],
    degree: usize,
    n_segments: usize,
    lambda: f64,
) -> Option<SmoothCurve> {
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let basis = UniformBasis::new(lo, hi, n_segments, degree);
    let m = basis.len();
    let mut normal = DMatrix::<f64>::zeros(m, m);
    let mut rhs_x = DVector::<f64>::zeros(m);
    let mut rhs_y = DVector::<f64>::zeros(m);
    for ((&t, &x), &y) in ts.iter().zip(xs).zip(ys) {
        let (first, vals) = basis.eval(t);
        for (a, va) in vals.iter().enumerate() {
            rhs_x[first + a] += va * x;
            rhs_y[first + a] += va * y;
            for (b, vb) in vals.iter().enumerate() {
                normal[(first + a, first + b)] += va * vb;
            }
        }
    }
    if m >= 3 {
        // D2^T D2 accumulated row by row.
        for r in 0..(m - 2) {
            let d = [1.0, -2.0, 1.0];
            for a in 0..3 {
                for b in 0..3 {
                    normal[(r + a, r + b)] += lambda * d[a] * d[b];
                }
            }
        }
    }
    // The penalty leaves only straight lines unpenalized and the data pin
    // those down, so a ridge is only needed for degenerate inputs.
    let chol = match normal.clone().cholesky() {
        Some(c) => c,
        None => {
            let scale = (normal.trace() / m as f64).max(1e-12);
            for i in 0..m {
                normal[(i, i)] += 1e-10 * scale;
            }
            normal.cholesky()?
        }
    };
    let coef_x = chol.solve(&rhs_x);
    let coef_y = chol.solve(&rhs_y);
    Some(SmoothCurve { basis, coef_x: coef_x.as_slice().to_vec(), coef_y: coef_y.as_slice().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_partition_of_unity() {
        for degree in 1..=3 {
            let b = UniformBasis::new(0.0, 10.0, 7, degree);
            for i in 0..=100 {
                let (_, vals) = b.eval(i as f64 * 0.1);
                let s: f64 = vals.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "degree {degree}: sum {s}");
                assert!(vals.iter().all(|v| *v >= -1e-15));
            }
        }
    }

    #[test]
    fn lines_are_reproduced_under_any_penalty() {
        let ts: Vec<f64> = (0..9).map(|i| i as f64 * 12.5).collect();
        let xs: Vec<f64> = ts.iter().map(|t| 3.0 + 0.6 * t).collect();
        let ys: Vec<f64> = ts.iter().map(|t| -1.0 + 0.8 * t).collect();
        for lambda in [1e-6, 1.0, 1e6] {
            let c = fit_penalized(&ts, &xs, &ys, 2, 8, lambda).unwrap();
            for (i, &t) in ts.iter().enumerate() {
                let (x, y) = c.eval(t);
                assert!((x - xs[i]).abs() < 1e-6 && (y - ys[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn heavy_penalty_flattens_curvature() {
        let ts: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let xs = ts.clone();
        let ys: Vec<f64> = ts.iter().map(|t| (t - 5.0).powi(2)).collect();
        let loose = fit_penalized(&ts, &xs, &ys, 2, 10, 1e-6).unwrap();
        let stiff = fit_penalized(&ts, &xs, &ys, 2, 10, 1e8).unwrap();
        let err = |c: &SmoothCurve| ts.iter().zip(&ys).map(|(t, y)| (c.eval(*t).1 - y).abs()).fold(0.0, f64::max);
        assert!(err(&loose) < 1e-3);
        assert!(err(&stiff) > 5.0);
    }
}
