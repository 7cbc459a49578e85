//! Shape-preserving piecewise-cubic Hermite interpolation.
//!
//! Knot derivatives follow the Fritsch-Butland weighted harmonic mean in the
//! interior and a three-point, shape-checked formula at the ends, so the
//! interpolant never overshoots the data and is monotone wherever the data
//! is monotone.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("abscissae and ordinates differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("abscissae must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Monotone piecewise-cubic interpolant through `(x[i], y[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, InterpError> {
        if x.len() != y.len() {
            return Err(InterpError::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(InterpError::TooFewPoints(x.len()));
        }
        for (i, (xi, yi)) in x.iter().zip(&y).enumerate() {
            if !xi.is_finite() || !yi.is_finite() {
                return Err(InterpError::NonFinite(i));
            }
        }
        for i in 1..x.len() {
            if x[i] <= x[i - 1] {
                return Err(InterpError::NotIncreasing(i));
            }
        }
        let d = knot_slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivatives assigned at the knots.
    pub fn knot_derivatives(&self) -> &[f64] {
        &self.d
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Index `k` of the interval `[x[k], x[k+1]]` holding `xq`. Values outside
    /// the knot range map to the first or last interval.
    fn interval(&self, xq: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&xq)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Interpolated value. Outside the knot range the end cubic is extended.
    pub fn eval(&self, xq: f64) -> f64 {
        let k = self.interval(xq);
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        if t == 0.0 {
            return self.y[k];
        }
        if t == 1.0 {
            return self.y[k + 1];
        }
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    /// First derivative of the interpolant.
    pub fn derivative(&self, xq: f64) -> f64 {
        let k = self.interval(xq);
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        if t == 0.0 {
            return self.d[k];
        }
        if t == 1.0 {
            return self.d[k + 1];
        }
        let secant = (self.y[k + 1] - self.y[k]) / h;
        self.d[k] * (1.0 - 4.0 * t + 3.0 * t * t)
            + self.d[k + 1] * (3.0 * t * t - 2.0 * t)
            + 6.0 * secant * t * (1.0 - t)
    }
}

fn knot_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    if n == 2 {
        return vec![delta[0], delta[0]];
    }

    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Non-centred three-point end derivative, clipped to preserve shape.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
