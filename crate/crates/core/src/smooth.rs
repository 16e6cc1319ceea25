//! Continuously differentiable scalar functions of one variable.
//!
//! Used for the inlet concentration g(t), the initial profile φ(x) and
//! measured or computed exit concentrations. Every variant yields a value
//! and a first derivative.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type CustomFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// A C¹ function with an analytic or interpolated derivative.
#[derive(Clone)]
pub enum SmoothFn {
    Constant(f64),
    /// Coefficients in increasing powers of the argument.
    Polynomial(Vec<f64>),
    /// `base + amplitude·exp(rate·t)`.
    Exponential { base: f64, amplitude: f64, rate: f64 },
    /// Level `level` between `start` and `stop`, zero elsewhere, with cubic
    /// smoothstep ramps of width `ramp` centred on each edge.
    Pulse {
        level: f64,
        start: f64,
        stop: f64,
        ramp: f64,
    },
    /// `mean + amplitude·sin(2π(t − phase)/period)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
    },
    Table(Table),
    /// Arbitrary closure returning `(value, derivative)`.
    Custom(CustomFn),
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothFn::Constant(c) => write!(f, "Constant({c})"),
            SmoothFn::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            SmoothFn::Exponential {
                base,
                amplitude,
                rate,
            } => write!(f, "Exponential({base} + {amplitude}·exp({rate}·t))"),
            SmoothFn::Pulse {
                level,
                start,
                stop,
                ramp,
            } => write!(f, "Pulse({level} on [{start}, {stop}], ramp {ramp})"),
            SmoothFn::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => write!(f, "Sinusoid({mean} + {amplitude}·sin, period {period}, phase {phase})"),
            SmoothFn::Table(t) => write!(f, "Table({} knots)", t.x.len()),
            SmoothFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

fn smoothstep(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0)
    } else {
        (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
    }
}

impl SmoothFn {
    pub fn zero() -> Self {
        SmoothFn::Constant(0.0)
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        SmoothFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_deriv(t).0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.eval_with_deriv(t).1
    }

    pub fn eval_with_deriv(&self, t: f64) -> (f64, f64) {
        match self {
            SmoothFn::Constant(c) => (*c, 0.0),
            SmoothFn::Polynomial(coef) => {
                let mut p = 0.0;
                let mut dp = 0.0;
                for &c in coef.iter().rev() {
                    dp = dp * t + p;
                    p = p * t + c;
                }
                (p, dp)
            }
            SmoothFn::Exponential {
                base,
                amplitude,
                rate,
            } => {
                let e = amplitude * (rate * t).exp();
                (base + e, rate * e)
            }
            SmoothFn::Pulse {
                level,
                start,
                stop,
                ramp,
            } => {
                if *ramp <= 0.0 {
                    let on = t >= *start && t < *stop;
                    return (if on { *level } else { 0.0 }, 0.0);
                }
                let (up, dup) = smoothstep((t - start) / ramp + 0.5);
                let (down, ddown) = smoothstep((t - stop) / ramp + 0.5);
                let v = up * (1.0 - down);
                let dv = (dup * (1.0 - down) - up * ddown) / ramp;
                (level * v, level * dv)
            }
            SmoothFn::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => {
                let w = 2.0 * std::f64::consts::PI / period;
                let arg = w * (t - phase);
                (mean + amplitude * arg.sin(), amplitude * w * arg.cos())
            }
            SmoothFn::Table(tab) => tab.eval_with_deriv(t),
            SmoothFn::Custom(f) => f(t),
        }
    }

    /// Points where the function is only C¹ (tabulation knots, ramp edges).
    /// Quadrature panels are split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SmoothFn::Pulse {
                start, stop, ramp, ..
            } => {
                let h = 0.5 * ramp.max(0.0);
                vec![start - h, start + h, stop - h, stop + h]
            }
            SmoothFn::Table(t) => t.x.clone(),
            _ => Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            SmoothFn::Constant(_) => true,
            SmoothFn::Polynomial(c) => c.iter().skip(1).all(|&a| a == 0.0),
            SmoothFn::Exponential { amplitude, rate, .. } => *amplitude == 0.0 || *rate == 0.0,
            SmoothFn::Pulse { level, .. } => *level == 0.0,
            SmoothFn::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            _ => false,
        }
    }

    /// Affine map `a + b·f`.
    pub fn affine(&self, a: f64, b: f64) -> SmoothFn {
        if a == 0.0 && b == 1.0 {
            return self.clone();
        }
        if let SmoothFn::Constant(c) = self {
            return SmoothFn::Constant(a + b * c);
        }
        let inner = self.clone();
        SmoothFn::custom(move |t| {
            let (v, d) = inner.eval_with_deriv(t);
            (a + b * v, b * d)
        })
    }
}

/// Piecewise cubic Hermite interpolant on strictly increasing knots.
/// Outside the knot range it continues linearly with the end slope, so the
/// extension stays C¹.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Table {
    /// Hermite table with given knot slopes.
    pub fn hermite(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        Self::check(&x, &y)?;
        if d.len() != x.len() {
            return Err(Error::InvalidTable(format!(
                "{} knots but {} slopes",
                x.len(),
                d.len()
            )));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite slope".into()));
        }
        Ok(Self { x, y, d })
    }

    /// Monotone-preserving piecewise cubic (Fritsch–Carlson slopes).
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::check(&x, &y)?;
        let n = x.len();
        if n == 1 {
            return Ok(Self {
                x,
                y,
                d: vec![0.0],
            });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Ok(Self { x, y, d });
        }
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Self { x, y, d })
    }

    fn check(x: &[f64], y: &[f64]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::InvalidTable("no knots".into()));
        }
        if x.len() != y.len() {
            return Err(Error::InvalidTable(format!(
                "{} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        if let Some(i) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable(format!(
                "abscissae not strictly increasing at row {}",
                i + 2
            )));
        }
        Ok(())
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval_with_deriv(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        if t <= self.x[0] {
            return (self.y[0] + self.d[0] * (t - self.x[0]), self.d[0]);
        }
        if t >= self.x[n - 1] {
            return (
                self.y[n - 1] + self.d[n - 1] * (t - self.x[n - 1]),
                self.d[n - 1],
            );
        }
        let i = self.x.partition_point(|&k| k <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i] * h, self.d[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dh00 = 6.0 * u2 - 6.0 * u;
        let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
        let dh01 = -6.0 * u2 + 6.0 * u;
        let dh11 = 3.0 * u2 - 2.0 * u;
        let dv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        (v, dv)
    }
}

fn pchip_end(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd(f: &SmoothFn, t: f64, h: f64) -> f64 {
        (f.eval(t + h) - f.eval(t - h)) / (2.0 * h)
    }

    #[test]
    fn polynomial_and_derivative() {
        let p = SmoothFn::Polynomial(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval_with_deriv(2.0), (9.0, 10.0));
    }

    #[test]
    fn pulse_is_c1() {
        let p = SmoothFn::Pulse {
            level: 2.0,
            start: 1.0,
            stop: 3.0,
            ramp: 0.2,
        };
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(2.0), 2.0);
        assert_eq!(p.eval(5.0), 0.0);
        assert!((p.eval(1.0) - 1.0).abs() < 1e-15);
        for &t in &[0.95, 1.0, 1.07, 2.93, 3.05] {
            assert!((p.deriv(t) - fd(&p, t, 1e-6)).abs() < 1e-5);
        }
    }

    #[test]
    fn pchip_monotone_data_stays_monotone() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.9, 1.0, 1.0];
        let t = Table::pchip(x, y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let v = t.eval_with_deriv(k as f64 * 0.01).0;
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn table_rejects_unsorted() {
        assert!(Table::pchip(vec![0.0, 2.0, 1.0], vec![0.0; 3]).is_err());
        assert!(Table::pchip(vec![], vec![]).is_err());
    }

    #[test]
    fn table_extrapolates_linearly() {
        let t = Table::hermite(vec![0.0, 1.0], vec![1.0, 2.0], vec![0.5, 3.0]).unwrap();
        assert_eq!(t.eval_with_deriv(3.0), (8.0, 3.0));
        assert_eq!(t.eval_with_deriv(-2.0), (0.0, 0.5));
    }

    proptest! {
        #[test]
        fn table_interpolates_knots(ys in proptest::collection::vec(-5.0f64..5.0, 2..20)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.7 + 0.1 * (i * i) as f64).collect();
            let t = Table::pchip(xs.clone(), ys.clone()).unwrap();
            for (x, y) in xs.iter().zip(ys.iter()) {
                prop_assert!((t.eval_with_deriv(*x).0 - y).abs() <= 1e-14 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn table_derivative_matches_differences(seed in 0u64..1000) {
            let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0 * 3.0).collect();
            let a = 1.0 + (seed % 7) as f64;
            let ys: Vec<f64> = xs.iter().map(|x| (a * x).sin()).collect();
            let t = SmoothFn::Table(Table::pchip(xs.clone(), ys).unwrap());
            for w in xs.windows(2) {
                let m = 0.5 * (w[0] + w[1]);
                let h = 1e-5;
                prop_assert!((t.deriv(m) - fd(&t, m, h)).abs() < 1e-6);
            }
        }
    }
}
