//! Exit concentration from the flux-concentration problem on the half line.
//!
//! The flux concentration C_F = C − (D/v)C_x obeys the same transport
//! equation as C on x ≥ 0 with C_F(0,t) = g(t) and initial value
//! φ − (D/v)φ'. Writing C_F = γ/μ + u·e^{rx−st} reduces it to the heat
//! equation u_t = (D/R)u_xx with Dirichlet data, solved by the odd image
//! kernel plus a Duhamel boundary integral. The exit concentration is
//! C_E(t) = C_F(ℓ, t).
//!
//! Two evaluation paths are provided: [`DirichletHeat`] evaluates u itself
//! for arbitrary data, and [`HalfLineProblem`] folds the exponential
//! factors into the kernels so that C_F is computed without forming e^{st}.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ExitSpec, ProblemData};
use crate::quad::{breaks_within, integrate_with_breaks, QuadOptions};
use crate::smooth::{SmoothFn, Table};

// exp(−WIDTH²) is far below double precision relative to O(1) data.
const WIDTH: f64 = 9.0;

/// Heat kernel K(x,t) = e^{−x²/4t}/√(4πt) and its x-derivative.
pub fn heat_kernel(x: f64, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let k = (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    Ok((k, -x / (2.0 * t) * k))
}

fn gauss(y: f64, theta: f64) -> f64 {
    (-y * y / (4.0 * theta)).exp() / (4.0 * PI * theta).sqrt()
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// u_t = κu_xx on x > 0 with u(x,t0) = Φ(x) and u(0,t) = G(t).
#[derive(Clone)]
pub struct DirichletHeat {
    pub diffusivity: f64,
    pub initial: ScalarFn,
    pub boundary: ScalarFn,
    pub t0: f64,
    /// Breakpoints of Φ.
    pub initial_breaks: Vec<f64>,
    pub opts: QuadOptions,
}

impl DirichletHeat {
    /// u(x, t).
    pub fn eval_u(&self, x: f64, t: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::PositionOutOfRange { x, length: f64::INFINITY });
        }
        if t < self.t0 {
            return Err(Error::TimeBeforeStart { t, t0: self.t0 });
        }
        if x == 0.0 {
            return Ok((self.boundary)(t));
        }
        if t == self.t0 {
            return Ok((self.initial)(x));
        }
        let kappa = self.diffusivity;
        let theta = kappa * (t - self.t0);
        let w = WIDTH * (4.0 * theta).sqrt();

        // Initial term: the odd extension of Φ convolved with K.
        let lo = (x - w).max(0.0);
        let hi = x + w;
        let breaks = breaks_within(lo, hi, self.initial_breaks.iter().copied().chain([x]));
        let initial = integrate_with_breaks(
            |z| (gauss(x - z, theta) - gauss(x + z, theta)) * (self.initial)(z),
            &breaks,
            self.opts,
        )?
        .value;

        // Boundary term with τ = t − σ²; the kernel becomes
        // x·e^{−x²/(4κσ²)}/(√(πκ)σ²), smooth at σ = 0.
        let smax = (t - self.t0).sqrt();
        let peak = x / (2.0 * kappa.sqrt());
        let sbreaks = breaks_within(0.0, smax, [peak, 0.25 * peak, 4.0 * peak]);
        let boundary = integrate_with_breaks(
            |sg| {
                if sg == 0.0 {
                    return 0.0;
                }
                let e = (-x * x / (4.0 * kappa * sg * sg)).exp();
                if e == 0.0 {
                    return 0.0;
                }
                x * e / ((PI * kappa).sqrt() * sg * sg) * (self.boundary)(t - sg * sg)
            },
            &sbreaks,
            self.opts,
        )?
        .value;
        Ok(initial + boundary)
    }
}

/// Flux-concentration problem for a column's data on the half line.
#[derive(Clone)]
pub struct HalfLineProblem {
    pub data: ProblemData,
    /// γ/μ, or 0 when μ = γ = 0.
    pub equilibrium: f64,
    /// None for data given on the whole past (no initial term).
    pub t0: Option<f64>,
    pub opts: QuadOptions,
}

impl std::fmt::Debug for HalfLineProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HalfLineProblem")
            .field("params", &self.data.params)
            .field("t0", &self.t0)
            .finish()
    }
}

impl HalfLineProblem {
    pub fn new(data: &ProblemData) -> Result<Self> {
        let equilibrium = data.params.gamma_over_mu()?;
        Ok(Self {
            data: data.clone(),
            equilibrium,
            t0: Some(data.t0),
            opts: QuadOptions::with_tol(1e-11, 1e-11),
        })
    }

    /// Same inlet history, started in the infinite past.
    pub fn infinite_past(data: &ProblemData) -> Result<Self> {
        Ok(Self {
            t0: None,
            ..Self::new(data)?
        })
    }

    pub fn with_options(mut self, opts: QuadOptions) -> Self {
        self.opts = opts;
        self
    }

    /// φ continued past ℓ: the tangent line at ℓ blended down to the
    /// constant φ(ℓ) over one column length.
    pub fn phi_extended(&self, z: f64) -> (f64, f64) {
        let l = self.data.params.length;
        if z <= l {
            return self.data.phi.eval_with_deriv(z);
        }
        let (pl, dl) = self.data.phi.eval_with_deriv(l);
        let u = (z - l) / l;
        if u >= 1.0 {
            return (pl, 0.0);
        }
        let b = 1.0 - u * u * (3.0 - 2.0 * u);
        let db = -6.0 * u * (1.0 - u) / l;
        (pl + dl * (z - l) * b, dl * (b + (z - l) * db))
    }

    /// Initial flux concentration φ − (D/v)φ' on the half line.
    pub fn initial_flux(&self, z: f64) -> f64 {
        let p = &self.data.params;
        let (v, d) = self.phi_extended(z);
        v - p.dispersion / p.velocity * d
    }

    fn phi_breaks(&self) -> Vec<f64> {
        let l = self.data.params.length;
        let mut b: Vec<f64> = self.data.phi.breakpoints().into_iter().filter(|&z| z < l).collect();
        b.push(l);
        b.push(2.0 * l);
        b
    }

    /// The raw heat-equation form of this problem. Only suitable where
    /// e^{st} stays representable.
    pub fn heat_problem(&self) -> Result<DirichletHeat> {
        let t0 = self.t0.ok_or_else(|| {
            Error::InvalidParameter {
                name: "t0",
                reason: "the raw heat form needs a finite start time".into(),
            }
        })?;
        let p = self.data.params;
        let (r, s) = (p.r(), p.s());
        let eq = self.equilibrium;
        let me = self.clone();
        let g = self.data.g.clone();
        Ok(DirichletHeat {
            diffusivity: p.kappa(),
            initial: Arc::new(move |z| (me.initial_flux(z) - eq) * (-r * z + s * t0).exp()),
            boundary: Arc::new(move |t| (g.eval(t) - eq) * (s * t).exp()),
            t0,
            initial_breaks: self.phi_breaks(),
            opts: self.opts,
        })
    }

    /// u(x, t) of the heat form.
    pub fn eval_u(&self, x: f64, t: f64) -> Result<f64> {
        self.heat_problem()?.eval_u(x, t)
    }

    /// C_F(x, t).
    pub fn flux_concentration(&self, x: f64, t: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::PositionOutOfRange { x, length: f64::INFINITY });
        }
        let p = self.data.params;
        let (r, kappa) = (p.r(), p.kappa());
        let eq = self.equilibrium;
        if let Some(t0) = self.t0 {
            if t < t0 {
                return Err(Error::TimeBeforeStart { t, t0 });
            }
            if t == t0 {
                return Ok(self.initial_flux(x));
            }
        }
        if x == 0.0 {
            return Ok(self.data.g.eval(t));
        }

        let initial = match self.t0 {
            None => 0.0,
            Some(t0) => {
                let dt = t - t0;
                let theta = kappa * dt;
                let decay = (-p.decay * dt / p.retardation).exp();
                if decay == 0.0 {
                    0.0
                } else {
                    decay * self.initial_term(x, theta, r)?
                }
            }
        };
        Ok(eq + initial + self.boundary_term(x, t)?)
    }

    fn initial_term(&self, x: f64, theta: f64, r: f64) -> Result<f64> {
        let eq = self.equilibrium;
        let a = x - 2.0 * r * theta;
        let w = WIDTH * (4.0 * theta).sqrt();
        let phi_breaks = self.phi_breaks();
        let mut total = 0.0;
        // Direct Gaussian centred at a, image centred at −a.
        for (centre, image) in [(a, false), (-a, true)] {
            let hi = centre + w;
            if hi <= 0.0 {
                continue;
            }
            let lo = (centre - w).max(0.0);
            let breaks = breaks_within(lo, hi, phi_breaks.iter().copied().chain([centre]));
            let val = integrate_with_breaks(
                |z| {
                    let k = if image {
                        (-2.0 * r * z).exp() * gauss(z - centre, theta)
                    } else {
                        gauss(z - centre, theta)
                    };
                    if k == 0.0 {
                        0.0
                    } else {
                        k * (self.initial_flux(z) - eq)
                    }
                },
                &breaks,
                self.opts,
            )?
            .value;
            total += if image { -val } else { val };
        }
        Ok(total)
    }

    fn boundary_term(&self, x: f64, t: f64) -> Result<f64> {
        let p = self.data.params;
        let (r, d, rr) = (p.r(), p.dispersion, p.retardation);
        let eq = self.equilibrium;
        let q_min = match self.t0 {
            Some(t0) => x / (2.0 * (p.kappa() * (t - t0)).sqrt()),
            None => 0.0,
        };
        let b = r * x / 2.0;
        let q_lo = (0.5 * (-WIDTH + (WIDTH * WIDTH + 4.0 * b).sqrt())).max(q_min);
        let q_hi = 0.5 * (WIDTH + (WIDTH * WIDTH + 4.0 * b).sqrt()) + 1.0;
        if q_lo >= q_hi {
            return Ok(0.0);
        }
        let lag = |q: f64| rr * x * x / (4.0 * d * q * q);
        let knots = self.data.g.breakpoints().into_iter().filter_map(|tb| {
            if tb < t {
                Some(x * (rr / (4.0 * d * (t - tb))).sqrt())
            } else {
                None
            }
        });
        let breaks = breaks_within(q_lo, q_hi, knots.chain([b.sqrt()]));
        let mu_term = p.decay * x * x / (4.0 * d);
        let val = integrate_with_breaks(
            |q| {
                let z = q - b / q;
                let e = (-z * z - mu_term / (q * q)).exp();
                if e == 0.0 {
                    0.0
                } else {
                    e * (self.data.g.eval(t - lag(q)) - eq)
                }
            },
            &breaks,
            self.opts,
        )?
        .value;
        Ok(2.0 / PI.sqrt() * val)
    }

    /// C_E(t) = C_F(ℓ, t).
    pub fn exit_concentration(&self, t: f64) -> Result<f64> {
        self.flux_concentration(self.data.params.length, t)
    }

    /// Tabulates C_E on `intervals` equal steps of [t_start, t_end] and
    /// interpolates with C¹ Hermite cubics.
    pub fn memoize(&self, t_start: f64, t_end: f64, intervals: usize) -> Result<ExitMemo> {
        if let Some(t0) = self.t0 {
            if t_start < t0 {
                return Err(Error::TimeBeforeStart { t: t_start, t0 });
            }
        }
        if !(t_end > t_start) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must exceed the start time {t_start}, got {t_end}"),
            });
        }
        let n = intervals.max(4);
        let h = (t_end - t_start) / n as f64;
        let node = |i: usize| if i == n { t_end } else { t_start + h * i as f64 };
        let times: Vec<f64> = (0..=n).map(node).collect();
        let values: Vec<f64> = times
            .par_iter()
            .map(|&t| self.exit_concentration(t))
            .collect::<Result<_>>()?;
        let slopes = fd_slopes(&values, h);
        let table = Table::hermite(times.clone(), values, slopes)?;
        let defect = (0..n)
            .into_par_iter()
            .map(|i| {
                let m = times[i] + 0.5 * h;
                let direct = self.exit_concentration(m)?;
                Ok((direct - table.eval_with_deriv(m).0).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(ExitMemo {
            table,
            t_start,
            t_end,
            defect,
        })
    }
}

/// Replaces a computed exit by its tabulation on [t0, t_end]; measured
/// exits are returned unchanged.
pub fn tabulate_exit(data: &ProblemData, t_end: f64, intervals: usize) -> Result<(ProblemData, Option<ExitMemo>)> {
    match data.exit {
        ExitSpec::Computed => {
            let memo = HalfLineProblem::new(data)?.memoize(data.t0, t_end, intervals)?;
            Ok((data.with_exit(memo.as_smooth()), Some(memo)))
        }
        ExitSpec::Measured(_) => Ok((data.clone(), None)),
    }
}

/// Fourth-order finite-difference slopes on a uniform grid.
fn fd_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            if n < 5 {
                let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
                return (y[b] - y[a]) / ((b - a) as f64 * h);
            }
            if i >= 2 && i + 2 < n {
                (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
            } else if i < 2 {
                let j = i;
                let f = |k: usize| y[k];
                // One-sided stencil on nodes 0..4, evaluated at node j.
                let c: [f64; 5] = if j == 0 {
                    [-25.0, 48.0, -36.0, 16.0, -3.0]
                } else {
                    [-3.0, -10.0, 18.0, -6.0, 1.0]
                };
                (0..5).map(|k| c[k] * f(k)).sum::<f64>() / (12.0 * h)
            } else {
                let j = n - 1 - i;
                let c: [f64; 5] = if j == 0 {
                    [-25.0, 48.0, -36.0, 16.0, -3.0]
                } else {
                    [-3.0, -10.0, 18.0, -6.0, 1.0]
                };
                -(0..5).map(|k| c[k] * y[n - 1 - k]).sum::<f64>() / (12.0 * h)
            }
        })
        .collect()
}

/// Tabulated exit concentration with its interpolation defect.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitMemo {
    pub table: Table,
    pub t_start: f64,
    pub t_end: f64,
    /// Largest |direct − interpolated| at interval midpoints.
    pub defect: f64,
}

impl ExitMemo {
    pub fn as_smooth(&self) -> SmoothFn {
        SmoothFn::Table(self.table.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TransportParams;

    #[test]
    fn kernel_values() {
        let (k, kx) = heat_kernel(0.0, 0.5).unwrap();
        assert!((k - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(kx, 0.0);
        assert!(heat_kernel(1.0, 0.0).is_err());
        assert!(heat_kernel(1.0, -1.0).is_err());
    }

    #[test]
    fn kernel_has_unit_mass() {
        let t = 0.37;
        let w = 12.0 * (2.0 * t as f64).sqrt();
        let v = crate::quad::integrate(|x| heat_kernel(x, t).unwrap().0, -w, w, QuadOptions::default())
            .unwrap()
            .value;
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fd_slopes_are_fourth_order() {
        let h = 0.05;
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * h).sin()).collect();
        let d = fd_slopes(&y, h);
        for (i, di) in d.iter().enumerate() {
            assert!((di - (i as f64 * h).cos()).abs() < 2e-5, "i = {i}");
        }
    }

    #[test]
    fn extension_is_c1() {
        let p = TransportParams::new(1.0, 0.2, 1.0, 0.0, 0.0, 2.0).unwrap();
        let data = ProblemData::new(
            p,
            SmoothFn::Polynomial(vec![1.0, 0.5, -0.1]),
            SmoothFn::zero(),
            ExitSpec::Computed,
            0.0,
        )
        .unwrap();
        let hp = HalfLineProblem::new(&data).unwrap();
        for z in [2.0, 4.0] {
            let (a, da) = hp.phi_extended(z - 1e-9);
            let (b, db) = hp.phi_extended(z + 1e-9);
            assert!((a - b).abs() < 1e-8);
            assert!((da - db).abs() < 1e-7);
        }
        assert_eq!(hp.phi_extended(10.0), hp.phi_extended(2.0 + 2.0 * 1.0 + 0.5));
    }
}
