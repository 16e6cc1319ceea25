//! Mass-balance audit: R·d/dt∫C dx = v·g − v·C_E + ∫(γ − μC) dx.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::{LiftKind, TransportParams};
use crate::series::SeriesSolution;
use crate::verify::fd::FdSolution;

/// Anything that can report total mass and boundary data over time.
pub trait ColumnField: Sync {
    fn params(&self) -> TransportParams;
    fn inlet(&self, t: f64) -> Result<f64>;
    fn exit(&self, t: f64) -> Result<f64>;
    /// ∫₀^ℓ C(x,t) dx.
    fn mass(&self, t: f64) -> Result<f64>;
    fn time_range(&self) -> (f64, f64);
    /// Step for differentiating the mass in time.
    fn time_step_hint(&self) -> f64;
}

impl ColumnField for SeriesSolution {
    fn params(&self) -> TransportParams {
        self.data().params
    }

    fn inlet(&self, t: f64) -> Result<f64> {
        Ok(self.data().g.eval(t))
    }

    fn exit(&self, t: f64) -> Result<f64> {
        self.exit_value(t)
    }

    fn mass(&self, t: f64) -> Result<f64> {
        SeriesSolution::mass(self, t)
    }

    fn time_range(&self) -> (f64, f64) {
        SeriesSolution::time_range(self)
    }

    fn time_step_hint(&self) -> f64 {
        let (lo, hi) = SeriesSolution::time_range(self);
        ((hi - lo) * 1e-3).max(1e-6)
    }
}

impl ColumnField for FdSolution {
    fn params(&self) -> TransportParams {
        self.params
    }

    fn inlet(&self, t: f64) -> Result<f64> {
        Ok(self.inlet[self.level(t)])
    }

    fn exit(&self, t: f64) -> Result<f64> {
        Ok(self.exit[self.level(t)])
    }

    fn mass(&self, t: f64) -> Result<f64> {
        Ok(self.mass_at(self.level(t)))
    }

    fn time_range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    fn time_step_hint(&self) -> f64 {
        self.dt()
    }
}

/// Balance terms at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceSample {
    pub t: f64,
    pub accumulation: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub reaction: f64,
    pub residual: f64,
    pub relative_residual: f64,
}

/// Balance terms at each sample time plus time-integrated totals.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub samples: Vec<BalanceSample>,
    /// ∫|residual| dt over the sample times (trapezoidal).
    pub integrated_residual: f64,
    /// ∫(|in| + |out| + |reaction| + |accumulation|) dt.
    pub integrated_scale: f64,
    pub relative_integrated: f64,
    pub max_relative: f64,
}

fn accumulation(field: &dyn ColumnField, t: f64) -> Result<f64> {
    let (lo, hi) = field.time_range();
    let h = field.time_step_hint().min(0.25 * (hi - lo)).max(f64::MIN_POSITIVE);
    let m = |s: f64| field.mass(s);
    let d = if t - 2.0 * h >= lo && t + 2.0 * h <= hi {
        (m(t - 2.0 * h)? - 8.0 * m(t - h)? + 8.0 * m(t + h)? - m(t + 2.0 * h)?) / (12.0 * h)
    } else if t - 2.0 * h < lo {
        let f: Vec<f64> = (0..5).map(|k| m(t + k as f64 * h)).collect::<Result<_>>()?;
        (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    } else {
        let f: Vec<f64> = (0..5).map(|k| m(t - k as f64 * h)).collect::<Result<_>>()?;
        (25.0 * f[0] - 48.0 * f[1] + 36.0 * f[2] - 16.0 * f[3] + 3.0 * f[4]) / (12.0 * h)
    };
    Ok(field.params().retardation * d)
}

/// Audits the conservation statement at the given times.
pub fn mass_balance(field: &dyn ColumnField, times: &[f64]) -> Result<BalanceReport> {
    let p = field.params();
    let samples: Vec<BalanceSample> = times
        .par_iter()
        .map(|&t| {
            let acc = accumulation(field, t)?;
            let inflow = p.velocity * field.inlet(t)?;
            let outflow = p.velocity * field.exit(t)?;
            let reaction = p.production * p.length - p.decay * field.mass(t)?;
            let residual = acc - (inflow - outflow + reaction);
            let scale = acc.abs() + inflow.abs() + outflow.abs() + reaction.abs();
            Ok(BalanceSample {
                t,
                accumulation: acc,
                inflow,
                outflow,
                reaction,
                residual,
                relative_residual: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
            })
        })
        .collect::<Result<_>>()?;

    let mut integrated_residual = 0.0;
    let mut integrated_scale = 0.0;
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        let sc = |s: &BalanceSample| s.accumulation.abs() + s.inflow.abs() + s.outflow.abs() + s.reaction.abs();
        integrated_residual += 0.5 * dt * (w[0].residual.abs() + w[1].residual.abs());
        integrated_scale += 0.5 * dt * (sc(&w[0]) + sc(&w[1]));
    }
    let relative_integrated = if integrated_scale > 0.0 {
        integrated_residual / integrated_scale
    } else {
        0.0
    };
    let max_relative = samples.iter().map(|s| s.relative_residual).fold(0.0, f64::max);
    Ok(BalanceReport {
        samples,
        integrated_residual,
        integrated_scale,
        relative_integrated,
        max_relative,
    })
}

/// Flux residuals of a series solution at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryResiduals {
    /// vC(0,t) − DC_x(0,t) − v·g(t).
    pub inlet: f64,
    /// vC(ℓ,t) − DC_x(ℓ,t) − v·C_E(t), or DC_x(ℓ,t) for a Neumann exit.
    pub exit: f64,
    /// inlet − exit.
    pub identity: f64,
}

pub fn boundary_residuals(sol: &SeriesSolution, t: f64) -> Result<BoundaryResiduals> {
    let p = sol.data().params;
    let (v, d) = (p.velocity, p.dispersion);
    let (c0, cx0) = sol.gradient(0.0, t)?;
    let (cl, cxl) = sol.gradient(p.length, t)?;
    let inlet = v * c0 - d * cx0 - v * sol.data().g.eval(t);
    let exit = match sol.kind() {
        LiftKind::Robin => v * cl - d * cxl - v * sol.exit_value(t)?,
        LiftKind::Danckwerts => d * cxl,
    };
    Ok(BoundaryResiduals {
        inlet,
        exit,
        identity: inlet - exit,
    })
}
