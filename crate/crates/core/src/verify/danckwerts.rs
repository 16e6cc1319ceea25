//! Comparison against the Neumann-exit (Danckwerts) variant.

use crate::eigen;
use crate::error::Result;
use crate::model::{LiftKind, ProblemData, TransportParams};
use crate::series::{SeriesSolution, TruncationPolicy};

/// Series solution with C_x(ℓ,t) = 0 in place of the Robin exit.
pub fn danckwerts_solve(data: &ProblemData, policy: TruncationPolicy, horizon: f64) -> Result<SeriesSolution> {
    SeriesSolution::build(data, LiftKind::Danckwerts, policy, horizon)
}

/// Exit-concentration gap between the two solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DanckwertsError {
    pub t: f64,
    pub robin_exit: f64,
    pub danckwerts_exit: f64,
    /// |C(ℓ,t) − C_D(ℓ,t)|.
    pub error: f64,
    /// γ/μ when μ > 0.
    pub lower_bound: Option<f64>,
    /// Whether error ≥ lower_bound·(1 − tol).
    pub meets_bound: Option<bool>,
}

pub fn danckwerts_error(
    robin: &SeriesSolution,
    danckwerts: &SeriesSolution,
    t: f64,
    tol: f64,
) -> Result<DanckwertsError> {
    let p = robin.data().params;
    let l = p.length;
    let c = robin.eval_c(l, t)?.value;
    let cd = danckwerts.eval_c(l, t)?.value;
    let error = (c - cd).abs();
    let lower_bound = if p.decay > 0.0 {
        Some(p.production / p.decay)
    } else {
        None
    };
    Ok(DanckwertsError {
        t,
        robin_exit: c,
        danckwerts_exit: cd,
        error,
        lower_bound,
        meets_bound: lower_bound.map(|b| error >= b * (1.0 - tol)),
    })
}

/// One row of the Robin/Danckwerts eigenvalue comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenRow {
    pub n: usize,
    pub robin: f64,
    pub danckwerts: f64,
    /// n²π²/ℓ².
    pub lower: f64,
    /// (n+1)²π²/ℓ².
    pub upper: f64,
    /// Characteristic residual at the computed root.
    pub residual: f64,
    pub ratio: f64,
}

impl EigenRow {
    pub fn bracketed(&self) -> bool {
        self.lower < self.danckwerts && self.danckwerts < self.upper
    }
}

pub fn eigenvalue_table(params: &TransportParams, count: usize) -> Result<Vec<EigenRow>> {
    let l = params.length;
    let r = params.r();
    (0..count)
        .map(|n| {
            let d = eigen::danckwerts(params, n)?;
            let lower = (n as f64 * std::f64::consts::PI / l).powi(2);
            let upper = ((n + 1) as f64 * std::f64::consts::PI / l).powi(2);
            let (_, right) = d.boundary_residuals();
            Ok(EigenRow {
                n,
                robin: eigen::robin(params, n).lambda,
                danckwerts: d.lambda,
                lower,
                upper,
                residual: right / (1.0 + r + d.kappa),
                ratio: if n == 0 { f64::NAN } else { d.lambda / lower },
            })
        })
        .collect()
}
