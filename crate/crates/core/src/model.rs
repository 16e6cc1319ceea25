//! Physical parameters, boundary and initial data, and the change of
//! variables that turns the column problem into a diffusion equation with
//! homogeneous Robin boundaries.
//!
//! With r = v/(2D) and s = (v²/(4D) + μ)/R, the concentration is written as
//! C = (w + e^{st}H)·e^{rx−st}, where the lift
//! H = (1 + cos πx/ℓ)·g + (1 − cos πx/ℓ)·e^{−rℓ}C_E
//! absorbs the inlet and exit data. The remainder w solves
//! w_t = (D/R)w_xx + e^{st}F with w_x − r·w = 0 at both ends.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::smooth::SmoothFn;

/// Column transport constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// Retardation factor R.
    pub retardation: f64,
    /// Hydrodynamic dispersion D.
    pub dispersion: f64,
    /// Interstitial velocity v.
    pub velocity: f64,
    /// First-order decay rate μ.
    pub decay: f64,
    /// Zero-order production rate γ.
    pub production: f64,
    /// Column length ℓ.
    pub length: f64,
}

impl TransportParams {
    pub fn new(
        retardation: f64,
        dispersion: f64,
        velocity: f64,
        decay: f64,
        production: f64,
        length: f64,
    ) -> Result<Self> {
        let p = Self {
            retardation,
            dispersion,
            velocity,
            decay,
            production,
            length,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("R", self.retardation),
            ("D", self.dispersion),
            ("v", self.velocity),
            ("ell", self.length),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and positive, got {value}"),
                });
            }
        }
        for (name, value) in [("mu", self.decay), ("gamma", self.production)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and nonnegative, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// r = v/(2D).
    pub fn r(&self) -> f64 {
        self.velocity / (2.0 * self.dispersion)
    }

    /// s = (v²/(4D) + μ)/R.
    pub fn s(&self) -> f64 {
        (self.velocity * self.velocity / (4.0 * self.dispersion) + self.decay) / self.retardation
    }

    /// Diffusivity D/R of the transformed problem.
    pub fn kappa(&self) -> f64 {
        self.dispersion / self.retardation
    }

    /// Wavenumber π/ℓ of the lifting cosine.
    pub fn p(&self) -> f64 {
        PI / self.length
    }

    /// π²D/(ℓ²R) + s, the coefficient of g·cos(πx/ℓ) in the forcing.
    pub fn k(&self) -> f64 {
        let p = self.p();
        p * p * self.kappa() + self.s()
    }

    /// Equilibrium concentration γ/μ, taken as 0 when μ = γ = 0.
    pub fn gamma_over_mu(&self) -> Result<f64> {
        if self.decay > 0.0 {
            Ok(self.production / self.decay)
        } else if self.production == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::FluxTransformUndefined {
                gamma: self.production,
            })
        }
    }

    /// Peclet number vℓ/D.
    pub fn peclet(&self) -> f64 {
        self.velocity * self.length / self.dispersion
    }
}

/// Validated (r, s).
pub fn derive_params(params: &TransportParams) -> Result<(f64, f64)> {
    params.validate()?;
    Ok((params.r(), params.s()))
}

/// How the exit concentration C_E is supplied.
#[derive(Debug, Clone)]
pub enum ExitSpec {
    Measured(SmoothFn),
    /// To be produced from the half-line flux problem.
    Computed,
}

/// Parameters plus initial profile, inlet history and exit data.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub params: TransportParams,
    /// Initial concentration φ(x) on [0, ℓ].
    pub phi: SmoothFn,
    /// Inlet concentration g(t).
    pub g: SmoothFn,
    pub exit: ExitSpec,
    pub t0: f64,
}

impl ProblemData {
    pub fn new(params: TransportParams, phi: SmoothFn, g: SmoothFn, exit: ExitSpec, t0: f64) -> Result<Self> {
        params.validate()?;
        if !t0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t0",
                reason: format!("must be finite, got {t0}"),
            });
        }
        Ok(Self {
            params,
            phi,
            g,
            exit,
            t0,
        })
    }

    /// Constant data: φ ≡ phi, g ≡ g, C_E ≡ exit.
    pub fn constant(params: TransportParams, phi: f64, g: f64, exit: f64, t0: f64) -> Result<Self> {
        Self::new(
            params,
            SmoothFn::Constant(phi),
            SmoothFn::Constant(g),
            ExitSpec::Measured(SmoothFn::Constant(exit)),
            t0,
        )
    }

    pub fn exit_fn(&self) -> Result<&SmoothFn> {
        match &self.exit {
            ExitSpec::Measured(f) => Ok(f),
            ExitSpec::Computed => Err(Error::ExitUnresolved),
        }
    }

    pub fn with_exit(&self, exit: SmoothFn) -> Self {
        Self {
            exit: ExitSpec::Measured(exit),
            ..self.clone()
        }
    }

    pub fn check_position(&self, x: f64) -> Result<()> {
        let ell = self.params.length;
        // Allow a hair of roundoff at the ends of computed grids.
        let slack = 1e-12 * ell;
        if x.is_nan() || x < -slack || x > ell + slack {
            return Err(Error::PositionOutOfRange { x, length: ell });
        }
        Ok(())
    }
}

/// Exit treatment of the lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LiftKind {
    /// Robin exit vC − DC_x = vC_E.
    Robin,
    /// Neumann exit C_x = 0; the lift carries only the inlet data.
    Danckwerts,
}

/// Lift value with the partials used by the forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftValue {
    pub h: f64,
    pub h_t: f64,
    pub h_xx: f64,
}

/// Forcing split into its inlet part F₁ and exit part F₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forcing {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
}

/// Time-dependent coefficients of F(x,t) = γ/R·e^{−rx} + β(t)·cos(πx/ℓ) + α(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingCoefficients {
    pub exp: f64,
    pub cos: f64,
    pub one: f64,
}

fn boundary_values(data: &ProblemData, kind: LiftKind, t: f64) -> Result<(f64, f64, f64, f64)> {
    let (g, gd) = data.g.eval_with_deriv(t);
    let (ce, ced) = match kind {
        LiftKind::Robin => data.exit_fn()?.eval_with_deriv(t),
        LiftKind::Danckwerts => (0.0, 0.0),
    };
    Ok((g, gd, ce, ced))
}

/// H, H_t and H_xx at (x, t).
pub fn lift(data: &ProblemData, kind: LiftKind, x: f64, t: f64) -> Result<LiftValue> {
    data.check_position(x)?;
    let p = &data.params;
    let (g, gd, ce, ced) = boundary_values(data, kind, t)?;
    let c = (p.p() * x).cos();
    let damp = (-p.r() * p.length).exp();
    let pp = p.p() * p.p();
    Ok(match kind {
        LiftKind::Robin => LiftValue {
            h: (1.0 + c) * g + (1.0 - c) * damp * ce,
            h_t: (1.0 + c) * gd + (1.0 - c) * damp * ced,
            h_xx: pp * (damp * ce - g) * c,
        },
        LiftKind::Danckwerts => LiftValue {
            h: (1.0 + c) * g,
            h_t: (1.0 + c) * gd,
            h_xx: -pp * g * c,
        },
    })
}

/// β(t) and α(t) of the forcing.
pub fn forcing_coefficients(data: &ProblemData, kind: LiftKind, t: f64) -> Result<ForcingCoefficients> {
    let p = &data.params;
    let (g, gd, ce, ced) = boundary_values(data, kind, t)?;
    let (k, s) = (p.k(), p.s());
    let damp = (-p.r() * p.length).exp();
    let (e, ed) = (damp * ce, damp * ced);
    Ok(ForcingCoefficients {
        exp: p.production / p.retardation,
        cos: -k * g - gd + k * e + ed,
        one: -s * g - gd - s * e - ed,
    })
}

/// F, F₁ and F₂ at (x, t). The split form is checked against
/// γ/R·e^{−rx} − (sH + H_t) + (D/R)H_xx.
pub fn forcing(data: &ProblemData, kind: LiftKind, x: f64, t: f64) -> Result<Forcing> {
    let lv = lift(data, kind, x, t)?;
    let p = &data.params;
    let (g, gd, ce, ced) = boundary_values(data, kind, t)?;
    let (k, s, r) = (p.k(), p.s(), p.r());
    let c = (p.p() * x).cos();
    let damp = (-r * p.length).exp();
    let source = p.production / p.retardation * (-r * x).exp();

    let f1 = source - (k * c + s) * g - (1.0 + c) * gd;
    let f2 = (k * c - s) * damp * ce - (1.0 - c) * damp * ced;
    let f = f1 + f2;

    let direct = source - (s * lv.h + lv.h_t) + p.kappa() * lv.h_xx;
    let scale = source.abs()
        + s * lv.h.abs()
        + lv.h_t.abs()
        + p.kappa() * lv.h_xx.abs()
        + k * (g.abs() + damp * ce.abs());
    if (f - direct).abs() > 1e-12 * (1.0 + scale) {
        return Err(Error::Inconsistent(format!(
            "forcing split {f} disagrees with direct form {direct} at x = {x}, t = {t}"
        )));
    }
    Ok(Forcing { f, f1, f2 })
}

/// w(x, t0) = e^{s·t0}(e^{−rx}φ(x) − H(x, t0)).
pub fn initial_w(data: &ProblemData, kind: LiftKind, x: f64) -> Result<f64> {
    let lv = lift(data, kind, x, data.t0)?;
    let p = &data.params;
    let t0 = data.t0;
    Ok((p.s() * t0).exp() * ((-p.r() * x).exp() * data.phi.eval(x) - lv.h))
}

/// C = w·e^{rx−st} + H·e^{rx}.
pub fn invert(w: f64, h: f64, x: f64, t: f64, r: f64, s: f64) -> f64 {
    let erx = (r * x).exp();
    if w == 0.0 {
        return h * erx;
    }
    w * (r * x - s * t).exp() + h * erx
}
