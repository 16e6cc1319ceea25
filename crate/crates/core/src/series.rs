//! Truncated eigenfunction expansion of the transformed problem and the
//! inverse map back to concentration.
//!
//! Coefficients are carried in the scaled form T̃ₙ(t) = e^{−st}Tₙ(t), which
//! obeys T̃ₙ' = −aₙT̃ₙ + fₙ(t) with aₙ = s + (D/R)λₙ and the projected
//! forcing fₙ. Because F(x,t) = (γ/R)e^{−rx} + β(t)cos(πx/ℓ) + α(t), each
//! fₙ is a fixed combination of three closed-form projections and the only
//! time integrals left are one-dimensional convolutions of β and α with
//! e^{−aₙσ}. The concentration is C = e^{rx}(Σ T̃ₙφₙ + H).

use crate::eigen::{self, EigenPair};
use crate::error::{Error, Result};
use crate::exit_flux::{ExitMemo, HalfLineProblem};
use crate::model::{forcing, forcing_coefficients, lift, ExitSpec, LiftKind, ProblemData};
use crate::quad::{breaks_within, integrate_with_breaks, QuadOptions};

/// Limits on the number of modes and tolerances for the time integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Largest mode index ever summed.
    pub n_max: usize,
    /// Target for the bound on Σ_{n>N} |T̃ₙ|(1 + r/√λₙ).
    pub tail_tol: f64,
    /// Tolerance of the convolution integrals.
    pub time_quad_tol: f64,
    /// Intervals of the tabulated exit concentration when it is computed.
    pub memo_intervals: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            n_max: 200,
            tail_tol: 1e-8,
            time_quad_tol: 1e-10,
            memo_intervals: 512,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: "at least one mode is required".into(),
            });
        }
        for (name, v) in [("tail_tol", self.tail_tol), ("time_quad_tol", self.time_quad_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.memo_intervals < 4 {
            return Err(Error::InvalidParameter {
                name: "memo_intervals",
                reason: "at least 4 intervals are required".into(),
            });
        }
        Ok(())
    }
}

/// Where the time integration starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    /// Initial-value problem from t0.
    Start(f64),
    /// Data known for all past times; the convolution is cut at
    /// `window` before the evaluation time (or at `tau_min` if given).
    InfinitePast { window: f64, tau_min: Option<f64> },
}

/// A value of the truncated series with its mode count and tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Number of modes summed (indices 0..modes).
    pub modes: usize,
    /// Bound on the truncation error of `value`.
    pub tail: f64,
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    pair: EigenPair,
    a: f64,
    pe: f64,
    pc: f64,
    p1: f64,
    /// T̃ₙ(t0), or an upper bound on its magnitude when not exact.
    init: f64,
    init_exact: bool,
    growth: f64,
    /// ∫₀^ℓ e^{rx}φₙ dx.
    mass_weight: f64,
}

/// Truncated eigenexpansion state. Immutable once built.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    data: ProblemData,
    kind: LiftKind,
    policy: TruncationPolicy,
    origin: Origin,
    modes: Vec<Mode>,
    t_range: (f64, f64),
    memo: Option<ExitMemo>,
    sup_cos: f64,
    sup_one: f64,
    w0_norm: f64,
    constant_forcing: Option<(f64, f64)>,
    time_breaks: Vec<f64>,
}

fn decay_integral(a: f64, delta: f64) -> f64 {
    if a == 0.0 {
        delta
    } else if delta.is_infinite() {
        1.0 / a
    } else {
        -(-a * delta).exp_m1() / a
    }
}

fn bound_modes(n_max: usize) -> usize {
    (4 * n_max).max(2000)
}

impl SeriesSolution {
    /// Initial-value solution on [t0, horizon].
    pub fn build(data: &ProblemData, kind: LiftKind, policy: TruncationPolicy, horizon: f64) -> Result<Self> {
        policy.validate()?;
        data.params.validate()?;
        let t0 = data.t0;
        if !(horizon >= t0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must not precede t0 = {t0}, got {horizon}"),
            });
        }
        let (data, memo) = resolve_exit(data, kind, &policy, t0, horizon, None)?;
        Self::assemble(data, kind, policy, Origin::Start(t0), (t0, horizon), memo)
    }

    /// Large-time solution for data given on all past times, evaluable on
    /// `[t_start, t_end]`. The convolution is cut where the slowest kept
    /// mode has decayed below `policy.time_quad_tol`; when that mode does
    /// not decay (μ = 0) the caller must supply `tau_min`.
    pub fn build_large_time(
        data: &ProblemData,
        kind: LiftKind,
        policy: TruncationPolicy,
        t_start: f64,
        t_end: f64,
        tau_min: Option<f64>,
    ) -> Result<Self> {
        policy.validate()?;
        let p = data.params;
        p.validate()?;
        if !(t_end >= t_start) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must not precede {t_start}, got {t_end}"),
            });
        }
        let a_min = match kind {
            LiftKind::Robin => p.decay / p.retardation,
            LiftKind::Danckwerts => p.s() + p.kappa() * eigen::danckwerts(&p, 0)?.lambda,
        };
        let window = if a_min > 0.0 {
            (1.0 / policy.time_quad_tol).ln() / a_min
        } else {
            if p.production > 0.0 {
                return Err(Error::HorizonUndefined(
                    "mu = 0 with gamma > 0: the slowest mode never forgets its forcing".into(),
                ));
            }
            match tau_min {
                Some(tm) if tm < t_start => f64::INFINITY,
                Some(tm) => {
                    return Err(Error::HorizonUndefined(format!(
                        "tau_min = {tm} must precede the first evaluation time {t_start}"
                    )))
                }
                None => {
                    return Err(Error::HorizonUndefined(
                        "mu = 0: the slowest mode does not decay; supply tau_min".into(),
                    ))
                }
            }
        };
        let earliest = match tau_min {
            Some(tm) => tm.max(t_start - window),
            None => t_start - window,
        };
        let (data, memo) = resolve_exit(data, kind, &policy, earliest, t_end, Some(()))?;
        Self::assemble(
            data,
            kind,
            policy,
            Origin::InfinitePast { window, tau_min },
            (t_start, t_end),
            memo,
        )
    }

    fn assemble(
        data: ProblemData,
        kind: LiftKind,
        policy: TruncationPolicy,
        origin: Origin,
        t_range: (f64, f64),
        memo: Option<ExitMemo>,
    ) -> Result<Self> {
        let p = data.params;
        let (r, s, kappa) = (p.r(), p.s(), p.kappa());
        let q = p.p();
        let l = p.length;
        let total = bound_modes(policy.n_max) + 1;
        let pairs = eigen::pairs(&p, kind, total)?;

        let (g0, e0) = match origin {
            Origin::Start(t0) => {
                let g0 = data.g.eval(t0);
                let e0 = match kind {
                    LiftKind::Robin => (-r * l).exp() * data.exit_fn()?.eval(t0),
                    LiftKind::Danckwerts => 0.0,
                };
                (g0, e0)
            }
            Origin::InfinitePast { .. } => (0.0, 0.0),
        };
        let phi_const = match data.phi {
            crate::smooth::SmoothFn::Constant(c) => Some(c),
            _ => None,
        };
        let w0_norm = match origin {
            Origin::Start(t0) => {
                let opts = QuadOptions::with_tol(1e-13, 1e-12);
                let d = &data;
                integrate_with_breaks(
                    |x| {
                        let h = lift(d, kind, x.min(l), t0).map(|v| v.h).unwrap_or(0.0);
                        let w = (-r * x).exp() * d.phi.eval(x) - h;
                        w * w
                    },
                    &breaks_within(0.0, l, d.phi.breakpoints()),
                    opts,
                )?
                .value
                .sqrt()
            }
            Origin::InfinitePast { .. } => 0.0,
        };

        let mut modes = Vec::with_capacity(total);
        for pair in pairs {
            let norm = pair.norm;
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Overflow {
                    what: "normalizing constant",
                    exponent: 2.0 * r * l,
                });
            }
            let (ie, ic, i1) = (pair.integral_exp(), pair.integral_cos(q), pair.integral_one());
            let a = if pair.is_exponential() {
                p.decay / p.retardation
            } else {
                s + kappa * pair.lambda
            };
            let h_proj = match kind {
                LiftKind::Robin => (g0 + e0) * i1 + (g0 - e0) * ic,
                LiftKind::Danckwerts => g0 * (i1 + ic),
            };
            let (init, init_exact) = match origin {
                Origin::InfinitePast { .. } => (0.0, true),
                Origin::Start(_) => {
                    if let Some(c) = phi_const {
                        ((c * ie - h_proj) / norm, true)
                    } else if pair.n <= policy.n_max {
                        let fastest = pair.n;
                        let panels = 2 * fastest + 4;
                        let ip = eigen::inner_product(
                            |x| (-r * x).exp() * data.phi.eval(x),
                            |x| pair.phi(x),
                            0.0,
                            l,
                            panels,
                            QuadOptions::with_tol(1e-13, 1e-12),
                        )?;
                        ((ip - h_proj) / norm, true)
                    } else {
                        (w0_norm / norm.sqrt(), false)
                    }
                }
            };
            let growth = if pair.is_exponential() { 1.0 } else { 1.0 + r / pair.kappa };
            let mass_weight = if pair.is_exponential() {
                norm
            } else {
                (r * l).exp() * (pair.kappa * l).sin() / pair.kappa
            };
            modes.push(Mode {
                pair,
                a,
                pe: ie / norm,
                pc: ic / norm,
                p1: i1 / norm,
                init,
                init_exact,
                growth,
                mass_weight,
            });
        }

        let exit_constant = match kind {
            LiftKind::Robin => data.exit_fn()?.is_constant(),
            LiftKind::Danckwerts => true,
        };
        let constant_forcing = if data.g.is_constant() && exit_constant {
            let fc = forcing_coefficients(&data, kind, t_range.0)?;
            Some((fc.cos, fc.one))
        } else {
            None
        };

        let sample_lo = match origin {
            Origin::Start(t0) => t0,
            Origin::InfinitePast { window, tau_min } => {
                let lo = t_range.0 - window;
                match tau_min {
                    Some(tm) => tm.max(lo),
                    None => lo,
                }
            }
        };
        let (sup_cos, sup_one) = match constant_forcing {
            Some((b, a)) => (b.abs(), a.abs()),
            None => sup_coefficients(&data, kind, sample_lo, t_range.1)?,
        };
        let mut time_breaks = data.g.breakpoints();
        time_breaks.sort_by(f64::total_cmp);

        Ok(Self {
            data,
            kind,
            policy,
            origin,
            modes,
            t_range,
            memo,
            sup_cos,
            sup_one,
            w0_norm,
            constant_forcing,
            time_breaks,
        })
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn kind(&self) -> LiftKind {
        self.kind
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn memo(&self) -> Option<&ExitMemo> {
        self.memo.as_ref()
    }

    pub fn time_range(&self) -> (f64, f64) {
        self.t_range
    }

    /// Eigenpairs of the summable modes, indices 0..=n_max.
    pub fn pairs(&self) -> Vec<EigenPair> {
        self.modes[..=self.policy.n_max].iter().map(|m| m.pair).collect()
    }

    pub fn pair(&self, n: usize) -> Result<&EigenPair> {
        self.mode(n).map(|m| &m.pair)
    }

    fn mode(&self, n: usize) -> Result<&Mode> {
        self.modes.get(n).ok_or(Error::InvalidParameter {
            name: "n",
            reason: format!("mode {n} beyond the precomputed range {}", self.modes.len() - 1),
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.t_range;
        if t.is_nan() || t < lo {
            return Err(Error::TimeBeforeStart { t, t0: lo });
        }
        if t > hi * (1.0 + 1e-14) + 1e-300 && t > hi {
            return Err(Error::BeyondHorizon { t, horizon: hi });
        }
        Ok(())
    }

    /// Length of the convolution window ending at t.
    fn window(&self, t: f64) -> f64 {
        match self.origin {
            Origin::Start(t0) => t - t0,
            Origin::InfinitePast { window, tau_min } => match tau_min {
                Some(tm) => window.min(t - tm),
                None => window,
            },
        }
    }

    /// fₙ(τ) from the closed-form projections.
    pub fn project_forcing(&self, n: usize, tau: f64) -> Result<f64> {
        let m = self.mode(n)?;
        let fc = forcing_coefficients(&self.data, self.kind, tau)?;
        Ok(fc.exp * m.pe + fc.cos * m.pc + fc.one * m.p1)
    }

    /// fₙ(τ) by direct quadrature of F·φₙ.
    pub fn project_forcing_quadrature(&self, n: usize, tau: f64) -> Result<f64> {
        let m = self.mode(n)?;
        let l = self.data.params.length;
        let err = std::cell::RefCell::new(None);
        let v = eigen::inner_product(
            |x| match forcing(&self.data, self.kind, x.min(l), tau) {
                Ok(f) => f.f,
                Err(e) => {
                    *err.borrow_mut() = Some(e);
                    0.0
                }
            },
            |x| m.pair.phi(x),
            0.0,
            l,
            2 * n + 4,
            QuadOptions::with_tol(1e-13, 1e-12),
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(v? / m.pair.norm)
    }

    /// Tₙ(t0) (unscaled).
    pub fn initial_coefficient(&self, n: usize) -> Result<f64> {
        let m = self.mode(n)?;
        match self.origin {
            Origin::Start(t0) => {
                if !m.init_exact {
                    return Err(Error::InvalidParameter {
                        name: "n",
                        reason: format!("initial coefficient {n} was not computed (n_max = {})", self.policy.n_max),
                    });
                }
                scale_up(m.init, self.data.params.s() * t0)
            }
            Origin::InfinitePast { .. } => Ok(0.0),
        }
    }

    /// T̃ₙ(t) = e^{−st}Tₙ(t).
    pub fn scaled_coefficient(&self, n: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let m = self.mode(n)?;
        self.coefficient_of(m, t)
    }

    /// Tₙ(t); fails with an overflow error when e^{st} is not representable.
    pub fn coefficient(&self, n: usize, t: f64) -> Result<f64> {
        let v = self.scaled_coefficient(n, t)?;
        scale_up(v, self.data.params.s() * t)
    }

    fn coefficient_of(&self, m: &Mode, t: f64) -> Result<f64> {
        let delta = self.window(t);
        let p = &self.data.params;
        let gr = p.production / p.retardation;
        let e1 = match self.origin {
            Origin::Start(_) => decay_integral(m.a, delta),
            Origin::InfinitePast { .. } if m.a > 0.0 => 1.0 / m.a,
            Origin::InfinitePast { .. } => delta,
        };
        let mut value = gr * m.pe * e1;
        value += match self.constant_forcing {
            Some((b, a)) => (m.pc * b + m.p1 * a) * e1,
            None => self.convolution(m, t, delta)?,
        };
        if let Origin::Start(_) = self.origin {
            if m.init != 0.0 {
                value += (-m.a * delta).exp() * m.init;
            }
        }
        Ok(value)
    }

    /// ∫₀^Δ e^{−aσ}(P^c β(t−σ) + P^1 α(t−σ)) dσ.
    fn convolution(&self, m: &Mode, t: f64, delta: f64) -> Result<f64> {
        if delta <= 0.0 || (m.pc == 0.0 && m.p1 == 0.0) {
            return Ok(0.0);
        }
        let a = m.a;
        let upper = if a > 0.0 { delta.min(40.0 / a) } else { delta };
        let mut interior: Vec<f64> = if a > 0.0 {
            vec![1.0 / a, 4.0 / a, 12.0 / a]
        } else {
            Vec::new()
        };
        interior.extend(self.time_breaks.iter().map(|&tb| t - tb));
        let breaks = breaks_within(0.0, upper, interior);
        let (data, kind) = (&self.data, self.kind);
        let err = std::cell::RefCell::new(None);
        let scale = m.pc.abs() * self.sup_cos + m.p1.abs() * self.sup_one;
        let tol = self.policy.time_quad_tol;
        let opts = QuadOptions {
            abs_tol: tol * scale * decay_integral(a, upper).max(f64::MIN_POSITIVE),
            rel_tol: tol,
            max_subdivisions: 20_000,
        };
        let v = integrate_with_breaks(
            |sg| match forcing_coefficients(data, kind, t - sg) {
                Ok(fc) => (-a * sg).exp() * (m.pc * fc.cos + m.p1 * fc.one),
                Err(e) => {
                    *err.borrow_mut() = Some(e);
                    0.0
                }
            },
            &breaks,
            opts,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(v?.value)
    }

    /// Per-mode bound on |T̃ₙ(t)|(1 + r/√λₙ) used to size the tail.
    fn mode_bound(&self, m: &Mode, delta: f64) -> f64 {
        let p = &self.data.params;
        let gr = p.production / p.retardation;
        let e1 = match self.origin {
            Origin::Start(_) => decay_integral(m.a, delta),
            Origin::InfinitePast { .. } if m.a > 0.0 => 1.0 / m.a,
            Origin::InfinitePast { .. } => delta,
        };
        let forced = (gr * m.pe.abs() + m.pc.abs() * self.sup_cos + m.p1.abs() * self.sup_one) * e1;
        let init = match self.origin {
            Origin::Start(_) => (-m.a * delta).exp() * m.init.abs(),
            Origin::InfinitePast { .. } => 0.0,
        };
        m.growth * (forced + init)
    }

    /// Bound on Σ_{n≥count} |T̃ₙ(t)|(1 + r/√λₙ), in scaled units.
    pub fn tail_bound(&self, t: f64, count: usize) -> Result<f64> {
        self.check_time(t)?;
        let bounds = self.mode_bounds(t);
        Ok(suffix_tail(&bounds, count))
    }

    fn mode_bounds(&self, t: f64) -> Vec<f64> {
        let delta = self.window(t);
        self.modes.iter().map(|m| self.mode_bound(m, delta)).collect()
    }

    /// Smallest mode count meeting the tail tolerance at t (capped by
    /// n_max + 1) and the tail it leaves.
    pub fn truncation(&self, t: f64) -> Result<(usize, f64)> {
        self.check_time(t)?;
        let bounds = self.mode_bounds(t);
        let cap = self.policy.n_max + 1;
        let tails = suffix_tails(&bounds);
        for count in 1..=cap {
            if tails[count] <= self.policy.tail_tol {
                return Ok((count, tails[count]));
            }
        }
        Ok((cap, tails[cap]))
    }

    /// Schwarz-inequality bound on |T̃ₙ(t)|:
    /// √((1 − e^{−2aΔ})/(2a)·∫∫F²/(φₙ,φₙ)) + e^{−aΔ}‖w̃(·,t0)‖/√(φₙ,φₙ).
    pub fn coefficient_bound(&self, n: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let m = self.mode(n)?;
        let delta = self.window(t);
        let t_lo = t - delta;
        let energy = self.forcing_energy(t_lo, t)?;
        let decay2 = decay_integral(2.0 * m.a, delta);
        let forced = (decay2 * energy / m.pair.norm).sqrt();
        let init = match self.origin {
            Origin::Start(_) => (-m.a * delta).exp() * self.w0_norm / m.pair.norm.sqrt(),
            Origin::InfinitePast { .. } => 0.0,
        };
        Ok(forced + init)
    }

    /// ∫_{t_lo}^{t} ∫₀^ℓ F² dx dτ.
    pub fn forcing_energy(&self, t_lo: f64, t: f64) -> Result<f64> {
        if t <= t_lo {
            return Ok(0.0);
        }
        let p = &self.data.params;
        let (r, l, q) = (p.r(), p.length, p.p());
        let damp = (-r * l).exp();
        let gram_ee = -(-2.0 * r * l).exp_m1() / (2.0 * r);
        let gram_cc = 0.5 * l;
        let gram_11 = l;
        let gram_ec = r * (1.0 + damp) / (r * r + q * q);
        let gram_e1 = -(-r * l).exp_m1() / r;
        let (data, kind) = (&self.data, self.kind);
        let err = std::cell::RefCell::new(None);
        let density = |tau: f64| match forcing_coefficients(data, kind, tau) {
            Ok(fc) => {
                fc.exp * fc.exp * gram_ee
                    + fc.cos * fc.cos * gram_cc
                    + fc.one * fc.one * gram_11
                    + 2.0 * fc.exp * fc.cos * gram_ec
                    + 2.0 * fc.exp * fc.one * gram_e1
            }
            Err(e) => {
                *err.borrow_mut() = Some(e);
                0.0
            }
        };
        let breaks = breaks_within(t_lo, t, self.time_breaks.iter().copied());
        let v = integrate_with_breaks(density, &breaks, QuadOptions::with_tol(1e-14, 1e-10));
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(v?.value)
    }

    fn coefficients(&self, t: f64, count: usize) -> Result<Vec<f64>> {
        self.modes[..count].iter().map(|m| self.coefficient_of(m, t)).collect()
    }

    fn lift_parts(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        let lv = lift(&self.data, self.kind, x, t)?;
        let p = &self.data.params;
        let q = p.p();
        let g = self.data.g.eval(t);
        let e = match self.kind {
            LiftKind::Robin => (-p.r() * p.length).exp() * self.data.exit_fn()?.eval(t),
            LiftKind::Danckwerts => 0.0,
        };
        Ok((lv.h, -q * (q * x).sin() * (g - e)))
    }

    /// Σ T̃ₙφₙ(x) = e^{−st}w(x,t), with the tail in the same units.
    pub fn eval_w_scaled(&self, x: f64, t: f64) -> Result<Evaluation> {
        self.data.check_position(x)?;
        let (count, tail) = self.truncation(t)?;
        let coef = self.coefficients(t, count)?;
        let value = coef.iter().zip(&self.modes).map(|(c, m)| c * m.pair.phi(x)).sum();
        Ok(Evaluation {
            value,
            modes: count,
            tail,
        })
    }

    /// w(x, t) of the transformed problem.
    pub fn eval_w(&self, x: f64, t: f64) -> Result<Evaluation> {
        let e = self.eval_w_scaled(x, t)?;
        let st = self.data.params.s() * t;
        Ok(Evaluation {
            value: scale_up(e.value, st)?,
            tail: scale_up(e.tail, st)?,
            ..e
        })
    }

    /// Concentration C(x, t); the tail is e^{rx} times the scaled tail.
    pub fn eval_c(&self, x: f64, t: f64) -> Result<Evaluation> {
        let prof = self.profile(t, &[x])?;
        Ok(prof[0])
    }

    /// Concentrations at several positions sharing one coefficient set.
    pub fn profile(&self, t: f64, xs: &[f64]) -> Result<Vec<Evaluation>> {
        if self.origin == Origin::Start(t) {
            // At t0 the series only converges in L²; return the data itself.
            return xs
                .iter()
                .map(|&x| {
                    self.data.check_position(x)?;
                    Ok(Evaluation {
                        value: self.data.phi.eval(x),
                        modes: 0,
                        tail: 0.0,
                    })
                })
                .collect();
        }
        let (count, tail) = self.truncation(t)?;
        let coef = self.coefficients(t, count)?;
        let r = self.data.params.r();
        xs.iter()
            .map(|&x| {
                self.data.check_position(x)?;
                let w: f64 = coef.iter().zip(&self.modes).map(|(c, m)| c * m.pair.phi(x)).sum();
                let (h, _) = self.lift_parts(x, t)?;
                let erx = (r * x).exp();
                Ok(Evaluation {
                    value: erx * (w + h),
                    modes: count,
                    tail: erx * tail,
                })
            })
            .collect()
    }

    /// Concentration with an explicit mode count.
    pub fn eval_c_with_modes(&self, x: f64, t: f64, count: usize) -> Result<Evaluation> {
        self.check_time(t)?;
        self.data.check_position(x)?;
        let count = count.clamp(1, self.policy.n_max + 1);
        let coef = self.coefficients(t, count)?;
        let tail = self.tail_bound(t, count)?;
        let w: f64 = coef.iter().zip(&self.modes).map(|(c, m)| c * m.pair.phi(x)).sum();
        let (h, _) = self.lift_parts(x, t)?;
        let erx = (self.data.params.r() * x).exp();
        Ok(Evaluation {
            value: erx * (w + h),
            modes: count,
            tail: erx * tail,
        })
    }

    /// (C, C_x) at (x, t).
    pub fn gradient(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        self.data.check_position(x)?;
        let (count, _) = self.truncation(t)?;
        let coef = self.coefficients(t, count)?;
        let r = self.data.params.r();
        let (mut w, mut wx) = (0.0, 0.0);
        for (c, m) in coef.iter().zip(&self.modes) {
            let (v, d) = m.pair.eval(x);
            w += c * v;
            wx += c * d;
        }
        let (h, hx) = self.lift_parts(x, t)?;
        let erx = (r * x).exp();
        let cval = erx * (w + h);
        Ok((cval, r * cval + erx * (wx + hx)))
    }

    /// ∫₀^ℓ C(x,t) dx from the series in closed form.
    pub fn mass(&self, t: f64) -> Result<f64> {
        let (count, _) = self.truncation(t)?;
        let coef = self.coefficients(t, count)?;
        let p = &self.data.params;
        let (r, l, q) = (p.r(), p.length, p.p());
        let series: f64 = coef.iter().zip(&self.modes).map(|(c, m)| c * m.mass_weight).sum();
        let g = self.data.g.eval(t);
        let e = match self.kind {
            LiftKind::Robin => (-r * l).exp() * self.data.exit_fn()?.eval(t),
            LiftKind::Danckwerts => 0.0,
        };
        let int_exp = (r * l).exp_m1() / r;
        let (sl, cl) = (q * l).sin_cos();
        let int_cos = ((r * l).exp() * (r * cl + q * sl) - r) / (r * r + q * q);
        Ok(series + (g + e) * int_exp + (g - e) * int_cos)
    }

    /// Exit concentration C_E(t) used by this solution.
    pub fn exit_value(&self, t: f64) -> Result<f64> {
        Ok(self.data.exit_fn()?.eval(t))
    }
}

fn suffix_tails(bounds: &[f64]) -> Vec<f64> {
    let n = bounds.len();
    let mut tails = vec![0.0; n + 1];
    // Remainder past the explicit range, assuming at least 1/n² decay.
    let last = bounds[n.saturating_sub(2)..].iter().copied().fold(0.0, f64::max);
    tails[n] = 2.0 * last * n as f64;
    for i in (0..n).rev() {
        tails[i] = tails[i + 1] + bounds[i];
    }
    tails
}

fn suffix_tail(bounds: &[f64], count: usize) -> f64 {
    suffix_tails(bounds)[count.min(bounds.len())]
}

fn scale_up(v: f64, exponent: f64) -> Result<f64> {
    if v == 0.0 {
        return Ok(0.0);
    }
    let out = v * exponent.exp();
    if !out.is_finite() {
        return Err(Error::Overflow {
            what: "e^{st}",
            exponent,
        });
    }
    Ok(out)
}

/// Sampled sup of |β| and |α| over [lo, hi], padded by 10%.
fn sup_coefficients(data: &ProblemData, kind: LiftKind, lo: f64, hi: f64) -> Result<(f64, f64)> {
    const SAMPLES: usize = 4096;
    let mut ts: Vec<f64> = (0..=SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / SAMPLES as f64)
        .collect();
    ts.extend(data.g.breakpoints().into_iter().filter(|&t| t >= lo && t <= hi));
    let (mut sb, mut sa) = (0.0f64, 0.0f64);
    for t in ts {
        let fc = forcing_coefficients(data, kind, t)?;
        sb = sb.max(fc.cos.abs());
        sa = sa.max(fc.one.abs());
    }
    Ok((1.1 * sb, 1.1 * sa))
}

/// Replaces a computed exit by its tabulation on [lo, hi].
fn resolve_exit(
    data: &ProblemData,
    kind: LiftKind,
    policy: &TruncationPolicy,
    lo: f64,
    hi: f64,
    infinite_past: Option<()>,
) -> Result<(ProblemData, Option<ExitMemo>)> {
    match (&data.exit, kind) {
        (ExitSpec::Computed, LiftKind::Robin) => {
            let hp = match infinite_past {
                Some(()) => HalfLineProblem::infinite_past(data)?,
                None => HalfLineProblem::new(data)?,
            };
            let hi = if hi > lo { hi } else { lo + 1.0 };
            let memo = hp.memoize(lo, hi, policy.memo_intervals)?;
            Ok((data.with_exit(memo.as_smooth()), Some(memo)))
        }
        (ExitSpec::Computed, LiftKind::Danckwerts) => {
            // The Neumann exit needs no exit data.
            Ok((data.with_exit(crate::smooth::SmoothFn::zero()), None))
        }
        _ => Ok((data.clone(), None)),
    }
}

/// Quadrature of ∫₀^ℓ f dx split at `panels` equal pieces.
pub fn integrate_column<F: Fn(f64) -> f64>(f: F, length: f64, panels: usize) -> Result<f64> {
    let panels = panels.max(1);
    let breaks: Vec<f64> = (0..=panels).map(|i| length * i as f64 / panels as f64).collect();
    Ok(integrate_with_breaks(f, &breaks, QuadOptions::with_tol(1e-13, 1e-12))?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TransportParams;
    use crate::smooth::SmoothFn;

    fn params(mu: f64, gamma: f64) -> TransportParams {
        TransportParams::new(1.3, 0.4, 0.6, mu, gamma, 1.5).unwrap()
    }

    fn small_policy() -> TruncationPolicy {
        TruncationPolicy {
            n_max: 40,
            ..TruncationPolicy::default()
        }
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::default().validate().is_ok());
        let bad = TruncationPolicy {
            n_max: 0,
            ..TruncationPolicy::default()
        };
        assert!(bad.validate().is_err());
        let bad = TruncationPolicy {
            tail_tol: 0.0,
            ..TruncationPolicy::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_data_gives_zero() {
        let data = ProblemData::constant(params(0.2, 0.0), 0.0, 0.0, 0.0, 0.0).unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, small_policy(), 3.0).unwrap();
        for n in 0..10 {
            assert_eq!(sol.project_forcing(n, 1.0).unwrap(), 0.0);
            assert_eq!(sol.initial_coefficient(n).unwrap(), 0.0);
            assert_eq!(sol.coefficient_bound(n, 2.0).unwrap(), 0.0);
        }
        for &x in &[0.0, 0.4, 1.5] {
            assert_eq!(sol.eval_c(x, 2.0).unwrap().value, 0.0);
        }
    }

    #[test]
    fn projections_agree_both_ways() {
        let data = ProblemData::constant(params(0.0, 0.0), 0.0, 1.0, 0.0, 0.0).unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, small_policy(), 1.0).unwrap();
        for n in 0..12 {
            let a = sol.project_forcing(n, 0.5).unwrap();
            let b = sol.project_forcing_quadrature(n, 0.5).unwrap();
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "n = {n}: {a} vs {b}");
        }
    }

    #[test]
    fn eigenfunction_initial_state() {
        let p = params(0.1, 0.0);
        let phi2 = eigen::robin(&p, 2);
        let r = p.r();
        let phi = SmoothFn::custom(move |x| {
            let (v, d) = phi2.eval(x);
            let e = (r * x).exp();
            (e * v, e * (r * v + d))
        });
        let data = ProblemData::new(
            p,
            phi,
            SmoothFn::zero(),
            ExitSpec::Measured(SmoothFn::zero()),
            0.0,
        )
        .unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, small_policy(), 2.0).unwrap();
        for n in 0..15 {
            let t = sol.initial_coefficient(n).unwrap();
            if n == 2 {
                assert!((t - 1.0).abs() < 1e-10);
            } else {
                assert!(t.abs() <= 1e-8, "n = {n}: {t}");
            }
        }
        // No forcing: pure decay of the single mode.
        let kappa = p.kappa();
        for &t in &[0.1, 0.7, 2.0] {
            let c = sol.coefficient(2, t).unwrap();
            let expected = (-kappa * phi2.lambda * t).exp();
            assert!((c - expected).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn coefficient_continuous_at_start() {
        let data = ProblemData::new(
            params(0.1, 0.05),
            SmoothFn::Polynomial(vec![0.3, 0.2]),
            SmoothFn::Constant(1.0),
            ExitSpec::Measured(SmoothFn::Constant(0.2)),
            0.5,
        )
        .unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, small_policy(), 2.0).unwrap();
        for n in 0..6 {
            let start = sol.initial_coefficient(n).unwrap();
            let mut prev = f64::INFINITY;
            for dt in [1e-2, 1e-3, 1e-4, 1e-5] {
                let gap = (sol.coefficient(n, 0.5 + dt).unwrap() - start).abs();
                assert!(gap <= prev);
                prev = gap;
            }
            assert!(prev < 1e-3 * (1.0 + start.abs()));
        }
    }

    #[test]
    fn schwarz_bound_holds() {
        let data = ProblemData::new(
            params(0.0, 0.0),
            SmoothFn::Constant(0.5),
            SmoothFn::Sinusoid {
                mean: 1.0,
                amplitude: 0.5,
                period: 1.0,
                phase: 0.0,
            },
            ExitSpec::Measured(SmoothFn::Constant(0.3)),
            0.0,
        )
        .unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, small_policy(), 4.0).unwrap();
        for &t in &[0.05, 0.9, 2.3, 4.0] {
            let mut bounds = Vec::new();
            for n in 0..30 {
                let c = sol.scaled_coefficient(n, t).unwrap();
                let b = sol.coefficient_bound(n, t).unwrap();
                assert!(c.abs() <= b, "n = {n}, t = {t}: {c} > {b}");
                bounds.push(b);
            }
            for w in bounds[5..].windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn constant_equilibrium_is_stationary() {
        let p = params(0.1, 0.2);
        let data = ProblemData::constant(p, 2.0, 2.0, 2.0, 0.0).unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, TruncationPolicy::default(), 5.0).unwrap();
        let xs: Vec<f64> = (0..=10).map(|i| 0.15 * i as f64).collect();
        for &t in &[0.3, 1.0, 5.0] {
            for e in sol.profile(t, &xs).unwrap() {
                assert!((e.value - 2.0).abs() <= 1e-8 + e.tail, "{e:?}");
            }
        }
    }

    #[test]
    fn unreachable_tail_is_reported() {
        let p = TransportParams::new(1.0, 0.01, 1.0, 0.0, 0.0, 1.0).unwrap();
        let data = ProblemData::constant(p, 0.0, 1.0, 0.0, 0.0).unwrap();
        let policy = TruncationPolicy {
            n_max: 5,
            ..TruncationPolicy::default()
        };
        let sol = SeriesSolution::build(&data, LiftKind::Robin, policy, 1.0).unwrap();
        let e = sol.eval_c(0.5, 0.2).unwrap();
        assert_eq!(e.modes, 6);
        assert!(e.value.is_finite());
        assert!(e.tail > policy.tail_tol);
    }

    #[test]
    fn time_range_enforced() {
        let data = ProblemData::constant(params(0.1, 0.0), 0.0, 1.0, 0.0, 1.0).unwrap();
        let sol = SeriesSolution::build(&data, LiftKind::Robin, small_policy(), 2.0).unwrap();
        assert!(matches!(sol.eval_c(0.5, 0.5), Err(Error::TimeBeforeStart { .. })));
        assert!(matches!(sol.eval_c(0.5, 2.5), Err(Error::BeyondHorizon { .. })));
        assert!(matches!(sol.eval_c(2.0, 1.5), Err(Error::PositionOutOfRange { .. })));
    }

    #[test]
    fn large_time_needs_horizon_without_decay() {
        let p = TransportParams::new(1.0, 1.0, 1.0, 0.0, 0.3, 1.0).unwrap();
        let data = ProblemData::constant(p, 0.0, 1.0, 0.0, 0.0).unwrap();
        let r = SeriesSolution::build_large_time(&data, LiftKind::Robin, small_policy(), 0.0, 1.0, None);
        assert!(matches!(r, Err(Error::HorizonUndefined(_))));
        let p = TransportParams::new(1.0, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let data = ProblemData::constant(p, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(SeriesSolution::build_large_time(&data, LiftKind::Robin, small_policy(), 0.0, 1.0, None).is_err());
        assert!(SeriesSolution::build_large_time(&data, LiftKind::Robin, small_policy(), 0.0, 1.0, Some(-50.0)).is_ok());
    }
}
