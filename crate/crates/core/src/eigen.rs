//! Eigenpairs of w'' + λw = 0 on [0, ℓ] with w' − rw = 0 at x = 0.
//!
//! Robin family (w' − rw = 0 at x = ℓ): one negative eigenvalue −r² with
//! eigenfunction e^{rx}, then λₙ = n²π²/ℓ² with
//! φₙ = cos(√λₙ x) + (r/√λₙ) sin(√λₙ x).
//!
//! Danckwerts family (w' + rw = 0 at x = ℓ, i.e. C_x = 0): eigenvalues are
//! roots of sin(ℓκ)(κ² − r²) − 2rκ cos(ℓκ) = 0 with κ = √λ, one in each
//! interval (nπ/ℓ, (n+1)π/ℓ) for n ≥ 0.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{LiftKind, TransportParams};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::roots::{brent, scan_for_sign_change};

/// One eigenvalue with its normalizing constant ∫φ² dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub n: usize,
    pub lambda: f64,
    pub norm: f64,
    pub kind: LiftKind,
    /// √|λ|.
    pub kappa: f64,
    pub r: f64,
    pub length: f64,
}

impl EigenPair {
    /// The single negative eigenpair of the Robin family.
    pub fn is_exponential(&self) -> bool {
        self.lambda < 0.0
    }

    /// (φ(x), φ'(x)).
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let r = self.r;
        if self.is_exponential() {
            let e = (r * x).exp();
            return (e, r * e);
        }
        let k = self.kappa;
        let (s, c) = (k * x).sin_cos();
        (c + (r / k) * s, -k * s + r * c)
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// φ'' = −λφ.
    pub fn phi_xx(&self, x: f64) -> f64 {
        -self.lambda * self.phi(x)
    }

    /// Residuals of the two boundary operators this pair satisfies.
    pub fn boundary_residuals(&self) -> (f64, f64) {
        let (p0, d0) = self.eval(0.0);
        let (pl, dl) = self.eval(self.length);
        let right = match self.kind {
            LiftKind::Robin => dl - self.r * pl,
            LiftKind::Danckwerts => dl + self.r * pl,
        };
        (d0 - self.r * p0, right)
    }

    /// ∫₀^ℓ e^{−rx} φ dx.
    pub fn integral_exp(&self) -> f64 {
        let (r, l) = (self.r, self.length);
        if self.is_exponential() {
            return l;
        }
        let k = self.kappa;
        let (s, c) = (k * l).sin_cos();
        (2.0 * r + (-r * l).exp() * (-2.0 * r * c + (k - r * r / k) * s)) / (r * r + k * k)
    }

    /// ∫₀^ℓ φ dx.
    pub fn integral_one(&self) -> f64 {
        let (r, l) = (self.r, self.length);
        if self.is_exponential() {
            return (r * l).exp_m1() / r;
        }
        let k = self.kappa;
        let (s, _) = (k * l).sin_cos();
        s / k + r * sin_sq_half(k, l) / k
    }

    /// ∫₀^ℓ cos(px) φ dx.
    pub fn integral_cos(&self, p: f64) -> f64 {
        let (r, l) = (self.r, self.length);
        if self.is_exponential() {
            let (s, c) = (p * l).sin_cos();
            return ((r * l).exp() * (r * c + p * s) - r) / (r * r + p * p);
        }
        let k = self.kappa;
        let cc = 0.5 * (int_cos(k - p, l) + int_cos(k + p, l));
        let sc = 0.5 * (sin_sq_half(k + p, l) + sin_sq_half(k - p, l));
        cc + (r / k) * sc
    }
}

/// ∫₀^ℓ cos(dx) dx.
fn int_cos(d: f64, l: f64) -> f64 {
    if d == 0.0 {
        l
    } else {
        (d * l).sin() / d
    }
}

/// ∫₀^ℓ sin(dx) dx = 2 sin²(dℓ/2)/d.
fn sin_sq_half(d: f64, l: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        let s = (0.5 * d * l).sin();
        2.0 * s * s / d
    }
}

/// ∫₀^ℓ (cos κx + (r/κ) sin κx)² dx for any κ > 0.
pub fn trig_norm(kappa: f64, r: f64, l: f64) -> f64 {
    let a = r / kappa;
    let s2 = (2.0 * kappa * l).sin() / (4.0 * kappa);
    let sl = (kappa * l).sin();
    0.5 * l + s2 + a * sl * sl / kappa + a * a * (0.5 * l - s2)
}

/// Robin eigenpair with index n.
pub fn robin(params: &TransportParams, n: usize) -> EigenPair {
    let r = params.r();
    let l = params.length;
    if n == 0 {
        return EigenPair {
            n,
            lambda: -r * r,
            norm: (2.0 * r * l).exp_m1() / (2.0 * r),
            kind: LiftKind::Robin,
            kappa: r,
            r,
            length: l,
        };
    }
    let kappa = n as f64 * PI / l;
    let lambda = kappa * kappa;
    EigenPair {
        n,
        lambda,
        norm: (r * r + lambda) * l / (2.0 * lambda),
        kind: LiftKind::Robin,
        kappa,
        r,
        length: l,
    }
}

/// Pole-free form of the Danckwerts characteristic equation in κ = √λ.
pub fn danckwerts_residual(kappa: f64, r: f64, l: f64) -> f64 {
    let (s, c) = (l * kappa).sin_cos();
    s * (kappa * kappa - r * r) - 2.0 * r * kappa * c
}

/// Danckwerts eigenpair with index n, the root in (nπ/ℓ, (n+1)π/ℓ).
pub fn danckwerts(params: &TransportParams, n: usize) -> Result<EigenPair> {
    let r = params.r();
    let l = params.length;
    let lo = n as f64 * PI / l;
    let hi = (n + 1) as f64 * PI / l;
    let kappa = if n == 0 {
        // Divide out the trivial root at κ = 0.
        let f = |k: f64| {
            let sinc = if k == 0.0 { l } else { (l * k).sin() / k };
            sinc * (k * k - r * r) - 2.0 * r * (l * k).cos()
        };
        find_root(f, lo, hi)?
    } else {
        find_root(|k| danckwerts_residual(k, r, l), lo, hi)?
    };
    Ok(EigenPair {
        n,
        lambda: kappa * kappa,
        norm: trig_norm(kappa, r, l),
        kind: LiftKind::Danckwerts,
        kappa,
        r,
        length: l,
    })
}

fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let (a, b) = scan_for_sign_change(&f, lo, hi, 64).ok_or(Error::RootNotBracketed { a: lo, b: hi })?;
    if a == b {
        return Ok(a);
    }
    brent(&f, a, b, 1e-15 * hi, 200)
}

/// Eigenpairs with indices `0..count` of the given family.
pub fn pairs(params: &TransportParams, kind: LiftKind, count: usize) -> Result<Vec<EigenPair>> {
    (0..count)
        .map(|n| match kind {
            LiftKind::Robin => Ok(robin(params, n)),
            LiftKind::Danckwerts => danckwerts(params, n),
        })
        .collect()
}

/// ∫ f·h over [a, b] by adaptive quadrature, pre-split into `panels` pieces.
pub fn inner_product<F, H>(f: F, h: H, a: f64, b: f64, panels: usize, opts: QuadOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let panels = panels.max(1);
    let breaks: Vec<f64> = (0..=panels)
        .map(|i| if i == panels { b } else { a + (b - a) * i as f64 / panels as f64 })
        .collect();
    Ok(integrate_with_breaks(|x| f(x) * h(x), &breaks, opts)?.value)
}

/// (φₙ, φₘ) by quadrature, split at the half-periods of the faster mode.
pub fn pair_inner_product(a: &EigenPair, b: &EigenPair, opts: QuadOptions) -> Result<f64> {
    let fastest = a.n.max(b.n);
    let panels = if fastest > 50 { 2 * fastest + 2 } else { 4 };
    inner_product(|x| a.phi(x), |x| b.phi(x), 0.0, a.length, panels, opts)
}

/// Wronskian y₁'y₂ − y₁y₂' of y₁ = cos κx, y₂ = sin κx.
pub fn wronskian(kappa: f64, x: f64) -> f64 {
    let (s, c) = (kappa * x).sin_cos();
    let (y1, y1p) = (c, -kappa * s);
    let (y2, y2p) = (s, kappa * c);
    y1p * y2 - y1 * y2p
}
