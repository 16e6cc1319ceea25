//! Scalar root finding: sign-change scanning and Brent's method.

use crate::error::{Error, Result};

/// Splits `[a, b]` into `pieces` equal parts and returns the first
/// subinterval across which `f` changes sign (or hits zero exactly).
pub fn scan_for_sign_change<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    pieces: usize,
) -> Option<(f64, f64)> {
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    let mut x0 = a;
    let mut f0 = f(x0);
    for i in 1..=pieces {
        let x1 = if i == pieces { b } else { a + h * i as f64 };
        let f1 = f(x1);
        if f0 == 0.0 {
            return Some((x0, x0));
        }
        if f0.signum() != f1.signum() || f1 == 0.0 {
            return Some((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

struct BracketWidth {
    xtol: f64,
    max_iter: usize,
}

impl roots::Convergency<f64> for BracketWidth {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, a: f64, b: f64) -> bool {
        (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) + self.xtol
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Brent's method on a bracketing interval, stopping once the bracket is
/// narrower than `4ε|x| + xtol`.
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotBracketed { a, b });
    }
    let mut conv = BracketWidth { xtol, max_iter };
    roots::find_root_brent(a, b, &f, &mut conv).map_err(|e| match e {
        roots::SearchError::NoBracketing => Error::RootNotBracketed { a, b },
        _ => Error::RootNotConverged {
            a: a.min(b),
            b: a.max(b),
            iterations: max_iter,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let x = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn unbracketed_is_error() {
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100),
            Err(Error::RootNotBracketed { .. })
        ));
    }

    #[test]
    fn scan_finds_first_crossing() {
        let (a, b) = scan_for_sign_change(&|x: f64| x.sin(), 2.0, 10.0, 100).unwrap();
        assert!(a <= std::f64::consts::PI && std::f64::consts::PI <= b);
    }
}
