//! Crank–Nicolson finite differences for R C_t = D C_xx − v C_x − μC + γ.
//!
//! Robin ends are closed with ghost nodes eliminated through the boundary
//! equations themselves, which keeps the closure second order.

use crate::error::{Error, Result};
use crate::model::{ProblemData, TransportParams};

/// Exit closure of the difference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdExit {
    /// vC − DC_x = vC_E.
    Robin,
    /// C_x = 0.
    Neumann,
}

/// Grid and scheme options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    /// Number of spatial nodes including both ends.
    pub nx: usize,
    /// Number of time steps.
    pub nt: usize,
    pub t_end: f64,
    /// Replace the first step by two backward-Euler half steps, which damps
    /// the oscillation Crank–Nicolson keeps from incompatible start data.
    pub startup: bool,
    pub exit: FdExit,
}

impl FdGrid {
    pub fn new(nx: usize, nt: usize, t_end: f64) -> Self {
        Self {
            nx,
            nt,
            t_end,
            startup: true,
            exit: FdExit::Robin,
        }
    }

    pub fn validate(&self, t0: f64) -> Result<()> {
        if self.nx < 11 {
            return Err(Error::InvalidParameter {
                name: "nx",
                reason: format!("need at least 11 nodes, got {}", self.nx),
            });
        }
        if self.nt < 10 {
            return Err(Error::InvalidParameter {
                name: "nt",
                reason: format!("need at least 10 steps, got {}", self.nt),
            });
        }
        if !(self.t_end > t0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must exceed t0 = {t0}, got {}", self.t_end),
            });
        }
        Ok(())
    }
}

/// Concentrations on the grid, one row per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub params: TransportParams,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    /// Inlet and exit data at each time level.
    pub inlet: Vec<f64>,
    pub exit: Vec<f64>,
}

impl FdSolution {
    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    /// Index of the time level closest to t.
    pub fn level(&self, t: f64) -> usize {
        let k = ((t - self.t[0]) / self.dt()).round();
        (k.max(0.0) as usize).min(self.t.len() - 1)
    }

    /// Trapezoidal ∫C dx at time level k.
    pub fn mass_at(&self, k: usize) -> f64 {
        let row = &self.c[k];
        let h = self.dx();
        let n = row.len();
        h * (row[1..n - 1].iter().sum::<f64>() + 0.5 * (row[0] + row[n - 1]))
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm).
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    if d == 0.0 || !d.is_finite() {
        return Err(Error::LinearSolve { row: 0, pivot: d });
    }
    c[0] = upper[0] / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i] * c[i - 1];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::LinearSolve { row: i, pivot: d });
        }
        if i + 1 < n {
            c[i] = upper[i] / d;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Operator {
    fn apply(&self, c: &[f64]) -> Vec<f64> {
        let n = c.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * c[i];
                if i > 0 {
                    v += self.lower[i] * c[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * c[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Runs the scheme from φ at t0 to `grid.t_end`. The exit data must be
/// available (measured or already tabulated) when the exit is Robin.
pub fn fd_solve(data: &ProblemData, grid: &FdGrid) -> Result<FdSolution> {
    grid.validate(data.t0)?;
    let p = data.params;
    let (rr, d, v, mu, gamma, l) = (
        p.retardation,
        p.dispersion,
        p.velocity,
        p.decay,
        p.production,
        p.length,
    );
    let n = grid.nx;
    let h = l / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| if i == n - 1 { l } else { i as f64 * h }).collect();
    let dt = (grid.t_end - data.t0) / grid.nt as f64;
    let t: Vec<f64> = (0..=grid.nt)
        .map(|k| if k == grid.nt { grid.t_end } else { data.t0 + k as f64 * dt })
        .collect();

    let exit_fn = match grid.exit {
        FdExit::Robin => Some(data.exit_fn()?),
        FdExit::Neumann => None,
    };

    // A: interior stencil plus eliminated ghost nodes.
    let diff = d / (h * h);
    let adv = v / (2.0 * h);
    let mut op = Operator {
        lower: vec![0.0; n],
        diag: vec![-2.0 * diff - mu; n],
        upper: vec![0.0; n],
    };
    for i in 1..n - 1 {
        op.lower[i] = diff + adv;
        op.upper[i] = diff - adv;
    }
    let robin_diag = 2.0 * v / h + v * v / d;
    op.upper[0] = 2.0 * diff;
    op.diag[0] -= robin_diag;
    op.lower[n - 1] = 2.0 * diff;
    if grid.exit == FdExit::Robin {
        op.diag[n - 1] += 2.0 * v / h - v * v / d;
    }

    let source = |time: f64| -> Vec<f64> {
        let mut b = vec![gamma; n];
        b[0] += robin_diag * data.g.eval(time);
        if let Some(f) = exit_fn {
            b[n - 1] += (-2.0 * v / h + v * v / d) * f.eval(time);
        }
        b
    };

    let step = |c: &[f64], t_old: f64, t_new: f64, theta: f64| -> Result<Vec<f64>> {
        let tau = t_new - t_old;
        let m = rr / tau;
        let ac = op.apply(c);
        let b_new = source(t_new);
        let b_old = source(t_old);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| m * c[i] + (1.0 - theta) * (ac[i] + b_old[i]) + theta * b_new[i])
            .collect();
        let lower: Vec<f64> = op.lower.iter().map(|a| -theta * a).collect();
        let upper: Vec<f64> = op.upper.iter().map(|a| -theta * a).collect();
        let diag: Vec<f64> = op.diag.iter().map(|a| m - theta * a).collect();
        thomas(&lower, &diag, &upper, &mut rhs)?;
        Ok(rhs)
    };

    let mut c: Vec<Vec<f64>> = Vec::with_capacity(grid.nt + 1);
    c.push(x.iter().map(|&xi| data.phi.eval(xi)).collect());
    for k in 0..grid.nt {
        let prev = &c[k];
        let next = if k == 0 && grid.startup {
            let mid = 0.5 * (t[0] + t[1]);
            let half = step(prev, t[0], mid, 1.0)?;
            step(&half, mid, t[1], 1.0)?
        } else {
            step(prev, t[k], t[k + 1], 0.5)?
        };
        c.push(next);
    }
    let inlet = t.iter().map(|&tk| data.g.eval(tk)).collect();
    let exit = match exit_fn {
        Some(f) => t.iter().map(|&tk| f.eval(tk)).collect(),
        None => c.iter().map(|row| row[n - 1]).collect(),
    };
    Ok(FdSolution {
        params: p,
        x,
        t,
        c,
        inlet,
        exit,
    })
}
