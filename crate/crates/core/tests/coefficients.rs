use ode_solvers::{Dopri5, OutputType, System, Vector1};
use robin_cde::{ExitSpec, LiftKind, ProblemData, SeriesSolution, SmoothFn, TransportParams, TruncationPolicy};

/// Tₙ' = −(D/R)λₙTₙ + e^{sτ}fₙ(τ), with fₙ taken by direct quadrature.
struct ModeOde<'a> {
    sol: &'a SeriesSolution,
    n: usize,
}

impl System<f64, Vector1<f64>> for ModeOde<'_> {
    fn system(&self, t: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        let p = self.sol.data().params;
        let lambda = self.sol.pair(self.n).unwrap().lambda;
        let f = self.sol.project_forcing_quadrature(self.n, t).unwrap();
        dy[0] = -p.kappa() * lambda * y[0] + (p.s() * t).exp() * f;
    }
}

fn ode_coefficient(sol: &SeriesSolution, n: usize, t: f64) -> f64 {
    let t0 = sol.data().t0;
    let y0 = Vector1::new(sol.initial_coefficient(n).unwrap());
    let span = t - t0;
    let mut stepper = Dopri5::from_param(
        ModeOde { sol, n },
        t0,
        t,
        span,
        y0,
        1e-11,
        1e-13,
        0.9,
        0.04,
        0.2,
        10.0,
        span / 20.0,
        0.0,
        100_000,
        1000,
        OutputType::Sparse,
    );
    stepper.integrate().unwrap();
    assert!((stepper.x_out().last().unwrap() - t).abs() < 1e-12 * t.abs().max(1.0));
    stepper.y_out().last().unwrap()[0]
}

fn data(mu: f64) -> ProblemData {
    let p = TransportParams::new(1.4, 0.35, 0.7, mu, 0.05, 1.3).unwrap();
    ProblemData::new(
        p,
        SmoothFn::Polynomial(vec![0.4, -0.1]),
        SmoothFn::Sinusoid {
            mean: 1.0,
            amplitude: 0.4,
            period: 1.7,
            phase: 0.2,
        },
        ExitSpec::Measured(SmoothFn::Exponential {
            base: 0.3,
            amplitude: 0.2,
            rate: -0.8,
        }),
        0.0,
    )
    .unwrap()
}

#[test]
fn mode_zero_matches_runge_kutta() {
    let policy = TruncationPolicy {
        n_max: 20,
        ..TruncationPolicy::default()
    };
    for mu in [0.1, 0.0] {
        let sol = SeriesSolution::build(&data(mu), LiftKind::Robin, policy, 3.0).unwrap();
        for &t in &[0.4, 1.5, 3.0] {
            let ours = sol.coefficient(0, t).unwrap();
            let oracle = ode_coefficient(&sol, 0, t);
            assert!((ours - oracle).abs() <= 1e-7 * oracle.abs().max(1e-3), "mu = {mu}, t = {t}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn higher_modes_match_runge_kutta() {
    let policy = TruncationPolicy {
        n_max: 20,
        ..TruncationPolicy::default()
    };
    let sol = SeriesSolution::build(&data(0.1), LiftKind::Robin, policy, 2.0).unwrap();
    for n in [1, 3, 7] {
        let ours = sol.coefficient(n, 2.0).unwrap();
        let oracle = ode_coefficient(&sol, n, 2.0);
        assert!((ours - oracle).abs() <= 1e-7 * oracle.abs().max(1e-3), "n = {n}: {ours} vs {oracle}");
    }
}

#[test]
fn danckwerts_modes_match_runge_kutta() {
    let policy = TruncationPolicy {
        n_max: 20,
        ..TruncationPolicy::default()
    };
    let sol = SeriesSolution::build(&data(0.1), LiftKind::Danckwerts, policy, 2.0).unwrap();
    for n in [0, 2] {
        let ours = sol.coefficient(n, 2.0).unwrap();
        let oracle = ode_coefficient(&sol, n, 2.0);
        assert!((ours - oracle).abs() <= 1e-7 * oracle.abs().max(1e-3), "n = {n}: {ours} vs {oracle}");
    }
}
