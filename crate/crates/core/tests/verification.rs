use robin_cde::model::forcing;
use robin_cde::verify::{
    boundary_residuals, danckwerts_error, danckwerts_solve, eigenvalue_table, fd_solve, mass_balance, FdGrid,
};
use robin_cde::{ExitSpec, LiftKind, ProblemData, SeriesSolution, SmoothFn, TransportParams, TruncationPolicy};

fn smooth_data() -> ProblemData {
    let p = TransportParams::new(1.1, 0.2, 0.6, 0.1, 0.05, 1.0).unwrap();
    ProblemData::new(
        p,
        SmoothFn::Constant(0.0),
        // Starts at 0 so that the data are compatible at t0.
        SmoothFn::Exponential {
            base: 1.0,
            amplitude: -1.0,
            rate: -2.0,
        },
        ExitSpec::Measured(SmoothFn::Constant(0.0)),
        0.0,
    )
    .unwrap()
}

fn breakthrough() -> ProblemData {
    let p = TransportParams::new(1.0, 0.1, 1.0, 0.0, 0.0, 1.0).unwrap();
    ProblemData::new(p, SmoothFn::zero(), SmoothFn::Constant(1.0), ExitSpec::Computed, 0.0).unwrap()
}

fn times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

#[test]
fn fd_richardson_order() {
    let data = smooth_data();
    let runs: Vec<_> = [40usize, 80, 160]
        .iter()
        .map(|&m| fd_solve(&data, &FdGrid::new(m + 1, m, 1.0)).unwrap())
        .collect();
    // Compare on the coarse nodes at the final time.
    let coarse = |k: usize, i: usize| runs[k].c.last().unwrap()[i << k];
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for i in 0..=40 {
        e1 = e1.max((coarse(0, i) - coarse(1, i)).abs());
        e2 = e2.max((coarse(1, i) - coarse(2, i)).abs());
    }
    let order = (e1 / e2).log2();
    assert!(order > 1.9 && order < 2.2, "observed order {order}");
}

#[test]
fn fd_and_series_agree_under_refinement() {
    let data = smooth_data();
    let sol = SeriesSolution::build(&data, LiftKind::Robin, TruncationPolicy::default(), 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for m in [20usize, 40, 80, 160] {
        let fd = fd_solve(&data, &FdGrid::new(m + 1, m, 1.0)).unwrap();
        let exact = sol.profile(1.0, &fd.x).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for (e, c) in exact.iter().zip(fd.c.last().unwrap()) {
            num += (e.value - c).powi(2);
            den += e.value.powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel < prev, "{m}: {rel}");
        prev = rel;
    }
    assert!(prev < 1e-4, "{prev}");
}

#[test]
fn zero_data_balance_is_zero() {
    let p = TransportParams::new(1.0, 0.5, 1.0, 0.2, 0.0, 1.0).unwrap();
    let data = ProblemData::constant(p, 0.0, 0.0, 0.0, 0.0).unwrap();
    let sol = SeriesSolution::build(&data, LiftKind::Robin, TruncationPolicy::default(), 1.0).unwrap();
    let report = mass_balance(&sol, &times(0.1, 0.9, 8)).unwrap();
    for s in &report.samples {
        assert_eq!((s.accumulation, s.inflow, s.outflow, s.reaction, s.residual), (0.0, 0.0, 0.0, 0.0, 0.0));
    }
    let fd = fd_solve(&data, &FdGrid::new(21, 20, 1.0)).unwrap();
    assert!(fd.c.iter().flatten().all(|&c| c == 0.0));
}

#[test]
fn series_balance_closes() {
    let sol = SeriesSolution::build(&breakthrough(), LiftKind::Robin, TruncationPolicy::default(), 2.0).unwrap();
    let report = mass_balance(&sol, &times(0.05, 1.95, 38)).unwrap();
    for s in &report.samples {
        assert!((s.residual - (s.accumulation - (s.inflow - s.outflow + s.reaction))).abs() < 1e-12);
    }
    assert!(report.relative_integrated <= 1e-4, "{}", report.relative_integrated);
    assert!(report.max_relative <= 1e-4, "{}", report.max_relative);
}

#[test]
fn neumann_exit_breaks_the_balance() {
    let data = breakthrough();
    let robin = SeriesSolution::build(&data, LiftKind::Robin, TruncationPolicy::default(), 2.0).unwrap();
    let dk = danckwerts_solve(&data, TruncationPolicy::default(), 2.0).unwrap();
    let ts = times(0.05, 1.95, 38);
    let a = mass_balance(&robin, &ts).unwrap();
    let b = mass_balance(&dk, &ts).unwrap();
    assert!(b.relative_integrated >= 10.0 * a.relative_integrated);
}

#[test]
fn conservation_identity() {
    let sol = SeriesSolution::build(&breakthrough(), LiftKind::Robin, TruncationPolicy::default(), 2.0).unwrap();
    let v = sol.data().params.velocity;
    for &t in &[0.1, 0.6, 1.4, 2.0] {
        let b = boundary_residuals(&sol, t).unwrap();
        let bound = 1e-9 * v * (1.0 + sol.eval_c(0.0, t).unwrap().value.abs() + sol.eval_c(1.0, t).unwrap().value.abs());
        assert!(b.inlet.abs() <= bound && b.exit.abs() <= bound, "{b:?}");
        assert!(b.identity.abs() <= 2.0 * 2.0 * bound);
    }
}

#[test]
fn danckwerts_exit_gradient_vanishes() {
    let data = smooth_data();
    let dk = danckwerts_solve(&data, TruncationPolicy::default(), 1.0).unwrap();
    for &t in &[0.2, 0.7, 1.0] {
        let b = boundary_residuals(&dk, t).unwrap();
        assert!(b.exit.abs() < 1e-9, "{}", b.exit);
        assert!(b.inlet.abs() < 1e-9, "{}", b.inlet);
    }
    for k in 0..25 {
        let (x, t) = (0.04 * k as f64, 0.037 * k as f64);
        assert_eq!(forcing(&data, LiftKind::Danckwerts, x, t).unwrap().f2, 0.0);
    }
}

#[test]
fn danckwerts_exit_drains_without_input() {
    let p = TransportParams::new(1.0, 0.5, 1.0, 0.05, 0.0, 1.0).unwrap();
    let data = ProblemData::new(
        p,
        SmoothFn::Polynomial(vec![1.0, 0.5]),
        SmoothFn::zero(),
        ExitSpec::Computed,
        0.0,
    )
    .unwrap();
    let dk = danckwerts_solve(&data, TruncationPolicy::default(), 20.0).unwrap();
    let mut prev = f64::INFINITY;
    for &t in &[1.0, 4.0, 10.0, 20.0] {
        let c = dk.eval_c(1.0, t).unwrap().value.abs();
        assert!(c < prev);
        prev = c;
    }
    assert!(prev < 1e-3, "{prev}");
}

#[test]
fn error_of_a_solution_against_itself() {
    let p = TransportParams::new(1.0, 0.5, 1.0, 0.1, 0.2, 1.0).unwrap();
    let data = ProblemData::constant(p, 0.0, 1.0, 0.5, 0.0).unwrap();
    let dk = danckwerts_solve(&data, TruncationPolicy::default(), 2.0).unwrap();
    let e = danckwerts_error(&dk, &dk, 1.0, 0.2).unwrap();
    assert_eq!(e.error, 0.0);
    assert_eq!(e.lower_bound, Some(2.0));

    let p = TransportParams::new(1.0, 0.5, 1.0, 0.1, 0.0, 1.0).unwrap();
    let data = ProblemData::constant(p, 0.0, 1.0, 0.5, 0.0).unwrap();
    let robin = SeriesSolution::build(&data, LiftKind::Robin, TruncationPolicy::default(), 2.0).unwrap();
    let dk = danckwerts_solve(&data, TruncationPolicy::default(), 2.0).unwrap();
    assert_eq!(danckwerts_error(&robin, &dk, 1.0, 0.2).unwrap().lower_bound, Some(0.0));

    let p = TransportParams::new(1.0, 0.5, 1.0, 0.0, 0.0, 1.0).unwrap();
    let data = ProblemData::constant(p, 0.0, 1.0, 0.5, 0.0).unwrap();
    let robin = SeriesSolution::build(&data, LiftKind::Robin, TruncationPolicy::default(), 2.0).unwrap();
    let dk = danckwerts_solve(&data, TruncationPolicy::default(), 2.0).unwrap();
    let e = danckwerts_error(&robin, &dk, 1.0, 0.2).unwrap();
    assert_eq!((e.lower_bound, e.meets_bound), (None, None));
    assert!(e.error > 0.0);
}

#[test]
fn eigenvalue_table_rows_are_bracketed() {
    let p = TransportParams::new(1.0, 0.5, 2.0, 0.0, 0.0, 1.5).unwrap();
    for row in eigenvalue_table(&p, 40).unwrap() {
        assert!(row.bracketed(), "{row:?}");
        assert!(row.residual.abs() < 1e-9, "{row:?}");
    }
}
