use relheat::evolve::{self, Method, TimeStepConfig};
use relheat::grid::{self, BoundaryCondition, Grid, ScalarField};
use relheat::newton::NewtonOptions;
use relheat::operators::ModelParams;
use relheat::report::EquationTag;
use relheat::verify;

fn unit() -> ModelParams {
    ModelParams::default()
}

fn bump(grid: Grid) -> ScalarField {
    ScalarField::from_fn(grid, |x| 0.2 + (-50.0 * (x[0] - 0.5).powi(2) - 50.0 * (x[1] - 0.5).powi(2) * (grid.dim() - 1) as f64).exp())
        .unwrap()
}

#[test]
fn constant_data_stays_constant() {
    let g = Grid::unit(2, 16).unwrap();
    let u = ScalarField::constant(g, 5.0).unwrap();
    for method in [Method::ExplicitEuler, Method::ImplicitEuler] {
        let cfg = TimeStepConfig {
            snapshot_times: vec![0.01, 0.02],
            ..TimeStepConfig::new(method, 0.03)
        };
        let r = evolve::evolve(&u, &BoundaryCondition::NoFlux, &unit(), &cfg).unwrap();
        assert!(r.snapshots.iter().all(|s| s.field == u));
    }
    let cfg = TimeStepConfig::new(Method::ExplicitEuler, 0.03);
    let r = evolve::evolve_classical_heat(&u, &BoundaryCondition::NoFlux, &cfg).unwrap();
    assert!(r.final_field().values().iter().all(|&v| v == 5.0));
    assert_eq!(r.equation, EquationTag::ClassicalHeat);
}

#[test]
fn implicit_and_explicit_steps_differ_by_dt_squared() {
    let g = Grid::new_1d(40, (0.0, 1.0)).unwrap();
    let u = bump(g);
    let p = unit();
    let gap = |dt: f64| {
        let e = evolve::step_explicit(&u, &BoundaryCondition::NoFlux, &p, dt).unwrap();
        let i = evolve::step_implicit(&u, &BoundaryCondition::NoFlux, &p, dt, &NewtonOptions { tol: 1e-14, ..Default::default() })
            .unwrap();
        e.field.max_abs_diff(&i.field).unwrap()
    };
    let dt = 1e-4;
    let ratios = [gap(dt) / gap(dt / 2.0), gap(dt / 2.0) / gap(dt / 4.0)];
    for r in ratios {
        assert!((r - 4.0).abs() < 0.2, "ratios {ratios:?}");
    }
}

#[test]
fn large_implicit_steps_converge() {
    let p = unit();
    for g in [Grid::new_1d(64, (0.0, 1.0)).unwrap(), Grid::unit(2, 24).unwrap()] {
        let u = bump(g);
        let dt = 10.0 * evolve::stable_dt(&g, &p, &TimeStepConfig::default());
        let s = evolve::step_implicit(&u, &BoundaryCondition::NoFlux, &p, dt, &NewtonOptions::default()).unwrap();
        assert!(s.newton_iterations <= 50);
    }
}

#[test]
fn bump_runs_decay_monotonically() {
    let p = unit();
    for (g, method) in [
        (Grid::new_1d(100, (0.0, 1.0)).unwrap(), Method::ExplicitEuler),
        (Grid::new_1d(100, (0.0, 1.0)).unwrap(), Method::ImplicitEuler),
        (Grid::unit(2, 32).unwrap(), Method::ExplicitEuler),
    ] {
        let r = evolve::evolve(&bump(g), &BoundaryCondition::NoFlux, &p, &TimeStepConfig::new(method, 0.02)).unwrap();
        let m0 = r.mass_series[0];
        for k in 1..r.times.len() {
            assert!(r.entropy_series[k] <= r.entropy_series[k - 1] + 1e-10);
            assert!(r.max_series[k] <= r.max_series[k - 1]);
            assert!(r.min_series[k] >= r.min_series[k - 1]);
            if method == Method::ExplicitEuler {
                assert!((r.mass_series[k] - m0).abs() <= 1e-12 * m0);
            }
        }
    }
}

#[test]
fn explicit_and_implicit_runs_converge_at_first_order() {
    let g = Grid::new_1d(50, (0.0, 1.0)).unwrap();
    let u = bump(g);
    let p = unit();
    let base = evolve::stable_dt(&g, &p, &TimeStepConfig::default());
    let gap = |dt: f64| {
        let mk = |method| TimeStepConfig {
            fixed_dt: Some(dt),
            ..TimeStepConfig::new(method, 0.01)
        };
        let e = evolve::evolve(&u, &BoundaryCondition::NoFlux, &p, &mk(Method::ExplicitEuler)).unwrap();
        let i = evolve::evolve(&u, &BoundaryCondition::NoFlux, &p, &mk(Method::ImplicitEuler)).unwrap();
        e.final_field().max_abs_diff(i.final_field()).unwrap()
    };
    let (a, b, c) = (gap(base), gap(base / 2.0), gap(base / 4.0));
    for r in [a / b, b / c] {
        assert!((r - 2.0).abs() < 0.2, "gaps {a} {b} {c}");
    }
}

#[test]
fn classical_heat_matches_the_kernel() {
    for (n, method) in [(250, Method::ExplicitEuler), (500, Method::ExplicitEuler), (250, Method::ImplicitEuler)] {
        let g = Grid::new_1d(n, (-5.0, 5.0)).unwrap();
        let t0 = 0.25;
        let u0 = ScalarField::from_fn(g, |x| (-x[0] * x[0] / (4.0 * t0)).exp()).unwrap();
        let cfg = TimeStepConfig {
            fixed_dt: (method == Method::ImplicitEuler).then_some(1e-4),
            ..TimeStepConfig::new(method, 0.1)
        };
        let r = evolve::evolve_classical_heat(&u0, &BoundaryCondition::NoFlux, &cfg).unwrap();
        let t = r.t_end();
        let exact = ScalarField::from_fn(g, |x| (t0 / (t0 + t)).sqrt() * (-x[0] * x[0] / (4.0 * (t0 + t))).exp()).unwrap();
        let h = g.h_min();
        assert!(r.final_field().max_abs_diff(&exact).unwrap() <= 5.0 * h * h);
        assert!(r.max_series.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn telegraph_single_pulse_speed() {
    // threshold 2% of the pulse height: lower thresholds pick up the
    // stencil's sub-resolution precursor
    let p = unit();
    for n in [200, 400, 800] {
        let g = Grid::new_1d(n, (0.0, 2.0)).unwrap();
        let (u0, v0, _) = verify::telegraph_pulses(&p, &g, false).unwrap();
        let cfg = TimeStepConfig {
            snapshot_times: (1..400).map(|k| 0.002 * k as f64).collect(),
            ..TimeStepConfig::new(Method::ExplicitEuler, 0.8)
        };
        let r = evolve::evolve_telegraph(&u0, &v0, &BoundaryCondition::NoFlux, &p, &cfg).unwrap();
        let speed = verify::measure_front_speed(&r, 0.01).unwrap();
        assert!(speed <= 1.0 + 2.0 * g.h_min(), "n = {n}: speed {speed}");
        assert!(speed > 0.9);
    }
}

#[test]
fn telegraph_cfl_is_enforced() {
    let g = Grid::unit(2, 20).unwrap();
    let u = bump(g);
    let zero = ScalarField::constant(g, 0.0).unwrap();
    let limit = g.h_min() / 2f64.sqrt();
    let cfg = TimeStepConfig {
        fixed_dt: Some(1.01 * limit),
        ..TimeStepConfig::new(Method::ExplicitEuler, 0.1)
    };
    assert!(evolve::evolve_telegraph(&u, &zero, &BoundaryCondition::NoFlux, &unit(), &cfg).is_err());
    let cfg = TimeStepConfig {
        fixed_dt: Some(limit),
        ..cfg
    };
    assert!(evolve::evolve_telegraph(&u, &zero, &BoundaryCondition::NoFlux, &unit(), &cfg).is_ok());
}

#[test]
fn compact_support_is_clipped_not_negative() {
    let g = Grid::new_1d(100, (0.0, 1.0)).unwrap();
    let u0 = ScalarField::from_fn(g, |x| if (x[0] - 0.5).abs() < 0.1 { 1.0 } else { 0.0 }).unwrap();
    let r = evolve::evolve(&u0, &BoundaryCondition::NoFlux, &unit(), &TimeStepConfig::new(Method::ExplicitEuler, 0.05)).unwrap();
    assert!(r.global_min >= 0.0);
    assert!(r.worst_undershoot >= -1e-13);
    assert!(grid::extrema(r.final_field()).min >= 0.0);
    let implicit = TimeStepConfig::new(Method::ImplicitEuler, 0.05);
    assert!(evolve::evolve(&u0, &BoundaryCondition::NoFlux, &unit(), &implicit).is_err());
}

#[test]
fn report_files_round_trip() {
    let g = Grid::new_1d(30, (0.0, 1.0)).unwrap();
    let cfg = TimeStepConfig {
        snapshot_times: vec![0.005],
        ..TimeStepConfig::new(Method::ExplicitEuler, 0.01)
    };
    let r = evolve::evolve(&bump(g), &BoundaryCondition::NoFlux, &unit(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = r.write(dir.path(), "bump").unwrap();
    assert_eq!(paths.len(), 1 + r.snapshots.len() + 1);
    let series = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(series.starts_with("t,mass,entropy,max,min,front\n"));
    assert_eq!(series.lines().count(), r.times.len() + 1);
    let snap = std::fs::read_to_string(&paths[2]).unwrap();
    let back = ScalarField::from_csv(g, &snap).unwrap();
    assert_eq!(&back, &r.snapshots[1].field);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(paths.last().unwrap()).unwrap()).unwrap();
    assert_eq!(doc["snapshots"].as_array().unwrap().len(), r.snapshots.len());
    assert_eq!(doc["equation"], "Relativistic");
}
