use std::f64::consts::PI;

use proptest::prelude::*;

use relheat::grid::{self, BoundaryCondition, Grid, ScalarField};
use relheat::operators::{self, ModelParams, PointState};

use nalgebra::DMatrix;

fn field_strategy(dim: usize) -> impl Strategy<Value = ScalarField> {
    let (n, grid) = if dim == 1 {
        (24, Grid::new_1d(24, (0.0, 1.0)).unwrap())
    } else {
        (8 * 8, Grid::unit(2, 8).unwrap())
    };
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0, 1e-6f64..1e-3], n)
        .prop_map(move |v| ScalarField::new(grid, v).unwrap())
}

proptest! {
    #[test]
    fn noflux_divergence_sums_to_zero(field in prop_oneof![field_strategy(1), field_strategy(2)], c in 0.2f64..10.0) {
        let p = ModelParams::new(c).unwrap();
        let div = grid::divergence(&grid::face_flux(&field, &BoundaryCondition::NoFlux, &p).unwrap());
        let vol = field.grid().cell_volume();
        let total: f64 = div.values().iter().map(|d| d * vol).sum();
        let scale: f64 = div.values().iter().map(|d| (d * vol).abs()).sum::<f64>().max(1e-300);
        prop_assert!(total.abs() <= 1e-13 * scale.max(1.0), "sum {total} vs scale {scale}");
    }

    #[test]
    fn face_fluxes_inherit_bound(field in prop_oneof![field_strategy(1), field_strategy(2)], c in 0.2f64..10.0, g in 0.0f64..3.0) {
        let p = ModelParams::new(c).unwrap();
        let grid = *field.grid();
        let bc = BoundaryCondition::dirichlet_uniform(&grid, g).unwrap();
        let fx = grid::face_flux(&field, &bc, &p).unwrap();
        let v = field.values();
        let nx = grid.n(0);
        for iy in 0..grid.n(1) {
            for i in 0..=nx {
                let left = if i > 0 { v[grid.index(i - 1, iy)] } else { g };
                let right = if i < nx { v[grid.index(i, iy)] } else { g };
                let f = fx.axis(0)[iy * (nx + 1) + i];
                // boundary faces see the ghost 2g - u, whose mean with u is g
                let bound = if i == 0 || i == nx { c * g } else { c * left.max(right) };
                prop_assert!(f.abs() <= bound * (1.0 + 1e-12) + 1e-300, "face {i}: {f} > {bound}");
            }
        }
    }
}

fn sub_or_super_w(kind: usize) -> impl Fn([f64; 2]) -> PointState {
    // Q ≥ 2.8 for the first field; Q ≤ -0.05 for the second (small gradients)
    move |x: [f64; 2]| {
        let (a, lin) = if kind == 0 { (1.0, 0.3) } else { (-0.1, 0.0) };
        let value = a * (x[0] * x[0] + 0.5 * x[1] * x[1]) + lin * x[0];
        let grad = vec![a * 2.0 * x[0] + lin, a * x[1]];
        let hess = DMatrix::from_row_slice(2, 2, &[2.0 * a, 0.0, 0.0, a]);
        PointState::new(value, grad, Some(hess)).unwrap()
    }
}

#[test]
fn stencil_pipelines_agree_on_sign() {
    let p = ModelParams::default();
    for n in [64, 128] {
        let g = Grid::unit(2, n).unwrap();
        let h = g.h_min();
        for kind in 0..2 {
            let exact = sub_or_super_w(kind);
            let w = ScalarField::from_fn(g, |x| exact(x).value).unwrap();
            let bc = BoundaryCondition::dirichlet_fn(&g, |x| exact(x).value).unwrap();
            let q = grid::discrete_q(&w, &bc, &p).unwrap();
            let u = w.map(f64::exp).unwrap();
            let div = grid::divergence(&grid::face_flux(&u, &bc.map_values(f64::exp), &p).unwrap());
            for i in 0..g.len() {
                let a = operators::classify_residual(q.values()[i], 10.0 * h * h);
                let b = operators::classify_residual(div.values()[i], 10.0 * h * h);
                assert_eq!(a, b, "cell {i} at n = {n}");
            }
        }
    }
}

fn interior_error(num: &ScalarField, exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let g = num.grid();
    (0..g.len())
        .filter(|&i| !g.is_boundary_cell(i))
        .map(|i| (num.values()[i] - exact(g.center(i))).abs())
        .fold(0.0, f64::max)
}

fn observed_order(errors: &[f64]) -> f64 {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).fold(f64::INFINITY, f64::min)
}

#[test]
fn discrete_q_is_second_order() {
    let p = ModelParams::default();
    // 1D: w = sin(πx)
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = Grid::new_1d(n, (0.0, 1.0)).unwrap();
            let w = ScalarField::from_fn(g, |x| (PI * x[0]).sin()).unwrap();
            let bc = BoundaryCondition::dirichlet_fn(&g, |x| (PI * x[0]).sin()).unwrap();
            let q = grid::discrete_q(&w, &bc, &p).unwrap();
            interior_error(&q, |x| {
                let s = PointState::new(
                    (PI * x[0]).sin(),
                    vec![PI * (PI * x[0]).cos()],
                    Some(DMatrix::from_element(1, 1, -PI * PI * (PI * x[0]).sin())),
                )
                .unwrap();
                operators::q_operator(&s, &p).unwrap()
            })
        })
        .collect();
    assert!(observed_order(&errors) >= 1.9, "{errors:?}");

    // 2D with a cross term
    let f = |x: [f64; 2]| (x[0] + 0.5 * x[1]).sin() * 0.8 + 0.3 * x[0] * x[1];
    let state = |x: [f64; 2]| {
        let a = x[0] + 0.5 * x[1];
        let grad = vec![0.8 * a.cos() + 0.3 * x[1], 0.4 * a.cos() + 0.3 * x[0]];
        let s = -0.8 * a.sin();
        let hess = DMatrix::from_row_slice(2, 2, &[s, 0.5 * s + 0.3, 0.5 * s + 0.3, 0.25 * s]);
        PointState::new(f(x), grad, Some(hess)).unwrap()
    };
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let g = Grid::unit(2, n).unwrap();
            let w = ScalarField::from_fn(g, f).unwrap();
            let bc = BoundaryCondition::dirichlet_fn(&g, f).unwrap();
            let q = grid::discrete_q(&w, &bc, &p).unwrap();
            interior_error(&q, |x| operators::q_operator(&state(x), &p).unwrap())
        })
        .collect();
    assert!(observed_order(&errors) >= 1.9, "{errors:?}");
}

#[test]
fn flux_divergence_is_second_order() {
    let p = ModelParams::new(2.0).unwrap();
    let w = |x: [f64; 2]| 0.5 * (PI * x[0]).sin() * (0.5 * PI * x[1]).cos();
    let state = |x: [f64; 2]| {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (0.5 * PI * x[1]).sin_cos();
        let grad = vec![0.5 * PI * cx * cy, -0.25 * PI * sx * sy];
        let hess = DMatrix::from_row_slice(
            2,
            2,
            &[
                -0.5 * PI * PI * sx * cy,
                -0.25 * PI * PI * cx * sy,
                -0.25 * PI * PI * cx * sy,
                -0.125 * PI * PI * sx * cy,
            ],
        );
        PointState::new(w(x), grad, Some(hess)).unwrap()
    };
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = Grid::unit(2, n).unwrap();
            let u = ScalarField::from_fn(g, |x| w(x).exp()).unwrap();
            let bc = BoundaryCondition::dirichlet_fn(&g, |x| w(x).exp()).unwrap();
            let div = grid::divergence(&grid::face_flux(&u, &bc, &p).unwrap());
            interior_error(&div, |x| operators::div_flux(&PointState::exp_of(&state(x)).unwrap(), &p).unwrap())
        })
        .collect();
    assert!(observed_order(&errors) >= 1.9, "{errors:?}");
}

#[test]
fn two_cell_mass_and_entropy() {
    let g = Grid::new_1d(2, (0.0, 1.0)).unwrap();
    let f = ScalarField::new(g, vec![2.0, 4.0]).unwrap();
    assert_eq!(grid::mass(&f), 3.0);
    let e = ScalarField::constant(Grid::unit(2, 4).unwrap(), std::f64::consts::E).unwrap();
    assert!((grid::entropy(&e).unwrap() - std::f64::consts::E).abs() < 1e-14);
}

#[test]
fn flux_balance_matches_divergence_sum() {
    let g = Grid::unit(2, 40).unwrap();
    let p = ModelParams::default();
    let u = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (3.0 * x[0]).sin() * x[1]).unwrap();
    let centre = [0.45, 0.55];
    let r = 0.25;
    let balance = grid::flux_balance_sphere(&u, &centre, r, &p).unwrap();
    let div = grid::divergence(&grid::face_flux(&u, &BoundaryCondition::NoFlux, &p).unwrap());
    let sum: f64 = grid::ball_cells(&g, &centre, r)
        .unwrap()
        .iter()
        .map(|&i| div.values()[i] * g.cell_volume())
        .sum();
    assert!((balance - sum).abs() <= 1e-13);
    assert!(grid::flux_balance_sphere(&u, &[0.1, 0.5], 0.25, &p).is_err());
}
