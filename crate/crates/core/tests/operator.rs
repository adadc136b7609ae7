use approx::assert_relative_eq;
use jkoflow::grid::{ConstraintOperator, Field, Grid, State};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Dense `A` built column by column from the matrix-free operator.
fn dense_a(op: &ConstraintOperator) -> DMatrix<f64> {
    let g = *op.grid();
    let (rows, cols) = (g.len(), g.state_len());
    let mut a = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut e = vec![0.0; cols];
        e[j] = 1.0;
        let n = g.len();
        let block = |k: usize| Field::new(g, e[k * n..(k + 1) * n].to_vec()).unwrap();
        let u = State::new(block(0), block(1), g.is_2d().then(|| block(2))).unwrap();
        let col = op.apply(&u).unwrap();
        for (i, v) in col.values().iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    a
}

fn grids() -> Vec<Grid> {
    vec![
        Grid::new_1d(9, 0.0, 1.0).unwrap(),
        Grid::new_1d(40, -2.0, 2.0).unwrap(),
        Grid::new_2d(5, 4, (0.0, 1.0), (0.0, 0.5)).unwrap(),
        Grid::new_2d(8, 8, (-1.0, 1.0), (0.0, 2.0)).unwrap(),
    ]
}

#[test]
fn adjoint_is_the_dense_transpose() {
    for g in grids() {
        let op = ConstraintOperator::with_diffusion(g, 0.2).unwrap();
        let a = dense_a(&op);
        let phi: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let at = op.adjoint(&Field::new(g, phi.clone()).unwrap()).unwrap();
        let dense = a.transpose() * DVector::from_vec(phi);
        for (x, y) in at.as_slice().iter().zip(dense.iter()) {
            assert_relative_eq!(*x, *y, epsilon = 1e-12, max_relative = 1e-13);
        }
    }
}

#[test]
fn lambda_max_matches_dense_eigenvalues() {
    for g in grids() {
        let op = ConstraintOperator::new(g);
        let a = dense_a(&op);
        let eig = (&a * a.transpose()).symmetric_eigen().eigenvalues;
        let est = op.lambda_max();
        assert!(est.converged);
        assert_relative_eq!(est.value, eig.max(), max_relative = 1e-5);

        let mut spectrum = op.spectrum();
        let mut dense: Vec<f64> = eig.iter().copied().collect();
        spectrum.sort_by(|x, y| x.partial_cmp(y).unwrap());
        dense.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (s, d) in spectrum.iter().zip(&dense) {
            assert_relative_eq!(*s, *d, max_relative = 1e-9, epsilon = 1e-9);
        }
    }
}

#[test]
fn spd_solve_matches_dense_lu() {
    for g in grids() {
        let op = ConstraintOperator::new(g);
        let a = dense_a(&op);
        let scale = 0.7;
        let m = (&a * a.transpose()) * scale;
        let rhs: Vec<f64> = (0..g.len()).map(|k| 1.0 + (k as f64).cos()).collect();
        let x = op.solve_aat(&Field::new(g, rhs.clone()).unwrap(), scale).unwrap();
        let dense = m.lu().solve(&DVector::from_vec(rhs)).unwrap();
        let norm = dense.norm();
        let err = (DVector::from_column_slice(x.values()) - dense).norm();
        assert!(err <= 1e-8 * norm, "relative error {}", err / norm);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_products_agree(
        nx in 2usize..12,
        ny in 1usize..10,
        diffusion in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let g = if ny == 1 {
            Grid::new_1d(nx, 0.0, 1.0).unwrap()
        } else {
            Grid::new_2d(nx, ny, (0.0, 1.0), (0.0, 0.8)).unwrap()
        };
        let op = ConstraintOperator::with_diffusion(g, diffusion).unwrap();
        let wave = |k: usize, s: f64| ((k as f64 + 1.0) * s + seed as f64).sin();
        let n = g.len();
        let field = |s: f64| Field::new(g, (0..n).map(|k| wave(k, s)).collect()).unwrap();
        let u = State::new(field(0.3), field(0.7), g.is_2d().then(|| field(1.1))).unwrap();
        let phi = field(1.9);
        let au = op.apply(&u).unwrap();
        let atphi = op.adjoint(&phi).unwrap();
        let lhs: f64 = au.values().iter().zip(phi.values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.as_slice().iter().zip(atphi.as_slice()).map(|(a, b)| a * b).sum();
        let scale = au.values().iter().map(|v| v * v).sum::<f64>().sqrt()
            * phi.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }
}
