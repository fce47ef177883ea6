mod common;

use common::c;
use localclock::grid::{Grid, WaveFunction};
use localclock::linalg::DenseHermitian;
use localclock::nbody::{GridHamiltonian, HamiltonianOperator, Potential};
use localclock::resolvent::{
    boundary_density, density_scan, equivalence_report, fourier_laplace_resolvent, maximal_step, minimal_horizon,
    resolvent_apply, shifted_residual, stone_density, Branch, EquivalenceSettings, Solver,
};
use localclock::spectral::{diagonalize, TimeReversed};
use localclock::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn dense(levels: &[f64]) -> HamiltonianOperator {
    HamiltonianOperator::from(DenseHermitian::diagonal(levels))
}

#[test]
fn diagonal_examples() {
    let h = dense(&[1.0, 2.0]);
    let z = c(0.0, 1.0);
    let psi = [c(1.0, 0.0), c(1.0, 0.0)];
    let out = resolvent_apply(&h, z, &psi, Solver::DirectDense).unwrap();
    assert!((out[0] - c(0.5, 0.5)).norm() < 1e-15);
    assert!((out[1] - c(0.4, 0.2)).norm() < 1e-15);
    assert!(resolvent_apply(&h, c(1.0, 0.0), &psi, Solver::DirectDense).is_err());
}

#[test]
fn random_matrix_resolvent_solves_the_shifted_system() {
    let m = DenseHermitian::random(64, 9);
    let h = HamiltonianOperator::from(m.clone());
    let z = c(2.0, 0.1);
    let psi: Vec<Complex64> = (0..64).map(|i| c((i as f64).sin(), 1.0 / (1.0 + i as f64))).collect();
    let phi = resolvent_apply(&h, z, &psi, Solver::DirectDense).unwrap();
    assert!(shifted_residual(&m, z, &phi, &psi) < 1e-12 * common::norm(&psi));
    let sd = diagonalize(&m).unwrap();
    let oracle = common::diagonal_resolvent(sd.eigenvalues(), z, &sd.coefficients(&psi));
    let eig = sd.synthesize(&oracle);
    assert!(common::distance(&phi, &eig) < 1e-10 * common::norm(&eig));
}

#[test]
fn free_grid_solvers_agree() {
    let grid = Grid::new(1, 128, 30.0).unwrap();
    let free = HamiltonianOperator::from(GridHamiltonian::single(&grid, 1.0, Potential::None).unwrap());
    let well = HamiltonianOperator::from(
        GridHamiltonian::single(&grid, 1.0, Potential::GaussianWell { depth: 1.0, width: 1.0 }).unwrap(),
    );
    let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[1.0]).unwrap();
    for h in [&free, &well] {
        let z = c(0.8, 0.2);
        let a = resolvent_apply(h, z, psi.amplitudes(), Solver::DirectDense).unwrap();
        let b = resolvent_apply(h, z, psi.amplitudes(), Solver::ShiftedGrid).unwrap();
        assert!(common::distance(&a, &b) < 1e-8 * common::norm(&a));
    }
}

#[test]
fn stone_scan_of_two_levels() {
    let levels = [-1.0, 1.0];
    let h = dense(&levels);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [c(s, 0.0), c(0.0, s)];
    let epsilon = 0.05;
    for lambda in [-1.0, 0.0, 0.4] {
        let v = stone_density(&h, lambda, epsilon, &psi, Solver::DirectDense).unwrap();
        let oracle = common::lorentzian_sum(&levels, &[0.5, 0.5], lambda, epsilon);
        assert!((v - oracle).abs() < 1e-12 * oracle.max(1.0));
    }

    let integral = |eps: f64| {
        let step = eps / 2.0;
        let lambdas: Vec<f64> = (0..=(80.0 / step) as usize).map(|i| -40.0 + i as f64 * step).collect();
        density_scan(&h, &lambdas, eps, &psi, Solver::DirectDense).unwrap()
    };
    let (coarse, fine) = (integral(0.1), integral(0.05));
    assert!(coarse.warning.is_none() && fine.warning.is_none());
    assert!((coarse.integral - fine.integral).abs() < 0.01 * coarse.integral);

    let few: Vec<f64> = (0..10).map(|i| i as f64).collect();
    assert!(matches!(density_scan(&h, &few, 0.1, &psi, Solver::DirectDense), Err(Error::StepTooCoarse { .. })));
    let narrow: Vec<f64> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect();
    assert!(density_scan(&h, &narrow, 0.1, &psi, Solver::DirectDense).unwrap().warning.is_some());
}

#[test]
fn boundary_value_of_a_smooth_density() {
    // on an absolutely continuous measure the Richardson value beats the raw one
    let grid = Grid::new(1, 512, 200.0).unwrap();
    let h = HamiltonianOperator::from(GridHamiltonian::single(&grid, 1.0, Potential::None).unwrap());
    let psi = WaveFunction::gaussian(&grid, &[0.0], 2.0, &[1.5]).unwrap();
    let b = boundary_density(&h, 1.0, 0.02, psi.amplitudes(), Solver::ShiftedGrid).unwrap();
    let spread = (b.samples[2] - b.samples[0]).abs();
    assert!((b.extrapolated - b.samples[0]).abs() < spread);
}

#[test]
fn fourier_laplace_checks_and_branches() {
    let sd = diagonalize(&DenseHermitian::diagonal(&[0.5])).unwrap();
    let psi = [c(1.0, 0.0)];
    for z in [c(0.0, 1.0), c(1.0, -0.5)] {
        let t = 1.5 * minimal_horizon(z);
        let dt = 0.1 * maximal_step(z, 0.5);
        let out = fourier_laplace_resolvent(&sd, z, &psi, t, dt, None).unwrap();
        let oracle = c(1.0, 0.0) / (0.5 - z);
        assert!((out[0] - oracle).norm() < 1e-3 * oracle.norm(), "{z}: {} vs {oracle}", out[0]);
    }
    let z = c(0.0, 1.0);
    assert!(matches!(
        fourier_laplace_resolvent(&sd, z, &psi, 30.0, 0.01, Some(Branch::Lower)),
        Err(Error::BranchMismatch(_))
    ));
    assert!(matches!(fourier_laplace_resolvent(&sd, z, &psi, 5.0, 0.01, None), Err(Error::TruncationTooShort { .. })));
    assert!(matches!(fourier_laplace_resolvent(&sd, z, &psi, 30.0, 1.0, None), Err(Error::StepTooCoarse { .. })));
    assert!(matches!(fourier_laplace_resolvent(&sd, c(1.0, 0.0), &psi, 30.0, 0.01, None), Err(Error::RealShift)));
}

#[test]
fn equivalence_report_passes_and_catches_a_reversed_clock() {
    let h = dense(&[0.0, 1.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut settings = EquivalenceSettings::new(vec![vec![c(s, 0.0), c(s, 0.0)]], vec![0.0, 1.0]);
    settings.horizon = 400.0;
    let report = equivalence_report(&h, None, &settings).unwrap();
    assert!(report.passed, "{}", report.to_json());

    let sd = diagonalize(&DenseHermitian::diagonal(&[0.0, 1.0])).unwrap();
    let reversed = TimeReversed(&sd);
    let report = equivalence_report(&h, Some(&reversed), &settings).unwrap();
    assert!(!report.passed);
    assert!(report.failures().contains(&report.fourier_laplace.name.as_str()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn first_resolvent_identity(seed in 0u64..500, a in -3.0..3.0f64, b in 0.1..2.0f64, d in -3.0..3.0f64, e in 0.1..2.0f64) {
        let m = DenseHermitian::random(12, seed);
        let h = HamiltonianOperator::from(m);
        let (z, w) = (c(a, b), c(d, -e));
        let psi: Vec<Complex64> = (0..12).map(|i| c(1.0, i as f64 * 0.1)).collect();
        let rz = resolvent_apply(&h, z, &psi, Solver::DirectDense).unwrap();
        let rw = resolvent_apply(&h, w, &psi, Solver::DirectDense).unwrap();
        let rzrw = resolvent_apply(&h, z, &rw, Solver::DirectDense).unwrap();
        let lhs: Vec<Complex64> = rz.iter().zip(&rw).map(|(x, y)| x - y).collect();
        let rhs: Vec<Complex64> = rzrw.iter().map(|x| (z - w) * x).collect();
        prop_assert!(common::distance(&lhs, &rhs) < 1e-9 * (1.0 + common::norm(&lhs)));
    }

    #[test]
    fn conjugate_symmetry(seed in 0u64..500, a in -3.0..3.0f64, b in 0.05..2.0f64) {
        let h = HamiltonianOperator::from(DenseHermitian::random(10, seed));
        let u: Vec<Complex64> = (0..10).map(|i| c((i as f64).cos(), 0.3)).collect();
        let v: Vec<Complex64> = (0..10).map(|i| c(0.2, (i as f64).sin())).collect();
        let z = c(a, b);
        let lhs: Complex64 = u.iter().zip(resolvent_apply(&h, z, &v, Solver::DirectDense).unwrap()).map(|(x, y)| x.conj() * y).sum();
        let rhs: Complex64 = v.iter().zip(resolvent_apply(&h, z.conj(), &u, Solver::DirectDense).unwrap()).map(|(x, y)| x.conj() * y).sum();
        prop_assert!((lhs - rhs.conj()).norm() < 1e-9 * (1.0 + lhs.norm()));
    }

    #[test]
    fn stone_density_is_nonnegative(seed in 0u64..500, lambda in -5.0..5.0f64, eps in 0.01..1.0f64) {
        let h = HamiltonianOperator::from(DenseHermitian::random(8, seed));
        let psi: Vec<Complex64> = (0..8).map(|i| c(1.0, -(i as f64))).collect();
        prop_assert!(stone_density(&h, lambda, eps, &psi, Solver::DirectDense).unwrap() >= -1e-12);
    }
}
