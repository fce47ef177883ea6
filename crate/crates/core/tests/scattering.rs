mod common;

use std::f64::consts::PI;

use localclock::clock::{evolve_split_operator, Method, PropagatorConfig};
use localclock::grid::{Grid, Representation, WaveFunction};
use localclock::nbody::{densify_grid, GridHamiltonian, HamiltonianOperator, Potential};
use localclock::scattering::{
    energy_mismatch, escape_norm, geometric_times, is_decreasing, local_time_calibration, velocity_mismatch,
    TestFunction,
};
use localclock::spectral::diagonalize;
use localclock::Error;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn escape_norm_examples() {
    let grid = Grid::new(1, 1024, 100.0).unwrap();
    let centered = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[0.0]).unwrap();
    assert!((escape_norm(&centered, 10.0).unwrap() - 1.0).abs() < 1e-12);
    let far = WaveFunction::gaussian(&grid, &[30.0], 1.0, &[0.0]).unwrap();
    assert!(escape_norm(&far, 10.0).unwrap() < 1e-12);
    assert!(matches!(escape_norm(&far, 60.0), Err(Error::RadiusOutOfRange { .. })));
    assert!(escape_norm(&far.to_momentum(), 5.0).is_err());
}

#[test]
fn test_function_below_the_spectrum_sees_nothing() {
    let grid = Grid::new(1, 128, 30.0).unwrap();
    let gh = GridHamiltonian::single(&grid, 1.0, Potential::GaussianWell { depth: 1.0, width: 1.0 }).unwrap();
    let sd = diagonalize(&densify_grid(&gh).unwrap()).unwrap();
    let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[1.0]).unwrap();
    let below = TestFunction::new(sd.eigenvalues()[0] - 5.0, 1.0).unwrap();
    assert_eq!(energy_mismatch(&psi, &below, &sd, gh.kinetic()).unwrap(), 0.0);

    let phi = TestFunction::around_kinetic_energy(&psi, gh.kinetic()).unwrap();
    // ⟨p²⟩/2 = (k² + 1/(4σ²))/2
    assert!((phi.center - 0.625).abs() < 1e-8, "{}", phi.center);
    assert!(energy_mismatch(&psi, &phi, &sd, gh.kinetic()).unwrap() > 1e-3);
    assert_eq!(phi.eval(phi.center), 1.0);
    assert_eq!(phi.eval(phi.center + phi.half_width), 0.0);
    assert!(TestFunction::new(0.0, 0.0).is_err());
}

#[test]
fn plane_wave_velocity_mismatch_matches_the_lattice_sum() {
    let grid = Grid::new(1, 64, 16.0).unwrap();
    let k = 5.0 * 2.0 * PI / 16.0;
    let psi = WaveFunction::from_fn(&grid, |x| Complex64::from_polar(1.0, k * x[0])).unwrap();
    let (t, mu) = (3.0, 1.3);
    let amp2 = psi.amplitudes()[0].norm_sqr();
    let oracle: f64 =
        grid.positions().iter().map(|x| (x / t - k / mu).powi(2) * amp2 * grid.spacing()).sum::<f64>().sqrt();
    let got = velocity_mismatch(&psi, t, &[mu], None).unwrap();
    assert!((got - oracle).abs() < 1e-12 * oracle);
    assert!(matches!(velocity_mismatch(&psi, 0.0, &[mu], None), Err(Error::InvalidTime(_))));
    assert!(velocity_mismatch(&psi, 1.0, &[1.0, 1.0], None).is_err());
}

#[test]
fn calibration_needs_a_moving_packet() {
    let grid = Grid::new(1, 256, 40.0).unwrap();
    let gh = GridHamiltonian::single(&grid, 1.0, Potential::Harmonic { omega: 1.0 }).unwrap();
    let sd = diagonalize(&densify_grid(&gh).unwrap()).unwrap();
    let ground = WaveFunction::unnormalized(&grid, sd.eigenvector(0), Representation::Position).unwrap();
    let cfg = PropagatorConfig::new(Method::SplitOperator, 0.01, 1.0).recording_every(20);
    let traj = evolve_split_operator(&HamiltonianOperator::from(gh), &ground, &cfg).unwrap();
    assert!(matches!(local_time_calibration(&traj, 1.0, 0, 0.0), Err(Error::MomentumCrossesZero { .. })));
}

#[test]
fn geometric_grids() {
    let t = geometric_times(1.0, 16.0, 5, 1.0).unwrap();
    for (a, b) in t.iter().zip([1.0, 2.0, 4.0, 8.0, 16.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let back = geometric_times(1.0, 16.0, 5, -1.0).unwrap();
    assert!(back.iter().zip(&t).all(|(a, b)| *a == -b));
    assert!(geometric_times(0.0, 1.0, 5, 1.0).is_err());
    assert!(is_decreasing(&[3.0, 2.0, 1.0]) && !is_decreasing(&[3.0, 3.0]) && is_decreasing(&[0.0, 0.0]));
}

fn shifted(psi: &WaveFunction, by: usize) -> WaveFunction {
    let mut amps = psi.amplitudes().to_vec();
    amps.rotate_right(by);
    WaveFunction::unnormalized(psi.grid(), amps, Representation::Position).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn velocity_mismatch_is_translation_invariant(steps in 0usize..40, k in -2.0..2.0f64, t in 0.5..20.0f64) {
        let grid = Grid::new(1, 256, 64.0).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[-5.0], 1.0, &[k]).unwrap();
        let moved = shifted(&psi, steps);
        let offset = steps as f64 * grid.spacing();
        let a = velocity_mismatch(&psi, t, &[1.0], None).unwrap();
        let b = velocity_mismatch(&moved, t, &[1.0], Some(&[offset])).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.max(1.0));
    }

    #[test]
    fn time_mirror(center in -4.0..4.0f64, k in -2.0..2.0f64, t in 0.5..20.0f64) {
        let grid = Grid::new(1, 256, 64.0).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[center], 1.3, &[k]).unwrap();
        let conj: Vec<Complex64> = psi.amplitudes().iter().map(|z| z.conj()).collect();
        let mirror = WaveFunction::unnormalized(&grid, conj, Representation::Position).unwrap();
        let a = velocity_mismatch(&psi, t, &[0.7], None).unwrap();
        let b = velocity_mismatch(&mirror, -t, &[0.7], None).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn escape_norm_is_monotone_in_radius(center in -10.0..10.0f64, r1 in 0.5..20.0f64, r2 in 0.5..20.0f64) {
        let grid = Grid::new(1, 256, 64.0).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[center], 2.0, &[0.0]).unwrap();
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let (a, b) = (escape_norm(&psi, lo).unwrap(), escape_norm(&psi, hi).unwrap());
        prop_assert!(a <= b && b <= 1.0 + 1e-12);
    }
}
