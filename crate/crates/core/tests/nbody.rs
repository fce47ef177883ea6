mod common;

use localclock::grid::Grid;
use localclock::linalg::hermiticity_defect;
use localclock::nbody::{
    assemble_relative_hamiltonian, com_separation_check, com_separation_check_in_frame, densify_grid, jacobi_frame,
    GridHamiltonian, ParticleSystem, Potential,
};
use localclock::spectral::diagonalize;
use proptest::prelude::*;

#[test]
fn frame_examples() {
    let f = jacobi_frame(&[1.0, 1.0]).unwrap();
    assert_eq!(f.reduced_masses(), &[0.5]);
    let y = f.to_jacobi(&[0.3, 1.1]);
    assert!((y[0] - 0.7).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);

    let f = jacobi_frame(&[1.0, 1.0, 1.0]).unwrap();
    assert!((f.reduced_masses()[0] - 0.5).abs() < 1e-15);
    assert!((f.reduced_masses()[1] - 2.0 / 3.0).abs() < 1e-15);

    let f = jacobi_frame(&[1.0, 2.0]).unwrap();
    assert!((f.reduced_masses()[0] - 2.0 / 3.0).abs() < 1e-15);

    assert!(jacobi_frame(&[1.0]).is_err());
    assert!(jacobi_frame(&[1.0, 0.0]).is_err());
}

#[test]
fn free_pair_ground_state_is_the_constant_mode() {
    let grid = Grid::new(1, 64, 20.0).unwrap();
    let system = ParticleSystem::new(vec![1.0, 3.0], 1).unwrap();
    let frame = jacobi_frame(system.masses()).unwrap();
    let h = assemble_relative_hamiltonian(&frame, &grid, &system).unwrap();
    assert!(h.is_free());
    let sd = diagonalize(&densify_grid(&h).unwrap()).unwrap();
    assert!(sd.eigenvalues()[0].abs() < 1e-10);
    let v = sd.eigenvector(0);
    let first = v[0].norm();
    assert!(v.iter().all(|z| (z.norm() - first).abs() < 1e-8));
}

#[test]
fn harmonic_pair_ground_energy() {
    // masses (2, 2) give μ = 1
    let grid = Grid::new(1, 256, 30.0).unwrap();
    let system =
        ParticleSystem::new(vec![2.0, 2.0], 1).unwrap().with_pair(0, 1, Potential::Harmonic { omega: 1.0 }).unwrap();
    let frame = jacobi_frame(system.masses()).unwrap();
    let h = assemble_relative_hamiltonian(&frame, &grid, &system).unwrap();
    let sd = diagonalize(&densify_grid(&h).unwrap()).unwrap();
    let e = sd.eigenvalues();
    assert!((e[0] - 0.5).abs() < 1e-8, "{}", e[0]);
    for j in 0..4 {
        assert!((e[j + 1] - e[j] - 1.0).abs() < 1e-8);
    }
}

#[test]
fn three_body_wells_are_hermitian() {
    let grid = Grid::new(2, 32, 20.0).unwrap();
    let well = Potential::GaussianWell { depth: 1.0, width: 1.0 };
    let system = ParticleSystem::new(vec![1.0, 1.0, 1.0], 1)
        .unwrap()
        .with_pair(0, 1, well)
        .unwrap()
        .with_pair(0, 2, well)
        .unwrap()
        .with_pair(1, 2, well)
        .unwrap();
    let frame = jacobi_frame(system.masses()).unwrap();
    let h = assemble_relative_hamiltonian(&frame, &grid, &system).unwrap();
    assert!(hermiticity_defect(&h, 8, 3) < 1e-10);
    assert!(ParticleSystem::new(vec![1.0, 1.0], 1).unwrap().with_pair(0, 2, well).is_err());
}

#[test]
fn separation_examples() {
    let grid = Grid::new(1, 16, 12.0).unwrap();
    let free = ParticleSystem::new(vec![1.0, 1.0], 1).unwrap();
    let report = com_separation_check(&free, &grid).unwrap();
    assert!(report.matches && report.max_deviation < 1e-10);

    let harmonic = free.clone().with_pair(0, 1, Potential::Harmonic { omega: 1.0 }).unwrap();
    let report = com_separation_check(&harmonic, &grid).unwrap();
    assert!(report.matches && report.max_deviation < 1e-8);

    let wrong = jacobi_frame(&[1.0, 3.0]).unwrap();
    let skewed = ParticleSystem::new(vec![1.0, 1.0], 1).unwrap();
    assert!(!com_separation_check_in_frame(&skewed, &grid, &wrong).unwrap().matches);

    let big = Grid::new(1, 128, 12.0).unwrap();
    assert!(com_separation_check(&harmonic, &big).is_err());
}

#[test]
fn single_particle_shorthand_matches_assembly() {
    let grid = Grid::new(1, 64, 20.0).unwrap();
    let well = Potential::GaussianWell { depth: 2.0, width: 1.0 };
    let single = GridHamiltonian::single(&grid, 1.0, well).unwrap();
    let system = ParticleSystem::new(vec![2.0, 2.0], 1).unwrap().with_pair(0, 1, well).unwrap();
    let frame = jacobi_frame(system.masses()).unwrap();
    let pair = assemble_relative_hamiltonian(&frame, &grid, &system).unwrap();
    let a = densify_grid(&single).unwrap();
    let b = densify_grid(&pair).unwrap();
    for i in 0..64 {
        for j in 0..64 {
            assert!((a.entry(i, j) - b.entry(i, j)).norm() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn reduced_mass_recursion(masses in prop::collection::vec(0.1..10.0f64, 2..=8)) {
        let f = jacobi_frame(&masses).unwrap();
        let mut partial = 0.0;
        for i in 0..masses.len() - 1 {
            partial += masses[i];
            let expected = 1.0 / masses[i + 1] + 1.0 / partial;
            prop_assert!((1.0 / f.reduced_masses()[i] - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn transform_round_trip(masses in prop::collection::vec(0.1..10.0f64, 2..=8), seed in any::<u64>()) {
        let f = jacobi_frame(&masses).unwrap();
        let r: Vec<f64> = (0..masses.len()).map(|i| ((seed >> (i % 60)) as f64 % 7.0) - 3.0 + 0.1 * i as f64).collect();
        let back = f.to_particles(&f.to_jacobi(&r));
        for (a, b) in back.iter().zip(&r) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kinetic_form_is_preserved(
        masses in prop::collection::vec(0.1..10.0f64, 2..=8),
        raw in prop::collection::vec(-5.0..5.0f64, 8),
    ) {
        let f = jacobi_frame(&masses).unwrap();
        let p = &raw[..masses.len()];
        let lhs: f64 = p.iter().zip(&masses).map(|(p, m)| p * p / (2.0 * m)).sum();
        let q = f.momenta_to_jacobi(p);
        let rhs = q[0] * q[0] / (2.0 * f.total_mass())
            + q[1..].iter().zip(f.reduced_masses()).map(|(p, mu)| p * p / (2.0 * mu)).sum::<f64>();
        prop_assert!((lhs - rhs).abs() < 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn assembled_operators_are_hermitian(depth in 0.1..5.0f64, width in 0.3..3.0f64, m1 in 0.5..4.0f64, m2 in 0.5..4.0f64) {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let system = ParticleSystem::new(vec![m1, m2], 1)
            .unwrap()
            .with_pair(0, 1, Potential::GaussianWell { depth, width })
            .unwrap();
        let frame = jacobi_frame(system.masses()).unwrap();
        let h = assemble_relative_hamiltonian(&frame, &grid, &system).unwrap();
        prop_assert!(hermiticity_defect(&h, 4, 1) < 1e-10);
    }
}
