mod common;

use std::f64::consts::PI;

use common::c;
use localclock::grid::{apply_momentum, apply_position, FourierMultiplier, Grid, Representation, WaveFunction};
use num_complex::Complex64;
use proptest::prelude::*;

fn plane_wave(grid: &Grid, k: f64) -> WaveFunction {
    WaveFunction::from_fn(grid, |x| Complex64::from_polar(1.0, k * x[0])).unwrap()
}

#[test]
fn lattice_of_eight() {
    let g = Grid::new(1, 8, 8.0).unwrap();
    assert_eq!(g.spacing(), 1.0);
    let dk = 2.0 * PI / 8.0;
    let expected = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0].map(|m| m * dk);
    assert_eq!(g.kvalues(), &expected);
    let sum: f64 = g.kvalues().iter().sum();
    assert!((sum + 4.0 * dk).abs() < 1e-14);
    assert!(Grid::new(1, 7, 8.0).is_err());
    assert!(Grid::new(1, 8, 0.0).is_err());
    assert!(Grid::new(3, 256, 1.0).is_err());
}

#[test]
fn position_examples() {
    let g = Grid::new(1, 64, 16.0).unwrap();
    let constant = WaveFunction::from_fn(&g, |_| c(1.0, 0.0)).unwrap();
    let x = apply_position(&constant, 0).unwrap();
    let mean: Complex64 = x.amplitudes().iter().sum();
    // the lattice [-L/2, L/2) has one unpaired point at -L/2
    assert!((mean.re / constant.amplitudes()[0].re + 8.0).abs() < 1e-12);

    let gauss = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.0]).unwrap();
    assert!(gauss.mean_position(0).unwrap().abs() < 1e-12);

    let j = g.positions().iter().position(|&x| x == 2.0).unwrap();
    let mut amps = vec![c(0.0, 0.0); g.len()];
    amps[j] = c(1.0, 0.0);
    let delta = WaveFunction::new(&g, amps, Representation::Position).unwrap();
    let out = apply_position(&delta, 0).unwrap();
    for (i, v) in out.amplitudes().iter().enumerate() {
        let expected = if i == j { 2.0 * delta.amplitudes()[j] } else { c(0.0, 0.0) };
        assert!((v - expected).norm() < 1e-12);
    }
}

#[test]
fn momentum_examples() {
    let g = Grid::new(1, 64, 16.0).unwrap();
    let k = 3.0 * 2.0 * PI / 16.0;
    let psi = plane_wave(&g, k);
    let p = apply_momentum(&psi, 0).unwrap();
    for (a, b) in p.amplitudes().iter().zip(psi.amplitudes()) {
        assert!((a - k * b).norm() < 1e-12);
    }
    let flat = WaveFunction::from_fn(&g, |_| c(1.0, 0.0)).unwrap();
    assert!(apply_momentum(&flat, 0).unwrap().amplitudes().iter().all(|v| v.norm() < 1e-12));
    assert!(apply_momentum(&flat.to_momentum(), 0).is_err());
}

/// `(1/i) dψ/dx` by centered differences, compared with the spectral derivative.
fn finite_difference_error(n: usize) -> f64 {
    let g = Grid::new(1, n, 20.0).unwrap();
    let psi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[1.0]).unwrap();
    let p = apply_momentum(&psi, 0).unwrap();
    let a = psi.amplitudes();
    let h = g.spacing();
    (0..n)
        .map(|i| {
            let fd = (a[(i + 1) % n] - a[(i + n - 1) % n]) / (2.0 * h) / c(0.0, 1.0);
            (fd - p.amplitudes()[i]).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn momentum_matches_finite_differences_under_refinement() {
    let coarse = finite_difference_error(128);
    let fine = finite_difference_error(256);
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn multiplier_examples() {
    let g = Grid::new(1, 128, 32.0).unwrap();
    let k0 = 3.0 * 2.0 * PI / 32.0;
    let psi = plane_wave(&g, k0);
    let identity = FourierMultiplier::new(&g, |_| 1.0).unwrap();
    let out = identity.apply(&psi).unwrap();
    assert!(common::distance(out.amplitudes(), psi.amplitudes()) < 1e-12 * common::norm(psi.amplitudes()));
    for (symbol, value) in [
        (FourierMultiplier::free(&g, 1.0).unwrap(), k0 * k0 / 2.0),
        (FourierMultiplier::half_laplacian(&g).unwrap(), k0),
    ] {
        let out = symbol.apply(&psi).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - value * b).norm() < 1e-12);
        }
    }
    let other = Grid::new(1, 64, 32.0).unwrap();
    assert!(FourierMultiplier::free(&other, 1.0).unwrap().apply(&psi).is_err());
}

#[test]
fn commutator_proxy_improves_under_refinement() {
    let defect = |n: usize| {
        let g = Grid::new(1, n, 40.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[0.0], 1.0, &[0.5]).unwrap();
        let xp = apply_position(&apply_momentum(&psi, 0).unwrap(), 0).unwrap();
        let px = apply_momentum(&apply_position(&psi, 0).unwrap(), 0).unwrap();
        let comm = psi.inner(&xp).unwrap() - psi.inner(&px).unwrap();
        (comm - c(0.0, 1.0)).norm()
    };
    let (coarse, mid, fine) = (defect(16), defect(32), defect(128));
    assert!(coarse > mid && fine < 1e-10, "{coarse:e} {mid:e} {fine:e}");
}

fn amplitudes(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(raw in amplitudes(64), extent in 1.0..100.0f64) {
        let g = Grid::new(1, 64, extent).unwrap();
        let amps: Vec<Complex64> = raw.iter().map(|&(a, b)| c(a, b)).collect();
        prop_assume!(common::norm(&amps) > 1e-3);
        let psi = WaveFunction::new(&g, amps, Representation::Position).unwrap();
        let hat = psi.to_momentum();
        prop_assert!((hat.norm() - psi.norm()).abs() < 1e-12);
        let back = hat.to_position();
        prop_assert!(common::distance(back.amplitudes(), psi.amplitudes()) < 1e-12 * common::norm(psi.amplitudes()));
    }

    #[test]
    fn composed_symbol_equals_composed_multipliers(raw in amplitudes(32), a in 0.1..3.0f64) {
        let g = Grid::new(1, 32, 10.0).unwrap();
        let amps: Vec<Complex64> = raw.iter().map(|&(x, y)| c(x, y)).collect();
        prop_assume!(common::norm(&amps) > 1e-3);
        let psi = WaveFunction::new(&g, amps, Representation::Position).unwrap();
        let inner = FourierMultiplier::free(&g, a).unwrap();
        let outer = FourierMultiplier::new(&g, |k| (-k[0] * k[0]).exp()).unwrap();
        let composed = inner.compose(|s| s.sin()).unwrap();
        let direct = composed.apply(&psi).unwrap();
        let sin_inner = FourierMultiplier::from_values(&g, inner.values().iter().map(|s| s.sin()).collect()).unwrap();
        let chained = sin_inner.apply(&psi).unwrap();
        prop_assert!(common::distance(direct.amplitudes(), chained.amplitudes()) < 1e-12 * common::norm(psi.amplitudes()));
        let ab = outer.apply(&inner.apply(&psi).unwrap()).unwrap();
        let product = FourierMultiplier::from_values(
            &g,
            inner.values().iter().zip(outer.values()).map(|(x, y)| x * y).collect(),
        ).unwrap();
        let joint = product.apply(&psi).unwrap();
        prop_assert!(common::distance(ab.amplitudes(), joint.amplitudes()) < 1e-12 * common::norm(psi.amplitudes()).max(1.0));
    }

    #[test]
    fn multipliers_are_self_adjoint(ra in amplitudes(32), rb in amplitudes(32)) {
        let g = Grid::new(1, 32, 10.0).unwrap();
        let a = WaveFunction::unnormalized(&g, ra.iter().map(|&(x, y)| c(x, y)).collect(), Representation::Position).unwrap();
        let b = WaveFunction::unnormalized(&g, rb.iter().map(|&(x, y)| c(x, y)).collect(), Representation::Position).unwrap();
        let m = FourierMultiplier::relativistic(&g, 1.0, 1.0).unwrap();
        let lhs = a.inner(&m.apply(&b).unwrap()).unwrap();
        let rhs = b.inner(&m.apply(&a).unwrap()).unwrap().conj();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn gaussian_is_normalized(center in -5.0..5.0f64, sigma in 0.5..3.0f64, k in -3.0..3.0f64) {
        let g = Grid::new(1, 512, 80.0).unwrap();
        let psi = WaveFunction::gaussian(&g, &[center], sigma, &[k]).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
        prop_assert!((psi.mean_position(0).unwrap() - center).abs() < 1e-8);
        prop_assert!((psi.mean_momentum(0).unwrap() - k).abs() < 1e-8);
    }
}
