//! Closed-form oracles and small helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::time::{Duration, Instant};

use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Free Gaussian packet on the line, normalized to one:
/// `ψ(x,0) ∝ exp(-(x-x₀)²/(4σ²) + ik₀(x-x₀))` evolved under `p²/(2μ)`.
pub fn free_gaussian(x: f64, t: f64, x0: f64, sigma: f64, k0: f64, mass: f64) -> Complex64 {
    let beta = t / (2.0 * mass * sigma * sigma);
    let denom = c(1.0, beta);
    let y = x - x0;
    let exponent = c(-y * y / (4.0 * sigma * sigma), k0 * y - k0 * k0 * t / (2.0 * mass)) / denom;
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    exponent.exp() * norm / denom.sqrt()
}

/// [`free_gaussian`] summed over the periodic images `x + mL`, `|m| ≤ 2`.
pub fn free_gaussian_periodic(x: f64, t: f64, x0: f64, sigma: f64, k0: f64, mass: f64, extent: f64) -> Complex64 {
    (-2..=2).map(|m| free_gaussian(x + m as f64 * extent, t, x0, sigma, k0, mass)).sum()
}

/// `‖(x/t - p/μ)ψ_t‖` for a free packet: `x/t - p/μ = x₀/t` pulled back to
/// time zero, so the value is `sqrt(σ² + x₀²)/|t|`.
pub fn free_velocity_mismatch(sigma: f64, x0: f64, t: f64) -> f64 {
    (sigma * sigma + x0 * x0).sqrt() / t.abs()
}

/// d'Alembert solution with zero initial velocity, `½(f(x-ct) + f(x+ct))`,
/// summed over periodic images.
pub fn dalembert(f: impl Fn(f64) -> f64, x: f64, t: f64, speed: f64, extent: f64) -> f64 {
    (-2..=2)
        .map(|m| {
            let y = x + m as f64 * extent;
            0.5 * (f(y - speed * t) + f(y + speed * t))
        })
        .sum()
}

/// `(1/π) Σ_j w_j ε/((λ-λ_j)² + ε²)`.
pub fn lorentzian_sum(levels: &[f64], weights: &[f64], lambda: f64, epsilon: f64) -> f64 {
    levels
        .iter()
        .zip(weights)
        .map(|(l, w)| w * epsilon / ((lambda - l) * (lambda - l) + epsilon * epsilon))
        .sum::<f64>()
        / PI
}

/// `(diag(levels) - z)⁻¹ ψ`.
pub fn diagonal_resolvent(levels: &[f64], z: Complex64, psi: &[Complex64]) -> Vec<Complex64> {
    levels.iter().zip(psi).map(|(l, p)| p / (c(*l, 0.0) - z)).collect()
}

pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Named sub-checks of one criterion.
#[derive(Default)]
pub struct Checks {
    items: Vec<(String, bool)>,
}

impl Checks {
    pub fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.items.push((detail.into(), ok));
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|(_, ok)| *ok)
    }

    fn summary(&self) -> String {
        let mut out = String::new();
        for (i, (detail, ok)) in self.items.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            let _ = write!(out, "{}{}", if *ok { "" } else { "FAILED " }, detail);
        }
        out
    }
}

/// Runs one acceptance criterion, prints a single PASS/FAIL line to the real
/// stdout (bypassing the test harness capture) and panics on failure.
pub fn criterion(id: u32, title: &str, budget: Duration, body: impl FnOnce(&mut Checks)) {
    let start = Instant::now();
    let mut checks = Checks::default();
    body(&mut checks);
    let elapsed = start.elapsed();
    checks.check(elapsed < budget, format!("runtime {:.2}s < {}s", elapsed.as_secs_f64(), budget.as_secs()));
    let verdict = if checks.passed() { "PASS" } else { "FAIL" };
    let line = format!("criterion {id:2} {verdict} {title}: {}", checks.summary());
    let _ = writeln!(std::io::stdout().lock(), "{line}");
    assert!(checks.passed(), "{line}");
}
