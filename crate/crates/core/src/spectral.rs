//! Eigendecompositions of densified operators and everything built from them:
//! spectral projectors `E_H((a,b])`, eigenprojections `P(λ)`, the time-averaged
//! ergodic estimate of `P(λ)`, the bound/continuum proxy split, and eigenstate
//! beats.
//!
//! On a finite grid every spectrum is discrete. "Bound" here means an
//! eigenpair with energy below `-tol_E` whose eigenvector is localized
//! (`⟨|x|²⟩ < (L/4)²`); everything else stands in for the continuous subspace.

use std::f64::consts::PI;
use std::ops::Range;

use faer::{c64, Mat};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FourierMultiplier, Grid};
use crate::linalg::{self, DenseHermitian, LinearOperator};
use crate::nbody::PotentialTail;

/// Eigenvalues closer than this belong to one eigenspace.
pub const CLUSTER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenClass {
    Bound,
    ContinuumProxy,
}

impl EigenClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EigenClass::Bound => "bound",
            EigenClass::ContinuumProxy => "continuum",
        }
    }
}

/// Complete orthonormal eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<c64>,
}

pub fn diagonalize(h: &DenseHermitian) -> Result<SpectralData> {
    let (eigenvalues, eigenvectors) = h.eigen()?;
    Ok(SpectralData { eigenvalues, eigenvectors })
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvectors(&self) -> &Mat<c64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        self.eigenvectors.col(j).iter().copied().collect()
    }

    /// `max |λ|`, the bound used for time steps and quadrature rules.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coefficients `⟨v_j, ψ⟩`.
    pub fn coefficients(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|j| linalg::dot(self.eigenvectors.col(j).iter().copied().collect::<Vec<_>>().as_slice(), psi))
            .collect()
    }

    /// `Σ_j c_j v_j`.
    pub fn synthesize(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, c) in coefficients.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.eigenvectors.col(j).iter()) {
                *o += c * v;
            }
        }
        out
    }

    /// `max_j ‖H v_j - λ_j v_j‖`.
    pub fn max_residual(&self, h: &dyn LinearOperator) -> f64 {
        (0..self.dim())
            .map(|j| {
                let v = self.eigenvector(j);
                let hv = h.apply(&v);
                hv.iter().zip(&v).map(|(a, b)| (a - b * self.eigenvalues[j]).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |V†V - I|` entrywise.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Groups of eigenvalue indices whose consecutive gaps are at most
    /// [`CLUSTER_TOLERANCE`], with the mean eigenvalue of each group.
    pub fn clusters(&self) -> Vec<(f64, Range<usize>)> {
        let mut out = Vec::new();
        let mut start = 0;
        for j in 1..=self.dim() {
            if j == self.dim() || self.eigenvalues[j] - self.eigenvalues[j - 1] > CLUSTER_TOLERANCE {
                let mean = self.eigenvalues[start..j].iter().sum::<f64>() / (j - start) as f64;
                out.push((mean, start..j));
                start = j;
            }
        }
        out
    }

    fn projector_from(&self, indices: impl IntoIterator<Item = usize>) -> Projector {
        let idx: Vec<usize> = indices.into_iter().collect();
        let n = self.dim();
        Projector { dim: n, basis: Mat::from_fn(n, idx.len(), |i, c| self.eigenvectors[(i, idx[c])]) }
    }

    /// Eigenvalue weights `|⟨v_j, ψ⟩|²`.
    pub fn weights(&self, psi: &[Complex64]) -> Vec<f64> {
        self.coefficients(psi).iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Orthogonal projector given by an orthonormal spanning set.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    basis: Mat<c64>,
}

impl Projector {
    pub fn zero(dim: usize) -> Self {
        Self { dim, basis: Mat::zeros(dim, 0) }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &Mat<c64> {
        &self.basis
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for c in 0..self.rank() {
            let col = self.basis.col(c);
            let coef: Complex64 = col.iter().zip(v).map(|(b, x)| b.conj() * x).sum();
            for (o, b) in out.iter_mut().zip(col.iter()) {
                *o += coef * b;
            }
        }
        out
    }

    /// `B B†`.
    pub fn densify(&self) -> Mat<c64> {
        if self.rank() == 0 {
            return Mat::zeros(self.dim, self.dim);
        }
        &self.basis * self.basis.adjoint()
    }
}

impl LinearOperator for Projector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        Projector::apply(self, v)
    }
}

/// `E_H((a, b])`, built per eigenvalue cluster.
pub fn spectral_projector(sd: &SpectralData, a: f64, b: f64) -> Result<Projector> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let indices = sd.clusters().into_iter().filter(|(mean, _)| *mean > a && *mean <= b).flat_map(|(_, r)| r);
    Ok(sd.projector_from(indices))
}

/// `P(λ)`: projector onto the eigenspace at `λ`, rank 0 if `λ` is not an
/// eigenvalue.
pub fn eigen_projector(sd: &SpectralData, lambda: f64) -> Projector {
    let indices =
        sd.clusters().into_iter().filter(|(mean, _)| (mean - lambda).abs() <= CLUSTER_TOLERANCE).flat_map(|(_, r)| r);
    sd.projector_from(indices)
}

/// Something that can compute `f(H)ψ` for scalar functions `f`.
pub trait FunctionalCalculus {
    fn dim(&self) -> usize;
    fn apply_function(&self, f: &dyn Fn(f64) -> Complex64, psi: &[Complex64]) -> Vec<Complex64>;
}

impl FunctionalCalculus for SpectralData {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn apply_function(&self, f: &dyn Fn(f64) -> Complex64, psi: &[Complex64]) -> Vec<Complex64> {
        let coef: Vec<Complex64> =
            self.coefficients(psi).into_iter().zip(&self.eigenvalues).map(|(c, &l)| c * f(l)).collect();
        self.synthesize(&coef)
    }
}

impl FunctionalCalculus for FourierMultiplier {
    fn dim(&self) -> usize {
        self.grid().len()
    }

    fn apply_function(&self, f: &dyn Fn(f64) -> Complex64, psi: &[Complex64]) -> Vec<Complex64> {
        FourierMultiplier::apply_function(self, psi, f)
    }
}

/// Supplies `e^{-itH}ψ` for any real `t`, plus a bound on `|spec H|`.
pub trait Evolver {
    fn dim(&self) -> usize;
    fn evolve(&self, psi: &[Complex64], t: f64) -> Vec<Complex64>;
    /// Upper bound on `max |λ|` over the spectrum.
    fn spectral_bound(&self) -> f64;
}

impl Evolver for SpectralData {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn evolve(&self, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        self.apply_function(&|l| Complex64::from_polar(1.0, -l * t), psi)
    }

    fn spectral_bound(&self) -> f64 {
        self.spectral_radius()
    }
}

impl Evolver for FourierMultiplier {
    fn dim(&self) -> usize {
        self.grid().len()
    }

    fn evolve(&self, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        FourierMultiplier::apply_function(self, psi, |s| Complex64::from_polar(1.0, -s * t))
    }

    fn spectral_bound(&self) -> f64 {
        self.max_abs()
    }
}

/// Runs `t → -t` on an inner evolver. Used as a negative control.
pub struct TimeReversed<'a, E: Evolver + ?Sized>(pub &'a E);

impl<E: Evolver + ?Sized> Evolver for TimeReversed<'_, E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn evolve(&self, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        self.0.evolve(psi, -t)
    }

    fn spectral_bound(&self) -> f64 {
        self.0.spectral_bound()
    }
}

/// Time-averaged projector estimates for a set of probes.
#[derive(Debug, Clone)]
pub struct ErgodicEstimate {
    pub lambda: f64,
    pub horizon: f64,
    pub step: f64,
    /// `P̂(λ)ψ` for each probe, in probe order.
    pub images: Vec<Vec<Complex64>>,
}

/// Largest admissible trapezoid step for the ergodic average.
pub fn ergodic_step_limit(spread: f64) -> f64 {
    if spread > 0.0 {
        PI / (4.0 * spread)
    } else {
        f64::INFINITY
    }
}

/// `P̂(λ)ψ = (1/T) ∫₀^T e^{-itλ} e^{itH} ψ dt` by the composite trapezoid rule.
///
/// `spread` is `max(|λ|, spectral bound)`; the step defaults to
/// `π/(4·spread)` (shrunk so that it divides `T`) and an explicit `step` above
/// that limit is rejected.
pub fn ergodic_projector(
    evolver: &dyn Evolver,
    lambda: f64,
    horizon: f64,
    probes: &[Vec<Complex64>],
    step: Option<f64>,
) -> Result<ErgodicEstimate> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidTime(horizon));
    }
    let spread = evolver.spectral_bound().max(lambda.abs());
    let limit = ergodic_step_limit(spread);
    let requested = step.unwrap_or(limit.min(horizon));
    if requested > limit || !(requested > 0.0) {
        return Err(Error::StepTooCoarse { step: requested, limit });
    }
    let count = (horizon / requested).ceil().max(1.0) as usize;
    let h = horizon / count as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut images = Vec::with_capacity(probes.len());
    for probe in probes {
        if probe.len() != evolver.dim() {
            return Err(Error::DimensionMismatch { expected: evolver.dim(), got: probe.len() });
        }
        let mut acc = vec![zero; probe.len()];
        let mut state = probe.clone();
        for m in 0..=count {
            let t = m as f64 * h;
            let weight = if m == 0 || m == count { 0.5 } else { 1.0 };
            let phase = Complex64::from_polar(weight * h / horizon, -lambda * t);
            for (a, s) in acc.iter_mut().zip(&state) {
                *a += phase * s;
            }
            if m < count {
                // e^{i(t+h)H}ψ = e^{-i(-h)H} e^{itH}ψ
                state = evolver.evolve(&state, -h);
            }
        }
        images.push(acc);
    }
    Ok(ErgodicEstimate { lambda, horizon, step: h, images })
}

/// Thresholds for the bound/continuum proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationThresholds {
    /// Bound states need `λ < -energy_tolerance`.
    pub energy_tolerance: f64,
    /// Bound states need `sqrt⟨|x|²⟩ < radius_fraction · L`.
    pub radius_fraction: f64,
}

impl Default for ClassificationThresholds {
    fn default() -> Self {
        Self { energy_tolerance: 1e-6, radius_fraction: 0.25 }
    }
}

/// Result of [`classify_subspaces`].
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    pub labels: Vec<EigenClass>,
    /// `⟨|x|²⟩` of each eigenvector.
    pub localization: Vec<f64>,
    pub bound: Projector,
    pub continuum: Projector,
}

impl SubspaceSplit {
    pub fn bound_count(&self) -> usize {
        self.bound.rank()
    }
}

/// `⟨|x|²⟩` of each eigenvector, positions measured from the domain center.
pub fn localization(sd: &SpectralData, grid: &Grid) -> Result<Vec<f64>> {
    if grid.len() != sd.dim() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: sd.dim() });
    }
    let r2 = grid.sample(|x| x.iter().map(|c| c * c).sum::<f64>());
    Ok((0..sd.dim()).map(|j| sd.eigenvectors.col(j).iter().zip(&r2).map(|(v, r)| v.norm_sqr() * r).sum()).collect())
}

pub fn classify_subspaces(
    sd: &SpectralData,
    grid: &Grid,
    tail: PotentialTail,
    thresholds: ClassificationThresholds,
) -> Result<SubspaceSplit> {
    if tail != PotentialTail::Decaying {
        return Err(Error::NoDecayingTail);
    }
    let localization = localization(sd, grid)?;
    let radius = thresholds.radius_fraction * grid.extent();
    let labels: Vec<EigenClass> = sd
        .eigenvalues
        .iter()
        .zip(&localization)
        .map(|(&l, &r2)| {
            if l < -thresholds.energy_tolerance && r2 < radius * radius {
                EigenClass::Bound
            } else {
                EigenClass::ContinuumProxy
            }
        })
        .collect();
    let bound = sd.projector_from(labels.iter().enumerate().filter(|(_, c)| **c == EigenClass::Bound).map(|(i, _)| i));
    let continuum =
        sd.projector_from(labels.iter().enumerate().filter(|(_, c)| **c == EigenClass::ContinuumProxy).map(|(i, _)| i));
    Ok(SubspaceSplit { labels, localization, bound, continuum })
}

/// Lorentzian-broadened spectral measure
/// `(1/π) Σ_j ε |⟨v_j,ψ⟩|² / ((λ-λ_j)² + ε²)` from the eigendecomposition.
pub fn broadened_measure(sd: &SpectralData, lambda: f64, epsilon: f64, psi: &[Complex64]) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveBroadening(epsilon));
    }
    Ok(broadened_from_weights(sd.eigenvalues(), &sd.weights(psi), lambda, epsilon))
}

pub(crate) fn broadened_from_weights(eigenvalues: &[f64], weights: &[f64], lambda: f64, epsilon: f64) -> f64 {
    eigenvalues.iter().zip(weights).map(|(l, w)| w * epsilon / ((lambda - l).powi(2) + epsilon * epsilon)).sum::<f64>()
        / PI
}

/// `|ψ(t, x_probe)|²` on a time grid and its frequency content.
#[derive(Debug, Clone, Serialize)]
pub struct BeatSignal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Angular frequency spacing of the spectrum, `2π/T`.
    pub bin_width: f64,
    /// `(ω, |Ŝ(ω)|)` for the detrended, Hann-windowed signal.
    pub spectrum: Vec<(f64, f64)>,
    /// Local maxima above 10% of the largest spectral line, ascending in ω.
    pub peaks: Vec<f64>,
    /// Frequency of the largest line; 0 for a constant signal.
    pub dominant: f64,
}

/// Beats of a superposition `Σ a_j v_j` at lattice index `probe`.
///
/// `components` pairs eigen-indices with amplitudes; `Σ|a_j|²` must be 1.
pub fn beat_signal(
    sd: &SpectralData,
    components: &[(usize, Complex64)],
    probe: usize,
    times: &[f64],
) -> Result<BeatSignal> {
    if components.is_empty() {
        return Err(Error::InvalidSuperposition("no components".into()));
    }
    if let Some(&(j, _)) = components.iter().find(|(j, _)| *j >= sd.dim()) {
        return Err(Error::InvalidSuperposition(format!("eigen-index {j} out of range")));
    }
    let weight: f64 = components.iter().map(|(_, a)| a.norm_sqr()).sum();
    if (weight - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidSuperposition(format!("Σ|a_j|² = {weight}, expected 1")));
    }
    if probe >= sd.dim() {
        return Err(Error::DimensionMismatch { expected: sd.dim(), got: probe });
    }
    if times.len() < 8 {
        return Err(Error::TooFewSnapshots { needed: 8, got: times.len() });
    }
    let dt = times[1] - times[0];
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
    if !(dt > 0.0) || !uniform {
        return Err(Error::Unresolved("time grid must be uniform and increasing".into()));
    }
    let count = times.len();
    let duration = dt * count as f64;
    let bin_width = 2.0 * PI / duration;

    let mut energies: Vec<f64> = components.iter().map(|&(j, _)| sd.eigenvalues[j]).collect();
    energies.sort_by(f64::total_cmp);
    let mut beats: Vec<f64> = Vec::new();
    for (i, a) in energies.iter().enumerate() {
        for b in &energies[i + 1..] {
            let gap = b - a;
            if gap > CLUSTER_TOLERANCE {
                beats.push(gap);
            }
        }
    }
    beats.sort_by(f64::total_cmp);
    beats.dedup_by(|a, b| (*a - *b).abs() <= CLUSTER_TOLERANCE);
    if let Some(&max_beat) = beats.last() {
        let nyquist = PI / dt;
        if max_beat >= nyquist {
            return Err(Error::Unresolved(format!("largest gap {max_beat} is above the Nyquist frequency {nyquist}")));
        }
        let mut resolution = beats[0];
        for w in beats.windows(2) {
            resolution = resolution.min(w[1] - w[0]);
        }
        if bin_width > 0.5 * resolution {
            return Err(Error::Unresolved(format!(
                "frequency bin {bin_width} cannot separate gaps {resolution} apart; lengthen the time grid"
            )));
        }
    }

    let amplitudes: Vec<(f64, Complex64)> =
        components.iter().map(|&(j, a)| (sd.eigenvalues[j], a * sd.eigenvectors[(probe, j)])).collect();
    let values: Vec<f64> = times
        .iter()
        .map(|&t| amplitudes.iter().map(|(e, c)| c * Complex64::from_polar(1.0, -e * t)).sum::<Complex64>().norm_sqr())
        .collect();

    let mean = values.iter().sum::<f64>() / count as f64;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut buffer: Vec<Complex64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / count as f64).cos();
            Complex64::new((v - mean) * hann, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(count).process(&mut buffer);
    let spectrum: Vec<(f64, f64)> = buffer[..count / 2 + 1]
        .iter()
        .enumerate()
        .map(|(m, v)| (m as f64 * bin_width, v.norm() / count as f64))
        .collect();

    let flat = values.iter().all(|v| (v - mean).abs() <= 1e-12 * scale);
    let (peaks, dominant) = if flat {
        (Vec::new(), 0.0)
    } else {
        let top = spectrum[1..].iter().fold(0.0_f64, |m, (_, a)| m.max(*a));
        let peaks: Vec<f64> = (1..spectrum.len())
            .filter(|&m| {
                let a = spectrum[m].1;
                let left = spectrum[m - 1].1;
                let right = spectrum.get(m + 1).map_or(0.0, |s| s.1);
                a >= 0.1 * top && a >= left && a >= right
            })
            .map(|m| spectrum[m].0)
            .collect();
        let dominant = spectrum[1..].iter().max_by(|a, b| a.1.total_cmp(&b.1)).map_or(0.0, |s| s.0);
        (peaks, dominant)
    };

    Ok(BeatSignal { times: times.to_vec(), values, bin_width, spectrum, peaks, dominant })
}
